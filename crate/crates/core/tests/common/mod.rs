#![allow(dead_code)]

use mmfed_core::clusterpool::{assemble_global_pool, ClusterPool, ClusterSet, LocalClusters};
use mmfed_core::data::Instance;
use mmfed_core::model::{ModelConfig, MultimodalModel};
use mmfed_core::numkit::Matrix;
use mmfed_core::rng::SimRng;
use mmfed_core::Modality;
use rand::{Rng, SeedableRng};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

pub fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn central<F: FnMut(&[f64]) -> f64>(f: &mut F, probe: &mut [f64], i: usize, h: f64) -> f64 {
    let x = probe[i];
    probe[i] = x + h;
    let up = f(probe);
    probe[i] = x - h;
    let down = f(probe);
    probe[i] = x;
    (up - down) / (2.0 * h)
}

/// Central differences of `f` at `x`, compared entry by entry with
/// `analytic`. An entry that misses the tolerance is re-checked against a
/// Richardson extrapolation of the same central difference (steps h and h/2),
/// which removes the O(h^2) curvature term. Disagreements below the
/// rounding resolution of the difference quotient, `16 eps |f| / h`, count
/// as agreement. Returns the worst relative error and its index.
pub fn fd_compare<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], analytic: &[f64]) -> (f64, usize) {
    assert_eq!(x.len(), analytic.len());
    let mut probe = x.to_vec();
    let resolution = 16.0 * f64::EPSILON * f(&probe).abs().max(1.0) / FD_STEP;
    let mut worst = (0.0, 0);
    for i in 0..x.len() {
        let coarse = central(&mut f, &mut probe, i, FD_STEP);
        let mut e = rel_err(analytic[i], coarse);
        if e > FD_TOL {
            let fine = central(&mut f, &mut probe, i, FD_STEP / 2.0);
            e = e.min(rel_err(analytic[i], (4.0 * fine - coarse) / 3.0));
        }
        if (analytic[i] - coarse).abs() <= resolution {
            e = 0.0;
        }
        if e > worst.0 {
            worst = (e, i);
        }
    }
    worst
}

pub fn gaussian(rng: &mut SimRng, n: usize) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn random_matrix(rng: &mut SimRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, gaussian(rng, rows * cols)).unwrap()
}

pub fn small_config(rng: &mut SimRng) -> ModelConfig {
    ModelConfig {
        pet_dim: rng.random_range(2..6),
        mri_dim: rng.random_range(2..6),
        encoder_hidden: vec![rng.random_range(2..6)],
        embed_dim: rng.random_range(2..5),
        classifier_hidden: vec![rng.random_range(2..6)],
        classes: 3,
    }
}

/// A random instance whose present vectors match `cfg`.
pub fn random_instance(rng: &mut SimRng, cfg: &ModelConfig, kind: u8, label: usize) -> Instance {
    let pet = (kind != 1).then(|| gaussian(rng, cfg.pet_dim));
    let mri = (kind != 0).then(|| gaussian(rng, cfg.mri_dim));
    Instance { pet, mri, label }
}

pub fn random_batch(rng: &mut SimRng, cfg: &ModelConfig, n: usize) -> Vec<Instance> {
    (0..n)
        .map(|_| {
            let kind = rng.random_range(0..3u8);
            let label = rng.random_range(0..cfg.classes);
            random_instance(rng, cfg, kind, label)
        })
        .collect()
}

/// Pool with `1..=3` random centers per (modality, label), spread over two
/// pseudo-clients.
pub fn random_pool(rng: &mut SimRng, classes: usize, dim: usize) -> ClusterPool {
    let mut locals = vec![LocalClusters::empty(classes), LocalClusters::empty(classes)];
    for m in Modality::ALL {
        for label in 0..classes {
            for local in &mut locals {
                let k = rng.random_range(1..3);
                let centers = random_matrix(rng, k, dim);
                let sizes = (0..k).map(|_| rng.random_range(1..6)).collect();
                local.set(m, label, ClusterSet { centers, sizes });
            }
        }
    }
    assemble_global_pool(&locals).unwrap()
}

pub fn with_params(model: &MultimodalModel, flat: &[f64]) -> MultimodalModel {
    let mut m = model.clone();
    m.set_flat(flat).unwrap();
    m
}

/// A model with every parameter (biases included) drawn from N(0, 0.5²), so
/// no embedding sits exactly at the origin.
pub fn random_model(rng: &mut SimRng, cfg: &ModelConfig) -> MultimodalModel {
    let mut m = MultimodalModel::init(cfg, rng);
    let n = m.param_count();
    let flat: Vec<f64> = gaussian(rng, n).into_iter().map(|v| 0.5 * v).collect();
    m.set_flat(&flat).unwrap();
    m
}
