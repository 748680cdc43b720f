//! Instances, the synthetic ROI-feature generator, stratified k-fold splits,
//! the test-set modality mix, and the client partitioner that creates
//! client-level and instance-level modality incompleteness.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::Modality;
use crate::rng::{stream, tag, SimRng};

/// One participant: optional PET and MRI feature vectors plus a class label.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Instance {
    pub pet: Option<Vec<f64>>,
    pub mri: Option<Vec<f64>>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InstanceKind {
    PetOnly,
    MriOnly,
    Multimodal,
}

impl Instance {
    pub fn multimodal(pet: Vec<f64>, mri: Vec<f64>, label: usize) -> Self {
        Self {
            pet: Some(pet),
            mri: Some(mri),
            label,
        }
    }

    pub fn features(&self, modality: Modality) -> Option<&[f64]> {
        match modality {
            Modality::Pet => self.pet.as_deref(),
            Modality::Mri => self.mri.as_deref(),
        }
    }

    pub fn has(&self, modality: Modality) -> bool {
        self.features(modality).is_some()
    }

    /// `None` when both modalities are absent.
    pub fn kind(&self) -> Option<InstanceKind> {
        match (self.pet.is_some(), self.mri.is_some()) {
            (true, true) => Some(InstanceKind::Multimodal),
            (true, false) => Some(InstanceKind::PetOnly),
            (false, true) => Some(InstanceKind::MriOnly),
            (false, false) => None,
        }
    }

    /// The single present modality of a unimodal instance.
    pub fn sole_modality(&self) -> Option<Modality> {
        match self.kind()? {
            InstanceKind::PetOnly => Some(Modality::Pet),
            InstanceKind::MriOnly => Some(Modality::Mri),
            InstanceKind::Multimodal => None,
        }
    }

    pub fn drop_modality(&mut self, modality: Modality) {
        match modality {
            Modality::Pet => self.pet = None,
            Modality::Mri => self.mri = None,
        }
    }

    fn restrict(&mut self, kind: InstanceKind) {
        match kind {
            InstanceKind::PetOnly => self.mri = None,
            InstanceKind::MriOnly => self.pet = None,
            InstanceKind::Multimodal => {}
        }
    }

    pub fn validate(&self, pet_dim: usize, mri_dim: usize, classes: usize) -> Result<()> {
        if self.kind().is_none() {
            return Err(Error::InvalidInstance("both modalities absent".into()));
        }
        if self.label >= classes {
            return Err(Error::InvalidInstance(format!(
                "label {} outside 0..{classes}",
                self.label
            )));
        }
        for (m, dim) in [(Modality::Pet, pet_dim), (Modality::Mri, mri_dim)] {
            if let Some(x) = self.features(m) {
                if x.len() != dim {
                    return Err(Error::InvalidInstance(format!(
                        "{} vector has {} entries, expected {dim}",
                        m.name(),
                        x.len()
                    )));
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInstance(format!("non-finite {} value", m.name())));
                }
            }
        }
        Ok(())
    }
}

/// Counts used for modality-aware aggregation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ModalityCounts {
    pub total: usize,
    pub pet: usize,
    pub mri: usize,
}

impl ModalityCounts {
    pub fn of(data: &[Instance]) -> Self {
        data.iter().fold(Self::default(), |mut c, i| {
            c.total += 1;
            c.pet += usize::from(i.pet.is_some());
            c.mri += usize::from(i.mri.is_some());
            c
        })
    }

    pub fn for_modality(&self, m: Modality) -> usize {
        match m {
            Modality::Pet => self.pet,
            Modality::Mri => self.mri,
        }
    }
}

/// Highest label + 1.
pub fn num_classes(data: &[Instance]) -> usize {
    data.iter().map(|i| i.label + 1).max().unwrap_or(0)
}

pub fn class_histogram(data: &[Instance], classes: usize) -> Vec<usize> {
    let mut h = vec![0; classes];
    for i in data {
        h[i.label] += 1;
    }
    h
}

/// Floor that tolerates representation error, so 0.29 * 100 is 29.
fn floor_share(proportion: f64, n: usize) -> usize {
    libm::floor(proportion * n as f64 + 1e-9) as usize
}

/// Client-type and instance-type proportions.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartitionSpec {
    pub clients: usize,
    /// Share of PET-only clients.
    pub alpha_pet: f64,
    /// Share of MRI-only clients.
    pub alpha_mri: f64,
    /// Share of PET-only instances on multimodal clients.
    pub beta_pet: f64,
    /// Share of MRI-only instances on multimodal clients.
    pub beta_mri: f64,
}

impl PartitionSpec {
    pub fn symmetric(clients: usize, alpha: f64, beta: f64) -> Self {
        Self {
            clients,
            alpha_pet: alpha,
            alpha_mri: alpha,
            beta_pet: beta,
            beta_mri: beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 {
            return Err(Error::Spec("at least one client is required".into()));
        }
        let props = [self.alpha_pet, self.alpha_mri, self.beta_pet, self.beta_mri];
        if props.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Spec("proportions must lie in [0, 1]".into()));
        }
        if self.alpha_pet + self.alpha_mri > 1.0 + 1e-12 {
            return Err(Error::Spec("alpha_pet + alpha_mri exceeds 1".into()));
        }
        if self.beta_pet + self.beta_mri > 1.0 + 1e-12 {
            return Err(Error::Spec("beta_pet + beta_mri exceeds 1".into()));
        }
        let (p, m, _) = self.client_type_counts();
        if p + m > self.clients {
            return Err(Error::Spec("more unimodal clients than clients".into()));
        }
        Ok(())
    }

    /// (PET-only, MRI-only, multimodal) client counts; remainder goes to
    /// multimodal.
    pub fn client_type_counts(&self) -> (usize, usize, usize) {
        let p = floor_share(self.alpha_pet, self.clients);
        let m = floor_share(self.alpha_mri, self.clients);
        (p, m, self.clients.saturating_sub(p + m))
    }

    /// (PET-only, MRI-only, multimodal) instance counts on a multimodal
    /// client holding `n` instances.
    pub fn instance_type_counts(&self, n: usize) -> (usize, usize, usize) {
        let p = floor_share(self.beta_pet, n);
        let m = floor_share(self.beta_mri, n);
        (p, m, n - p - m)
    }
}

/// Parameters of the synthetic ROI-feature generator.
///
/// Each class owns a latent mean; class means are mutually orthogonal with
/// pairwise distance `2 * separation`. An instance draws a shared latent
/// deviation and a per-modality deviation, mixed by `coupling`, and each
/// modality maps its latent through its own fixed random affine map before
/// feature-level noise is added. All randomness is scaled by `noise`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SyntheticSpec {
    pub class_counts: Vec<usize>,
    pub feature_dim: usize,
    pub latent_dim: usize,
    pub separation: f64,
    pub noise: f64,
    pub coupling: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            class_counts: vec![297, 451, 167],
            feature_dim: 90,
            latent_dim: 8,
            separation: 2.0,
            noise: 1.0,
            coupling: 0.7,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.class_counts.is_empty() || self.class_counts.contains(&0) {
            return Err(Error::Spec("class counts must be positive".into()));
        }
        if self.feature_dim == 0 || self.latent_dim == 0 {
            return Err(Error::Spec("dimensions must be positive".into()));
        }
        if self.latent_dim < self.class_counts.len() {
            return Err(Error::Spec("latent_dim must be at least the class count".into()));
        }
        if !(self.noise >= 0.0) || !self.separation.is_finite() || !self.noise.is_finite() {
            return Err(Error::Spec("noise must be non-negative and finite".into()));
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return Err(Error::Spec("coupling must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

fn gaussian_vec(rng: &mut SimRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Orthonormal rows via Gram-Schmidt on Gaussian draws.
fn orthonormal_rows(rng: &mut SimRng, k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(k);
    while out.len() < k {
        let mut v = gaussian_vec(rng, dim);
        for u in &out {
            let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
        let n = libm::sqrt(v.iter().map(|a| a * a).sum::<f64>());
        if n > 1e-6 {
            v.iter_mut().for_each(|a| *a /= n);
            out.push(v);
        }
    }
    out
}

struct ModalityMap {
    weights: Vec<Vec<f64>>,
    offset: Vec<f64>,
}

impl ModalityMap {
    fn draw(rng: &mut SimRng, feature_dim: usize, latent_dim: usize) -> Self {
        let scale = 1.0 / libm::sqrt(latent_dim as f64);
        let weights = (0..feature_dim)
            .map(|_| gaussian_vec(rng, latent_dim).into_iter().map(|w| w * scale).collect())
            .collect();
        let offset = gaussian_vec(rng, feature_dim);
        Self { weights, offset }
    }

    fn apply(&self, latent: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.offset)
            .map(|(w, b)| b + w.iter().zip(latent).map(|(a, z)| a * z).sum::<f64>())
            .collect()
    }
}

/// Draws a fully multimodal synthetic dataset, ordered by class.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<Instance>> {
    spec.validate()?;
    let mut rng = stream(spec.seed, &[tag::SYNTHETIC]);
    let scale = libm::sqrt(2.0) * spec.separation;
    let means: Vec<Vec<f64>> = orthonormal_rows(&mut rng, spec.class_counts.len(), spec.latent_dim)
        .into_iter()
        .map(|u| u.into_iter().map(|v| v * scale).collect())
        .collect();
    let maps = [
        ModalityMap::draw(&mut rng, spec.feature_dim, spec.latent_dim),
        ModalityMap::draw(&mut rng, spec.feature_dim, spec.latent_dim),
    ];
    let own = libm::sqrt(1.0 - spec.coupling * spec.coupling);
    let total: usize = spec.class_counts.iter().sum();
    let mut out = Vec::with_capacity(total);
    for (label, &count) in spec.class_counts.iter().enumerate() {
        for _ in 0..count {
            let shared = gaussian_vec(&mut rng, spec.latent_dim);
            let mut views = maps.iter().map(|map| {
                let private = gaussian_vec(&mut rng, spec.latent_dim);
                let latent: Vec<f64> = means[label]
                    .iter()
                    .zip(shared.iter().zip(&private))
                    .map(|(mu, (s, p))| mu + spec.noise * (spec.coupling * s + own * p))
                    .collect();
                let mut x = map.apply(&latent);
                let feature_noise = gaussian_vec(&mut rng, spec.feature_dim);
                x.iter_mut()
                    .zip(feature_noise)
                    .for_each(|(v, e)| *v += spec.noise * e);
                x
            });
            let pet = views.next().expect("two maps");
            let mri = views.next().expect("two maps");
            out.push(Instance::multimodal(pet, mri, label));
        }
    }
    Ok(out)
}

/// Indices grouped by label, each group shuffled.
fn shuffled_by_class(data: &[Instance], rng: &mut SimRng) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); num_classes(data)];
    for (i, inst) in data.iter().enumerate() {
        groups[inst.label].push(i);
    }
    for g in &mut groups {
        g.shuffle(rng);
    }
    groups
}

/// Deals class-ordered indices round-robin into `k` buckets, continuing the
/// rotation across classes so bucket sizes differ by at most one.
fn deal_stratified(groups: &[Vec<usize>], k: usize) -> Vec<Vec<usize>> {
    let mut buckets = vec![Vec::new(); k];
    let mut next = 0;
    for g in groups {
        for &i in g {
            buckets[next % k].push(i);
            next += 1;
        }
    }
    buckets
}

/// Label-stratified k-fold assignment: returns the index set of each fold.
pub fn stratified_folds(data: &[Instance], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if data.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    if folds < 2 {
        return Err(Error::Spec("at least two folds are required".into()));
    }
    let hist = class_histogram(data, num_classes(data));
    if let Some((c, &n)) = hist.iter().enumerate().find(|(_, &n)| n > 0 && n < folds) {
        return Err(Error::Spec(format!(
            "class {c} has {n} members, fewer than {folds} folds"
        )));
    }
    let mut rng = stream(seed, &[tag::FOLDS]);
    let mut buckets = deal_stratified(&shuffled_by_class(data, &mut rng), folds);
    for b in &mut buckets {
        b.sort_unstable();
    }
    Ok(buckets)
}

/// How the held-out fold is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SplitReading {
    /// The held-out fold is the test set (test:train = 1:4 for five folds).
    #[default]
    Cv,
    /// The held-out fold is the training set (train:test = 1:4).
    Literal,
}

/// Splits off fold `fold` of a stratified `folds`-way partition.
pub fn split_train_test(
    data: &[Instance],
    fold: usize,
    folds: usize,
    seed: u64,
    reading: SplitReading,
) -> Result<(Vec<Instance>, Vec<Instance>)> {
    if fold >= folds {
        return Err(Error::Spec(format!("fold {fold} out of range 0..{folds}")));
    }
    let buckets = stratified_folds(data, folds, seed)?;
    let mut held = vec![false; data.len()];
    for &i in &buckets[fold] {
        held[i] = true;
    }
    let (mut inside, mut outside) = (Vec::new(), Vec::new());
    for (inst, h) in data.iter().zip(held) {
        if h {
            inside.push(inst.clone());
        } else {
            outside.push(inst.clone());
        }
    }
    Ok(match reading {
        SplitReading::Cv => (outside, inside),
        SplitReading::Literal => (inside, outside),
    })
}

/// Assigns instance types to class-ordered positions by cycling through the
/// three types and skipping any whose quota is spent.
fn assign_kinds(order: &[usize], quotas: [usize; 3], start: usize) -> Vec<(usize, InstanceKind)> {
    const KINDS: [InstanceKind; 3] = [
        InstanceKind::PetOnly,
        InstanceKind::MriOnly,
        InstanceKind::Multimodal,
    ];
    let mut left = quotas;
    let mut cursor = start % 3;
    let mut out = Vec::with_capacity(order.len());
    for &i in order {
        while left[cursor] == 0 {
            cursor = (cursor + 1) % 3;
        }
        left[cursor] -= 1;
        out.push((i, KINDS[cursor]));
        cursor = (cursor + 1) % 3;
    }
    out
}

fn restrict_stratified(
    data: &mut [Instance],
    members: &[usize],
    quotas: [usize; 3],
    rng: &mut SimRng,
) {
    let mut order: Vec<usize> = members.to_vec();
    order.shuffle(rng);
    order.sort_by_key(|&i| data[i].label);
    let start = rng.random_range(0..3);
    for (i, kind) in assign_kinds(&order, quotas, start) {
        data[i].restrict(kind);
    }
}

/// Makes a third of the test set PET-only, a third MRI-only and the rest
/// multimodal, stratified by label.
pub fn apply_test_modality_mix(test: &[Instance], seed: u64) -> Vec<Instance> {
    let mut out = test.to_vec();
    let n = out.len();
    let q = n / 3;
    let mut rng = stream(seed, &[tag::TEST_MIX]);
    let all: Vec<usize> = (0..n).collect();
    restrict_stratified(&mut out, &all, [q, q, n - 2 * q], &mut rng);
    out
}

/// Splits `train` into label-stratified, equal-size client shards and drops
/// modalities according to `spec`. Client order: PET-only clients first,
/// then MRI-only, then multimodal.
pub fn partition_clients(
    train: &[Instance],
    spec: &PartitionSpec,
    seed: u64,
) -> Result<Vec<Vec<Instance>>> {
    spec.validate()?;
    let mut rng = stream(seed, &[tag::PARTITION]);
    let shards = deal_stratified(&shuffled_by_class(train, &mut rng), spec.clients);
    let (n_pet, n_mri, _) = spec.client_type_counts();
    let mut clients = Vec::with_capacity(spec.clients);
    for (c, idx) in shards.into_iter().enumerate() {
        let mut data: Vec<Instance> = idx.iter().map(|&i| train[i].clone()).collect();
        if c < n_pet {
            data.iter_mut().for_each(|d| d.restrict(InstanceKind::PetOnly));
        } else if c < n_pet + n_mri {
            data.iter_mut().for_each(|d| d.restrict(InstanceKind::MriOnly));
        } else {
            let (p, m, b) = spec.instance_type_counts(data.len());
            let members: Vec<usize> = (0..data.len()).collect();
            restrict_stratified(&mut data, &members, [p, m, b], &mut rng);
        }
        clients.push(data);
    }
    Ok(clients)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labelled(counts: &[usize]) -> Vec<Instance> {
        let mut v = Vec::new();
        for (label, &c) in counts.iter().enumerate() {
            for k in 0..c {
                v.push(Instance::multimodal(vec![k as f64], vec![-(k as f64)], label));
            }
        }
        v
    }

    fn kinds(data: &[Instance]) -> (usize, usize, usize) {
        data.iter().fold((0, 0, 0), |(p, m, b), i| match i.kind().unwrap() {
            InstanceKind::PetOnly => (p + 1, m, b),
            InstanceKind::MriOnly => (p, m + 1, b),
            InstanceKind::Multimodal => (p, m, b + 1),
        })
    }

    #[test]
    fn client_type_arithmetic() {
        assert_eq!(PartitionSpec::symmetric(10, 0.4, 0.2).client_type_counts(), (4, 4, 2));
        assert_eq!(PartitionSpec::symmetric(10, 0.2, 0.2).client_type_counts(), (2, 2, 6));
        assert_eq!(PartitionSpec::symmetric(10, 0.4, 0.2).instance_type_counts(100), (20, 20, 60));
        assert_eq!(PartitionSpec::symmetric(10, 0.29, 0.29).instance_type_counts(100), (29, 29, 42));
        assert_eq!(PartitionSpec::symmetric(3, 0.3, 0.0).client_type_counts(), (0, 0, 3));
    }

    #[test]
    fn spec_validation() {
        assert!(PartitionSpec::symmetric(10, 0.6, 0.0).validate().is_err());
        assert!(PartitionSpec::symmetric(10, 0.0, 0.6).validate().is_err());
        assert!(PartitionSpec::symmetric(0, 0.0, 0.0).validate().is_err());
        assert!(PartitionSpec::symmetric(10, 0.5, 0.5).validate().is_ok());
        assert!(PartitionSpec::symmetric(10, -0.1, 0.0).validate().is_err());
    }

    #[test]
    fn fully_multimodal_partition_keeps_everything() {
        let data = labelled(&[30, 40, 20]);
        let clients = partition_clients(&data, &PartitionSpec::symmetric(4, 0.0, 0.0), 1).unwrap();
        assert_eq!(clients.iter().map(Vec::len).sum::<usize>(), 90);
        for c in &clients {
            assert_eq!(kinds(c).2, c.len());
        }
    }

    #[test]
    fn unimodal_clients_come_first() {
        let data = labelled(&[50, 50, 50]);
        let clients = partition_clients(&data, &PartitionSpec::symmetric(10, 0.4, 0.2), 3).unwrap();
        for (i, c) in clients.iter().enumerate() {
            let counts = ModalityCounts::of(c);
            match i {
                0..=3 => assert_eq!((counts.pet, counts.mri), (c.len(), 0)),
                4..=7 => assert_eq!((counts.pet, counts.mri), (0, c.len())),
                _ => {
                    let (p, m, b) = kinds(c);
                    assert_eq!((p, m, b), (3, 3, 9));
                }
            }
        }
    }

    #[test]
    fn beta_split_on_a_hundred_instance_client() {
        let data = labelled(&[34, 33, 33]);
        let clients = partition_clients(&data, &PartitionSpec::symmetric(1, 0.0, 0.2), 5).unwrap();
        assert_eq!(kinds(&clients[0]), (20, 20, 60));
    }

    #[test]
    fn test_mix_rounding() {
        assert_eq!(kinds(&apply_test_modality_mix(&labelled(&[3, 3, 3]), 0)), (3, 3, 3));
        assert_eq!(kinds(&apply_test_modality_mix(&labelled(&[4, 3, 3]), 0)), (3, 3, 4));
        assert_eq!(kinds(&apply_test_modality_mix(&labelled(&[4, 4, 3]), 9)), (3, 3, 5));
        assert!(apply_test_modality_mix(&[], 0).is_empty());
    }

    #[test]
    fn folds_partition_the_data() {
        let data = labelled(&[297, 451, 167]);
        let folds = stratified_folds(&data, 5, 11).unwrap();
        let mut seen = vec![false; data.len()];
        for f in &folds {
            assert_eq!(f.len(), 183);
            for &i in f {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn fold_errors() {
        let data = labelled(&[10, 4]);
        assert!(matches!(stratified_folds(&data, 5, 0), Err(Error::Spec(_))));
        assert!(stratified_folds(&[], 5, 0).is_err());
        assert!(split_train_test(&labelled(&[10, 10]), 5, 5, 0, SplitReading::Cv).is_err());
    }

    #[test]
    fn split_readings_are_complementary() {
        let data = labelled(&[20, 30, 10]);
        let (tr, te) = split_train_test(&data, 2, 5, 4, SplitReading::Cv).unwrap();
        assert_eq!((tr.len(), te.len()), (48, 12));
        let (tr2, te2) = split_train_test(&data, 2, 5, 4, SplitReading::Literal).unwrap();
        assert_eq!((tr2, te2), (te, tr));
    }

    #[test]
    fn synthetic_default_histogram() {
        let d = generate_synthetic(&SyntheticSpec::default()).unwrap();
        assert_eq!(d.len(), 915);
        assert_eq!(class_histogram(&d, 3), vec![297, 451, 167]);
        assert!(d.iter().all(|i| i.validate(90, 90, 3).is_ok()));
    }

    #[test]
    fn zero_noise_collapses_classes() {
        let spec = SyntheticSpec {
            class_counts: vec![3, 4],
            noise: 0.0,
            ..SyntheticSpec::default()
        };
        let d = generate_synthetic(&spec).unwrap();
        for w in d.windows(2).filter(|w| w[0].label == w[1].label) {
            assert_eq!(w[0], w[1]);
        }
        assert_ne!(d[0].pet, d[3].pet);
    }

    #[test]
    fn synthetic_validation() {
        let bad = SyntheticSpec {
            class_counts: vec![3, 0],
            ..SyntheticSpec::default()
        };
        assert!(generate_synthetic(&bad).is_err());
        let bad = SyntheticSpec {
            noise: -1.0,
            ..SyntheticSpec::default()
        };
        assert!(generate_synthetic(&bad).is_err());
    }

    #[test]
    fn instance_validation() {
        let i = Instance {
            pet: None,
            mri: None,
            label: 0,
        };
        assert!(i.validate(1, 1, 2).is_err());
        let i = Instance::multimodal(vec![0.0], vec![0.0, 1.0], 0);
        assert!(i.validate(1, 1, 2).is_err());
        let i = Instance::multimodal(vec![0.0], vec![0.0], 2);
        assert!(i.validate(1, 1, 2).is_err());
    }
}
