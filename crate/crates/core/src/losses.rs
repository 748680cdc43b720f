//! Training objectives and their exact gradients.
//!
//! * cross-entropy on zero-fill predictions;
//! * supervised contrastive alignment over local embeddings plus the global
//!   cluster centers of the same modality (centers are constants);
//! * modality completion: a unimodal instance is classified once per global
//!   center of its missing modality and label, and the cross-entropies are
//!   averaged with cluster-size weights;
//! * the overall client objective combining the three.

use alloc::vec;
use alloc::vec::Vec;

use crate::clusterpool::ClusterPool;
use crate::data::Instance;
use crate::error::{check_dim, Error, Result};
use crate::model::{gather, Modality, ModelGrads, MultimodalModel};
use crate::numkit::{Matrix, MlpCache};

/// Coefficients of the overall objective and the contrastive temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub tau: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            tau: 0.1,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Spec("tau must be positive".into()));
        }
        if !(self.lambda1 >= 0.0) || !(self.lambda2 >= 0.0) {
            return Err(Error::Spec("loss coefficients must be non-negative".into()));
        }
        Ok(())
    }
}

fn log_softmax_row(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(row.iter().map(|v| libm::exp(v - max)).sum::<f64>());
    for (o, v) in out.iter_mut().zip(row) {
        *o = v - lse;
    }
}

/// Row-wise softmax.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..logits.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - max);
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// `Σ_r weights[r] · CE(logits_r, labels_r)` and its gradient w.r.t. logits.
pub fn weighted_cross_entropy(
    logits: &Matrix,
    labels: &[usize],
    weights: &[f64],
) -> Result<(f64, Matrix)> {
    check_dim("cross-entropy labels", logits.rows(), labels.len())?;
    check_dim("cross-entropy weights", logits.rows(), weights.len())?;
    let classes = logits.cols();
    let mut grad = Matrix::zeros(logits.rows(), classes);
    let mut logp = vec![0.0; classes];
    let mut loss = 0.0;
    for (r, (&y, &w)) in labels.iter().zip(weights).enumerate() {
        if y >= classes {
            return Err(Error::InvalidInput(alloc::format!(
                "label {y} outside 0..{classes}"
            )));
        }
        log_softmax_row(logits.row(r), &mut logp);
        loss -= w * logp[y];
        let g = grad.row_mut(r);
        for (k, (gk, lp)) in g.iter_mut().zip(&logp).enumerate() {
            *gk = w * (libm::exp(*lp) - if k == y { 1.0 } else { 0.0 });
        }
    }
    Ok((loss, grad))
}

/// Mean cross-entropy over the batch; gradient `(softmax − onehot)/b`.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if logits.rows() == 0 {
        return Err(Error::EmptyInput("cross-entropy batch"));
    }
    let w = vec![1.0 / logits.rows() as f64; logits.rows()];
    weighted_cross_entropy(logits, labels, &w)
}

/// Local embeddings followed by the global centers of one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedBatch {
    pub embeddings: Matrix,
    pub labels: Vec<usize>,
    pub trainable: Vec<bool>,
}

impl AugmentedBatch {
    pub fn local(embeddings: Matrix, labels: Vec<usize>) -> Result<Self> {
        check_dim("batch labels", embeddings.rows(), labels.len())?;
        let trainable = vec![true; labels.len()];
        Ok(Self {
            embeddings,
            labels,
            trainable,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn trainable_count(&self) -> usize {
        self.trainable.iter().filter(|&&t| t).count()
    }
}

/// Appends every global center of `modality`, label by label in pool order,
/// labelling each with its class and marking it constant.
pub fn build_augmented_batch(
    embeddings: &Matrix,
    labels: &[usize],
    pool: &ClusterPool,
    modality: Modality,
) -> Result<AugmentedBatch> {
    let mut batch = AugmentedBatch::local(embeddings.clone(), labels.to_vec())?;
    for (label, entry) in pool.entries(modality).iter().enumerate() {
        if entry.is_empty() {
            continue;
        }
        if batch.embeddings.rows() > 0 {
            check_dim("pool center width", batch.embeddings.cols(), entry.centers.cols())?;
        }
        batch.embeddings = batch.embeddings.vstack(&entry.centers)?;
        batch.labels.extend(core::iter::repeat_n(label, entry.len()));
        batch.trainable.extend(core::iter::repeat_n(false, entry.len()));
    }
    Ok(batch)
}

const ZERO_NORM: f64 = 1e-12;

/// Supervised contrastive loss with cosine similarity at temperature `tau`.
///
/// Every row is an anchor; anchors without a same-label partner are left out
/// of the average. Returns the gradient for the trainable rows only, in their
/// batch order.
pub fn supervised_contrastive(batch: &AugmentedBatch, tau: f64) -> Result<(f64, Matrix)> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput("tau must be positive".into()));
    }
    let n = batch.len();
    check_dim("contrastive mask", n, batch.trainable.len())?;
    check_dim("contrastive rows", n, batch.embeddings.rows())?;
    let d = batch.embeddings.cols();
    let trainable_rows: Vec<usize> = (0..n).filter(|&i| batch.trainable[i]).collect();
    let mut grad = Matrix::zeros(trainable_rows.len(), d);
    if n < 2 {
        return Ok((0.0, grad));
    }

    let norms: Vec<f64> = batch.embeddings.iter_rows().map(crate::numkit::matrix_norm).collect();
    let mut unit = batch.embeddings.clone();
    for (i, &nrm) in norms.iter().enumerate() {
        let s = if nrm > ZERO_NORM { 1.0 / nrm } else { 0.0 };
        unit.row_mut(i).iter_mut().for_each(|v| *v *= s);
    }
    let sim = unit.matmul_transpose_b(&unit)?;

    let positives: Vec<usize> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&p| p != i && batch.labels[p] == batch.labels[i])
                .count()
        })
        .collect();
    let anchors = positives.iter().filter(|&&p| p > 0).count();
    if anchors == 0 {
        return Ok((0.0, grad));
    }
    let inv_anchors = 1.0 / anchors as f64;

    // coef[i][j] accumulates dL/ds_ij from anchor i.
    let mut coef = Matrix::zeros(n, n);
    let mut loss = 0.0;
    for i in 0..n {
        if positives[i] == 0 {
            continue;
        }
        let row = sim.row(i);
        let max = (0..n)
            .filter(|&a| a != i)
            .map(|a| row[a] / tau)
            .fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = (0..n)
            .filter(|&a| a != i)
            .map(|a| libm::exp(row[a] / tau - max))
            .sum();
        let lse = max + libm::log(denom);
        let inv_pos = 1.0 / positives[i] as f64;
        let mut term = 0.0;
        let c = coef.row_mut(i);
        for a in 0..n {
            if a == i {
                continue;
            }
            let soft = libm::exp(row[a] / tau - lse);
            let mut g = soft / tau;
            if batch.labels[a] == batch.labels[i] {
                term -= inv_pos * (row[a] / tau - lse);
                g -= inv_pos / tau;
            }
            c[a] = inv_anchors * g;
        }
        loss += inv_anchors * term;
    }

    for (out_row, &i) in trainable_rows.iter().enumerate() {
        if norms[i] <= ZERO_NORM {
            continue;
        }
        let ui = unit.row(i);
        let inv_norm = 1.0 / norms[i];
        let g = grad.row_mut(out_row);
        for j in 0..n {
            if j == i {
                continue;
            }
            let c = coef.get(i, j) + coef.get(j, i);
            if c == 0.0 {
                continue;
            }
            let s = sim.get(i, j);
            for ((gk, uj), uik) in g.iter_mut().zip(unit.row(j)).zip(ui) {
                *gk += c * inv_norm * (uj - s * uik);
            }
        }
    }
    Ok((loss, grad))
}

/// Contrastive loss of both modalities, weighted by their local row counts,
/// with gradients for the local PET and MRI embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveTerms {
    pub loss: f64,
    pub pet_loss: f64,
    pub mri_loss: f64,
    pub pet_grad: Matrix,
    pub mri_grad: Matrix,
}

pub fn contrastive_combined(
    pet: &Matrix,
    pet_labels: &[usize],
    mri: &Matrix,
    mri_labels: &[usize],
    pool: &ClusterPool,
    tau: f64,
) -> Result<ContrastiveTerms> {
    check_dim("pet labels", pet.rows(), pet_labels.len())?;
    check_dim("mri labels", mri.rows(), mri_labels.len())?;
    let (np, nm) = (pet_labels.len(), mri_labels.len());
    if np + nm == 0 {
        return Err(Error::EmptyInput("contrastive batch"));
    }
    let total = (np + nm) as f64;
    let side = |z: &Matrix, y: &[usize], m: Modality| -> Result<(f64, Matrix)> {
        if y.is_empty() {
            return Ok((0.0, Matrix::zeros(0, z.cols())));
        }
        supervised_contrastive(&build_augmented_batch(z, y, pool, m)?, tau)
    };
    let (pet_loss, mut pet_grad) = side(pet, pet_labels, Modality::Pet)?;
    let (mri_loss, mut mri_grad) = side(mri, mri_labels, Modality::Mri)?;
    let (wp, wm) = (np as f64 / total, nm as f64 / total);
    pet_grad.scale(wp);
    mri_grad.scale(wm);
    Ok(ContrastiveTerms {
        loss: wp * pet_loss + wm * mri_loss,
        pet_loss,
        mri_loss,
        pet_grad,
        mri_grad,
    })
}

/// One modality's encoder pass over a batch.
struct Encoded {
    /// Row of each instance in `z`, if it carries the modality.
    row_of: Vec<Option<usize>>,
    idx: Vec<usize>,
    z: Matrix,
    cache: Option<MlpCache>,
}

impl Encoded {
    fn run(model: &MultimodalModel, batch: &[Instance], m: Modality) -> Result<Self> {
        let (idx, xs) = gather(batch, m, model.input_dim(m))?;
        let mut row_of = vec![None; batch.len()];
        for (r, &i) in idx.iter().enumerate() {
            row_of[i] = Some(r);
        }
        let (z, cache) = if idx.is_empty() {
            (Matrix::zeros(0, model.embed_dim()), None)
        } else {
            let (z, c) = model.encoder(m).forward(&xs)?;
            (z, Some(c))
        };
        Ok(Self {
            row_of,
            idx,
            z,
            cache,
        })
    }

    fn labels(&self, batch: &[Instance]) -> Vec<usize> {
        self.idx.iter().map(|&i| batch[i].label).collect()
    }
}

struct McOutcome {
    loss: f64,
    covered: usize,
    skipped: usize,
}

/// Modality-completion term over the unimodal instances of `batch`, scaled
/// by `scale`. Accumulates classifier gradients into `grads` and embedding
/// gradients into `dz`.
fn completion_term(
    model: &MultimodalModel,
    batch: &[Instance],
    enc: &[Encoded; 2],
    pool: &ClusterPool,
    scale: f64,
    grads: &mut ModelGrads,
    dz: &mut [Matrix; 2],
) -> Result<McOutcome> {
    let d = model.embed_dim();
    struct Job {
        avail: Modality,
        row: usize,
        start: usize,
        count: usize,
    }
    let mut jobs = Vec::new();
    let mut skipped = 0;
    let mut fused = Matrix::zeros(0, 2 * d);
    let mut labels = Vec::new();
    let mut weights = Vec::new();
    for (i, inst) in batch.iter().enumerate() {
        let Some(avail) = inst.sole_modality() else {
            continue;
        };
        let missing = avail.other();
        let Some(entry) = pool.entry(missing, inst.label) else {
            skipped += 1;
            continue;
        };
        check_dim("proxy center width", d, entry.centers.cols())?;
        let row = enc[avail.slot()].row_of[i].expect("unimodal instance was encoded");
        let z = enc[avail.slot()].z.row(row);
        let total = entry.total_size() as f64;
        let start = labels.len();
        let mut buf = vec![0.0; 2 * d];
        for (c, &size) in entry.centers.iter_rows().zip(&entry.sizes) {
            buf[avail.slot() * d..avail.slot() * d + d].copy_from_slice(z);
            buf[missing.slot() * d..missing.slot() * d + d].copy_from_slice(c);
            fused.push_row(&buf)?;
            labels.push(inst.label);
            weights.push(size as f64 / total);
        }
        jobs.push(Job {
            avail,
            row,
            start,
            count: entry.len(),
        });
    }
    if skipped > 0 {
        log::warn!("modality completion skipped {skipped} instance(s) without proxy centers");
    }
    let covered = jobs.len();
    if covered == 0 {
        return Ok(McOutcome {
            loss: 0.0,
            covered,
            skipped,
        });
    }
    let inv = 1.0 / covered as f64;
    weights.iter_mut().for_each(|w| *w *= inv);
    let (logits, cache) = model.classifier.forward(&fused)?;
    let (loss, mut dlogits) = weighted_cross_entropy(&logits, &labels, &weights)?;
    dlogits.scale(scale);
    let (g, dfused) = model.classifier.backward(&cache, &dlogits)?;
    grads.classifier.add_scaled(&g, 1.0)?;
    for job in &jobs {
        let s = job.avail.slot();
        let target = dz[s].row_mut(job.row);
        for r in job.start..job.start + job.count {
            let src = &dfused.row(r)[s * d..s * d + d];
            for (t, v) in target.iter_mut().zip(src) {
                *t += v;
            }
        }
    }
    Ok(McOutcome {
        loss,
        covered,
        skipped,
    })
}

fn encoder_backward(
    model: &MultimodalModel,
    enc: &[Encoded; 2],
    dz: &[Matrix; 2],
    grads: &mut ModelGrads,
) -> Result<()> {
    for m in Modality::ALL {
        let e = &enc[m.slot()];
        if let Some(cache) = &e.cache {
            let (g, _) = model.encoder(m).backward(cache, &dz[m.slot()])?;
            grads.encoder_mut(m).add_scaled(&g, 1.0)?;
        }
    }
    Ok(())
}

/// Size-weighted modality-completion loss of one unimodal instance. Returns
/// `None` when the pool has no center for its missing modality and label.
pub fn modality_completion(
    model: &MultimodalModel,
    instance: &Instance,
    pool: &ClusterPool,
) -> Result<Option<(f64, ModelGrads)>> {
    if instance.sole_modality().is_none() {
        return Err(Error::InvalidInstance(
            "modality completion needs a unimodal instance".into(),
        ));
    }
    let batch = core::slice::from_ref(instance);
    let enc = [
        Encoded::run(model, batch, Modality::Pet)?,
        Encoded::run(model, batch, Modality::Mri)?,
    ];
    let mut grads = model.zeros_like();
    let mut dz = [
        Matrix::zeros(enc[0].z.rows(), model.embed_dim()),
        Matrix::zeros(enc[1].z.rows(), model.embed_dim()),
    ];
    let out = completion_term(model, batch, &enc, pool, 1.0, &mut grads, &mut dz)?;
    if out.covered == 0 {
        return Ok(None);
    }
    encoder_backward(model, &enc, &dz, &mut grads)?;
    Ok(Some((out.loss, grads)))
}

/// Which auxiliary terms to include.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terms {
    pub contrastive: bool,
    pub completion: bool,
}

impl Terms {
    pub const ALL: Terms = Terms {
        contrastive: true,
        completion: true,
    };
    pub const NONE: Terms = Terms {
        contrastive: false,
        completion: false,
    };
}

/// Per-term values of one objective evaluation. Disabled terms are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub total: f64,
    pub ce: f64,
    pub ctr: Option<f64>,
    pub mc: Option<f64>,
    pub mc_covered: usize,
    pub mc_skipped: usize,
}

/// Cross-entropy on zero-fill predictions plus `λ1·L_CTR + λ2·L_MC`.
///
/// A term is evaluated only when enabled in `terms` and its coefficient is
/// non-zero. Without a pool the contrastive term uses local embeddings only
/// and the completion term covers nothing.
pub fn overall_loss(
    model: &MultimodalModel,
    batch: &[Instance],
    pool: Option<&ClusterPool>,
    weights: &LossWeights,
    terms: Terms,
) -> Result<(LossReport, ModelGrads)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("client batch"));
    }
    let d = model.embed_dim();
    let enc = [
        Encoded::run(model, batch, Modality::Pet)?,
        Encoded::run(model, batch, Modality::Mri)?,
    ];
    for (i, inst) in batch.iter().enumerate() {
        if inst.kind().is_none() {
            return Err(Error::InvalidInstance(alloc::format!(
                "instance {i} has no modality"
            )));
        }
    }
    let mut grads = model.zeros_like();
    let mut dz = [
        Matrix::zeros(enc[0].z.rows(), d),
        Matrix::zeros(enc[1].z.rows(), d),
    ];

    let mut fused = Matrix::zeros(batch.len(), 2 * d);
    for (s, e) in enc.iter().enumerate() {
        for (r, &i) in e.idx.iter().enumerate() {
            fused.row_mut(i)[s * d..s * d + d].copy_from_slice(e.z.row(r));
        }
    }
    let labels: Vec<usize> = batch.iter().map(|i| i.label).collect();
    let (logits, cache) = model.classifier.forward(&fused)?;
    let (ce, dlogits) = cross_entropy(&logits, &labels)?;
    let (g, dfused) = model.classifier.backward(&cache, &dlogits)?;
    grads.classifier.add_scaled(&g, 1.0)?;
    for (s, e) in enc.iter().enumerate() {
        for (r, &i) in e.idx.iter().enumerate() {
            dz[s].row_mut(r).copy_from_slice(&dfused.row(i)[s * d..s * d + d]);
        }
    }

    let mut report = LossReport {
        total: ce,
        ce,
        ctr: None,
        mc: None,
        mc_covered: 0,
        mc_skipped: 0,
    };

    let empty;
    let pool = match pool {
        Some(p) => p,
        None => {
            empty = ClusterPool::empty(0, d);
            &empty
        }
    };

    if terms.contrastive && weights.lambda1 > 0.0 {
        let t = contrastive_combined(
            &enc[0].z,
            &enc[0].labels(batch),
            &enc[1].z,
            &enc[1].labels(batch),
            pool,
            weights.tau,
        )?;
        dz[0].add_scaled(&t.pet_grad, weights.lambda1)?;
        dz[1].add_scaled(&t.mri_grad, weights.lambda1)?;
        report.ctr = Some(t.loss);
        report.total += weights.lambda1 * t.loss;
    }

    if terms.completion && weights.lambda2 > 0.0 {
        let out = completion_term(model, batch, &enc, pool, weights.lambda2, &mut grads, &mut dz)?;
        report.mc = Some(out.loss);
        report.mc_covered = out.covered;
        report.mc_skipped = out.skipped;
        report.total += weights.lambda2 * out.loss;
    }

    encoder_backward(model, &enc, &dz, &mut grads)?;
    Ok((report, grads))
}
