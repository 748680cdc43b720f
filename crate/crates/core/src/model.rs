//! Two modality encoders feeding a fusion classifier. A missing modality is
//! represented by a zero embedding in its classifier slot; PET always takes
//! the first `embed_dim` classifier inputs and MRI the second.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::data::Instance;
use crate::error::{check_dim, Error, Result};
use crate::numkit::{Matrix, Mlp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Modality {
    Pet,
    Mri,
}

impl Modality {
    pub const ALL: [Modality; 2] = [Modality::Pet, Modality::Mri];

    pub fn other(self) -> Modality {
        match self {
            Modality::Pet => Modality::Mri,
            Modality::Mri => Modality::Pet,
        }
    }

    /// Position of this modality's slot in the fused classifier input.
    pub fn slot(self) -> usize {
        match self {
            Modality::Pet => 0,
            Modality::Mri => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Pet => "pet",
            Modality::Mri => "mri",
        }
    }
}

/// Layer widths for [`MultimodalModel::init`].
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelConfig {
    pub pet_dim: usize,
    pub mri_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub embed_dim: usize,
    pub classifier_hidden: Vec<usize>,
    pub classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            pet_dim: 90,
            mri_dim: 90,
            encoder_hidden: vec![64],
            embed_dim: 32,
            classifier_hidden: vec![32],
            classes: 3,
        }
    }
}

impl ModelConfig {
    fn encoder_dims(&self, input: usize) -> Vec<usize> {
        let mut d = vec![input];
        d.extend_from_slice(&self.encoder_hidden);
        d.push(self.embed_dim);
        d
    }

    fn classifier_dims(&self) -> Vec<usize> {
        let mut d = vec![2 * self.embed_dim];
        d.extend_from_slice(&self.classifier_hidden);
        d.push(self.classes);
        d
    }
}

/// Encoders `f_P`, `f_M` and classifier `g`. The same type carries gradients.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MultimodalModel {
    pub pet: Mlp,
    pub mri: Mlp,
    pub classifier: Mlp,
}

pub type ModelGrads = MultimodalModel;

impl MultimodalModel {
    pub fn from_parts(pet: Mlp, mri: Mlp, classifier: Mlp) -> Result<Self> {
        let model = Self {
            pet,
            mri,
            classifier,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.pet.output_dim();
        check_dim("mri embedding width", d, self.mri.output_dim())?;
        check_dim("classifier input width", 2 * d, self.classifier.input_dim())
    }

    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Self {
        let pet = Mlp::init(&config.encoder_dims(config.pet_dim), rng);
        let mri = Mlp::init(&config.encoder_dims(config.mri_dim), rng);
        let classifier = Mlp::init(&config.classifier_dims(), rng);
        Self {
            pet,
            mri,
            classifier,
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.pet.output_dim()
    }

    pub fn classes(&self) -> usize {
        self.classifier.output_dim()
    }

    pub fn input_dim(&self, modality: Modality) -> usize {
        self.encoder(modality).input_dim()
    }

    pub fn encoder(&self, modality: Modality) -> &Mlp {
        match modality {
            Modality::Pet => &self.pet,
            Modality::Mri => &self.mri,
        }
    }

    pub fn encoder_mut(&mut self, modality: Modality) -> &mut Mlp {
        match modality {
            Modality::Pet => &mut self.pet,
            Modality::Mri => &mut self.mri,
        }
    }

    pub fn encode(&self, modality: Modality, x: &[f64]) -> Result<Vec<f64>> {
        let enc = self.encoder(modality);
        check_dim("encoder input", enc.input_dim(), x.len())?;
        let input = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(enc.infer(&input)?.into_vec())
    }

    pub fn encode_batch(&self, modality: Modality, xs: &Matrix) -> Result<Matrix> {
        self.encoder(modality).infer(xs)
    }

    /// Builds the classifier input `z_P ⊕ z_M`, zero-filling an absent side.
    pub fn fuse(&self, pet: Option<&[f64]>, mri: Option<&[f64]>) -> Result<Vec<f64>> {
        let d = self.embed_dim();
        let mut out = vec![0.0; 2 * d];
        if let Some(z) = pet {
            check_dim("pet embedding", d, z.len())?;
            out[..d].copy_from_slice(z);
        }
        if let Some(z) = mri {
            check_dim("mri embedding", d, z.len())?;
            out[d..].copy_from_slice(z);
        }
        Ok(out)
    }

    pub fn classify(&self, fused: &[f64]) -> Result<Vec<f64>> {
        check_dim("classifier input", self.classifier.input_dim(), fused.len())?;
        let input = Matrix::from_vec(1, fused.len(), fused.to_vec())?;
        Ok(self.classifier.infer(&input)?.into_vec())
    }

    /// Logits for one instance with zero-fill for a missing modality.
    pub fn predict(&self, instance: &Instance) -> Result<Vec<f64>> {
        if instance.pet.is_none() && instance.mri.is_none() {
            return Err(Error::InvalidInstance("both modalities absent".into()));
        }
        let zp = instance
            .pet
            .as_deref()
            .map(|x| self.encode(Modality::Pet, x))
            .transpose()?;
        let zm = instance
            .mri
            .as_deref()
            .map(|x| self.encode(Modality::Mri, x))
            .transpose()?;
        self.classify(&self.fuse(zp.as_deref(), zm.as_deref())?)
    }

    /// Batched [`MultimodalModel::predict`]; row `i` holds the logits of
    /// `instances[i]`.
    pub fn predict_batch(&self, instances: &[Instance]) -> Result<Matrix> {
        let d = self.embed_dim();
        let mut fused = Matrix::zeros(instances.len(), 2 * d);
        for m in Modality::ALL {
            let (idx, xs) = gather(instances, m, self.input_dim(m))?;
            if idx.is_empty() {
                continue;
            }
            let z = self.encode_batch(m, &xs)?;
            let off = m.slot() * d;
            for (r, &i) in idx.iter().enumerate() {
                fused.row_mut(i)[off..off + d].copy_from_slice(z.row(r));
            }
        }
        for (i, inst) in instances.iter().enumerate() {
            if inst.pet.is_none() && inst.mri.is_none() {
                return Err(Error::InvalidInstance(alloc::format!(
                    "instance {i} has no modality"
                )));
            }
        }
        self.classifier.infer(&fused)
    }

    /// Logits with the missing modality's slot filled by `proxy`.
    pub fn predict_with_proxy(
        &self,
        available: &[f64],
        available_modality: Modality,
        proxy: &[f64],
    ) -> Result<Vec<f64>> {
        let fused = match available_modality {
            Modality::Pet => self.fuse(Some(available), Some(proxy))?,
            Modality::Mri => self.fuse(Some(proxy), Some(available))?,
        };
        self.classify(&fused)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            pet: self.pet.zeros_like(),
            mri: self.mri.zeros_like(),
            classifier: self.classifier.zeros_like(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.pet.param_count() + self.mri.param_count() + self.classifier.param_count()
    }

    /// Flat parameter vector: PET encoder, MRI encoder, classifier.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.pet.write_params(&mut out);
        self.mri.write_params(&mut out);
        self.classifier.write_params(&mut out);
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        check_dim("model parameter vector", self.param_count(), flat.len())?;
        let mut off = self.pet.read_params(flat)?;
        off += self.mri.read_params(&flat[off..])?;
        self.classifier.read_params(&flat[off..])?;
        Ok(())
    }

    pub fn add_scaled(&mut self, other: &MultimodalModel, s: f64) -> Result<()> {
        self.pet.add_scaled(&other.pet, s)?;
        self.mri.add_scaled(&other.mri, s)?;
        self.classifier.add_scaled(&other.classifier, s)
    }

    pub fn same_shape(&self, other: &MultimodalModel) -> bool {
        self.pet.same_shape(&other.pet)
            && self.mri.same_shape(&other.mri)
            && self.classifier.same_shape(&other.classifier)
    }
}

/// Indices of instances carrying `modality` and their stacked feature rows.
pub(crate) fn gather(
    instances: &[Instance],
    modality: Modality,
    dim: usize,
) -> Result<(Vec<usize>, Matrix)> {
    let mut idx = Vec::new();
    let mut data = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        if let Some(x) = inst.features(modality) {
            check_dim("instance feature width", dim, x.len())?;
            idx.push(i);
            data.extend_from_slice(x);
        }
    }
    let rows = idx.len();
    Ok((idx, Matrix::from_vec(rows, dim, data)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn small() -> ModelConfig {
        ModelConfig {
            pet_dim: 4,
            mri_dim: 5,
            encoder_hidden: vec![6],
            embed_dim: 3,
            classifier_hidden: vec![4],
            classes: 3,
        }
    }

    fn inst(pet: Option<Vec<f64>>, mri: Option<Vec<f64>>) -> Instance {
        Instance {
            pet,
            mri,
            label: 0,
        }
    }

    #[test]
    fn zero_model_embeds_to_zero() {
        let m = MultimodalModel::init(&small(), &mut stream(0, &[])).zeros_like();
        assert_eq!(m.encode(Modality::Pet, &[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn encode_matches_encoder_forward() {
        let m = MultimodalModel::init(&small(), &mut stream(1, &[]));
        let x = [0.3, -1.2, 0.8, 2.0, -0.4];
        let direct = m.mri.forward(&Matrix::from_rows(&[x]).unwrap()).unwrap().0;
        assert_eq!(m.encode(Modality::Mri, &x).unwrap(), direct.into_vec());
        assert_eq!(m.encode(Modality::Mri, &x).unwrap(), m.encode(Modality::Mri, &x).unwrap());
        assert!(m.encode(Modality::Mri, &x[..4]).is_err());
    }

    #[test]
    fn zero_fill_equals_zero_proxy() {
        let m = MultimodalModel::init(&small(), &mut stream(2, &[]));
        let xp = vec![0.5, -0.5, 1.0, 0.1];
        let zp = m.encode(Modality::Pet, &xp).unwrap();
        let a = m.predict(&inst(Some(xp), None)).unwrap();
        let b = m.predict_with_proxy(&zp, Modality::Pet, &[0.0; 3]).unwrap();
        assert_eq!(a, b);
        let xm = vec![0.2, 0.1, -0.3, 0.9, 1.1];
        let zm = m.encode(Modality::Mri, &xm).unwrap();
        let a = m.predict(&inst(None, Some(xm))).unwrap();
        let b = m.predict_with_proxy(&zm, Modality::Mri, &[0.0; 3]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_classifier_returns_bias() {
        let mut m = MultimodalModel::init(&small(), &mut stream(3, &[]));
        m.classifier = m.classifier.zeros_like();
        let last = m.classifier.layers().len() - 1;
        m.classifier.layers_mut()[last].bias = vec![0.1, -0.2, 0.3];
        let i = inst(Some(vec![1.0; 4]), Some(vec![-1.0; 5]));
        assert_eq!(m.predict(&i).unwrap(), vec![0.1, -0.2, 0.3]);
    }

    #[test]
    fn predict_is_encode_fuse_classify() {
        let m = MultimodalModel::init(&small(), &mut stream(4, &[]));
        let xp = vec![0.5, -0.5, 1.0, 0.1];
        let xm = vec![0.2, 0.1, -0.3, 0.9, 1.1];
        let mut cat = m.encode(Modality::Pet, &xp).unwrap();
        cat.extend(m.encode(Modality::Mri, &xm).unwrap());
        let by_hand = m
            .classifier
            .forward(&Matrix::from_rows(&[cat]).unwrap())
            .unwrap()
            .0
            .into_vec();
        let i = inst(Some(xp), Some(xm));
        assert_eq!(m.predict(&i).unwrap(), by_hand);
        let batch = m.predict_batch(&[i.clone(), i]).unwrap();
        assert_eq!(batch.row(1), &by_hand[..]);
    }

    #[test]
    fn no_modality_is_rejected() {
        let m = MultimodalModel::init(&small(), &mut stream(5, &[]));
        assert!(matches!(m.predict(&inst(None, None)), Err(Error::InvalidInstance(_))));
        assert!(m.predict_batch(&[inst(None, None)]).is_err());
        assert!(m.predict_with_proxy(&[0.0; 3], Modality::Pet, &[0.0; 2]).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let m = MultimodalModel::init(&small(), &mut stream(6, &[]));
        let mut z = m.zeros_like();
        z.set_flat(&m.to_flat()).unwrap();
        assert_eq!(z, m);
        assert!(z.set_flat(&[0.0; 3]).is_err());
    }
}
