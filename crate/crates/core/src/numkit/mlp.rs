use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::Matrix;
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Activation {
    Relu,
    Identity,
}

/// One affine layer `y = act(x Wᵀ + b)` with `W` stored out×in.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

/// A stack of affine layers. Also used as the container for its own
/// gradients, where the activation tags are carried along unchanged.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<Layer>", into = "Vec<Layer>"))]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl TryFrom<Vec<Layer>> for Mlp {
    type Error = Error;

    fn try_from(layers: Vec<Layer>) -> Result<Self> {
        Mlp::new(layers)
    }
}

impl From<Mlp> for Vec<Layer> {
    fn from(m: Mlp) -> Self {
        m.layers
    }
}

/// Everything the backward pass needs: each layer's input and
/// pre-activation output.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
}

impl MlpCache {
    pub fn batch(&self) -> usize {
        self.inputs.first().map_or(0, Matrix::rows)
    }
}

impl Mlp {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::EmptyInput("mlp layers"));
        }
        for l in &layers {
            check_dim("layer bias length", l.out_dim(), l.bias.len())?;
        }
        for pair in layers.windows(2) {
            check_dim("layer chaining", pair[0].out_dim(), pair[1].in_dim())?;
        }
        if layers.last().map(|l| l.activation) != Some(Activation::Identity) {
            return Err(Error::Spec("final mlp layer must use identity activation".into()));
        }
        Ok(Self { layers })
    }

    /// Glorot-uniform weights, zero biases, ReLU on every layer but the last.
    /// `dims` lists the widths from input to output.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "an mlp needs at least input and output widths");
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|k| {
                let (fan_in, fan_out) = (dims[k], dims[k + 1]);
                let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..=bound))
                    .collect();
                Layer {
                    weight: Matrix::from_vec(fan_out, fan_in, data).expect("sized above"),
                    bias: vec![0.0; fan_out],
                    activation: if k + 1 == n {
                        Activation::Identity
                    } else {
                        Activation::Relu
                    },
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![0.0; l.out_dim()],
                    activation: l.activation,
                })
                .collect(),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(Layer::out_dim));
        d
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weight.shape() == b.weight.shape())
    }

    pub fn forward(&self, input: &Matrix) -> Result<(Matrix, MlpCache)> {
        check_dim("mlp input width", self.input_dim(), input.cols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let z = affine(layer, &x)?;
            let y = activate(layer.activation, &z);
            inputs.push(x);
            pre.push(z);
            x = y;
        }
        Ok((x, MlpCache { inputs, pre }))
    }

    /// Forward pass without keeping a cache.
    pub fn infer(&self, input: &Matrix) -> Result<Matrix> {
        check_dim("mlp input width", self.input_dim(), input.cols())?;
        let mut x = affine(&self.layers[0], input)?;
        apply_in_place(self.layers[0].activation, &mut x);
        for layer in &self.layers[1..] {
            x = affine(layer, &x)?;
            apply_in_place(layer.activation, &mut x);
        }
        Ok(x)
    }

    /// Returns parameter gradients (shaped like `self`) and the gradient with
    /// respect to the forward input.
    pub fn backward(&self, cache: &MlpCache, upstream: &Matrix) -> Result<(Mlp, Matrix)> {
        check_dim("cache depth", self.layers.len(), cache.pre.len())?;
        for (layer, (x, z)) in self.layers.iter().zip(cache.inputs.iter().zip(&cache.pre)) {
            check_dim("cache layer input", layer.in_dim(), x.cols())?;
            check_dim("cache layer output", layer.out_dim(), z.cols())?;
        }
        check_dim("upstream rows", cache.batch(), upstream.rows())?;
        check_dim("upstream cols", self.output_dim(), upstream.cols())?;

        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Relu {
                for (d, &z) in delta.as_mut_slice().iter_mut().zip(cache.pre[k].as_slice()) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let weight = delta.transpose_a_matmul(&cache.inputs[k])?;
            let mut bias = vec![0.0; layer.out_dim()];
            for row in delta.iter_rows() {
                for (b, d) in bias.iter_mut().zip(row) {
                    *b += d;
                }
            }
            let next = delta.matmul(&layer.weight)?;
            grads.push(Layer {
                weight,
                bias,
                activation: layer.activation,
            });
            delta = next;
        }
        grads.reverse();
        Ok((Mlp { layers: grads }, delta))
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Appends all parameters (per layer: weights row-major, then bias).
    pub fn write_params(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
    }

    /// Inverse of [`Mlp::write_params`]; returns the number of values consumed.
    pub fn read_params(&mut self, src: &[f64]) -> Result<usize> {
        let n = self.param_count();
        if src.len() < n {
            return Err(Error::Shape {
                context: "mlp parameter vector",
                expected: n,
                actual: src.len(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let w = l.weight.as_mut_slice();
            w.copy_from_slice(&src[off..off + w.len()]);
            off += w.len();
            let b = l.bias.len();
            l.bias.copy_from_slice(&src[off..off + b]);
            off += b;
        }
        Ok(off)
    }

    /// `self += s * other`, shapes must agree.
    pub fn add_scaled(&mut self, other: &Mlp, s: f64) -> Result<()> {
        check_dim("mlp depth", self.layers.len(), other.layers.len())?;
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.add_scaled(&b.weight, s)?;
            check_dim("bias length", a.bias.len(), b.bias.len())?;
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += s * y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weight.scale(s);
            l.bias.iter_mut().for_each(|b| *b *= s);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.all_finite() && l.bias.iter().all(|b| b.is_finite()))
    }
}

fn affine(layer: &Layer, x: &Matrix) -> Result<Matrix> {
    let mut z = x.matmul_transpose_b(&layer.weight)?;
    let m = layer.out_dim();
    for row in z.as_mut_slice().chunks_exact_mut(m.max(1)) {
        for (v, b) in row.iter_mut().zip(&layer.bias) {
            *v += b;
        }
    }
    Ok(z)
}

fn activate(act: Activation, z: &Matrix) -> Matrix {
    let mut y = z.clone();
    apply_in_place(act, &mut y);
    y
}

fn apply_in_place(act: Activation, m: &mut Matrix) {
    if act == Activation::Relu {
        m.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
    }
}
