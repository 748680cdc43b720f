//! Dense numeric building blocks: row-major matrices, ReLU multilayer
//! perceptrons with exact backpropagation, Adam, and cosine annealing.

mod adam;
mod matrix;
mod mlp;
mod schedule;

pub use adam::AdamState;
pub use matrix::Matrix;
pub use mlp::{Activation, Layer, Mlp, MlpCache};
pub use schedule::CosineSchedule;

pub(crate) use matrix::norm as matrix_norm;
