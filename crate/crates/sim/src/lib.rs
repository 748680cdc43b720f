//! Experiment runner on top of `mmfed-core`: dataset files, layered
//! configuration, a rayon client runner, fold orchestration and CSV reports.

pub mod checkpoint;
pub mod config;
pub mod dataset;
mod error;
pub mod experiment;
pub mod runner;
pub mod tools;

pub use error::{Error, Result};
