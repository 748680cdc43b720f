//! Inspection helpers behind the `cluster-debug` and `pool-dump` commands.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use mmfed_core::clusterpool::{assemble_global_pool, compute_local_clusters, ClusterPool};
use mmfed_core::finch::{finch_partition_at, FinchResult, PartitionLevel};
use mmfed_core::numkit::Matrix;

use crate::checkpoint;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::experiment::{load_dataset, prepare_fold};

/// Reads a numeric CSV with a header row; every column is a coordinate.
pub fn read_points(path: &Path) -> Result<Matrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .map(|c| {
                c.trim().parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("`{c}` is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Matrix::from_rows(&rows).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Clusters `points` and writes `point,level_0..level_{L-1}` assignments.
pub fn cluster_debug<W: Write>(points: &Matrix, level: PartitionLevel, out: W) -> Result<FinchResult> {
    let result = finch_partition_at(points, level)?;
    let mut w = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| Error::Format {
        path: "<stdout>".into(),
        message: e.to_string(),
    };
    let mut header = vec!["point".to_string()];
    header.extend((0..result.hierarchy.len()).map(|l| format!("level_{l}")));
    w.write_record(&header).map_err(fail)?;
    for i in 0..points.rows() {
        let mut row = vec![i.to_string()];
        row.extend(result.hierarchy.iter().map(|p| p.assignments[i].to_string()));
        w.write_record(&row).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io("<stdout>", e))?;
    Ok(result)
}

/// The pool the clients of `fold` would upload in the first round, or for
/// the model stored in `checkpoint`. Uses the first alpha and beta.
pub fn build_pool(cfg: &ExperimentConfig, fold: usize, checkpoint: Option<&Path>) -> Result<ClusterPool> {
    if fold >= cfg.folds {
        return Err(Error::Config(format!("fold {fold} out of range 0..{}", cfg.folds)));
    }
    let data = load_dataset(cfg)?;
    let setup = prepare_fold(cfg, &data, fold, cfg.alpha.0[0], cfg.beta.0[0])?;
    let model = match checkpoint {
        Some(path) => {
            let ck = checkpoint::load(path)?;
            if !ck.model.same_shape(&setup.global) {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    message: "checkpoint model does not match the configured architecture".into(),
                });
            }
            ck.model
        }
        None => setup.global,
    };
    let level = cfg.train_config(mmfed_core::federation::Method::ClusMfl, cfg.ablation(), 0).finch_level;
    let locals = setup
        .clients
        .iter()
        .map(|c| compute_local_clusters(&model, &c.data, data.classes, level))
        .collect::<mmfed_core::Result<Vec<_>>>()?;
    Ok(assemble_global_pool(&locals)?)
}
