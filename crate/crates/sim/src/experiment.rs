//! Fold orchestration and report files.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use mmfed_core::clusterpool::ClusterPool;
use mmfed_core::data::{
    apply_test_modality_mix, generate_synthetic, num_classes, partition_clients, split_train_test, Instance,
    PartitionSpec,
};
use mmfed_core::federation::{
    run_round, Ablation, ClientRunner, ClientState, Method, NoClock, RoundMetrics, Server,
};
use mmfed_core::model::MultimodalModel;
use mmfed_core::rng::{derive_seed, stream, tag};
use mmfed_core::Modality;

use crate::checkpoint::{self, Checkpoint};
use crate::config::{ExperimentConfig, MethodName};
use crate::dataset::{self, Layout};
use crate::error::{Error, Result};
use crate::runner::{Parallel, WallClock};

pub const ROUNDS_HEADER: [&str; 9] = [
    "fold",
    "round",
    "wall_ms",
    "test_loss",
    "accuracy",
    "precision_w",
    "recall_macro",
    "f1_w",
    "auc_w",
];
pub const SUMMARY_HEADER: [&str; 9] = ["method", "alpha", "beta", "maa", "ctr", "mc", "metric", "mean", "sd"];
pub const LOSS_HEADER: [&str; 7] = ["fold", "round", "total", "ce", "ctr", "mc", "prox"];
pub const METRICS: [&str; 5] = ["accuracy", "precision_w", "recall_macro", "f1_w", "auc_w"];

/// A dataset together with its feature layout and class count.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub layout: Layout,
    pub instances: Vec<Instance>,
    pub classes: usize,
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let (layout, instances) = match &cfg.data {
        Some(path) => dataset::load_csv(path)?,
        None => {
            let spec = cfg.synthetic_spec();
            let layout = Layout {
                pet_dim: spec.feature_dim,
                mri_dim: spec.feature_dim,
            };
            (layout, generate_synthetic(&spec)?)
        }
    };
    if instances.is_empty() {
        return Err(mmfed_core::Error::EmptyInput("dataset").into());
    }
    let classes = num_classes(&instances);
    for inst in &instances {
        inst.validate(layout.pet_dim, layout.mri_dim, classes)?;
    }
    Ok(Dataset {
        layout,
        instances,
        classes,
    })
}

/// One grid cell: a method, a missingness setting and component switches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub method: MethodName,
    pub alpha: f64,
    pub beta: f64,
    pub ablation: Ablation,
}

impl Cell {
    /// Switches that actually apply; baselines use none of the components.
    pub fn effective_ablation(&self) -> Ablation {
        match self.method.method() {
            Method::ClusMfl => self.ablation,
            _ => Ablation::new(false, false, false),
        }
    }

    fn dir_name(&self, with_flags: bool) -> String {
        let mut s = format!("{}_alpha{}_beta{}", self.method, self.alpha, self.beta);
        if with_flags {
            let a = self.ablation;
            s.push_str(&format!("_maa{}_ctr{}_mc{}", a.maa as u8, a.ctr as u8, a.mc as u8));
        }
        s
    }
}

/// Clients, test set and initial model of one fold.
#[derive(Debug, Clone)]
pub struct FoldSetup {
    pub clients: Vec<ClientState>,
    pub test: Vec<Instance>,
    pub global: MultimodalModel,
    pub seed: u64,
}

pub fn fold_seed(master: u64, fold: usize) -> u64 {
    derive_seed(master, &[tag::FOLDS, fold as u64])
}

/// Splits, partitions and initializes one fold. Depends only on the config,
/// the data, the fold and the missingness setting, so every method of a grid
/// sees identical clients, test set and starting model.
pub fn prepare_fold(cfg: &ExperimentConfig, data: &Dataset, fold: usize, alpha: f64, beta: f64) -> Result<FoldSetup> {
    let seed = fold_seed(cfg.seed, fold);
    let (train, test) = split_train_test(&data.instances, fold, cfg.folds, cfg.seed, cfg.split_reading())?;
    let test = if cfg.test_mix {
        apply_test_modality_mix(&test, seed)
    } else {
        test
    };
    let spec = PartitionSpec::symmetric(cfg.clients, alpha, beta);
    let clients = partition_clients(&train, &spec, seed)?
        .into_iter()
        .enumerate()
        .map(|(i, d)| ClientState::new(i, d))
        .collect();
    let model_cfg = cfg.model_config(data.layout.pet_dim, data.layout.mri_dim, data.classes);
    let global = MultimodalModel::init(&model_cfg, &mut stream(seed, &[tag::INIT]));
    Ok(FoldSetup {
        clients,
        test,
        global,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub cell: Cell,
    pub metric: &'static str,
    pub mean: f64,
    pub sd: f64,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn metric_values(m: &RoundMetrics) -> [f64; 5] {
    let e = &m.eval;
    [e.accuracy, e.precision_weighted, e.recall_macro, e.f1_weighted, e.auc_weighted]
}

fn summarize(cell: Cell, finals: &[RoundMetrics]) -> Vec<SummaryRow> {
    METRICS
        .iter()
        .enumerate()
        .map(|(k, &metric)| {
            let values: Vec<f64> = finals.iter().map(|m| metric_values(m)[k]).collect();
            let (mean, sd) = mean_sd(&values);
            SummaryRow { cell, metric, mean, sd }
        })
        .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_row<W: Write, I, S>(w: &mut csv::Writer<W>, path: &Path, row: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn flush<W: Write>(w: &mut csv::Writer<W>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(&mut w, path, SUMMARY_HEADER)?;
    for r in rows {
        let a = r.cell.effective_ablation();
        write_row(
            &mut w,
            path,
            [
                r.cell.method.to_string(),
                r.cell.alpha.to_string(),
                r.cell.beta.to_string(),
                a.maa.to_string(),
                a.ctr.to_string(),
                a.mc.to_string(),
                r.metric.to_string(),
                r.mean.to_string(),
                r.sd.to_string(),
            ],
        )?;
    }
    flush(&mut w, path)
}

/// `modality,label,client,size,c_0..c_{d-1}`, one row per pool center.
pub fn write_pool(path: &Path, pool: &ClusterPool) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = ["modality", "label", "client", "size"].iter().map(|s| s.to_string()).collect();
    header.extend((0..pool.dim()).map(|i| format!("c_{i}")));
    write_row(&mut w, path, &header)?;
    for m in Modality::ALL {
        for (label, entry) in pool.entries(m).iter().enumerate() {
            for k in 0..entry.len() {
                let mut row = vec![
                    m.name().to_string(),
                    label.to_string(),
                    entry.clients[k].to_string(),
                    entry.sizes[k].to_string(),
                ];
                row.extend(entry.centers.row(k).iter().map(|v| v.to_string()));
                write_row(&mut w, path, &row)?;
            }
        }
    }
    flush(&mut w, path)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Runs every fold of one cell, streaming `rounds.csv` (and the optional
/// logs) into `dir`. Returns the final-round metrics of each fold.
pub fn run_cell<R: ClientRunner>(
    cfg: &ExperimentConfig,
    data: &Dataset,
    cell: Cell,
    dir: &Path,
    runner: &R,
) -> Result<Vec<RoundMetrics>> {
    create_dir(dir)?;
    let rounds_path = dir.join("rounds.csv");
    let mut rounds = csv_writer(&rounds_path)?;
    write_row(&mut rounds, &rounds_path, ROUNDS_HEADER)?;
    flush(&mut rounds, &rounds_path)?;
    let loss_path = dir.join("loss_components.csv");
    let mut losses = if cfg.loss_log {
        let mut w = csv_writer(&loss_path)?;
        write_row(&mut w, &loss_path, LOSS_HEADER)?;
        Some(w)
    } else {
        None
    };
    for sub in [(cfg.checkpoint, "checkpoints"), (cfg.dump_pool, "pools")] {
        if sub.0 {
            create_dir(&dir.join(sub.1))?;
        }
    }

    let mut finals = Vec::with_capacity(cfg.folds_to_run);
    for fold in 0..cfg.folds_to_run {
        let setup = prepare_fold(cfg, data, fold, cell.alpha, cell.beta)?;
        let mut clients = setup.clients;
        let train = cfg.train_config(cell.method.method(), cell.ablation, setup.seed);
        let mut server = Server::new(setup.global, train)?;
        let wall = WallClock::start();
        let mut last = None;
        while !server.is_finished() {
            let outcome = if cfg.wall_clock {
                run_round(&mut server, &mut clients, &setup.test, runner, &wall)?
            } else {
                run_round(&mut server, &mut clients, &setup.test, runner, &NoClock)?
            };
            let m = outcome.metrics;
            info!(
                "{} fold {fold} round {}: accuracy {:.4} f1_w {:.4} test_loss {:.4}",
                cell.dir_name(false),
                m.round,
                m.eval.accuracy,
                m.eval.f1_weighted,
                m.test_loss
            );
            let mut row = vec![fold.to_string(), m.round.to_string(), m.wall_ms.to_string(), m.test_loss.to_string()];
            row.extend(metric_values(&m).iter().map(|v| v.to_string()));
            write_row(&mut rounds, &rounds_path, &row)?;
            flush(&mut rounds, &rounds_path)?;
            if let Some(w) = losses.as_mut() {
                let t = &m.train;
                write_row(
                    w,
                    &loss_path,
                    [
                        fold.to_string(),
                        m.round.to_string(),
                        t.total.to_string(),
                        t.ce.to_string(),
                        opt(t.ctr),
                        opt(t.mc),
                        opt(t.prox),
                    ],
                )?;
                flush(w, &loss_path)?;
            }
            if cfg.checkpoint {
                let path = dir.join("checkpoints").join(format!("fold{fold}_round{}.json", m.round));
                checkpoint::save(&path, &Checkpoint::new(fold, m.round, server.global.clone()))?;
            }
            if let (true, Some(pool)) = (cfg.dump_pool, &outcome.pool) {
                write_pool(&dir.join("pools").join(format!("fold{fold}_round{}.csv", m.round)), pool)?;
            }
            last = Some(m);
        }
        finals.push(last.expect("at least one round"));
    }
    Ok(finals)
}

fn write_config(cfg: &ExperimentConfig) -> Result<()> {
    create_dir(&cfg.out)?;
    let path = cfg.out.join("config.toml");
    fs::write(&path, cfg.to_toml()).map_err(|e| Error::io(path, e))
}

fn run_cells(cfg: &ExperimentConfig, cells: &[Cell], with_flags: bool) -> Result<Vec<SummaryRow>> {
    write_config(cfg)?;
    let data = load_dataset(cfg)?;
    let runner = Parallel::new(cfg.workers)?;
    info!(
        "{} instances, {} classes, {} cell(s), {} worker(s)",
        data.instances.len(),
        data.classes,
        cells.len(),
        runner.workers()
    );
    let mut rows = Vec::new();
    for cell in cells {
        let dir: PathBuf = if cells.len() == 1 {
            cfg.out.clone()
        } else {
            cfg.out.join(cell.dir_name(with_flags))
        };
        let finals = run_cell(cfg, &data, *cell, &dir, &runner)?;
        let summary = summarize(*cell, &finals);
        if cells.len() > 1 {
            write_summary(&dir.join("summary.csv"), &summary)?;
        }
        rows.extend(summary);
    }
    write_summary(&cfg.out.join("summary.csv"), &rows)?;
    Ok(rows)
}

/// Every method x alpha x beta combination, in that nesting order.
pub fn grid_cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &method in &cfg.method.0 {
        for &alpha in &cfg.alpha.0 {
            for &beta in &cfg.beta.0 {
                cells.push(Cell {
                    method,
                    alpha,
                    beta,
                    ablation: cfg.ablation(),
                });
            }
        }
    }
    cells
}

/// The seven component combinations for each alpha x beta setting.
pub fn ablation_cells(cfg: &ExperimentConfig) -> Result<Vec<Cell>> {
    if cfg.method.0 != [MethodName::Clusmfl] {
        return Err(Error::Config("ablation requires method = clusmfl".into()));
    }
    let mut cells = Vec::new();
    for &alpha in &cfg.alpha.0 {
        for &beta in &cfg.beta.0 {
            for ablation in Ablation::TABLE {
                cells.push(Cell {
                    method: MethodName::Clusmfl,
                    alpha,
                    beta,
                    ablation,
                });
            }
        }
    }
    Ok(cells)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<SummaryRow>> {
    run_cells(cfg, &grid_cells(cfg), false)
}

pub fn run_ablation(cfg: &ExperimentConfig) -> Result<Vec<SummaryRow>> {
    run_cells(cfg, &ablation_cells(cfg)?, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_sd() {
        assert_eq!(mean_sd(&[0.7]), (0.7, 0.0));
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn grid_order() {
        let mut cfg = ExperimentConfig::default();
        cfg.method.0 = vec![MethodName::Fedavg, MethodName::Clusmfl];
        cfg.alpha.0 = vec![0.2, 0.4];
        cfg.beta.0 = vec![0.2, 0.4];
        let cells = grid_cells(&cfg);
        assert_eq!(cells.len(), 8);
        assert_eq!((cells[1].method, cells[1].alpha, cells[1].beta), (MethodName::Fedavg, 0.2, 0.4));
        assert_eq!(cells[4].method, MethodName::Clusmfl);
        assert!(ablation_cells(&cfg).is_err());
    }
}
