//! Experiment configuration.
//!
//! [`ConfigArgs`] is both the flat TOML schema and the command-line flag set:
//! every key is optional and every key has a same-named `--flag`. Values are
//! layered as defaults, then the config file, then flags, and resolved into a
//! fully expanded [`ExperimentConfig`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use mmfed_core::data::{PartitionSpec, SplitReading, SyntheticSpec};
use mmfed_core::federation::{Ablation, BatchMode, Method, TrainConfig};
use mmfed_core::finch::PartitionLevel;
use mmfed_core::losses::LossWeights;
use mmfed_core::model::ModelConfig;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A list that may be written as one value, a comma-separated string, or an
/// array.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|p| p.trim().parse::<T>().map_err(|e| format!("`{}`: {e}", p.trim())))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(List)
    }
}

impl<T: fmt::Display> fmt::Display for List<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl<'de, T> Deserialize<'de> for List<T>
where
    T: Deserialize<'de> + FromStr,
    T::Err: fmt::Display,
{
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Many(Vec<T>),
            One(T),
            Text(String),
        }
        match Raw::<T>::deserialize(d)? {
            Raw::Many(v) => Ok(List(v)),
            Raw::One(v) => Ok(List(vec![v])),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl<T: Serialize> Serialize for List<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

/// Method names as written in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Clusmfl,
    Fedavg,
    Fedprox,
}

impl MethodName {
    pub fn method(self) -> Method {
        match self {
            MethodName::Clusmfl => Method::ClusMfl,
            MethodName::Fedavg => Method::FedAvg,
            MethodName::Fedprox => Method::FedProx,
        }
    }
}

impl FromStr for MethodName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "clusmfl" => Ok(MethodName::Clusmfl),
            "fedavg" => Ok(MethodName::Fedavg),
            "fedprox" => Ok(MethodName::Fedprox),
            _ => Err("expected clusmfl, fedavg or fedprox".into()),
        }
    }
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.method().name())
    }
}

/// Every configurable key. Used as the TOML file schema and as CLI flags.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(rename_all = "snake_case")]
pub struct ConfigArgs {
    /// Master seed for data, splits, partitions, initialization and training.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated methods: clusmfl, fedavg, fedprox.
    #[arg(long)]
    pub method: Option<List<MethodName>>,
    /// Modality-aware aggregation (clusmfl only).
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub maa: Option<bool>,
    /// Contrastive alignment term (clusmfl only).
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub ctr: Option<bool>,
    /// Modality completion term (clusmfl only).
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub mc: Option<bool>,
    /// Number of clients.
    #[arg(long)]
    pub clients: Option<usize>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub local_epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Floor of the cosine learning-rate schedule.
    #[arg(long)]
    pub min_lr: Option<f64>,
    /// Contrastive temperature.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Weight of the contrastive term.
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Weight of the modality completion term.
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// FedProx proximal coefficient.
    #[arg(long)]
    pub mu_prox: Option<f64>,
    /// Comma-separated unimodal-client proportions (each modality).
    #[arg(long)]
    pub alpha: Option<List<f64>>,
    /// Comma-separated unimodal-instance proportions on multimodal clients.
    #[arg(long)]
    pub beta: Option<List<f64>>,
    /// Dataset CSV; synthetic data is generated when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Synthetic per-class counts, comma-separated.
    #[arg(long)]
    pub class_counts: Option<List<usize>>,
    /// Synthetic feature width per modality.
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    /// Distance scale between synthetic class means.
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Correlation of the two modalities' latent noise.
    #[arg(long)]
    pub coupling: Option<f64>,
    /// Seed of the synthetic generator; defaults to `seed`.
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Run only the first this-many folds.
    #[arg(long)]
    pub folds_to_run: Option<usize>,
    /// `cv` (held-out fold is the test set) or `literal` (held-out fold is the training set).
    #[arg(long)]
    pub split: Option<String>,
    /// Make the test set a third PET-only, a third MRI-only.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub test_mix: Option<bool>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Encoder hidden widths, comma-separated.
    #[arg(long)]
    pub encoder_hidden: Option<List<usize>>,
    /// Classifier hidden widths, comma-separated.
    #[arg(long)]
    pub classifier_hidden: Option<List<usize>>,
    /// Mini-batch size; 0 trains on the full client dataset per step.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// FINCH level exported to the pool: `first`, `last`, or a level index.
    #[arg(long)]
    pub finch_level: Option<String>,
    /// Client worker threads; 0 uses all cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record real elapsed time in `wall_ms` (otherwise 0, keeping outputs reproducible).
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub wall_clock: Option<bool>,
    /// Write per-round training objective components to `loss_components.csv`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub loss_log: Option<bool>,
    /// Save the global model after every round.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub checkpoint: Option<bool>,
    /// Write every round's cluster pool under `pools/`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub dump_pool: Option<bool>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),* $(,)?) => {
        ConfigArgs { $($f: $top.$f.or($base.$f)),* }
    };
}

impl ConfigArgs {
    /// Keys set in `top` replace those in `self`.
    pub fn overlay(self, top: ConfigArgs) -> ConfigArgs {
        let base = self;
        overlay!(base, top;
            seed, method, maa, ctr, mc, clients, rounds, local_epochs, lr, min_lr, tau,
            lambda1, lambda2, mu_prox, alpha, beta, data, class_counts, feature_dim,
            latent_dim, separation, noise, coupling, data_seed, folds, folds_to_run, split,
            test_mix, embed_dim, encoder_hidden, classifier_hidden, batch_size, finch_level,
            workers, out, wall_clock, loss_log, checkpoint, dump_pool,
        )
    }

    pub fn from_toml(text: &str) -> Result<ConfigArgs> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<ConfigArgs> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// The resolved configuration, every default expanded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub method: List<MethodName>,
    pub maa: bool,
    pub ctr: bool,
    pub mc: bool,
    pub clients: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub lr: f64,
    pub min_lr: f64,
    pub tau: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu_prox: f64,
    pub alpha: List<f64>,
    pub beta: List<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    pub class_counts: List<usize>,
    pub feature_dim: usize,
    pub latent_dim: usize,
    pub separation: f64,
    pub noise: f64,
    pub coupling: f64,
    pub data_seed: u64,
    pub folds: usize,
    pub folds_to_run: usize,
    pub split: String,
    pub test_mix: bool,
    pub embed_dim: usize,
    pub encoder_hidden: List<usize>,
    pub classifier_hidden: List<usize>,
    pub batch_size: usize,
    pub finch_level: String,
    pub workers: usize,
    pub out: PathBuf,
    pub wall_clock: bool,
    pub loss_log: bool,
    pub checkpoint: bool,
    pub dump_pool: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::resolve(ConfigArgs::default()).expect("defaults are valid")
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_level(s: &str) -> Result<PartitionLevel> {
    match s {
        "first" => Ok(PartitionLevel::First),
        "last" => Ok(PartitionLevel::Last),
        _ => s
            .parse()
            .map(PartitionLevel::Index)
            .map_err(|_| config_err(format!("finch_level `{s}`: expected first, last or an index"))),
    }
}

fn parse_split(s: &str) -> Result<SplitReading> {
    match s {
        "cv" => Ok(SplitReading::Cv),
        "literal" => Ok(SplitReading::Literal),
        _ => Err(config_err(format!("split `{s}`: expected cv or literal"))),
    }
}

impl ExperimentConfig {
    pub fn resolve(a: ConfigArgs) -> Result<ExperimentConfig> {
        let seed = a.seed.unwrap_or(0);
        let folds = a.folds.unwrap_or(5);
        let c = ExperimentConfig {
            seed,
            method: a.method.unwrap_or(List(vec![MethodName::Clusmfl])),
            maa: a.maa.unwrap_or(true),
            ctr: a.ctr.unwrap_or(true),
            mc: a.mc.unwrap_or(true),
            clients: a.clients.unwrap_or(10),
            rounds: a.rounds.unwrap_or(30),
            local_epochs: a.local_epochs.unwrap_or(10),
            lr: a.lr.unwrap_or(0.01),
            min_lr: a.min_lr.unwrap_or(0.0),
            tau: a.tau.unwrap_or(0.1),
            lambda1: a.lambda1.unwrap_or(1.0),
            lambda2: a.lambda2.unwrap_or(1.0),
            mu_prox: a.mu_prox.unwrap_or(0.01),
            alpha: a.alpha.unwrap_or(List(vec![0.4])),
            beta: a.beta.unwrap_or(List(vec![0.2])),
            data: a.data,
            class_counts: a.class_counts.unwrap_or(List(vec![297, 451, 167])),
            feature_dim: a.feature_dim.unwrap_or(90),
            latent_dim: a.latent_dim.unwrap_or(8),
            separation: a.separation.unwrap_or(2.0),
            noise: a.noise.unwrap_or(1.0),
            coupling: a.coupling.unwrap_or(0.7),
            data_seed: a.data_seed.unwrap_or(seed),
            folds,
            folds_to_run: a.folds_to_run.unwrap_or(folds),
            split: a.split.unwrap_or_else(|| "cv".into()),
            test_mix: a.test_mix.unwrap_or(true),
            embed_dim: a.embed_dim.unwrap_or(32),
            encoder_hidden: a.encoder_hidden.unwrap_or(List(vec![64])),
            classifier_hidden: a.classifier_hidden.unwrap_or(List(vec![32])),
            batch_size: a.batch_size.unwrap_or(0),
            finch_level: a.finch_level.unwrap_or_else(|| "first".into()),
            workers: a.workers.unwrap_or(0),
            out: a.out.unwrap_or_else(|| PathBuf::from("out")),
            wall_clock: a.wall_clock.unwrap_or(false),
            loss_log: a.loss_log.unwrap_or(false),
            checkpoint: a.checkpoint.unwrap_or(false),
            dump_pool: a.dump_pool.unwrap_or(false),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("clients", self.clients),
            ("rounds", self.rounds),
            ("folds_to_run", self.folds_to_run),
            ("embed_dim", self.embed_dim),
            ("feature_dim", self.feature_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(config_err(format!("{name} must be positive")));
            }
        }
        if self.folds < 2 {
            return Err(config_err("folds must be at least 2"));
        }
        if self.folds_to_run > self.folds {
            return Err(config_err("folds_to_run exceeds folds"));
        }
        if self.method.0.is_empty() || self.alpha.0.is_empty() || self.beta.0.is_empty() {
            return Err(config_err("method, alpha and beta need at least one value"));
        }
        if self.encoder_hidden.0.contains(&0) || self.classifier_hidden.0.contains(&0) {
            return Err(config_err("hidden widths must be positive"));
        }
        for &a in &self.alpha.0 {
            for &b in &self.beta.0 {
                PartitionSpec::symmetric(self.clients, a, b)
                    .validate()
                    .map_err(|e| config_err(format!("alpha {a}, beta {b}: {e}")))?;
            }
        }
        parse_level(&self.finch_level)?;
        self.train_config(Method::ClusMfl, self.ablation(), 0)
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        parse_split(&self.split)?;
        if self.data.is_none() {
            self.synthetic_spec().validate().map_err(|e| config_err(e.to_string()))?;
        }
        Ok(())
    }

    pub fn ablation(&self) -> Ablation {
        Ablation::new(self.maa, self.ctr, self.mc)
    }

    pub fn split_reading(&self) -> SplitReading {
        parse_split(&self.split).expect("validated")
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            class_counts: self.class_counts.0.clone(),
            feature_dim: self.feature_dim,
            latent_dim: self.latent_dim,
            separation: self.separation,
            noise: self.noise,
            coupling: self.coupling,
            seed: self.data_seed,
        }
    }

    pub fn model_config(&self, pet_dim: usize, mri_dim: usize, classes: usize) -> ModelConfig {
        ModelConfig {
            pet_dim,
            mri_dim,
            encoder_hidden: self.encoder_hidden.0.clone(),
            embed_dim: self.embed_dim,
            classifier_hidden: self.classifier_hidden.0.clone(),
            classes,
        }
    }

    pub fn train_config(&self, method: Method, ablation: Ablation, seed: u64) -> TrainConfig {
        TrainConfig {
            method,
            ablation,
            rounds: self.rounds,
            local_epochs: self.local_epochs,
            batch: match self.batch_size {
                0 => BatchMode::Full,
                s => BatchMode::Size(s),
            },
            lr: self.lr,
            min_lr: self.min_lr,
            weights: LossWeights {
                lambda1: self.lambda1,
                lambda2: self.lambda2,
                tau: self.tau,
            },
            mu_prox: self.mu_prox,
            finch_level: parse_level(&self.finch_level).expect("validated"),
            seed,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    #[derive(Parser)]
    struct Cli {
        #[command(flatten)]
        args: ConfigArgs,
    }

    fn flags(argv: &[&str]) -> ConfigArgs {
        Cli::try_parse_from(std::iter::once("x").chain(argv.iter().copied())).unwrap().args
    }

    #[test]
    fn defaults() {
        let c = ExperimentConfig::default();
        assert_eq!((c.clients, c.rounds, c.local_epochs, c.folds), (10, 30, 10, 5));
        assert_eq!((c.lr, c.tau, c.lambda1, c.lambda2, c.mu_prox), (0.01, 0.1, 1.0, 1.0, 0.01));
        assert_eq!(c.embed_dim, 32);
        assert_eq!(c.method.0, vec![MethodName::Clusmfl]);
        assert!(!c.wall_clock);
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigArgs::from_toml("rounds = 7\nalpha = 0.2\nmethod = \"fedavg\"\nlr = 0.5\n").unwrap();
        let cli = flags(&["--rounds", "3", "--alpha", "0.2,0.4", "--local_epochs", "2"]);
        let c = ExperimentConfig::resolve(file.overlay(cli)).unwrap();
        assert_eq!(c.rounds, 3);
        assert_eq!(c.local_epochs, 2);
        assert_eq!(c.lr, 0.5);
        assert_eq!(c.alpha.0, vec![0.2, 0.4]);
        assert_eq!(c.method.0, vec![MethodName::Fedavg]);
    }

    #[test]
    fn list_spellings() {
        let a = ConfigArgs::from_toml("alpha = [0.2, 0.4]\nbeta = \"0.1,0.3\"\nmethod = [\"fedavg\", \"clusmfl\"]\nclass_counts = \"5,6\"").unwrap();
        assert_eq!(a.alpha.unwrap().0, vec![0.2, 0.4]);
        assert_eq!(a.beta.unwrap().0, vec![0.1, 0.3]);
        assert_eq!(a.method.unwrap().0, vec![MethodName::Fedavg, MethodName::Clusmfl]);
        assert_eq!(a.class_counts.unwrap().0, vec![5, 6]);
    }

    #[test]
    fn echo_round_trips() {
        let c = ExperimentConfig::resolve(flags(&["--alpha", "0.2,0.4", "--data", "x.csv", "--seed", "9"])).unwrap();
        let back = ExperimentConfig::resolve(ConfigArgs::from_toml(&c.to_toml()).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for text in [
            "rounds = 0",
            "alpha = 0.6",
            "split = \"other\"",
            "finch_level = \"middle\"",
            "lr = -1.0",
            "unknown_key = 1",
            "folds_to_run = 9",
            "method = \"sgd\"",
        ] {
            let err = ConfigArgs::from_toml(text).and_then(ExperimentConfig::resolve).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{text}");
        }
    }
}
