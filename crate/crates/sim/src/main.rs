use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmfed::config::{ConfigArgs, ExperimentConfig};
use mmfed::dataset::{self, Layout};
use mmfed::experiment::{self, run_ablation, run_experiment};
use mmfed::tools;
use mmfed::{Error, Result};
use mmfed_core::data::generate_synthetic;
use mmfed_core::finch::PartitionLevel;

#[derive(Parser)]
#[command(name = "mmfed", version, about = "Federated learning with missing modalities: experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Layered {
    /// Flat TOML file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    args: ConfigArgs,
}

impl Layered {
    fn resolve(self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(p) => ConfigArgs::from_file(p)?,
            None => ConfigArgs::default(),
        };
        ExperimentConfig::resolve(base.overlay(self.args))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every method x alpha x beta cell over the configured folds.
    Run(Layered),
    /// Run the seven component combinations of the clustering method.
    Ablate(Layered),
    /// Write the configured synthetic dataset as CSV.
    GenData {
        #[command(flatten)]
        layered: Layered,
        /// Destination file.
        #[arg(long)]
        output: PathBuf,
    },
    /// Cluster the rows of a numeric CSV and print assignments per level.
    ClusterDebug {
        /// CSV with a header row and numeric columns.
        #[arg(long)]
        points: PathBuf,
        /// Level whose cluster sizes are reported: first, last or an index.
        #[arg(long, default_value = "first")]
        level: String,
    },
    /// Write the cluster pool built from one fold's clients.
    PoolDump {
        #[command(flatten)]
        layered: Layered,
        #[arg(long, default_value_t = 0)]
        fold: usize,
        /// Checkpoint whose model embeds the data; the fold's initial model otherwise.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Destination file.
        #[arg(long)]
        output: PathBuf,
    },
}

fn parse_level(s: &str) -> Result<PartitionLevel> {
    match s {
        "first" => Ok(PartitionLevel::First),
        "last" => Ok(PartitionLevel::Last),
        _ => s
            .parse()
            .map(PartitionLevel::Index)
            .map_err(|_| Error::Config(format!("level `{s}`: expected first, last or an index"))),
    }
}

fn print_summary(rows: &[experiment::SummaryRow]) {
    for r in rows.iter().filter(|r| r.metric == "accuracy" || r.metric == "f1_w") {
        let a = r.cell.effective_ablation();
        println!(
            "{:<8} alpha={:<4} beta={:<4} maa={} ctr={} mc={}  {:<9} {:.4} ± {:.4}",
            r.cell.method, r.cell.alpha, r.cell.beta, a.maa as u8, a.ctr as u8, a.mc as u8, r.metric, r.mean, r.sd
        );
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run(l) => {
            let cfg = l.resolve()?;
            print_summary(&run_experiment(&cfg)?);
            println!("wrote {}", cfg.out.display());
        }
        Command::Ablate(l) => {
            let cfg = l.resolve()?;
            print_summary(&run_ablation(&cfg)?);
            println!("wrote {}", cfg.out.display());
        }
        Command::GenData { layered, output } => {
            let cfg = layered.resolve()?;
            let spec = cfg.synthetic_spec();
            let data = generate_synthetic(&spec)?;
            let layout = Layout {
                pet_dim: spec.feature_dim,
                mri_dim: spec.feature_dim,
            };
            dataset::write_csv(&output, layout, &data)?;
            eprintln!("wrote {} instances to {}", data.len(), output.display());
        }
        Command::ClusterDebug { points, level } => {
            let level = parse_level(&level)?;
            let m = tools::read_points(&points)?;
            let r = tools::cluster_debug(&m, level, io::stdout().lock())?;
            eprintln!(
                "{} points, {} levels; level {} has {} clusters, sizes {:?}",
                m.rows(),
                r.hierarchy.len(),
                r.level,
                r.num_clusters(),
                r.sizes
            );
        }
        Command::PoolDump {
            layered,
            fold,
            model,
            output,
        } => {
            let cfg = layered.resolve()?;
            let pool = tools::build_pool(&cfg, fold, model.as_deref().map(Path::new))?;
            experiment::write_pool(&output, &pool)?;
            eprintln!("wrote {} centers to {}", pool.total_centers(mmfed_core::Modality::Pet) + pool.total_centers(mmfed_core::Modality::Mri), output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
