use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use mvs_core::dataset::{load_multiview_csv, standardize_features, write_multiview_csv};
use mvs_core::harness::{
    conditions, run_repeated_cv, run_simulation_grid, simulation_config, summarize, task_seed, write_results,
    ExperimentConfig, Mode,
};
use mvs_core::meta::MetaKind;
use mvs_core::numerics::RngStream;
use mvs_core::simulation::generate_replication;
use mvs_core::stacking::{fit_mvs, StackedClassifier};

#[derive(Parser)]
#[command(name = "mvs", version, about = "Multi-view stacking with view-selecting meta-learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation grid described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Repeated cross-validation of every meta-learner on a data set.
    Realdata {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        viewmap: PathBuf,
        #[arg(long)]
        outcome: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit one stacked classifier and write it as JSON.
    Fit {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        viewmap: PathBuf,
        #[arg(long)]
        outcome: String,
        #[arg(long, default_value = "nn_lasso")]
        meta: MetaKind,
        /// Pipeline settings; defaults apply when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Standardize features and store the statistics in the model.
        #[arg(long)]
        standardize: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict probabilities with a saved classifier.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        viewmap: PathBuf,
        /// Outcome column to drop from the features file, if present.
        #[arg(long)]
        outcome: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate a result CSV by condition, meta-learner and metric.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the train and test data of one simulation task as CSV.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        condition: usize,
        #[arg(long, default_value_t = 0)]
        replication: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &Path, workers: Option<usize>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(path).with_context(|| format!("reading config {}", path.display()))?;
    if let Some(w) = workers {
        cfg.workers = w;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, out, workers, seed } => {
            let mut cfg = load_config(&config, workers, seed)?;
            cfg.mode = Mode::Simulation;
            let records = run_simulation_grid(&cfg)?;
            write_results(&out, &records, &cfg)?;
            eprintln!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Realdata { features, viewmap, outcome, config, out, workers, seed } => {
            let mut cfg = load_config(&config, workers, seed)?;
            cfg.mode = Mode::Realdata;
            let d = load_multiview_csv(&features, &viewmap, Some(&outcome))?;
            let records = run_repeated_cv(&d, &cfg)?;
            write_results(&out, &records, &cfg)?;
            eprintln!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Fit { features, viewmap, outcome, meta, config, standardize, seed, out } => {
            let cfg = match config {
                Some(p) => load_config(&p, None, None)?,
                None => ExperimentConfig::default(),
            };
            let d = load_multiview_csv(&features, &viewmap, Some(&outcome))?;
            let rng = RngStream::new(seed);
            let clf = if standardize {
                let (scaled, stats) = standardize_features(&d)?;
                fit_mvs(&scaled, meta, &cfg.mvs_config(), &rng)?.with_preprocessing(stats)
            } else {
                fit_mvs(&d, meta, &cfg.mvs_config(), &rng)?
            };
            std::fs::write(&out, clf.to_json()?)?;
            let names: Vec<&str> = clf.meta.selected.iter().map(|&v| clf.view_names[v].as_str()).collect();
            eprintln!("selected views: {}", names.join(", "));
        }
        Command::Predict { model, features, viewmap, outcome, out } => {
            let text = std::fs::read_to_string(&model).with_context(|| format!("reading {}", model.display()))?;
            let clf = StackedClassifier::from_json(&text)?;
            let d = load_multiview_csv(&features, &viewmap, outcome.as_deref())?;
            if d.view_names() != clf.view_names.as_slice() {
                bail!("views {:?} do not match the model's {:?}", d.view_names(), clf.view_names);
            }
            let p = clf.predict(&d)?;
            let mut w = BufWriter::new(File::create(&out)?);
            writeln!(w, "probability")?;
            for v in p {
                writeln!(w, "{v}")?;
            }
            w.flush()?;
        }
        Command::Summarize { input, out } => {
            let rows = summarize(BufReader::new(File::open(&input)?), BufWriter::new(File::create(&out)?))?;
            eprintln!("wrote {} summary rows", rows.len());
        }
        Command::Generate { config, condition, replication, out } => {
            let cfg = load_config(&config, None, None)?;
            let conds = conditions(&cfg);
            let Some(cond) = conds.get(condition) else {
                bail!("condition {condition} out of range, grid has {}", conds.len());
            };
            let sim = simulation_config(&cfg, cond);
            let seed = task_seed(cfg.master_seed, condition, replication);
            let (train, test, truth) = generate_replication(&sim, &RngStream::new(seed).substream(1))?;
            std::fs::create_dir_all(&out)?;
            write_multiview_csv(&train, &out.join("train.csv"), &out.join("viewmap.csv"), Some("y"))?;
            write_multiview_csv(&test, &out.join("test.csv"), &out.join("viewmap.csv"), Some("y"))?;
            std::fs::write(out.join("truth.json"), serde_json::to_string_pretty(&truth)?)?;
        }
    }
    Ok(())
}
