use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::meta::MetaKind;
use crate::metrics::{accuracy, selection_rates};
use crate::numerics::{mix_seed, RngStream};
use crate::simulation::{generate_replication, SimulationConfig};
use crate::stacking::{fit_base_layer, StackedClassifier};

use super::config::{ExperimentConfig, Mode};
use super::records::{sort_records, ResultRecord};

/// Metrics written per (condition, replication, meta-learner).
pub const SIMULATION_METRICS: [&str; 4] = ["accuracy", "fdr", "fpr", "tpr"];

/// One cell of the simulation grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub id: String,
    pub views: usize,
    pub features_per_view: usize,
    pub n_train: usize,
    pub rho_w: f64,
    pub rho_b: f64,
}

/// Cartesian product of the condition lists, ids `c000`, `c001`, ...
pub fn conditions(cfg: &ExperimentConfig) -> Vec<Condition> {
    let mut out = Vec::new();
    for &views in &cfg.views {
        for &features_per_view in &cfg.features_per_view {
            for &n_train in &cfg.n_train {
                for &(rho_w, rho_b) in &cfg.correlations {
                    out.push(Condition {
                        id: format!("c{:03}", out.len()),
                        views,
                        features_per_view,
                        n_train,
                        rho_w,
                        rho_b,
                    });
                }
            }
        }
    }
    out
}

/// Seed of one (condition, replication) task.
pub fn task_seed(master: u64, condition: usize, replication: usize) -> u64 {
    mix_seed(mix_seed(master, condition as u64), replication as u64)
}

/// Simulation settings of one grid condition.
pub fn simulation_config(cfg: &ExperimentConfig, c: &Condition) -> SimulationConfig {
    SimulationConfig {
        views: c.views,
        features_per_view: c.features_per_view,
        n_train: c.n_train,
        n_test: cfg.n_test,
        rho_w: c.rho_w,
        rho_b: c.rho_b,
        n_signal_full: cfg.n_signal_full,
        n_signal_half: cfg.n_signal_half,
        base_weight: cfg.base_weight,
        weight_scale: cfg.weight_scale.unwrap_or_else(|| (c.views as f64 / 30.0).sqrt()),
        standardize_test_with_train: cfg.standardize_test_with_train,
        seed: 0,
    }
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {workers} workers: {e}")))
}

/// Callback receiving each fitted classifier with its condition and
/// replication.
pub type FitObserver<'a> = &'a (dyn Fn(&Condition, usize, &StackedClassifier) + Sync);

/// Runs every (condition, replication) task and returns the sorted records.
pub fn run_simulation_grid(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    run_simulation_grid_observed(cfg, &|_, _, _| {})
}

/// [`run_simulation_grid`] that also hands every fitted classifier to
/// `observe`. Calls arrive from worker threads in no fixed order.
pub fn run_simulation_grid_observed(cfg: &ExperimentConfig, observe: FitObserver<'_>) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    if cfg.mode != Mode::Simulation {
        return Err(Error::InvalidConfig("config mode is not `simulation`".into()));
    }
    let conds = conditions(cfg);
    let tasks: Vec<(usize, usize)> =
        (0..conds.len()).flat_map(|c| (0..cfg.replications).map(move |r| (c, r))).collect();
    let pool = thread_pool(cfg.workers)?;
    let mut records: Vec<ResultRecord> = pool.install(|| {
        tasks
            .par_iter()
            .flat_map_iter(|&(c, r)| run_task(cfg, &conds[c], c, r, observe))
            .collect()
    });
    sort_records(&mut records);
    Ok(records)
}

struct MetaOutcome {
    values: [Option<f64>; 4],
    n_selected: Option<usize>,
    runtime: f64,
    error: String,
}

fn run_task(cfg: &ExperimentConfig, cond: &Condition, c: usize, rep: usize, observe: FitObserver<'_>) -> Vec<ResultRecord> {
    let seed = task_seed(cfg.master_seed, c, rep);
    let kinds = cfg.meta_kinds();
    let outcomes = match simulate_task(cfg, cond, rep, seed, &kinds, observe) {
        Ok(o) => o,
        Err(e) => kinds
            .iter()
            .map(|_| MetaOutcome { values: [None; 4], n_selected: None, runtime: 0.0, error: e.to_string() })
            .collect(),
    };
    let mut out = Vec::with_capacity(kinds.len() * SIMULATION_METRICS.len());
    for (kind, o) in kinds.iter().zip(outcomes) {
        for (metric, value) in SIMULATION_METRICS.iter().zip(o.values) {
            out.push(ResultRecord {
                mode: Mode::Simulation.name().into(),
                condition_id: cond.id.clone(),
                views: Some(cond.views),
                m_v: Some(cond.features_per_view),
                n: Some(cond.n_train),
                rho_w: Some(cond.rho_w),
                rho_b: Some(cond.rho_b),
                replication: rep,
                meta_learner: kind.name().into(),
                metric: (*metric).into(),
                value,
                n_selected: o.n_selected,
                seed,
                runtime_s: if cfg.record_runtime { o.runtime } else { 0.0 },
                error: o.error.clone(),
            });
        }
    }
    out
}

fn simulate_task(
    cfg: &ExperimentConfig,
    cond: &Condition,
    rep: usize,
    seed: u64,
    kinds: &[MetaKind],
    observe: FitObserver<'_>,
) -> Result<Vec<MetaOutcome>> {
    let root = RngStream::new(seed);
    let sim = simulation_config(cfg, cond);
    let (train, test, truth) = generate_replication(&sim, &root.substream(1))?;
    let mvs = cfg.mvs_config();
    let pipeline = root.substream(2);
    let start = Instant::now();
    let base = fit_base_layer(&train, &mvs.stacking, &pipeline)?;
    let base_time = start.elapsed().as_secs_f64();
    let y = train.labels()?;
    let truth_set: BTreeSet<usize> = truth.signal_views.iter().copied().collect();
    Ok(kinds
        .iter()
        .map(|&kind| {
            let start = Instant::now();
            let result = base.fit_meta(y, kind, &mvs.meta, &pipeline).and_then(|clf| {
                observe(cond, rep, &clf);
                let acc = if test.n_samples() > 0 {
                    Some(accuracy(test.labels()?, &clf.predict(&test)?, 0.5)?)
                } else {
                    None
                };
                let selected: BTreeSet<usize> = clf.meta.selected.iter().copied().collect();
                let rates = selection_rates(&selected, &truth_set, cond.views)?;
                Ok(([acc, Some(rates.fdr), rates.fpr, rates.tpr], selected.len()))
            });
            let runtime = base_time + start.elapsed().as_secs_f64();
            match result {
                Ok((values, k)) => MetaOutcome { values, n_selected: Some(k), runtime, error: String::new() },
                Err(e) => MetaOutcome { values: [None; 4], n_selected: None, runtime, error: e.to_string() },
            }
        })
        .collect())
}
