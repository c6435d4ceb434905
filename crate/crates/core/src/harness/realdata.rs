use std::time::Instant;

use rayon::prelude::*;

use crate::dataset::{log2_transform, make_folds, standardize_features, MultiViewDataset};
use crate::error::{Error, Result};
use crate::meta::MetaKind;
use crate::metrics::{accuracy, auc, h_measure, nogueira_stability, SelectionMatrix};
use crate::numerics::RngStream;
use crate::stacking::fit_base_layer;

use super::config::{ExperimentConfig, Mode};
use super::grid::thread_pool;
use super::records::{sort_records, ResultRecord};

/// Held-out predictions and selection of one meta-learner in one outer fold.
struct FoldFit {
    test: Vec<usize>,
    predictions: Vec<f64>,
    selected: Vec<usize>,
    runtime: f64,
}

/// Repeated stratified K-fold evaluation of every meta-learner. Per outer
/// fold the training part is standardized, the full pipeline is fit once
/// per meta-learner on a shared base layer, and the held-out part is
/// predicted.
pub fn run_repeated_cv(d: &MultiViewDataset, cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    if cfg.mode != Mode::Realdata {
        return Err(Error::InvalidConfig("config mode is not `realdata`".into()));
    }
    let y = d.labels()?.to_vec();
    let data = if cfg.log2 { log2_transform(d)? } else { d.clone() };
    let root = RngStream::new(cfg.master_seed);
    let k = cfg.outer_folds;
    let fold_sets = (0..cfg.repetitions)
        .map(|r| make_folds(y.len(), k, &mut root.substream_path(&[0, r as u64]), Some(&y)))
        .collect::<Result<Vec<_>>>()?;
    let kinds = cfg.meta_kinds();
    let tasks: Vec<(usize, usize)> = (0..cfg.repetitions).flat_map(|r| (0..k).map(move |f| (r, f))).collect();
    let pool = thread_pool(cfg.workers)?;
    let fits: Vec<Vec<Result<FoldFit>>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(r, f)| {
                let folds = &fold_sets[r];
                let stream = root.substream_path(&[1, r as u64, f as u64]);
                fit_fold(&data, &folds.train_indices(f), &folds.test_indices(f), &kinds, cfg, &stream)
            })
            .collect()
    });

    let base = |condition: &str, replication: usize, kind: MetaKind, metric: &str, seed: u64| ResultRecord {
        mode: Mode::Realdata.name().into(),
        condition_id: condition.into(),
        views: Some(d.n_views()),
        m_v: None,
        n: Some(d.n_samples()),
        rho_w: None,
        rho_b: None,
        replication,
        meta_learner: kind.name().into(),
        metric: metric.into(),
        value: None,
        n_selected: None,
        seed,
        runtime_s: 0.0,
        error: String::new(),
    };
    let mut records = Vec::new();
    for (ki, &kind) in kinds.iter().enumerate() {
        let mut selections: Vec<Vec<usize>> = Vec::new();
        for r in 0..cfg.repetitions {
            let mut pooled = vec![f64::NAN; y.len()];
            let mut rep_error = String::new();
            for f in 0..k {
                let t = r * k + f;
                let seed = root.substream_path(&[1, r as u64, f as u64]).seed();
                let mut rec = base("fits", t, kind, "n_selected", seed);
                match &fits[t][ki] {
                    Ok(fit) => {
                        for (&i, &p) in fit.test.iter().zip(&fit.predictions) {
                            pooled[i] = p;
                        }
                        rec.value = Some(fit.selected.len() as f64);
                        rec.n_selected = Some(fit.selected.len());
                        rec.runtime_s = if cfg.record_runtime { fit.runtime } else { 0.0 };
                        selections.push(fit.selected.clone());
                    }
                    Err(e) => {
                        rec.error = e.to_string();
                        rep_error = format!("fold {}: {e}", f + 1);
                    }
                }
                records.push(rec);
            }
            let seed = root.substream_path(&[0, r as u64]).seed();
            let metrics: [(&str, Box<dyn Fn() -> Result<f64>>); 3] = [
                ("accuracy", Box::new(|| accuracy(&y, &pooled, 0.5))),
                ("auc", Box::new(|| auc(&y, &pooled))),
                ("h_measure", Box::new(|| h_measure(&y, &pooled, cfg.severity))),
            ];
            for (name, compute) in metrics {
                let mut rec = base("repetitions", r, kind, name, seed);
                if rep_error.is_empty() {
                    match compute() {
                        Ok(v) => rec.value = Some(v),
                        Err(e) => rec.error = e.to_string(),
                    }
                } else {
                    rec.error = rep_error.clone();
                }
                records.push(rec);
            }
        }
        let mut rec = base("all", 0, kind, "stability_phi", cfg.master_seed);
        match SelectionMatrix::from_sets(d.n_views(), selections.iter().map(Vec::as_slice))
            .and_then(|s| nogueira_stability(&s))
        {
            Ok(phi) => rec.value = Some(phi),
            Err(e) => rec.error = e.to_string(),
        }
        rec.n_selected = None;
        records.push(rec);
    }
    sort_records(&mut records);
    Ok(records)
}

fn fit_fold(
    d: &MultiViewDataset,
    train: &[usize],
    test: &[usize],
    kinds: &[MetaKind],
    cfg: &ExperimentConfig,
    stream: &RngStream,
) -> Vec<Result<FoldFit>> {
    let start = Instant::now();
    let prepared = (|| {
        let (train_d, stats) = standardize_features(&d.select_rows(train))?;
        let mvs = cfg.mvs_config();
        let layer = fit_base_layer(&train_d, &mvs.stacking, stream)?;
        Ok((train_d, stats, layer, mvs))
    })();
    let base_time = start.elapsed().as_secs_f64();
    let (train_d, stats, layer, mvs) = match prepared {
        Ok(p) => p,
        Err(e) => {
            let e: Error = e;
            let msg = e.to_string();
            return kinds.iter().map(|_| Err(Error::InvalidArgument(msg.clone()))).collect();
        }
    };
    let test_d = d.select_rows(test);
    kinds
        .iter()
        .map(|&kind| {
            let start = Instant::now();
            let clf = layer.fit_meta(train_d.labels()?, kind, &mvs.meta, stream)?.with_preprocessing(stats.clone());
            let predictions = clf.predict(&test_d)?;
            Ok(FoldFit {
                test: test.to_vec(),
                predictions,
                selected: clf.meta.selected.clone(),
                runtime: base_time + start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}
