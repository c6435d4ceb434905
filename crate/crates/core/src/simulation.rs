//! Simulated multi-view data with block-correlated Gaussian features and a
//! logistic ground-truth model.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{mean_sd, MultiViewDataset};
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, standard_normal, DenseMatrix, RngStream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub views: usize,
    pub features_per_view: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub rho_w: f64,
    pub rho_b: f64,
    #[serde(default = "default_signal")]
    pub n_signal_full: usize,
    #[serde(default = "default_signal")]
    pub n_signal_half: usize,
    #[serde(default = "default_base_weight")]
    pub base_weight: f64,
    #[serde(default = "default_weight_scale")]
    pub weight_scale: f64,
    /// Standardize the test set with the training means and sds instead of
    /// its own.
    #[serde(default)]
    pub standardize_test_with_train: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_signal() -> usize {
    5
}

fn default_base_weight() -> f64 {
    0.04
}

fn default_weight_scale() -> f64 {
    1.0
}

impl SimulationConfig {
    pub fn new(views: usize, features_per_view: usize, n_train: usize, rho_w: f64, rho_b: f64) -> Self {
        Self {
            views,
            features_per_view,
            n_train,
            n_test: 1000,
            rho_w,
            rho_b,
            n_signal_full: default_signal(),
            n_signal_half: default_signal(),
            base_weight: default_base_weight(),
            weight_scale: default_weight_scale(),
            standardize_test_with_train: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.views == 0 || self.features_per_view == 0 {
            return Err(Error::InvalidConfig("need at least one view and one feature per view".into()));
        }
        if !(0.0 <= self.rho_b && self.rho_b <= self.rho_w && self.rho_w < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= rho_b <= rho_w < 1, got rho_w={}, rho_b={}",
                self.rho_w, self.rho_b
            )));
        }
        if self.n_signal_full + self.n_signal_half > self.views {
            return Err(Error::InvalidConfig(format!(
                "{} signal views requested out of {}",
                self.n_signal_full + self.n_signal_half,
                self.views
            )));
        }
        if self.base_weight == 0.0 || !self.base_weight.is_finite() || !self.weight_scale.is_finite() {
            return Err(Error::InvalidConfig("base_weight must be finite and nonzero".into()));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.views * self.features_per_view
    }
}

/// Signal views and per-feature weights of the data-generating model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Sorted indices of views with at least one active feature.
    pub signal_views: Vec<usize>,
    pub active_features: Vec<Vec<bool>>,
    /// Weights in view-major feature order, zero for inactive features.
    pub weights: Vec<f64>,
}

/// Samples `n` rows of `V·m` features. Feature `j` of view `v` is
/// `√ρ_b·G + √(ρ_w−ρ_b)·U_v + √(1−ρ_w)·E_j`, then each column is centred and
/// scaled to sample sd 1.
pub fn sample_features(cfg: &SimulationConfig, n: usize, rng: &mut RngStream) -> Result<DenseMatrix<f64>> {
    cfg.validate()?;
    let raw = sample_raw(cfg, n, rng)?;
    Ok(apply_stats(&raw, &column_stats(&raw)))
}

/// Draws the signal views, their active features and the weight signs.
/// The first `n_signal_full` drawn views are fully active; the next
/// `n_signal_half` activate `⌈m/2⌉` features each.
pub fn assign_signal(cfg: &SimulationConfig, rng: &mut RngStream) -> Result<GroundTruth> {
    cfg.validate()?;
    let (v, m) = (cfg.views, cfg.features_per_view);
    let n_signal = cfg.n_signal_full + cfg.n_signal_half;
    let drawn = sample(rng, v, n_signal).into_vec();
    let w = cfg.base_weight * cfg.weight_scale;
    let mut active = vec![vec![false; m]; v];
    for (k, &view) in drawn.iter().enumerate() {
        if k < cfg.n_signal_full {
            active[view].iter_mut().for_each(|a| *a = true);
        } else {
            for j in sample(rng, m, m.div_ceil(2)) {
                active[view][j] = true;
            }
        }
    }
    let mut weights = vec![0.0; v * m];
    for (view, mask) in active.iter().enumerate() {
        for (j, &on) in mask.iter().enumerate() {
            if on {
                weights[view * m + j] = if rng.random::<bool>() { w } else { -w };
            }
        }
    }
    let mut signal_views = drawn;
    signal_views.sort_unstable();
    Ok(GroundTruth { signal_views, active_features: active, weights })
}

/// Bernoulli labels with success probability `sigmoid(x·β)`.
pub fn sample_outcome(x: &DenseMatrix<f64>, truth: &GroundTruth, rng: &mut RngStream) -> Result<Vec<f64>> {
    let eta = x.mat_vec(&truth.weights)?;
    Ok(eta
        .into_iter()
        .map(|e| if rng.random::<f64>() < sigmoid(e) { 1.0 } else { 0.0 })
        .collect())
}

fn split_views(x: &DenseMatrix<f64>, v: usize, m: usize) -> Vec<DenseMatrix<f64>> {
    (0..v).map(|k| x.column_block(k * m, m)).collect()
}

/// One training set, one test set and the ground truth they share.
pub fn generate_replication(
    cfg: &SimulationConfig,
    rng: &RngStream,
) -> Result<(MultiViewDataset, MultiViewDataset, GroundTruth)> {
    cfg.validate()?;
    let truth = assign_signal(cfg, &mut rng.substream(1))?;
    let train_raw = sample_raw(cfg, cfg.n_train, &mut rng.substream(2))?;
    let test_raw = sample_raw(cfg, cfg.n_test, &mut rng.substream(4))?;
    let train_stats = column_stats(&train_raw);
    let train_x = apply_stats(&train_raw, &train_stats);
    let test_x = if cfg.standardize_test_with_train {
        apply_stats(&test_raw, &train_stats)
    } else {
        let s = column_stats(&test_raw);
        apply_stats(&test_raw, &s)
    };
    let y_train = sample_outcome(&train_x, &truth, &mut rng.substream(3))?;
    let y_test = sample_outcome(&test_x, &truth, &mut rng.substream(5))?;
    let (v, m) = (cfg.views, cfg.features_per_view);
    let train = MultiViewDataset::new(split_views(&train_x, v, m), Some(y_train))?;
    let test = MultiViewDataset::new(split_views(&test_x, v, m), Some(y_test))?;
    Ok((train, test, truth))
}

/// The latent-factor construction without the final standardization.
fn sample_raw(cfg: &SimulationConfig, n: usize, rng: &mut RngStream) -> Result<DenseMatrix<f64>> {
    let (v, m) = (cfg.views, cfg.features_per_view);
    let p = v * m;
    let (a, b, c) = (cfg.rho_b.sqrt(), (cfg.rho_w - cfg.rho_b).sqrt(), (1.0 - cfg.rho_w).sqrt());
    let mut data = Vec::with_capacity(n * p);
    for _ in 0..n {
        let g: f64 = standard_normal::<f64>(rng, 1)[0];
        let u: Vec<f64> = standard_normal(rng, v);
        let e: Vec<f64> = standard_normal(rng, p);
        for j in 0..p {
            data.push(a * g + b * u[j / m] + c * e[j]);
        }
    }
    DenseMatrix::new(n, p, data)
}

/// Column means and sds; `None` when there are fewer than two rows.
fn column_stats(x: &DenseMatrix<f64>) -> Option<Vec<(f64, f64)>> {
    (x.rows() >= 2).then(|| (0..x.cols()).map(|j| mean_sd(&x.column(j))).collect())
}

fn apply_stats(x: &DenseMatrix<f64>, stats: &Option<Vec<(f64, f64)>>) -> DenseMatrix<f64> {
    let mut out = x.clone();
    if let Some(stats) = stats {
        for i in 0..x.rows() {
            for (j, &(mean, sd)) in stats.iter().enumerate() {
                out.set(i, j, (x.get(i, j) - mean) / sd);
            }
        }
    }
    out
}
