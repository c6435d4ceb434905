use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::CvLoss;
use crate::meta::{MetaConfig, MetaKind, StabilityConfig};
use crate::metrics::Severity;
use crate::stacking::{BaseTuning, MvsConfig, StackingConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Simulation,
    Realdata,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulation => "simulation",
            Mode::Realdata => "realdata",
        }
    }
}

/// Base-learner λ tuning mode as written in config files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseTuningMode {
    #[default]
    Nested,
    FullData,
}

/// Flat experiment description, read from TOML or JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub views: Vec<usize>,
    pub features_per_view: Vec<usize>,
    pub n_train: Vec<usize>,
    /// `(ρ_w, ρ_b)` pairs.
    pub correlations: Vec<(f64, f64)>,
    pub n_test: usize,
    pub replications: usize,
    pub meta_learners: Vec<MetaKind>,
    pub n_signal_full: usize,
    pub n_signal_half: usize,
    pub base_weight: f64,
    /// Fixed multiplier on the signal weights. Unset means √(V/30).
    pub weight_scale: Option<f64>,
    pub standardize_test_with_train: bool,
    pub stability_q: usize,
    pub pfer_max: f64,
    pub pairs: usize,
    pub enet_alpha: f64,
    pub gamma_grid: Vec<f64>,
    pub folds: usize,
    pub inner_folds: usize,
    pub base_tuning: BaseTuningMode,
    pub cv_loss: CvLoss,
    pub master_seed: u64,
    pub workers: usize,
    pub record_runtime: bool,
    pub output: Option<String>,
    /// Real-data protocol: repetitions of `outer_folds`-fold CV.
    pub repetitions: usize,
    pub outer_folds: usize,
    pub log2: bool,
    pub severity: Severity,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Simulation,
            views: vec![30],
            features_per_view: vec![25],
            n_train: vec![200],
            correlations: vec![(0.5, 0.0)],
            n_test: 1000,
            replications: 20,
            meta_learners: MetaKind::ALL.to_vec(),
            n_signal_full: 5,
            n_signal_half: 5,
            base_weight: 0.04,
            weight_scale: None,
            standardize_test_with_train: false,
            stability_q: 10,
            pfer_max: 1.5,
            pairs: 50,
            enet_alpha: 0.5,
            gamma_grid: vec![0.5, 1.0, 2.0],
            folds: 10,
            inner_folds: 10,
            base_tuning: BaseTuningMode::Nested,
            cv_loss: CvLoss::Deviance,
            master_seed: 1,
            workers: 1,
            record_runtime: true,
            output: None,
            repetitions: 10,
            outer_folds: 10,
            log2: false,
            severity: Severity::Symmetric,
        }
    }
}

impl ExperimentConfig {
    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.replications == 0 || self.repetitions == 0 {
            return bad("replications and repetitions must be at least 1");
        }
        if self.meta_learners.is_empty() {
            return bad("at least one meta-learner is required");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.folds < 2 || self.inner_folds < 2 || self.outer_folds < 2 {
            return bad("fold counts must be at least 2");
        }
        if self.mode == Mode::Simulation {
            if self.views.is_empty() || self.features_per_view.is_empty() || self.n_train.is_empty() || self.correlations.is_empty() {
                return bad("every condition list needs at least one value");
            }
            if let Some(s) = self.weight_scale {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::InvalidConfig(format!("weight_scale must be positive, got {s}")));
                }
            }
            for &(w, b) in &self.correlations {
                if !(0.0 <= b && b <= w && w < 1.0) {
                    return Err(Error::InvalidConfig(format!("need 0 <= rho_b <= rho_w < 1, got ({w}, {b})")));
                }
            }
        }
        Ok(())
    }

    pub fn mvs_config(&self) -> MvsConfig {
        MvsConfig {
            stacking: StackingConfig {
                folds: self.folds,
                inner_folds: self.inner_folds,
                base_tuning: match self.base_tuning {
                    BaseTuningMode::Nested => BaseTuning::Nested,
                    BaseTuningMode::FullData => BaseTuning::FullData,
                },
                cv_loss: self.cv_loss,
            },
            meta: MetaConfig {
                cv_folds: self.inner_folds,
                enet_alpha: self.enet_alpha,
                gamma_grid: self.gamma_grid.clone(),
                stability: StabilityConfig { q: self.stability_q, pfer_max: self.pfer_max, pairs: self.pairs },
                cv_loss: self.cv_loss,
            },
        }
    }

    /// Meta-learners in canonical order, without duplicates.
    pub fn meta_kinds(&self) -> Vec<MetaKind> {
        let mut k = self.meta_learners.clone();
        k.sort();
        k.dedup();
        k
    }
}
