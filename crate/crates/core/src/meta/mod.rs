//! View-combining meta-learners fit on the matrix of cross-validated base
//! predictions. Every learner returns nonnegative coefficients; the views
//! with a positive coefficient are the selected views.

mod glmnet;
mod interpolating;
mod nnfs;
mod stability;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::CvLoss;
use crate::numerics::{sigmoid, DenseMatrix, RngStream};

pub use glmnet::{fit_nonneg_adaptive_lasso, fit_nonneg_glmnet_meta};
pub use interpolating::{fit_interpolating_predictor, simplex_least_squares, zeroing_threshold};
pub use nnfs::fit_nnfs;
pub use stability::{
    fit_stability_selection, pfer_bound_unimodal, stability_threshold, StabilityThreshold,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaKind {
    Interpolating,
    NnRidge,
    NnEnet,
    NnLasso,
    NnAdaptiveLasso,
    StabilitySelection,
    Nnfs,
}

impl MetaKind {
    pub const ALL: [MetaKind; 7] = [
        MetaKind::Interpolating,
        MetaKind::NnRidge,
        MetaKind::NnEnet,
        MetaKind::NnLasso,
        MetaKind::NnAdaptiveLasso,
        MetaKind::StabilitySelection,
        MetaKind::Nnfs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetaKind::Interpolating => "interpolating",
            MetaKind::NnRidge => "nn_ridge",
            MetaKind::NnEnet => "nn_enet",
            MetaKind::NnLasso => "nn_lasso",
            MetaKind::NnAdaptiveLasso => "nn_adaptive_lasso",
            MetaKind::StabilitySelection => "stability_selection",
            MetaKind::Nnfs => "nnfs",
        }
    }

    /// Whether predictions go through the logistic link with an intercept.
    pub fn is_logistic(self) -> bool {
        self != MetaKind::Interpolating
    }
}

impl fmt::Display for MetaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetaKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown meta-learner `{s}`")))
    }
}

/// Stability selection settings: `q` views per subsample path, the PFER
/// bound and the number of complementary pairs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub q: usize,
    pub pfer_max: f64,
    pub pairs: usize,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self { q: 10, pfer_max: 1.5, pairs: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    pub cv_folds: usize,
    pub enet_alpha: f64,
    pub gamma_grid: Vec<f64>,
    pub stability: StabilityConfig,
    pub cv_loss: CvLoss,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            cv_folds: 10,
            enet_alpha: 0.5,
            gamma_grid: vec![0.5, 1.0, 2.0],
            stability: StabilityConfig::default(),
            cv_loss: CvLoss::Deviance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityDiagnostics {
    pub pi_hat: Vec<f64>,
    pub q: usize,
    pub pairs: usize,
    /// Threshold applied to the selection frequencies.
    pub pi_thr: f64,
    /// Threshold rounded up to two decimals, for reporting.
    pub pi_thr_reported: f64,
    pub pfer_max: f64,
    pub pfer_bound: f64,
    pub stable_set: Vec<usize>,
    /// Subsamples whose path ended before `q` views were active.
    pub exhausted_subsamples: Vec<usize>,
    pub refit_converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Diagnostics {
    Penalized {
        lambda: Option<f64>,
        alpha: f64,
        cv_loss: Option<f64>,
        null_path: bool,
        converged: bool,
    },
    AdaptiveLasso {
        gamma: Option<f64>,
        lambda: Option<f64>,
        cv_loss: Option<f64>,
        initial_coefficients: Vec<f64>,
        excluded: Vec<usize>,
        all_views_excluded: bool,
        converged: bool,
    },
    Interpolating {
        raw_coefficients: Vec<f64>,
        objective: f64,
        threshold: f64,
        iterations: usize,
    },
    Stability(StabilityDiagnostics),
    ForwardSelection {
        /// AIC of the accepted models, starting with intercept only.
        aic_trace: Vec<f64>,
        order: Vec<usize>,
        rejected_negative: Vec<usize>,
        separation_encountered: bool,
    },
}

/// A fitted meta-learner over `V` views.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaModel {
    pub kind: MetaKind,
    pub intercept: Option<f64>,
    pub coefficients: Vec<f64>,
    pub selected: Vec<usize>,
    pub diagnostics: Diagnostics,
}

impl MetaModel {
    pub(crate) fn new(
        kind: MetaKind,
        intercept: Option<f64>,
        coefficients: Vec<f64>,
        diagnostics: Diagnostics,
    ) -> Self {
        let selected = support(&coefficients);
        Self { kind, intercept, coefficients, selected, diagnostics }
    }

    pub fn n_views(&self) -> usize {
        self.coefficients.len()
    }

    pub fn n_selected(&self) -> usize {
        self.selected.len()
    }

    /// Meta prediction for each row of `z`.
    pub fn predict_proba(&self, z: &DenseMatrix<f64>) -> Result<Vec<f64>> {
        if z.cols() != self.coefficients.len() {
            return Err(Error::DimensionMismatch(format!(
                "meta model over {} views, input has {} columns",
                self.coefficients.len(),
                z.cols()
            )));
        }
        Ok((0..z.rows()).map(|i| self.predict_row(z.row(i))).collect())
    }

    pub fn predict_row(&self, z: &[f64]) -> f64 {
        let lin: f64 = self
            .selected
            .iter()
            .map(|&v| self.coefficients[v] * z[v])
            .sum();
        match self.intercept {
            Some(b0) if self.kind.is_logistic() => sigmoid(b0 + lin),
            Some(b0) => b0 + lin,
            None if self.kind.is_logistic() => sigmoid(lin),
            None => lin.clamp(0.0, 1.0),
        }
    }

    /// JSON document with view names in place of indices.
    pub fn to_document(&self, view_names: &[String]) -> Result<MetaModelDocument> {
        if view_names.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} view names for {} coefficients",
                view_names.len(),
                self.coefficients.len()
            )));
        }
        Ok(MetaModelDocument {
            kind: self.kind,
            intercept: self.intercept,
            coefficients: view_names
                .iter()
                .zip(&self.coefficients)
                .map(|(v, &c)| NamedCoefficient { view: v.clone(), value: c })
                .collect(),
            selected_views: self.selected.iter().map(|&v| view_names[v].clone()).collect(),
            diagnostics: self.diagnostics.clone(),
        })
    }

    pub fn from_document(doc: &MetaModelDocument, view_names: &[String]) -> Result<Self> {
        if doc.coefficients.len() != view_names.len()
            || doc.coefficients.iter().zip(view_names).any(|(c, v)| &c.view != v)
        {
            return Err(Error::ViewStructureMismatch(
                "meta model views do not match the classifier's views".into(),
            ));
        }
        let coefficients: Vec<f64> = doc.coefficients.iter().map(|c| c.value).collect();
        if coefficients.iter().any(|&c| !(c >= 0.0)) {
            return Err(Error::InvalidArgument("meta coefficients must be nonnegative".into()));
        }
        Ok(Self::new(doc.kind, doc.intercept, coefficients, doc.diagnostics.clone()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedCoefficient {
    pub view: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaModelDocument {
    pub kind: MetaKind,
    pub intercept: Option<f64>,
    pub coefficients: Vec<NamedCoefficient>,
    pub selected_views: Vec<String>,
    pub diagnostics: Diagnostics,
}

pub(crate) fn support(coefficients: &[f64]) -> Vec<usize> {
    coefficients
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0.0)
        .map(|(v, _)| v)
        .collect()
}

/// Intercept of the intercept-only logistic model.
pub(crate) fn null_intercept(y: &[f64]) -> f64 {
    let m = (y.iter().sum::<f64>() / y.len() as f64).clamp(1e-9, 1.0 - 1e-9);
    (m / (1.0 - m)).ln()
}

pub(crate) fn check_meta_input(z: &DenseMatrix<f64>, y: &[f64]) -> Result<()> {
    if z.rows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "Z has {} rows, outcome has {}",
            z.rows(),
            y.len()
        )));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    Ok(())
}

/// Fits the meta-learner `kind` on `(z, y)`.
pub fn fit_meta(
    kind: MetaKind,
    z: &DenseMatrix<f64>,
    y: &[f64],
    cfg: &MetaConfig,
    rng: &mut RngStream,
) -> Result<MetaModel> {
    check_meta_input(z, y)?;
    if z.as_slice().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidArgument("Z entries must lie in [0, 1]".into()));
    }
    match kind {
        MetaKind::Interpolating => fit_interpolating_predictor(z, y),
        MetaKind::NnRidge => fit_nonneg_glmnet_meta(z, y, 0.0, cfg, rng),
        MetaKind::NnEnet => fit_nonneg_glmnet_meta(z, y, cfg.enet_alpha, cfg, rng),
        MetaKind::NnLasso => fit_nonneg_glmnet_meta(z, y, 1.0, cfg, rng),
        MetaKind::NnAdaptiveLasso => fit_nonneg_adaptive_lasso(z, y, cfg, rng),
        MetaKind::StabilitySelection => fit_stability_selection(
            z,
            y,
            cfg.stability.q,
            cfg.stability.pfer_max,
            cfg.stability.pairs,
            rng,
        ),
        MetaKind::Nnfs => fit_nnfs(z, y),
    }
}
