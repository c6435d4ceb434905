//! Penalized and nonnegativity-constrained logistic regression.
//!
//! The fitting engine behind both the per-view base learners (logistic
//! ridge on standardized inputs) and the meta-learners (nonnegative elastic
//! net family on raw cross-validated predictions).

mod cv;
mod newton;
pub(crate) mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{log1p_exp, sigmoid, DenseMatrix};
use crate::scalar::Scalar;

pub use cv::{cv_path_losses, cv_tune, CvLoss, CvTuneResult};
pub(crate) use cv::argmin_first;
pub use newton::fit_unpenalized_logistic;

use solver::{LogisticProblem, SolverOptions};

mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::scalar::Scalar;

    pub fn serialize<S: Serializer, T: Scalar>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(&v.to_f64_lossy())
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>, T: Scalar>(d: D) -> Result<T, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.map_or(T::nan(), T::lit))
    }
}

/// Number of values on a regularization path.
pub const PATH_LENGTH: usize = 100;
/// Ratio between the smallest and largest path value.
pub const PATH_RATIO: f64 = 1e-4;

/// Penalty and model options for one logistic fit.
///
/// Feature weights multiply both penalty terms of each coefficient; an
/// infinite weight removes the feature from the model.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltySpec<T> {
    pub lambda: T,
    pub alpha: T,
    pub feature_weights: Option<Vec<T>>,
    pub nonnegative: bool,
    pub standardize_inputs: bool,
    pub fit_intercept: bool,
}

impl<T: Scalar> PenaltySpec<T> {
    /// Elastic net with intercept, no constraint and no standardization.
    pub fn new(lambda: T, alpha: T) -> Self {
        Self {
            lambda,
            alpha,
            feature_weights: None,
            nonnegative: false,
            standardize_inputs: false,
            fit_intercept: true,
        }
    }

    pub fn nonnegative(mut self, on: bool) -> Self {
        self.nonnegative = on;
        self
    }

    pub fn standardize(mut self, on: bool) -> Self {
        self.standardize_inputs = on;
        self
    }

    pub fn intercept(mut self, on: bool) -> Self {
        self.fit_intercept = on;
        self
    }

    pub fn weights(mut self, w: Vec<T>) -> Self {
        self.feature_weights = Some(w);
        self
    }

    pub fn with_lambda(&self, lambda: T) -> Self {
        Self { lambda, ..self.clone() }
    }

    fn validate(&self, p: usize) -> Result<()> {
        if !(self.alpha >= T::zero() && self.alpha <= T::one()) {
            return Err(Error::InvalidArgument(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda {} must be >= 0", self.lambda)));
        }
        if let Some(w) = &self.feature_weights {
            if w.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "{} feature weights for {p} features",
                    w.len()
                )));
            }
            if w.iter().any(|&v| !(v >= T::zero())) {
                return Err(Error::InvalidArgument("feature weights must be >= 0".into()));
            }
        }
        Ok(())
    }
}

/// A fitted logistic model on the original feature scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct GlmFit<T> {
    pub intercept: T,
    pub coefficients: Vec<T>,
    pub lambda_used: T,
    pub alpha_used: T,
    pub converged: bool,
    pub n_iterations: usize,
    /// NaN when not computed; written as `null`.
    #[serde(with = "nullable")]
    pub deviance: T,
}

impl<T: Scalar> GlmFit<T> {
    /// Model with the given intercept and all-zero coefficients.
    pub fn intercept_only(intercept: T, p: usize) -> Self {
        Self {
            intercept,
            coefficients: vec![T::zero(); p],
            lambda_used: T::zero(),
            alpha_used: T::zero(),
            converged: true,
            n_iterations: 0,
            deviance: T::nan(),
        }
    }

    /// Indices with a nonzero coefficient.
    pub fn active_set(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != T::zero())
            .map(|(j, _)| j)
            .collect()
    }

    pub fn ensure_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::DidNotConverge { sweeps: self.n_iterations })
        }
    }
}

/// Strictly decreasing penalty values, log-equally spaced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath<T> {
    values: Vec<T>,
}

impl<T: Scalar> LambdaPath<T> {
    /// `PATH_LENGTH` values from `lambda_max` down to `lambda_max * PATH_RATIO`.
    pub fn geometric(lambda_max: T) -> Self {
        let k = PATH_LENGTH - 1;
        let log_ratio = T::lit(PATH_RATIO).ln();
        let mut values: Vec<T> = (0..PATH_LENGTH)
            .map(|i| {
                lambda_max * (log_ratio * T::from_usize_lossy(i) / T::from_usize_lossy(k)).exp()
            })
            .collect();
        values[0] = lambda_max;
        values[k] = lambda_max * T::lit(PATH_RATIO);
        Self { values }
    }

    pub fn from_values(values: Vec<T>) -> Result<Self> {
        if values.is_empty() || values.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidArgument("lambda path must be strictly decreasing".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn lambda_max(&self) -> T {
        self.values[0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_xy<T: Scalar>(x: &DenseMatrix<T>, y: &[T]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows against {} labels",
            x.rows(),
            y.len()
        )));
    }
    if x.rows() == 0 {
        return Err(Error::InvalidArgument("no observations".into()));
    }
    if y.iter().any(|&v| v != T::zero() && v != T::one()) {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    Ok(())
}

pub(crate) fn problem<T: Scalar>(
    x: &DenseMatrix<T>,
    y: &[T],
    spec: &PenaltySpec<T>,
) -> Result<LogisticProblem<T>> {
    check_xy(x, y)?;
    spec.validate(x.cols())?;
    Ok(LogisticProblem::new(x.columns(), y, spec))
}

/// Fits one penalized logistic regression from the intercept-only start.
///
/// Coordinate updates are soft-thresholded and divided by the coordinate
/// curvature plus the ridge term; with `nonnegative` set, negative updates
/// are clamped to zero. The intercept is never penalized. A fit that hits
/// the sweep cap is returned with `converged = false`.
pub fn fit_penalized_logistic<T: Scalar>(
    x: &DenseMatrix<T>,
    y: &[T],
    spec: &PenaltySpec<T>,
) -> Result<GlmFit<T>> {
    let prob = problem(x, y, spec)?;
    let out = prob.fit(spec.lambda, prob.null_state(), &SolverOptions::default());
    Ok(prob.to_fit(&out, spec.lambda))
}

/// Fits along `lambdas` (largest first), warm-starting each fit from the
/// previous solution. `spec.lambda` is ignored.
pub fn fit_path<T: Scalar>(
    x: &DenseMatrix<T>,
    y: &[T],
    spec: &PenaltySpec<T>,
    lambdas: &[T],
) -> Result<Vec<GlmFit<T>>> {
    let prob = problem(x, y, spec)?;
    Ok(path_on_problem(&prob, lambdas, |_| false))
}

/// Walks the path and stops after the first fit for which `stop` returns
/// true.
pub(crate) fn path_on_problem<T: Scalar, F>(
    prob: &LogisticProblem<T>,
    lambdas: &[T],
    mut stop: F,
) -> Vec<GlmFit<T>>
where
    F: FnMut(&GlmFit<T>) -> bool,
{
    let opts = SolverOptions::default();
    let mut state = prob.null_state();
    let mut fits = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        let out = prob.fit(lam, state, &opts);
        let fit = prob.to_fit(&out, lam);
        state = out.state;
        let done = stop(&fit);
        fits.push(fit);
        if done {
            break;
        }
    }
    fits
}

/// Regularization path anchored at the smallest λ for which the
/// intercept-only model is optimal.
///
/// `λ_max = max_j |score_j| / (max(α, 1e-3) · w_j)` over features with
/// finite positive weight, using only positive scores when `nonnegative`.
/// Scores are computed on the standardized scale when `standardize_inputs`
/// is set.
pub fn lambda_path<T: Scalar>(
    x: &DenseMatrix<T>,
    y: &[T],
    spec: &PenaltySpec<T>,
) -> Result<LambdaPath<T>> {
    let prob = problem(x, y, spec)?;
    lambda_path_for(&prob)
}

pub(crate) fn lambda_path_for<T: Scalar>(prob: &LogisticProblem<T>) -> Result<LambdaPath<T>> {
    Ok(LambdaPath::geometric(lambda_max_for(prob)?))
}

pub(crate) fn lambda_max_for<T: Scalar>(prob: &LogisticProblem<T>) -> Result<T> {
    let denom_alpha = prob.alpha.max(T::lit(1e-3));
    let floor = T::lit(1e-12);
    let mut best = T::zero();
    for (j, &s) in prob.null_scores().iter().enumerate() {
        let w = prob.penalty_weights()[j];
        if !prob.is_updatable(j) || !(w > T::zero()) || !w.is_finite() {
            continue;
        }
        let s = if prob.nonnegative { s } else { s.abs() };
        if s > floor {
            best = best.max(s / (denom_alpha * w));
        }
    }
    if best > T::zero() && best.is_finite() {
        // A relative margin far below any tolerance keeps the first fit of
        // the path exactly null despite rounding in the solver's scores.
        Ok(best * (T::one() + T::lit(1e-12).max(T::epsilon() * T::lit(16.0))))
    } else {
        Err(Error::NullPath)
    }
}

/// `sigmoid(intercept + X β)` for every row.
pub fn predict_proba<T: Scalar>(fit: &GlmFit<T>, x: &DenseMatrix<T>) -> Result<Vec<T>> {
    if x.cols() != fit.coefficients.len() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} coefficients, data has {} columns",
            fit.coefficients.len(),
            x.cols()
        )));
    }
    Ok(linear_predictor(fit, x).into_iter().map(sigmoid).collect())
}

pub(crate) fn linear_predictor<T: Scalar>(fit: &GlmFit<T>, x: &DenseMatrix<T>) -> Vec<T> {
    (0..x.rows())
        .map(|i| {
            fit.intercept
                + x.row(i)
                    .iter()
                    .zip(&fit.coefficients)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
        })
        .collect()
}

/// `−2 Σ [y log p̂ + (1 − y) log(1 − p̂)]` with `p̂` clipped to
/// `[1e-12, 1 − 1e-12]`.
pub fn binomial_deviance<T: Scalar>(y: &[T], p_hat: &[T]) -> T {
    let lo = T::lit(1e-12);
    let hi = T::one() - lo;
    let s: T = y
        .iter()
        .zip(p_hat)
        .map(|(&yi, &p)| {
            let p = p.max(lo).min(hi);
            yi * p.ln() + (T::one() - yi) * (T::one() - p).ln()
        })
        .sum();
    T::lit(-2.0) * s
}

/// Mean negative log-likelihood of a logistic model with the given
/// original-scale parameters.
pub fn logistic_loss<T: Scalar>(x: &DenseMatrix<T>, y: &[T], intercept: T, beta: &[T]) -> T {
    let n = T::from_usize_lossy(y.len());
    (0..x.rows())
        .map(|i| {
            let eta = intercept + x.row(i).iter().zip(beta).fold(T::zero(), |a, (&u, &v)| a + u * v);
            log1p_exp(eta) - y[i] * eta
        })
        .sum::<T>()
        / n
}

/// Penalized objective of `spec` at original-scale parameters, for inputs
/// that are not standardized internally.
pub fn penalized_objective<T: Scalar>(
    x: &DenseMatrix<T>,
    y: &[T],
    spec: &PenaltySpec<T>,
    intercept: T,
    beta: &[T],
) -> T {
    let half = T::lit(0.5);
    let pen: T = beta
        .iter()
        .enumerate()
        .filter(|(_, b)| **b != T::zero())
        .map(|(j, &b)| {
            let w = spec.feature_weights.as_ref().map_or(T::one(), |w| w[j]);
            w * ((T::one() - spec.alpha) * half * b * b + spec.alpha * b.abs())
        })
        .sum();
    logistic_loss(x, y, intercept, beta) + spec.lambda * pen
}

#[cfg(test)]
mod tests;
