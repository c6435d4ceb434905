use crate::error::{Error, Result};
use crate::numerics::{cholesky, cholesky_solve, log1p_exp, sigmoid, DenseMatrix};
use crate::scalar::Scalar;

use super::solver::{LogisticProblem, SolverOptions};
use super::{check_xy, GlmFit, PenaltySpec};

const NORM_CAP: f64 = 1e3;
const MAX_NEWTON: usize = 200;

/// Unpenalized maximum-likelihood logistic regression with intercept.
///
/// Without the constraint this runs damped Newton iterations; with
/// `nonnegative` set it solves the constrained problem by coordinate descent
/// with a `1e-8` ridge term. Either way, separation is stopped by a cap of
/// `1e3` on the coefficient norm and reported through `converged = false`.
pub fn fit_unpenalized_logistic<T: Scalar>(
    x: &DenseMatrix<T>,
    y: &[T],
    nonnegative: bool,
) -> Result<GlmFit<T>> {
    check_xy(x, y)?;
    if x.cols() > x.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} columns exceed {} rows",
            x.cols(),
            x.rows()
        )));
    }
    if nonnegative {
        let spec = PenaltySpec::new(T::lit(1e-8), T::zero()).nonnegative(true);
        let prob = LogisticProblem::new(x.columns(), y, &spec);
        let opts = SolverOptions { coef_cap: NORM_CAP, ..SolverOptions::default() };
        let out = prob.fit(spec.lambda, prob.null_state(), &opts);
        let mut fit = prob.to_fit(&out, spec.lambda);
        // The ridge term keeps a separated fit finite; the MLE still does not exist.
        if separates(x, y, &fit) {
            fit.converged = false;
        }
        return Ok(fit);
    }
    Ok(newton(x, y))
}

/// True when the fitted linear predictor classifies every observation
/// correctly, i.e. the data are completely separated.
fn separates<T: Scalar>(x: &DenseMatrix<T>, y: &[T], fit: &GlmFit<T>) -> bool {
    if fit.coefficients.iter().all(|&b| b == T::zero()) {
        return false;
    }
    super::linear_predictor(fit, x)
        .iter()
        .zip(y)
        .all(|(&eta, &yi)| (eta > T::zero()) == (yi == T::one()))
}

fn nll<T: Scalar>(x: &DenseMatrix<T>, y: &[T], theta: &[T]) -> T {
    (0..x.rows())
        .map(|i| {
            let eta = eta_row(x.row(i), theta);
            log1p_exp(eta) - y[i] * eta
        })
        .sum()
}

#[inline]
fn eta_row<T: Scalar>(row: &[T], theta: &[T]) -> T {
    theta[0] + row.iter().zip(&theta[1..]).fold(T::zero(), |a, (&u, &v)| a + u * v)
}

fn newton<T: Scalar>(x: &DenseMatrix<T>, y: &[T]) -> GlmFit<T> {
    let n = x.rows();
    let d = x.cols() + 1;
    let eps = T::lit(1e-9);
    let ybar = (y.iter().copied().sum::<T>() / T::from_usize_lossy(n)).max(eps).min(T::one() - eps);
    let mut theta = vec![T::zero(); d];
    theta[0] = (ybar / (T::one() - ybar)).ln();
    let mut f = nll(x, y, &theta);
    let tol = T::lit(1e-8);
    let cap = T::lit(NORM_CAP);
    let mut converged = false;
    let mut iters = 0;

    let design = |i: usize, a: usize| if a == 0 { T::one() } else { x.get(i, a - 1) };

    while iters < MAX_NEWTON {
        iters += 1;
        let mut grad = vec![T::zero(); d];
        let mut hess = DenseMatrix::zeros(d, d);
        for i in 0..n {
            let p = sigmoid(eta_row(x.row(i), &theta));
            let r = p - y[i];
            let w = p * (T::one() - p);
            for a in 0..d {
                let xa = design(i, a);
                grad[a] = grad[a] + xa * r;
                for b in 0..=a {
                    let v = hess.get(a, b) + w * xa * design(i, b);
                    hess.set(a, b, v);
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                hess.set(b, a, hess.get(a, b));
            }
        }
        let step = damped_solve(&hess, &grad);
        let Some(step) = step else { break };

        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<T> = theta.iter().zip(&step).map(|(&a, &s)| a - t * s).collect();
            let fc = nll(x, y, &cand);
            if fc <= f + T::lit(1e-12) * (T::one() + f.abs()) {
                accepted = Some((cand, fc));
                break;
            }
            t = t * T::lit(0.5);
        }
        let Some((cand, fc)) = accepted else {
            converged = true;
            break;
        };
        let change = theta.iter().zip(&cand).map(|(&a, &b)| (a - b).abs()).fold(T::zero(), T::max);
        theta = cand;
        f = fc;
        let norm = theta.iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm > cap {
            break;
        }
        if change < tol {
            converged = true;
            break;
        }
    }

    GlmFit {
        intercept: theta[0],
        coefficients: theta[1..].to_vec(),
        lambda_used: T::zero(),
        alpha_used: T::zero(),
        converged,
        n_iterations: iters,
        deviance: T::lit(2.0) * f,
    }
}

/// Newton direction with increasing diagonal damping until the Hessian
/// factorizes.
fn damped_solve<T: Scalar>(hess: &DenseMatrix<T>, grad: &[T]) -> Option<Vec<T>> {
    let d = hess.rows();
    let scale = (0..d).map(|a| hess.get(a, a)).fold(T::zero(), T::max).max(T::one());
    let mut jitter = T::lit(1e-10) * scale;
    for _ in 0..12 {
        let mut h = hess.clone();
        for a in 0..d {
            h.set(a, a, h.get(a, a) + jitter);
        }
        if let Ok(l) = cholesky(&h) {
            return Some(cholesky_solve(&l, grad));
        }
        jitter = jitter * T::lit(100.0);
    }
    None
}
