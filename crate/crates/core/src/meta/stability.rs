use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::glm::{fit_unpenalized_logistic, lambda_path_for, path_on_problem, problem, PenaltySpec};
use crate::numerics::{DenseMatrix, RngStream};

use super::{
    check_meta_input, null_intercept, Diagnostics, MetaKind, MetaModel, StabilityDiagnostics,
};

/// Selection-frequency cutoff meeting a PFER bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityThreshold {
    /// Cutoff used for selection, `1/2 + k/(2B)`.
    pub cutoff: f64,
    /// Cutoff rounded up to two decimals.
    pub reported: f64,
    /// A view is stable when selected in at least this many of the `2B`
    /// subsamples.
    pub count_threshold: usize,
    /// PFER bound at `cutoff`.
    pub bound: f64,
}

/// Complementary-pairs PFER bound under the unimodality assumption, or
/// `None` when `cutoff` lies outside the range where the bound holds.
pub fn pfer_bound_unimodal(cutoff: f64, q: usize, v: usize, pairs: usize) -> Option<f64> {
    let theta = q as f64 / v as f64;
    let b = pairs as f64;
    let lower = f64::min(0.5 + theta * theta, 0.5 + 1.0 / (2.0 * b) + 0.75 * theta * theta);
    if !(cutoff > lower && cutoff <= 1.0) {
        return None;
    }
    let c = if cutoff <= 0.75 {
        2.0 * (2.0 * cutoff - 1.0 - 1.0 / (2.0 * b))
    } else {
        (1.0 + 1.0 / b) / (4.0 * (1.0 - cutoff + 1.0 / (2.0 * b)))
    };
    Some(q as f64 * q as f64 / v as f64 / c)
}

/// Smallest attainable cutoff `1/2 + k/(2B)` whose PFER bound is at most
/// `pfer_max`.
pub fn stability_threshold(q: usize, v: usize, pairs: usize, pfer_max: f64) -> Result<StabilityThreshold> {
    if q == 0 || q > v {
        return Err(Error::InvalidArgument(format!("need 1 <= q <= V, got q={q}, V={v}")));
    }
    if pairs == 0 || !(pfer_max > 0.0) {
        return Err(Error::InvalidArgument("need B >= 1 and pfer_max > 0".into()));
    }
    let two_b = 2 * pairs;
    for k in 1..=pairs {
        let cutoff = 0.5 + k as f64 / two_b as f64;
        if let Some(bound) = pfer_bound_unimodal(cutoff, q, v, pairs) {
            if bound <= pfer_max {
                return Ok(StabilityThreshold {
                    cutoff,
                    reported: (cutoff * 100.0 - 1e-9).ceil() / 100.0,
                    count_threshold: pairs + k,
                    bound,
                });
            }
        }
    }
    Err(Error::Infeasible { q, views: v, pfer_max })
}

/// Active set at the first λ of a nonnegative lasso path with at least `q`
/// active views, and whether the path ended before reaching `q`.
fn subsample_selection(z: &DenseMatrix<f64>, y: &[f64], rows: &[usize], q: usize) -> Result<(Vec<usize>, bool)> {
    let zs = z.select_rows(rows);
    let ys: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let spec = PenaltySpec::new(0.0, 1.0).nonnegative(true);
    let prob = problem(&zs, &ys, &spec)?;
    let path = match lambda_path_for(&prob) {
        Ok(p) => p,
        Err(Error::NullPath) => return Ok((Vec::new(), true)),
        Err(e) => return Err(e),
    };
    let fits = path_on_problem(&prob, path.values(), |f| f.active_set().len() >= q);
    let last = fits.last().expect("nonempty path").active_set();
    let exhausted = last.len() < q;
    Ok((last, exhausted))
}

/// Complementary-pairs stability selection over views, followed by an
/// unpenalized nonnegative logistic fit on the stable views.
pub fn fit_stability_selection(
    z: &DenseMatrix<f64>,
    y: &[f64],
    q: usize,
    pfer_max: f64,
    pairs: usize,
    rng: &mut RngStream,
) -> Result<MetaModel> {
    check_meta_input(z, y)?;
    let (n, v) = (z.rows(), z.cols());
    if n < 4 {
        return Err(Error::InvalidArgument(format!("stability selection needs n >= 4, got {n}")));
    }
    let thr = stability_threshold(q, v, pairs, pfer_max)?;
    let half = n / 2;
    let mut subsamples = Vec::with_capacity(2 * pairs);
    let mut idx: Vec<usize> = (0..n).collect();
    for _ in 0..pairs {
        idx.shuffle(rng);
        let mut a = idx[..half].to_vec();
        let mut b = idx[half..2 * half].to_vec();
        a.sort_unstable();
        b.sort_unstable();
        subsamples.push(a);
        subsamples.push(b);
    }
    let results: Vec<Result<(Vec<usize>, bool)>> = subsamples
        .par_iter()
        .map(|rows| subsample_selection(z, y, rows, q))
        .collect();
    let mut counts = vec![0usize; v];
    let mut exhausted_subsamples = Vec::new();
    for (s, r) in results.into_iter().enumerate() {
        let (set, exhausted) = r?;
        for j in set {
            counts[j] += 1;
        }
        if exhausted {
            exhausted_subsamples.push(s);
        }
    }
    let pi_hat: Vec<f64> = counts.iter().map(|&c| c as f64 / (2 * pairs) as f64).collect();
    let stable_set: Vec<usize> = (0..v).filter(|&j| counts[j] >= thr.count_threshold).collect();

    let mut coefficients = vec![0.0; v];
    let (intercept, refit_converged) = if stable_set.is_empty() {
        (null_intercept(y), true)
    } else {
        let fit = fit_unpenalized_logistic(&z.select_columns(&stable_set), y, true)?;
        for (&j, &b) in stable_set.iter().zip(&fit.coefficients) {
            coefficients[j] = b;
        }
        (fit.intercept, fit.converged)
    };
    Ok(MetaModel::new(
        MetaKind::StabilitySelection,
        Some(intercept),
        coefficients,
        Diagnostics::Stability(StabilityDiagnostics {
            pi_hat,
            q,
            pairs,
            pi_thr: thr.cutoff,
            pi_thr_reported: thr.reported,
            pfer_max,
            pfer_bound: thr.bound,
            stable_set,
            exhausted_subsamples,
            refit_converged,
        }),
    ))
}
