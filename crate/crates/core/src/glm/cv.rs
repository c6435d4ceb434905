use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{make_folds, FoldAssignment};
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, RngStream};
use crate::scalar::Scalar;

use super::solver::LogisticProblem;
use super::{
    binomial_deviance, lambda_path_for, path_on_problem, predict_proba, problem, GlmFit,
    LambdaPath, PenaltySpec,
};

/// Held-out loss used to pick λ.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvLoss {
    #[default]
    Deviance,
    Misclassification,
}

#[derive(Clone, Debug)]
pub struct CvTuneResult<T> {
    pub path: LambdaPath<T>,
    /// Mean held-out loss per path value.
    pub mean_loss: Vec<T>,
    pub best_index: usize,
    pub best_lambda: T,
    /// Full-data fit at `best_lambda`.
    pub fit: GlmFit<T>,
}

/// Mean held-out loss per λ, pooling all held-out observations.
pub fn cv_path_losses<T: Scalar>(
    x: &DenseMatrix<T>,
    y: &[T],
    spec: &PenaltySpec<T>,
    lambdas: &[T],
    folds: &FoldAssignment,
    loss: CvLoss,
) -> Result<Vec<T>> {
    if folds.n() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "fold assignment for {} samples, data has {}",
            folds.n(),
            y.len()
        )));
    }
    let per_fold: Vec<Result<Vec<T>>> = (0..folds.k())
        .into_par_iter()
        .map(|f| {
            let train = folds.train_indices(f);
            let test = folds.test_indices(f);
            let xtr = x.select_rows(&train);
            let ytr: Vec<T> = train.iter().map(|&i| y[i]).collect();
            let xte = x.select_rows(&test);
            let yte: Vec<T> = test.iter().map(|&i| y[i]).collect();
            let prob = problem(&xtr, &ytr, spec)?;
            let fits = path_on_problem(&prob, lambdas, |_| false);
            fits.iter()
                .map(|fit| {
                    let p = predict_proba(fit, &xte)?;
                    Ok(fold_loss(&yte, &p, loss))
                })
                .collect()
        })
        .collect();
    let mut total = vec![T::zero(); lambdas.len()];
    for fold in per_fold {
        for (t, l) in total.iter_mut().zip(fold?) {
            *t = *t + l;
        }
    }
    let n = T::from_usize_lossy(y.len());
    Ok(total.into_iter().map(|t| t / n).collect())
}

fn fold_loss<T: Scalar>(y: &[T], p: &[T], loss: CvLoss) -> T {
    match loss {
        CvLoss::Deviance => binomial_deviance(y, p),
        CvLoss::Misclassification => {
            let half = T::lit(0.5);
            T::from_usize_lossy(
                y.iter().zip(p).filter(|(&yi, &pi)| (pi >= half) != (yi == T::one())).count(),
            )
        }
    }
}

/// Index of the smallest loss; ties go to the earliest (largest) λ.
pub(crate) fn argmin_first<T: Scalar>(losses: &[T]) -> usize {
    let mut best = 0;
    for (i, &l) in losses.iter().enumerate() {
        if l < losses[best] {
            best = i;
        }
    }
    best
}

/// K-fold cross-validated choice of λ on the data's own path, followed by a
/// full-data fit at the chosen value. Folds are stratified by label.
pub fn cv_tune<T: Scalar>(
    x: &DenseMatrix<T>,
    y: &[T],
    spec: &PenaltySpec<T>,
    k: usize,
    rng: &mut RngStream,
    loss: CvLoss,
) -> Result<CvTuneResult<T>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    let prob: LogisticProblem<T> = problem(x, y, spec)?;
    let path = lambda_path_for(&prob)?;
    let labels: Vec<f64> = y.iter().map(|v| v.to_f64_lossy()).collect();
    let folds = make_folds(y.len(), k, rng, Some(&labels))?;
    let mean_loss = cv_path_losses(x, y, spec, path.values(), &folds, loss)?;
    let best_index = argmin_first(&mean_loss);
    let fits = path_on_problem(&prob, &path.values()[..=best_index], |_| false);
    let fit = fits.into_iter().last().expect("path has at least one value");
    Ok(CvTuneResult { best_lambda: path.values()[best_index], path, mean_loss, best_index, fit })
}
