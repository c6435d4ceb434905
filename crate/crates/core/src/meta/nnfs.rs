use crate::error::Result;
use crate::glm::{binomial_deviance, fit_unpenalized_logistic, GlmFit};
use crate::numerics::DenseMatrix;

use super::{check_meta_input, null_intercept, Diagnostics, MetaKind, MetaModel};

fn aic(fit: &GlmFit<f64>, k: usize) -> f64 {
    2.0 * k as f64 + fit.deviance
}

/// Forward selection by AIC with unpenalized logistic fits. A candidate
/// whose fit has a negative coefficient is skipped for the current round.
pub fn fit_nnfs(z: &DenseMatrix<f64>, y: &[f64]) -> Result<MetaModel> {
    check_meta_input(z, y)?;
    let (n, v) = (z.rows(), z.cols());
    let b0 = null_intercept(y);
    let p0 = vec![crate::numerics::sigmoid(b0); n];
    let mut current_aic = 2.0 + binomial_deviance(y, &p0);
    let mut current = GlmFit::intercept_only(b0, 0);
    let mut included: Vec<usize> = Vec::new();
    let mut aic_trace = vec![current_aic];
    let mut rejected_negative = Vec::new();
    let mut separation_encountered = false;

    while included.len() < v && included.len() + 1 <= n {
        let mut scored = Vec::new();
        for j in (0..v).filter(|j| !included.contains(j)) {
            let mut cols = included.clone();
            cols.push(j);
            let fit = fit_unpenalized_logistic(&z.select_columns(&cols), y, false)?;
            if !fit.converged {
                separation_encountered = true;
            }
            scored.push((aic(&fit, cols.len() + 1), j, fit));
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut accepted = false;
        for (cand_aic, j, fit) in scored {
            if !(cand_aic < current_aic) {
                break;
            }
            if fit.coefficients.iter().any(|&b| b < 0.0) {
                rejected_negative.push(j);
                continue;
            }
            included.push(j);
            current = fit;
            current_aic = cand_aic;
            aic_trace.push(cand_aic);
            accepted = true;
            break;
        }
        if !accepted {
            break;
        }
    }

    let mut coefficients = vec![0.0; v];
    for (&j, &b) in included.iter().zip(&current.coefficients) {
        coefficients[j] = b;
    }
    Ok(MetaModel::new(
        MetaKind::Nnfs,
        Some(current.intercept),
        coefficients,
        Diagnostics::ForwardSelection {
            aic_trace,
            order: included,
            rejected_negative,
            separation_encountered,
        },
    ))
}
