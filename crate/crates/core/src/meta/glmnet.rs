use crate::dataset::make_folds;
use crate::error::{Error, Result};
use crate::glm::{
    argmin_first, cv_path_losses, cv_tune, lambda_path_for, path_on_problem, problem,
    PenaltySpec,
};
use crate::numerics::{DenseMatrix, RngStream};

use super::{check_meta_input, null_intercept, Diagnostics, MetaConfig, MetaKind, MetaModel};

fn meta_spec(alpha: f64) -> PenaltySpec<f64> {
    PenaltySpec::new(0.0, alpha).nonnegative(true).standardize(false).intercept(true)
}

fn kind_for_alpha(alpha: f64) -> MetaKind {
    if alpha == 0.0 {
        MetaKind::NnRidge
    } else if alpha == 1.0 {
        MetaKind::NnLasso
    } else {
        MetaKind::NnEnet
    }
}

/// Nonnegative elastic net meta-learner with λ chosen by cross-validation.
/// `alpha` 0 gives ridge, 1 gives lasso.
pub fn fit_nonneg_glmnet_meta(
    z: &DenseMatrix<f64>,
    y: &[f64],
    alpha: f64,
    cfg: &MetaConfig,
    rng: &mut RngStream,
) -> Result<MetaModel> {
    check_meta_input(z, y)?;
    let kind = kind_for_alpha(alpha);
    match cv_tune(z, y, &meta_spec(alpha), cfg.cv_folds, rng, cfg.cv_loss) {
        Ok(res) => Ok(MetaModel::new(
            kind,
            Some(res.fit.intercept),
            res.fit.coefficients.clone(),
            Diagnostics::Penalized {
                lambda: Some(res.best_lambda),
                alpha,
                cv_loss: Some(res.mean_loss[res.best_index]),
                null_path: false,
                converged: res.fit.converged,
            },
        )),
        Err(Error::NullPath) => Ok(MetaModel::new(
            kind,
            Some(null_intercept(y)),
            vec![0.0; z.cols()],
            Diagnostics::Penalized { lambda: None, alpha, cv_loss: None, null_path: true, converged: true },
        )),
        Err(e) => Err(e),
    }
}

/// Adaptive lasso penalty weights `1/β̂^γ`; zero initial coefficients get an
/// infinite weight.
pub(crate) fn adaptive_weights(initial: &[f64], gamma: f64) -> Vec<f64> {
    initial
        .iter()
        .map(|&b| if b > 0.0 { b.powf(-gamma) } else { f64::INFINITY })
        .collect()
}

/// Two-stage nonnegative adaptive lasso. A cross-validated nonnegative ridge
/// gives the initial coefficients; λ and γ are then tuned jointly on one
/// shared fold assignment.
pub fn fit_nonneg_adaptive_lasso(
    z: &DenseMatrix<f64>,
    y: &[f64],
    cfg: &MetaConfig,
    rng: &mut RngStream,
) -> Result<MetaModel> {
    check_meta_input(z, y)?;
    if cfg.gamma_grid.is_empty() || cfg.gamma_grid.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::InvalidConfig("gamma grid must hold positive values".into()));
    }
    let v = z.cols();
    let mut stage1_rng = rng.substream(1);
    let initial = match cv_tune(z, y, &meta_spec(0.0), cfg.cv_folds, &mut stage1_rng, cfg.cv_loss) {
        Ok(res) => res.fit.coefficients,
        Err(Error::NullPath) => vec![0.0; v],
        Err(e) => return Err(e),
    };
    let excluded: Vec<usize> = (0..v).filter(|&j| !(initial[j] > 0.0)).collect();
    let null_model = |initial: Vec<f64>, excluded: Vec<usize>| {
        MetaModel::new(
            MetaKind::NnAdaptiveLasso,
            Some(null_intercept(y)),
            vec![0.0; v],
            Diagnostics::AdaptiveLasso {
                gamma: None,
                lambda: None,
                cv_loss: None,
                initial_coefficients: initial,
                all_views_excluded: excluded.len() == v,
                excluded,
                converged: true,
            },
        )
    };
    if excluded.len() == v {
        return Ok(null_model(initial, excluded));
    }

    let mut gammas = cfg.gamma_grid.clone();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    let folds = make_folds(y.len(), cfg.cv_folds, &mut rng.substream(2), Some(y))?;

    // (loss, γ, penalty spec, path) of the best candidate so far.
    let mut best: Option<(f64, f64, usize, PenaltySpec<f64>, Vec<f64>)> = None;
    for &gamma in &gammas {
        let spec = meta_spec(1.0).weights(adaptive_weights(&initial, gamma));
        let prob = problem(z, y, &spec)?;
        let path = match lambda_path_for(&prob) {
            Ok(p) => p,
            Err(Error::NullPath) => continue,
            Err(e) => return Err(e),
        };
        let losses = cv_path_losses(z, y, &spec, path.values(), &folds, cfg.cv_loss)?;
        let idx = argmin_first(&losses);
        if best.as_ref().is_none_or(|b| losses[idx] < b.0) {
            best = Some((losses[idx], gamma, idx, spec, path.values().to_vec()));
        }
    }
    let Some((loss, gamma, idx, spec, path)) = best else {
        return Ok(null_model(initial, excluded));
    };
    let prob = problem(z, y, &spec)?;
    let fit = path_on_problem(&prob, &path[..=idx], |_| false)
        .pop()
        .expect("nonempty path prefix");
    Ok(MetaModel::new(
        MetaKind::NnAdaptiveLasso,
        Some(fit.intercept),
        fit.coefficients,
        Diagnostics::AdaptiveLasso {
            gamma: Some(gamma),
            lambda: Some(path[idx]),
            cv_loss: Some(loss),
            initial_coefficients: initial,
            excluded,
            all_views_excluded: false,
            converged: fit.converged,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta::test_support::signal_z;

    #[test]
    fn weights_follow_definition() {
        let w = adaptive_weights(&[0.5, 0.0, 0.2], 1.0);
        assert_eq!(w[0], 2.0);
        assert!(w[1].is_infinite());
        assert!((w[2] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn constant_columns_give_null_model() {
        let z = DenseMatrix::new(20, 3, vec![0.5; 60]).unwrap();
        let y: Vec<f64> = (0..20).map(|i| (i % 2) as f64).collect();
        for alpha in [0.0, 0.5, 1.0] {
            let m = fit_nonneg_glmnet_meta(&z, &y, alpha, &MetaConfig::default(), &mut RngStream::new(4)).unwrap();
            assert!(m.selected.is_empty());
            assert!(m.intercept.unwrap().abs() < 1e-9);
        }
        let m = fit_nonneg_adaptive_lasso(&z, &y, &MetaConfig::default(), &mut RngStream::new(4)).unwrap();
        assert!(m.selected.is_empty());
        assert!(matches!(m.diagnostics, Diagnostics::AdaptiveLasso { all_views_excluded: true, .. }));
    }

    #[test]
    fn lasso_picks_the_signal_column() {
        let mut hits = 0;
        for seed in 0..20 {
            let (z, y) = signal_z(seed, 100, 8, &[2], 0.8);
            let m = fit_nonneg_glmnet_meta(&z, &y, 1.0, &MetaConfig::default(), &mut RngStream::new(seed)).unwrap();
            assert_eq!(m.kind, MetaKind::NnLasso);
            if m.selected.contains(&2) && m.selected.len() <= 3 {
                hits += 1;
            }
        }
        assert!(hits >= 19, "{hits}");
    }

    #[test]
    fn adaptive_support_within_ridge_support() {
        for seed in 0..10 {
            let (z, y) = signal_z(100 + seed, 80, 6, &[0, 3], 0.5);
            let m = fit_nonneg_adaptive_lasso(&z, &y, &MetaConfig::default(), &mut RngStream::new(seed)).unwrap();
            let Diagnostics::AdaptiveLasso { initial_coefficients, excluded, .. } = &m.diagnostics else {
                unreachable!()
            };
            for &s in &m.selected {
                assert!(initial_coefficients[s] > 0.0);
                assert!(!excluded.contains(&s));
            }
            assert!(m.coefficients.iter().all(|&c| c >= 0.0));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (z, y) = signal_z(9, 80, 5, &[1], 0.5);
        let a = fit_nonneg_adaptive_lasso(&z, &y, &MetaConfig::default(), &mut RngStream::new(3)).unwrap();
        let b = fit_nonneg_adaptive_lasso(&z, &y, &MetaConfig::default(), &mut RngStream::new(3)).unwrap();
        assert_eq!(a, b);
    }
}
