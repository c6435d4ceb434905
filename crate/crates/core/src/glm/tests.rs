use rand::Rng;

use super::solver::{LogisticProblem, SolverOptions};
use super::*;
use crate::numerics::{sigmoid, standard_normal, RngStream};

fn random_instance(seed: u64, n: usize, p: usize) -> (DenseMatrix<f64>, Vec<f64>) {
    let mut rng = RngStream::new(seed);
    let data: Vec<f64> = standard_normal(&mut rng, n * p);
    let x = DenseMatrix::new(n, p, data).unwrap();
    let beta: Vec<f64> = (0..p).map(|j| if j % 2 == 0 { 0.8 } else { -0.5 }).collect();
    let y = (0..n)
        .map(|i| {
            let eta: f64 = x.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum();
            if rng.random::<f64>() < sigmoid(eta) { 1.0 } else { 0.0 }
        })
        .collect();
    (x, y)
}

/// Gradient of the smooth part (loss plus ridge term) at original scale.
fn smooth_gradient(x: &DenseMatrix<f64>, y: &[f64], spec: &PenaltySpec<f64>, fit: &GlmFit<f64>) -> Vec<f64> {
    let n = y.len() as f64;
    let p = predict_proba(fit, x).unwrap();
    (0..x.cols())
        .map(|j| {
            let w = spec.feature_weights.as_ref().map_or(1.0, |w| w[j]);
            let g: f64 = (0..x.rows()).map(|i| x.get(i, j) * (p[i] - y[i])).sum::<f64>() / n;
            g + spec.lambda * (1.0 - spec.alpha) * w * fit.coefficients[j]
        })
        .collect()
}

fn kkt_violation(x: &DenseMatrix<f64>, y: &[f64], spec: &PenaltySpec<f64>, fit: &GlmFit<f64>) -> f64 {
    let g = smooth_gradient(x, y, spec, fit);
    let mut worst: f64 = 0.0;
    for (j, (&gj, &b)) in g.iter().zip(&fit.coefficients).enumerate() {
        let l1 = spec.lambda * spec.alpha * spec.feature_weights.as_ref().map_or(1.0, |w| w[j]);
        let v = if b > 0.0 {
            (gj + l1).abs()
        } else if b < 0.0 {
            (gj - l1).abs()
        } else if spec.nonnegative {
            (-(gj + l1)).max(0.0)
        } else {
            (gj.abs() - l1).max(0.0)
        };
        worst = worst.max(v);
    }
    let n = y.len() as f64;
    let p = predict_proba(fit, x).unwrap();
    let g0: f64 = p.iter().zip(y).map(|(a, b)| a - b).sum::<f64>() / n;
    worst.max(g0.abs())
}

#[test]
fn null_model_at_lambda_max() {
    let (x, y) = random_instance(1, 60, 5);
    let spec = PenaltySpec::new(0.0, 1.0);
    let path = lambda_path(&x, &y, &spec).unwrap();
    let fit = fit_penalized_logistic(&x, &y, &spec.with_lambda(path.lambda_max())).unwrap();
    assert!(fit.coefficients.iter().all(|&b| b == 0.0));
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    assert!((fit.intercept - (ybar / (1.0 - ybar)).ln()).abs() < 1e-8);
    assert!(fit.converged);
}

#[test]
fn nonnegative_lasso_null_at_lambda_max() {
    let (x, y) = random_instance(2, 80, 6);
    let spec = PenaltySpec::new(0.0, 1.0).nonnegative(true);
    let path = lambda_path(&x, &y, &spec).unwrap();
    let fit = fit_penalized_logistic(&x, &y, &spec.with_lambda(path.lambda_max())).unwrap();
    assert!(fit.active_set().is_empty());
    let below = fit_penalized_logistic(&x, &y, &spec.with_lambda(path.lambda_max() * 0.9)).unwrap();
    assert!(!below.active_set().is_empty());
}

#[test]
fn path_shape() {
    let (x, y) = random_instance(3, 50, 4);
    for alpha in [0.0, 0.5, 1.0] {
        let path = lambda_path(&x, &y, &PenaltySpec::new(0.0, alpha)).unwrap();
        let v = path.values();
        assert_eq!(v.len(), 100);
        assert!(v.windows(2).all(|w| w[1] < w[0]));
        assert!(((v[99] / v[0]) - 1e-4).abs() <= 1e-12 * 1e-4);
    }
}

#[test]
fn ridge_anchor_uses_alpha_floor() {
    let (x, y) = random_instance(4, 50, 3);
    let lasso = lambda_path(&x, &y, &PenaltySpec::new(0.0, 1.0)).unwrap();
    let ridge = lambda_path(&x, &y, &PenaltySpec::new(0.0, 0.0)).unwrap();
    assert!((ridge.lambda_max() / lasso.lambda_max() - 1e3).abs() < 1e-6);
}

#[test]
fn null_path_when_all_scores_negative() {
    let y = vec![1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
    let col: Vec<f64> = y.iter().map(|v| 1.0 - v).collect();
    let x = DenseMatrix::from_columns(&[col.clone(), col.iter().map(|v| v * 0.5).collect()]).unwrap();
    let spec = PenaltySpec::new(0.0, 1.0).nonnegative(true);
    assert!(matches!(lambda_path(&x, &y, &spec), Err(Error::NullPath)));
    assert!(lambda_path(&x, &y, &spec.clone().nonnegative(false)).is_ok());
}

#[test]
fn complete_separation_is_flagged() {
    let y: Vec<f64> = (0..20).map(|i| (i % 2) as f64).collect();
    let x = DenseMatrix::new(20, 1, y.iter().map(|v| 2.0 * v - 1.0).collect()).unwrap();
    let fit = fit_penalized_logistic(&x, &y, &PenaltySpec::new(0.0, 1.0)).unwrap();
    assert!(!fit.converged);
    assert!(fit.coefficients[0] > 5.0);
    assert!(matches!(fit.ensure_converged(), Err(Error::DidNotConverge { .. })));
}

#[test]
fn kkt_holds_on_random_instances() {
    for seed in 0..12 {
        let (x, y) = random_instance(100 + seed, 50, 8);
        for &alpha in &[0.0, 0.5, 1.0] {
            for &lambda in &[0.01, 0.1] {
                for nonneg in [true, false] {
                    let spec = PenaltySpec::new(lambda, alpha).nonnegative(nonneg);
                    let fit = fit_penalized_logistic(&x, &y, &spec).unwrap();
                    assert!(fit.converged);
                    if nonneg {
                        assert!(fit.coefficients.iter().all(|&b| b >= 0.0));
                    }
                    let v = kkt_violation(&x, &y, &spec, &fit);
                    assert!(v <= 1e-4, "seed {seed} alpha {alpha} lambda {lambda}: {v}");
                }
            }
        }
    }
}

#[test]
fn weighted_penalty_kkt_and_exclusion() {
    let (x, y) = random_instance(7, 70, 5);
    let weights = vec![0.5, f64::INFINITY, 2.0, 1.0, f64::INFINITY];
    let spec = PenaltySpec::new(0.02, 1.0).nonnegative(true).weights(weights);
    let fit = fit_penalized_logistic(&x, &y, &spec).unwrap();
    assert_eq!(fit.coefficients[1], 0.0);
    assert_eq!(fit.coefficients[4], 0.0);
    let mut finite_spec = spec.clone();
    finite_spec.feature_weights = Some(vec![0.5, 1e300, 2.0, 1.0, 1e300]);
    assert!(kkt_violation(&x, &y, &finite_spec, &fit) <= 1e-4);
}

#[test]
fn objective_monotone_per_iteration() {
    for seed in 0..10 {
        let (x, y) = random_instance(200 + seed, 40, 6);
        for alpha in [0.0, 0.5, 1.0] {
            let spec = PenaltySpec::new(0.005, alpha).nonnegative(seed % 2 == 0);
            let prob = LogisticProblem::new(x.columns(), &y, &spec);
            let out = prob.fit(spec.lambda, prob.null_state(), &SolverOptions::default());
            for w in out.objective_trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15, "{} -> {}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn warm_path_matches_cold_fits() {
    let (x, y) = random_instance(11, 60, 6);
    for nonneg in [true, false] {
        let spec = PenaltySpec::new(0.0, 0.5).nonnegative(nonneg);
        let path = lambda_path(&x, &y, &spec).unwrap();
        let lambdas: Vec<f64> = path.values().iter().step_by(9).copied().collect();
        let warm = fit_path(&x, &y, &spec, &lambdas).unwrap();
        for (lam, wf) in lambdas.iter().zip(&warm) {
            let cold = fit_penalized_logistic(&x, &y, &spec.with_lambda(*lam)).unwrap();
            for (a, b) in cold.coefficients.iter().zip(&wf.coefficients) {
                assert!((a - b).abs() < 1e-6, "lambda {lam}: {a} vs {b}");
            }
            assert!((cold.intercept - wf.intercept).abs() < 1e-6);
        }
    }
}

#[test]
fn standardized_fit_reports_original_scale() {
    let (x0, y) = random_instance(12, 80, 3);
    let scaled: Vec<f64> = (0..x0.rows())
        .flat_map(|i| {
            let r = x0.row(i);
            vec![r[0] * 10.0 + 3.0, r[1] * 0.1, r[2] - 5.0]
        })
        .collect();
    let x = DenseMatrix::new(80, 3, scaled).unwrap();
    let spec = PenaltySpec::new(0.01, 0.0).standardize(true);
    let a = fit_penalized_logistic(&x0, &y, &spec).unwrap();
    let b = fit_penalized_logistic(&x, &y, &spec).unwrap();
    let pa = predict_proba(&a, &x0).unwrap();
    let pb = predict_proba(&b, &x).unwrap();
    for (u, v) in pa.iter().zip(&pb) {
        assert!((u - v).abs() < 1e-6);
    }
}

#[test]
fn predict_proba_basics() {
    let fit = GlmFit::intercept_only(0.0, 2);
    let x = DenseMatrix::new(3, 2, vec![1.0, 2.0, -1.0, 0.5, 3.0, 3.0]).unwrap();
    assert_eq!(predict_proba(&fit, &x).unwrap(), vec![0.5; 3]);
    let fit = GlmFit { intercept: 0.3, coefficients: vec![1.7], ..GlmFit::intercept_only(0.0, 1) };
    let one = DenseMatrix::new(1, 1, vec![-0.4]).unwrap();
    let p = predict_proba(&fit, &one).unwrap()[0];
    assert!((p - 1.0 / (1.0 + (-(0.3 - 0.68f64)).exp())).abs() < 1e-15);
    assert!(matches!(predict_proba(&fit, &x), Err(Error::DimensionMismatch(_))));
}

#[test]
fn predictions_monotone_in_positive_feature() {
    let (x, y) = random_instance(13, 80, 4);
    let fit = fit_penalized_logistic(&x, &y, &PenaltySpec::new(0.01, 0.5).nonnegative(true)).unwrap();
    for j in fit.active_set() {
        let base = DenseMatrix::new(1, 4, vec![0.1, -0.2, 0.3, 0.0]).unwrap();
        let mut bumped = base.clone();
        bumped.set(0, j, base.get(0, j) + 1e-3);
        let p0 = predict_proba(&fit, &base).unwrap()[0];
        let p1 = predict_proba(&fit, &bumped).unwrap()[0];
        assert!(p1 > p0);
    }
}

#[test]
fn deviance_values() {
    let d = binomial_deviance(&[1.0, 0.0], &[0.5, 0.5]);
    assert!((d - 4.0 * 2f64.ln()).abs() < 1e-12);
    assert!(binomial_deviance(&[1.0, 0.0], &[1.0, 0.0]) < 1e-10);
    let (x, y) = random_instance(14, 30, 3);
    let beta = [0.2, -0.4, 0.1];
    let fit = GlmFit { intercept: 0.05, coefficients: beta.to_vec(), ..GlmFit::intercept_only(0.0, 3) };
    let p = predict_proba(&fit, &x).unwrap();
    let direct = 2.0 * 30.0 * logistic_loss(&x, &y, 0.05, &beta);
    assert!((binomial_deviance(&y, &p) - direct).abs() < 1e-10);
}

#[test]
fn unpenalized_intercept_only() {
    let x = DenseMatrix::new(4, 0, vec![]).unwrap();
    let y = [1.0, 1.0, 1.0, 0.0];
    let fit = fit_unpenalized_logistic(&x, &y, false).unwrap();
    assert!((fit.intercept - 3f64.ln()).abs() < 1e-6);
    assert!(fit.converged);
    let fit = fit_unpenalized_logistic(&x, &y, true).unwrap();
    assert!((fit.intercept - 3f64.ln()).abs() < 1e-6);
}

#[test]
fn unpenalized_noise_coefficients_small() {
    let n = 1000;
    let mut rng = RngStream::new(15);
    let x = DenseMatrix::new(n, 3, standard_normal(&mut rng, n * 3)).unwrap();
    let y: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let fit = fit_unpenalized_logistic(&x, &y, false).unwrap();
    assert!(fit.converged);
    assert!(fit.coefficients.iter().all(|b| b.abs() < 0.5));
}

#[test]
fn unpenalized_matches_zero_gradient() {
    let (x, y) = random_instance(16, 200, 3);
    let fit = fit_unpenalized_logistic(&x, &y, false).unwrap();
    let spec = PenaltySpec::new(0.0, 0.0);
    assert!(kkt_violation(&x, &y, &spec, &fit) < 1e-6);
}

#[test]
fn unpenalized_separation_capped() {
    let y: Vec<f64> = (0..30).map(|i| (i % 2) as f64).collect();
    let x = DenseMatrix::new(30, 1, y.iter().map(|v| v - 0.5).collect()).unwrap();
    for nonneg in [false, true] {
        let fit = fit_unpenalized_logistic(&x, &y, nonneg).unwrap();
        assert!(!fit.converged, "nonneg {nonneg}");
    }
    let wide = DenseMatrix::new(2, 3, vec![0.0; 6]).unwrap();
    assert!(matches!(fit_unpenalized_logistic(&wide, &[0.0, 1.0], false), Err(Error::DimensionMismatch(_))));
}

#[test]
fn cv_tune_deterministic_and_finds_signal() {
    let n = 300;
    let mut rng = RngStream::new(17);
    let x = DenseMatrix::new(n, 5, standard_normal(&mut rng, n * 5)).unwrap();
    let y: Vec<f64> = (0..n)
        .map(|i| if rng.random::<f64>() < sigmoid(3.0 * x.get(i, 2)) { 1.0 } else { 0.0 })
        .collect();
    let spec = PenaltySpec::new(0.0, 1.0).nonnegative(true);
    let a = cv_tune(&x, &y, &spec, 10, &mut RngStream::new(5), CvLoss::Deviance).unwrap();
    let b = cv_tune(&x, &y, &spec, 10, &mut RngStream::new(5), CvLoss::Deviance).unwrap();
    assert_eq!(a.best_lambda, b.best_lambda);
    assert!(a.fit.coefficients[2] > 0.0);
    assert_eq!(a.mean_loss.len(), 100);
    let min = a.mean_loss.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(a.mean_loss[a.best_index], min);
    let mis = cv_tune(&x, &y, &spec, 5, &mut RngStream::new(5), CvLoss::Misclassification).unwrap();
    assert!(mis.mean_loss.iter().all(|&l| (0.0..=1.0).contains(&l)));
}

#[test]
fn cv_tie_breaks_toward_larger_lambda() {
    assert_eq!(cv::argmin_first(&[3.0, 1.0, 1.0, 2.0]), 1);
}

#[test]
fn works_in_single_precision() {
    let (x, y) = random_instance(18, 60, 3);
    let x32 = DenseMatrix::new(60, 3, x.as_slice().iter().map(|&v| v as f32).collect()).unwrap();
    let y32: Vec<f32> = y.iter().map(|&v| v as f32).collect();
    let f64fit = fit_penalized_logistic(&x, &y, &PenaltySpec::new(0.05, 0.5)).unwrap();
    let f32fit = fit_penalized_logistic(&x32, &y32, &PenaltySpec::new(0.05f32, 0.5)).unwrap();
    for (a, b) in f64fit.coefficients.iter().zip(&f32fit.coefficients) {
        assert!((a - *b as f64).abs() < 1e-3);
    }
}

#[test]
fn rejects_bad_inputs() {
    let x = DenseMatrix::new(2, 1, vec![1.0, 2.0]).unwrap();
    assert!(matches!(
        fit_penalized_logistic(&x, &[1.0], &PenaltySpec::new(0.1, 1.0)),
        Err(Error::DimensionMismatch(_))
    ));
    assert!(fit_penalized_logistic(&x, &[1.0, 0.0], &PenaltySpec::new(0.1, 1.5)).is_err());
}
