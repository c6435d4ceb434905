//! Multi-view stacking: per-view base learners, the cross-validated
//! prediction matrix, the meta-learner and the assembled classifier.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{make_folds, FoldAssignment, MultiViewDataset, Standardization};
use crate::error::{Error, Result, ResultExt};
use crate::glm::{cv_tune, fit_penalized_logistic, predict_proba, CvLoss, GlmFit, PenaltySpec};
use crate::meta::{fit_meta, MetaConfig, MetaKind, MetaModel, MetaModelDocument};
use crate::numerics::{DenseMatrix, RngStream};

/// Current version of the serialized classifier.
pub const SCHEMA_VERSION: u32 = 1;

/// How the base learner's λ is chosen.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseTuning {
    /// Re-tuned by inner cross-validation inside every training fold.
    #[default]
    Nested,
    /// Tuned once per view on the full data and reused in every fold.
    FullData,
    /// Fixed λ per view.
    Fixed(Vec<f64>),
}

impl BaseTuning {
    pub fn name(&self) -> &'static str {
        match self {
            BaseTuning::Nested => "nested",
            BaseTuning::FullData => "full_data",
            BaseTuning::Fixed(_) => "fixed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackingConfig {
    /// Folds used to build the prediction matrix.
    pub folds: usize,
    /// Folds used to tune each base learner.
    pub inner_folds: usize,
    pub base_tuning: BaseTuning,
    pub cv_loss: CvLoss,
}

impl Default for StackingConfig {
    fn default() -> Self {
        Self { folds: 10, inner_folds: 10, base_tuning: BaseTuning::Nested, cv_loss: CvLoss::Deviance }
    }
}

/// Out-of-fold base predictions, one column per view.
#[derive(Clone, Debug, PartialEq)]
pub struct CvPredictionMatrix {
    pub z: DenseMatrix<f64>,
    pub folds: FoldAssignment,
    /// λ used for view `v` in fold `k`, as `base_lambdas[v][k]`.
    pub base_lambdas: Vec<Vec<f64>>,
}

/// Logistic ridge base learner: α = 0, standardized inputs, intercept.
fn base_spec() -> PenaltySpec<f64> {
    PenaltySpec::new(0.0, 0.0).standardize(true)
}

fn intercept_only(y: &[f64], p: usize) -> GlmFit<f64> {
    GlmFit::intercept_only(crate::meta::null_intercept(y), p)
}

/// Fits one base learner, tuning λ by cross-validation unless `lambda` is
/// given. Returns the fit and the λ used (NaN for an intercept-only model).
fn fit_base(
    x: &DenseMatrix<f64>,
    y: &[f64],
    lambda: Option<f64>,
    cfg: &StackingConfig,
    rng: &mut RngStream,
) -> Result<(GlmFit<f64>, f64)> {
    if let Some(lam) = lambda {
        if lam.is_nan() {
            return Ok((intercept_only(y, x.cols()), f64::NAN));
        }
        return Ok((fit_penalized_logistic(x, y, &base_spec().with_lambda(lam))?, lam));
    }
    match cv_tune(x, y, &base_spec(), cfg.inner_folds, rng, cfg.cv_loss) {
        Ok(res) => Ok((res.fit, res.best_lambda)),
        Err(Error::NullPath) => Ok((intercept_only(y, x.cols()), f64::NAN)),
        Err(e) => Err(e),
    }
}

/// Full-data base learner per view and the λ each used.
pub fn fit_base_models(
    d: &MultiViewDataset,
    cfg: &StackingConfig,
    rng: &RngStream,
) -> Result<Vec<(GlmFit<f64>, f64)>> {
    let y = d.labels()?;
    let fixed = fixed_lambdas(d, cfg)?;
    (0..d.n_views())
        .into_par_iter()
        .map(|v| {
            let mut r = rng.substream_path(&[2, v as u64]);
            fit_base(d.view(v), y, fixed.map(|l| l[v]), cfg, &mut r)
                .context_with(|| format!("base learner for view {}", d.view_names()[v]))
        })
        .collect()
}

fn fixed_lambdas<'a>(d: &MultiViewDataset, cfg: &'a StackingConfig) -> Result<Option<&'a [f64]>> {
    match &cfg.base_tuning {
        BaseTuning::Fixed(l) if l.len() != d.n_views() => Err(Error::InvalidConfig(format!(
            "{} fixed base lambdas for {} views",
            l.len(),
            d.n_views()
        ))),
        BaseTuning::Fixed(l) => Ok(Some(l)),
        _ => Ok(None),
    }
}

fn check_folds(cfg: &StackingConfig) -> Result<()> {
    if cfg.folds < 2 || cfg.inner_folds < 2 {
        return Err(Error::InvalidConfig("fold counts must be at least 2".into()));
    }
    Ok(())
}

/// Builds `Z` from a fold assignment. `full_lambdas` supplies per-view λ
/// when base tuning is not nested.
pub fn build_cv_predictions_with_folds(
    d: &MultiViewDataset,
    folds: FoldAssignment,
    cfg: &StackingConfig,
    full_lambdas: Option<&[f64]>,
    rng: &RngStream,
) -> Result<CvPredictionMatrix> {
    check_folds(cfg)?;
    let y = d.labels()?;
    if folds.n() != d.n_samples() {
        return Err(Error::DimensionMismatch(format!(
            "fold assignment for {} samples, data has {}",
            folds.n(),
            d.n_samples()
        )));
    }
    let lambdas = match (&cfg.base_tuning, full_lambdas) {
        (BaseTuning::Fixed(l), _) => Some(fixed_lambdas(d, cfg)?.unwrap_or(l)),
        (BaseTuning::FullData, Some(l)) => Some(l),
        (BaseTuning::FullData, None) => {
            return Err(Error::InvalidArgument("full-data tuning needs the full-data λ values".into()))
        }
        (BaseTuning::Nested, _) => None,
    };
    let (v_count, k) = (d.n_views(), folds.k());
    let tasks: Vec<(usize, usize)> = (0..v_count).flat_map(|v| (0..k).map(move |f| (v, f))).collect();
    let results: Vec<Result<(Vec<f64>, f64)>> = tasks
        .par_iter()
        .map(|&(v, f)| {
            let train = folds.train_indices(f);
            let test = folds.test_indices(f);
            let x = d.view(v);
            let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let mut r = rng.substream_path(&[1, v as u64, f as u64]);
            let (fit, lam) = fit_base(&x.select_rows(&train), &ytr, lambdas.map(|l| l[v]), cfg, &mut r)?;
            Ok((predict_proba(&fit, &x.select_rows(&test))?, lam))
        })
        .collect();
    let n = d.n_samples();
    let mut z = DenseMatrix::zeros(n, v_count);
    let mut base_lambdas = vec![vec![0.0; k]; v_count];
    for (&(v, f), r) in tasks.iter().zip(results) {
        let (pred, lam) =
            r.context_with(|| format!("view {} fold {}", d.view_names()[v], f + 1))?;
        for (&i, p) in folds.test_indices(f).iter().zip(pred) {
            z.set(i, v, p);
        }
        base_lambdas[v][f] = lam;
    }
    Ok(CvPredictionMatrix { z, folds, base_lambdas })
}

/// Builds `Z` with a stratified fold assignment shared by all views.
pub fn build_cv_predictions(d: &MultiViewDataset, cfg: &StackingConfig, rng: &RngStream) -> Result<CvPredictionMatrix> {
    check_folds(cfg)?;
    let folds = make_folds(d.n_samples(), cfg.folds, &mut rng.substream(0), Some(d.labels()?))?;
    let full = match cfg.base_tuning {
        BaseTuning::FullData => Some(fit_base_models(d, cfg, rng)?.into_iter().map(|(_, l)| l).collect::<Vec<_>>()),
        _ => None,
    };
    build_cv_predictions_with_folds(d, folds, cfg, full.as_deref(), rng)
}

/// Full-data base models together with the prediction matrix they share.
#[derive(Clone, Debug)]
pub struct BaseLayer {
    pub base_models: Vec<GlmFit<f64>>,
    pub base_lambdas: Vec<f64>,
    pub cv: CvPredictionMatrix,
    pub view_names: Vec<String>,
    pub view_sizes: Vec<usize>,
    pub base_tuning: BaseTuning,
}

/// Steps one to three: full-data base learners and the prediction matrix.
pub fn fit_base_layer(d: &MultiViewDataset, cfg: &StackingConfig, rng: &RngStream) -> Result<BaseLayer> {
    check_folds(cfg)?;
    let y = d.labels()?;
    let base = fit_base_models(d, cfg, rng)?;
    let lambdas: Vec<f64> = base.iter().map(|(_, l)| *l).collect();
    let folds = make_folds(d.n_samples(), cfg.folds, &mut rng.substream(0), Some(y))?;
    let cv = build_cv_predictions_with_folds(d, folds, cfg, Some(&lambdas), rng)?;
    Ok(BaseLayer {
        base_models: base.into_iter().map(|(f, _)| f).collect(),
        base_lambdas: lambdas,
        cv,
        view_names: d.view_names().to_vec(),
        view_sizes: d.view_sizes(),
        base_tuning: cfg.base_tuning.clone(),
    })
}

/// Stream used by meta-learner `kind` given the pipeline stream.
pub fn meta_stream(rng: &RngStream, kind: MetaKind) -> RngStream {
    let idx = MetaKind::ALL.iter().position(|&k| k == kind).unwrap_or(0);
    rng.substream_path(&[3, idx as u64])
}

impl BaseLayer {
    /// Steps four and five for one meta-learner.
    pub fn fit_meta(&self, y: &[f64], kind: MetaKind, cfg: &MetaConfig, rng: &RngStream) -> Result<StackedClassifier> {
        let meta = fit_meta(kind, &self.cv.z, y, cfg, &mut meta_stream(rng, kind))?;
        Ok(StackedClassifier {
            view_names: self.view_names.clone(),
            view_sizes: self.view_sizes.clone(),
            base_models: self.base_models.clone(),
            base_lambdas: self.base_lambdas.clone(),
            base_tuning: self.base_tuning.clone(),
            meta,
            preprocessing: None,
        })
    }
}

/// Pipeline settings for one stacked fit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MvsConfig {
    pub stacking: StackingConfig,
    pub meta: MetaConfig,
}

/// Fits the whole pipeline with meta-learner `kind`.
pub fn fit_mvs(d: &MultiViewDataset, kind: MetaKind, cfg: &MvsConfig, rng: &RngStream) -> Result<StackedClassifier> {
    fit_base_layer(d, &cfg.stacking, rng)?.fit_meta(d.labels()?, kind, &cfg.meta, rng)
}

/// Base learners per view plus the meta-learner combining them.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedClassifier {
    pub view_names: Vec<String>,
    pub view_sizes: Vec<usize>,
    pub base_models: Vec<GlmFit<f64>>,
    pub base_lambdas: Vec<f64>,
    pub base_tuning: BaseTuning,
    pub meta: MetaModel,
    /// Standardization applied to new data before the base learners.
    pub preprocessing: Option<Standardization>,
}

#[derive(Serialize, Deserialize)]
struct BaseModelDocument {
    view: String,
    lambda: Option<f64>,
    model: GlmFit<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifierDocument {
    schema_version: u32,
    base_tuning: BaseTuning,
    preprocessing: Option<Standardization>,
    base_models: Vec<BaseModelDocument>,
    meta: MetaModelDocument,
}

impl StackedClassifier {
    pub fn with_preprocessing(mut self, stats: Standardization) -> Self {
        self.preprocessing = Some(stats);
        self
    }

    /// Base predictions for `d`, one column per view.
    pub fn base_predictions(&self, d: &MultiViewDataset) -> Result<DenseMatrix<f64>> {
        if d.view_sizes() != self.view_sizes {
            return Err(Error::ViewStructureMismatch(format!(
                "classifier views have sizes {:?}, data has {:?}",
                self.view_sizes,
                d.view_sizes()
            )));
        }
        let prepared;
        let d = match &self.preprocessing {
            Some(s) => {
                prepared = s.apply(d)?;
                &prepared
            }
            None => d,
        };
        let cols = self
            .base_models
            .iter()
            .enumerate()
            .map(|(v, fit)| predict_proba(fit, d.view(v)))
            .collect::<Result<Vec<_>>>()?;
        if d.n_samples() == 0 {
            return Ok(DenseMatrix::zeros(0, cols.len()));
        }
        DenseMatrix::from_columns(&cols)
    }

    /// Stacked probability for each sample of `d`.
    pub fn predict(&self, d: &MultiViewDataset) -> Result<Vec<f64>> {
        let z = self.base_predictions(d)?;
        self.meta.predict_proba(&z)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ClassifierDocument {
            schema_version: SCHEMA_VERSION,
            base_tuning: self.base_tuning.clone(),
            preprocessing: self.preprocessing.clone(),
            base_models: self
                .view_names
                .iter()
                .zip(&self.base_models)
                .zip(&self.base_lambdas)
                .map(|((v, m), &l)| BaseModelDocument {
                    view: v.clone(),
                    lambda: (!l.is_nan()).then_some(l),
                    model: m.clone(),
                })
                .collect(),
            meta: self.meta.to_document(&self.view_names)?,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ClassifierDocument = serde_json::from_str(s)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaMismatch(format!(
                "classifier schema version {}, expected {SCHEMA_VERSION}",
                doc.schema_version
            )));
        }
        let view_names: Vec<String> = doc.base_models.iter().map(|b| b.view.clone()).collect();
        let view_sizes: Vec<usize> = doc.base_models.iter().map(|b| b.model.coefficients.len()).collect();
        if let Some(p) = &doc.preprocessing {
            if p.means.iter().map(Vec::len).collect::<Vec<_>>() != view_sizes {
                return Err(Error::ViewStructureMismatch("preprocessing does not match base models".into()));
            }
        }
        let meta = MetaModel::from_document(&doc.meta, &view_names)?;
        Ok(Self {
            view_names,
            view_sizes,
            base_lambdas: doc.base_models.iter().map(|b| b.lambda.unwrap_or(f64::NAN)).collect(),
            base_models: doc.base_models.into_iter().map(|b| b.model).collect(),
            base_tuning: doc.base_tuning,
            meta,
            preprocessing: doc.preprocessing,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta::Diagnostics;
    use crate::simulation::{generate_replication, SimulationConfig};

    fn small(seed: u64, n: usize) -> (MultiViewDataset, MultiViewDataset) {
        let cfg = SimulationConfig {
            weight_scale: 4.0,
            n_test: 40,
            n_signal_full: 1,
            n_signal_half: 1,
            ..SimulationConfig::new(3, 4, n, 0.5, 0.0)
        };
        let (train, test, _) = generate_replication(&cfg, &RngStream::new(seed)).unwrap();
        (train, test)
    }

    fn fixed(l: f64) -> StackingConfig {
        StackingConfig { base_tuning: BaseTuning::Fixed(vec![l; 3]), ..StackingConfig::default() }
    }

    #[test]
    fn z_shape_and_range() {
        let (d, _) = small(1, 60);
        let cv = build_cv_predictions(&d, &StackingConfig::default(), &RngStream::new(2)).unwrap();
        assert_eq!((cv.z.rows(), cv.z.cols()), (60, 3));
        assert!(cv.z.as_slice().iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert_eq!(cv.base_lambdas.len(), 3);
        assert!(cv.base_lambdas.iter().all(|l| l.len() == 10));
    }

    #[test]
    fn leave_one_out_matches_manual_fits() {
        let (d, _) = small(3, 14);
        let y = d.labels().unwrap();
        let folds = FoldAssignment::from_assignment(14, (0..14).collect()).unwrap();
        let cfg = fixed(0.05);
        let cv = build_cv_predictions_with_folds(&d, folds, &cfg, None, &RngStream::new(0)).unwrap();
        for v in 0..3 {
            for i in 0..14 {
                let rows: Vec<usize> = (0..14).filter(|&r| r != i).collect();
                let x = d.view(v);
                let ytr: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
                let fit = fit_penalized_logistic(&x.select_rows(&rows), &ytr, &base_spec().with_lambda(0.05)).unwrap();
                let p = predict_proba(&fit, &x.select_rows(&[i])).unwrap()[0];
                assert_eq!(cv.z.get(i, v), p);
            }
        }
    }

    #[test]
    fn row_permutation_permutes_z() {
        let (d, _) = small(4, 40);
        let cfg = fixed(0.02);
        let folds = make_folds(40, 5, &mut RngStream::new(9), Some(d.labels().unwrap())).unwrap();
        let perm: Vec<usize> = (0..40).map(|i| (i * 7 + 3) % 40).collect();
        let a = build_cv_predictions_with_folds(&d, folds.clone(), &cfg, None, &RngStream::new(1)).unwrap();
        let b = build_cv_predictions_with_folds(&d.select_rows(&perm), folds.permuted(&perm), &cfg, None, &RngStream::new(1))
            .unwrap();
        for (i, &src) in perm.iter().enumerate() {
            for v in 0..3 {
                assert!((b.z.get(i, v) - a.z.get(src, v)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn fit_is_deterministic_and_roundtrips() {
        let (d, test) = small(5, 50);
        let cfg = MvsConfig::default();
        let a = fit_mvs(&d, MetaKind::NnLasso, &cfg, &RngStream::new(11)).unwrap();
        let b = fit_mvs(&d, MetaKind::NnLasso, &cfg, &RngStream::new(11)).unwrap();
        let json = a.to_json().unwrap();
        assert_eq!(json, b.to_json().unwrap());
        let back = StackedClassifier::from_json(&json).unwrap();
        assert_eq!(back.to_json().unwrap(), json);
        assert_eq!(back.predict(&test).unwrap(), a.predict(&test).unwrap());
        assert!(a.meta.selected.iter().all(|&v| v < 3));
    }

    #[test]
    fn schema_version_checked() {
        let (d, _) = small(6, 40);
        let clf = fit_mvs(&d, MetaKind::Interpolating, &MvsConfig::default(), &RngStream::new(1)).unwrap();
        let json = clf.to_json().unwrap().replacen("\"schema_version\": 1", "\"schema_version\": 7", 1);
        assert!(matches!(StackedClassifier::from_json(&json), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn view_structure_checked() {
        let (d, _) = small(7, 40);
        let clf = fit_mvs(&d, MetaKind::Nnfs, &MvsConfig::default(), &RngStream::new(1)).unwrap();
        let other = MultiViewDataset::new(vec![d.view(0).clone(), d.view(1).clone()], None).unwrap();
        assert!(matches!(clf.predict(&other), Err(Error::ViewStructureMismatch(_))));
    }

    #[test]
    fn base_columns_are_local() {
        let (d, test) = small(8, 50);
        let clf = fit_mvs(&d, MetaKind::NnRidge, &MvsConfig::default(), &RngStream::new(2)).unwrap();
        let before = clf.base_predictions(&test).unwrap();
        let mut views = test.views().to_vec();
        views[1] = DenseMatrix::zeros(test.n_samples(), 4);
        let zeroed = MultiViewDataset::new(views, None).unwrap();
        let after = clf.base_predictions(&zeroed).unwrap();
        for i in 0..test.n_samples() {
            assert_eq!(before.get(i, 0), after.get(i, 0));
            assert_eq!(before.get(i, 2), after.get(i, 2));
        }
    }

    #[test]
    fn intercept_only_meta_is_constant() {
        let (d, test) = small(9, 40);
        let mut clf = fit_mvs(&d, MetaKind::NnRidge, &MvsConfig::default(), &RngStream::new(3)).unwrap();
        clf.meta = MetaModel::new(
            MetaKind::NnLasso,
            Some(-0.4),
            vec![0.0; 3],
            Diagnostics::Penalized { lambda: None, alpha: 1.0, cv_loss: None, null_path: true, converged: true },
        );
        let p = clf.predict(&test).unwrap();
        let want = crate::numerics::sigmoid(-0.4);
        assert!(p.iter().all(|&v| (v - want).abs() < 1e-15));
    }

    #[test]
    fn interpolating_stays_in_row_range() {
        let (d, test) = small(10, 50);
        let clf = fit_mvs(&d, MetaKind::Interpolating, &MvsConfig::default(), &RngStream::new(4)).unwrap();
        let z = clf.base_predictions(&test).unwrap();
        let p = clf.predict(&test).unwrap();
        for (i, &pi) in p.iter().enumerate() {
            let row = z.row(i);
            let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(pi >= lo - 1e-12 && pi <= hi + 1e-12);
        }
    }

    #[test]
    fn full_data_mode_reuses_lambdas() {
        let (d, _) = small(12, 50);
        let cfg = StackingConfig { base_tuning: BaseTuning::FullData, ..StackingConfig::default() };
        let layer = fit_base_layer(&d, &cfg, &RngStream::new(5)).unwrap();
        for (v, per_fold) in layer.cv.base_lambdas.iter().enumerate() {
            for &l in per_fold {
                assert!(l == layer.base_lambdas[v] || (l.is_nan() && layer.base_lambdas[v].is_nan()));
            }
        }
    }
}
