//! Classification and view-selection performance measures.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

fn check_lengths(y: &[f64], s: &[f64]) -> Result<()> {
    if y.len() != s.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels against {} predictions",
            y.len(),
            s.len()
        )));
    }
    Ok(())
}

/// Fraction of observations with `(p ≥ threshold) == y`.
pub fn accuracy(y: &[f64], p_hat: &[f64], threshold: f64) -> Result<f64> {
    check_lengths(y, p_hat)?;
    if y.is_empty() {
        return Err(Error::InvalidArgument("no observations".into()));
    }
    let hits = y
        .iter()
        .zip(p_hat)
        .filter(|(&yi, &pi)| (pi >= threshold) == (yi == 1.0))
        .count();
    Ok(hits as f64 / y.len() as f64)
}

/// View-selection rates against the true signal views. `tpr` is `None`
/// when there are no true views, `fpr` when every view is a true view.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub fdr: f64,
}

pub fn selection_rates(selected: &BTreeSet<usize>, truth: &BTreeSet<usize>, v: usize) -> Result<SelectionOutcome> {
    if selected.iter().chain(truth).any(|&j| j >= v) {
        return Err(Error::InvalidArgument(format!("view index outside 0..{v}")));
    }
    let tp = selected.intersection(truth).count();
    let fp = selected.len() - tp;
    let nulls = v - truth.len();
    Ok(SelectionOutcome {
        tpr: (!truth.is_empty()).then(|| tp as f64 / truth.len() as f64),
        fpr: (nulls > 0).then(|| fp as f64 / nulls as f64),
        fdr: if selected.is_empty() { 0.0 } else { fp as f64 / selected.len() as f64 },
    })
}

fn class_counts(y: &[f64]) -> Result<(usize, usize)> {
    let n1 = y.iter().filter(|&&v| v == 1.0).count();
    let n0 = y.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::OneClassOnly);
    }
    Ok((n0, n1))
}

/// Midranks (1-based) of `s`, ties sharing their average rank.
fn midranks(s: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let mut ranks = vec![0.0; s.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && s[order[j + 1]] == s[order[i]] {
            j += 1;
        }
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Area under the ROC curve, ties counted one half.
pub fn auc(y: &[f64], scores: &[f64]) -> Result<f64> {
    check_lengths(y, scores)?;
    let (n0, n1) = class_counts(y)?;
    let ranks = midranks(scores);
    let r1: f64 = y.iter().zip(&ranks).filter(|(&yi, _)| yi == 1.0).map(|(_, &r)| r).sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    Ok(u / (n1 as f64 * n0 as f64))
}

/// Cost-ratio distribution for the H measure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    /// Beta(2, 2): equal expected cost for both classes.
    #[default]
    Symmetric,
    /// Beta(1 + π₁, 1 + π₀) with class proportions π.
    ClassPrior,
}

impl Severity {
    pub fn name(self) -> &'static str {
        match self {
            Severity::Symmetric => "symmetric",
            Severity::ClassPrior => "class_prior",
        }
    }
}

struct BetaWeight {
    a: f64,
    b: f64,
}

impl BetaWeight {
    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            beta_reg(self.a, self.b, x)
        }
    }

    fn partial_mean(&self, x: f64) -> f64 {
        let shifted = BetaWeight { a: self.a + 1.0, b: self.b };
        self.a / (self.a + self.b) * shifted.cdf(x)
    }

    /// ∫ (slope·c + offset) u(c) dc over [lo, hi].
    fn integrate_line(&self, slope: f64, offset: f64, lo: f64, hi: f64) -> f64 {
        slope * (self.partial_mean(hi) - self.partial_mean(lo)) + offset * (self.cdf(hi) - self.cdf(lo))
    }
}

/// ROC points `(fpr, tpr)` from the strictest to the loosest threshold.
fn roc_points(y: &[f64], scores: &[f64], n0: usize, n1: usize) -> Vec<(f64, f64)> {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut pts = vec![(0.0, 0.0)];
    let (mut fp, mut tp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if y[order[i]] == 1.0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        pts.push((fp as f64 / n0 as f64, tp as f64 / n1 as f64));
    }
    pts
}

/// Upper convex hull of ROC points sorted by fpr.
fn roc_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Hand's H measure: one minus the expected minimum misclassification loss
/// relative to the best trivial classifier, with the cost ratio drawn from
/// `severity`. Higher scores indicate class 1.
pub fn h_measure(y: &[f64], scores: &[f64], severity: Severity) -> Result<f64> {
    check_lengths(y, scores)?;
    let (n0, n1) = class_counts(y)?;
    let pi0 = n0 as f64 / y.len() as f64;
    let pi1 = 1.0 - pi0;
    let w = match severity {
        Severity::Symmetric => BetaWeight { a: 2.0, b: 2.0 },
        Severity::ClassPrior => BetaWeight { a: 1.0 + pi1, b: 1.0 + pi0 },
    };
    // Loss at cost c of ROC point (f, t): c·π0·f + (1−c)·π1·(1−t).
    let lines: Vec<(f64, f64)> = roc_hull(roc_points(y, scores, n0, n1))
        .into_iter()
        .rev()
        .map(|(f, t)| (pi0 * f - pi1 * (1.0 - t), pi1 * (1.0 - t)))
        .collect();
    // Walking the hull from (1,1) to (0,0) visits the optimal lines in order
    // of increasing cost.
    let mut loss = 0.0;
    let mut lo = 0.0;
    let mut cur = 0;
    while lo < 1.0 {
        let mut next = None;
        for k in cur + 1..lines.len() {
            let da = lines[cur].0 - lines[k].0;
            if da > 0.0 {
                let c = (lines[k].1 - lines[cur].1) / da;
                if next.is_none_or(|(cn, _)| c < cn) {
                    next = Some((c, k));
                }
            }
        }
        let (hi, nk) = match next {
            Some((c, k)) if c < 1.0 => (c.max(lo), k),
            _ => (1.0, lines.len()),
        };
        loss += w.integrate_line(lines[cur].0, lines[cur].1, lo, hi);
        lo = hi;
        if nk == lines.len() {
            break;
        }
        cur = nk;
    }
    let lmax = w.integrate_line(pi0, 0.0, 0.0, pi1) + w.integrate_line(-pi1, pi1, pi1, 1.0);
    Ok((1.0 - loss / lmax).clamp(0.0, 1.0))
}

/// Binary `M × V` matrix of per-model view selections.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionMatrix {
    v: usize,
    rows: Vec<Vec<bool>>,
}

impl SelectionMatrix {
    pub fn new(v: usize, rows: Vec<Vec<bool>>) -> Result<Self> {
        if rows.iter().any(|r| r.len() != v) {
            return Err(Error::DimensionMismatch(format!("selection rows must have {v} entries")));
        }
        Ok(Self { v, rows })
    }

    pub fn from_sets<'a, I>(v: usize, sets: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [usize]>,
    {
        let mut rows = Vec::new();
        for s in sets {
            let mut row = vec![false; v];
            for &j in s {
                if j >= v {
                    return Err(Error::InvalidArgument(format!("view index {j} outside 0..{v}")));
                }
                row[j] = true;
            }
            rows.push(row);
        }
        Ok(Self { v, rows })
    }

    pub fn n_models(&self) -> usize {
        self.rows.len()
    }

    pub fn n_views(&self) -> usize {
        self.v
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }
}

/// Chance-corrected stability of repeated selections.
pub fn nogueira_stability(s: &SelectionMatrix) -> Result<f64> {
    let m = s.n_models();
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 models, got {m}")));
    }
    let (mf, vf) = (m as f64, s.v as f64);
    let mut var_sum = 0.0;
    let mut total = 0usize;
    for j in 0..s.v {
        let c = s.rows.iter().filter(|r| r[j]).count();
        total += c;
        let p = c as f64 / mf;
        var_sum += mf / (mf - 1.0) * p * (1.0 - p);
    }
    let kbar = total as f64 / mf;
    let denom = kbar / vf * (1.0 - kbar / vf);
    if total == 0 || total == m * s.v {
        return Err(Error::DegenerateSelection);
    }
    Ok(1.0 - (var_sum / vf) / denom)
}
