//! Iteratively reweighted coordinate descent for penalized logistic
//! regression.
//!
//! Objective, on the internal (possibly standardized) scale:
//!
//! ```text
//! (1/n) Σ [log(1 + exp(η_i)) − y_i η_i] + λ Σ_j w_j [(1 − α) β_j² / 2 + α |β_j|]
//! ```

use crate::numerics::{log1p_exp, sigmoid, soft_threshold};
use crate::scalar::Scalar;

use super::{GlmFit, PenaltySpec};

/// Working-weight floor for the quadratic approximation.
const MIN_WEIGHT: f64 = 1e-5;

#[derive(Clone, Copy, Debug)]
pub(crate) struct SolverOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    pub max_outer: usize,
    /// Fitting stops with `converged = false` once any original-scale
    /// coefficient exceeds this magnitude.
    pub coef_cap: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_sweeps: 100_000, max_outer: 1_000, coef_cap: 1e4 }
    }
}

/// Design matrix and penalty settings prepared for repeated fits.
pub(crate) struct LogisticProblem<T> {
    pub n: usize,
    pub p: usize,
    cols: Vec<Vec<T>>,
    y: Vec<T>,
    center: Vec<T>,
    scale: Vec<T>,
    penalty_weight: Vec<T>,
    /// Coordinates that may move (finite weight and nonzero spread).
    updatable: Vec<bool>,
    pub alpha: T,
    pub nonnegative: bool,
    pub fit_intercept: bool,
}

/// Coefficients on the internal scale plus the matching linear predictor.
#[derive(Clone, Debug)]
pub(crate) struct SolverState<T> {
    pub b0: T,
    pub beta: Vec<T>,
    eta: Vec<T>,
}

struct Quadratic<'a, T> {
    w: &'a [T],
    l1: &'a [T],
    l2: &'a [T],
    tol: T,
    max_sweeps: usize,
}

pub(crate) struct FitOutcome<T> {
    pub state: SolverState<T>,
    pub converged: bool,
    pub sweeps: usize,
    /// Objective after each outer iteration, starting from the initial state.
    #[cfg_attr(not(test), allow(dead_code))]
    pub objective_trace: Vec<T>,
}

impl<T: Scalar> LogisticProblem<T> {
    /// `columns` are the feature columns; `y` holds 0/1 labels.
    pub fn new(columns: Vec<Vec<T>>, y: &[T], spec: &PenaltySpec<T>) -> Self {
        let n = y.len();
        let p = columns.len();
        let nf = T::from_usize_lossy(n);
        let weights: Vec<T> = match &spec.feature_weights {
            Some(w) => w.clone(),
            None => vec![T::one(); p],
        };
        let mut cols = columns;
        let mut center = vec![T::zero(); p];
        let mut scale = vec![T::one(); p];
        let mut updatable: Vec<bool> = weights.iter().map(|w| w.is_finite()).collect();
        if spec.standardize_inputs {
            for j in 0..p {
                let col = &mut cols[j];
                let mean = if spec.fit_intercept {
                    col.iter().copied().sum::<T>() / nf
                } else {
                    T::zero()
                };
                let ss = col.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / nf;
                let sd = ss.sqrt();
                if sd > T::lit(1e-10) * (T::one() + mean.abs()) {
                    for x in col.iter_mut() {
                        *x = (*x - mean) / sd;
                    }
                    center[j] = mean;
                    scale[j] = sd;
                } else {
                    updatable[j] = false;
                }
            }
        } else {
            // Centring decouples the intercept from the coefficients; it does
            // not change the penalized problem.
            for j in 0..p {
                let col = &mut cols[j];
                if spec.fit_intercept {
                    let mean = col.iter().copied().sum::<T>() / nf;
                    for x in col.iter_mut() {
                        *x = *x - mean;
                    }
                    center[j] = mean;
                }
                let spread = col.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
                if !(spread > T::lit(1e-12) * (T::one() + center[j].abs())) {
                    updatable[j] = false;
                }
            }
        }
        Self {
            n,
            p,
            cols,
            y: y.to_vec(),
            center,
            scale,
            penalty_weight: weights,
            updatable,
            alpha: spec.alpha,
            nonnegative: spec.nonnegative,
            fit_intercept: spec.fit_intercept,
        }
    }

    fn mean_y(&self) -> T {
        self.y.iter().copied().sum::<T>() / T::from_usize_lossy(self.n)
    }

    /// Intercept-only starting point.
    pub fn null_state(&self) -> SolverState<T> {
        let b0 = if self.fit_intercept {
            let eps = T::lit(1e-9);
            let m = self.mean_y().max(eps).min(T::one() - eps);
            (m / (T::one() - m)).ln()
        } else {
            T::zero()
        };
        SolverState { b0, beta: vec![T::zero(); self.p], eta: vec![b0; self.n] }
    }

    /// Per-feature gradient scores `(1/n) x_jᵀ (y − p̄)` at the null model.
    pub fn null_scores(&self) -> Vec<T> {
        let pbar = if self.fit_intercept { self.mean_y() } else { T::lit(0.5) };
        let nf = T::from_usize_lossy(self.n);
        self.cols
            .iter()
            .map(|c| c.iter().zip(&self.y).map(|(&x, &y)| x * (y - pbar)).sum::<T>() / nf)
            .collect()
    }

    pub fn penalty_weights(&self) -> &[T] {
        &self.penalty_weight
    }

    pub fn is_updatable(&self, j: usize) -> bool {
        self.updatable[j]
    }

    fn eta_from(&self, b0: T, beta: &[T]) -> Vec<T> {
        let mut eta = vec![b0; self.n];
        for (j, &b) in beta.iter().enumerate() {
            if b != T::zero() {
                for (e, &x) in eta.iter_mut().zip(&self.cols[j]) {
                    *e = *e + b * x;
                }
            }
        }
        eta
    }

    pub fn objective(&self, state: &SolverState<T>, lambda: T) -> T {
        let nf = T::from_usize_lossy(self.n);
        let loss = state
            .eta
            .iter()
            .zip(&self.y)
            .map(|(&e, &y)| log1p_exp(e) - y * e)
            .sum::<T>()
            / nf;
        let half = T::lit(0.5);
        let pen = state
            .beta
            .iter()
            .zip(&self.penalty_weight)
            .filter(|(b, _)| **b != T::zero())
            .map(|(&b, &w)| w * ((T::one() - self.alpha) * half * b * b + self.alpha * b.abs()))
            .sum::<T>();
        loss + lambda * pen
    }

    fn exceeds_cap(&self, beta: &[T], cap: T) -> bool {
        beta.iter().zip(&self.scale).any(|(&b, &s)| (b / s).abs() > cap)
    }

    /// Fits at `lambda`, starting from `start`.
    pub fn fit(&self, lambda: T, start: SolverState<T>, opts: &SolverOptions) -> FitOutcome<T> {
        let n = self.n;
        let tol = T::lit(opts.tol);
        let cap = T::lit(opts.coef_cap);
        let min_w = T::lit(MIN_WEIGHT);
        let one = T::one();

        let mut state = start;
        let mut f_old = self.objective(&state, lambda);
        let mut trace = vec![f_old];
        let mut sweeps = 0usize;
        let mut converged = false;

        let l1: Vec<T> =
            self.penalty_weight.iter().map(|&w| lambda * self.alpha * w).collect();
        let l2: Vec<T> =
            self.penalty_weight.iter().map(|&w| lambda * (one - self.alpha) * w).collect();

        let mut w = vec![T::zero(); n];
        let mut r = vec![T::zero(); n];
        let active: Vec<usize> = (0..self.p).filter(|&j| self.updatable[j]).collect();
        let gram_mode = n >= active.len();

        for _outer in 0..opts.max_outer {
            for i in 0..n {
                let pi = sigmoid(state.eta[i]);
                w[i] = (pi * (one - pi)).max(min_w);
                r[i] = self.y[i] - pi;
            }
            let quad = Quadratic { w: &w, l1: &l1, l2: &l2, tol, max_sweeps: opts.max_sweeps };
            let (b0, beta, inner_done) = if gram_mode {
                self.sweep_gram(&quad, &active, &r, &state, &mut sweeps)
            } else {
                self.sweep_naive(&quad, &active, &mut r, &state, &mut sweeps)
            };

            // Guard the true objective: halve the step until it does not increase.
            let mut candidate = SolverState { eta: self.eta_from(b0, &beta), b0, beta };
            let mut f_new = self.objective(&candidate, lambda);
            let slack = T::lit(1e-13) * (T::one() + f_old.abs());
            let mut halvings = 0;
            while !(f_new <= f_old + slack) && halvings < 60 {
                halvings += 1;
                let half = T::lit(0.5);
                let b0 = state.b0 + (candidate.b0 - state.b0) * half;
                let beta: Vec<T> = state
                    .beta
                    .iter()
                    .zip(&candidate.beta)
                    .map(|(&a, &b)| a + (b - a) * half)
                    .collect();
                candidate = SolverState { eta: self.eta_from(b0, &beta), b0, beta };
                f_new = self.objective(&candidate, lambda);
            }
            if !(f_new <= f_old + slack) {
                // No descent along the IRLS direction: current iterate is optimal
                // to working precision.
                converged = inner_done;
                break;
            }

            let change = state
                .beta
                .iter()
                .zip(&candidate.beta)
                .map(|(&a, &b)| (a - b).abs())
                .fold((state.b0 - candidate.b0).abs(), T::max);
            state = candidate;
            f_old = f_new;
            trace.push(f_new);

            if self.exceeds_cap(&state.beta, cap) || !f_new.is_finite() {
                converged = false;
                break;
            }
            if !inner_done {
                break;
            }
            if change < tol {
                converged = true;
                break;
            }
        }

        FitOutcome { state, converged, sweeps, objective_trace: trace }
    }

    /// Cyclic coordinate descent on the quadratic model, updating residuals
    /// `r = w·(z − η)` in place. Cost per sweep is O(n·p).
    fn sweep_naive(
        &self,
        q: &Quadratic<'_, T>,
        active: &[usize],
        r: &mut [T],
        state: &SolverState<T>,
        sweeps: &mut usize,
    ) -> (T, Vec<T>, bool) {
        let nf = T::from_usize_lossy(self.n);
        let sum_w: T = q.w.iter().copied().sum();
        let xv: Vec<T> = (0..self.p)
            .map(|j| {
                if self.updatable[j] {
                    self.cols[j].iter().zip(q.w).map(|(&x, &wi)| wi * x * x).sum::<T>() / nf
                } else {
                    T::zero()
                }
            })
            .collect();
        let mut b0 = state.b0;
        let mut beta = state.beta.clone();
        let mut full_sweep = true;
        while *sweeps < q.max_sweeps {
            *sweeps += 1;
            let mut max_change = T::zero();
            if self.fit_intercept {
                let d = r.iter().copied().sum::<T>() / sum_w;
                if d != T::zero() {
                    b0 = b0 + d;
                    for (ri, &wi) in r.iter_mut().zip(q.w) {
                        *ri = *ri - wi * d;
                    }
                    max_change = max_change.max(d.abs());
                }
            }
            for &j in active {
                if !full_sweep && beta[j] == T::zero() {
                    continue;
                }
                let col = &self.cols[j];
                let g = col.iter().zip(r.iter()).map(|(&x, &ri)| x * ri).sum::<T>() / nf;
                let new = self.coordinate(g + xv[j] * beta[j], q.l1[j], xv[j] + q.l2[j]);
                let d = new - beta[j];
                if d != T::zero() {
                    for ((ri, &wi), &x) in r.iter_mut().zip(q.w).zip(col) {
                        *ri = *ri - wi * x * d;
                    }
                    beta[j] = new;
                    max_change = max_change.max(d.abs());
                }
            }
            if max_change < q.tol {
                if full_sweep {
                    return (b0, beta, true);
                }
                full_sweep = true;
            } else {
                full_sweep = false;
            }
        }
        (b0, beta, false)
    }

    /// Same iterations as [`Self::sweep_naive`], carried out on the weighted
    /// Gram matrix so each sweep costs O(p²).
    fn sweep_gram(
        &self,
        q: &Quadratic<'_, T>,
        active: &[usize],
        r: &[T],
        state: &SolverState<T>,
        sweeps: &mut usize,
    ) -> (T, Vec<T>, bool) {
        let nf = T::from_usize_lossy(self.n);
        let k = active.len();
        let mut gram = vec![T::zero(); k * k];
        let mut wmean = vec![T::zero(); k];
        let mut grad = vec![T::zero(); k];
        for a in 0..k {
            let ca = &self.cols[active[a]];
            let wx: Vec<T> = ca.iter().zip(q.w).map(|(&x, &wi)| wi * x).collect();
            wmean[a] = wx.iter().copied().sum::<T>() / nf;
            grad[a] = dot(ca, r) / nf;
            for b in a..k {
                let v = dot(&wx, &self.cols[active[b]]) / nf;
                gram[a * k + b] = v;
                gram[b * k + a] = v;
            }
        }
        let sw = q.w.iter().copied().sum::<T>() / nf;
        let mut g0 = r.iter().copied().sum::<T>() / nf;
        let mut b0 = state.b0;
        let mut beta = state.beta.clone();
        let mut full_sweep = true;
        while *sweeps < q.max_sweeps {
            *sweeps += 1;
            let mut max_change = T::zero();
            if self.fit_intercept {
                let d = g0 / sw;
                if d != T::zero() {
                    b0 = b0 + d;
                    g0 = g0 - sw * d;
                    for (g, &m) in grad.iter_mut().zip(&wmean) {
                        *g = *g - m * d;
                    }
                    max_change = max_change.max(d.abs());
                }
            }
            for a in 0..k {
                let j = active[a];
                if !full_sweep && beta[j] == T::zero() {
                    continue;
                }
                let xv = gram[a * k + a];
                let new = self.coordinate(grad[a] + xv * beta[j], q.l1[j], xv + q.l2[j]);
                let d = new - beta[j];
                if d != T::zero() {
                    let row = &gram[a * k..(a + 1) * k];
                    for (g, &gv) in grad.iter_mut().zip(row) {
                        *g = *g - gv * d;
                    }
                    g0 = g0 - wmean[a] * d;
                    beta[j] = new;
                    max_change = max_change.max(d.abs());
                }
            }
            if max_change < q.tol {
                if full_sweep {
                    return (b0, beta, true);
                }
                full_sweep = true;
            } else {
                full_sweep = false;
            }
        }
        (b0, beta, false)
    }

    #[inline]
    fn coordinate(&self, u: T, l1: T, denom: T) -> T {
        let new = soft_threshold(u, l1) / denom;
        if self.nonnegative && new < T::zero() {
            T::zero()
        } else {
            new
        }
    }

    /// Maps an internal state back to original-scale coefficients.
    pub fn to_fit(&self, outcome: &FitOutcome<T>, lambda: T) -> GlmFit<T> {
        let st = &outcome.state;
        let coefficients: Vec<T> =
            st.beta.iter().zip(&self.scale).map(|(&b, &s)| b / s).collect();
        let intercept = st.b0
            - coefficients.iter().zip(&self.center).map(|(&b, &c)| b * c).sum::<T>();
        let deviance = T::lit(2.0)
            * st.eta.iter().zip(&self.y).map(|(&e, &y)| log1p_exp(e) - y * e).sum::<T>();
        GlmFit {
            intercept,
            coefficients,
            lambda_used: lambda,
            alpha_used: self.alpha,
            converged: outcome.converged,
            n_iterations: outcome.sweeps,
            deviance,
        }
    }
}

/// Dot product with independent partial sums so the loop pipelines.
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail = ca.remainder().iter().zip(cb.remainder()).fold(T::zero(), |s, (&x, &y)| s + x * y);
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
