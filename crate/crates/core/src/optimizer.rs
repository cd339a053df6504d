//! Information-constrained maximization of the expected payoff.
//!
//! The decision variable is `qbar` on `X0 x X1 x X2` with every state slice
//! `qbar(x0, ., .)` carrying mass `rho(x0)`; the joint law with the
//! observation is `qbar(x0,x1,x2) Gamma(y|x1)` by construction. The program
//!
//! ```text
//! maximize    E[w]
//! subject to  (1/S) I(X0;X2) - I(X1;Y|X0,X2) + margin <= 0
//! ```
//!
//! is convex, and is solved through its Lagrangian: for fixed `lambda >= 0`
//! the concave function `E[w] - lambda * constraint` is maximized by entropic
//! mirror ascent within each slice, and `lambda` is bisected until the
//! constraint is active. Every inner solve also yields an upper bound on the
//! primal optimum (Frank-Wolfe bound of the Lagrangian), so the returned
//! duality gap is a certificate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{action_dims, JointDistribution, ObservationChannel, StatePrior};

/// Floor applied to every probability during mirror ascent.
pub const PROB_FLOOR: f64 = 1e-14;

/// Share of the product point mixed into bisection warm starts.
const WARM_START_LIFT: f64 = 1e-3;

/// Stage payoff `w(x0, x1, x2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffTable {
    dims: (usize, usize, usize),
    values: Vec<f64>,
}

impl PayoffTable {
    pub fn new(n0: usize, n1: usize, n2: usize, values: Vec<f64>) -> Result<Self> {
        if n0 == 0 || n1 == 0 || n2 == 0 {
            return Err(Error::Argument("payoff table dimensions must be positive".into()));
        }
        if values.len() != n0 * n1 * n2 {
            return Err(Error::Alphabet(format!(
                "payoff table {n0}x{n1}x{n2} needs {} values, got {}",
                n0 * n1 * n2,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("payoff value {v} is not finite")));
        }
        Ok(Self {
            dims: (n0, n1, n2),
            values,
        })
    }

    pub fn from_fn<F>(n0: usize, n1: usize, n2: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> f64,
    {
        let mut values = Vec::with_capacity(n0 * n1 * n2);
        for x0 in 0..n0 {
            for x1 in 0..n1 {
                for x2 in 0..n2 {
                    values.push(f(x0, x1, x2));
                }
            }
        }
        Self::new(n0, n1, n2, values)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn get(&self, x0: usize, x1: usize, x2: usize) -> f64 {
        let (_, n1, n2) = self.dims;
        self.values[(x0 * n1 + x1) * n2 + x2]
    }

    /// Values in the same flat order as a distribution over `(X0, X1, X2)`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// Lowest-index maximizing `(x1, x2)` in state `x0`, with its value.
    pub fn best_actions(&self, x0: usize) -> ((usize, usize), f64) {
        let (_, n1, n2) = self.dims;
        let slice = &self.values[x0 * n1 * n2..(x0 + 1) * n1 * n2];
        let (k, v) = slice
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bk, bv), (k, &v)| {
                if v > bv {
                    (k, v)
                } else {
                    (bk, bv)
                }
            });
        ((k / n2, k % n2), v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative duality-gap target; the absolute target is
    /// `tol_payoff * max(1, |costless bound|)`.
    pub tol_payoff: f64,
    /// Mirror-ascent iterations per inner solve.
    pub max_iter: usize,
    /// Multiplier updates (bracketing plus bisection).
    pub max_outer: usize,
    /// Accepted constraint violation, in bits.
    pub feasibility_tol: f64,
    /// Block length of a constant state; 1 for i.i.d. states.
    pub stages: u32,
    /// Extra slack demanded from the constraint, in bits.
    pub margin: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_payoff: 1e-5,
            max_iter: 50_000,
            max_outer: 60,
            feasibility_tol: crate::constraint::DEFAULT_FEASIBILITY_TOL,
            stages: 1,
            margin: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub qbar: JointDistribution,
    pub payoff: f64,
    /// `-(constraint value)` at `qbar`, without the margin.
    pub slack: f64,
    /// Multiplier whose Lagrangian bound is `dual_bound`.
    pub lambda: f64,
    pub dual_bound: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
}

fn check_dims(qbar: &JointDistribution, w: &PayoffTable) -> Result<()> {
    let dims = action_dims(qbar)?;
    if dims != w.dims() {
        return Err(Error::Alphabet(format!(
            "distribution is {dims:?} but payoff table is {:?}",
            w.dims()
        )));
    }
    Ok(())
}

/// `E_Q[w]` for `Q = qbar * Gamma`; the channel sums out because `w`
/// does not depend on `y`.
pub fn expected_payoff(
    qbar: &JointDistribution,
    gamma: &ObservationChannel,
    w: &PayoffTable,
) -> Result<f64> {
    check_dims(qbar, w)?;
    if gamma.inputs() != w.dims().1 {
        return Err(Error::Alphabet(format!(
            "|X1| = {} but channel has {} inputs",
            w.dims().1,
            gamma.inputs()
        )));
    }
    Ok(dot(qbar.probs(), w.values()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sum_x0 rho(x0) max_{x1,x2} w(x0,x1,x2)`.
pub fn costless_bound(rho: &StatePrior, w: &PayoffTable) -> Result<f64> {
    check_prior(rho, w)?;
    Ok(rho
        .probs()
        .iter()
        .enumerate()
        .map(|(x0, p)| p * w.best_actions(x0).1)
        .sum())
}

/// Point mass on the per-state best action pair, lowest index on ties.
pub fn costless_maximizer(rho: &StatePrior, w: &PayoffTable) -> Result<JointDistribution> {
    check_prior(rho, w)?;
    let (n0, n1, n2) = w.dims();
    let mut probs = vec![0.0; n0 * n1 * n2];
    for (x0, &p) in rho.probs().iter().enumerate() {
        let ((x1, x2), _) = w.best_actions(x0);
        probs[(x0 * n1 + x1) * n2 + x2] = p;
    }
    JointDistribution::over_actions(n0, n1, n2, probs)
}

fn check_prior(rho: &StatePrior, w: &PayoffTable) -> Result<()> {
    if rho.len() != w.dims().0 {
        return Err(Error::Alphabet(format!(
            "prior has {} states but payoff table has {}",
            rho.len(),
            w.dims().0
        )));
    }
    Ok(())
}

pub fn solve(
    rho: &StatePrior,
    gamma: &ObservationChannel,
    w: &PayoffTable,
    opts: &SolverOptions,
) -> Result<OptimizationResult> {
    let program = Program::new(rho, gamma, w, opts)?;
    program.solve(opts)
}

/// [`solve`] with the state held constant over blocks of `stages` stages.
pub fn solve_s_stage(
    rho: &StatePrior,
    gamma: &ObservationChannel,
    w: &PayoffTable,
    stages: u32,
    opts: &SolverOptions,
) -> Result<OptimizationResult> {
    if stages == 0 {
        return Err(Error::Argument("number of stages must be at least 1".into()));
    }
    solve(rho, gamma, w, &SolverOptions { stages, ..opts.clone() })
}

/// Upper bound on `max_qbar E[w] - lambda * (constraint + margin)` over the
/// slice polytope, obtained by running the inner solver from the product
/// initialization.
pub fn lagrangian_upper_bound(
    rho: &StatePrior,
    gamma: &ObservationChannel,
    w: &PayoffTable,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Argument(format!("multiplier {lambda} must be nonnegative")));
    }
    let program = Program::new(rho, gamma, w, opts)?;
    let tol = program.payoff_tolerance(opts) * 0.1;
    let mut q = program.product_point();
    let inner = program.maximize_lagrangian(lambda, &mut q, opts.max_iter, tol);
    Ok(inner.upper_bound)
}

/// Outcome of one inner solve.
struct Inner {
    upper_bound: f64,
    iterations: usize,
}

/// Flat-vector form of the program with cached channel data.
struct Program<'a> {
    n0: usize,
    n1: usize,
    n2: usize,
    ny: usize,
    rho: &'a [f64],
    gamma: &'a ObservationChannel,
    w: &'a [f64],
    /// `H(Y | X1 = x1)`.
    row_entropy: Vec<f64>,
    inv_stages: f64,
    margin: f64,
    costless: f64,
}

impl<'a> Program<'a> {
    fn new(
        rho: &'a StatePrior,
        gamma: &'a ObservationChannel,
        w: &'a PayoffTable,
        opts: &SolverOptions,
    ) -> Result<Self> {
        check_prior(rho, w)?;
        let (n0, n1, n2) = w.dims();
        if gamma.inputs() != n1 {
            return Err(Error::Alphabet(format!(
                "|X1| = {n1} but channel has {} inputs",
                gamma.inputs()
            )));
        }
        if opts.stages == 0 {
            return Err(Error::Argument("number of stages must be at least 1".into()));
        }
        if !(opts.margin >= 0.0) || !(opts.tol_payoff > 0.0) || !(opts.feasibility_tol >= 0.0) {
            return Err(Error::Argument(
                "margin, tol_payoff and feasibility_tol must be nonnegative (tol_payoff > 0)"
                    .into(),
            ));
        }
        Ok(Self {
            n0,
            n1,
            n2,
            ny: gamma.outputs(),
            rho: rho.probs(),
            gamma,
            w: w.values(),
            row_entropy: (0..n1).map(|x1| gamma.row_entropy(x1)).collect(),
            inv_stages: 1.0 / f64::from(opts.stages),
            margin: opts.margin,
            costless: costless_bound(rho, w)?,
        })
    }

    fn slice_len(&self) -> usize {
        self.n1 * self.n2
    }

    fn payoff_tolerance(&self, opts: &SolverOptions) -> f64 {
        opts.tol_payoff * self.costless.abs().max(1.0)
    }

    fn product_point(&self) -> Vec<f64> {
        let k = self.slice_len() as f64;
        self.rho
            .iter()
            .flat_map(|&p| std::iter::repeat_n(p / k, self.slice_len()))
            .collect()
    }

    fn costless_point(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.w.len()];
        let k = self.slice_len();
        for (x0, &p) in self.rho.iter().enumerate() {
            let slice = &self.w[x0 * k..(x0 + 1) * k];
            let best = (1..k).fold(0, |b, j| if slice[j] > slice[b] { j } else { b });
            q[x0 * k + best] = p;
        }
        q
    }

    /// Marginals `p(x2)`, `p(x0,x2)`, and `r(x0,x2,y) = sum_x1 q Gamma`.
    fn marginals(&self, q: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (n1, n2, ny) = (self.n1, self.n2, self.ny);
        let mut p2 = vec![0.0; n2];
        let mut p02 = vec![0.0; self.n0 * n2];
        let mut r = vec![0.0; self.n0 * n2 * ny];
        for x0 in 0..self.n0 {
            for x1 in 0..n1 {
                let row = self.gamma.row(x1);
                for x2 in 0..n2 {
                    let p = q[(x0 * n1 + x1) * n2 + x2];
                    p2[x2] += p;
                    p02[x0 * n2 + x2] += p;
                    let cell = &mut r[(x0 * n2 + x2) * ny..(x0 * n2 + x2 + 1) * ny];
                    for (c, g) in cell.iter_mut().zip(row) {
                        *c += p * g;
                    }
                }
            }
        }
        (p2, p02, r)
    }

    /// `(1/S) I(X0;X2) - I(X1;Y|X0,X2)`, written as
    /// `(H(X0) + H(X2))/S + (1 - 1/S) H(X0,X2) - H(Y,X0,X2) + <q, H(Y|x1)>`.
    fn constraint(&self, q: &[f64]) -> f64 {
        let (p2, p02, r) = self.marginals(q);
        let h = crate::prob::entropy_bits;
        let linear: f64 = q
            .iter()
            .enumerate()
            .map(|(i, p)| p * self.row_entropy[(i / self.n2) % self.n1])
            .sum();
        (h(self.rho) + h(&p2)) * self.inv_stages + (1.0 - self.inv_stages) * h(&p02) - h(&r)
            + linear
    }

    /// Constraint value and its gradient with respect to `q`.
    fn constraint_gradient(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        let (n1, n2, ny) = (self.n1, self.n2, self.ny);
        let (p2, p02, r) = self.marginals(q);
        let log2 = |p: f64| if p > 0.0 { p.log2() } else { f64::NEG_INFINITY };
        let log_r: Vec<f64> = r.iter().map(|&p| log2(p)).collect();
        for x0 in 0..self.n0 {
            if self.rho[x0] == 0.0 {
                grad[x0 * n1 * n2..(x0 + 1) * n1 * n2].fill(0.0);
                continue;
            }
            for x1 in 0..n1 {
                let row = self.gamma.row(x1);
                for x2 in 0..n2 {
                    let cell = &log_r[(x0 * n2 + x2) * ny..(x0 * n2 + x2 + 1) * ny];
                    let channel: f64 = row
                        .iter()
                        .zip(cell)
                        .filter(|(g, _)| **g > 0.0)
                        .map(|(g, l)| g * l)
                        .sum();
                    let mut g = channel + self.row_entropy[x1];
                    if p2[x2] > 0.0 {
                        g -= self.inv_stages * p2[x2].log2();
                    }
                    if self.inv_stages < 1.0 && p02[x0 * n2 + x2] > 0.0 {
                        g -= (1.0 - self.inv_stages) * p02[x0 * n2 + x2].log2();
                    }
                    grad[(x0 * n1 + x1) * n2 + x2] = g;
                }
            }
        }
        self.constraint(q)
    }

    fn lagrangian(&self, q: &[f64], lambda: f64) -> f64 {
        dot(q, self.w) - lambda * (self.constraint(q) + self.margin)
    }

    /// Frank-Wolfe bound `sum_x0 rho(x0) max G - <G, q>` for ascent direction `G`.
    fn linear_gap(&self, q: &[f64], grad: &[f64]) -> f64 {
        let k = self.slice_len();
        let mut gap = 0.0;
        for (x0, &p) in self.rho.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let g = &grad[x0 * k..(x0 + 1) * k];
            let m = g.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            gap += p * m - dot(&q[x0 * k..(x0 + 1) * k], g);
        }
        gap.max(0.0)
    }

    /// Multiplicative update `q * exp(step * G)` renormalized per slice.
    fn mirror_step(&self, q: &[f64], grad: &[f64], step: f64, out: &mut [f64]) {
        let k = self.slice_len();
        for (x0, &mass) in self.rho.iter().enumerate() {
            let range = x0 * k..(x0 + 1) * k;
            if mass == 0.0 {
                out[range].fill(0.0);
                continue;
            }
            let g = &grad[range.clone()];
            let top = g.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let dst = &mut out[range.clone()];
            for ((d, &p), &gi) in dst.iter_mut().zip(&q[range]).zip(g) {
                *d = p * (step * (gi - top)).exp();
            }
            renormalize_slice(dst, mass);
        }
    }

    /// Maximizes the Lagrangian at `lambda` in place, starting from `q`.
    fn maximize_lagrangian(&self, lambda: f64, q: &mut Vec<f64>, max_iter: usize, tol: f64) -> Inner {
        let len = q.len();
        let mut grad = vec![0.0; len];
        let mut trial = vec![0.0; len];
        let scale = self.w.iter().fold(0.0, |m: f64, v| m.max(v.abs())) + lambda;
        let mut step = 1.0 / scale.max(1e-300);
        let mut value = self.lagrangian(q, lambda);
        let mut iterations = 0;
        loop {
            self.constraint_gradient(q, &mut grad);
            for (g, &wi) in grad.iter_mut().zip(self.w) {
                *g = wi - lambda * *g;
            }
            let gap = self.linear_gap(q, &grad);
            if gap <= tol || iterations >= max_iter {
                return Inner {
                    upper_bound: value + gap,
                    iterations,
                };
            }
            iterations += 1;
            step *= 2.0;
            // Backtrack until the Bregman (KL) majorization holds.
            loop {
                self.mirror_step(q, &grad, step, &mut trial);
                let candidate = self.lagrangian(&trial, lambda);
                let linear: f64 = trial
                    .iter()
                    .zip(q.iter())
                    .zip(&grad)
                    .map(|((a, b), g)| (a - b) * g)
                    .sum();
                let divergence = kl_divergence(&trial, q);
                if candidate >= value + linear - divergence / step || step < 1e-300 {
                    if candidate >= value {
                        std::mem::swap(q, &mut trial);
                        value = candidate;
                    }
                    break;
                }
                step *= 0.5;
            }
        }
    }

    /// Largest `theta` in `[0, 1]` with `theta * q_lo + (1 - theta) * q_hi`
    /// feasible, given `q_hi` feasible and `q_lo` not. The constraint is convex
    /// along the segment, so the feasible part is an interval containing 0.
    fn feasible_blend(&self, q_lo: &[f64], q_hi: &[f64], tol: f64) -> Vec<f64> {
        let blend = |t: f64| -> Vec<f64> {
            q_lo.iter()
                .zip(q_hi)
                .map(|(a, b)| t * a + (1.0 - t) * b)
                .collect()
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.constraint(&blend(mid)) + self.margin <= tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        blend(lo)
    }

    fn result(&self, q: Vec<f64>, lambda: f64, upper: f64, iterations: usize, outer: usize, tol: f64) -> Result<OptimizationResult> {
        let payoff = dot(&q, self.w);
        let slack = -self.constraint(&q);
        let gap = (upper - payoff).max(0.0);
        Ok(OptimizationResult {
            qbar: JointDistribution::over_actions(self.n0, self.n1, self.n2, q)?,
            payoff,
            slack,
            lambda,
            dual_bound: upper.max(payoff),
            duality_gap: gap,
            iterations,
            outer_iterations: outer,
            converged: gap <= tol,
        })
    }

    fn solve(&self, opts: &SolverOptions) -> Result<OptimizationResult> {
        let tol = self.payoff_tolerance(opts);
        let inner_tol = 0.1 * tol;
        let feasible = |q: &[f64]| self.constraint(q) + self.margin <= opts.feasibility_tol;

        let q_free = self.costless_point();
        if feasible(&q_free) {
            return self.result(q_free, 0.0, self.costless, 0, 0, tol);
        }

        let mut iterations = 0;
        let mut outer = 0;
        // Best certified bound and the multiplier achieving it.
        let mut upper = self.costless;
        let mut upper_lambda = 0.0;
        let mut best: Option<(f64, Vec<f64>)> = None;
        let start = self.product_point();
        if feasible(&start) {
            best = Some((dot(&start, self.w), start.clone()));
        }

        let payoff_range = self.w.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - self.w.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let mut lambda_lo = 0.0;
        let mut q_lo = q_free;
        let mut lambda = payoff_range.max(1e-12);
        let mut q = start.clone();

        // Bracket: grow lambda until the inner maximizer is feasible.
        let mut bracket: Option<(f64, Vec<f64>)> = None;
        while outer < opts.max_outer {
            outer += 1;
            let inner = self.maximize_lagrangian(lambda, &mut q, opts.max_iter, inner_tol);
            iterations += inner.iterations;
            if inner.upper_bound < upper {
                upper = inner.upper_bound;
                upper_lambda = lambda;
            }
            if feasible(&q) {
                bracket = Some((lambda, q.clone()));
                break;
            }
            lambda_lo = lambda;
            q_lo = q.clone();
            lambda *= 4.0;
        }
        let Some((mut lambda_hi, mut q_hi)) = bracket else {
            return match best {
                Some((_, q)) => {
                    let r = self.result(q, upper_lambda, upper, iterations, outer, tol)?;
                    Err(Error::NotConverged { best: Box::new(r) })
                }
                None => Err(Error::Infeasible(format!(
                    "constraint with margin {} not met after {outer} multiplier updates",
                    self.margin
                ))),
            };
        };

        let consider = |cand: Vec<f64>, best: &mut Option<(f64, Vec<f64>)>| {
            let v = dot(&cand, self.w);
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                *best = Some((v, cand));
            }
        };
        consider(q_hi.clone(), &mut best);
        consider(
            self.feasible_blend(&q_lo, &q_hi, opts.feasibility_tol),
            &mut best,
        );

        let gap = |best: &Option<(f64, Vec<f64>)>, upper: f64| {
            best.as_ref().map_or(f64::INFINITY, |(v, _)| upper - v)
        };
        while outer < opts.max_outer && gap(&best, upper) > tol {
            outer += 1;
            let mid = 0.5 * (lambda_lo + lambda_hi);
            // Warm start, lifted off the probability floor so that cells the
            // previous multiplier starved can regrow quickly.
            let mut q: Vec<f64> = q_hi
                .iter()
                .zip(&start)
                .map(|(a, b)| (1.0 - WARM_START_LIFT) * a + WARM_START_LIFT * b)
                .collect();
            let inner = self.maximize_lagrangian(mid, &mut q, opts.max_iter, inner_tol);
            iterations += inner.iterations;
            if inner.upper_bound < upper {
                upper = inner.upper_bound;
                upper_lambda = mid;
            }
            if feasible(&q) {
                lambda_hi = mid;
                q_hi = q;
                consider(q_hi.clone(), &mut best);
            } else {
                lambda_lo = mid;
                q_lo = q;
            }
            consider(
                self.feasible_blend(&q_lo, &q_hi, opts.feasibility_tol),
                &mut best,
            );
        }

        let (_, q) = best.expect("bracket provides a feasible point");
        let r = self.result(q, upper_lambda, upper, iterations, outer, tol)?;
        if r.converged {
            Ok(r)
        } else {
            Err(Error::NotConverged { best: Box::new(r) })
        }
    }
}

fn renormalize_slice(slice: &mut [f64], mass: f64) {
    let total: f64 = slice.iter().sum();
    for p in slice.iter_mut() {
        *p = (*p * mass / total).max(PROB_FLOOR.min(mass));
    }
    let total: f64 = slice.iter().sum();
    for p in slice.iter_mut() {
        *p *= mass / total;
    }
}

/// `KL(a || b)` in nats for nonnegative vectors of equal total mass.
fn kl_divergence(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(x, _)| **x > 0.0)
        .map(|(x, y)| x * (x / y).ln())
        .sum::<f64>()
        .max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{phi, phi_s_stage};
    use crate::prob::{compose, Var};

    fn coordination() -> (StatePrior, ObservationChannel, PayoffTable) {
        (
            StatePrior::uniform(2).unwrap(),
            ObservationChannel::identity(2).unwrap(),
            PayoffTable::from_fn(2, 2, 2, |a, b, c| f64::from(a == b && b == c)).unwrap(),
        )
    }

    #[test]
    fn payoff_table_validation() {
        assert!(PayoffTable::new(1, 2, 2, vec![0.0; 3]).is_err());
        assert!(PayoffTable::new(1, 1, 1, vec![f64::NAN]).is_err());
        let w = PayoffTable::from_fn(2, 2, 3, |a, b, c| (a * 6 + b * 3 + c) as f64).unwrap();
        assert_eq!(w.get(1, 0, 2), 8.0);
        assert_eq!(w.best_actions(0), ((1, 2), 5.0));
    }

    #[test]
    fn expected_payoff_constant_and_point_mass() {
        let gamma = ObservationChannel::binary_symmetric(0.3).unwrap();
        let w = PayoffTable::from_fn(2, 2, 2, |_, _, _| 2.5).unwrap();
        let u = JointDistribution::uniform(&[(Var::X0, 2), (Var::X1, 2), (Var::X2, 2)]).unwrap();
        assert!((expected_payoff(&u, &gamma, &w).unwrap() - 2.5).abs() < 1e-15);

        let w = PayoffTable::from_fn(2, 2, 2, |a, b, c| (a * 4 + b * 2 + c) as f64).unwrap();
        let pm = JointDistribution::point_mass(u.axes(), &[1, 0, 1]).unwrap();
        assert_eq!(expected_payoff(&pm, &gamma, &w).unwrap(), 5.0);

        let w3 = PayoffTable::from_fn(2, 3, 2, |_, _, _| 1.0).unwrap();
        assert!(matches!(
            expected_payoff(&u, &gamma, &w3),
            Err(Error::Alphabet(_))
        ));
    }

    #[test]
    fn costless_bound_cases() {
        let rho = StatePrior::uniform(3).unwrap();
        let w = PayoffTable::from_fn(3, 2, 2, |_, _, _| -1.5).unwrap();
        assert_eq!(costless_bound(&rho, &w).unwrap(), -1.5);

        let single = StatePrior::new(vec![1.0]).unwrap();
        let w = PayoffTable::new(1, 2, 2, vec![0.3, 0.9, 0.1, 0.2]).unwrap();
        assert_eq!(costless_bound(&single, &w).unwrap(), 0.9);
        assert!(costless_bound(&rho, &w).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let rho = StatePrior::new(vec![0.3, 0.7]).unwrap();
        let gamma = ObservationChannel::new(vec![vec![0.8, 0.15, 0.05], vec![0.1, 0.3, 0.6]]).unwrap();
        let w = PayoffTable::from_fn(2, 2, 3, |a, b, c| (a + 2 * b + c) as f64).unwrap();
        for stages in [1, 3] {
            let opts = SolverOptions { stages, ..SolverOptions::default() };
            let program = Program::new(&rho, &gamma, &w, &opts).unwrap();
            let q: Vec<f64> = (0..12).map(|i| 0.02 + 0.01 * i as f64).collect();
            let total: f64 = q.iter().sum();
            let q: Vec<f64> = q.iter().map(|p| p / total).collect();
            let mut grad = vec![0.0; 12];
            program.constraint_gradient(&q, &mut grad);
            let h = 1e-7;
            for i in 0..12 {
                let mut up = q.clone();
                let mut dn = q.clone();
                up[i] += h;
                dn[i] -= h;
                // Unnormalized perturbation: the constant part of the gradient
                // cancels, so compare against the raw directional derivative.
                let fd = (program.constraint(&up) - program.constraint(&dn)) / (2.0 * h);
                assert!((fd - grad[i]).abs() < 1e-5, "stages {stages} cell {i}: {fd} vs {}", grad[i]);
            }
        }
    }

    #[test]
    fn flat_constraint_matches_distribution_path() {
        let (rho, _, w) = coordination();
        let gamma = ObservationChannel::binary_symmetric(0.2).unwrap();
        let qbar = JointDistribution::from_fn(&[(Var::X0, 2), (Var::X1, 2), (Var::X2, 2)], |c| {
            [0.2, 0.1, 0.15, 0.05, 0.05, 0.1, 0.05, 0.3][c[0] * 4 + c[1] * 2 + c[2]]
        })
        .unwrap();
        let q = compose(&qbar, &gamma).unwrap();
        for stages in [1, 2, 7] {
            let opts = SolverOptions { stages, ..SolverOptions::default() };
            let program = Program::new(&rho, &gamma, &w, &opts).unwrap();
            let flat = program.constraint(qbar.probs());
            assert!((flat - phi_s_stage(&q, stages).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn payoff_independent_of_x2_is_unconstrained() {
        let rho = StatePrior::new(vec![0.2, 0.5, 0.3]).unwrap();
        let gamma = ObservationChannel::binary_symmetric(0.25).unwrap();
        let w = PayoffTable::from_fn(3, 2, 2, |a, b, _| ((a + 1) * (b + 1)) as f64 * if a == 1 { -1.0 } else { 1.0 }).unwrap();
        let r = solve(&rho, &gamma, &w, &SolverOptions::default()).unwrap();
        let expected: f64 = (0..3)
            .map(|x0| rho.probs()[x0] * (0..2).map(|x1| w.get(x0, x1, 0)).fold(f64::NEG_INFINITY, f64::max))
            .sum();
        assert!((r.payoff - expected).abs() < 1e-12);
        assert_eq!(r.lambda, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn coordination_game_solution_is_feasible_and_certified() {
        let (rho, gamma, w) = coordination();
        let opts = SolverOptions::default();
        let r = solve(&rho, &gamma, &w, &opts).unwrap();
        let q = compose(&r.qbar, &gamma).unwrap();
        assert!(phi(&q).unwrap() <= 1e-6);
        assert!(r.duality_gap <= opts.tol_payoff);
        assert!(r.payoff <= r.dual_bound);
        // Optimum of the symmetric two-state coordination game.
        assert!((r.payoff - 0.810_710_375).abs() < 2e-5, "{}", r.payoff);
        let slices = r.qbar.marginal(&[Var::X0]).unwrap();
        for (a, b) in slices.probs().iter().zip(rho.probs()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn margin_enlarges_slack() {
        let (rho, gamma, w) = coordination();
        let opts = SolverOptions { margin: 0.1, ..SolverOptions::default() };
        let r = solve(&rho, &gamma, &w, &opts).unwrap();
        assert!(r.slack >= 0.1 - 1e-9);
        let plain = solve(&rho, &gamma, &w, &SolverOptions::default()).unwrap();
        assert!(r.payoff < plain.payoff);
    }

    #[test]
    fn argument_errors() {
        let (rho, gamma, w) = coordination();
        assert!(matches!(
            solve_s_stage(&rho, &gamma, &w, 0, &SolverOptions::default()),
            Err(Error::Argument(_))
        ));
        let bad = StatePrior::uniform(3).unwrap();
        assert!(matches!(
            solve(&bad, &gamma, &w, &SolverOptions::default()),
            Err(Error::Alphabet(_))
        ));
        assert!(lagrangian_upper_bound(&rho, &gamma, &w, -1.0, &SolverOptions::default()).is_err());
    }

    #[test]
    fn iteration_budget_exhaustion_reports_best_iterate() {
        let (rho, gamma, w) = coordination();
        let opts = SolverOptions { max_outer: 2, max_iter: 3, ..SolverOptions::default() };
        match solve(&rho, &gamma, &w, &opts) {
            Err(Error::NotConverged { best }) => {
                assert!(!best.converged);
                assert!(best.slack >= -1e-9);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
