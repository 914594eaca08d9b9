//! (Φ, f)-regret-matching.
//!
//! Each round the learner maps (estimated) cumulative regrets through the link
//! to weights `Ỹ`, mixes the transformation matrices into the column-stochastic
//! operator `M̃ = Σ_φ Ỹ^φ [φ] / Σ_φ Ỹ^φ`, and plays a fixed point of `M̃`.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::estimators::{Estimator, EstimatorKind};
use crate::links::LinkFunction;
use crate::odp::{rng_for, Decision, Learner, MixedAction, RewardFunction, RewardSystem, Stream};
use crate::regret::{instantaneous_regret, CumulativeRegret};
use crate::transforms::TransformationFamily;
use crate::{Error, Result};

pub const DEFAULT_FIXED_POINT_TOLERANCE: f64 = 1e-10;

/// Lazy-chain mixing weight used by [`power_iteration`].
pub const POWER_DAMPING: f64 = 0.99;

/// Iteration cap for [`power_iteration`].
pub const POWER_ITERATION_CAP: usize = 100_000;

/// Pivots below this are treated as a singular system.
const PIVOT_FLOOR: f64 = 1e-12;

/// Negative solver output down to this magnitude is rounding noise and is clipped.
const NEGATIVE_DUST: f64 = 1e-9;

/// A column-stochastic `|A| × |A|` matrix, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticOperator {
    n: usize,
    matrix: Vec<f64>,
}

impl StochasticOperator {
    /// Validates a column-major matrix.
    pub fn new(n: usize, matrix: Vec<f64>) -> Result<Self> {
        Error::check_len("operator", n * n, matrix.len())?;
        for col in matrix.chunks(n) {
            let sum: f64 = col.iter().sum();
            if col.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("operator", "columns must be distributions"));
            }
        }
        Ok(Self { n, matrix })
    }

    pub fn identity(n: usize) -> Self {
        let mut matrix = vec![0.0; n * n];
        for a in 0..n {
            matrix[a * n + a] = 1.0;
        }
        Self { n, matrix }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Entry in row `to`, column `from`.
    pub fn entry(&self, to: usize, from: usize) -> f64 {
        self.matrix[from * self.n + to]
    }

    pub fn column(&self, from: usize) -> &[f64] {
        &self.matrix[from * self.n..(from + 1) * self.n]
    }

    pub fn apply(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (col, &qa) in self.matrix.chunks(self.n).zip(q) {
            for (o, &m) in out.iter_mut().zip(col) {
                *o += m * qa;
            }
        }
        out
    }

    /// `‖Mq − q‖_∞`.
    pub fn residual(&self, q: &[f64]) -> f64 {
        self.apply(q)
            .iter()
            .zip(q)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Mixes member matrices with nonnegative `weights` normalised to sum to one.
pub fn assemble_operator(
    family: &TransformationFamily,
    weights: &[f64],
) -> Result<StochasticOperator> {
    Error::check_len("weights", family.len(), weights.len())?;
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("weights", "must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::invalid("weights", format!("degenerate weight sum {total}")));
    }
    let n = family.num_actions();
    let mut matrix = vec![0.0; n * n];
    for (phi, &w) in family.members().iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let c = w / total;
        match phi.targets() {
            Some(targets) => {
                for (a, &b) in targets.iter().enumerate() {
                    matrix[a * n + b] += c;
                }
            }
            None => {
                for a in 0..n {
                    for (m, &p) in matrix[a * n..(a + 1) * n].iter_mut().zip(phi.column(a)) {
                        *m += c * p;
                    }
                }
            }
        }
    }
    Ok(StochasticOperator { n, matrix })
}

/// A distribution `q` with `‖Mq − q‖_∞ ≤ tol`.
///
/// Solves `(M − I) q = 0` with the last equation replaced by `Σ q = 1`. When that
/// system is singular the stationary distribution is not unique, and the solver
/// returns the limit of the lazy power iteration started from the uniform
/// distribution, computed in closed form from the chain's closed classes. The
/// identity operator therefore yields the uniform distribution.
pub fn fixed_point(op: &StochasticOperator, tol: f64) -> Result<MixedAction> {
    if let Some(q) = solve_unique(op).filter(|q| op.residual(q) <= tol) {
        return MixedAction::new(q);
    }
    if let Some(q) = solve_by_classes(op).filter(|q| op.residual(q) <= tol) {
        return MixedAction::new(q);
    }
    power_iteration(op, tol, POWER_ITERATION_CAP)
}

/// Lazy power iteration `q ← (1 − d) q + d M q` from the uniform distribution.
pub fn power_iteration(op: &StochasticOperator, tol: f64, max_iter: usize) -> Result<MixedAction> {
    let n = op.n;
    let mut q = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    for iter in 0..max_iter {
        let mq = op.apply(&q);
        residual = mq.iter().zip(&q).fold(0.0, |m, (a, b)| m.max((a - b).abs()));
        // keep iterating well past `tol` so both solvers agree to rounding
        if residual <= (tol * 1e-4).max(1e-15) || (iter + 1 == max_iter && residual <= tol) {
            return MixedAction::new(normalise(q)?);
        }
        for (qi, mi) in q.iter_mut().zip(&mq) {
            *qi = (1.0 - POWER_DAMPING) * *qi + POWER_DAMPING * mi;
        }
        let s: f64 = q.iter().sum();
        q.iter_mut().for_each(|v| *v /= s);
    }
    if residual <= tol {
        return MixedAction::new(normalise(q)?);
    }
    Err(Error::Solver {
        residual,
        iterations: max_iter,
    })
}

fn normalise(mut q: Vec<f64>) -> Result<Vec<f64>> {
    for v in q.iter_mut() {
        if *v < 0.0 {
            if *v < -NEGATIVE_DUST {
                return Err(Error::invalid("fixed point", format!("negative mass {v}")));
            }
            *v = 0.0;
        }
    }
    let s: f64 = q.iter().sum();
    if !(s > 0.0) {
        return Err(Error::invalid("fixed point", "no mass"));
    }
    q.iter_mut().for_each(|v| *v /= s);
    Ok(q)
}

/// Stationary distribution of the sub-chain on `states` (which must be closed
/// under `op`), or `None` if that system is singular.
fn stationary_on(op: &StochasticOperator, states: &[usize]) -> Option<Vec<f64>> {
    let k = states.len();
    // row-major k × k system: rows are (M − I) restricted, last row all ones
    let mut a = vec![0.0; k * k];
    for (i, &to) in states.iter().enumerate().take(k - 1) {
        for (j, &from) in states.iter().enumerate() {
            a[i * k + j] = op.entry(to, from) - if i == j { 1.0 } else { 0.0 };
        }
    }
    a[(k - 1) * k..].iter_mut().for_each(|v| *v = 1.0);
    let mut b = vec![0.0; k];
    b[k - 1] = 1.0;
    lu_solve(&mut a, &mut b, k)?;
    normalise(b).ok()
}

fn solve_unique(op: &StochasticOperator) -> Option<Vec<f64>> {
    let all: Vec<usize> = (0..op.n).collect();
    stationary_on(op, &all)
}

/// Exact limit of the lazy power iteration from uniform: each closed class `C`
/// receives the uniform mass absorbed into it, spread by its stationary law.
fn solve_by_classes(op: &StochasticOperator) -> Option<Vec<f64>> {
    let n = op.n;
    let mut reach = vec![false; n * n];
    for from in 0..n {
        reach[from * n + from] = true;
        for to in 0..n {
            if op.entry(to, from) > 0.0 {
                reach[from * n + to] = true;
            }
        }
    }
    for mid in 0..n {
        for from in 0..n {
            if reach[from * n + mid] {
                for to in 0..n {
                    if reach[mid * n + to] {
                        reach[from * n + to] = true;
                    }
                }
            }
        }
    }
    let recurrent: Vec<bool> = (0..n)
        .map(|a| (0..n).all(|b| !reach[a * n + b] || reach[b * n + a]))
        .collect();
    let mut class_of = vec![usize::MAX; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for a in (0..n).filter(|&a| recurrent[a]) {
        if class_of[a] != usize::MAX {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&b| reach[a * n + b]).collect();
        for &b in &members {
            class_of[b] = classes.len();
        }
        classes.push(members);
    }
    let transient: Vec<usize> = (0..n).filter(|&a| !recurrent[a]).collect();
    let start = 1.0 / n as f64;
    let mut q = vec![0.0; n];
    for members in &classes {
        let pi = stationary_on(op, members)?;
        let mut mass = start * members.len() as f64;
        if !transient.is_empty() {
            // absorption into c from each transient state: x = Q^T x + (mass moved straight into c)
            let k = transient.len();
            let mut a = vec![0.0; k * k];
            let mut rhs = vec![0.0; k];
            for (i, &s) in transient.iter().enumerate() {
                for (j, &t) in transient.iter().enumerate() {
                    a[i * k + j] = if i == j { 1.0 } else { 0.0 } - op.entry(t, s);
                }
                rhs[i] = members.iter().map(|&b| op.entry(b, s)).sum();
            }
            lu_solve(&mut a, &mut rhs, k)?;
            mass += start * rhs.iter().sum::<f64>();
        }
        for (&b, &p) in members.iter().zip(&pi) {
            q[b] += mass * p;
        }
    }
    normalise(q).ok()
}

/// Gaussian elimination with partial pivoting on a row-major `k × k` system.
/// Leaves the solution in `b`.
fn lu_solve(a: &mut [f64], b: &mut [f64], k: usize) -> Option<()> {
    for col in 0..k {
        let pivot_row = (col..k).max_by(|&i, &j| a[i * k + col].abs().total_cmp(&a[j * k + col].abs()))?;
        if a[pivot_row * k + col].abs() < PIVOT_FLOOR {
            return None;
        }
        if pivot_row != col {
            for j in 0..k {
                a.swap(col * k + j, pivot_row * k + j);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * k + col];
        for row in col + 1..k {
            let factor = a[row * k + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..k {
                a[row * k + j] -= factor * a[col * k + j];
            }
            b[row] -= factor * b[col];
        }
    }
    for row in (0..k).rev() {
        let tail: f64 = (row + 1..k).map(|j| a[row * k + j] * b[j]).sum();
        b[row] = (b[row] - tail) / a[row * k + row];
    }
    b.iter().all(|v| v.is_finite()).then_some(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatcherConfig {
    pub family: Arc<TransformationFamily>,
    pub link: LinkFunction,
    pub estimator: EstimatorKind,
    pub fixed_point_tolerance: f64,
}

impl MatcherConfig {
    /// Exact estimates and the default solver tolerance.
    pub fn new(family: impl Into<Arc<TransformationFamily>>, link: LinkFunction) -> Self {
        Self {
            family: family.into(),
            link,
            estimator: EstimatorKind::Exact,
            fixed_point_tolerance: DEFAULT_FIXED_POINT_TOLERANCE,
        }
    }

    pub fn with_estimator(mut self, estimator: EstimatorKind) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol <= 1e-4) {
            return Err(Error::invalid(
                "fixed point tolerance",
                format!("must lie in (0, 1e-4], got {tol}"),
            ));
        }
        self.fixed_point_tolerance = tol;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fixed_point_tolerance > 0.0 && self.fixed_point_tolerance <= 1e-4) {
            return Err(Error::invalid("fixed point tolerance", "must lie in (0, 1e-4]"));
        }
        self.estimator.validate(self.family.len())
    }
}

/// Per-round diagnostics of a matcher.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    /// `Y_t = f(R_{t−1})`.
    pub weights: Vec<f64>,
    /// `Ỹ_t = f(R̃_{t−1})`.
    pub estimated_weights: Vec<f64>,
    /// `‖Y_t − Ỹ_t‖₁`.
    pub link_error: f64,
    /// `‖g(R_{t−1}) − g(R̃_{t−1})‖₁` with `g` from the link's Gordon triple.
    pub gradient_error: f64,
    /// True when `Σ Ỹ = 0` and the uniform distribution was played.
    pub degenerate: bool,
    /// `‖M̃q − q‖_∞`, absent for degenerate rounds.
    pub residual: Option<f64>,
}

/// One round of approximate (Φ, f)-regret-matching.
pub fn step(
    config: &MatcherConfig,
    exact: &CumulativeRegret,
    estimated: &CumulativeRegret,
) -> Result<(MixedAction, StepTrace)> {
    let family = &config.family;
    Error::check_len("exact regret", family.len(), exact.len())?;
    Error::check_len("estimated regret", family.len(), estimated.len())?;
    if exact.t() != estimated.t() {
        return Err(Error::invalid(
            "regret states",
            format!("exact at t={} but estimate at t={}", exact.t(), estimated.t()),
        ));
    }
    let weights = config.link.apply(exact.values());
    let estimated_weights = config.link.apply(estimated.values());
    let triple = config.link.triple();
    let gradient_error = l1_distance(
        &triple.gradient(exact.values()),
        &triple.gradient(estimated.values()),
    );
    let link_error = l1_distance(&weights, &estimated_weights);
    let total: f64 = estimated_weights.iter().sum();
    let (q, residual) = if total > 0.0 {
        let op = assemble_operator(family, &estimated_weights)?;
        let q = fixed_point(&op, config.fixed_point_tolerance)?;
        let r = op.residual(q.probs());
        (q, Some(r))
    } else {
        (MixedAction::uniform(family.num_actions()), None)
    };
    Ok((
        q,
        StepTrace {
            weights,
            estimated_weights,
            link_error,
            gradient_error,
            degenerate: residual.is_none(),
            residual,
        },
    ))
}

pub(crate) fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// A regret-matching learner: tracks exact regrets, plays from estimates.
#[derive(Debug, Clone)]
pub struct Matcher {
    system: RewardSystem,
    config: MatcherConfig,
    exact: CumulativeRegret,
    estimator: Estimator,
}

impl Matcher {
    /// The estimator draws from the `Estimator` stream of `seed`.
    pub fn new(system: RewardSystem, config: MatcherConfig, seed: u64) -> Result<Self> {
        Self::with_rng(system, config, rng_for(seed, Stream::Estimator))
    }

    pub fn with_rng(system: RewardSystem, config: MatcherConfig, rng: ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        Error::check_len("family", system.num_actions(), config.family.num_actions())?;
        let estimator = config.estimator.build(&config.family, rng)?;
        Ok(Self {
            system,
            exact: CumulativeRegret::zeros(config.family.len()),
            config,
            estimator,
        })
    }

    pub fn config(&self) -> &MatcherConfig {
        &self.config
    }

    pub fn exact_regret(&self) -> &CumulativeRegret {
        &self.exact
    }
}

impl Learner for Matcher {
    fn system(&self) -> &RewardSystem {
        &self.system
    }

    fn decide(&mut self) -> Result<Decision> {
        let estimated = self.estimator.estimate(&self.exact);
        let (q, trace) = step(&self.config, &self.exact, &estimated)?;
        Ok(Decision {
            q,
            trace: Some(trace),
        })
    }

    fn observe(&mut self, action: usize, reward: &RewardFunction) -> Result<()> {
        let inst = instantaneous_regret(&self.config.family, action, reward)?;
        self.exact.accumulate(&inst)
    }
}
