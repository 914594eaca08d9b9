//! Online evaluation of the regret guarantees.
//!
//! For every round this module reports the Blackwell inner product against its
//! `2U‖Y − Ỹ‖₁` allowance, the running gradient-error sum, the regret-bound
//! envelope for the link in use, and the potential `G(R_t)` against its
//! cumulative allowance `G(0) + Σ_τ C(τ)`.

use std::sync::Arc;

use crate::links::{GordonTriple, LinkFunction};
use crate::matcher::l1_distance;
use crate::odp::{MatchRecord, MixedAction, RewardFunction};
use crate::regret::{expected_regret, instantaneous_regret, CumulativeRegret};
use crate::transforms::TransformationFamily;
use crate::{Error, Result};

/// Absolute slack on the per-step Blackwell inequality.
pub const BLACKWELL_SLACK: f64 = 1e-8;

/// Absolute slack on the seed-averaged potential inequality.
pub const POTENTIAL_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlackwellCheck {
    /// `Y · E_{a∼q}[ρ^Φ(a, r)]`.
    pub lhs: f64,
    /// `2U ‖Y − Ỹ‖₁`.
    pub rhs: f64,
    pub ok: bool,
}

pub fn blackwell_check(
    family: &TransformationFamily,
    weights: &[f64],
    q: &MixedAction,
    reward: &RewardFunction,
    reward_bound: f64,
    estimated_weights: &[f64],
) -> Result<BlackwellCheck> {
    Error::check_len("weights", family.len(), weights.len())?;
    Error::check_len("estimated weights", family.len(), estimated_weights.len())?;
    let expected = expected_regret(family, q, reward)?;
    let lhs = weights.iter().zip(expected.values()).map(|(y, e)| y * e).sum();
    let rhs = 2.0 * reward_bound * l1_distance(weights, estimated_weights);
    Ok(BlackwellCheck {
        lhs,
        rhs,
        ok: lhs <= rhs + BLACKWELL_SLACK,
    })
}

/// Constants shared by every bound for one (link, family, reward bound) setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub link: LinkFunction,
    pub reward_bound: f64,
    /// `μ(Φ)`.
    pub activation: usize,
    /// `|Φ|`.
    pub num_transformations: usize,
}

impl BoundParams {
    pub fn new(link: LinkFunction, family: &TransformationFamily, reward_bound: f64) -> Self {
        Self {
            link,
            reward_bound,
            activation: family.maximal_activation(),
            num_transformations: family.len(),
        }
    }

    pub fn triple(&self) -> GordonTriple {
        self.link.triple()
    }

    /// `sup_{a, r} γ(ρ^Φ(a, r))`.
    pub fn curvature_sup(&self) -> f64 {
        self.triple().curvature_sup(self.reward_bound, self.activation)
    }

    /// `G(0)`.
    pub fn initial_potential(&self) -> f64 {
        self.triple().potential(&vec![0.0; self.num_transformations])
    }

    /// Right-hand side of the regret bound on `E[(1/t) max_φ R^φ_t]`.
    ///
    /// * polynomial, `p > 2`: `(1/t) √(t (p−1) U² μ^{2/p} + 2U Σ)`
    /// * polynomial, `1 < p ≤ 2`: `(1/t) (t U^p μ + 2U Σ)^{1/p}`
    /// * exponential: `(1/t)(ln|Φ|/η + 2U Σ) + η U² / 2`
    ///
    /// `gradient_error_sum` is `Σ_{k≤t} ‖g(R_{k−1}) − g(R̃_{k−1})‖₁`.
    pub fn theorem_rhs(&self, t: usize, gradient_error_sum: f64) -> Result<f64> {
        if t == 0 {
            return Err(Error::invalid("bound", "t must be at least 1"));
        }
        if !(gradient_error_sum >= 0.0) {
            return Err(Error::invalid(
                "bound",
                format!("gradient error sum must be nonnegative, got {gradient_error_sum}"),
            ));
        }
        let t_f = t as f64;
        let u = self.reward_bound;
        let mu = self.activation as f64;
        let err = 2.0 * u * gradient_error_sum;
        Ok(match self.link {
            LinkFunction::Polynomial { p } if p > 2.0 => {
                (t_f * (p - 1.0) * u * u * mu.powf(2.0 / p) + err).sqrt() / t_f
            }
            LinkFunction::Polynomial { p } => (t_f * u.powf(p) * mu + err).powf(1.0 / p) / t_f,
            LinkFunction::Exponential { eta } => {
                ((self.num_transformations as f64).ln() / eta + err) / t_f + 0.5 * eta * u * u
            }
        })
    }
}

pub fn theorem_rhs(
    link: LinkFunction,
    family: &TransformationFamily,
    reward_bound: f64,
    t: usize,
    gradient_error_sum: f64,
) -> Result<f64> {
    BoundParams::new(link, family, reward_bound).theorem_rhs(t, gradient_error_sum)
}

/// Tracks `G(R_t)` against `G(0) + Σ_τ C(τ)` with
/// `C(τ) = 2U ‖g(R_{τ−1}) − g(R̃_{τ−1})‖₁ + sup γ(ρ^Φ)`.
#[derive(Debug, Clone)]
pub struct PotentialMonitor {
    triple: GordonTriple,
    reward_bound: f64,
    curvature_sup: f64,
    bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialReading {
    pub potential: f64,
    pub bound: f64,
    /// Per-trajectory comparison; the guarantee itself is in expectation.
    pub ok: bool,
}

impl PotentialMonitor {
    pub fn new(params: &BoundParams) -> Self {
        Self {
            triple: params.triple(),
            reward_bound: params.reward_bound,
            curvature_sup: params.curvature_sup(),
            bound: params.initial_potential(),
        }
    }

    /// The reading at `t = 0`: `G(0)` against itself.
    pub fn initial(&self, num_transformations: usize) -> PotentialReading {
        let potential = self.triple.potential(&vec![0.0; num_transformations]);
        PotentialReading {
            potential,
            bound: self.bound,
            ok: true,
        }
    }

    /// Advances one round: `gradient_error` is the round's `‖g(R) − g(R̃)‖₁`,
    /// `regret` the exact state after the round.
    pub fn observe(&mut self, gradient_error: f64, regret: &CumulativeRegret) -> PotentialReading {
        self.bound += 2.0 * self.reward_bound * gradient_error + self.curvature_sup;
        let potential = self.triple.potential(regret.values());
        PotentialReading {
            potential,
            bound: self.bound,
            ok: potential <= self.bound + POTENTIAL_SLACK,
        }
    }
}

/// Per-round bound diagnostics; also the row schema of the trace CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub t: usize,
    pub realized_objective: f64,
    pub blackwell_lhs: f64,
    pub blackwell_rhs: f64,
    pub g_error_sum: f64,
    pub theorem_rhs: f64,
    pub potential: f64,
    pub potential_bound: f64,
}

/// Replays match records of a regret-matching learner and derives [`BoundRow`]s.
///
/// Keeps its own exact regret accounting from the sampled actions.
#[derive(Debug, Clone)]
pub struct BoundEvaluator {
    params: BoundParams,
    family: Arc<TransformationFamily>,
    regret: CumulativeRegret,
    g_error_sum: f64,
    monitor: PotentialMonitor,
}

impl BoundEvaluator {
    pub fn new(family: Arc<TransformationFamily>, link: LinkFunction, reward_bound: f64) -> Self {
        let params = BoundParams::new(link, &family, reward_bound);
        Self {
            regret: CumulativeRegret::zeros(family.len()),
            monitor: PotentialMonitor::new(&params),
            params,
            family,
            g_error_sum: 0.0,
        }
    }

    pub fn params(&self) -> &BoundParams {
        &self.params
    }

    pub fn push(&mut self, record: &MatchRecord) -> Result<BoundRow> {
        let trace = record.trace.as_ref().ok_or_else(|| {
            Error::invalid("match record", "bound evaluation needs link traces")
        })?;
        let bw = blackwell_check(
            &self.family,
            &trace.weights,
            &record.q,
            &record.reward,
            self.params.reward_bound,
            &trace.estimated_weights,
        )?;
        self.g_error_sum += trace.gradient_error;
        self.regret
            .accumulate(&instantaneous_regret(&self.family, record.action, &record.reward)?)?;
        let t = self.regret.t();
        let reading = self.monitor.observe(trace.gradient_error, &self.regret);
        Ok(BoundRow {
            t,
            realized_objective: self.regret.realized_objective()?,
            blackwell_lhs: bw.lhs,
            blackwell_rhs: bw.rhs,
            g_error_sum: self.g_error_sum,
            theorem_rhs: self.params.theorem_rhs(t, self.g_error_sum)?,
            potential: reading.potential,
            potential_bound: reading.bound,
        })
    }

    pub fn evaluate(
        family: Arc<TransformationFamily>,
        link: LinkFunction,
        reward_bound: f64,
        records: &[MatchRecord],
    ) -> Result<Vec<BoundRow>> {
        let mut eval = Self::new(family, link, reward_bound);
        records.iter().map(|r| eval.push(r)).collect()
    }
}

/// Averages aligned per-seed rows. The averaged `theorem_rhs` is evaluated at
/// the mean gradient-error sum, every other column is a plain mean.
pub fn seed_average(params: &BoundParams, runs: &[&[BoundRow]]) -> Result<Vec<BoundRow>> {
    let first = runs
        .first()
        .ok_or_else(|| Error::invalid("seed average", "no runs"))?;
    for run in runs {
        Error::check_len("seed run", first.len(), run.len())?;
    }
    let k = runs.len() as f64;
    (0..first.len())
        .map(|i| {
            let mean = |f: fn(&BoundRow) -> f64| runs.iter().map(|r| f(&r[i])).sum::<f64>() / k;
            let t = first[i].t;
            let g_error_sum = mean(|r| r.g_error_sum);
            Ok(BoundRow {
                t,
                realized_objective: mean(|r| r.realized_objective),
                blackwell_lhs: mean(|r| r.blackwell_lhs),
                blackwell_rhs: mean(|r| r.blackwell_rhs),
                g_error_sum,
                theorem_rhs: params.theorem_rhs(t, g_error_sum)?,
                potential: mean(|r| r.potential),
                potential_bound: mean(|r| r.potential_bound),
            })
        })
        .collect()
}
