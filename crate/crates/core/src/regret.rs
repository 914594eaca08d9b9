//! Φ-regret: instantaneous vectors, their expectation under a mixed action, and
//! cumulative accounting over sampled actions.

use crate::odp::{MixedAction, RewardFunction};
use crate::transforms::TransformationFamily;
use crate::{Error, Result};

/// One regret entry per member of Φ, in family order.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretVector(Vec<f64>);

impl RegretVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self, p: f64) -> f64 {
        lp_norm(&self.0, p)
    }
}

pub(crate) fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        x.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `ρ^φ(a, r) = E_{s∼φ(a)}[r(s)] − r(a)` for every `φ ∈ Φ`.
pub fn instantaneous_regret(
    family: &TransformationFamily,
    action: usize,
    reward: &RewardFunction,
) -> Result<RegretVector> {
    let n = family.num_actions();
    Error::check_len("reward function", n, reward.len())?;
    if action >= n {
        return Err(Error::invalid(
            "action",
            format!("{action} out of range for {n} actions"),
        ));
    }
    let r = reward.values();
    Ok(RegretVector(
        family
            .members()
            .iter()
            .map(|phi| phi.expected_value(action, r) - r[action])
            .collect(),
    ))
}

/// `E_{a∼q}[ρ^Φ(a, r)]`, computed exactly.
pub fn expected_regret(
    family: &TransformationFamily,
    q: &MixedAction,
    reward: &RewardFunction,
) -> Result<RegretVector> {
    let n = family.num_actions();
    Error::check_len("mixed action", n, q.len())?;
    Error::check_len("reward function", n, reward.len())?;
    let r = reward.values();
    let baseline: f64 = q.probs().iter().zip(r).map(|(p, v)| p * v).sum();
    Ok(RegretVector(
        family
            .members()
            .iter()
            .map(|phi| {
                let deviated: f64 = q
                    .probs()
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p != 0.0)
                    .map(|(a, &p)| p * phi.expected_value(a, r))
                    .sum();
                deviated - baseline
            })
            .collect(),
    ))
}

/// `R^Φ_t`, the running sum of instantaneous regret vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeRegret {
    values: Vec<f64>,
    t: usize,
}

impl CumulativeRegret {
    /// `R^Φ_0 = 0`.
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
            t: 0,
        }
    }

    /// An arbitrary state, e.g. an estimate of the true regrets at step `t`.
    pub fn from_parts(values: Vec<f64>, t: usize) -> Self {
        Self { values, t }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn accumulate(&mut self, inst: &RegretVector) -> Result<()> {
        Error::check_len("regret vector", self.values.len(), inst.len())?;
        for (acc, v) in self.values.iter_mut().zip(inst.values()) {
            *acc += v;
        }
        self.t += 1;
        Ok(())
    }

    /// `(1/t) max_φ R^φ_t` for this trajectory. Undefined at `t = 0`.
    pub fn realized_objective(&self) -> Result<f64> {
        if self.t == 0 {
            return Err(Error::invalid("realized objective", "undefined at t = 0"));
        }
        let max = self
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(max / self.t as f64)
    }
}
