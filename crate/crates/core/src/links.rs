//! Link functions and their Gordon triples.
//!
//! A link `f` turns cumulative regrets into nonnegative transformation weights.
//! Each link comes with a Gordon triple `⟨G, g, γ⟩` satisfying
//! `G(x + y) ≤ G(x) + g(x)·y + γ(y)`, where `g` is a positive rescaling of `f`
//! and therefore induces the same played fixed point.

use std::fmt;

use crate::{Error, Result};

/// Slack used by [`check_gordon`].
pub const GORDON_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkFunction {
    /// `f(x)_i = (x_i⁺)^{p−1}`, `p > 1`.
    Polynomial { p: f64 },
    /// `f(x)_i = e^{η x_i}`, `η > 0`.
    Exponential { eta: f64 },
}

impl LinkFunction {
    pub fn polynomial(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::invalid("link", format!("polynomial p must exceed 1, got {p}")));
        }
        Ok(LinkFunction::Polynomial { p })
    }

    pub fn exponential(eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::invalid("link", format!("exponential eta must be positive, got {eta}")));
        }
        Ok(LinkFunction::Exponential { eta })
    }

    /// Applies the link elementwise.
    ///
    /// The exponential link returns `e^{η x_i}` when every `x_i ≤ 0`; otherwise
    /// all outputs are scaled by the common factor `e^{−η max x}`, so the largest
    /// weight is 1. Played strategies only depend on weights up to scale.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            LinkFunction::Polynomial { p } => x.iter().map(|&v| positive_pow(v, p - 1.0)).collect(),
            LinkFunction::Exponential { eta } => {
                let top = x.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(eta * v));
                let shift = top.max(0.0);
                x.iter().map(|&v| (eta * v - shift).exp()).collect()
            }
        }
    }

    /// The Gordon triple used for this link's regret bound.
    ///
    /// Polynomial links split at `p = 2`: `p > 2` uses the squared p-norm
    /// potential, `1 < p ≤ 2` the p-th power potential.
    pub fn triple(&self) -> GordonTriple {
        match *self {
            LinkFunction::Polynomial { p } if p > 2.0 => GordonTriple::SquaredNorm { p },
            LinkFunction::Polynomial { p } => GordonTriple::PowerNorm { p },
            LinkFunction::Exponential { eta } => GordonTriple::LogSumExp { eta },
        }
    }
}

impl fmt::Display for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkFunction::Polynomial { p } => write!(f, "polynomial(p={p})"),
            LinkFunction::Exponential { eta } => write!(f, "exponential(eta={eta})"),
        }
    }
}

fn positive_pow(v: f64, e: f64) -> f64 {
    if v > 0.0 {
        v.powf(e)
    } else {
        0.0
    }
}

fn positive_norm(x: &[f64], p: f64) -> f64 {
    x.iter().map(|&v| positive_pow(v, p)).sum::<f64>().powf(1.0 / p)
}

/// `⟨G, g, γ⟩` for one of the shipped link families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GordonTriple {
    /// `G(x) = ‖x⁺‖²_p`, `g(x)_i = 2 (x_i⁺)^{p−1} / ‖x⁺‖_p^{p−2}`, `γ(y) = (p−1)‖y‖²_p`; for `p > 2`.
    SquaredNorm { p: f64 },
    /// `G(x) = ‖x⁺‖^p_p`, `g(x)_i = p (x_i⁺)^{p−1}`, `γ(y) = ‖y‖^p_p`; for `1 < p ≤ 2`.
    PowerNorm { p: f64 },
    /// `G(x) = (1/η) ln Σ e^{η x_i}`, `g = softmax(ηx)`, `γ(y) = (η/2)‖y‖²_∞`.
    LogSumExp { eta: f64 },
}

impl GordonTriple {
    /// The potential `G`.
    pub fn potential(&self, x: &[f64]) -> f64 {
        match *self {
            GordonTriple::SquaredNorm { p } => positive_norm(x, p).powi(2),
            GordonTriple::PowerNorm { p } => x.iter().map(|&v| positive_pow(v, p)).sum(),
            GordonTriple::LogSumExp { eta } => {
                let top = x.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let sum: f64 = x.iter().map(|&v| (eta * (v - top)).exp()).sum();
                top + sum.ln() / eta
            }
        }
    }

    /// The map `g`; always elementwise nonnegative.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            GordonTriple::SquaredNorm { p } => {
                let norm = positive_norm(x, p);
                if norm == 0.0 {
                    return vec![0.0; x.len()];
                }
                let scale = 2.0 / norm.powf(p - 2.0);
                x.iter().map(|&v| scale * positive_pow(v, p - 1.0)).collect()
            }
            GordonTriple::PowerNorm { p } => x.iter().map(|&v| p * positive_pow(v, p - 1.0)).collect(),
            GordonTriple::LogSumExp { eta } => {
                let top = x.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let w: Vec<f64> = x.iter().map(|&v| (eta * (v - top)).exp()).collect();
                let total: f64 = w.iter().sum();
                w.into_iter().map(|v| v / total).collect()
            }
        }
    }

    /// The curvature term `γ`.
    pub fn curvature(&self, y: &[f64]) -> f64 {
        match *self {
            GordonTriple::SquaredNorm { p } => (p - 1.0) * crate::regret::lp_norm(y, p).powi(2),
            GordonTriple::PowerNorm { p } => y.iter().map(|v| v.abs().powf(p)).sum(),
            GordonTriple::LogSumExp { eta } => {
                let m = crate::regret::lp_norm(y, f64::INFINITY);
                0.5 * eta * m * m
            }
        }
    }

    /// Upper bound on `γ(ρ^Φ(a, r))` over all actions and reward functions, given
    /// `‖ρ^Φ‖_p ≤ U μ(Φ)^{1/p}` and `‖ρ^Φ‖_∞ ≤ U`.
    pub fn curvature_sup(&self, reward_bound: f64, activation: usize) -> f64 {
        let u = reward_bound;
        let mu = activation as f64;
        match *self {
            GordonTriple::SquaredNorm { p } => (p - 1.0) * u * u * mu.powf(2.0 / p),
            GordonTriple::PowerNorm { p } => u.powf(p) * mu,
            GordonTriple::LogSumExp { eta } => 0.5 * eta * u * u,
        }
    }
}

/// Whether `G(x + y) ≤ G(x) + g(x)·y + γ(y)` holds up to [`GORDON_SLACK`].
pub fn check_gordon(triple: &GordonTriple, x: &[f64], y: &[f64]) -> bool {
    let shifted: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    let lhs = triple.potential(&shifted);
    let linear: f64 = triple.gradient(x).iter().zip(y).map(|(g, v)| g * v).sum();
    lhs <= triple.potential(x) + linear + triple.curvature(y) + GORDON_SLACK
}
