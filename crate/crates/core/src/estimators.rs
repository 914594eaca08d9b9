//! Producers of estimated cumulative regrets `R̃`.
//!
//! These stand in for a function approximator: the matcher plays from the
//! estimate while exact regrets are tracked alongside for the bounds.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::regret::CumulativeRegret;
use crate::transforms::TransformationFamily;
use crate::{Error, Result};

/// Feature vectors for the linear estimator, one per transformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMap {
    /// Identity features: the linear model can represent any regret vector.
    OneHot,
    /// Random ±1/√k features of dimension `rank`; with `rank < |Φ|` the model
    /// cannot fit arbitrary regrets.
    RandomProjection { rank: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorKind {
    Exact,
    /// Adds independent uniform noise on `[−scale, scale]` to every entry.
    Noisy { scale: f64 },
    /// Rounds every entry to the nearest multiple of `step`.
    Quantized { step: f64 },
    /// Online least squares: one normalised gradient step per round toward the
    /// exact regrets, then predicts from the features.
    Linear {
        features: FeatureMap,
        learning_rate: f64,
    },
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Exact => "exact",
            EstimatorKind::Noisy { .. } => "noisy",
            EstimatorKind::Quantized { .. } => "quantized",
            EstimatorKind::Linear { .. } => "linear",
        }
    }

    pub fn validate(&self, num_transformations: usize) -> Result<()> {
        match *self {
            EstimatorKind::Exact => Ok(()),
            EstimatorKind::Noisy { scale } if scale.is_finite() && scale >= 0.0 => Ok(()),
            EstimatorKind::Noisy { scale } => Err(Error::invalid(
                "estimator",
                format!("noise scale must be finite and nonnegative, got {scale}"),
            )),
            EstimatorKind::Quantized { step } if step.is_finite() && step > 0.0 => Ok(()),
            EstimatorKind::Quantized { step } => Err(Error::invalid(
                "estimator",
                format!("quantization step must be positive, got {step}"),
            )),
            EstimatorKind::Linear {
                features,
                learning_rate,
            } => {
                if !(learning_rate > 0.0 && learning_rate < 2.0) {
                    return Err(Error::invalid(
                        "estimator",
                        format!("learning rate must lie in (0, 2), got {learning_rate}"),
                    ));
                }
                match features {
                    FeatureMap::RandomProjection { rank } if rank == 0 || rank > num_transformations => {
                        Err(Error::invalid(
                            "estimator",
                            format!("projection rank must lie in 1..={num_transformations}, got {rank}"),
                        ))
                    }
                    _ => Ok(()),
                }
            }
        }
    }

    /// Instantiates the estimator for `family`, drawing any randomness from `rng`.
    pub fn build(&self, family: &TransformationFamily, rng: ChaCha8Rng) -> Result<Estimator> {
        self.validate(family.len())?;
        let state = match *self {
            EstimatorKind::Exact => State::Exact,
            EstimatorKind::Noisy { scale } => State::Noisy { scale, rng: Box::new(rng) },
            EstimatorKind::Quantized { step } => State::Quantized { step },
            EstimatorKind::Linear {
                features,
                learning_rate,
            } => State::Linear(LinearModel::new(features, learning_rate, family.len(), rng)),
        };
        Ok(Estimator { state })
    }
}

/// A live estimator; stateful for the noisy and linear kinds.
#[derive(Debug, Clone)]
pub struct Estimator {
    state: State,
}

#[derive(Debug, Clone)]
enum State {
    Exact,
    Noisy { scale: f64, rng: Box<ChaCha8Rng> },
    Quantized { step: f64 },
    Linear(LinearModel),
}

impl Estimator {
    /// `R̃` for the current exact regrets. Call once per round.
    pub fn estimate(&mut self, exact: &CumulativeRegret) -> CumulativeRegret {
        let values = match &mut self.state {
            State::Exact => exact.values().to_vec(),
            State::Noisy { scale, rng } => {
                let scale = *scale;
                exact
                    .values()
                    .iter()
                    .map(|&v| {
                        let u: f64 = rng.random();
                        v + scale * (2.0 * u - 1.0)
                    })
                    .collect()
            }
            State::Quantized { step } => exact
                .values()
                .iter()
                .map(|&v| *step * (v / *step).round())
                .collect(),
            State::Linear(model) => model.fit_and_predict(exact.values()),
        };
        CumulativeRegret::from_parts(values, exact.t())
    }
}

#[derive(Debug, Clone)]
struct LinearModel {
    /// Row-major `|Φ| × rank`.
    features: Vec<f64>,
    rank: usize,
    weights: Vec<f64>,
    step_size: f64,
}

impl LinearModel {
    fn new(map: FeatureMap, learning_rate: f64, len: usize, mut rng: ChaCha8Rng) -> Self {
        let (features, rank, lipschitz) = match map {
            FeatureMap::OneHot => {
                let mut f = vec![0.0; len * len];
                for i in 0..len {
                    f[i * len + i] = 1.0;
                }
                (f, len, 1.0)
            }
            FeatureMap::RandomProjection { rank } => {
                let scale = 1.0 / (rank as f64).sqrt();
                let f = (0..len * rank)
                    .map(|_| if rng.random::<bool>() { scale } else { -scale })
                    .collect::<Vec<f64>>();
                let lipschitz = gram_spectral_norm(&f, len, rank);
                (f, rank, lipschitz)
            }
        };
        Self {
            features,
            rank,
            weights: vec![0.0; rank],
            step_size: learning_rate / lipschitz,
        }
    }

    fn predict(&self) -> Vec<f64> {
        self.features
            .chunks(self.rank)
            .map(|row| row.iter().zip(&self.weights).map(|(x, w)| x * w).sum())
            .collect()
    }

    fn fit_and_predict(&mut self, target: &[f64]) -> Vec<f64> {
        let residual: Vec<f64> = self.predict().iter().zip(target).map(|(p, t)| p - t).collect();
        for (row, e) in self.features.chunks(self.rank).zip(&residual) {
            for (w, x) in self.weights.iter_mut().zip(row) {
                *w -= self.step_size * e * x;
            }
        }
        self.predict()
    }
}

/// Largest eigenvalue of `XᵀX`, by power iteration on the small `rank × rank` Gram matrix.
fn gram_spectral_norm(features: &[f64], len: usize, rank: usize) -> f64 {
    let mut gram = vec![0.0; rank * rank];
    for row in features.chunks(rank).take(len) {
        for i in 0..rank {
            for j in 0..rank {
                gram[i * rank + j] += row[i] * row[j];
            }
        }
    }
    let mut v = vec![1.0 / (rank as f64).sqrt(); rank];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = gram
            .chunks(rank)
            .map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum())
            .collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 1.0;
        }
        let next = norm;
        v = w.into_iter().map(|x| x / norm).collect();
        if (next - lambda).abs() <= 1e-12 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    // a slight overestimate keeps the step strictly inside the stable range
    lambda * 1.01
}
