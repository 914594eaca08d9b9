//! Exact and approximate (Φ, f)-regret-matching over online decision problems.
//!
//! The crate is organised bottom-up:
//!
//! * [`odp`]: reward systems, mixed actions, histories and the online loop.
//! * [`transforms`]: action transformations and the external / internal / swap families.
//! * [`regret`]: instantaneous and cumulative Φ-regret.
//! * [`links`]: polynomial and exponential link functions with their Gordon triples.
//! * [`matcher`]: the regret-matching learner, which plays the fixed point of a
//!   weight-mixture of transformation matrices.
//! * [`estimators`]: producers of estimated regrets (exact, noisy, quantized, linear).
//! * [`bounds`]: online evaluation of the Blackwell condition, the regret-bound
//!   envelopes and the potential recursion.
//! * [`arena`]: adversaries, two-player matrix games, self-play and
//!   correlated-equilibrium diagnostics.
//! * [`experiment`]: multi-seed runs, parallel over seeds when the `parallel`
//!   feature is enabled.
//!
//! ```
//! use phi_regret::prelude::*;
//!
//! let system = RewardSystem::new(3, 1.0).unwrap();
//! let family = TransformationFamily::build(FamilyKind::External, 3).unwrap();
//! let config = MatcherConfig::new(family, LinkFunction::polynomial(2.0).unwrap());
//! let mut learner = Matcher::new(system, config, 7).unwrap();
//! let mut adversary = AdversaryKind::AdaptiveBestResponse.build(&system, 7).unwrap();
//! let records = run_odp(&mut learner, adversary.as_mut(), 100, &mut rng_for(7, Stream::Learner)).unwrap();
//! assert_eq!(records.len(), 100);
//! ```

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arena;
pub mod bounds;
mod error;
pub mod estimators;
pub mod experiment;
pub mod links;
pub mod matcher;
pub mod odp;
pub mod regret;
pub mod transforms;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::arena::{ce_gap, self_play, AdversaryKind, JointEmpirical, MatrixGame};
    pub use crate::bounds::{blackwell_check, theorem_rhs, BoundEvaluator, BoundParams, BoundRow};
    pub use crate::estimators::{EstimatorKind, FeatureMap};
    pub use crate::experiment::OdpExperiment;
    pub use crate::links::{GordonTriple, LinkFunction};
    pub use crate::matcher::{Matcher, MatcherConfig};
    pub use crate::odp::{rng_for, run_odp, Adversary, Learner, MixedAction, RewardFunction, RewardSystem, Stream};
    pub use crate::regret::{CumulativeRegret, RegretVector};
    pub use crate::transforms::{FamilyKind, Transformation, TransformationFamily};
    pub use crate::{Error, Result};
}
