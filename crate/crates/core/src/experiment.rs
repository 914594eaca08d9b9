//! Multi-seed experiments.
//!
//! Seeds are independent runs and are the unit of parallelism: with the
//! `parallel` feature they are spread over the rayon pool, otherwise (or via
//! the `_sequential` entry points) they run one after another. Results always
//! come back in seed order, and every run derives its random streams from its
//! own seed, so output does not depend on scheduling.

use crate::arena::AdversaryKind;
use crate::bounds::{seed_average, BoundEvaluator, BoundParams, BoundRow, BLACKWELL_SLACK, POTENTIAL_SLACK};
use crate::matcher::{Matcher, MatcherConfig};
use crate::odp::{rng_for, run_odp_with, MatchRecord, RewardSystem, Stream};
use crate::Result;

/// Absolute slack on the seed-averaged bound domination check.
pub const DOMINATION_SLACK: f64 = 1e-8;

/// Applies `f` to every seed, in parallel when the `parallel` feature is on.
pub fn map_seeds<T, F>(seeds: &[u64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        seeds.par_iter().map(|&s| f(s)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_seeds_sequential(seeds, f)
    }
}

pub fn map_seeds_sequential<T, F: Fn(u64) -> T>(seeds: &[u64], f: F) -> Vec<T> {
    seeds.iter().map(|&s| f(s)).collect()
}

/// A regret matcher against a built-in adversary.
#[derive(Debug, Clone, PartialEq)]
pub struct OdpExperiment {
    pub system: RewardSystem,
    pub matcher: MatcherConfig,
    pub adversary: AdversaryKind,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub rows: Vec<BoundRow>,
    /// Empty unless records were requested.
    pub records: Vec<MatchRecord>,
}

impl OdpExperiment {
    pub fn bound_params(&self) -> BoundParams {
        BoundParams::new(self.matcher.link, &self.matcher.family, self.system.reward_bound())
    }

    pub fn run_seed(&self, seed: u64, keep_records: bool) -> Result<SeedRun> {
        let mut learner = Matcher::new(self.system, self.matcher.clone(), seed)?;
        let mut adversary = self.adversary.build(&self.system, seed)?;
        let mut eval = BoundEvaluator::new(
            self.matcher.family.clone(),
            self.matcher.link,
            self.system.reward_bound(),
        );
        let mut rows = Vec::with_capacity(self.horizon);
        let mut records = Vec::new();
        run_odp_with(
            &mut learner,
            adversary.as_mut(),
            self.horizon,
            &mut rng_for(seed, Stream::Learner),
            |rec| {
                rows.push(eval.push(&rec)?);
                if keep_records {
                    records.push(rec);
                }
                Ok(())
            },
        )?;
        Ok(SeedRun { seed, rows, records })
    }

    pub fn run_seeds(&self, seeds: &[u64], keep_records: bool) -> Result<Vec<SeedRun>> {
        map_seeds(seeds, |s| self.run_seed(s, keep_records))
            .into_iter()
            .collect()
    }

    pub fn run_seeds_sequential(&self, seeds: &[u64], keep_records: bool) -> Result<Vec<SeedRun>> {
        map_seeds_sequential(seeds, |s| self.run_seed(s, keep_records))
            .into_iter()
            .collect()
    }

    pub fn average(&self, runs: &[SeedRun]) -> Result<Vec<BoundRow>> {
        let slices: Vec<&[BoundRow]> = runs.iter().map(|r| r.rows.as_slice()).collect();
        seed_average(&self.bound_params(), &slices)
    }
}

/// The first failure of each guarantee, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    /// Per-step Blackwell inequality in one seed.
    Blackwell { seed: u64, t: usize, lhs: f64, rhs: f64 },
    /// Seed-averaged objective above the regret envelope.
    Domination { t: usize, objective: f64, rhs: f64 },
    /// Seed-averaged potential above its allowance.
    Potential { t: usize, potential: f64, bound: f64 },
}

pub fn certify(per_seed: &[(u64, &[BoundRow])], averaged: &[BoundRow]) -> Vec<Violation> {
    let mut out = Vec::new();
    if let Some(v) = per_seed.iter().find_map(|(seed, rows)| {
        rows.iter()
            .find(|r| !(r.blackwell_lhs <= r.blackwell_rhs + BLACKWELL_SLACK))
            .map(|r| Violation::Blackwell {
                seed: *seed,
                t: r.t,
                lhs: r.blackwell_lhs,
                rhs: r.blackwell_rhs,
            })
    }) {
        out.push(v);
    }
    if let Some(r) = averaged
        .iter()
        .find(|r| !(r.realized_objective <= r.theorem_rhs + DOMINATION_SLACK))
    {
        out.push(Violation::Domination {
            t: r.t,
            objective: r.realized_objective,
            rhs: r.theorem_rhs,
        });
    }
    if let Some(r) = averaged
        .iter()
        .find(|r| !(r.potential <= r.potential_bound + POTENTIAL_SLACK))
    {
        out.push(Violation::Potential {
            t: r.t,
            potential: r.potential,
            bound: r.potential_bound,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::links::LinkFunction;
    use crate::transforms::{FamilyKind, TransformationFamily};

    fn experiment() -> OdpExperiment {
        OdpExperiment {
            system: RewardSystem::new(3, 1.0).unwrap(),
            matcher: MatcherConfig::new(
                TransformationFamily::build(FamilyKind::External, 3).unwrap(),
                LinkFunction::polynomial(2.0).unwrap(),
            ),
            adversary: AdversaryKind::AdaptiveBestResponse,
            horizon: 200,
        }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let exp = experiment();
        let seeds: Vec<u64> = (0..6).collect();
        assert_eq!(
            exp.run_seeds(&seeds, true).unwrap(),
            exp.run_seeds_sequential(&seeds, true).unwrap()
        );
    }

    #[test]
    fn records_optional() {
        let exp = experiment();
        assert!(exp.run_seed(1, false).unwrap().records.is_empty());
        assert_eq!(exp.run_seed(1, true).unwrap().records.len(), 200);
    }

    #[test]
    fn exact_run_certifies() {
        let exp = experiment();
        let runs = exp.run_seeds(&[0, 1, 2, 3], false).unwrap();
        let avg = exp.average(&runs).unwrap();
        let per_seed: Vec<_> = runs.iter().map(|r| (r.seed, r.rows.as_slice())).collect();
        assert!(certify(&per_seed, &avg).is_empty());
    }

    #[test]
    fn certify_reports_first_violations() {
        let row = |t, lhs, obj| BoundRow {
            t,
            realized_objective: obj,
            blackwell_lhs: lhs,
            blackwell_rhs: 0.0,
            g_error_sum: 0.0,
            theorem_rhs: 1.0,
            potential: 0.0,
            potential_bound: 0.0,
        };
        let rows = [row(1, 0.0, 0.5), row(2, 1.0, 2.0), row(3, 1.0, 2.0)];
        let v = certify(&[(9, &rows)], &rows);
        assert_eq!(
            v,
            vec![
                Violation::Blackwell { seed: 9, t: 2, lhs: 1.0, rhs: 0.0 },
                Violation::Domination { t: 2, objective: 2.0, rhs: 1.0 },
            ]
        );
    }
}
