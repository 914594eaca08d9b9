//! Runs a configured experiment and writes its traces.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use phi_regret::arena::{ce_gap, self_play_seeds, MatrixGame, SelfPlaySummary};
use phi_regret::bounds::{seed_average, BoundParams, BoundRow};
use phi_regret::experiment::{certify, OdpExperiment, Violation};
use phi_regret::matcher::MatcherConfig;
use phi_regret::odp::RewardSystem;
use phi_regret::transforms::TransformationFamily;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Environment, ExperimentConfig, BUILTIN_RPS};
use crate::output::{fmt_f64, params_to_json, rows_to_csv, summary_svg, write};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    /// Labelled by player for games.
    pub violations: Vec<(String, Violation)>,
    /// Seed-averaged correlated-equilibrium gap at `horizon`, games only.
    pub final_ce_gap: Option<f64>,
}

/// Hash of the canonical config text, excluding where output goes.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = ExperimentConfig {
        output_dir: None,
        ..config.clone()
    }
    .to_text();
    hex(&Sha256::digest(canonical.as_bytes()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn matcher_config(config: &ExperimentConfig, num_actions: usize) -> Result<MatcherConfig, CliError> {
    let family = Arc::new(TransformationFamily::build(config.family, num_actions)?);
    let mc = MatcherConfig::new(family, config.link)
        .with_estimator(config.estimator)
        .with_tolerance(config.fixed_point_tolerance)?;
    mc.validate()?;
    Ok(mc)
}

/// Runs `config`, resolving a relative game path against `config_dir`, and writes into `out_dir`.
pub fn run(config: &ExperimentConfig, config_dir: &Path, out_dir: &Path) -> Result<RunOutcome, CliError> {
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    let mut emit = |name: String, contents: &str| -> Result<(), CliError> {
        let path = out_dir.join(name);
        write(&path, contents)?;
        files.push(path);
        Ok(())
    };
    let mut meta = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": config_hash(config),
        "config": config.to_text(),
        "horizon": config.horizon,
        "seeds": config.seeds,
    });

    let (violations, final_ce_gap) = match &config.environment {
        Environment::Adversary { num_actions, kind } => {
            let experiment = OdpExperiment {
                system: RewardSystem::new(*num_actions, config.reward_bound)?,
                matcher: matcher_config(config, *num_actions)?,
                adversary: kind.clone(),
                horizon: config.horizon,
            };
            let runs = experiment.run_seeds(&config.seeds, false)?;
            let averaged = experiment.average(&runs)?;
            for r in &runs {
                emit(format!("seed_{}.csv", r.seed), &rows_to_csv(&r.rows))?;
            }
            emit("average.csv".into(), &rows_to_csv(&averaged))?;
            emit(
                "summary.svg".into(),
                &summary_svg(&title(config), &[("mean", &averaged)]),
            )?;
            meta["bound_params"] = params_to_json(&experiment.bound_params());
            let per_seed: Vec<(u64, &[BoundRow])> = runs.iter().map(|r| (r.seed, r.rows.as_slice())).collect();
            let violations = certify(&per_seed, &averaged)
                .into_iter()
                .map(|v| (String::new(), v))
                .collect();
            (violations, None)
        }
        Environment::Game(source) => {
            let game = load_game(source, config_dir, config.reward_bound)?;
            let configs = [0, 1].map(|p| matcher_config_or_single(config, game.num_actions(p)));
            let [first, second] = configs;
            let (first, second) = (first?, second?);
            let summaries = self_play_seeds(&game, &first, &second, config.horizon, &config.seeds)?;
            let mut violations = Vec::new();
            for (player, mc) in [(0usize, &first), (1, &second)] {
                let label = format!("p{}", player + 1);
                let params = BoundParams::new(mc.link, &mc.family, game.reward_bound());
                let per_seed: Vec<(u64, &[BoundRow])> = summaries
                    .iter()
                    .map(|s| (s.seed, s.rows[player].as_slice()))
                    .filter(|(_, rows)| !rows.is_empty())
                    .collect();
                if per_seed.is_empty() {
                    continue;
                }
                meta[format!("bound_params_{label}")] = params_to_json(&params);
                let slices: Vec<&[BoundRow]> = per_seed.iter().map(|(_, r)| *r).collect();
                let averaged = seed_average(&params, &slices)?;
                for (seed, rows) in &per_seed {
                    emit(format!("seed_{seed}_{label}.csv"), &rows_to_csv(rows))?;
                }
                emit(format!("average_{label}.csv"), &rows_to_csv(&averaged))?;
                violations.extend(certify(&per_seed, &averaged).into_iter().map(|v| (label.clone(), v)));
            }
            let gaps = ce_gap_curve(&game, &summaries, config.horizon)?;
            let mut csv = String::from("t,ce_gap\n");
            for (t, g) in &gaps {
                csv.push_str(&format!("{t},{}\n", fmt_f64(*g)));
            }
            emit("ce_gap.csv".into(), &csv)?;
            let mut curves = Vec::new();
            for (player, mc) in [(0usize, &first), (1, &second)] {
                if game.num_actions(player) > 1 {
                    let slices: Vec<&[BoundRow]> = summaries.iter().map(|s| s.rows[player].as_slice()).collect();
                    let params = BoundParams::new(mc.link, &mc.family, game.reward_bound());
                    curves.push((format!("player {}", player + 1), seed_average(&params, &slices)?));
                }
            }
            let series: Vec<(&str, &[BoundRow])> = curves.iter().map(|(n, r)| (n.as_str(), r.as_slice())).collect();
            emit("summary.svg".into(), &summary_svg(&title(config), &series))?;
            meta["normalization"] = Value::Array(
                game.normalization()
                    .iter()
                    .map(|a| json!({ "scale": a.scale, "offset": a.offset }))
                    .collect(),
            );
            let final_gap = gaps.last().map(|(_, g)| *g);
            meta["final_ce_gap"] = json!(final_gap);
            (violations, final_gap)
        }
    };

    meta["violations"] = Value::Array(
        violations
            .iter()
            .map(|(label, v)| Value::String(describe(label, v)))
            .collect(),
    );
    let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    text.push('\n');
    emit("metadata.json".into(), &text)?;

    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        files,
        violations,
        final_ce_gap,
    })
}

/// A one-action player never builds a matcher, so a two-action placeholder stands in.
fn matcher_config_or_single(config: &ExperimentConfig, num_actions: usize) -> Result<MatcherConfig, CliError> {
    matcher_config(config, num_actions.max(2))
}

fn load_game(source: &str, config_dir: &Path, reward_bound: f64) -> Result<MatrixGame, CliError> {
    if source == BUILTIN_RPS {
        return Ok(MatrixGame::rock_paper_scissors());
    }
    let path = config_dir.join(source);
    let text = fs::read_to_string(&path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(MatrixGame::parse(&text, reward_bound)?)
}

/// Seed-averaged gap at t = 1, 10, 100, ... and the horizon.
fn ce_gap_curve(game: &MatrixGame, summaries: &[SelfPlaySummary], horizon: usize) -> Result<Vec<(usize, f64)>, CliError> {
    let mut checkpoints: Vec<usize> = std::iter::successors(Some(1usize), |t| t.checked_mul(10))
        .take_while(|t| *t < horizon)
        .collect();
    checkpoints.push(horizon);
    checkpoints
        .into_iter()
        .map(|t| {
            let total = summaries
                .iter()
                .map(|s| ce_gap(game, &s.joint_at(game, t)))
                .sum::<phi_regret::Result<f64>>()?;
            Ok((t, total / summaries.len() as f64))
        })
        .collect()
}

fn title(config: &ExperimentConfig) -> String {
    format!(
        "{} family, {:?}, {} estimator, {} seeds",
        config.family.name(),
        config.link,
        config.estimator.name(),
        config.seeds.len()
    )
}

pub fn describe(label: &str, v: &Violation) -> String {
    let prefix = if label.is_empty() { String::new() } else { format!("{label}: ") };
    match v {
        Violation::Blackwell { seed, t, lhs, rhs } => {
            format!("{prefix}step inequality fails at seed {seed}, t = {t}: {lhs:?} > {rhs:?}")
        }
        Violation::Domination { t, objective, rhs } => {
            format!("{prefix}averaged objective exceeds envelope at t = {t}: {objective:?} > {rhs:?}")
        }
        Violation::Potential { t, potential, bound } => {
            format!("{prefix}averaged potential exceeds allowance at t = {t}: {potential:?} > {bound:?}")
        }
    }
}
