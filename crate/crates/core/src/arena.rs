//! Experiment environments: reward streams, two-player matrix games, self-play
//! and the correlated-equilibrium gap of empirical joint play.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bounds::{BoundEvaluator, BoundRow};
use crate::matcher::{Matcher, MatcherConfig};
use crate::odp::{
    rng_for, sample_action, Adversary, History, Learner, MatchRecord, RewardFunction, RewardSystem,
    Stream,
};
use crate::{Error, Result};

/// Built-in reward streams.
#[derive(Debug, Clone, PartialEq)]
pub enum AdversaryKind {
    /// The same reward vector every round.
    Constant(Vec<f64>),
    /// A fixed sequence of reward vectors, repeated cyclically.
    Sequence(Vec<Vec<f64>>),
    /// Every entry i.i.d. uniform on `[0, U]`.
    IidRandom,
    /// Reward `U` on action `t mod |A|`, zero elsewhere.
    Alternating,
    /// Reward `U` on the learner's least-sampled action so far (lowest index on ties).
    AdaptiveBestResponse,
}

impl AdversaryKind {
    pub fn name(&self) -> &'static str {
        match self {
            AdversaryKind::Constant(_) => "constant",
            AdversaryKind::Sequence(_) => "sequence",
            AdversaryKind::IidRandom => "iid_random",
            AdversaryKind::Alternating => "alternating",
            AdversaryKind::AdaptiveBestResponse => "adaptive_best_response",
        }
    }

    /// Builds the stream; randomness comes from the `Adversary` stream of `seed`.
    pub fn build(&self, system: &RewardSystem, seed: u64) -> Result<Box<dyn Adversary + Send>> {
        let check = |v: &Vec<f64>| RewardFunction::new(system, v.clone()).map(|_| ());
        Ok(match self {
            AdversaryKind::Constant(v) => {
                check(v)?;
                Box::new(SequenceAdversary {
                    rounds: vec![v.clone()],
                })
            }
            AdversaryKind::Sequence(rounds) => {
                if rounds.is_empty() {
                    return Err(Error::invalid("adversary", "empty reward sequence"));
                }
                rounds.iter().try_for_each(check)?;
                Box::new(SequenceAdversary {
                    rounds: rounds.clone(),
                })
            }
            AdversaryKind::IidRandom => Box::new(IidAdversary {
                system: *system,
                rng: rng_for(seed, Stream::Adversary),
            }),
            AdversaryKind::Alternating => Box::new(AlternatingAdversary { system: *system }),
            AdversaryKind::AdaptiveBestResponse => Box::new(LeastPlayedAdversary {
                system: *system,
                counts: vec![0; system.num_actions()],
                seen: 0,
            }),
        })
    }
}

impl FromStr for AdversaryKind {
    type Err = Error;

    /// Parses the parameterless kinds.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid_random" => Ok(AdversaryKind::IidRandom),
            "alternating" => Ok(AdversaryKind::Alternating),
            "adaptive_best_response" => Ok(AdversaryKind::AdaptiveBestResponse),
            other => Err(Error::invalid("adversary", format!("unknown kind '{other}'"))),
        }
    }
}

pub fn adversary_stream(
    kind: &AdversaryKind,
    system: &RewardSystem,
    seed: u64,
) -> Result<Box<dyn Adversary + Send>> {
    kind.build(system, seed)
}

struct SequenceAdversary {
    rounds: Vec<Vec<f64>>,
}

impl Adversary for SequenceAdversary {
    fn next_rewards(&mut self, history: &History) -> Result<Vec<f64>> {
        Ok(self.rounds[history.len() % self.rounds.len()].clone())
    }
}

struct IidAdversary {
    system: RewardSystem,
    rng: ChaCha8Rng,
}

impl Adversary for IidAdversary {
    fn next_rewards(&mut self, _: &History) -> Result<Vec<f64>> {
        let u = self.system.reward_bound();
        Ok((0..self.system.num_actions())
            .map(|_| u * self.rng.random::<f64>())
            .collect())
    }
}

struct AlternatingAdversary {
    system: RewardSystem,
}

impl Adversary for AlternatingAdversary {
    fn next_rewards(&mut self, history: &History) -> Result<Vec<f64>> {
        let n = self.system.num_actions();
        let mut r = vec![0.0; n];
        r[history.len() % n] = self.system.reward_bound();
        Ok(r)
    }
}

struct LeastPlayedAdversary {
    system: RewardSystem,
    counts: Vec<usize>,
    /// History entries already folded into `counts`.
    seen: usize,
}

impl Adversary for LeastPlayedAdversary {
    fn next_rewards(&mut self, history: &History) -> Result<Vec<f64>> {
        let n = self.system.num_actions();
        for a in history.actions().skip(self.seen) {
            self.counts[a] += 1;
        }
        self.seen = history.len();
        let counts = &self.counts;
        let least = (0..n).min_by_key(|&a| (counts[a], a)).unwrap_or(0);
        let mut r = vec![0.0; n];
        r[least] = self.system.reward_bound();
        Ok(r)
    }
}

/// `raw ↦ scale · raw + offset`, applied to one player's payoffs at load time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub scale: f64,
    pub offset: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        scale: 1.0,
        offset: 0.0,
    };

    pub fn apply(&self, x: f64) -> f64 {
        self.scale * x + self.offset
    }
}

impl fmt::Display for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x * {} + {}", self.scale, self.offset)
    }
}

/// Payoff tables of a two-player game, player 1 choosing rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    rows: usize,
    cols: usize,
    /// Row-major `rows × cols` for each player, already in `[0, U]`.
    payoffs: [Vec<f64>; 2],
    reward_bound: f64,
    normalization: [Affine; 2],
}

impl MatrixGame {
    /// Payoffs must already lie in `[0, reward_bound]`.
    pub fn new(p1: Vec<Vec<f64>>, p2: Vec<Vec<f64>>, reward_bound: f64) -> Result<Self> {
        let game = Self::from_raw(p1, p2, reward_bound)?;
        if game.normalization != [Affine::IDENTITY; 2] {
            return Err(Error::invalid(
                "game",
                format!("payoffs must lie in [0, {reward_bound}]"),
            ));
        }
        Ok(game)
    }

    /// Maps each player's payoffs affinely onto `[0, U]` when they leave that range.
    pub fn from_raw(p1: Vec<Vec<f64>>, p2: Vec<Vec<f64>>, reward_bound: f64) -> Result<Self> {
        if !(reward_bound.is_finite() && reward_bound > 0.0) {
            return Err(Error::invalid("game", "reward bound must be positive"));
        }
        let rows = p1.len();
        let cols = p1.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("game", "empty payoff table"));
        }
        let mut payoffs = [Vec::new(), Vec::new()];
        let mut normalization = [Affine::IDENTITY; 2];
        for (player, table) in [p1, p2].into_iter().enumerate() {
            Error::check_len("payoff rows", rows, table.len())?;
            for row in &table {
                Error::check_len("payoff columns", cols, row.len())?;
            }
            let flat: Vec<f64> = table.into_iter().flatten().collect();
            if flat.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("game", "payoffs must be finite"));
            }
            let lo = flat.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = flat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let affine = if lo >= 0.0 && hi <= reward_bound {
                Affine::IDENTITY
            } else if hi > lo {
                let scale = reward_bound / (hi - lo);
                Affine {
                    scale,
                    offset: -lo * scale,
                }
            } else {
                Affine {
                    scale: 0.0,
                    offset: 0.5 * reward_bound,
                }
            };
            payoffs[player] = flat
                .iter()
                .map(|&v| affine.apply(v).clamp(0.0, reward_bound))
                .collect();
            normalization[player] = affine;
        }
        Ok(Self {
            rows,
            cols,
            payoffs,
            reward_bound,
            normalization,
        })
    }

    /// Plain-text tables: one row per player-1 action, whitespace-separated
    /// decimals; player 1's block, a blank line, then player 2's block. Lines
    /// starting with `#` are ignored.
    pub fn parse(text: &str, reward_bound: f64) -> Result<Self> {
        let mut blocks: Vec<Vec<Vec<f64>>> = vec![Vec::new()];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.starts_with('#') {
                continue;
            }
            if line.is_empty() {
                if !blocks.last().is_some_and(Vec::is_empty) {
                    blocks.push(Vec::new());
                }
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| {
                        Error::invalid("game file", format!("line {}: bad number '{tok}'", lineno + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            blocks.last_mut().expect("nonempty").push(row);
        }
        blocks.retain(|b| !b.is_empty());
        let [p1, p2]: [Vec<Vec<f64>>; 2] = blocks.try_into().map_err(|b: Vec<_>| {
            Error::invalid("game file", format!("expected 2 payoff blocks, found {}", b.len()))
        })?;
        Self::from_raw(p1, p2, reward_bound)
    }

    /// Rock-paper-scissors with win 1, tie 0.5, loss 0.
    pub fn rock_paper_scissors() -> Self {
        let p1 = vec![
            vec![0.5, 0.0, 1.0],
            vec![1.0, 0.5, 0.0],
            vec![0.0, 1.0, 0.5],
        ];
        let p2 = p1
            .iter()
            .map(|row| row.iter().map(|v| 1.0 - v).collect())
            .collect();
        Self::new(p1, p2, 1.0).expect("rock-paper-scissors is well formed")
    }

    pub fn num_actions(&self, player: usize) -> usize {
        [self.rows, self.cols][player]
    }

    pub fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    pub fn normalization(&self) -> [Affine; 2] {
        self.normalization
    }

    pub fn payoff(&self, player: usize, row: usize, col: usize) -> f64 {
        self.payoffs[player][row * self.cols + col]
    }

    /// Player's reward over their own actions given the opponent's action.
    pub fn rewards_against(&self, player: usize, opponent_action: usize) -> Vec<f64> {
        match player {
            0 => (0..self.rows).map(|r| self.payoff(0, r, opponent_action)).collect(),
            _ => (0..self.cols).map(|c| self.payoff(1, opponent_action, c)).collect(),
        }
    }
}

/// Counts of joint action pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointEmpirical {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    t: usize,
}

impl JointEmpirical {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            counts: vec![0; rows * cols],
            t: 0,
        }
    }

    pub fn from_actions(rows: usize, cols: usize, actions: &[(usize, usize)]) -> Self {
        let mut joint = Self::new(rows, cols);
        for &(a, b) in actions {
            joint.record(a, b);
        }
        joint
    }

    pub fn record(&mut self, row: usize, col: usize) {
        self.counts[row * self.cols + col] += 1;
        self.t += 1;
    }

    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.cols + col]
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

/// Largest average gain any player gets from an internal deviation `a → b`
/// applied to the empirical joint play. Never negative.
pub fn ce_gap(game: &MatrixGame, joint: &JointEmpirical) -> Result<f64> {
    if joint.dims() != (game.num_actions(0), game.num_actions(1)) {
        return Err(Error::invalid("joint distribution", "dimensions differ from the game"));
    }
    if joint.t == 0 {
        return Err(Error::invalid("joint distribution", "no observations"));
    }
    let (rows, cols) = joint.dims();
    let mut gap: f64 = 0.0;
    for from in 0..rows {
        for to in (0..rows).filter(|&b| b != from) {
            let gain: f64 = (0..cols)
                .map(|c| joint.count(from, c) as f64 * (game.payoff(0, to, c) - game.payoff(0, from, c)))
                .sum();
            gap = gap.max(gain);
        }
    }
    for from in 0..cols {
        for to in (0..cols).filter(|&b| b != from) {
            let gain: f64 = (0..rows)
                .map(|r| joint.count(r, from) as f64 * (game.payoff(1, r, to) - game.payoff(1, r, from)))
                .sum();
            gap = gap.max(gain);
        }
    }
    Ok(gap / joint.t as f64)
}

/// Both players' traces from one self-play match.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfPlayOutcome {
    /// Empty for a player with a single action, who always plays it.
    pub traces: [Vec<MatchRecord>; 2],
    pub joint: JointEmpirical,
}

/// Bound rows instead of full traces, for long matches.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfPlaySummary {
    pub seed: u64,
    pub rows: [Vec<BoundRow>; 2],
    pub actions: Vec<(usize, usize)>,
}

impl SelfPlaySummary {
    pub fn joint_at(&self, game: &MatrixGame, t: usize) -> JointEmpirical {
        JointEmpirical::from_actions(game.num_actions(0), game.num_actions(1), &self.actions[..t])
    }
}

struct Player {
    matcher: Option<Matcher>,
    rng: ChaCha8Rng,
    system: Option<RewardSystem>,
}

impl Player {
    fn new(game: &MatrixGame, index: usize, config: &MatcherConfig, seed: u64) -> Result<Self> {
        let (sample, estimate) = if index == 0 {
            (Stream::Learner, Stream::Estimator)
        } else {
            (Stream::SecondLearner, Stream::SecondEstimator)
        };
        let n = game.num_actions(index);
        if n == 1 {
            return Ok(Self {
                matcher: None,
                rng: rng_for(seed, sample),
                system: None,
            });
        }
        let system = RewardSystem::new(n, game.reward_bound())?;
        Ok(Self {
            matcher: Some(Matcher::with_rng(system, config.clone(), rng_for(seed, estimate))?),
            rng: rng_for(seed, sample),
            system: Some(system),
        })
    }
}

/// Runs the match, handing each player's round record to `sink`.
fn play(
    game: &MatrixGame,
    configs: [&MatcherConfig; 2],
    horizon: usize,
    seed: u64,
    mut sink: impl FnMut(usize, MatchRecord) -> Result<()>,
) -> Result<Vec<(usize, usize)>> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    let mut players = [
        Player::new(game, 0, configs[0], seed)?,
        Player::new(game, 1, configs[1], seed)?,
    ];
    let mut actions = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let mut decisions = [None, None];
        let mut picked = [0usize; 2];
        for (i, player) in players.iter_mut().enumerate() {
            if let Some(m) = player.matcher.as_mut() {
                let d = m.decide()?;
                picked[i] = sample_action(&d.q, &mut player.rng);
                decisions[i] = Some(d);
            }
        }
        for (i, player) in players.iter_mut().enumerate() {
            let (Some(m), Some(d), Some(system)) = (player.matcher.as_mut(), decisions[i].take(), player.system)
            else {
                continue;
            };
            let reward = RewardFunction::new(&system, game.rewards_against(i, picked[1 - i]))?;
            m.observe(picked[i], &reward)?;
            sink(
                i,
                MatchRecord {
                    t,
                    q: d.q,
                    action: picked[i],
                    reward,
                    trace: d.trace,
                },
            )?;
        }
        actions.push((picked[0], picked[1]));
    }
    Ok(actions)
}

/// Two regret matchers playing `game` against each other for `horizon` rounds.
///
/// Each player samples an action from its own mixed action; its reward function
/// is its payoff against the opponent's sampled action.
pub fn self_play(
    game: &MatrixGame,
    first: &MatcherConfig,
    second: &MatcherConfig,
    horizon: usize,
    seed: u64,
) -> Result<SelfPlayOutcome> {
    let mut traces = [Vec::new(), Vec::new()];
    let actions = play(game, [first, second], horizon, seed, |i, rec| {
        traces[i].push(rec);
        Ok(())
    })?;
    Ok(SelfPlayOutcome {
        traces,
        joint: JointEmpirical::from_actions(game.num_actions(0), game.num_actions(1), &actions),
    })
}

/// Like [`self_play`] but keeps only bound rows and the joint actions.
pub fn self_play_summary(
    game: &MatrixGame,
    first: &MatcherConfig,
    second: &MatcherConfig,
    horizon: usize,
    seed: u64,
) -> Result<SelfPlaySummary> {
    let mut evals = [first, second].map(|c| BoundEvaluator::new(c.family.clone(), c.link, game.reward_bound()));
    let mut rows = [Vec::new(), Vec::new()];
    let actions = play(game, [first, second], horizon, seed, |i, rec| {
        rows[i].push(evals[i].push(&rec)?);
        Ok(())
    })?;
    Ok(SelfPlaySummary { seed, rows, actions })
}

/// [`self_play_summary`] over many seeds, in parallel when enabled.
pub fn self_play_seeds(
    game: &MatrixGame,
    first: &MatcherConfig,
    second: &MatcherConfig,
    horizon: usize,
    seeds: &[u64],
) -> Result<Vec<SelfPlaySummary>> {
    crate::experiment::map_seeds(seeds, |seed| self_play_summary(game, first, second, horizon, seed))
        .into_iter()
        .collect()
}
