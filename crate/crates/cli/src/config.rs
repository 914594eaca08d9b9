//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comments start with '#'
//! family = int                 # ext | int | swap
//! link = polynomial            # polynomial | exponential
//! link_param = 2               # p for polynomial, eta for exponential
//! estimator = noisy            # exact | noisy | quantized | linear
//! noise_scale = 0.1            # noisy only
//! quant_step = 1               # quantized only
//! linear_rank = 0              # linear only; 0 means one-hot features
//! learning_rate = 1            # linear only, in (0, 2)
//! adversary = adaptive_best_response   # or constant | iid_random | alternating
//! num_actions = 3              # required with an adversary
//! constant_rewards = 1 0 0     # constant adversary only
//! game = rock_paper_scissors   # instead of an adversary: a game file path or the built-in
//! reward_bound = 1             # optional, default 1
//! horizon = 10000
//! seeds = 0..32                # a range or a comma-separated list
//! fixed_point_tolerance = 1e-10  # optional
//! output_dir = out             # optional, --out overrides
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use phi_regret::estimators::{EstimatorKind, FeatureMap};
use phi_regret::links::LinkFunction;
use phi_regret::matcher::DEFAULT_FIXED_POINT_TOLERANCE;
use phi_regret::transforms::{FamilyKind, SWAP_ENUMERATION_CAP};
use phi_regret::arena::AdversaryKind;

/// Name of the built-in rock-paper-scissors game.
pub const BUILTIN_RPS: &str = "rock_paper_scissors";

const KEYS: &[&str] = &[
    "family",
    "link",
    "link_param",
    "estimator",
    "noise_scale",
    "quant_step",
    "linear_rank",
    "learning_rate",
    "adversary",
    "num_actions",
    "constant_rewards",
    "game",
    "reward_bound",
    "horizon",
    "seeds",
    "fixed_point_tolerance",
    "output_dir",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub enum Environment {
    Adversary {
        num_actions: usize,
        kind: AdversaryKind,
    },
    /// A game file path, or [`BUILTIN_RPS`].
    Game(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub family: FamilyKind,
    pub link: LinkFunction,
    pub estimator: EstimatorKind,
    pub environment: Environment,
    pub reward_bound: f64,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub fixed_point_tolerance: f64,
    pub output_dir: Option<PathBuf>,
}

struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError {
                    line: Some(line),
                    key: content.to_string(),
                    message: "expected 'key = value'".into(),
                });
            };
            let key = key.trim().to_string();
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError {
                    line: Some(line),
                    key,
                    message: "unknown key".into(),
                });
            }
            if let Some((first, _)) = map.get(&key) {
                return Err(ConfigError {
                    line: Some(line),
                    message: format!("duplicate key (first set on line {first})"),
                    key,
                });
            }
            map.insert(key, (line, value.trim().to_string()));
        }
        Ok(Self(map))
    }

    fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: self.0.get(key).map(|(l, _)| *l),
            key: key.to_string(),
            message: message.into(),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|(_, v)| v.as_str())
    }

    fn required(&self, key: &str) -> Result<&str, ConfigError> {
        self.raw(key).ok_or_else(|| self.error(key, "missing required key"))
    }

    fn number<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| self.error(key, format!("cannot parse '{v}' as a number")))
            })
            .transpose()
    }

    fn required_number<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        self.number(key)?
            .ok_or_else(|| self.error(key, "missing required key"))
    }

    /// Rejects keys that only make sense in another mode.
    fn forbid(&self, key: &str, reason: &str) -> Result<(), ConfigError> {
        match self.raw(key) {
            Some(_) => Err(self.error(key, format!("not allowed {reason}"))),
            None => Ok(()),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let e = Entries::parse(text)?;

        let family = match e.required("family")? {
            "ext" => FamilyKind::External,
            "int" => FamilyKind::Internal,
            "swap" => FamilyKind::Swap,
            other => return Err(e.error("family", format!("unknown family '{other}' (ext | int | swap)"))),
        };

        let link_param: f64 = e.required_number("link_param")?;
        let link = match e.required("link")? {
            "polynomial" => LinkFunction::polynomial(link_param)
                .map_err(|_| e.error("link_param", format!("polynomial p must be > 1, got {link_param}")))?,
            "exponential" => LinkFunction::exponential(link_param)
                .map_err(|_| e.error("link_param", format!("exponential eta must be > 0, got {link_param}")))?,
            other => return Err(e.error("link", format!("unknown link '{other}' (polynomial | exponential)"))),
        };

        let estimator = parse_estimator(&e)?;

        let reward_bound = e.number::<f64>("reward_bound")?.unwrap_or(1.0);
        if !(reward_bound.is_finite() && reward_bound > 0.0) {
            return Err(e.error("reward_bound", "must be positive"));
        }

        let environment = match (e.raw("adversary"), e.raw("game")) {
            (Some(_), Some(_)) => return Err(e.error("game", "set either 'adversary' or 'game', not both")),
            (None, None) => return Err(e.error("adversary", "missing: set 'adversary' or 'game'")),
            (None, Some(game)) => {
                e.forbid("num_actions", "with a game (taken from the payoff tables)")?;
                e.forbid("constant_rewards", "with a game")?;
                if game.is_empty() {
                    return Err(e.error("game", "empty path"));
                }
                Environment::Game(game.to_string())
            }
            (Some(kind), None) => {
                let num_actions: usize = e.required_number("num_actions")?;
                if num_actions < 2 {
                    return Err(e.error("num_actions", "need at least 2 actions"));
                }
                if family == FamilyKind::Swap && num_actions > SWAP_ENUMERATION_CAP {
                    return Err(e.error(
                        "num_actions",
                        format!("swap family is limited to {SWAP_ENUMERATION_CAP} actions"),
                    ));
                }
                let kind = if kind == "constant" {
                    let raw = e.required("constant_rewards")?;
                    let values = raw
                        .split_whitespace()
                        .map(|v| v.parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| e.error("constant_rewards", format!("cannot parse '{raw}'")))?;
                    if values.len() != num_actions {
                        return Err(e.error(
                            "constant_rewards",
                            format!("expected {num_actions} values, got {}", values.len()),
                        ));
                    }
                    if values.iter().any(|v| !(0.0..=reward_bound).contains(v)) {
                        return Err(e.error("constant_rewards", format!("values must lie in [0, {reward_bound}]")));
                    }
                    AdversaryKind::Constant(values)
                } else {
                    e.forbid("constant_rewards", "unless adversary = constant")?;
                    kind.parse::<AdversaryKind>()
                        .map_err(|_| e.error("adversary", format!("unknown adversary '{kind}'")))?
                };
                Environment::Adversary { num_actions, kind }
            }
        };

        let horizon: usize = e.required_number("horizon")?;
        if horizon == 0 {
            return Err(e.error("horizon", "must be at least 1"));
        }
        let seeds = parse_seeds(e.required("seeds")?).map_err(|m| e.error("seeds", m))?;

        let fixed_point_tolerance = e
            .number::<f64>("fixed_point_tolerance")?
            .unwrap_or(DEFAULT_FIXED_POINT_TOLERANCE);
        if !(fixed_point_tolerance > 0.0 && fixed_point_tolerance <= 1e-4) {
            return Err(e.error("fixed_point_tolerance", "must lie in (0, 1e-4]"));
        }

        Ok(Self {
            family,
            link,
            estimator,
            environment,
            reward_bound,
            horizon,
            seeds,
            fixed_point_tolerance,
            output_dir: e.raw("output_dir").map(PathBuf::from),
        })
    }

    /// Canonical text form; parses back to an identical config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("family", self.family.name().into());
        match self.link {
            LinkFunction::Polynomial { p } => {
                put("link", "polynomial".into());
                put("link_param", format!("{p:?}"));
            }
            LinkFunction::Exponential { eta } => {
                put("link", "exponential".into());
                put("link_param", format!("{eta:?}"));
            }
        }
        put("estimator", self.estimator.name().into());
        match self.estimator {
            EstimatorKind::Exact => {}
            EstimatorKind::Noisy { scale } => put("noise_scale", format!("{scale:?}")),
            EstimatorKind::Quantized { step } => put("quant_step", format!("{step:?}")),
            EstimatorKind::Linear {
                features,
                learning_rate,
            } => {
                let rank = match features {
                    FeatureMap::OneHot => 0,
                    FeatureMap::RandomProjection { rank } => rank,
                };
                put("linear_rank", rank.to_string());
                put("learning_rate", format!("{learning_rate:?}"));
            }
        }
        match &self.environment {
            Environment::Adversary { num_actions, kind } => {
                put("adversary", kind.name().into());
                put("num_actions", num_actions.to_string());
                if let AdversaryKind::Constant(values) = kind {
                    put(
                        "constant_rewards",
                        values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" "),
                    );
                }
            }
            Environment::Game(game) => put("game", game.clone()),
        }
        put("reward_bound", format!("{:?}", self.reward_bound));
        put("horizon", self.horizon.to_string());
        put(
            "seeds",
            self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        );
        put("fixed_point_tolerance", format!("{:?}", self.fixed_point_tolerance));
        if let Some(dir) = &self.output_dir {
            put("output_dir", dir.display().to_string());
        }
        out
    }
}

fn parse_estimator(e: &Entries) -> Result<EstimatorKind, ConfigError> {
    let name = e.raw("estimator").unwrap_or("exact");
    let only = |key: &str, owner: &str| {
        if name == owner {
            Ok(())
        } else {
            e.forbid(key, &format!("unless estimator = {owner}"))
        }
    };
    only("noise_scale", "noisy")?;
    only("quant_step", "quantized")?;
    only("linear_rank", "linear")?;
    only("learning_rate", "linear")?;
    match name {
        "exact" => Ok(EstimatorKind::Exact),
        "noisy" => {
            let scale: f64 = e.required_number("noise_scale")?;
            if !(scale.is_finite() && scale >= 0.0) {
                return Err(e.error("noise_scale", "must be finite and nonnegative"));
            }
            Ok(EstimatorKind::Noisy { scale })
        }
        "quantized" => {
            let step: f64 = e.required_number("quant_step")?;
            if !(step.is_finite() && step > 0.0) {
                return Err(e.error("quant_step", "must be positive"));
            }
            Ok(EstimatorKind::Quantized { step })
        }
        "linear" => {
            let rank: usize = e.number("linear_rank")?.unwrap_or(0);
            let learning_rate: f64 = e.required_number("learning_rate")?;
            if !(learning_rate > 0.0 && learning_rate < 2.0) {
                return Err(e.error("learning_rate", "must lie in (0, 2)"));
            }
            let features = if rank == 0 {
                FeatureMap::OneHot
            } else {
                FeatureMap::RandomProjection { rank }
            };
            Ok(EstimatorKind::Linear {
                features,
                learning_rate,
            })
        }
        other => Err(e.error("estimator", format!("unknown estimator '{other}'"))),
    }
}

fn parse_seeds(raw: &str) -> Result<Vec<u64>, String> {
    let seeds: Vec<u64> = if let Some((lo, hi)) = raw.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| format!("bad range start in '{raw}'"))?;
        let hi: u64 = hi.trim().parse().map_err(|_| format!("bad range end in '{raw}'"))?;
        (lo..hi).collect()
    } else {
        raw.split(',')
            .map(|s| s.trim().parse::<u64>().map_err(|_| format!("bad seed '{}'", s.trim())))
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err("no seeds".into());
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err("duplicate seeds".into());
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "family = ext\nlink = polynomial\nlink_param = 2\nadversary = adaptive_best_response\nnum_actions = 3\nhorizon = 100\nseeds = 0..4\n";

    #[test]
    fn minimal_config() {
        let cfg = ExperimentConfig::parse(BASE).unwrap();
        assert_eq!(cfg.family, FamilyKind::External);
        assert_eq!(cfg.estimator, EstimatorKind::Exact);
        assert_eq!(cfg.seeds, vec![0, 1, 2, 3]);
        assert_eq!(cfg.reward_bound, 1.0);
        assert_eq!(cfg.fixed_point_tolerance, 1e-10);
    }

    #[test]
    fn negative_eta_names_the_field() {
        let text = BASE.replace("polynomial", "exponential").replace("link_param = 2", "link_param = -0.5");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert_eq!(err.key, "link_param");
        assert_eq!(err.line, Some(3));
        assert!(err.to_string().starts_with("line 3: link_param:"));
    }

    #[test]
    fn structural_errors() {
        let cases = [
            (format!("{BASE}bogus = 1\n"), "bogus"),
            (format!("{BASE}horizon = 5\n"), "horizon"),
            (BASE.replace("horizon = 100", "horizon = 0"), "horizon"),
            (BASE.replace("seeds = 0..4", "seeds = 1,1"), "seeds"),
            (BASE.replace("family = ext", "family = all"), "family"),
            (format!("{BASE}noise_scale = 0.1\n"), "noise_scale"),
            (format!("{BASE}game = rock_paper_scissors\n"), "game"),
            (BASE.replace("num_actions = 3\n", ""), "num_actions"),
            ("family ext\n".to_string(), "family ext"),
        ];
        for (text, key) in cases {
            let err = ExperimentConfig::parse(&text).unwrap_err();
            assert_eq!(err.key, key, "{text}");
        }
    }

    #[test]
    fn game_mode() {
        let text = "family = int\nlink = polynomial\nlink_param = 2\ngame = rock_paper_scissors\nhorizon = 10\nseeds = 3,1\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.environment, Environment::Game(BUILTIN_RPS.into()));
        assert_eq!(cfg.seeds, vec![3, 1]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn config() -> impl Strategy<Value = ExperimentConfig> {
            let family = prop_oneof![Just(FamilyKind::External), Just(FamilyKind::Internal), Just(FamilyKind::Swap)];
            let link = prop_oneof![
                (1.0001f64..10.0).prop_map(|p| LinkFunction::Polynomial { p }),
                (1e-6f64..10.0).prop_map(|eta| LinkFunction::Exponential { eta }),
            ];
            let estimator = prop_oneof![
                Just(EstimatorKind::Exact),
                (0.0f64..5.0).prop_map(|scale| EstimatorKind::Noisy { scale }),
                (1e-3f64..5.0).prop_map(|step| EstimatorKind::Quantized { step }),
                (0usize..4, 0.01f64..1.99).prop_map(|(rank, learning_rate)| EstimatorKind::Linear {
                    features: if rank == 0 { FeatureMap::OneHot } else { FeatureMap::RandomProjection { rank } },
                    learning_rate,
                }),
            ];
            let environment = prop_oneof![
                (2usize..=6, prop_oneof![
                    Just(AdversaryKind::IidRandom),
                    Just(AdversaryKind::Alternating),
                    Just(AdversaryKind::AdaptiveBestResponse),
                ]).prop_map(|(num_actions, kind)| Environment::Adversary { num_actions, kind }),
                prop::collection::vec(0.0f64..=1.0, 4).prop_map(|v| Environment::Adversary {
                    num_actions: 4,
                    kind: AdversaryKind::Constant(v),
                }),
                Just(Environment::Game("games/rps.txt".into())),
            ];
            (
                family,
                link,
                estimator,
                environment,
                1usize..100_000,
                prop::collection::btree_set(any::<u64>(), 1..5),
                1e-14f64..1e-4,
                proptest::option::of(Just(PathBuf::from("out/dir"))),
            )
                .prop_map(|(family, link, estimator, environment, horizon, seeds, tol, output_dir)| ExperimentConfig {
                    family,
                    link,
                    estimator,
                    environment,
                    reward_bound: 1.0,
                    horizon,
                    seeds: seeds.into_iter().collect(),
                    fixed_point_tolerance: tol,
                    output_dir,
                })
        }

        proptest! {
            #[test]
            fn text_round_trip(cfg in config()) {
                let text = cfg.to_text();
                prop_assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
            }
        }
    }
}
