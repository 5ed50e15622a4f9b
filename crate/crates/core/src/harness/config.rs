use std::fmt::Write as _;
use std::path::PathBuf;

use crate::env::{EnvKind, DEFAULT_GAMMA, DEFAULT_HORIZON};
use crate::error::{Error, Result};
use crate::learners::Algorithm;

/// Episode budget for three agents.
pub const EPISODES_SMALL_TEAM: usize = 20_000;
/// Episode budget for larger teams.
pub const EPISODES_LARGE_TEAM: usize = 40_000;
pub const DEFAULT_SEED_COUNT: u64 = 10;

/// Which learning-rate table seeds a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateTable {
    /// Rates published with the original experiments.
    Published,
    /// Rates chosen by [`super::gridsearch`] for plain SGD at N = 3.
    Tuned,
}

impl std::str::FromStr for RateTable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "published" => Ok(RateTable::Published),
            "tuned" => Ok(RateTable::Tuned),
            other => Err(Error::Config(format!("unknown rate table `{other}` (published|tuned)"))),
        }
    }
}

/// `(α_θ, α_model)` from the published table. The model rate is unused (and
/// reported as 0) for algorithms without a second model.
pub fn published_rates(algorithm: Algorithm, env: EnvKind) -> (f64, f64) {
    use Algorithm::*;
    use EnvKind::*;
    match (algorithm, env) {
        (Reinforce | DrReinforce, _) => (5e-4, 0.0),
        (DrReinforceR, MultiRover) => (5e-4, 25e-3),
        (DrReinforceR, PredatorPrey) => (5e-4, 1e-4),
        (QA2c, MultiRover) => (5e-4, 25e-4),
        (QA2c, PredatorPrey) => (1e-4, 5e-3),
        (Coma, MultiRover) => (5e-5, 5e-4),
        (Coma, PredatorPrey) => (1e-4, 5e-3),
        (Colby, MultiRover) => (5e-4, 5e-4),
        (Colby, PredatorPrey) => (5e-4, 5e-5),
    }
}

/// Grid shared by every method when tuning for plain SGD.
pub const POLICY_RATE_GRID: [f64; 3] = [5e-4, 5e-3, 5e-2];
pub const MODEL_RATE_GRID: [f64; 3] = [5e-4, 5e-3, 5e-2];

/// Every admissible `(α_θ, α_model)` cell of the shared grid for
/// `algorithm`: learned models never update slower than the policy.
pub fn standard_grid(algorithm: Algorithm) -> Vec<(f64, f64)> {
    if algorithm.has_model() {
        POLICY_RATE_GRID
            .iter()
            .flat_map(|&p| MODEL_RATE_GRID.iter().filter(move |&&m| m >= p).map(move |&m| (p, m)))
            .collect()
    } else {
        POLICY_RATE_GRID.iter().map(|&p| (p, 0.0)).collect()
    }
}

/// Winners of [`standard_grid`] under the default budget, three agents and
/// seeds 0..3 (see `drpg gridsearch`).
pub fn tuned_rates(algorithm: Algorithm, env: EnvKind) -> (f64, f64) {
    use Algorithm::*;
    use EnvKind::*;
    match (algorithm, env) {
        (Reinforce, MultiRover) => (5e-4, 0.0),
        (Reinforce, PredatorPrey) => (5e-4, 0.0),
        (DrReinforce, MultiRover) => (5e-2, 0.0),
        (DrReinforce, PredatorPrey) => (5e-2, 0.0),
        (DrReinforceR, MultiRover) => (5e-4, 5e-4),
        (DrReinforceR, PredatorPrey) => (5e-3, 5e-3),
        (QA2c, MultiRover) => (5e-4, 5e-4),
        (QA2c, PredatorPrey) => (5e-4, 5e-3),
        (Coma, MultiRover) => (5e-3, 5e-3),
        (Coma, PredatorPrey) => (5e-3, 5e-3),
        (Colby, MultiRover) => (5e-4, 5e-4),
        (Colby, PredatorPrey) => (5e-4, 5e-4),
    }
}

pub fn rates(table: RateTable, algorithm: Algorithm, env: EnvKind) -> (f64, f64) {
    match table {
        RateTable::Published => published_rates(algorithm, env),
        RateTable::Tuned => tuned_rates(algorithm, env),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env_kind: EnvKind,
    pub algorithm: Algorithm,
    pub n_agents: usize,
    pub n_episodes: usize,
    pub horizon: usize,
    pub gamma: f64,
    pub policy_rate: f64,
    pub model_rate: f64,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults: published rates, the team-size budget and seeds 0..10.
    pub fn new(env_kind: EnvKind, algorithm: Algorithm, n_agents: usize) -> Self {
        let (policy_rate, model_rate) = published_rates(algorithm, env_kind);
        RunConfig {
            env_kind,
            algorithm,
            n_agents,
            n_episodes: default_episodes(n_agents),
            horizon: DEFAULT_HORIZON,
            gamma: DEFAULT_GAMMA,
            policy_rate,
            model_rate,
            seeds: (0..DEFAULT_SEED_COUNT).collect(),
            output_dir: None,
        }
    }

    pub fn with_rates(mut self, table: RateTable) -> Self {
        (self.policy_rate, self.model_rate) = rates(table, self.algorithm, self.env_kind);
        self
    }

    /// Parses flat `key = value` lines over the defaults. `#` starts a
    /// comment. `env` and `algorithm` are required; `rates` (published|tuned)
    /// sets both rates before any explicit rate keys are applied.
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let get = |key: &str| pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let env_kind: EnvKind = get("env")
            .ok_or_else(|| Error::Config("missing key `env`".into()))?
            .parse()?;
        let algorithm: Algorithm = get("algorithm")
            .ok_or_else(|| Error::Config("missing key `algorithm`".into()))?
            .parse()?;
        let n_agents = match get("n_agents") {
            Some(v) => parse_num(v, "n_agents")?,
            None => 3,
        };
        let mut config = RunConfig::new(env_kind, algorithm, n_agents);
        if let Some(table) = get("rates") {
            config = config.with_rates(table.parse()?);
        }
        for (key, value) in &pairs {
            config.set(key, value)?;
        }
        Ok(config)
    }

    /// Reads a run's `manifest.txt`, ignoring its failure records.
    pub fn from_manifest(text: &str) -> Result<Self> {
        let config: String = text
            .lines()
            .filter(|l| !l.trim_start().starts_with("failed."))
            .map(|l| format!("{l}\n"))
            .collect();
        Self::parse(&config)
    }

    /// Applies one override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "env" => self.env_kind = value.parse()?,
            "algorithm" => self.algorithm = value.parse()?,
            "n_agents" => self.n_agents = parse_num(value, key)?,
            "episodes" | "n_episodes" => self.n_episodes = parse_num(value, key)?,
            "horizon" => self.horizon = parse_num(value, key)?,
            "gamma" => self.gamma = parse_num(value, key)?,
            "policy_rate" => self.policy_rate = parse_num(value, key)?,
            "model_rate" => self.model_rate = parse_num(value, key)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "output" => self.output_dir = Some(PathBuf::from(value)),
            "rates" => {}
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Hard errors for invalid settings; soft warnings for legal but unusual
    /// ones.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.n_agents < 2 {
            return Err(Error::Config(format!("need at least 2 agents, got {}", self.n_agents)));
        }
        if self.n_episodes == 0 || self.horizon == 0 {
            return Err(Error::Config("episode count and horizon must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("discount {} outside (0, 1]", self.gamma)));
        }
        if !(self.policy_rate > 0.0 && self.policy_rate.is_finite()) {
            return Err(Error::Config(format!(
                "policy rate must be positive, got {}",
                self.policy_rate
            )));
        }
        if self.algorithm.has_model() && !(self.model_rate > 0.0 && self.model_rate.is_finite()) {
            return Err(Error::Config(format!(
                "model rate must be positive, got {}",
                self.model_rate
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Empty("seed list"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        let mut warnings = Vec::new();
        if self.algorithm.has_critic() && self.model_rate < self.policy_rate {
            warnings.push(format!(
                "critic rate {} is below policy rate {}; critics usually learn faster than policies",
                self.model_rate, self.policy_rate
            ));
        }
        Ok(warnings)
    }

    /// Fully resolved configuration in the same format [`RunConfig::parse`] reads.
    pub fn manifest(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "env = {}", self.env_kind);
        let _ = writeln!(s, "algorithm = {}", self.algorithm);
        let _ = writeln!(s, "n_agents = {}", self.n_agents);
        let _ = writeln!(s, "episodes = {}", self.n_episodes);
        let _ = writeln!(s, "horizon = {}", self.horizon);
        let _ = writeln!(s, "gamma = {}", self.gamma);
        let _ = writeln!(s, "policy_rate = {}", self.policy_rate);
        let _ = writeln!(s, "model_rate = {}", self.model_rate);
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "seeds = {}", seeds.join(","));
        if let Some(dir) = &self.output_dir {
            let _ = writeln!(s, "output = {}", dir.display());
        }
        s
    }
}

pub fn default_episodes(n_agents: usize) -> usize {
    if n_agents <= 3 {
        EPISODES_SMALL_TEAM
    } else {
        EPISODES_LARGE_TEAM
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(value: &str, key: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

/// Comma-separated seeds; `a..b` expands to the half-open range.
pub fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (parse_num(a, "seeds")?, parse_num(b, "seeds")?);
                seeds.extend(a..b);
            }
            None => seeds.push(parse_num(part, "seeds")?),
        }
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_defaults() {
        let c = RunConfig::new(EnvKind::MultiRover, Algorithm::DrReinforceR, 3);
        assert_eq!((c.policy_rate, c.model_rate), (5e-4, 25e-3));
        assert_eq!(c.n_episodes, 20_000);
        assert_eq!(c.seeds.len(), 10);
        assert_eq!(
            RunConfig::new(EnvKind::PredatorPrey, Algorithm::Coma, 8).n_episodes,
            40_000
        );
        assert_eq!(published_rates(Algorithm::Coma, EnvKind::MultiRover), (5e-5, 5e-4));
        assert_eq!(published_rates(Algorithm::Colby, EnvKind::PredatorPrey), (5e-4, 5e-5));
    }

    #[test]
    fn default_critic_rates_exceed_policy_rates() {
        for table in [RateTable::Published, RateTable::Tuned] {
            for env in EnvKind::ALL {
                for alg in Algorithm::ALL {
                    let c = RunConfig::new(env, alg, 3).with_rates(table);
                    let warnings = c.validate().unwrap();
                    assert!(warnings.is_empty(), "{table:?} {env} {alg}: {warnings:?}");
                }
            }
        }
    }

    #[test]
    fn tuned_rates_lie_on_the_shared_grid() {
        for env in EnvKind::ALL {
            for alg in Algorithm::ALL {
                assert!(standard_grid(alg).contains(&tuned_rates(alg, env)), "{alg} {env}");
            }
        }
    }

    #[test]
    fn standard_grid_keeps_models_at_least_as_fast_as_the_policy() {
        let grid = standard_grid(Algorithm::Coma);
        assert_eq!(grid.len(), 6);
        assert!(grid.iter().all(|&(p, m)| m >= p));
        assert_eq!(standard_grid(Algorithm::Reinforce).len(), 3);
    }

    #[test]
    fn parse_round_trips_through_the_manifest() {
        let text = "env = predator-prey\nalgorithm = coma  # baseline\n\nn_agents=5\nseeds = 3..6, 9\npolicy_rate = 1e-3\noutput = /tmp/x\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.env_kind, EnvKind::PredatorPrey);
        assert_eq!(c.n_agents, 5);
        assert_eq!(c.n_episodes, 40_000);
        assert_eq!(c.seeds, vec![3, 4, 5, 9]);
        assert_eq!(c.policy_rate, 1e-3);
        assert_eq!(c.model_rate, 5e-3);
        assert_eq!(RunConfig::parse(&c.manifest()).unwrap(), c);
    }

    #[test]
    fn rate_table_key_applies_before_explicit_rates() {
        let c = RunConfig::parse("env=multi-rover\nalgorithm=dr_reinforce\nrates=tuned").unwrap();
        assert_eq!(
            c.policy_rate,
            tuned_rates(Algorithm::DrReinforce, EnvKind::MultiRover).0
        );
        let c = RunConfig::parse("policy_rate=0.1\nenv=multi-rover\nalgorithm=dr_reinforce\nrates=tuned").unwrap();
        assert_eq!(c.policy_rate, 0.1);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(RunConfig::parse("algorithm=coma").is_err());
        assert!(RunConfig::parse("env=multi-rover\nalgorithm=coma\nbogus=1").is_err());
        assert!(RunConfig::parse("env=multi-rover\nalgorithm=coma\nepisodes=ten").is_err());
        let base = RunConfig::new(EnvKind::MultiRover, Algorithm::Reinforce, 3);
        let bad = [
            RunConfig {
                n_agents: 1,
                ..base.clone()
            },
            RunConfig {
                policy_rate: 0.0,
                ..base.clone()
            },
            RunConfig {
                seeds: vec![],
                ..base.clone()
            },
            RunConfig {
                seeds: vec![1, 2, 1],
                ..base.clone()
            },
            RunConfig {
                gamma: 1.5,
                ..base.clone()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn critic_rate_override_below_policy_rate_warns() {
        let mut c = RunConfig::new(EnvKind::MultiRover, Algorithm::QA2c, 3);
        c.model_rate = 1e-5;
        assert_eq!(c.validate().unwrap().len(), 1);
    }
}
