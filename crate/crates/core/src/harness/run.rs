use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::env::GridWorld;
use crate::error::{Error, Result};
use crate::learners::{Model, Trainer};

use super::config::RunConfig;

/// Per-episode team reward, one series per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub seeds: Vec<u64>,
    pub rewards: Vec<Vec<f64>>,
}

impl LearningCurve {
    pub fn n_episodes(&self) -> usize {
        self.rewards.first().map_or(0, Vec::len)
    }

    /// Writes `seed,episode,reward` rows, seed-major.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["seed", "episode", "reward"])?;
        for (seed, series) in self.seeds.iter().zip(&self.rewards) {
            for (episode, r) in series.iter().enumerate() {
                w.write_record([seed.to_string(), episode.to_string(), r.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut curve = LearningCurve {
            seeds: Vec::new(),
            rewards: Vec::new(),
        };
        for row in reader.records() {
            let row = row?;
            let field = |i: usize| row.get(i).unwrap_or("");
            let bad = || Error::Config(format!("malformed row {:?} in {}", row, path.display()));
            let seed: u64 = field(0).parse().map_err(|_| bad())?;
            let episode: usize = field(1).parse().map_err(|_| bad())?;
            let reward: f64 = field(2).parse().map_err(|_| bad())?;
            if curve.seeds.last() != Some(&seed) {
                curve.seeds.push(seed);
                curve.rewards.push(Vec::new());
            }
            let series = curve.rewards.last_mut().expect("pushed above");
            if episode != series.len() {
                return Err(bad());
            }
            series.push(reward);
        }
        Ok(curve)
    }
}

/// A seed that stopped early, with the episode it failed in.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedFailure {
    pub seed: u64,
    pub episode: usize,
    pub message: String,
}

#[derive(Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub rewards: Vec<f64>,
    pub trainer: Trainer,
    pub failure: Option<SeedFailure>,
}

#[derive(Debug)]
pub struct RunOutcome {
    /// Completed seeds only.
    pub curve: LearningCurve,
    pub failures: Vec<SeedFailure>,
    /// Final state of every seed, completed or not, in seed-list order.
    pub runs: Vec<SeedRun>,
}

/// Trains one seed. Environment, parameters and episode randomness all come
/// from a generator seeded with `seed`. Divergence stops the seed early.
pub fn train_seed(config: &RunConfig, seed: u64) -> Result<SeedRun> {
    let env = GridWorld::new(config.env_kind, config.n_agents)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trainer = Trainer::new(
        config.algorithm,
        env,
        config.horizon,
        config.gamma,
        config.policy_rate,
        config.model_rate,
        &mut rng,
    );
    let mut rewards = Vec::with_capacity(config.n_episodes);
    let mut failure = None;
    for episode in 0..config.n_episodes {
        match trainer.train_episode(&mut rng) {
            Ok(r) => rewards.push(r),
            Err(e @ Error::Divergence { .. }) => {
                failure = Some(SeedFailure {
                    seed,
                    episode,
                    message: e.to_string(),
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(SeedRun {
        seed,
        rewards,
        trainer,
        failure,
    })
}

/// Trains every seed in parallel, returning results in seed-list order.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let runs: Vec<SeedRun> = config
        .seeds
        .par_iter()
        .map(|&seed| train_seed(config, seed))
        .collect::<Result<_>>()?;
    let mut curve = LearningCurve {
        seeds: Vec::new(),
        rewards: Vec::new(),
    };
    let mut failures = Vec::new();
    for r in &runs {
        match &r.failure {
            Some(f) => failures.push(f.clone()),
            None => {
                curve.seeds.push(r.seed);
                curve.rewards.push(r.rewards.clone());
            }
        }
    }
    Ok(RunOutcome { curve, failures, runs })
}

/// Serialized parameters of the trainer's second model, if any.
pub fn model_bytes(trainer: &Trainer) -> Option<Vec<u8>> {
    match &trainer.model {
        Model::None => None,
        Model::Critic(c) => Some(c.to_bytes()),
        Model::RewardNet(r) => Some(r.to_bytes()),
        Model::Local(l) => {
            let mut out = (l.nets.len() as u64).to_le_bytes().to_vec();
            for net in &l.nets {
                out.extend(net.to_bytes());
            }
            Some(out)
        }
    }
}

/// Resolved configuration followed by one `failed.<seed>` line per failure.
pub fn manifest_text(config: &RunConfig, failures: &[SeedFailure]) -> String {
    let mut s = config.manifest();
    for f in failures {
        let _ = writeln!(s, "failed.{} = episode {}: {}", f.seed, f.episode, f.message);
    }
    s
}

/// Writes `curve.csv`, `manifest.txt` and per-seed parameter snapshots under `dir`.
pub fn write_outputs(dir: &Path, config: &RunConfig, outcome: &RunOutcome) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    outcome.curve.write_csv(&dir.join("curve.csv"))?;
    let manifest = dir.join("manifest.txt");
    fs::write(&manifest, manifest_text(config, &outcome.failures)).map_err(|e| Error::io(&manifest, e))?;
    for r in &outcome.runs {
        let seed_dir = dir.join(format!("seed_{}", r.seed));
        fs::create_dir_all(&seed_dir).map_err(|e| Error::io(&seed_dir, e))?;
        let path = seed_dir.join("policy.bin");
        fs::write(&path, r.trainer.policy.to_bytes()).map_err(|e| Error::io(&path, e))?;
        if let Some(bytes) = model_bytes(&r.trainer) {
            let path = seed_dir.join("model.bin");
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}

/// Mean over the last tenth of the episodes (at least one).
pub fn final_decile_mean(series: &[f64]) -> f64 {
    let k = series.len().div_ceil(10).max(1).min(series.len());
    series[series.len() - k..].iter().sum::<f64>() / k as f64
}

/// Mean over the first tenth of the episodes (at least one).
pub fn first_decile_mean(series: &[f64]) -> f64 {
    let k = series.len().div_ceil(10).max(1).min(series.len());
    series[..k].iter().sum::<f64>() / k as f64
}
