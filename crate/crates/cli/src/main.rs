//! `drpg`: train, tune and analyse difference-rewards policy gradient agents.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use drpg_core::analysis::{
    critic_reports, describe_noise, noise_study, reward_net_reports, write_error_reports, write_noise_csv, DatasetKind,
    NoiseKind, NoiseProfile, DEFAULT_DATASET_SIZE, DEFAULT_NOISE_SAMPLES, DEFAULT_ROLLOUTS,
};
use drpg_core::harness::{
    emit_chart, final_decile_mean, gridsearch, run, standard_grid, summarize, write_outputs, write_summary_csv,
    ChartSeries, LearningCurve, RunConfig, DEFAULT_CONFIDENCE, GRIDSEARCH_SEEDS, SMOOTHING_WINDOW,
};
use drpg_core::learners::QCritic;
use drpg_core::{EnvKind, Error, GridWorld, JointPolicy, Result, RewardNet};

#[derive(Parser)]
#[command(
    name = "drpg",
    version,
    about = "Difference-rewards policy gradients for multi-agent gridworlds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one algorithm over several seeds and log learning curves.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Also print the fully resolved configuration.
        #[arg(long)]
        manifest: bool,
    },
    /// Search learning rates at three agents and report the best pair.
    Gridsearch {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated `policy_rate:model_rate` pairs (default: the shared grid).
        #[arg(long)]
        grid: Option<String>,
    },
    /// Prediction errors of trained reward networks and critics.
    Analyze {
        /// Output directory of a `dr_reinforce_r` training run.
        #[arg(long)]
        reward_run: Option<PathBuf>,
        /// Output directory of a `coma` or `q_a2c` training run.
        #[arg(long)]
        critic_run: Option<PathBuf>,
        /// Seed whose snapshots are analysed (default: each run's first seed).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_DATASET_SIZE)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_ROLLOUTS)]
        rollouts: usize,
        /// Generator seed for datasets and rollouts.
        #[arg(long, default_value_t = 0)]
        data_seed: u64,
        /// Rows are appended to this CSV file.
        #[arg(long, default_value = "errors.csv")]
        output: PathBuf,
    },
    /// Effect of noisy counterfactual rewards on the difference reward.
    Noise {
        #[arg(long)]
        env: EnvKind,
        #[arg(long, default_value_t = 3)]
        agents: usize,
        /// Noise draws per sample.
        #[arg(long, default_value_t = DEFAULT_NOISE_SAMPLES)]
        draws: usize,
        /// Sampled state-action pairs.
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "noise.csv")]
        output: PathBuf,
    },
    /// Chart several training runs of the same environment together.
    Chart {
        /// Output directories of `train` runs.
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "chart.svg")]
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CONFIDENCE)]
        confidence: f64,
        #[arg(long, default_value_t = SMOOTHING_WINDOW)]
        window: usize,
        #[arg(long)]
        title: Option<String>,
    },
}

/// Configuration sources: an optional key=value file, then flag overrides.
#[derive(Args)]
struct RunArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    policy_rate: Option<f64>,
    #[arg(long)]
    model_rate: Option<f64>,
    /// Comma-separated seeds; `a..b` is a half-open range.
    #[arg(long)]
    seeds: Option<String>,
    /// Learning-rate table: `published` (default) or `tuned`.
    #[arg(long)]
    rates: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut text = match &self.config {
            Some(path) => fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?,
            None => String::new(),
        };
        text.push('\n');
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                let _ = writeln!(text, "{key} = {v}");
            }
        };
        push("env", self.env.clone());
        push("algorithm", self.algorithm.clone());
        push("n_agents", self.agents.map(|v| v.to_string()));
        push("episodes", self.episodes.map(|v| v.to_string()));
        push("horizon", self.horizon.map(|v| v.to_string()));
        push("gamma", self.gamma.map(|v| v.to_string()));
        push("policy_rate", self.policy_rate.map(|v| v.to_string()));
        push("model_rate", self.model_rate.map(|v| v.to_string()));
        push("seeds", self.seeds.clone());
        push("rates", self.rates.clone());
        push("output", self.output.as_ref().map(|p| p.display().to_string()));
        RunConfig::parse(&text)
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn output_dir(config: &RunConfig) -> Result<&Path> {
    config
        .output_dir
        .as_deref()
        .ok_or_else(|| Error::Config("no output directory (use --output)".into()))
}

fn train(args: &RunArgs, print_manifest: bool) -> Result<()> {
    let config = args.resolve()?;
    for w in config.validate()? {
        eprintln!("warning: {w}");
    }
    let dir = output_dir(&config)?.to_path_buf();
    if print_manifest {
        print!("{}", config.manifest());
    }
    let outcome = run(&config)?;
    write_outputs(&dir, &config, &outcome)?;
    if outcome.curve.rewards.len() >= 2 {
        let rows = summarize(&outcome.curve, DEFAULT_CONFIDENCE, SMOOTHING_WINDOW)?;
        write_summary_csv(&dir.join("summary.csv"), &rows)?;
    }
    for (seed, series) in outcome.curve.seeds.iter().zip(&outcome.curve.rewards) {
        println!("seed {seed}: final-decile mean reward {:.4}", final_decile_mean(series));
    }
    if let Some(first) = outcome.failures.first() {
        return Err(Error::SeedsFailed {
            failed: outcome.failures.len(),
            total: config.seeds.len(),
            first: format!("seed {} at episode {}: {}", first.seed, first.episode, first.message),
        });
    }
    Ok(())
}

fn parse_grid(text: &str) -> Result<Vec<(f64, f64)>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|cell| {
            let bad = || Error::Config(format!("grid cell `{cell}` is not `policy_rate:model_rate`"));
            let (p, m) = cell.split_once(':').unwrap_or((cell, "0"));
            Ok((
                p.trim().parse().map_err(|_| bad())?,
                m.trim().parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

fn grid_search(args: &RunArgs, grid: Option<&str>) -> Result<()> {
    let mut config = args.resolve()?;
    if args.seeds.is_none() && !config_file_sets(args, "seeds")? {
        config.seeds = GRIDSEARCH_SEEDS.to_vec();
    }
    let grid = match grid {
        Some(g) => parse_grid(g)?,
        None => standard_grid(config.algorithm),
    };
    let result = gridsearch(&config, &grid, &config.seeds)?;
    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        result.write_csv(&dir.join("gridsearch.csv"))?;
    }
    for c in &result.cells {
        match c.score {
            Some(s) => println!("policy_rate={} model_rate={} score={s:.4}", c.policy_rate, c.model_rate),
            None => println!("policy_rate={} model_rate={} diverged", c.policy_rate, c.model_rate),
        }
    }
    let best = result.best();
    println!(
        "best {} {}: policy_rate={} model_rate={}",
        config.algorithm, config.env_kind, best.policy_rate, best.model_rate
    );
    Ok(())
}

fn config_file_sets(args: &RunArgs, key: &str) -> Result<bool> {
    let Some(path) = &args.config else {
        return Ok(false);
    };
    let text = String::from_utf8_lossy(&read_file(path)?).into_owned();
    Ok(text
        .lines()
        .filter_map(|l| l.split('#').next()?.split_once('='))
        .any(|(k, _)| k.trim() == key))
}

/// Configuration, environment and chosen seed directory of a training run.
fn load_run(dir: &Path, seed: Option<u64>) -> Result<(RunConfig, GridWorld, PathBuf)> {
    let manifest = String::from_utf8_lossy(&read_file(&dir.join("manifest.txt"))?).into_owned();
    let config = RunConfig::from_manifest(&manifest)?;
    let env = GridWorld::new(config.env_kind, config.n_agents)?;
    let seed = seed.unwrap_or(config.seeds[0]);
    Ok((config, env, dir.join(format!("seed_{seed}"))))
}

fn analyze(
    reward_run: Option<&Path>,
    critic_run: Option<&Path>,
    seed: Option<u64>,
    samples: usize,
    rollouts: usize,
    data_seed: u64,
    output: &Path,
) -> Result<()> {
    if reward_run.is_none() && critic_run.is_none() {
        return Err(Error::Config(
            "nothing to analyse (use --reward-run and/or --critic-run)".into(),
        ));
    }
    let print = |env: &GridWorld, reports: &[drpg_core::analysis::PredictionErrorReport]| {
        for r in reports {
            println!(
                "{} N={} {} {}: mean {:.4} std {:.4} mean_abs {:.4} (normalizer {:.4}, n={})",
                env.kind(),
                env.n_agents(),
                r.model_kind.as_str(),
                r.dataset_kind.as_str(),
                r.mean,
                r.std,
                r.mean_abs,
                r.normalizer,
                r.sample_count
            );
        }
    };
    if let Some(dir) = reward_run {
        let (config, env, seed_dir) = load_run(dir, seed)?;
        let policy = JointPolicy::from_bytes(&read_file(&seed_dir.join("policy.bin"))?)?;
        let net = RewardNet::from_bytes(&env, &read_file(&seed_dir.join("model.bin"))?)?;
        let reports = reward_net_reports(&net, &policy, samples, config.horizon, data_seed)?;
        write_error_reports(output, &env, &reports)?;
        print(&env, &reports);
    }
    if let Some(dir) = critic_run {
        let (config, env, seed_dir) = load_run(dir, seed)?;
        if !config.algorithm.has_critic() {
            return Err(Error::Config(format!("{} does not train a critic", config.algorithm)));
        }
        let policy = JointPolicy::from_bytes(&read_file(&seed_dir.join("policy.bin"))?)?;
        let critic = QCritic::from_bytes(&env, &read_file(&seed_dir.join("model.bin"))?)?;
        let reports = critic_reports(
            &critic,
            &env,
            &policy,
            &[DatasetKind::OnPolicy, DatasetKind::OffPolicy],
            samples,
            rollouts,
            config.horizon,
            config.gamma,
            data_seed,
        )?;
        write_error_reports(output, &env, &reports)?;
        print(&env, &reports);
    }
    Ok(())
}

fn noise(env: EnvKind, agents: usize, draws: usize, samples: usize, seed: u64, output: &Path) -> Result<()> {
    let env = GridWorld::new(env, agents)?;
    let mut studies = Vec::new();
    for (k, kind) in NoiseKind::ALL.into_iter().enumerate() {
        let profile = NoiseProfile::default_for(kind, &env, seed.wrapping_add(1 + k as u64));
        let rows = noise_study(&env, &profile, draws, samples, seed)?;
        describe_noise(&profile, &rows, &mut std::io::stdout()).map_err(|e| Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        })?;
        studies.push((profile, rows));
    }
    write_noise_csv(output, &studies)
}

fn chart(runs: &[PathBuf], output: &Path, confidence: f64, window: usize, title: Option<&str>) -> Result<()> {
    let mut series = Vec::new();
    let mut heading = None;
    for dir in runs {
        let (config, _, _) = load_run(dir, None)?;
        let curve = LearningCurve::read_csv(&dir.join("curve.csv"))?;
        let rows = summarize(&curve, confidence, window)?;
        heading.get_or_insert_with(|| format!("{} N={}", config.env_kind, config.n_agents));
        series.push(ChartSeries {
            label: config.algorithm.to_string(),
            rows,
        });
    }
    let title = title.map(str::to_string).or(heading).unwrap_or_default();
    emit_chart(&title, &series, output)?;
    println!("wrote {}", output.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train { run, manifest } => train(run, *manifest),
        Command::Gridsearch { run, grid } => grid_search(run, grid.as_deref()),
        Command::Analyze {
            reward_run,
            critic_run,
            seed,
            samples,
            rollouts,
            data_seed,
            output,
        } => analyze(
            reward_run.as_deref(),
            critic_run.as_deref(),
            *seed,
            *samples,
            *rollouts,
            *data_seed,
            output,
        ),
        Command::Noise {
            env,
            agents,
            draws,
            samples,
            seed,
            output,
        } => noise(*env, *agents, *draws, *samples, *seed, output),
        Command::Chart {
            runs,
            output,
            confidence,
            window,
            title,
        } => chart(runs, output, *confidence, *window, title.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("drpg: {e}");
            ExitCode::FAILURE
        }
    }
}
