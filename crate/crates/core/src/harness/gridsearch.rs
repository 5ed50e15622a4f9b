use std::cmp::Ordering;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::config::RunConfig;
use super::run::{final_decile_mean, train_seed};

/// Team size the search runs at, whatever the base configuration says.
pub const GRIDSEARCH_AGENTS: usize = 3;
pub const GRIDSEARCH_SEEDS: [u64; 3] = [0, 1, 2];

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub policy_rate: f64,
    pub model_rate: f64,
    /// Final-decile mean reward of each seed that completed.
    pub seed_scores: Vec<f64>,
    /// Mean over seeds; `None` when any seed diverged.
    pub score: Option<f64>,
}

/// Cells ranked best first.
#[derive(Debug, Clone, PartialEq)]
pub struct GridsearchResult {
    pub cells: Vec<GridCell>,
}

impl GridsearchResult {
    pub fn best(&self) -> &GridCell {
        &self.cells[0]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["rank", "policy_rate", "model_rate", "score", "diverged"])?;
        for (rank, c) in self.cells.iter().enumerate() {
            w.write_record([
                rank.to_string(),
                c.policy_rate.to_string(),
                c.model_rate.to_string(),
                c.score.map_or_else(String::new, |s| s.to_string()),
                c.score.is_none().to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Higher score first, divergent cells last, ties to the smaller policy rate.
fn rank(a: &GridCell, b: &GridCell) -> Ordering {
    let by_score = match (a.score, b.score) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    };
    by_score
        .then(a.policy_rate.total_cmp(&b.policy_rate))
        .then(a.model_rate.total_cmp(&b.model_rate))
}

/// Trains every `(α_θ, α_model)` pair with three agents on each seed and ranks
/// the pairs by mean final-decile reward.
pub fn gridsearch(base: &RunConfig, grid: &[(f64, f64)], seeds: &[u64]) -> Result<GridsearchResult> {
    if grid.is_empty() {
        return Err(Error::Empty("rate grid"));
    }
    let configs: Vec<RunConfig> = grid
        .iter()
        .map(|&(policy_rate, model_rate)| RunConfig {
            n_agents: GRIDSEARCH_AGENTS,
            policy_rate,
            model_rate,
            seeds: seeds.to_vec(),
            ..base.clone()
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let outcomes: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let run = train_seed(&configs[i], seed)?;
            Ok(match run.failure {
                Some(_) => None,
                None => Some(final_decile_mean(&run.rewards)),
            })
        })
        .collect::<Result<_>>()?;
    let mut cells: Vec<GridCell> = configs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let per_seed = &outcomes[i * seeds.len()..(i + 1) * seeds.len()];
            let seed_scores: Vec<f64> = per_seed.iter().flatten().copied().collect();
            let score =
                (seed_scores.len() == seeds.len()).then(|| seed_scores.iter().sum::<f64>() / seed_scores.len() as f64);
            GridCell {
                policy_rate: c.policy_rate,
                model_rate: c.model_rate,
                seed_scores,
                score,
            }
        })
        .collect();
    cells.sort_by(rank);
    Ok(GridsearchResult { cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvKind;
    use crate::learners::Algorithm;

    fn base(algorithm: Algorithm) -> RunConfig {
        RunConfig {
            n_episodes: 5,
            horizon: 10,
            ..RunConfig::new(EnvKind::MultiRover, algorithm, 3)
        }
    }

    #[test]
    fn single_cell_grid_returns_that_cell() {
        let r = gridsearch(&base(Algorithm::Reinforce), &[(1e-3, 0.0)], &[0, 1, 2]).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert_eq!(r.best().policy_rate, 1e-3);
        assert_eq!(r.best().seed_scores.len(), 3);
    }

    #[test]
    fn divergent_cell_ranks_last_and_reruns_agree() {
        let grid = [(1e-3, 1e12), (1e-3, 1e-3), (5e-4, 5e-3)];
        let b = RunConfig {
            n_episodes: 30,
            ..base(Algorithm::QA2c)
        };
        let r = gridsearch(&b, &grid, &[0, 1]).unwrap();
        assert_eq!(r.cells.last().unwrap().model_rate, 1e12);
        assert!(r.cells.last().unwrap().score.is_none());
        assert_eq!(r, gridsearch(&b, &grid, &[0, 1]).unwrap());
    }

    #[test]
    fn ties_go_to_the_smaller_policy_rate() {
        let cell = |p, s| GridCell {
            policy_rate: p,
            model_rate: 0.0,
            seed_scores: vec![],
            score: s,
        };
        let mut cells = [
            cell(5e-2, Some(1.0)),
            cell(5e-4, Some(1.0)),
            cell(5e-3, None),
            cell(1e-1, Some(0.5)),
        ];
        cells.sort_by(rank);
        let order: Vec<f64> = cells.iter().map(|c| c.policy_rate).collect();
        assert_eq!(order, vec![5e-4, 5e-2, 1e-1, 5e-3]);
    }

    #[test]
    fn empty_grid_is_an_error() {
        assert!(gridsearch(&base(Algorithm::Reinforce), &[], &[0]).is_err());
    }
}
