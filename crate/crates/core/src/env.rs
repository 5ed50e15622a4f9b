//! Cooperative gridworlds with a shared, exactly queryable team reward.
//!
//! Two benchmark tasks live here: multi-rover (agents spread over landmarks)
//! and predator-prey (agents keep a randomly moving prey in sight). Both
//! expose [`GridWorld::exact_reward`] as a pure function of `(state, joint
//! action)` so counterfactual rewards can be evaluated without a simulator
//! reset.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Number of local actions available to every agent (and the prey).
pub const NUM_ACTIONS: usize = 5;
/// Side length of both benchmark grids.
pub const GRID_SIZE: usize = 10;
/// Episode length used by every learner unless overridden.
pub const DEFAULT_HORIZON: usize = 50;
pub const DEFAULT_GAMMA: f64 = 0.95;

/// Penalty applied per pair of rovers sharing a cell after moving.
pub const COLLISION_PENALTY: f64 = 0.5;
/// Team bonus when at least one predator has the prey in sight.
pub const CAPTURE_BONUS: f64 = 1.0;

/// Local action codes. The numeric value is the index used in joint actions
/// and policy outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
    Stay = 4,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [Action::Up, Action::Down, Action::Left, Action::Right, Action::Stay];

    pub fn from_index(index: usize) -> Option<Action> {
        Self::ALL.get(index).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// (Δrow, Δcol) of the move.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
            Action::Stay => (0, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: i32,
    pub col: i32,
}

impl Cell {
    pub const fn new(row: i32, col: i32) -> Self {
        Cell { row, col }
    }

    pub fn manhattan(self, other: Cell) -> i32 {
        (self.row - other.row).abs() + (self.col - other.col).abs()
    }

    pub fn chebyshev(self, other: Cell) -> i32 {
        (self.row - other.row).abs().max((self.col - other.col).abs())
    }
}

/// One joint action: a local action index per agent, in agent order.
pub type JointAction = Vec<usize>;

/// Per-agent observation: relative offsets to the other agents, then to the
/// entities, each divided by the grid width.
pub type Observation = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    MultiRover,
    PredatorPrey,
}

impl EnvKind {
    pub const ALL: [EnvKind; 2] = [EnvKind::MultiRover, EnvKind::PredatorPrey];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::MultiRover => "multi-rover",
            EnvKind::PredatorPrey => "predator-prey",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "multi-rover" | "rover" | "multirover" => Ok(EnvKind::MultiRover),
            "predator-prey" | "pp" | "predatorprey" => Ok(EnvKind::PredatorPrey),
            other => Err(Error::Config(format!("unknown environment `{other}`"))),
        }
    }
}

/// Full environment state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridState {
    pub agents: Vec<Cell>,
    /// Landmarks (multi-rover) or the single prey (predator-prey).
    pub entities: Vec<Cell>,
    pub step: usize,
}

/// One recorded environment step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub state: GridState,
    pub observations: Vec<Observation>,
    pub joint_action: JointAction,
    pub reward: f64,
}

/// A finished episode.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    /// Undiscounted sum of the shared reward.
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// A configured gridworld. Cheap to clone; holds no mutable state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridWorld {
    kind: EnvKind,
    n_agents: usize,
    width: usize,
    height: usize,
}

impl GridWorld {
    pub fn new(kind: EnvKind, n_agents: usize) -> Result<Self> {
        Self::with_size(kind, n_agents, GRID_SIZE, GRID_SIZE)
    }

    pub fn with_size(kind: EnvKind, n_agents: usize, width: usize, height: usize) -> Result<Self> {
        if n_agents < 2 {
            return Err(Error::Config(format!(
                "at least two agents are required, got {n_agents}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::Config("grid dimensions must be positive".into()));
        }
        let env = GridWorld {
            kind,
            n_agents,
            width,
            height,
        };
        let occupied = n_agents + env.n_entities();
        if occupied > width * height {
            return Err(Error::Config(format!(
                "{occupied} agents and entities do not fit on a {width}x{height} grid"
            )));
        }
        Ok(env)
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_entities(&self) -> usize {
        match self.kind {
            EnvKind::MultiRover => self.n_agents,
            EnvKind::PredatorPrey => 1,
        }
    }

    pub fn observation_width(&self) -> usize {
        2 * (self.n_agents - 1) + 2 * self.n_entities()
    }

    /// Width of [`GridWorld::encode_state`].
    pub fn state_width(&self) -> usize {
        2 * (self.n_agents + self.n_entities())
    }

    /// Bounds of the per-step team reward.
    pub fn reward_range(&self) -> (f64, f64) {
        match self.kind {
            EnvKind::MultiRover => {
                let n = self.n_agents as f64;
                let span = (self.width + self.height) as f64;
                let worst_distance = n / span * (span - 2.0);
                let worst_collisions = COLLISION_PENALTY * n * (n - 1.0) / 2.0;
                (-(worst_distance + worst_collisions), 0.0)
            }
            EnvKind::PredatorPrey => (0.0, CAPTURE_BONUS),
        }
    }

    /// Places agents and entities on distinct cells drawn uniformly without
    /// replacement.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> GridState {
        let n_cells = self.width * self.height;
        let picks = index::sample(rng, n_cells, self.n_agents + self.n_entities());
        let cells: Vec<Cell> = picks
            .into_iter()
            .map(|i| Cell::new((i / self.width) as i32, (i % self.width) as i32))
            .collect();
        let (agents, entities) = cells.split_at(self.n_agents);
        GridState {
            agents: agents.to_vec(),
            entities: entities.to_vec(),
            step: 0,
        }
    }

    pub fn reset_seeded(&self, seed: u64) -> GridState {
        self.reset(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn moved(&self, cell: Cell, action: usize) -> Cell {
        let (dr, dc) = Action::from_index(action)
            .unwrap_or_else(|| panic!("action index {action} out of range"))
            .delta();
        Cell::new(
            (cell.row + dr).clamp(0, self.height as i32 - 1),
            (cell.col + dc).clamp(0, self.width as i32 - 1),
        )
    }

    fn check_joint_action(&self, joint_action: &[usize]) {
        assert_eq!(
            joint_action.len(),
            self.n_agents,
            "joint action length must equal the number of agents"
        );
    }

    /// Advances one step. The returned reward is `exact_reward(state, joint_action)`.
    pub fn step<R: Rng + ?Sized>(&self, state: &GridState, joint_action: &[usize], rng: &mut R) -> (GridState, f64) {
        self.check_joint_action(joint_action);
        let reward = self.exact_reward(state, joint_action);
        let agents = state
            .agents
            .iter()
            .zip(joint_action)
            .map(|(&cell, &a)| self.moved(cell, a))
            .collect();
        let entities = match self.kind {
            EnvKind::MultiRover => state.entities.clone(),
            EnvKind::PredatorPrey => state
                .entities
                .iter()
                .map(|&prey| self.moved(prey, rng.random_range(0..NUM_ACTIONS)))
                .collect(),
        };
        let next = GridState {
            agents,
            entities,
            step: state.step + 1,
        };
        (next, reward)
    }

    /// Team reward of taking `joint_action` in `state`, computed from the
    /// post-move agent cells and the pre-move entity cells.
    pub fn exact_reward(&self, state: &GridState, joint_action: &[usize]) -> f64 {
        self.check_joint_action(joint_action);
        let mut next = [Cell::new(0, 0); 16];
        let mut heap;
        let next: &mut [Cell] = if self.n_agents <= next.len() {
            &mut next[..self.n_agents]
        } else {
            heap = vec![Cell::new(0, 0); self.n_agents];
            &mut heap
        };
        for ((slot, &cell), &a) in next.iter_mut().zip(&state.agents).zip(joint_action) {
            *slot = self.moved(cell, a);
        }
        self.reward_from_cells(next, &state.entities)
    }

    fn reward_from_cells(&self, agents: &[Cell], entities: &[Cell]) -> f64 {
        match self.kind {
            EnvKind::MultiRover => {
                let distance: i32 = entities
                    .iter()
                    .map(|&landmark| agents.iter().map(|&a| a.manhattan(landmark)).min().unwrap_or(0))
                    .sum();
                let mut collisions = 0usize;
                for (i, a) in agents.iter().enumerate() {
                    collisions += agents[i + 1..].iter().filter(|b| *b == a).count();
                }
                -(distance as f64) / (self.width + self.height) as f64 - COLLISION_PENALTY * collisions as f64
            }
            EnvKind::PredatorPrey => {
                let seen = entities
                    .iter()
                    .any(|&prey| agents.iter().any(|&p| p.chebyshev(prey) <= 1));
                if seen {
                    CAPTURE_BONUS
                } else {
                    0.0
                }
            }
        }
    }

    /// `exact_reward` with agent `agent`'s action replaced by `alt_action`.
    pub fn counterfactual_reward(
        &self,
        state: &GridState,
        joint_action: &[usize],
        agent: usize,
        alt_action: usize,
    ) -> f64 {
        assert!(agent < self.n_agents, "agent index {agent} out of range");
        let mut substituted = joint_action.to_vec();
        substituted[agent] = alt_action;
        self.exact_reward(state, &substituted)
    }

    /// Relative view of `agent`: offsets to every other agent (ascending
    /// index), then to every entity, scaled by the grid width.
    pub fn observe(&self, state: &GridState, agent: usize) -> Observation {
        assert!(agent < self.n_agents, "agent index {agent} out of range");
        let me = state.agents[agent];
        let scale = self.width as f64;
        let mut obs = Vec::with_capacity(self.observation_width());
        let others = state
            .agents
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != agent)
            .map(|(_, c)| c);
        for cell in others.chain(state.entities.iter()) {
            obs.push((cell.row - me.row) as f64 / scale);
            obs.push((cell.col - me.col) as f64 / scale);
        }
        obs
    }

    pub fn observe_all(&self, state: &GridState) -> Vec<Observation> {
        (0..self.n_agents).map(|i| self.observe(state, i)).collect()
    }

    /// Centralized state features: every agent cell then every entity cell,
    /// coordinates divided by the grid width.
    pub fn encode_state(&self, state: &GridState) -> Vec<f64> {
        let scale = self.width as f64;
        state
            .agents
            .iter()
            .chain(&state.entities)
            .flat_map(|c| [c.row as f64 / scale, c.col as f64 / scale])
            .collect()
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.row >= 0 && cell.col >= 0 && (cell.row as usize) < self.height && (cell.col as usize) < self.width
    }
}
