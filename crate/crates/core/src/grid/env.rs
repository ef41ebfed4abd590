use std::collections::HashSet;
use std::path::PathBuf;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::map::{Cell, GridMap};
use super::observation::Observation;
use crate::error::{Error, Result};
use crate::metrics::EpisodeOutcome;

/// Consecutive start/goal sampling failures tolerated per obstacle layout,
/// and layouts tolerated before giving up.
pub const SAMPLING_ATTEMPTS: usize = 100;
pub const LAYOUT_ATTEMPTS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MapSource {
    /// Square `size × size` map with independent obstacle cells.
    Procedural { size: usize, obstacle_density: f64 },
    /// MovingAI file, read on every reset.
    File(PathBuf),
    /// A map already in memory (e.g. a MovingAI file loaded once).
    Fixed(GridMap),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub map_source: MapSource,
    pub n_agents: usize,
    /// Episode step limit.
    pub max_steps: usize,
    pub obs_radius: usize,
    pub seed: u64,
}

impl EnvConfig {
    pub const DEFAULT_OBS_RADIUS: usize = 2;

    /// Step limit default: 64 up to 8×8 maps, 256 for larger ones.
    pub fn default_max_steps(size: usize) -> usize {
        if size <= 8 {
            64
        } else {
            256
        }
    }

    pub fn procedural(size: usize, obstacle_density: f64, n_agents: usize) -> Self {
        Self {
            map_source: MapSource::Procedural { size, obstacle_density },
            n_agents,
            max_steps: Self::default_max_steps(size),
            obs_radius: Self::DEFAULT_OBS_RADIUS,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::config("n_agents", "must be at least 1"));
        }
        if self.max_steps == 0 {
            return Err(Error::config("max_steps", "must be at least 1"));
        }
        if self.obs_radius == 0 {
            return Err(Error::config("obs_radius", "must be at least 1"));
        }
        let cells = match &self.map_source {
            MapSource::Procedural { size, obstacle_density } => {
                if *size == 0 {
                    return Err(Error::config("size", "must be at least 1"));
                }
                if !(0.0..1.0).contains(obstacle_density) {
                    return Err(Error::config(
                        "obstacle_density",
                        format!("{obstacle_density} is outside [0, 1)"),
                    ));
                }
                size * size
            }
            MapSource::File(_) => return Ok(()),
            MapSource::Fixed(map) => map.free_cells().len(),
        };
        if 2 * self.n_agents > cells {
            return Err(Error::config(
                "n_agents",
                format!("{} agents need {} free cells, map has {cells}", self.n_agents, 2 * self.n_agents),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Stay,
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 5] = [Action::Stay, Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn delta(self) -> (i64, i64) {
        match self {
            Action::Stay => (0, 0),
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Cell,
    pub goal: Cell,
    /// Cleared once the agent reaches its goal; the agent then leaves the grid.
    pub active: bool,
}

/// Per-agent reward shaping applied by [`Env::step`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardScheme {
    pub goal: f64,
    pub step: f64,
    pub blocked: f64,
}

impl Default for RewardScheme {
    fn default() -> Self {
        Self {
            goal: 1.0,
            step: -0.01,
            blocked: -0.1,
        }
    }
}

/// Samples an obstacle layout and agent starts/goals. Starts are distinct
/// free cells, goals are distinct from each other and from every start, and
/// each goal is reachable from its agent's start.
pub fn generate_map<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> Result<(GridMap, Vec<AgentState>)> {
    config.validate()?;
    let loaded;
    let fixed = match &config.map_source {
        MapSource::Procedural { .. } => None,
        MapSource::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut map = GridMap::parse_movingai(&text)?;
            map.name = path.display().to_string();
            loaded = map;
            Some(&loaded)
        }
        MapSource::Fixed(map) => Some(map),
    };
    for _ in 0..LAYOUT_ATTEMPTS {
        let map = match (&config.map_source, fixed) {
            (MapSource::Procedural { size, obstacle_density }, _) => GridMap::random(*size, *obstacle_density, rng),
            (_, Some(map)) => map.clone(),
            _ => unreachable!(),
        };
        let free = map.free_cells();
        if free.len() >= 2 * config.n_agents {
            let labels = map.components();
            for _ in 0..SAMPLING_ATTEMPTS {
                if let Some(agents) = sample_agents(&map, &free, &labels, config.n_agents, rng) {
                    return Ok((map, agents));
                }
            }
        }
    }
    Err(Error::Generation(format!(
        "no valid placement for {} agents after {LAYOUT_ATTEMPTS} layouts of {SAMPLING_ATTEMPTS} attempts",
        config.n_agents
    )))
}

fn sample_agents<R: Rng + ?Sized>(
    map: &GridMap,
    free: &[Cell],
    labels: &[Option<usize>],
    n_agents: usize,
    rng: &mut R,
) -> Option<Vec<AgentState>> {
    let starts: Vec<Cell> = index::sample(rng, free.len(), n_agents)
        .into_iter()
        .map(|i| free[i])
        .collect();
    let mut taken: HashSet<Cell> = starts.iter().copied().collect();
    let label = |c: Cell| labels[c.0 * map.width() + c.1];
    let mut agents = Vec::with_capacity(n_agents);
    for start in starts {
        let candidates: Vec<Cell> = free
            .iter()
            .copied()
            .filter(|c| label(*c) == label(start) && !taken.contains(c))
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let goal = candidates[rng.random_range(0..candidates.len())];
        taken.insert(goal);
        agents.push(AgentState {
            position: start,
            goal,
            active: true,
        });
    }
    Some(agents)
}

/// What one call to [`Env::step`] produced.
#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    /// Observation per agent after the move; `None` for inactive agents.
    pub observations: Vec<Option<Observation>>,
    /// Reward per agent for this tick (0 for agents already inactive).
    pub rewards: Vec<f64>,
    /// Agents that reached their goal on this tick.
    pub reached_now: Vec<bool>,
    /// Episode summary so far.
    pub outcome: EpisodeOutcome,
    pub done: bool,
}

/// Multi-agent grid pathfinding episode with simultaneous moves.
#[derive(Clone, Debug, PartialEq)]
pub struct Env {
    map: GridMap,
    agents: Vec<AgentState>,
    occupancy: Vec<Option<usize>>,
    steps: usize,
    max_steps: usize,
    obs_radius: usize,
    rewards: RewardScheme,
    total_reward: f64,
}

impl Env {
    /// Resets from `config.seed`.
    pub fn new(config: &EnvConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::with_rng(config, &mut rng)
    }

    pub fn with_rng<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> Result<Self> {
        let (map, agents) = generate_map(config, rng)?;
        Ok(Self::from_parts(map, agents, config.max_steps, config.obs_radius))
    }

    /// Starts an episode from an explicit layout. Caller is responsible for
    /// distinct, free starts.
    pub fn from_parts(map: GridMap, agents: Vec<AgentState>, max_steps: usize, obs_radius: usize) -> Self {
        let mut occupancy = vec![None; map.height() * map.width()];
        for (i, a) in agents.iter().enumerate().filter(|(_, a)| a.active) {
            occupancy[a.position.0 * map.width() + a.position.1] = Some(i);
        }
        Self {
            map,
            agents,
            occupancy,
            steps: 0,
            max_steps,
            obs_radius,
            rewards: RewardScheme::default(),
            total_reward: 0.0,
        }
    }

    pub fn with_rewards(mut self, rewards: RewardScheme) -> Self {
        self.rewards = rewards;
        self
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    pub fn obs_radius(&self) -> usize {
        self.obs_radius
    }

    pub fn occupant(&self, cell: Cell) -> Option<usize> {
        self.occupancy[cell.0 * self.map.width() + cell.1]
    }

    pub fn is_done(&self) -> bool {
        self.steps >= self.max_steps || self.agents.iter().all(|a| !a.active)
    }

    pub fn outcome(&self) -> EpisodeOutcome {
        EpisodeOutcome {
            per_agent_reached: self.agents.iter().map(|a| !a.active).collect(),
            total_reward: self.total_reward,
            steps_used: self.steps,
            truncated: self.steps >= self.max_steps && self.agents.iter().any(|a| a.active),
        }
    }

    pub fn render(&self) -> String {
        let marks: Vec<_> = self
            .agents
            .iter()
            .map(|a| (a.active.then_some(a.position), a.goal))
            .collect();
        self.map.render(&marks)
    }

    fn proposed_target(&self, agent: &AgentState, action: Action) -> Cell {
        let (dr, dc) = action.delta();
        let (r, c) = (agent.position.0 as i64 + dr, agent.position.1 as i64 + dc);
        if self.map.blocked_at(r, c) {
            agent.position
        } else {
            (r as usize, c as usize)
        }
    }

    /// Resolves all moves simultaneously: moves into walls stay, agents
    /// contesting a cell all stay, swapping pairs stay, repeated until no
    /// conflict remains. Actions of inactive agents are ignored.
    pub fn step(&mut self, actions: &[Action]) -> Result<StepResult> {
        if actions.len() != self.agents.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} actions, got {}",
                self.agents.len(),
                actions.len()
            )));
        }
        if self.is_done() {
            return Err(Error::InvalidInput("step called on a finished episode".into()));
        }
        let width = self.map.width();
        let mut targets: Vec<Option<Cell>> = self
            .agents
            .iter()
            .zip(actions)
            .map(|(a, act)| a.active.then(|| self.proposed_target(a, *act)))
            .collect();

        let mut claims = vec![0u32; self.occupancy.len()];
        loop {
            claims.iter_mut().for_each(|c| *c = 0);
            for t in targets.iter().flatten() {
                claims[t.0 * width + t.1] += 1;
            }
            let mut revert = Vec::new();
            for (i, agent) in self.agents.iter().enumerate() {
                let Some(target) = targets[i] else { continue };
                if target == agent.position {
                    continue;
                }
                let contested = claims[target.0 * width + target.1] > 1;
                let swapped = self
                    .occupant(target)
                    .is_some_and(|j| targets[j] == Some(agent.position));
                if contested || swapped {
                    revert.push(i);
                }
            }
            if revert.is_empty() {
                break;
            }
            for i in revert {
                targets[i] = Some(self.agents[i].position);
            }
        }

        let mut rewards = vec![0.0; self.agents.len()];
        let mut reached_now = vec![false; self.agents.len()];
        for agent in self.agents.iter().filter(|a| a.active) {
            self.occupancy[agent.position.0 * width + agent.position.1] = None;
        }
        for (i, agent) in self.agents.iter_mut().enumerate() {
            let Some(target) = targets[i] else { continue };
            let mut reward = self.rewards.step;
            if actions[i] != Action::Stay && target == agent.position {
                reward += self.rewards.blocked;
            }
            agent.position = target;
            if target == agent.goal {
                agent.active = false;
                reached_now[i] = true;
                reward += self.rewards.goal;
            } else {
                self.occupancy[target.0 * width + target.1] = Some(i);
            }
            rewards[i] = reward;
        }
        self.steps += 1;
        self.total_reward += rewards.iter().sum::<f64>();

        let observations = (0..self.agents.len()).map(|i| self.observe(i).ok()).collect();
        Ok(StepResult {
            observations,
            rewards,
            reached_now,
            outcome: self.outcome(),
            done: self.is_done(),
        })
    }

    pub fn observe(&self, agent: usize) -> Result<Observation> {
        let state = self
            .agents
            .get(agent)
            .ok_or_else(|| Error::InvalidInput(format!("no agent {agent}")))?;
        if !state.active {
            return Err(Error::InvalidInput(format!("agent {agent} is inactive")));
        }
        Ok(Observation::build(self, agent))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_map(h: usize, w: usize) -> GridMap {
        GridMap::empty(h, w, "open")
    }

    fn agent(pos: Cell, goal: Cell) -> AgentState {
        AgentState {
            position: pos,
            goal,
            active: true,
        }
    }

    #[test]
    fn empty_map_generation() {
        let cfg = EnvConfig::procedural(8, 0.0, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (map, agents) = generate_map(&cfg, &mut rng).unwrap();
        assert_eq!(map.free_cells().len(), 64);
        assert_eq!(agents.len(), 2);
        let mut cells: Vec<Cell> = agents.iter().flat_map(|a| [a.position, a.goal]).collect();
        cells.sort();
        cells.dedup();
        assert_eq!(cells.len(), 4);
    }

    #[test]
    fn generation_fails_with_diagnostic() {
        let mut map = open_map(3, 3);
        for c in 0..3 {
            map.set_obstacle((1, c), true);
        }
        // four isolated corner cells: no start has a reachable goal
        let mut cfg = EnvConfig::procedural(3, 0.0, 1);
        map.set_obstacle((0, 1), true);
        map.set_obstacle((2, 1), true);
        cfg.map_source = MapSource::Fixed(map);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = generate_map(&cfg, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Generation(_)), "{err}");
    }

    #[test]
    fn validation() {
        assert!(EnvConfig::procedural(8, 1.0, 1).validate().is_err());
        assert!(EnvConfig::procedural(8, -0.1, 1).validate().is_err());
        assert!(EnvConfig::procedural(2, 0.0, 3).validate().is_err());
        assert!(EnvConfig::procedural(2, 0.0, 2).validate().is_ok());
        let mut cfg = EnvConfig::procedural(4, 0.1, 1);
        cfg.max_steps = 0;
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig { field, .. }) if field == "max_steps"));
    }

    #[test]
    fn single_agent_reaches_goal() {
        let mut env = Env::from_parts(open_map(4, 4), vec![agent((0, 0), (0, 1))], 10, 1);
        let r = env.step(&[Action::Right]).unwrap();
        assert!(r.done);
        assert_eq!(r.outcome.per_agent_reached, vec![true]);
        assert!(!r.outcome.truncated);
        assert!(r.observations[0].is_none());
        assert_eq!(env.occupant((0, 1)), None);
        assert!((r.rewards[0] - 0.99).abs() < 1e-12);
    }

    #[test]
    fn contested_cell_everyone_stays() {
        let mut env = Env::from_parts(
            open_map(3, 3),
            vec![agent((0, 0), (2, 2)), agent((0, 2), (2, 0))],
            10,
            1,
        );
        let r = env.step(&[Action::Right, Action::Left]).unwrap();
        assert_eq!(env.agents()[0].position, (0, 0));
        assert_eq!(env.agents()[1].position, (0, 2));
        assert!((r.rewards[0] + 0.11).abs() < 1e-12);
    }

    #[test]
    fn swap_is_blocked() {
        let mut env = Env::from_parts(
            open_map(1, 4),
            vec![agent((0, 1), (0, 3)), agent((0, 2), (0, 0))],
            10,
            1,
        );
        env.step(&[Action::Right, Action::Left]).unwrap();
        assert_eq!(env.agents()[0].position, (0, 1));
        assert_eq!(env.agents()[1].position, (0, 2));
    }

    #[test]
    fn blocked_chain_cascades() {
        // c is walled in, b follows c, a follows b: nobody moves
        let mut env = Env::from_parts(
            open_map(1, 3),
            vec![agent((0, 0), (0, 1)), agent((0, 1), (0, 0)), agent((0, 2), (0, 0))],
            10,
            1,
        );
        env.agents[2].goal = (0, 1);
        env.agents[1].goal = (0, 2);
        env.agents[0].goal = (0, 2);
        env.step(&[Action::Right, Action::Right, Action::Right]).unwrap();
        let pos: Vec<Cell> = env.agents().iter().map(|a| a.position).collect();
        assert_eq!(pos, vec![(0, 0), (0, 1), (0, 2)]);
    }

    #[test]
    fn follower_moves_into_vacated_cell() {
        let mut env = Env::from_parts(
            open_map(1, 4),
            vec![agent((0, 0), (0, 3)), agent((0, 1), (0, 3))],
            10,
            1,
        );
        env.agents[0].goal = (0, 2);
        env.step(&[Action::Right, Action::Right]).unwrap();
        assert_eq!(env.agents()[0].position, (0, 1));
        assert_eq!(env.agents()[1].position, (0, 2));
    }

    #[test]
    fn rotation_cycle_moves() {
        let mut env = Env::from_parts(
            open_map(2, 2),
            vec![
                agent((0, 0), (1, 1)),
                agent((0, 1), (1, 0)),
                agent((1, 1), (0, 0)),
                agent((1, 0), (0, 1)),
            ],
            10,
            1,
        );
        env.step(&[Action::Right, Action::Down, Action::Left, Action::Up]).unwrap();
        let pos: Vec<Cell> = env.agents().iter().map(|a| a.position).collect();
        assert_eq!(pos, vec![(0, 1), (1, 1), (1, 0), (0, 0)]);
    }

    #[test]
    fn edge_move_stays_and_counts_step() {
        let mut env = Env::from_parts(open_map(3, 3), vec![agent((0, 0), (2, 2))], 2, 1);
        let r = env.step(&[Action::Up]).unwrap();
        assert_eq!(env.agents()[0].position, (0, 0));
        assert_eq!(env.steps(), 1);
        assert!(!r.done);
        let r = env.step(&[Action::Left]).unwrap();
        assert!(r.done);
        assert!(r.outcome.truncated);
        assert_eq!(r.outcome.per_agent_reached, vec![false]);
        assert!(env.step(&[Action::Stay]).is_err());
    }

    #[test]
    fn inactive_actions_ignored_and_length_checked() {
        let mut env = Env::from_parts(
            open_map(3, 3),
            vec![agent((0, 0), (0, 1)), agent((2, 2), (2, 0))],
            10,
            1,
        );
        assert!(env.step(&[Action::Right]).is_err());
        env.step(&[Action::Right, Action::Stay]).unwrap();
        assert!(!env.agents()[0].active);
        env.step(&[Action::Down, Action::Left]).unwrap();
        assert_eq!(env.agents()[0].position, (0, 1));
        assert_eq!(env.agents()[1].position, (2, 1));
        assert!(env.observe(0).is_err());
    }

    #[test]
    fn reached_agent_counts_after_truncation() {
        let mut env = Env::from_parts(
            open_map(3, 3),
            vec![agent((0, 0), (0, 1)), agent((2, 2), (2, 0))],
            2,
            1,
        );
        env.step(&[Action::Right, Action::Stay]).unwrap();
        let r = env.step(&[Action::Stay, Action::Stay]).unwrap();
        assert!(r.done && r.outcome.truncated);
        assert_eq!(r.outcome.per_agent_reached, vec![true, false]);
        assert_eq!(r.outcome.individual_sr(), 0.5);
    }

    #[test]
    fn file_source_loads_movingai() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.map");
        std::fs::write(&path, "type octile\nheight 2\nwidth 3\nmap\n...\n.@.\n").unwrap();
        let mut cfg = EnvConfig::procedural(3, 0.0, 2);
        cfg.map_source = MapSource::File(path);
        let env = Env::new(&cfg).unwrap();
        assert!(env.map().is_obstacle((1, 1)));
        assert_eq!(env.agents().len(), 2);
    }
}
