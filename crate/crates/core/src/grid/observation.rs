use serde::{Deserialize, Serialize};

use super::env::Env;

/// Egocentric `(2r+1) × (2r+1)` view of one agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub radius: usize,
    /// 1 for obstacles and out-of-bounds cells.
    pub obstacles: Vec<u8>,
    /// 1 for cells holding another active agent. The centre is always 0.
    pub agents: Vec<u8>,
    /// 1 on the agent's own goal when it falls inside the window.
    pub goal: Vec<u8>,
    /// `(goal − position)` per axis, divided by the map's extent minus one,
    /// so each component lies in `[-1, 1]`.
    pub goal_offset: [f32; 2],
}

impl Observation {
    pub(crate) fn build(env: &Env, agent: usize) -> Self {
        let state = env.agents()[agent];
        let map = env.map();
        let r = env.obs_radius() as i64;
        let side = (2 * r + 1) as usize;
        let mut obstacles = Vec::with_capacity(side * side);
        let mut agents = Vec::with_capacity(side * side);
        let mut goal = Vec::with_capacity(side * side);
        let (pr, pc) = (state.position.0 as i64, state.position.1 as i64);
        for dr in -r..=r {
            for dc in -r..=r {
                let (cr, cc) = (pr + dr, pc + dc);
                let blocked = map.blocked_at(cr, cc);
                obstacles.push(blocked as u8);
                let in_bounds = cr >= 0 && cc >= 0 && (cr as usize) < map.height() && (cc as usize) < map.width();
                let cell = (cr as usize, cc as usize);
                let other = in_bounds && env.occupant(cell).is_some_and(|j| j != agent);
                agents.push(other as u8);
                goal.push((in_bounds && cell == state.goal) as u8);
            }
        }
        let scale = |extent: usize| (extent.max(2) - 1) as f32;
        let goal_offset = [
            (state.goal.0 as f32 - state.position.0 as f32) / scale(map.height()),
            (state.goal.1 as f32 - state.position.1 as f32) / scale(map.width()),
        ];
        Self {
            radius: env.obs_radius(),
            obstacles,
            agents,
            goal,
            goal_offset,
        }
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    /// Exact byte key for tabular lookup: the three window channels
    /// followed by the sign of each goal-offset component.
    pub fn table_key(&self) -> Vec<u8> {
        let sign = |v: f32| match v.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Less) => 0u8,
            Some(std::cmp::Ordering::Greater) => 2,
            _ => 1,
        };
        let mut key = Vec::with_capacity(3 * self.obstacles.len() + 2);
        key.extend_from_slice(&self.obstacles);
        key.extend_from_slice(&self.agents);
        key.extend_from_slice(&self.goal);
        key.push(sign(self.goal_offset[0]));
        key.push(sign(self.goal_offset[1]));
        key
    }
}
