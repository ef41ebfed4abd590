//! Partially observable multi-agent grid pathfinding.
//!
//! Agents move on a 4-connected grid, all at once. An agent that reaches its
//! goal leaves the grid. Maps come from a procedural generator or MovingAI
//! `.map` files.

mod env;
mod map;
mod observation;

pub use env::{
    generate_map, Action, AgentState, Env, EnvConfig, MapSource, RewardScheme, StepResult, LAYOUT_ATTEMPTS,
    SAMPLING_ATTEMPTS,
};
pub use map::{Cell, GridMap};
pub use observation::Observation;
