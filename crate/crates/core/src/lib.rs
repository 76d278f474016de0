//! Two-pool group foraging: a deterministic gridworld with a mid-game
//! distribution switch, configurable information conditions, pluggable
//! forager strategies, a JSON-lines game log and the matching analysis that
//! runs over those logs.

pub mod agents;
pub mod analysis;
pub mod batch;
pub mod config;
pub mod geometry;
pub mod log;
pub mod runner;
pub mod view;
pub mod world;

pub use agents::{decide_action, preset, score_cell, AgentMemory, StrategyParams};
pub use analysis::{MatchingStats, OccupancySample, RunSummary};
pub use config::{validate_config, Condition, SimConfig, ValidatedConfig};
pub use geometry::{Action, Cell, Grid};
pub use log::{LogWriter, Record, RunLog};
pub use runner::{run_game, AgentController, Controller, HeadlessGame};
pub use view::{observer_view, ObserverView};
pub use world::{init_game, success_color, Color, EnvState, Event, ForagerId};
