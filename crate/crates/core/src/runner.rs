//! Headless games: agents drive the world and the log is written as the game runs.

use crate::agents::{decide_action, AgentMemory, StrategyError, StrategyParams};
use crate::config::{validate_config, ConfigError, SimConfig, ValidatedConfig};
use crate::geometry::Action;
use crate::log::{LogWriter, Record};
use crate::view::observer_view;
use crate::world::{init_game, EnvState, Event, ForagerId, WorldError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::io::{self, Write};
use thiserror::Error;

const AGENT_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("{got} strategies given for {foragers} foragers (need 1 or one per forager)")]
    StrategyCount { got: usize, foragers: usize },
    #[error("log write failed: {0}")]
    Io(#[from] io::Error),
}

/// Supplies each tick's actions. Foragers left out of the map stay put.
pub trait Controller {
    fn actions(&mut self, state: &EnvState, cfg: &ValidatedConfig) -> BTreeMap<ForagerId, Action>;

    /// Called after every step with that step's events.
    fn observe(&mut self, _events: &[Event]) {}
}

struct Agent {
    id: ForagerId,
    params: StrategyParams,
    memory: AgentMemory,
    rng: ChaCha8Rng,
    collected: u32,
}

/// One [`crate::agents`] decision-maker per forager.
pub struct AgentController {
    agents: Vec<Agent>,
}

impl AgentController {
    /// `strategies` holds either one entry for everybody or one per forager.
    pub fn new(cfg: &ValidatedConfig, strategies: &[StrategyParams]) -> Result<Self, RunError> {
        let n = cfg.config().n_foragers as usize;
        if !(strategies.len() == 1 || strategies.len() == n) {
            return Err(RunError::StrategyCount {
                got: strategies.len(),
                foragers: n,
            });
        }
        for s in strategies {
            s.validate()?;
        }
        let agents = (0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.config().seed ^ AGENT_SEED_SALT);
                rng.set_stream(i as u64);
                Agent {
                    id: ForagerId(i as u32),
                    params: strategies[i % strategies.len()].clone(),
                    memory: AgentMemory::default(),
                    rng,
                    collected: 0,
                }
            })
            .collect();
        Ok(AgentController { agents })
    }
}

impl Controller for AgentController {
    fn actions(&mut self, state: &EnvState, cfg: &ValidatedConfig) -> BTreeMap<ForagerId, Action> {
        self.agents
            .iter_mut()
            .map(|a| {
                let view = observer_view(state, cfg, a.id).expect("agent ids match the world");
                a.memory.update(&view, a.collected, &a.params);
                a.collected = 0;
                (a.id, decide_action(&view, &mut a.memory, &a.params, &mut a.rng))
            })
            .collect()
    }

    fn observe(&mut self, events: &[Event]) {
        for e in events {
            if let Event::Collect { forager, pellets, .. } = e {
                if let Some(a) = self.agents.get_mut(forager.0 as usize) {
                    a.collected += pellets;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub switch_time: f64,
    pub initial_rich_pool: usize,
    pub spawned: u64,
    pub collected: u64,
    pub remaining: u64,
    pub scores: Vec<u64>,
}

/// Plays a whole game, logging every record to `out`.
pub fn run_game<C: Controller, W: Write>(
    cfg: &ValidatedConfig,
    controller: &mut C,
    run_id: &str,
    labels: &BTreeMap<String, String>,
    out: W,
) -> Result<RunOutcome, RunError> {
    let mut state = init_game(cfg)?;
    let mut log = LogWriter::new(out);
    log.begin(run_id, labels, cfg, &state)?;
    while !state.is_over(cfg) {
        let actions = controller.actions(&state, cfg);
        let events = state.step(cfg, &actions)?;
        controller.observe(&events);
        log.step(&events, cfg, &state)?;
    }
    log.write(&Record::end(&state, cfg, true))?;
    log.flush()?;
    Ok(RunOutcome {
        switch_time: state.switch_time,
        initial_rich_pool: state.initial_rich_pool,
        spawned: state.spawned_total,
        collected: state.collected_total,
        remaining: state.food_remaining(),
        scores: state.foragers.iter().map(|f| f.total_collected).collect(),
    })
}

/// A fully specified agent-driven game.
#[derive(Debug, Clone)]
pub struct HeadlessGame {
    pub config: SimConfig,
    pub strategies: Vec<StrategyParams>,
    pub run_id: String,
    pub labels: BTreeMap<String, String>,
}

impl HeadlessGame {
    pub fn run<W: Write>(&self, out: W) -> Result<RunOutcome, RunError> {
        let cfg = validate_config(self.config.clone())?;
        let mut controller = AgentController::new(&cfg, &self.strategies)?;
        run_game(&cfg, &mut controller, &self.run_id, &self.labels, out)
    }

    /// Runs the game and returns the log bytes.
    pub fn run_to_vec(&self) -> Result<(RunOutcome, Vec<u8>), RunError> {
        let mut buf = Vec::new();
        let outcome = self.run(&mut buf)?;
        Ok((outcome, buf))
    }
}
