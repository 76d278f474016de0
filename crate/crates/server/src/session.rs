//! Session lifecycle, roster and the per-tick game engine. Everything here is
//! synchronous; the network layer drives it from a timer.

use std::collections::BTreeMap;

use forage_core::config::ConfigError;
use forage_core::log::LogWriter;
use forage_core::world::{init_game_with_icons, WorldError, DEFAULT_ICONS};
use forage_core::{observer_view, validate_config, Action, EnvState, ForagerId, Record, SimConfig, ValidatedConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::protocol::{Direction, FinalScore, ServerMessage};
use crate::schedule::ScheduledGame;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SessionError {
    #[error("session is not accepting joins ({0:?})")]
    NotInLobby(SessionState),
    #[error("icon pool exhausted")]
    IconsExhausted,
    #[error("unknown participant {0}")]
    UnknownParticipant(u32),
    #[error("no game is running")]
    NotRunning,
    #[error("a game can only start from the lobby or between games ({0:?})")]
    CannotStart(SessionState),
    #[error("no connected participants")]
    NoParticipants,
    #[error("all scheduled games have been played")]
    ScheduleExhausted,
    #[error("no completed games")]
    NoCompletedGames,
    #[error("invalid game config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Lobby,
    Running,
    BetweenGames,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Participant {
    pub id: u32,
    pub name: String,
    pub icon: String,
    pub connected: bool,
}

/// A finished or aborted game's log.
#[derive(Debug, Clone, Serialize)]
pub struct GameLog {
    pub index: usize,
    pub name: String,
    pub condition: String,
    pub seed: u64,
    pub complete: bool,
    #[serde(skip)]
    pub bytes: Vec<u8>,
}

/// Messages produced by one tick, addressed by participant id.
#[derive(Debug, Default)]
pub struct TickOutput {
    pub tick: u64,
    pub views: Vec<(u32, ServerMessage)>,
    /// Present when this tick ended the game.
    pub game_over: Option<ServerMessage>,
}

struct LiveGame {
    index: usize,
    cfg: ValidatedConfig,
    state: EnvState,
    log: LogWriter<Vec<u8>>,
    /// Participant id for each forager id.
    members: Vec<u32>,
}

pub struct Session {
    pub id: String,
    pub seed: u64,
    template: SimConfig,
    schedule: Vec<ScheduledGame>,
    roster: BTreeMap<u32, Participant>,
    state: SessionState,
    next_game: usize,
    held: BTreeMap<u32, Direction>,
    icons: Vec<&'static str>,
    game: Option<LiveGame>,
    logs: Vec<GameLog>,
}

impl Session {
    pub fn new(id: impl Into<String>, seed: u64, template: SimConfig, schedule: Vec<ScheduledGame>) -> Session {
        let mut icons = DEFAULT_ICONS.to_vec();
        icons.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        // popped from the back
        icons.reverse();
        Session {
            id: id.into(),
            seed,
            template,
            schedule,
            roster: BTreeMap::new(),
            state: SessionState::Lobby,
            next_game: 0,
            held: BTreeMap::new(),
            icons,
            game: None,
            logs: Vec::new(),
        }
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn schedule(&self) -> &[ScheduledGame] {
        &self.schedule
    }

    pub fn roster(&self) -> impl Iterator<Item = &Participant> {
        self.roster.values()
    }

    pub fn participant(&self, id: u32) -> Option<&Participant> {
        self.roster.get(&id)
    }

    /// Index of the running game, or of the next one to run.
    pub fn current_game(&self) -> usize {
        self.game.as_ref().map_or(self.next_game, |g| g.index)
    }

    pub fn tick_seconds(&self) -> f64 {
        self.template.tick_seconds
    }

    pub fn join(&mut self, name: &str) -> Result<Participant, SessionError> {
        if self.state != SessionState::Lobby {
            return Err(SessionError::NotInLobby(self.state));
        }
        let icon = self.icons.pop().ok_or(SessionError::IconsExhausted)?;
        let id = self.roster.len() as u32;
        let p = Participant {
            id,
            name: name.to_string(),
            icon: icon.to_string(),
            connected: true,
        };
        self.roster.insert(id, p.clone());
        Ok(p)
    }

    /// Stores the participant's held direction; the latest frame before a tick wins.
    pub fn ingest_input(&mut self, participant: u32, dir: Option<Direction>) -> Result<(), SessionError> {
        if !self.roster.contains_key(&participant) {
            return Err(SessionError::UnknownParticipant(participant));
        }
        if self.state != SessionState::Running {
            return Err(SessionError::NotRunning);
        }
        match dir {
            Some(d) => self.held.insert(participant, d),
            None => self.held.remove(&participant),
        };
        Ok(())
    }

    /// The forager stays in the world and stands still from now on.
    pub fn disconnect(&mut self, participant: u32) {
        let Some(p) = self.roster.get_mut(&participant) else {
            return;
        };
        if !p.connected {
            return;
        }
        p.connected = false;
        self.held.remove(&participant);
        if let Some(g) = &mut self.game {
            let message = format!("participant {participant} disconnected");
            let _ = g.log.write(&Record::warning(g.state.tick, &g.cfg, message));
        }
    }

    /// Config for game `index`: the template with the scheduled condition and
    /// switch time, one forager per roster member, and a per-game seed.
    pub fn game_config(&self, index: usize) -> Option<SimConfig> {
        let g = self.schedule.get(index)?;
        Some(SimConfig {
            condition: g.condition,
            switch_time_choices: vec![g.switch_time],
            n_foragers: self.roster.len() as u32,
            seed: self.seed ^ index as u64,
            ..self.template.clone()
        })
    }

    /// Starts the next scheduled game and returns its `game_start` message
    /// followed by each participant's tick-0 view.
    pub fn start_game(&mut self) -> Result<(ServerMessage, TickOutput), SessionError> {
        if !matches!(self.state, SessionState::Lobby | SessionState::BetweenGames) {
            return Err(SessionError::CannotStart(self.state));
        }
        if !self.roster.values().any(|p| p.connected) {
            return Err(SessionError::NoParticipants);
        }
        let index = self.next_game;
        let sim = self.game_config(index).ok_or(SessionError::ScheduleExhausted)?;
        let cfg = validate_config(sim)?;
        let members: Vec<u32> = self.roster.keys().copied().collect();
        let icons = members.iter().map(|id| self.roster[id].icon.clone()).collect();
        let state = init_game_with_icons(&cfg, Some(icons))?;
        let mut log = LogWriter::new(Vec::new());
        let mut labels = BTreeMap::new();
        labels.insert("session".to_string(), self.id.clone());
        labels.insert("game".to_string(), index.to_string());
        labels.insert("condition".to_string(), cfg.condition().label());
        log.begin(&self.log_name(index, &cfg), &labels, &cfg, &state)
            .expect("writing to memory cannot fail");
        for p in self.roster.values().filter(|p| !p.connected) {
            let message = format!("participant {} disconnected", p.id);
            let _ = log.write(&Record::warning(0, &cfg, message));
        }
        let start = ServerMessage::GameStart {
            game: index,
            seconds: cfg.config().game_seconds,
        };
        self.held.clear();
        self.next_game += 1;
        self.state = SessionState::Running;
        let game = LiveGame {
            index,
            cfg,
            state,
            log,
            members,
        };
        let views = game.views(&self.roster);
        self.game = Some(game);
        Ok((
            start,
            TickOutput {
                tick: 0,
                views,
                game_over: None,
            },
        ))
    }

    /// Samples every held direction at once, steps the world one tick, and
    /// returns the views to send. Ends the game on its last tick.
    pub fn advance(&mut self) -> Result<TickOutput, SessionError> {
        let game = self.game.as_mut().ok_or(SessionError::NotRunning)?;
        let actions: BTreeMap<ForagerId, Action> = game
            .members
            .iter()
            .enumerate()
            .map(|(i, pid)| {
                let action = self.held.get(pid).map_or(Action::Stay, |d| Action::from(*d));
                (ForagerId(i as u32), action)
            })
            .collect();
        let events = game.state.step(&game.cfg, &actions)?;
        game.log
            .step(&events, &game.cfg, &game.state)
            .expect("writing to memory cannot fail");
        let mut out = TickOutput {
            tick: game.state.tick,
            views: game.views(&self.roster),
            game_over: None,
        };
        if game.state.is_over(&game.cfg) {
            out.game_over = Some(self.finish_game(true));
        }
        Ok(out)
    }

    fn finish_game(&mut self, complete: bool) -> ServerMessage {
        let mut game = self.game.take().expect("finish_game needs a running game");
        game.log
            .write(&Record::end(&game.state, &game.cfg, complete))
            .expect("writing to memory cannot fail");
        let scores = game
            .members
            .iter()
            .zip(&game.state.foragers)
            .map(|(pid, f)| FinalScore {
                id: *pid,
                name: self.roster[pid].name.clone(),
                icon: f.icon.clone(),
                score: f.total_collected,
            })
            .collect();
        self.logs.push(GameLog {
            index: game.index,
            name: self.log_name(game.index, &game.cfg),
            condition: game.cfg.condition().label(),
            seed: game.cfg.config().seed,
            complete,
            bytes: game.log.into_inner(),
        });
        self.held.clear();
        self.state = if !complete || self.next_game >= self.schedule.len() {
            SessionState::Finished
        } else {
            SessionState::BetweenGames
        };
        ServerMessage::GameOver { scores }
    }

    /// Ends the session. A running game is cut short and kept as a partial log.
    pub fn abort(&mut self) -> Option<ServerMessage> {
        let over = self.game.is_some().then(|| self.finish_game(false));
        self.state = SessionState::Finished;
        over
    }

    /// Every log so far: completed games and, after an abort, the partial one
    /// (flagged by `complete == false`).
    pub fn export_logs(&self) -> Result<&[GameLog], SessionError> {
        if !self.logs.iter().any(|l| l.complete) {
            return Err(SessionError::NoCompletedGames);
        }
        Ok(&self.logs)
    }

    pub fn logs(&self) -> &[GameLog] {
        &self.logs
    }

    fn log_name(&self, index: usize, cfg: &ValidatedConfig) -> String {
        format!(
            "{}_game{}_{}_seed{}",
            self.id,
            index,
            cfg.condition().label(),
            cfg.config().seed
        )
    }
}

impl LiveGame {
    fn views(&self, roster: &BTreeMap<u32, Participant>) -> Vec<(u32, ServerMessage)> {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, pid)| roster[pid].connected)
            .map(|(i, pid)| {
                let view = observer_view(&self.state, &self.cfg, ForagerId(i as u32))
                    .expect("every member has a forager");
                (*pid, ServerMessage::view(&view))
            })
            .collect()
    }
}
