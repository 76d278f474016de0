//! Game sequences for a session: a seeded condition order, with switch times
//! handed out round-robin across the sessions of one deployment.

use forage_core::Condition;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledGame {
    pub condition: Condition,
    pub switch_time: f64,
}

/// Every admissible information condition (six of the eight combinations).
pub fn enumerate_conditions() -> Vec<Condition> {
    Condition::all()
}

/// Shuffles `conditions` into a play order. The condition at input position
/// `j` gets `switch_choices[(rotation + j) % len]`, so passing the session's
/// index within the deployment as `rotation` pairs every condition with every
/// switch time over `len` consecutive sessions.
pub fn build_schedule<R: Rng + ?Sized>(
    conditions: &[Condition],
    switch_choices: &[f64],
    rotation: usize,
    rng: &mut R,
) -> Vec<ScheduledGame> {
    if conditions.is_empty() || switch_choices.is_empty() {
        return Vec::new();
    }
    let mut games: Vec<ScheduledGame> = conditions
        .iter()
        .enumerate()
        .map(|(j, &condition)| ScheduledGame {
            condition,
            switch_time: switch_choices[(rotation + j) % switch_choices.len()],
        })
        .collect();
    games.shuffle(rng);
    games
}

/// Schedule file entry: `{"condition": "<label>", "switch_time": 186}`.
#[derive(Debug, Clone, Deserialize)]
pub struct ScheduleEntry {
    pub condition: String,
    pub switch_time: f64,
}

pub fn parse_schedule(text: &str) -> Result<Vec<ScheduledGame>, String> {
    let entries: Vec<ScheduleEntry> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    entries
        .into_iter()
        .map(|e| {
            Ok(ScheduledGame {
                condition: e.condition.parse().map_err(|err: forage_core::config::ConfigError| err.to_string())?,
                switch_time: e.switch_time,
            })
        })
        .collect()
}
