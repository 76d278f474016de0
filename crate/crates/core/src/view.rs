//! Per-observer filtering of the world. Everything a participant or agent
//! may know about the world at a tick is in its [`ObserverView`].

use crate::config::ValidatedConfig;
use crate::geometry::{Cell, Grid};
use crate::world::{Color, EnvState, ForagerId, WorldError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleForager {
    pub id: ForagerId,
    pub icon: String,
    pub position: Cell,
    pub color: Color,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverView {
    pub observer: ForagerId,
    pub tick: u64,
    pub t: f64,
    pub grid: Grid,
    pub position: Cell,
    pub score: u64,
    /// `(cell, pellets)`, empty unless food is visible.
    pub food: Vec<(Cell, u32)>,
    /// Own unexpired collection markers, only while food is invisible.
    pub markers: Vec<Cell>,
    /// Includes the observer itself.
    pub foragers: Vec<VisibleForager>,
}

impl ObserverView {
    pub fn others(&self) -> impl Iterator<Item = &VisibleForager> {
        self.foragers.iter().filter(move |f| f.id != self.observer)
    }
}

pub fn observer_view(state: &EnvState, cfg: &ValidatedConfig, observer: ForagerId) -> Result<ObserverView, WorldError> {
    let me = state.forager(observer).ok_or(WorldError::UnknownForager(observer))?;
    let cond = cfg.condition();

    let food = if cond.food_visible {
        state.food.iter().map(|(&c, &n)| (c, n)).collect()
    } else {
        Vec::new()
    };
    let markers = if cond.food_visible {
        Vec::new()
    } else {
        state
            .markers
            .iter()
            .filter(|m| m.owner == observer && m.expiry_tick > state.tick)
            .map(|m| m.cell)
            .collect()
    };
    let foragers = state
        .foragers
        .iter()
        .filter(|f| cond.foragers_visible || f.id == observer)
        .map(|f| VisibleForager {
            id: f.id,
            icon: f.icon.clone(),
            position: f.position,
            color: f.color,
        })
        .collect();

    Ok(ObserverView {
        observer,
        tick: state.tick,
        t: cfg.seconds(state.tick),
        grid: state.grid(),
        position: me.position,
        score: me.total_collected,
        food,
        markers,
        foragers,
    })
}
