//! The authoritative foraging world: pool placement, food inflow, the
//! distribution switch, movement, collection and success coloring.
//!
//! All mutation goes through [`EnvState::step`]. Every random draw comes from
//! the state's own generator, so a game is fully determined by its config,
//! seed and action stream.

use crate::config::{SimConfig, ValidatedConfig};
use crate::geometry::{Action, Cell, Grid};
use crate::log::{ForagerSnapshot, Snapshot};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use thiserror::Error;

const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

/// Icon names handed out to foragers, modelled on the stock turtle shapes.
pub const DEFAULT_ICONS: [&str; 24] = [
    "heart", "butterfly", "dog", "cat", "fish", "bird", "star", "flower", "leaf", "tree", "house",
    "car", "truck", "airplane", "boat", "bug", "turtle", "rabbit", "cow", "sheep", "wolf", "face",
    "key", "wheel",
];

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("cannot place two pools of radius {radius} at least {min_distance} apart in a {width}x{height} grid")]
    PoolGeometry {
        width: i32,
        height: i32,
        radius: f64,
        min_distance: f64,
    },
    #[error("unknown forager {0}")]
    UnknownForager(ForagerId),
    #[error("expected {expected} icons, got {got}")]
    IconCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ForagerId(pub u32);

impl fmt::Display for ForagerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Purple,
    Blue,
    Yellow,
    Orange,
    Red,
}

impl Color {
    pub const ALL: [Color; 5] = [Color::Purple, Color::Blue, Color::Yellow, Color::Orange, Color::Red];
}

/// Color for the number of pellets collected in the trailing success window.
pub fn success_color(pellets_in_window: u64) -> Color {
    match pellets_in_window {
        0..=5 => Color::Blue,
        6..=10 => Color::Yellow,
        11..=15 => Color::Orange,
        _ => Color::Red,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForagerState {
    pub id: ForagerId,
    pub icon: String,
    pub position: Cell,
    pub total_collected: u64,
    /// `(tick, pellets)` for collections inside the trailing success window.
    pub collection_log: VecDeque<(u64, u32)>,
    pub color: Color,
}

impl ForagerState {
    pub fn pellets_since(&self, first_tick: u64) -> u64 {
        self.collection_log
            .iter()
            .filter(|(t, _)| *t >= first_tick)
            .map(|(_, p)| u64::from(*p))
            .sum()
    }
}

/// A collected-food marker, shown only to its owner while food is invisible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marker {
    pub cell: Cell,
    pub owner: ForagerId,
    /// First tick at which the marker is no longer shown.
    pub expiry_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Switch { tick: u64, rich_pool: usize },
    Spawn { tick: u64, pool: usize, cell: Cell },
    Move { tick: u64, forager: ForagerId, from: Cell, to: Cell },
    Collect { tick: u64, forager: ForagerId, cell: Cell, pellets: u32 },
}

#[derive(Debug, Clone)]
pub struct EnvState {
    pub tick: u64,
    pub pool_centers: [Cell; 2],
    pub rich_pool: usize,
    pub initial_rich_pool: usize,
    pub food: BTreeMap<Cell, u32>,
    pub foragers: Vec<ForagerState>,
    pub markers: Vec<Marker>,
    pub switch_time: f64,
    pub switch_tick: u64,
    pub switched: bool,
    pub spawned_total: u64,
    pub collected_total: u64,
    pool_cells: [Vec<Cell>; 2],
    grid: Grid,
    rng: ChaCha8Rng,
}

/// Draws two pool centers uniformly among in-margin pairs at least
/// `min_pool_distance` apart, by rejection.
pub fn place_pools<R: Rng + ?Sized>(rng: &mut R, c: &SimConfig) -> Result<[Cell; 2], WorldError> {
    let grid = Grid::new(c.world_width, c.world_height);
    let err = || WorldError::PoolGeometry {
        width: grid.width,
        height: grid.height,
        radius: c.pool_radius,
        min_distance: c.min_pool_distance,
    };
    let margin = c.pool_radius.ceil() as i32;
    let (lo_x, hi_x) = (margin, grid.width - 1 - margin);
    let (lo_y, hi_y) = (margin, grid.height - 1 - margin);
    if lo_x > hi_x || lo_y > hi_y {
        return Err(err());
    }
    let farthest = Cell::new(lo_x, lo_y).dist(Cell::new(hi_x, hi_y));
    if farthest < c.min_pool_distance {
        return Err(err());
    }
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let a = Cell::new(rng.random_range(lo_x..=hi_x), rng.random_range(lo_y..=hi_y));
        let b = Cell::new(rng.random_range(lo_x..=hi_x), rng.random_range(lo_y..=hi_y));
        if a.dist(b) >= c.min_pool_distance {
            return Ok([a, b]);
        }
    }
    Err(err())
}

/// Builds the tick-0 world with icons drawn from [`DEFAULT_ICONS`].
pub fn init_game(cfg: &ValidatedConfig) -> Result<EnvState, WorldError> {
    init_game_with_icons(cfg, None)
}

/// Builds the tick-0 world. When `icons` is given it must hold one icon per
/// forager, in forager-id order.
pub fn init_game_with_icons(cfg: &ValidatedConfig, icons: Option<Vec<String>>) -> Result<EnvState, WorldError> {
    let c = cfg.config();
    let n = c.n_foragers as usize;
    if let Some(icons) = &icons {
        if icons.len() != n {
            return Err(WorldError::IconCount {
                expected: n,
                got: icons.len(),
            });
        }
    }
    let grid = Grid::new(c.world_width, c.world_height);
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);

    let pool_centers = place_pools(&mut rng, c)?;
    let rich_pool = rng.random_range(0..2usize);
    let switch_idx = rng.random_range(0..cfg.switch_ticks.len());
    let switch_tick = cfg.switch_ticks[switch_idx];
    let switch_time = c.switch_time_choices[switch_idx];

    let positions: Vec<Cell> = (0..n)
        .map(|_| Cell::new(rng.random_range(0..grid.width), rng.random_range(0..grid.height)))
        .collect();
    let icons = match icons {
        Some(icons) => icons,
        None => {
            let mut pool: Vec<&str> = DEFAULT_ICONS.to_vec();
            pool.shuffle(&mut rng);
            (0..n)
                .map(|i| {
                    let base = pool[i % pool.len()];
                    match i / pool.len() {
                        0 => base.to_string(),
                        k => format!("{base}-{}", k + 1),
                    }
                })
                .collect()
        }
    };
    let color = if c.condition.success_indicated {
        Color::Blue
    } else {
        Color::Purple
    };
    let foragers = positions
        .into_iter()
        .zip(icons)
        .enumerate()
        .map(|(i, (position, icon))| ForagerState {
            id: ForagerId(i as u32),
            icon,
            position,
            total_collected: 0,
            collection_log: VecDeque::new(),
            color,
        })
        .collect();

    let pool_cells = [
        grid.disk(pool_centers[0], c.pool_radius),
        grid.disk(pool_centers[1], c.pool_radius),
    ];
    Ok(EnvState {
        tick: 0,
        pool_centers,
        rich_pool,
        initial_rich_pool: rich_pool,
        food: BTreeMap::new(),
        foragers,
        markers: Vec::new(),
        switch_time,
        switch_tick,
        switched: false,
        spawned_total: 0,
        collected_total: 0,
        pool_cells,
        grid,
        rng,
    })
}

impl EnvState {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn forager(&self, id: ForagerId) -> Option<&ForagerState> {
        self.foragers.iter().find(|f| f.id == id)
    }

    fn forager_index(&self, id: ForagerId) -> Option<usize> {
        self.foragers.iter().position(|f| f.id == id)
    }

    pub fn food_remaining(&self) -> u64 {
        self.food.values().map(|&p| u64::from(p)).sum()
    }

    /// Seconds at the current tick.
    pub fn seconds(&self, cfg: &ValidatedConfig) -> f64 {
        cfg.seconds(self.tick)
    }

    pub fn is_over(&self, cfg: &ValidatedConfig) -> bool {
        self.tick >= cfg.game_ticks
    }

    /// Flips the rich pool at the first tick at or past the switch time.
    /// Food already on the grid is left where it is.
    pub fn apply_switch(&mut self) -> Option<Event> {
        if self.switched || self.tick < self.switch_tick {
            return None;
        }
        self.switched = true;
        self.rich_pool = 1 - self.rich_pool;
        Some(Event::Switch {
            tick: self.tick,
            rich_pool: self.rich_pool,
        })
    }

    /// Independent Bernoulli draws for the rich and the poor pool; each hit
    /// stacks one pellet on a uniformly chosen cell of that pool.
    pub fn spawn_food_tick(&mut self, cfg: &ValidatedConfig) -> Vec<Event> {
        let mut events = Vec::new();
        let rich = self.rich_pool;
        for (pool, p) in [(rich, cfg.rich_prob), (1 - rich, cfg.poor_prob)] {
            if self.rng.random::<f64>() < p {
                let cells = &self.pool_cells[pool];
                let cell = cells[self.rng.random_range(0..cells.len())];
                *self.food.entry(cell).or_insert(0) += 1;
                self.spawned_total += 1;
                events.push(Event::Spawn {
                    tick: self.tick,
                    pool,
                    cell,
                });
            }
        }
        events
    }

    /// Advances one tick. Foragers missing from `actions` stay put.
    pub fn step(
        &mut self,
        cfg: &ValidatedConfig,
        actions: &BTreeMap<ForagerId, Action>,
    ) -> Result<Vec<Event>, WorldError> {
        if let Some(id) = actions.keys().find(|id| self.forager_index(**id).is_none()) {
            return Err(WorldError::UnknownForager(*id));
        }
        let tick = self.tick;
        let mut events = Vec::new();

        events.extend(self.apply_switch());
        events.extend(self.spawn_food_tick(cfg));

        for f in &mut self.foragers {
            let action = actions.get(&f.id).copied().unwrap_or_default();
            let to = action.apply(f.position, &self.grid);
            if to != f.position {
                events.push(Event::Move {
                    tick,
                    forager: f.id,
                    from: f.position,
                    to,
                });
                f.position = to;
            }
        }

        let mut order: Vec<usize> = (0..self.foragers.len()).collect();
        order.shuffle(&mut self.rng);
        let food_visible = cfg.condition().food_visible;
        for idx in order {
            let f = &mut self.foragers[idx];
            let Some(pellets) = self.food.remove(&f.position) else {
                continue;
            };
            f.total_collected += u64::from(pellets);
            f.collection_log.push_back((tick, pellets));
            self.collected_total += u64::from(pellets);
            if !food_visible {
                self.markers.push(Marker {
                    cell: f.position,
                    owner: f.id,
                    expiry_tick: tick + 1 + cfg.marker_ttl_ticks,
                });
            }
            events.push(Event::Collect {
                tick,
                forager: f.id,
                cell: f.position,
                pellets,
            });
        }

        let next = tick + 1;
        self.markers.retain(|m| m.expiry_tick > next);

        let window = cfg.success_window_ticks;
        let window_start = next.saturating_sub(window);
        for f in &mut self.foragers {
            while f.collection_log.front().is_some_and(|(t, _)| *t < window_start) {
                f.collection_log.pop_front();
            }
        }
        if cfg.condition().success_indicated && next % window == 0 {
            for f in &mut self.foragers {
                f.color = success_color(f.pellets_since(window_start));
            }
        }

        self.tick = next;
        Ok(events)
    }

    /// The periodic record of positions and scores, at snapshot ticks only.
    pub fn snapshot(&self, cfg: &ValidatedConfig) -> Option<Snapshot> {
        if self.tick % cfg.snapshot_ticks != 0 {
            return None;
        }
        Some(Snapshot {
            tick: self.tick,
            t: cfg.seconds(self.tick),
            foragers: self
                .foragers
                .iter()
                .map(|f| ForagerSnapshot {
                    id: f.id,
                    x: f.position.x,
                    y: f.position.y,
                    collected: f.total_collected,
                })
                .collect(),
            pool_centers: self.pool_centers,
            rich_pool: self.rich_pool,
            switched: self.switched,
            food_remaining: self.food_remaining(),
        })
    }
}
