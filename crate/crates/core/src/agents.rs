//! Headless forager strategies.
//!
//! An agent scores every grid cell as a linear combination of the information
//! sources its view exposes (visible food, its own reward history, other
//! foragers' locations and their success colors) minus a distance cost, picks
//! a target cell by softmax over those scores, and takes one step toward it.

use crate::geometry::{Action, Cell, Grid};
use crate::view::ObserverView;
use crate::world::Color;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::str::FromStr;
use thiserror::Error;

/// Masses below this are dropped from the reward history.
const HISTORY_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("unknown preset '{0}' (expected random, private, food_greedy, social or scrounger)")]
    UnknownPreset(String),
    #[error("unknown strategy parameter '{0}'")]
    UnknownParam(String),
    #[error("bad value for {key}: '{value}'")]
    BadValue { key: String, value: String },
    #[error("invalid parameters: {0}")]
    Invalid(String),
}

/// Scalar attached to each success color when weighting other foragers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColorValues {
    pub purple: f64,
    pub blue: f64,
    pub yellow: f64,
    pub orange: f64,
    pub red: f64,
}

impl Default for ColorValues {
    fn default() -> Self {
        ColorValues {
            purple: 0.0,
            blue: 0.25,
            yellow: 0.5,
            orange: 0.75,
            red: 1.0,
        }
    }
}

impl ColorValues {
    pub fn value(&self, color: Color) -> f64 {
        match color {
            Color::Purple => self.purple,
            Color::Blue => self.blue,
            Color::Yellow => self.yellow,
            Color::Orange => self.orange,
            Color::Red => self.red,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyParams {
    pub w_food: f64,
    pub w_hist: f64,
    pub w_soc: f64,
    pub w_succ: f64,
    pub w_dist: f64,
    pub temperature: f64,
    pub history_decay: f64,
    pub color_values: ColorValues,
}

impl Default for StrategyParams {
    fn default() -> Self {
        StrategyParams {
            w_food: 0.0,
            w_hist: 0.0,
            w_soc: 0.0,
            w_succ: 0.0,
            w_dist: 0.0,
            temperature: 1.0,
            history_decay: 0.99,
            color_values: ColorValues::default(),
        }
    }
}

pub const PRESET_NAMES: [&str; 5] = ["random", "private", "food_greedy", "social", "scrounger"];

// Selection temperatures and history decay for the shipped presets. Pellet
// counts and success colors live on a unit scale; history masses accumulate
// over many ticks and get a colder softmax.
const PRESET_TEMPERATURE: f64 = 1.0;
const PRESET_HISTORY_TEMPERATURE: f64 = 0.5;
const PRESET_HISTORY_DECAY: f64 = 0.998;

/// Named parameter sets for the strategy space.
pub fn preset(name: &str) -> Result<StrategyParams, StrategyError> {
    let base = StrategyParams {
        temperature: PRESET_TEMPERATURE,
        history_decay: PRESET_HISTORY_DECAY,
        ..StrategyParams::default()
    };
    let p = match name {
        "random" => base,
        "private" => StrategyParams {
            w_hist: 1.0,
            w_dist: 0.1,
            temperature: PRESET_HISTORY_TEMPERATURE,
            ..base
        },
        "food_greedy" => StrategyParams {
            w_food: 1.0,
            w_dist: 0.1,
            ..base
        },
        "social" => StrategyParams {
            w_hist: 1.0,
            w_soc: 0.5,
            w_dist: 0.1,
            temperature: PRESET_HISTORY_TEMPERATURE,
            ..base
        },
        "scrounger" => StrategyParams {
            w_succ: 1.0,
            w_dist: 0.1,
            ..base
        },
        other => return Err(StrategyError::UnknownPreset(other.to_string())),
    };
    Ok(p)
}

impl StrategyParams {
    pub fn validate(&self) -> Result<(), StrategyError> {
        let weights = [self.w_food, self.w_hist, self.w_soc, self.w_succ, self.w_dist];
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(StrategyError::Invalid("weights must be finite".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(StrategyError::Invalid("temperature must be >= 0".into()));
        }
        if !(self.history_decay > 0.0 && self.history_decay <= 1.0) {
            return Err(StrategyError::Invalid("history_decay must be in (0, 1]".into()));
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), StrategyError> {
        let v: f64 = value.trim().parse().map_err(|_| StrategyError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        })?;
        let slot = match key.trim() {
            "w_food" => &mut self.w_food,
            "w_hist" => &mut self.w_hist,
            "w_soc" => &mut self.w_soc,
            "w_succ" => &mut self.w_succ,
            "w_dist" => &mut self.w_dist,
            "temperature" => &mut self.temperature,
            "history_decay" => &mut self.history_decay,
            "color.purple" => &mut self.color_values.purple,
            "color.blue" => &mut self.color_values.blue,
            "color.yellow" => &mut self.color_values.yellow,
            "color.orange" => &mut self.color_values.orange,
            "color.red" => &mut self.color_values.red,
            other => return Err(StrategyError::UnknownParam(other.to_string())),
        };
        *slot = v;
        Ok(())
    }
}

/// Parses `preset` or `preset:key=value,key=value`.
impl FromStr for StrategyParams {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, overrides) = match s.split_once(':') {
            Some((n, o)) => (n, Some(o)),
            None => (s, None),
        };
        let mut p = preset(name.trim())?;
        for kv in overrides.into_iter().flat_map(|o| o.split(',')).filter(|kv| !kv.trim().is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| StrategyError::BadValue {
                key: kv.to_string(),
                value: String::new(),
            })?;
            p.set(k, v)?;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgentMemory {
    pub reward_history: BTreeMap<Cell, f64>,
    pub marker_memory: Vec<Cell>,
    pub last_target: Option<Cell>,
    kernel: Option<DistanceKernel>,
}

impl AgentMemory {
    pub fn history_mass(&self, cell: Cell) -> f64 {
        self.reward_history.get(&cell).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.reward_history.values().sum()
    }

    /// Decays the reward history, then credits this tick's collection at the
    /// observer's current cell.
    pub fn update(&mut self, view: &ObserverView, collected_this_tick: u32, params: &StrategyParams) {
        if params.history_decay < 1.0 {
            self.reward_history.retain(|_, m| {
                *m *= params.history_decay;
                *m >= HISTORY_FLOOR
            });
        }
        if collected_this_tick > 0 {
            *self.reward_history.entry(view.position).or_insert(0.0) += f64::from(collected_this_tick);
        }
        self.marker_memory.clone_from(&view.markers);
    }
}

/// Linear utility from the raw per-cell quantities.
fn combine(food: f64, hist: f64, soc: f64, succ: f64, dist: f64, p: &StrategyParams) -> f64 {
    p.w_food * food + p.w_hist * hist + p.w_soc * soc + p.w_succ * succ - p.w_dist * dist
}

/// Utility of one cell. Information absent from the view contributes nothing.
pub fn score_cell(cell: Cell, view: &ObserverView, mem: &AgentMemory, params: &StrategyParams) -> f64 {
    let food: u32 = view.food.iter().filter(|(c, _)| *c == cell).map(|(_, n)| n).sum();
    let others: Vec<_> = view.others().filter(|f| f.position == cell).collect();
    let succ: f64 = others.iter().map(|f| params.color_values.value(f.color)).sum();
    combine(
        f64::from(food),
        mem.history_mass(cell),
        others.len() as f64,
        succ,
        view.position.dist(cell),
        params,
    )
}

/// [`score_cell`] for every cell of the grid at once, in row-major order.
pub fn utility_field(view: &ObserverView, mem: &AgentMemory, params: &StrategyParams) -> Vec<f64> {
    let grid = view.grid;
    let mut utilities: Vec<f64> = grid.cells().map(|c| -params.w_dist * view.position.dist(c)).collect();
    for m in marked_cells(view, mem, params) {
        utilities[m.index] = m.utility;
    }
    utilities
}

fn softmax_weight(u: f64, max: f64, temperature: f64) -> f64 {
    let z = (u - max) / temperature;
    // exp underflows to 0 below about -745 anyway
    if z < -700.0 {
        0.0
    } else {
        z.exp()
    }
}

fn pick_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut r = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if r < *w {
            return i;
        }
        r -= w;
    }
    // rounding left r just past the end; fall back to the last positive weight
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Index drawn with probability proportional to `exp(u / temperature)`.
/// Zero temperature picks uniformly among the maximal entries.
pub fn softmax_choice<R: Rng + ?Sized>(utilities: &[f64], temperature: f64, rng: &mut R) -> usize {
    assert!(!utilities.is_empty(), "softmax over an empty set");
    let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if temperature == 0.0 {
        let best: Vec<usize> = (0..utilities.len()).filter(|&i| utilities[i] == max).collect();
        return best[rng.random_range(0..best.len())];
    }
    let weights: Vec<f64> = utilities.iter().map(|&u| softmax_weight(u, max, temperature)).collect();
    pick_weighted(&weights, rng)
}

/// A cell with food, history or another forager on it.
#[derive(Debug, Clone, Copy)]
struct Marked {
    index: usize,
    d2: usize,
    utility: f64,
}

/// Marked cells in row-major order. Every other cell scores `-w_dist * d`.
fn marked_cells(view: &ObserverView, mem: &AgentMemory, params: &StrategyParams) -> Vec<Marked> {
    let grid = view.grid;
    // (index, [food, hist, soc, succ])
    let mut terms: Vec<(usize, [f64; 4])> = Vec::with_capacity(view.food.len() + mem.reward_history.len() + 8);
    for &(c, k) in &view.food {
        if grid.contains(c) {
            terms.push((grid.index(c), [f64::from(k), 0.0, 0.0, 0.0]));
        }
    }
    for (&c, &m) in &mem.reward_history {
        if grid.contains(c) {
            terms.push((grid.index(c), [0.0, m, 0.0, 0.0]));
        }
    }
    for f in view.others() {
        if grid.contains(f.position) {
            terms.push((grid.index(f.position), [0.0, 0.0, 1.0, params.color_values.value(f.color)]));
        }
    }
    terms.sort_by_key(|t| t.0);
    let me = view.position;
    let mut out: Vec<Marked> = Vec::with_capacity(terms.len());
    let mut i = 0;
    while i < terms.len() {
        let index = terms[i].0;
        let mut sum = [0.0; 4];
        while i < terms.len() && terms[i].0 == index {
            for (s, t) in sum.iter_mut().zip(terms[i].1) {
                *s += t;
            }
            i += 1;
        }
        let c = grid.cell_at(index);
        let (dx, dy) = (i64::from(c.x - me.x), i64::from(c.y - me.y));
        let d2 = (dx * dx + dy * dy) as usize;
        out.push(Marked {
            index,
            d2,
            utility: combine(sum[0], sum[1], sum[2], sum[3], (d2 as f64).sqrt(), params),
        });
    }
    out
}

/// `exp(-w_dist * d / temperature)` by squared distance `d^2`, and its sum
/// over the whole grid for each observer cell. Depends only on the params
/// and the grid, so an agent builds it once.
#[derive(Debug, Clone, PartialEq)]
struct DistanceKernel {
    key: (u64, u64, i32, i32),
    base: Vec<f64>,
    totals: Vec<f64>,
}

impl DistanceKernel {
    fn key(params: &StrategyParams, grid: Grid) -> (u64, u64, i32, i32) {
        (params.w_dist.to_bits(), params.temperature.to_bits(), grid.width, grid.height)
    }

    fn new(params: &StrategyParams, grid: Grid) -> Self {
        let (w, h) = (i64::from(grid.width - 1), i64::from(grid.height - 1));
        let k = params.w_dist / params.temperature;
        DistanceKernel {
            key: Self::key(params, grid),
            base: (0..=(w * w + h * h) as usize).map(|d2| (-k * (d2 as f64).sqrt()).exp()).collect(),
            totals: vec![f64::NAN; grid.len()],
        }
    }

    fn total(&mut self, grid: Grid, me: Cell) -> f64 {
        let i = grid.index(me);
        if self.totals[i].is_nan() {
            let mut sum = 0.0;
            for_each_d2(grid, me, |_, d2| sum += self.base[d2]);
            self.totals[i] = sum;
        }
        self.totals[i]
    }
}

fn for_each_d2(grid: Grid, me: Cell, mut f: impl FnMut(usize, usize)) {
    let mut index = 0;
    for y in 0..grid.height {
        let dy = i64::from(y - me.y);
        for x in 0..grid.width {
            let dx = i64::from(x - me.x);
            f(index, (dx * dx + dy * dy) as usize);
            index += 1;
        }
    }
}

/// Softmax weights relative to `top`: marked cells carry their own weight,
/// every other cell `scale * kernel.base[d2]`.
struct SplitField {
    marked: Vec<Marked>,
    weights: Vec<f64>,
    scale: f64,
    plain_mass: f64,
}

impl SplitField {
    /// None when the split form could lose precision or does not apply.
    fn build(view: &ObserverView, mem: &mut AgentMemory, params: &StrategyParams) -> Option<SplitField> {
        let tau = params.temperature;
        if !(tau > 0.0 && params.w_dist >= 0.0) {
            return None;
        }
        let grid = view.grid;
        let diameter = f64::from(grid.width).hypot(f64::from(grid.height));
        if params.w_dist * diameter / tau > 600.0 {
            return None;
        }
        let marked = marked_cells(view, mem, params);
        // plain cells never score above 0, so the shift covers every cell
        let top = marked.iter().map(|m| m.utility).fold(0.0, f64::max);
        if top / tau > 600.0 {
            return None;
        }
        if mem.kernel.as_ref().is_none_or(|k| k.key != DistanceKernel::key(params, grid)) {
            mem.kernel = Some(DistanceKernel::new(params, grid));
        }
        let kernel = mem.kernel.as_mut().expect("kernel just built");
        let scale = (-top / tau).exp();
        let marked_base: f64 = marked.iter().map(|m| kernel.base[m.d2]).sum();
        let plain_mass = (kernel.total(grid, view.position) - marked_base).max(0.0) * scale;
        let weights = marked.iter().map(|m| softmax_weight(m.utility, top, tau)).collect();
        Some(SplitField {
            marked,
            weights,
            scale,
            plain_mass,
        })
    }

    fn sample<R: Rng + ?Sized>(&self, kernel: &DistanceKernel, grid: Grid, me: Cell, rng: &mut R) -> usize {
        let marked_mass: f64 = self.weights.iter().sum();
        let mut r = rng.random::<f64>() * (marked_mass + self.plain_mass);
        for (m, w) in self.marked.iter().zip(&self.weights) {
            if r < *w {
                return m.index;
            }
            r -= w;
        }
        let mut r = r / self.scale;
        let mut next_marked = self.marked.iter().map(|m| m.index).peekable();
        let mut chosen = None;
        let mut last_plain = None;
        for_each_d2(grid, me, |index, d2| {
            if chosen.is_some() {
                return;
            }
            if next_marked.peek() == Some(&index) {
                next_marked.next();
                return;
            }
            let b = kernel.base[d2];
            if r < b {
                chosen = Some(index);
            } else {
                r -= b;
                if b > 0.0 {
                    last_plain = Some(index);
                }
            }
        });
        // rounding can push r past the end
        chosen.or(last_plain).unwrap_or_else(|| {
            let last = self.weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
            self.marked.get(last).map_or(0, |m| m.index)
        })
    }

    #[cfg(test)]
    fn dense(&self, kernel: &DistanceKernel, grid: Grid, me: Cell) -> Vec<f64> {
        let mut out = vec![0.0; grid.len()];
        for_each_d2(grid, me, |i, d2| out[i] = self.scale * kernel.base[d2]);
        for (m, w) in self.marked.iter().zip(&self.weights) {
            out[m.index] = *w;
        }
        out
    }
}

/// Softmax draw of a target cell index over the whole grid.
fn choose_target<R: Rng + ?Sized>(
    view: &ObserverView,
    mem: &mut AgentMemory,
    params: &StrategyParams,
    rng: &mut R,
) -> usize {
    match SplitField::build(view, mem, params) {
        Some(field) => {
            let kernel = mem.kernel.as_ref().expect("built with the field");
            field.sample(kernel, view.grid, view.position, rng)
        }
        None => softmax_choice(&utility_field(view, mem, params), params.temperature, rng),
    }
}

/// Single step that shrinks the distance to `target`, moving along the axis
/// with the larger gap; equal gaps pick an axis at random.
pub fn step_toward<R: Rng + ?Sized>(from: Cell, target: Cell, rng: &mut R) -> Action {
    let dx = target.x - from.x;
    let dy = target.y - from.y;
    if dx == 0 && dy == 0 {
        return Action::Stay;
    }
    let horizontal = match dx.abs().cmp(&dy.abs()) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => rng.random_bool(0.5),
    };
    if horizontal {
        if dx > 0 {
            Action::Right
        } else {
            Action::Left
        }
    } else if dy > 0 {
        Action::Up
    } else {
        Action::Down
    }
}

pub fn decide_action<R: Rng + ?Sized>(
    view: &ObserverView,
    mem: &mut AgentMemory,
    params: &StrategyParams,
    rng: &mut R,
) -> Action {
    let target = view.grid.cell_at(choose_target(view, mem, params, rng));
    mem.last_target = Some(target);
    step_toward(view.position, target, rng)
}
