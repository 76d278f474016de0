//! Game configuration, information conditions and validation.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Relative tolerance used when checking that a duration is a whole number of ticks.
const TICK_MULTIPLE_EPS: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{0} must be positive (got {1})")]
    NonPositive(&'static str, f64),
    #[error("world dimensions must be at least 1x1 (got {0}x{1})")]
    EmptyWorld(u32, u32),
    #[error("{0} must be non-negative and finite (got {1})")]
    Negative(&'static str, f64),
    #[error("{name} ({value} s) is not a whole number of {tick} s ticks")]
    NotTickMultiple { name: &'static str, value: f64, tick: f64 },
    #[error("switch_time_choices is empty")]
    NoSwitchTimes,
    #[error("switch time {0} s lies outside (0, {1})")]
    SwitchOutOfRange(f64, f64),
    #[error("2 * membership_radius ({0}) must be less than min_pool_distance ({1})")]
    OverlappingMembership(f64, f64),
    #[error("success indication requires visible foragers")]
    ExcludedCondition,
    #[error("unknown condition '{0}'")]
    UnknownCondition(String),
}

/// The three information toggles a game is played under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition {
    pub food_visible: bool,
    pub foragers_visible: bool,
    pub success_indicated: bool,
}

impl Condition {
    pub const fn new(food_visible: bool, foragers_visible: bool, success_indicated: bool) -> Self {
        Condition {
            food_visible,
            foragers_visible,
            success_indicated,
        }
    }

    /// Success colors are meaningless when nobody can see anybody else.
    pub fn is_valid(&self) -> bool {
        !(self.success_indicated && !self.foragers_visible)
    }

    /// The six admissible combinations, in a fixed order.
    pub fn all() -> Vec<Condition> {
        let mut out = Vec::with_capacity(6);
        for food in [false, true] {
            for foragers in [false, true] {
                for success in [false, true] {
                    let c = Condition::new(food, foragers, success);
                    if c.is_valid() {
                        out.push(c);
                    }
                }
            }
        }
        out
    }

    /// Stable label such as `visfood_invisforagers_nosucc`.
    pub fn label(&self) -> String {
        format!(
            "{}food_{}foragers_{}",
            if self.food_visible { "vis" } else { "invis" },
            if self.foragers_visible { "vis" } else { "invis" },
            if self.success_indicated { "succ" } else { "nosucc" },
        )
    }
}

impl Default for Condition {
    fn default() -> Self {
        Condition::new(true, true, false)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Condition {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || ConfigError::UnknownCondition(s.to_string());
        let parts: Vec<&str> = s.trim().split('_').collect();
        let [food, foragers, success] = parts.as_slice() else {
            return Err(unknown());
        };
        let vis = |part: &str, noun: &str| match part.strip_suffix(noun) {
            Some("vis") => Ok(true),
            Some("invis") => Ok(false),
            _ => Err(unknown()),
        };
        let success = match *success {
            "succ" => true,
            "nosucc" => false,
            _ => return Err(unknown()),
        };
        let c = Condition::new(vis(food, "food")?, vis(foragers, "foragers")?, success);
        if !c.is_valid() {
            return Err(ConfigError::ExcludedCondition);
        }
        Ok(c)
    }
}

/// Full parameterisation of one game. Durations are in seconds, lengths in cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub world_width: u32,
    pub world_height: u32,
    pub tick_seconds: f64,
    pub game_seconds: f64,
    pub rich_coeff: f64,
    pub poor_coeff: f64,
    pub pool_radius: f64,
    pub min_pool_distance: f64,
    pub membership_radius: f64,
    pub success_window_seconds: f64,
    pub marker_ttl_seconds: f64,
    pub snapshot_interval_seconds: f64,
    pub switch_time_choices: Vec<f64>,
    pub condition: Condition,
    pub n_foragers: u32,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            world_width: 60,
            world_height: 60,
            tick_seconds: 0.1,
            game_seconds: 300.0,
            rich_coeff: 0.0525,
            poor_coeff: 0.0225,
            pool_radius: 8.0,
            min_pool_distance: 40.0,
            membership_radius: 13.0,
            success_window_seconds: 30.0,
            marker_ttl_seconds: 2.0,
            snapshot_interval_seconds: 2.0,
            switch_time_choices: vec![162.0, 174.0, 186.0, 198.0, 210.0],
            condition: Condition::default(),
            n_foragers: 10,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Share of new food entering the rich pool, 0.70 for the defaults.
    pub fn rich_share(&self) -> f64 {
        self.rich_coeff / (self.rich_coeff + self.poor_coeff)
    }
}

/// A config that passed [`validate_config`], with durations resolved to ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    cfg: SimConfig,
    pub rich_prob: f64,
    pub poor_prob: f64,
    pub game_ticks: u64,
    pub success_window_ticks: u64,
    pub marker_ttl_ticks: u64,
    pub snapshot_ticks: u64,
    pub switch_ticks: Vec<u64>,
    pub warnings: Vec<String>,
}

impl ValidatedConfig {
    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn condition(&self) -> Condition {
        self.cfg.condition
    }

    /// Seconds at the start of `tick`, rounded to the microsecond so that logs
    /// carry clean decimal values.
    pub fn seconds(&self, tick: u64) -> f64 {
        (tick as f64 * self.cfg.tick_seconds * 1e6).round() / 1e6
    }

    pub fn ticks_for(&self, seconds: f64) -> u64 {
        (seconds / self.cfg.tick_seconds).round() as u64
    }
}

fn whole_ticks(name: &'static str, value: f64, tick: f64) -> Result<u64, ConfigError> {
    let ratio = value / tick;
    let rounded = ratio.round();
    if (ratio - rounded).abs() > TICK_MULTIPLE_EPS * rounded.max(1.0) {
        return Err(ConfigError::NotTickMultiple { name, value, tick });
    }
    Ok(rounded as u64)
}

fn positive(name: &'static str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::NonPositive(name, value))
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ConfigError::Negative(name, value))
    }
}

/// Checks every config invariant and resolves durations to tick counts.
///
/// Per-tick spawn probabilities above 1 are clamped and reported in
/// `warnings` instead of being rejected.
pub fn validate_config(cfg: SimConfig) -> Result<ValidatedConfig, ConfigError> {
    if cfg.world_width == 0 || cfg.world_height == 0 {
        return Err(ConfigError::EmptyWorld(cfg.world_width, cfg.world_height));
    }
    positive("tick_seconds", cfg.tick_seconds)?;
    positive("game_seconds", cfg.game_seconds)?;
    positive("success_window_seconds", cfg.success_window_seconds)?;
    positive("marker_ttl_seconds", cfg.marker_ttl_seconds)?;
    positive("snapshot_interval_seconds", cfg.snapshot_interval_seconds)?;
    non_negative("rich_coeff", cfg.rich_coeff)?;
    non_negative("poor_coeff", cfg.poor_coeff)?;
    non_negative("pool_radius", cfg.pool_radius)?;
    non_negative("min_pool_distance", cfg.min_pool_distance)?;
    non_negative("membership_radius", cfg.membership_radius)?;

    let tick = cfg.tick_seconds;
    let game_ticks = whole_ticks("game_seconds", cfg.game_seconds, tick)?;
    let success_window_ticks = whole_ticks("success_window_seconds", cfg.success_window_seconds, tick)?;
    let marker_ttl_ticks = whole_ticks("marker_ttl_seconds", cfg.marker_ttl_seconds, tick)?;
    let snapshot_ticks = whole_ticks("snapshot_interval_seconds", cfg.snapshot_interval_seconds, tick)?;

    if cfg.switch_time_choices.is_empty() {
        return Err(ConfigError::NoSwitchTimes);
    }
    let mut switch_ticks = Vec::with_capacity(cfg.switch_time_choices.len());
    for &s in &cfg.switch_time_choices {
        if !(s.is_finite() && s > 0.0 && s < cfg.game_seconds) {
            return Err(ConfigError::SwitchOutOfRange(s, cfg.game_seconds));
        }
        switch_ticks.push(whole_ticks("switch time", s, tick)?);
    }

    if 2.0 * cfg.membership_radius >= cfg.min_pool_distance {
        return Err(ConfigError::OverlappingMembership(
            cfg.membership_radius,
            cfg.min_pool_distance,
        ));
    }
    if !cfg.condition.is_valid() {
        return Err(ConfigError::ExcludedCondition);
    }

    let mut warnings = Vec::new();
    let n = f64::from(cfg.n_foragers);
    let mut clamp = |name: &str, p: f64| {
        if p > 1.0 {
            warnings.push(format!("{name} spawn probability {p} clamped to 1"));
            1.0
        } else {
            p
        }
    };
    let rich_prob = clamp("rich", cfg.rich_coeff * n);
    let poor_prob = clamp("poor", cfg.poor_coeff * n);

    Ok(ValidatedConfig {
        cfg,
        rich_prob,
        poor_prob,
        game_ticks,
        success_window_ticks,
        marker_ttl_ticks,
        snapshot_ticks,
        switch_ticks,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_with_ten_foragers() {
        let v = validate_config(SimConfig::default()).unwrap();
        assert!((v.rich_prob - 0.525).abs() < 1e-12);
        assert!((v.poor_prob - 0.225).abs() < 1e-12);
        assert!(v.warnings.is_empty());
        assert_eq!(v.game_ticks, 3000);
        assert_eq!(v.switch_ticks, vec![1620, 1740, 1860, 1980, 2100]);
        assert_eq!(v.snapshot_ticks, 20);
        assert_eq!(v.success_window_ticks, 300);
        assert!((v.config().rich_share() - 0.70).abs() < 1e-12);
    }

    #[test]
    fn twenty_foragers_clamps_rich_probability() {
        let cfg = SimConfig {
            n_foragers: 20,
            ..SimConfig::default()
        };
        let v = validate_config(cfg).unwrap();
        assert_eq!(v.rich_prob, 1.0);
        assert!((v.poor_prob - 0.45).abs() < 1e-12);
        assert_eq!(v.warnings.len(), 1);
        assert!(v.warnings[0].contains("1.05"));
    }

    #[test]
    fn overlapping_membership_rejected() {
        let cfg = SimConfig {
            membership_radius: 25.0,
            ..SimConfig::default()
        };
        assert_eq!(
            validate_config(cfg),
            Err(ConfigError::OverlappingMembership(25.0, 40.0))
        );
    }

    #[test]
    fn bad_durations_rejected() {
        let cfg = SimConfig {
            tick_seconds: 0.0,
            ..SimConfig::default()
        };
        assert!(matches!(validate_config(cfg), Err(ConfigError::NonPositive(..))));
        let cfg = SimConfig {
            game_seconds: 300.05,
            ..SimConfig::default()
        };
        assert!(matches!(validate_config(cfg), Err(ConfigError::NotTickMultiple { .. })));
        let cfg = SimConfig {
            world_width: 0,
            ..SimConfig::default()
        };
        assert!(matches!(validate_config(cfg), Err(ConfigError::EmptyWorld(..))));
    }

    #[test]
    fn switch_times_must_fall_inside_game() {
        for bad in [0.0, 300.0, 301.0, -5.0] {
            let cfg = SimConfig {
                switch_time_choices: vec![bad],
                ..SimConfig::default()
            };
            assert!(matches!(validate_config(cfg), Err(ConfigError::SwitchOutOfRange(..))));
        }
        let cfg = SimConfig {
            switch_time_choices: vec![],
            ..SimConfig::default()
        };
        assert_eq!(validate_config(cfg), Err(ConfigError::NoSwitchTimes));
    }

    #[test]
    fn six_conditions_without_invisible_success() {
        let all = Condition::all();
        assert_eq!(all.len(), 6);
        assert!(all.iter().all(Condition::is_valid));
        assert!(!all.contains(&Condition::new(true, false, true)));
        assert!(!all.contains(&Condition::new(false, false, true)));
        for c in all {
            assert_eq!(c.label().parse::<Condition>().unwrap(), c);
        }
        assert!("invisfood_invisforagers_succ".parse::<Condition>().is_err());
        assert!("nonsense".parse::<Condition>().is_err());
    }
}
