//! Matching analysis over game logs.
//!
//! Snapshots become occupancy samples (share of foragers in each pool and
//! outside both). The normalized share of the initially rich pool is averaged
//! over equal windows before and after the switch; the drop between the two
//! windows is the adjustment `delta`, and the pre-switch gap from the input
//! share is the undermatching index. Per-run Gini coefficients and
//! collection efficiency complete the summary.

use crate::config::Condition;
use crate::geometry::Cell;
use crate::log::RunLog;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use thiserror::Error;

pub const DEFAULT_WINDOW_SECONDS: f64 = 78.0;

/// Slack for comparing logged times, which are rounded to the microsecond.
const TIME_EPS: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("membership radius {radius} overlaps pools {distance} apart")]
    OverlappingPools { radius: f64, distance: f64 },
    #[error("log has no snapshots")]
    NoSnapshots,
    #[error("log has no start record")]
    NoStart,
    #[error("snapshot at t={0} has no foragers")]
    NoForagers(f64),
    #[error("window [{start}, {end}) exceeds the logged span [{first}, {last}]")]
    WindowOutOfSpan { start: f64, end: f64, first: f64, last: f64 },
    #[error("no defined matching samples in the {0} window")]
    EmptyWindow(&'static str),
    #[error("negative total {0}")]
    NegativeTotal(i64),
    #[error("log has no spawn events")]
    NoSpawns,
    #[error("nothing to aggregate")]
    NoRuns,
}

/// Index of the pool whose center lies within `radius` (inclusive) of
/// `position`, if any.
pub fn pool_membership(position: Cell, centers: [Cell; 2], radius: f64) -> Result<Option<usize>, AnalysisError> {
    let distance = centers[0].dist(centers[1]);
    if 2.0 * radius >= distance {
        return Err(AnalysisError::OverlappingPools { radius, distance });
    }
    Ok((0..2).find(|&i| position.within(centers[i], radius)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OccupancySample {
    pub t: f64,
    pub p_pool1: f64,
    pub p_pool2: f64,
    pub p_outside: f64,
}

impl OccupancySample {
    pub fn pool(&self, index: usize) -> f64 {
        if index == 0 {
            self.p_pool1
        } else {
            self.p_pool2
        }
    }

    /// Normalized share of pool `index` among foragers inside either pool.
    pub fn normalized(&self, index: usize) -> Option<f64> {
        normalized_matching(self.pool(index), self.pool(1 - index))
    }
}

/// One sample per snapshot, proportions taken over every forager in the game.
pub fn occupancy_series(log: &RunLog) -> Result<Vec<OccupancySample>, AnalysisError> {
    if log.snapshots.is_empty() {
        return Err(AnalysisError::NoSnapshots);
    }
    let radius = log.config.membership_radius;
    log.snapshots
        .iter()
        .map(|s| {
            let n = s.foragers.len();
            if n == 0 {
                return Err(AnalysisError::NoForagers(s.t));
            }
            let mut counts = [0usize; 3];
            for f in &s.foragers {
                match pool_membership(f.cell(), s.pool_centers, radius)? {
                    Some(i) => counts[i] += 1,
                    None => counts[2] += 1,
                }
            }
            let n = n as f64;
            Ok(OccupancySample {
                t: s.t,
                p_pool1: counts[0] as f64 / n,
                p_pool2: counts[1] as f64 / n,
                p_outside: counts[2] as f64 / n,
            })
        })
        .collect()
}

/// `p1 / (p1 + p2)`, undefined when both pools are empty.
pub fn normalized_matching(p1: f64, p2: f64) -> Option<f64> {
    let sum = p1 + p2;
    if sum > 0.0 {
        Some(p1 / sum)
    } else {
        None
    }
}

/// Splits the series into `[switch - window, switch)` and `[switch, switch + window)`.
pub fn align_on_switch(
    series: &[OccupancySample],
    switch_time: f64,
    window: f64,
) -> Result<(Vec<OccupancySample>, Vec<OccupancySample>), AnalysisError> {
    let (start, end) = (switch_time - window, switch_time + window);
    let first = series.first().map_or(f64::NAN, |s| s.t);
    let last = series.last().map_or(f64::NAN, |s| s.t);
    if series.is_empty() || start < first - TIME_EPS || end > last + TIME_EPS {
        return Err(AnalysisError::WindowOutOfSpan { start, end, first, last });
    }
    let in_range = |s: &&OccupancySample, lo: f64, hi: f64| s.t >= lo - TIME_EPS && s.t < hi - TIME_EPS;
    let pre = series.iter().filter(|s| in_range(s, start, switch_time)).copied().collect();
    let post = series.iter().filter(|s| in_range(s, switch_time, end)).copied().collect();
    Ok((pre, post))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchingStats {
    pub pre_mean: f64,
    pub post_mean: f64,
    pub delta: f64,
    pub undermatching_index: f64,
}

fn mean_normalized(samples: &[OccupancySample], pool: usize, which: &'static str) -> Result<f64, AnalysisError> {
    let values: Vec<f64> = samples.iter().filter_map(|s| s.normalized(pool)).collect();
    if values.is_empty() {
        return Err(AnalysisError::EmptyWindow(which));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Pre/post means of the initially rich pool's normalized share.
/// `ideal_share` is the input share of the rich pool (0.70 by default).
pub fn matching_stats(
    series: &[OccupancySample],
    switch_time: f64,
    initially_rich: usize,
    window: f64,
    ideal_share: f64,
) -> Result<MatchingStats, AnalysisError> {
    let (pre, post) = align_on_switch(series, switch_time, window)?;
    let pre_mean = mean_normalized(&pre, initially_rich, "pre-switch")?;
    let post_mean = mean_normalized(&post, initially_rich, "post-switch")?;
    Ok(MatchingStats {
        pre_mean,
        post_mean,
        delta: pre_mean - post_mean,
        undermatching_index: pre_mean - ideal_share,
    })
}

/// Gini coefficient `sum_ij |x_i - x_j| / (2 n^2 mean)`; all-zero input gives 0.
///
/// Sorting turns the pairwise sum into `2 * sum_i (2i - n - 1) x_(i)` (1-based
/// ranks), evaluated in exact integer arithmetic before the final division.
pub fn gini(totals: &[i64]) -> Result<f64, AnalysisError> {
    if let Some(&neg) = totals.iter().find(|&&x| x < 0) {
        return Err(AnalysisError::NegativeTotal(neg));
    }
    let n = totals.len() as i128;
    let sum: i128 = totals.iter().map(|&x| i128::from(x)).sum();
    if n == 0 || sum == 0 {
        return Ok(0.0);
    }
    let mut sorted = totals.to_vec();
    sorted.sort_unstable();
    let pairwise: i128 = 2 * sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (2 * (i as i128 + 1) - n - 1) * i128::from(x))
        .sum::<i128>();
    Ok(pairwise as f64 / (2 * n * sum) as f64)
}

/// Collected over spawned pellets for the whole game.
pub fn efficiency(log: &RunLog) -> Result<f64, AnalysisError> {
    let spawned = log.total_spawned();
    if spawned == 0 {
        return Err(AnalysisError::NoSpawns);
    }
    Ok(log.total_collected() as f64 / spawned as f64)
}

/// Arithmetic mean and sample standard deviation (n - 1; 0 for one value).
pub fn mean_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    if values.iter().all(|v| *v == values[0]) {
        return Some((values[0], 0.0));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateStats {
    pub n: usize,
    pub mean: MatchingStats,
    pub sd: MatchingStats,
}

pub fn aggregate_runs(runs: &[MatchingStats]) -> Result<AggregateStats, AnalysisError> {
    let field = |f: fn(&MatchingStats) -> f64| {
        let values: Vec<f64> = runs.iter().map(f).collect();
        mean_sd(&values).ok_or(AnalysisError::NoRuns)
    };
    let pre = field(|s| s.pre_mean)?;
    let post = field(|s| s.post_mean)?;
    let delta = field(|s| s.delta)?;
    let under = field(|s| s.undermatching_index)?;
    Ok(AggregateStats {
        n: runs.len(),
        mean: MatchingStats {
            pre_mean: pre.0,
            post_mean: post.0,
            delta: delta.0,
            undermatching_index: under.0,
        },
        sd: MatchingStats {
            pre_mean: pre.1,
            post_mean: post.1,
            delta: delta.1,
            undermatching_index: under.1,
        },
    })
}

/// Everything computed for one log.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run_id: String,
    pub condition: Condition,
    pub switch_time: f64,
    pub initially_rich: usize,
    pub stats: MatchingStats,
    pub gini: f64,
    pub efficiency: f64,
    pub series: Vec<OccupancySample>,
}

pub fn analyze_log(log: &RunLog, window: f64) -> Result<RunSummary, AnalysisError> {
    let start = log.start.as_ref().ok_or(AnalysisError::NoStart)?;
    let series = occupancy_series(log)?;
    let stats = matching_stats(
        &series,
        start.switch_time,
        start.rich_pool,
        window,
        log.config.rich_share(),
    )?;
    let last = log.snapshots.last().ok_or(AnalysisError::NoSnapshots)?;
    let totals: Vec<i64> = match &log.end {
        Some(end) => end.scores.iter().map(|&s| s as i64).collect(),
        None => last.foragers.iter().map(|f| f.collected as i64).collect(),
    };
    Ok(RunSummary {
        run_id: log.run_id.clone(),
        condition: log.config.condition,
        switch_time: start.switch_time,
        initially_rich: start.rich_pool,
        stats,
        gini: gini(&totals)?,
        efficiency: efficiency(log)?,
        series,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionAggregate {
    pub condition: Condition,
    pub stats: AggregateStats,
    pub gini: (f64, f64),
    pub efficiency: (f64, f64),
}

/// Aggregates per condition, in condition order.
pub fn aggregate_by_condition(runs: &[RunSummary]) -> Vec<ConditionAggregate> {
    let mut groups: BTreeMap<Condition, Vec<&RunSummary>> = BTreeMap::new();
    for r in runs {
        groups.entry(r.condition).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(condition, rs)| {
            let stats: Vec<MatchingStats> = rs.iter().map(|r| r.stats).collect();
            let ginis: Vec<f64> = rs.iter().map(|r| r.gini).collect();
            let effs: Vec<f64> = rs.iter().map(|r| r.efficiency).collect();
            ConditionAggregate {
                condition,
                stats: aggregate_runs(&stats).expect("groups are non-empty"),
                gini: mean_sd(&ginis).expect("groups are non-empty"),
                efficiency: mean_sd(&effs).expect("groups are non-empty"),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct RunRow<'a> {
    run_id: &'a str,
    condition: String,
    switch_time: f64,
    pre_mean: f64,
    post_mean: f64,
    delta: f64,
    undermatching_index: f64,
    gini: f64,
    efficiency: f64,
}

#[derive(Serialize)]
struct AggregateRow {
    condition: String,
    n_runs: usize,
    pre_mean: f64,
    pre_mean_sd: f64,
    post_mean: f64,
    post_mean_sd: f64,
    delta: f64,
    delta_sd: f64,
    undermatching_index: f64,
    undermatching_index_sd: f64,
    gini: f64,
    gini_sd: f64,
    efficiency: f64,
    efficiency_sd: f64,
}

#[derive(Serialize)]
struct SeriesRow<'a> {
    run_id: &'a str,
    condition: String,
    t: f64,
    t_from_switch: f64,
    p_pool1: f64,
    p_pool2: f64,
    p_outside: f64,
    p_initially_rich: f64,
    normalized_initially_rich: Option<f64>,
}

pub fn write_runs_csv<W: Write>(out: W, runs: &[RunSummary]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in runs {
        w.serialize(RunRow {
            run_id: &r.run_id,
            condition: r.condition.label(),
            switch_time: r.switch_time,
            pre_mean: r.stats.pre_mean,
            post_mean: r.stats.post_mean,
            delta: r.stats.delta,
            undermatching_index: r.stats.undermatching_index,
            gini: r.gini,
            efficiency: r.efficiency,
        })?;
    }
    if runs.is_empty() {
        w.write_record([
            "run_id",
            "condition",
            "switch_time",
            "pre_mean",
            "post_mean",
            "delta",
            "undermatching_index",
            "gini",
            "efficiency",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(out: W, aggregates: &[ConditionAggregate]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for a in aggregates {
        w.serialize(AggregateRow {
            condition: a.condition.label(),
            n_runs: a.stats.n,
            pre_mean: a.stats.mean.pre_mean,
            pre_mean_sd: a.stats.sd.pre_mean,
            post_mean: a.stats.mean.post_mean,
            post_mean_sd: a.stats.sd.post_mean,
            delta: a.stats.mean.delta,
            delta_sd: a.stats.sd.delta,
            undermatching_index: a.stats.mean.undermatching_index,
            undermatching_index_sd: a.stats.sd.undermatching_index,
            gini: a.gini.0,
            gini_sd: a.gini.1,
            efficiency: a.efficiency.0,
            efficiency_sd: a.efficiency.1,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series_csv<W: Write>(out: W, runs: &[RunSummary]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in runs {
        for s in &r.series {
            w.serialize(SeriesRow {
                run_id: &r.run_id,
                condition: r.condition.label(),
                t: s.t,
                t_from_switch: ((s.t - r.switch_time) * 1e6).round() / 1e6,
                p_pool1: s.p_pool1,
                p_pool2: s.p_pool2,
                p_outside: s.p_outside,
                p_initially_rich: s.pool(r.initially_rich),
                normalized_initially_rich: s.normalized(r.initially_rich),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(t: f64, p1: f64, p2: f64) -> OccupancySample {
        OccupancySample {
            t,
            p_pool1: p1,
            p_pool2: p2,
            p_outside: 1.0 - p1 - p2,
        }
    }

    fn series(f: impl Fn(f64) -> (f64, f64)) -> Vec<OccupancySample> {
        (0..=150)
            .map(|i| {
                let t = f64::from(i) * 2.0;
                let (a, b) = f(t);
                sample(t, a, b)
            })
            .collect()
    }

    /// O(n^2) definition, kept independent of the sorted formula.
    fn gini_pairwise(x: &[i64]) -> f64 {
        let n = x.len() as i128;
        let sum: i128 = x.iter().map(|&v| i128::from(v)).sum();
        if sum == 0 {
            return 0.0;
        }
        let mut pairs: i128 = 0;
        for a in x {
            for b in x {
                pairs += i128::from((a - b).abs());
            }
        }
        pairs as f64 / (2 * n * sum) as f64
    }

    #[test]
    fn membership_examples() {
        let centers = [Cell::new(20, 20), Cell::new(60, 20)];
        // exactly 13 away from pool 1 (5-12-13 triangle)
        assert_eq!(pool_membership(Cell::new(25, 32), centers, 13.0), Ok(Some(0)));
        assert_eq!(pool_membership(Cell::new(20, 33), centers, 13.0), Ok(Some(0)));
        assert_eq!(pool_membership(Cell::new(60, 20), centers, 13.0), Ok(Some(1)));
        assert_eq!(pool_membership(Cell::new(40, 20), centers, 13.0), Ok(None));
        assert!(pool_membership(Cell::new(0, 0), centers, 25.0).is_err());
    }

    #[test]
    fn normalized_examples() {
        assert!((normalized_matching(0.4, 0.1).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(normalized_matching(0.35, 0.35), Some(0.5));
        assert_eq!(normalized_matching(0.0, 0.0), None);
    }

    #[test]
    fn window_alignment() {
        let s = series(|_| (0.5, 0.2));
        let (pre, post) = align_on_switch(&s, 186.0, 78.0).unwrap();
        assert_eq!(pre.len(), 39);
        assert_eq!(post.len(), 39);
        assert_eq!(pre.first().unwrap().t, 108.0);
        assert_eq!(pre.last().unwrap().t, 184.0);
        assert_eq!(post.first().unwrap().t, 186.0);
        assert_eq!(post.last().unwrap().t, 262.0);
        assert!(matches!(
            align_on_switch(&s, 60.0, 78.0),
            Err(AnalysisError::WindowOutOfSpan { .. })
        ));
        assert!(align_on_switch(&s[..100], 186.0, 78.0).is_err());
        // latest default switch still fits a 300 s game
        assert!(align_on_switch(&s, 210.0, 78.0).is_ok());
    }

    #[test]
    fn stats_examples() {
        let flat = series(|_| (0.7, 0.3));
        let st = matching_stats(&flat, 186.0, 0, 78.0, 0.7).unwrap();
        assert!(st.delta.abs() < 1e-12);
        assert!(st.undermatching_index.abs() < 1e-12);

        let stepped = series(|t| if t < 186.0 { (0.7, 0.3) } else { (0.4, 0.6) });
        let st = matching_stats(&stepped, 186.0, 0, 78.0, 0.7).unwrap();
        assert!((st.delta - 0.3).abs() < 1e-12);
        assert_eq!(st.delta, st.pre_mean - st.post_mean);
        // from the other pool's point of view the movement is toward it
        let st1 = matching_stats(&stepped, 186.0, 1, 78.0, 0.7).unwrap();
        assert!((st1.delta + 0.3).abs() < 1e-12);

        let empty = series(|t| if t < 186.0 { (0.0, 0.0) } else { (0.5, 0.5) });
        assert_eq!(
            matching_stats(&empty, 186.0, 0, 78.0, 0.7),
            Err(AnalysisError::EmptyWindow("pre-switch"))
        );
    }

    #[test]
    fn undefined_samples_are_skipped() {
        let s = series(|t| if (t as i64) % 4 == 0 { (0.0, 0.0) } else { (0.6, 0.2) });
        let st = matching_stats(&s, 186.0, 0, 78.0, 0.7).unwrap();
        assert!((st.pre_mean - 0.75).abs() < 1e-12);
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[4, 4, 4]).unwrap(), 0.0);
        assert_eq!(gini(&[0, 0, 0, 10]).unwrap(), 0.75);
        assert_eq!(gini_pairwise(&[0, 0, 0, 10]), 0.75);
        assert_eq!(gini(&[1, 1, 1, 1, 16]).unwrap(), 0.6);
        assert_eq!(gini_pairwise(&[1, 1, 1, 1, 16]), 0.6);
        assert_eq!(gini(&[0, 0]).unwrap(), 0.0);
        assert_eq!(gini(&[7]).unwrap(), 0.0);
        assert_eq!(gini(&[1, -2]), Err(AnalysisError::NegativeTotal(-2)));
    }

    #[test]
    fn aggregate_examples() {
        let s = |d: f64| MatchingStats {
            pre_mean: 0.7,
            post_mean: 0.7 - d,
            delta: d,
            undermatching_index: 0.0,
        };
        let one = aggregate_runs(&[s(0.25)]).unwrap();
        assert_eq!(one.mean.delta, 0.25);
        assert_eq!(one.sd.delta, 0.0);
        let two = aggregate_runs(&[s(0.2), s(0.4)]).unwrap();
        assert!((two.mean.delta - 0.3).abs() < 1e-12);
        assert!((two.sd.delta - 0.141_421_356).abs() < 1e-8);
        let twelve = aggregate_runs(&[s(0.1); 12]).unwrap();
        assert_eq!(twelve.sd.delta, 0.0);
        assert_eq!(aggregate_runs(&[]), Err(AnalysisError::NoRuns));
    }

    proptest! {
        #[test]
        fn gini_matches_pairwise(x in proptest::collection::vec(0i64..=20, 1..=8)) {
            prop_assert_eq!(gini(&x).unwrap(), gini_pairwise(&x));
        }

        #[test]
        fn gini_in_unit_interval(x in proptest::collection::vec(0i64..=1000, 1..=50)) {
            let g = gini(&x).unwrap();
            prop_assert!((0.0..1.0).contains(&g));
        }

        #[test]
        fn normalization_is_complementary(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0) {
            match (normalized_matching(p1, p2), normalized_matching(p2, p1)) {
                (Some(a), Some(b)) => {
                    prop_assert!((0.0..=1.0).contains(&a));
                    prop_assert!((a + b - 1.0).abs() < 1e-12);
                }
                (None, None) => prop_assert_eq!(p1 + p2, 0.0),
                _ => prop_assert!(false, "definedness must be symmetric"),
            }
        }

        #[test]
        fn windows_partition(switch in 40u32..=110, window in 1u32..=39) {
            let s = series(|_| (0.5, 0.5));
            let switch = f64::from(switch) * 2.0;
            let window = f64::from(window) * 2.0;
            let (pre, post) = align_on_switch(&s, switch, window).unwrap();
            prop_assert_eq!(pre.len(), post.len());
            prop_assert!(pre.iter().all(|p| p.t < switch));
            prop_assert!(post.iter().all(|p| p.t >= switch));
            prop_assert_eq!(post.last().unwrap().t - pre.first().unwrap().t + 2.0, 2.0 * window);
        }

        #[test]
        fn membership_is_exclusive(x in -10i32..80, y in -10i32..80) {
            let centers = [Cell::new(15, 15), Cell::new(50, 40)];
            let m = pool_membership(Cell::new(x, y), centers, 13.0).unwrap();
            let inside: Vec<usize> = (0..2).filter(|&i| Cell::new(x, y).dist(centers[i]) <= 13.0).collect();
            prop_assert!(inside.len() <= 1);
            prop_assert_eq!(m, inside.first().copied());
        }
    }
}
