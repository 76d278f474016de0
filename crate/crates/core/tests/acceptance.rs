//! Acceptance suite. Runs every acceptance criterion, prints one PASS/FAIL line
//! each, and exits nonzero if any failed.
//!
//! Run with `cargo test -p forage-core --test acceptance`.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use forage_core::analysis::{align_on_switch, analyze_log, gini, normalized_matching, pool_membership};
use forage_core::batch::{run_batch, BatchSpec, StrategyAssignment};
use forage_core::log::RunLog;
use forage_core::world::init_game;
use forage_core::{
    observer_view, preset, success_color, validate_config, Action, AgentController, Cell, Color, Condition, Controller,
    ForagerId, HeadlessGame, SimConfig,
};
use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: f64, what: &str) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_secs, || {
        format!("{what} took {:.2} s, limit {limit_secs} s", elapsed.as_secs_f64())
    })
}

fn game(config: SimConfig, strategy: &str) -> HeadlessGame {
    HeadlessGame {
        config,
        strategies: vec![preset(strategy).unwrap()],
        run_id: "acceptance".into(),
        labels: BTreeMap::new(),
    }
}

fn spawn_share() -> Outcome {
    let t0 = Instant::now();
    let (_, bytes) = game(SimConfig::default(), "food_greedy").run_to_vec().map_err(|e| e.to_string())?;
    let log = RunLog::parse_bytes(&bytes).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();

    // rich pool at each tick, from the start and switch records alone
    let start = log.start.as_ref().ok_or("no start record")?;
    let (switch_tick, _) = log.switch.ok_or("no switch record")?;
    let rich_at = |tick: u64| {
        if tick < switch_tick {
            start.rich_pool
        } else {
            1 - start.rich_pool
        }
    };
    let end = log.end.as_ref().ok_or("no end record")?;
    ensure(end.tick == 3000, || format!("ran {} ticks", end.tick))?;
    let total = log.spawns.len();
    let rich = log.spawns.iter().filter(|s| s.pool == rich_at(s.tick)).count();
    let share = rich as f64 / total as f64;
    ensure((share - 0.70).abs() <= 0.02, || format!("rich share {share:.4} ({rich}/{total})"))?;
    within(elapsed, 1.0, "run")?;
    Ok(format!("rich share {share:.4} ({rich}/{total}), {:.2} s", elapsed.as_secs_f64()))
}

fn determinism() -> Outcome {
    let t0 = Instant::now();
    let run = |seed: u64| {
        game(
            SimConfig {
                seed,
                ..SimConfig::default()
            },
            "food_greedy",
        )
        .run_to_vec()
        .map(|(_, b)| b)
        .map_err(|e| e.to_string())
    };
    let a = run(7)?;
    let b = run(7)?;
    let c = run(8)?;
    let elapsed = t0.elapsed();
    ensure(a == b, || "identical seeds gave different logs".into())?;
    ensure(a != c, || "different seeds gave identical logs".into())?;
    within(elapsed, 5.0, "three runs")?;
    Ok(format!("{} byte logs identical, other seed differs, {:.2} s", a.len(), elapsed.as_secs_f64()))
}

fn conservation() -> Outcome {
    let conditions = Condition::all();
    let mut checked = 0;
    for seed in 0..20u64 {
        let config = SimConfig {
            seed,
            condition: conditions[seed as usize % conditions.len()],
            ..SimConfig::default()
        };
        let (outcome, bytes) = game(config, "food_greedy").run_to_vec().map_err(|e| e.to_string())?;
        let log = RunLog::parse_bytes(&bytes).map_err(|e| e.to_string())?;
        for s in &log.snapshots {
            // records stamped with tick t happened during the step from t to t + 1
            let spawned = log.spawns.iter().filter(|r| r.tick < s.tick).count() as u64;
            let collected: u64 = log
                .collects
                .iter()
                .filter(|r| r.tick < s.tick)
                .map(|r| u64::from(r.pellets))
                .sum();
            let scored: u64 = s.foragers.iter().map(|f| f.collected).sum();
            ensure(spawned == collected + s.food_remaining && scored == collected, || {
                format!(
                    "seed {seed} tick {}: spawned {spawned}, collected {collected}, remaining {}, scores {scored}",
                    s.tick, s.food_remaining
                )
            })?;
            checked += 1;
        }
        ensure(outcome.spawned == outcome.collected + outcome.remaining, || format!("seed {seed} final totals"))?;
    }
    Ok(format!("{checked} snapshots over 20 runs"))
}

fn success_colors() -> Outcome {
    let expected = |k: u64| match k {
        0..=5 => Color::Blue,
        6..=10 => Color::Yellow,
        11..=15 => Color::Orange,
        _ => Color::Red,
    };
    for k in 0..=30 {
        ensure(success_color(k) == expected(k), || format!("{k} pellets -> {:?}", success_color(k)))?;
    }
    Ok("counts 0..=30".into())
}

fn switch_continuity() -> Outcome {
    let choices = SimConfig::default().switch_time_choices;
    let mut seen = BTreeMap::new();
    for run in 0..20u64 {
        let switch = choices[run as usize % choices.len()];
        let cfg = validate_config(SimConfig {
            seed: 100 + run,
            switch_time_choices: vec![switch],
            ..SimConfig::default()
        })
        .map_err(|e| e.to_string())?;
        let mut state = init_game(&cfg).map_err(|e| e.to_string())?;
        let mut agents =
            AgentController::new(&cfg, &[preset("food_greedy").unwrap()]).map_err(|e| e.to_string())?;
        let initial = state.rich_pool;
        let expected_tick = (switch / cfg.config().tick_seconds).round() as u64;
        ensure(state.switch_tick == expected_tick, || format!("run {run}: switch tick {}", state.switch_tick))?;
        while state.tick < state.switch_tick {
            let actions = agents.actions(&state, &cfg);
            let events = state.step(&cfg, &actions).map_err(|e| e.to_string())?;
            agents.observe(&events);
            ensure(state.rich_pool == initial, || format!("run {run}: early flip at {}", state.tick))?;
        }
        ensure(!state.food.is_empty(), || format!("run {run}: no food on the grid to carry over"))?;

        // the switch on its own
        let mut probe = state.clone();
        let before = probe.food.clone();
        probe.apply_switch().ok_or("no switch at the switch tick")?;
        ensure(probe.food == before && probe.rich_pool == 1 - initial, || {
            format!("run {run}: switch changed food or did not flip")
        })?;

        // the full step at the switch tick: food moves only by this tick's spawns and collections
        let mut food = state.food.clone();
        let actions = agents.actions(&state, &cfg);
        let events = state.step(&cfg, &actions).map_err(|e| e.to_string())?;
        let mut flipped = false;
        for e in &events {
            match e {
                forage_core::Event::Switch { rich_pool, .. } => flipped = *rich_pool == 1 - initial,
                forage_core::Event::Spawn { cell, .. } => *food.entry(*cell).or_insert(0) += 1,
                forage_core::Event::Collect { cell, pellets, .. } => {
                    let had = food.remove(cell).unwrap_or(0);
                    ensure(had == *pellets, || format!("run {run}: collected {pellets}, cell held {had}"))?;
                }
                forage_core::Event::Move { .. } => {}
            }
        }
        ensure(flipped && state.rich_pool == 1 - initial, || format!("run {run}: no flip"))?;
        ensure(food == state.food, || format!("run {run}: food changed across the switch"))?;
        *seen.entry((switch * 10.0) as i64).or_insert(0) += 1;
    }
    ensure(seen.len() == 5, || format!("switch times covered: {seen:?}"))?;
    Ok("20 runs, 4 at each of 162/174/186/198/210 s".into())
}

fn analysis_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let n = rng.random_range(1..=8);
        let xs: Vec<i64> = (0..n).map(|_| rng.random_range(0..=20)).collect();
        let pairwise: i64 = xs.iter().flat_map(|a| xs.iter().map(move |b| (a - b).abs())).sum();
        let sum: i64 = xs.iter().sum();
        let oracle = if sum == 0 {
            0.0
        } else {
            pairwise as f64 / (2 * n as i64 * sum) as f64
        };
        let got = gini(&xs).map_err(|e| e.to_string())?;
        ensure(got == oracle, || format!("gini case {case} {xs:?}: {got} vs {oracle}"))?;
    }
    for case in 0..1000 {
        let n = rng.random_range(1..=20u32);
        let c1 = rng.random_range(0..=n);
        let c2 = rng.random_range(0..=n - c1);
        let got = normalized_matching(f64::from(c1) / f64::from(n), f64::from(c2) / f64::from(n));
        let oracle = (c1 + c2 > 0).then(|| f64::from(c1) / f64::from(c1 + c2));
        let agree = match (got, oracle) {
            (None, None) => true,
            (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
            _ => false,
        };
        ensure(agree, || format!("normalized case {case}: {c1}/{c2} of {n}: {got:?} vs {oracle:?}"))?;
    }
    let mut membership = 0;
    while membership < 1000 {
        let radius = [5.0, 8.0, 12.5, 13.0][rng.random_range(0..4)];
        let c0 = Cell::new(rng.random_range(0..60), rng.random_range(0..60));
        let c1 = Cell::new(rng.random_range(0..60), rng.random_range(0..60));
        let (dx, dy) = (f64::from(c0.x - c1.x), f64::from(c0.y - c1.y));
        if dx * dx + dy * dy <= 4.0 * radius * radius {
            ensure(pool_membership(c0, [c0, c1], radius).is_err(), || "overlap not rejected".into())?;
            continue;
        }
        let p = Cell::new(rng.random_range(0..60), rng.random_range(0..60));
        let oracle = [c0, c1].iter().position(|c| {
            let (dx, dy) = (i64::from(p.x - c.x), i64::from(p.y - c.y));
            ((dx * dx + dy * dy) as f64) <= radius * radius
        });
        let got = pool_membership(p, [c0, c1], radius).map_err(|e| e.to_string())?;
        ensure(got == oracle, || format!("membership {p:?} centers {c0:?} {c1:?} r {radius}: {got:?} vs {oracle:?}"))?;
        membership += 1;
    }
    Ok("gini exact on 1000 vectors; normalized and membership on 1000 inputs each".into())
}

fn view_soundness() -> Outcome {
    let all = Condition::all();
    let mut expected: Vec<Condition> = Vec::new();
    for food in [true, false] {
        for foragers in [true, false] {
            for success in [true, false] {
                if foragers || !success {
                    expected.push(Condition::new(food, foragers, success));
                }
            }
        }
    }
    let mut sorted = all.clone();
    sorted.sort();
    expected.sort();
    ensure(sorted == expected && all.len() == 6, || format!("conditions: {all:?}"))?;

    let mut runner = TestRunner::new(ProptestConfig {
        cases: 96,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    let strategy = (any::<u64>(), 0..6usize, 1..=12u32, 0..700u64);
    let result = runner.run(&strategy, |(seed, ci, n, ticks)| {
        let condition = all[ci];
        let cfg = validate_config(SimConfig {
            seed,
            condition,
            n_foragers: n,
            ..SimConfig::default()
        })
        .unwrap();
        let mut state = init_game(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let moves = [Action::Up, Action::Down, Action::Left, Action::Right, Action::Stay];
        for _ in 0..ticks {
            let actions = (0..n).map(|i| (ForagerId(i), moves[rng.random_range(0..5)])).collect();
            state.step(&cfg, &actions).unwrap();
            if state.tick % 7 != 0 {
                continue;
            }
            for i in 0..n {
                let v = observer_view(&state, &cfg, ForagerId(i)).unwrap();
                if !condition.food_visible {
                    prop_assert!(v.food.is_empty());
                    for m in &v.markers {
                        prop_assert!(state
                            .markers
                            .iter()
                            .any(|k| k.cell == *m && k.owner == ForagerId(i) && k.expiry_tick > state.tick));
                    }
                } else {
                    prop_assert!(v.markers.is_empty());
                }
                if !condition.foragers_visible {
                    prop_assert_eq!(v.foragers.len(), 1);
                    prop_assert_eq!(v.foragers[0].id, ForagerId(i));
                }
                if !condition.success_indicated {
                    prop_assert!(v.foragers.iter().all(|f| f.color == Color::Purple));
                }
            }
        }
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    Ok("6 conditions; 96 random states".into())
}

fn behavioral_ordering() -> Outcome {
    let t0 = Instant::now();
    let cell = |strategy: &str, food_visible: bool| -> Result<f64, String> {
        let mut deltas = Vec::new();
        for seed in 0..20 {
            let config = SimConfig {
                seed,
                condition: Condition::new(food_visible, true, false),
                switch_time_choices: vec![186.0],
                ..SimConfig::default()
            };
            let (_, bytes) = game(config, strategy).run_to_vec().map_err(|e| e.to_string())?;
            let log = RunLog::parse_bytes(&bytes).map_err(|e| e.to_string())?;
            let summary = analyze_log(&log, 78.0).map_err(|e| format!("{strategy} seed {seed}: {e}"))?;
            deltas.push(summary.stats.delta);
        }
        Ok(deltas.iter().sum::<f64>() / deltas.len() as f64)
    };
    let greedy = cell("food_greedy", true)?;
    let private = cell("private", false)?;
    let elapsed = t0.elapsed();
    let detail = format!(
        "delta food_greedy/visible {greedy:.3}, private/invisible {private:.3}, {:.1} s",
        elapsed.as_secs_f64()
    );
    ensure(greedy > private, || detail.clone())?;
    ensure(private < 0.12, || detail.clone())?;
    within(elapsed, 120.0, "40 runs")?;
    Ok(detail)
}

fn pipeline_shape() -> Outcome {
    // own reward history is the one information source present in every condition
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = BatchSpec {
        repetitions: 12,
        conditions: Vec::new(),
        strategy: StrategyAssignment::Uniform("private".into()),
        n_foragers: 10,
        seed_base: 500,
        switch_times: SimConfig::default().switch_time_choices,
        output_dir: dir.path().to_path_buf(),
        window_seconds: 78.0,
        config: SimConfig::default(),
    };
    let report = run_batch(&spec).map_err(|e| e.to_string())?;
    ensure(!report.failed(), || format!("failures: {:?} {:?}", report.run_failures, report.analysis.failures))?;
    let rows = |name: &str| -> Result<usize, String> {
        let mut r = csv::Reader::from_path(dir.path().join(name)).map_err(|e| e.to_string())?;
        Ok(r.records().count())
    };
    let (stat_rows, aggregate_rows) = (rows("runs.csv")?, rows("aggregate.csv")?);
    ensure(stat_rows == 72 && aggregate_rows == 6, || format!("{stat_rows} stat rows, {aggregate_rows} aggregate rows"))?;
    for run in &report.analysis.runs {
        let (pre, post) = align_on_switch(&run.series, run.switch_time, 78.0).map_err(|e| e.to_string())?;
        ensure(pre.len() == 39 && post.len() == 39, || {
            format!("{}: {} pre, {} post samples", run.run_id, pre.len(), post.len())
        })?;
    }
    Ok("72 stat rows, 6 aggregate rows, 39 samples per side in every run".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("spawn share", spawn_share),
        ("determinism", determinism),
        ("conservation", conservation),
        ("success-color table", success_colors),
        ("switch continuity", switch_continuity),
        ("analysis oracles", analysis_oracles),
        ("view soundness", view_soundness),
        ("behavioral ordering", behavioral_ordering),
        ("pipeline shape", pipeline_shape),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
