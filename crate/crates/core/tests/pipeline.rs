use std::fs;
use std::path::Path;

use forage_core::batch::{run_batch, BatchSpec, StrategyAssignment};
use forage_core::{Record, RunLog, SimConfig};

fn spec(out: &Path, repetitions: u32, conditions: &[&str]) -> BatchSpec {
    BatchSpec {
        repetitions,
        conditions: conditions.iter().map(|c| c.to_string()).collect(),
        strategy: StrategyAssignment::Uniform("private".into()),
        n_foragers: 10,
        seed_base: 11,
        switch_times: vec![40.0],
        output_dir: out.to_path_buf(),
        window_seconds: 30.0,
        config: SimConfig {
            game_seconds: 80.0,
            ..SimConfig::default()
        },
    }
}

#[test]
fn single_cell_batch() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_batch(&spec(dir.path(), 1, &["visfood_visforagers_succ"])).unwrap();
    assert!(!report.failed());
    assert_eq!(report.log_paths.len(), 1);
    assert_eq!(report.analysis.runs.len(), 1);
    let agg = &report.analysis.aggregates[0];
    assert_eq!(agg.stats.n, 1);
    assert_eq!(agg.stats.sd.pre_mean, 0.0);
    assert_eq!(agg.stats.sd.delta, 0.0);
    assert_eq!(agg.stats.mean.delta, report.analysis.runs[0].stats.delta);
    assert_eq!(agg.gini.1, 0.0);
    for name in ["runs.csv", "aggregate.csv", "series.csv"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
}

#[test]
fn same_spec_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let conditions = ["visfood_invisforagers_nosucc", "invisfood_visforagers_succ"];
    let ra = run_batch(&spec(a.path(), 2, &conditions)).unwrap();
    let rb = run_batch(&spec(b.path(), 2, &conditions)).unwrap();
    assert_eq!(ra.log_paths.len(), 4);
    for (pa, pb) in ra.log_paths.iter().zip(&rb.log_paths) {
        assert_eq!(pa.file_name(), pb.file_name());
        assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap());
    }
    for name in ["runs.csv", "aggregate.csv", "series.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
    // repetitions differ from each other
    assert_ne!(fs::read(&ra.log_paths[0]).unwrap(), fs::read(&ra.log_paths[1]).unwrap());
}

#[test]
fn log_lines_round_trip_and_balance() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_batch(&spec(dir.path(), 1, &["invisfood_invisforagers_nosucc"])).unwrap();
    let bytes = fs::read(&report.log_paths[0]).unwrap();
    let text = String::from_utf8(bytes.clone()).unwrap();
    for line in text.lines() {
        let record: Record = serde_json::from_str(line).unwrap();
        assert_eq!(serde_json::to_string(&record).unwrap(), line);
    }
    let log = RunLog::parse_bytes(&bytes).unwrap();
    assert!(log.end.as_ref().unwrap().complete);
    let last = log.snapshots.last().unwrap();
    assert_eq!(log.total_spawned() - log.total_collected(), last.food_remaining);
    let scores: u64 = log.end.as_ref().unwrap().scores.iter().sum();
    assert_eq!(scores, log.total_collected());
}
