//! JSON-lines game log shared by headless runs and live sessions.
//!
//! The first line is a `config` record carrying the resolved [`SimConfig`].
//! Every following line is a record tagged by `kind`. Field order is fixed
//! by the struct definitions below and is part of the determinism contract:
//! the same game always serializes to the same bytes.

use crate::config::{SimConfig, ValidatedConfig};
use crate::geometry::Cell;
use crate::world::{EnvState, Event, ForagerId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("log is empty")]
    Empty,
    #[error("first record must be the config header")]
    MissingHeader,
    #[error("duplicate {0} record")]
    Duplicate(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForagerSnapshot {
    pub id: ForagerId,
    pub x: i32,
    pub y: i32,
    pub collected: u64,
}

impl ForagerSnapshot {
    pub fn cell(&self) -> Cell {
        Cell::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tick: u64,
    pub t: f64,
    pub foragers: Vec<ForagerSnapshot>,
    pub pool_centers: [Cell; 2],
    pub rich_pool: usize,
    pub switched: bool,
    pub food_remaining: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForagerInfo {
    pub id: ForagerId,
    pub icon: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Config {
        run_id: String,
        labels: BTreeMap<String, String>,
        config: SimConfig,
    },
    Start {
        tick: u64,
        t: f64,
        pool_centers: [Cell; 2],
        rich_pool: usize,
        switch_time: f64,
        foragers: Vec<ForagerInfo>,
    },
    Snapshot(Snapshot),
    Spawn {
        tick: u64,
        t: f64,
        pool: usize,
        x: i32,
        y: i32,
    },
    Collect {
        tick: u64,
        t: f64,
        forager: ForagerId,
        x: i32,
        y: i32,
        pellets: u32,
    },
    Switch {
        tick: u64,
        t: f64,
        rich_pool: usize,
    },
    Warning {
        tick: u64,
        t: f64,
        message: String,
    },
    End {
        tick: u64,
        t: f64,
        complete: bool,
        scores: Vec<u64>,
    },
}

impl Record {
    pub fn start(state: &EnvState, cfg: &ValidatedConfig) -> Record {
        Record::Start {
            tick: state.tick,
            t: cfg.seconds(state.tick),
            pool_centers: state.pool_centers,
            rich_pool: state.rich_pool,
            switch_time: state.switch_time,
            foragers: state
                .foragers
                .iter()
                .map(|f| ForagerInfo {
                    id: f.id,
                    icon: f.icon.clone(),
                })
                .collect(),
        }
    }

    /// Log form of a step event. Moves are not logged; positions are carried
    /// by snapshots.
    pub fn from_event(event: &Event, cfg: &ValidatedConfig) -> Option<Record> {
        Some(match *event {
            Event::Switch { tick, rich_pool } => Record::Switch {
                tick,
                t: cfg.seconds(tick),
                rich_pool,
            },
            Event::Spawn { tick, pool, cell } => Record::Spawn {
                tick,
                t: cfg.seconds(tick),
                pool,
                x: cell.x,
                y: cell.y,
            },
            Event::Collect {
                tick,
                forager,
                cell,
                pellets,
            } => Record::Collect {
                tick,
                t: cfg.seconds(tick),
                forager,
                x: cell.x,
                y: cell.y,
                pellets,
            },
            Event::Move { .. } => return None,
        })
    }

    pub fn end(state: &EnvState, cfg: &ValidatedConfig, complete: bool) -> Record {
        Record::End {
            tick: state.tick,
            t: cfg.seconds(state.tick),
            complete,
            scores: state.foragers.iter().map(|f| f.total_collected).collect(),
        }
    }

    pub fn warning(tick: u64, cfg: &ValidatedConfig, message: impl Into<String>) -> Record {
        Record::Warning {
            tick,
            t: cfg.seconds(tick),
            message: message.into(),
        }
    }
}

/// Appends records to a writer, one JSON object per line.
pub struct LogWriter<W: Write> {
    out: W,
}

impl<W: Write> LogWriter<W> {
    pub fn new(out: W) -> Self {
        LogWriter { out }
    }

    pub fn write(&mut self, record: &Record) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")
    }

    /// Writes the header, the start record, config warnings and the tick-0 snapshot.
    pub fn begin(
        &mut self,
        run_id: &str,
        labels: &BTreeMap<String, String>,
        cfg: &ValidatedConfig,
        state: &EnvState,
    ) -> io::Result<()> {
        self.write(&Record::Config {
            run_id: run_id.to_string(),
            labels: labels.clone(),
            config: cfg.config().clone(),
        })?;
        self.write(&Record::start(state, cfg))?;
        for w in &cfg.warnings {
            self.write(&Record::warning(state.tick, cfg, w.clone()))?;
        }
        if let Some(snap) = state.snapshot(cfg) {
            self.write(&Record::Snapshot(snap))?;
        }
        Ok(())
    }

    /// Writes one step's events followed by the snapshot, if the new tick has one.
    pub fn step(&mut self, events: &[Event], cfg: &ValidatedConfig, state: &EnvState) -> io::Result<()> {
        for e in events {
            if let Some(r) = Record::from_event(e, cfg) {
                self.write(&r)?;
            }
        }
        if let Some(snap) = state.snapshot(cfg) {
            self.write(&Record::Snapshot(snap))?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpawnRecord {
    pub tick: u64,
    pub pool: usize,
    pub cell: Cell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectRecord {
    pub tick: u64,
    pub forager: ForagerId,
    pub cell: Cell,
    pub pellets: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartInfo {
    pub pool_centers: [Cell; 2],
    pub rich_pool: usize,
    pub switch_time: f64,
    pub foragers: Vec<ForagerInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndInfo {
    pub tick: u64,
    pub complete: bool,
    pub scores: Vec<u64>,
}

/// A parsed log, grouped by record kind.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub run_id: String,
    pub labels: BTreeMap<String, String>,
    pub config: SimConfig,
    pub start: Option<StartInfo>,
    pub snapshots: Vec<Snapshot>,
    pub spawns: Vec<SpawnRecord>,
    pub collects: Vec<CollectRecord>,
    pub switch: Option<(u64, usize)>,
    pub warnings: Vec<(u64, String)>,
    pub end: Option<EndInfo>,
}

impl RunLog {
    pub fn parse<R: BufRead>(reader: R) -> Result<RunLog, LogError> {
        let mut lines = reader.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(l) if l.trim().is_empty() => None,
            other => Some((i + 1, other)),
        });
        let parse = |line: usize, text: &str| {
            serde_json::from_str::<Record>(text).map_err(|source| LogError::Json { line, source })
        };

        let (line, first) = lines.next().ok_or(LogError::Empty)?;
        let Record::Config {
            run_id,
            labels,
            config,
        } = parse(line, &first?)?
        else {
            return Err(LogError::MissingHeader);
        };
        let mut log = RunLog {
            run_id,
            labels,
            config,
            start: None,
            snapshots: Vec::new(),
            spawns: Vec::new(),
            collects: Vec::new(),
            switch: None,
            warnings: Vec::new(),
            end: None,
        };
        for (line, text) in lines {
            match parse(line, &text?)? {
                Record::Config { .. } => return Err(LogError::Duplicate("config")),
                Record::Start {
                    pool_centers,
                    rich_pool,
                    switch_time,
                    foragers,
                    ..
                } => {
                    if log.start.is_some() {
                        return Err(LogError::Duplicate("start"));
                    }
                    log.start = Some(StartInfo {
                        pool_centers,
                        rich_pool,
                        switch_time,
                        foragers,
                    });
                }
                Record::Snapshot(s) => log.snapshots.push(s),
                Record::Spawn { tick, pool, x, y, .. } => log.spawns.push(SpawnRecord {
                    tick,
                    pool,
                    cell: Cell::new(x, y),
                }),
                Record::Collect {
                    tick,
                    forager,
                    x,
                    y,
                    pellets,
                    ..
                } => log.collects.push(CollectRecord {
                    tick,
                    forager,
                    cell: Cell::new(x, y),
                    pellets,
                }),
                Record::Switch { tick, rich_pool, .. } => {
                    if log.switch.is_some() {
                        return Err(LogError::Duplicate("switch"));
                    }
                    log.switch = Some((tick, rich_pool));
                }
                Record::Warning { tick, message, .. } => log.warnings.push((tick, message)),
                Record::End {
                    tick,
                    complete,
                    scores,
                    ..
                } => {
                    log.end = Some(EndInfo { tick, complete, scores });
                }
            }
        }
        Ok(log)
    }

    pub fn parse_bytes(bytes: &[u8]) -> Result<RunLog, LogError> {
        RunLog::parse(bytes)
    }

    pub fn total_spawned(&self) -> u64 {
        self.spawns.len() as u64
    }

    pub fn total_collected(&self) -> u64 {
        self.collects.iter().map(|c| u64::from(c.pellets)).sum()
    }
}
