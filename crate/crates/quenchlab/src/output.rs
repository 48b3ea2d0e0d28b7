//! Files written by `run` and read back by `verify`.
//!
//! * `snapshots.csv`: `t,x,u`, one row per node and recorded time.
//! * `ledger.csv`: `t,mass,absorbed_singular,absorbed_source,boundary_outflux,residual`.
//! * `summary.json`: [`RunSummary`], deterministic for a given config and seed.
//! * `verify.json`: [`VerificationReport`].
//! * `timing.json`: [`Timing`], wall-clock per phase (not deterministic).
//!
//! Numbers in CSV files carry 17 significant digits, so a reload is exact.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use quenchlab_core::analytic::BoundsReport;
use quenchlab_core::scheme::{LedgerRow, Snapshot, SupportSample};
use quenchlab_core::verify::VerificationReport;
use quenchlab_core::{Grid, MassLedger, RegularizationKnobs, Trajectory};

use crate::config::ScenarioConfig;
use crate::error::CliError;

pub const SNAPSHOTS: &str = "snapshots.csv";
pub const LEDGER: &str = "ledger.csv";
pub const SUMMARY: &str = "summary.json";
pub const VERIFY: &str = "verify.json";
pub const TIMING: &str = "timing.json";

/// Everything about a stored trajectory except its fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub grid: Grid,
    pub knobs: RegularizationKnobs,
    pub dt: f64,
    pub quench_tol: f64,
    pub support_tol: f64,
    pub steps: usize,
    pub end_time: f64,
    pub final_ledger: MassLedger,
}

impl RunMeta {
    pub fn of(traj: &Trajectory) -> Self {
        RunMeta {
            grid: traj.grid,
            knobs: traj.knobs,
            dt: traj.dt,
            quench_tol: traj.quench_tol,
            support_tol: traj.support_tol,
            steps: traj.steps,
            end_time: traj.end_time(),
            final_ledger: traj.final_ledger,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub experiment: String,
    pub name: Option<String>,
    /// The configuration after defaults and overrides.
    pub config: ScenarioConfig,
    /// The trajectory written to `snapshots.csv`, if any.
    pub run: Option<RunMeta>,
    pub quench_time: Option<f64>,
    pub support_history: Vec<SupportSample>,
    pub bounds: BoundsReport,
    pub verification: VerificationReport,
    /// Experiment-specific results (ladder levels, radius sweep, fits).
    pub diagnostics: serde_json::Value,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timing {
    pub phases: Vec<Phase>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub name: String,
    pub seconds: f64,
}

impl Timing {
    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let seconds = start.elapsed().as_secs_f64();
        self.total_seconds += seconds;
        self.phases.push(Phase {
            name: name.to_string(),
            seconds,
        });
        out
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Format {
            path: path.display().to_string(),
            message: format!("{other:?}"),
        },
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_snapshots(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["t", "x", "u"]).map_err(|e| csv_err(path, e))?;
    let nodes = traj.grid.nodes();
    for snap in &traj.snapshots {
        let t = num(snap.time);
        for (x, u) in nodes.iter().zip(&snap.values) {
            w.write_record([t.as_str(), &num(*x), &num(*u)])
                .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_ledger(path: &Path, rows: &[LedgerRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record([
        "t",
        "mass",
        "absorbed_singular",
        "absorbed_source",
        "boundary_outflux",
        "residual",
    ])
    .map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            num(r.time),
            num(r.mass),
            num(r.absorbed_singular),
            num(r.absorbed_source),
            num(r.boundary_outflux),
            num(r.residual),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn parse_num(path: &Path, field: &str) -> Result<f64, CliError> {
    field.trim().parse().map_err(|_| CliError::Format {
        path: path.display().to_string(),
        message: format!("not a number: `{field}`"),
    })
}

/// Snapshots grouped by time, in file order.
pub fn read_snapshots(path: &Path, n_nodes: usize) -> Result<Vec<Snapshot>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut snaps: Vec<Snapshot> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != 3 {
            return Err(CliError::Format {
                path: path.display().to_string(),
                message: format!("expected 3 columns, got {}", rec.len()),
            });
        }
        let t = parse_num(path, &rec[0])?;
        let u = parse_num(path, &rec[2])?;
        match snaps.last_mut() {
            Some(s) if s.time == t && s.values.len() < n_nodes => s.values.push(u),
            _ => snaps.push(Snapshot {
                time: t,
                values: vec![u],
            }),
        }
    }
    if let Some(bad) = snaps.iter().find(|s| s.values.len() != n_nodes) {
        return Err(CliError::Format {
            path: path.display().to_string(),
            message: format!("snapshot at t = {} has {} nodes, expected {n_nodes}", bad.time, bad.values.len()),
        });
    }
    Ok(snaps)
}

pub fn read_ledger(path: &Path) -> Result<Vec<LedgerRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != 6 {
            return Err(CliError::Format {
                path: path.display().to_string(),
                message: format!("expected 6 columns, got {}", rec.len()),
            });
        }
        let v: Vec<f64> = rec.iter().map(|f| parse_num(path, f)).collect::<Result<_, _>>()?;
        rows.push(LedgerRow {
            time: v[0],
            mass: v[1],
            absorbed_singular: v[2],
            absorbed_source: v[3],
            boundary_outflux: v[4],
            residual: v[5],
        });
    }
    Ok(rows)
}

/// Rebuilds a trajectory from a run directory.
pub fn load_trajectory(dir: &Path) -> Result<(RunSummary, Trajectory), CliError> {
    let summary: RunSummary = read_json(&dir.join(SUMMARY))?;
    let meta = summary.run.clone().ok_or_else(|| CliError::Format {
        path: dir.join(SUMMARY).display().to_string(),
        message: "summary records no stored trajectory".into(),
    })?;
    let snapshots = read_snapshots(&dir.join(SNAPSHOTS), meta.grid.n_nodes())?;
    let ledger = read_ledger(&dir.join(LEDGER))?;
    let traj = Trajectory {
        grid: meta.grid,
        knobs: meta.knobs,
        dt: meta.dt,
        quench_tol: meta.quench_tol,
        support_tol: meta.support_tol,
        snapshots,
        ledger,
        support: summary.support_history.clone(),
        quench_time: summary.quench_time,
        steps: meta.steps,
        final_ledger: meta.final_ledger,
    };
    Ok((summary, traj))
}

pub fn file_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use quenchlab_core::scenarios;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut sc = scenarios::canonical_quench(40).unwrap();
        sc.t_end = 0.05;
        let traj = sc.run().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(SNAPSHOTS);
        write_snapshots(&p, &traj).unwrap();
        let back = read_snapshots(&p, traj.grid.n_nodes()).unwrap();
        assert_eq!(back, traj.snapshots);
        let l = dir.path().join(LEDGER);
        write_ledger(&l, &traj.ledger).unwrap();
        assert_eq!(read_ledger(&l).unwrap(), traj.ledger);
    }

    #[test]
    fn ragged_snapshot_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(SNAPSHOTS);
        std::fs::write(&p, "t,x,u\n0,0,1\n0,1,1\n1,0,1\n").unwrap();
        assert!(matches!(read_snapshots(&p, 2), Err(CliError::Format { .. })));
    }

    #[test]
    fn timing_accumulates() {
        let mut t = Timing::default();
        let v = t.time("a", || 3);
        assert_eq!(v, 3);
        assert_eq!(t.phases.len(), 1);
        assert!(t.total_seconds >= 0.0);
    }
}
