//! Parameter sweeps: one quench run per grid point, run concurrently,
//! aggregated into one CSV in grid order.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use quenchlab_core::analytic::{bracket_sup, quench_bound_sup};
use quenchlab_core::verify::gradient_ratio_statistic;

use crate::config::{InitialConfig, ScenarioConfig};
use crate::error::CliError;
use crate::experiments::{quench_time_of, single_run, solve};

pub const SWEEP: &str = "sweep.csv";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p: f64,
    pub beta: f64,
    pub peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub error: Option<String>,
    pub quench_time: Option<f64>,
    pub quench_bound: Option<f64>,
    pub support_radius: Option<f64>,
    /// Gradient ratio statistic at `verify.tau` against the sup bracket.
    pub gradient_ratio: Option<f64>,
}

/// Peak (sup norm, or mass for spikes) of the configured data.
pub fn peak_of(initial: &InitialConfig) -> f64 {
    match initial {
        InitialConfig::Bump { peak, .. }
        | InitialConfig::Cosine { peak }
        | InitialConfig::DecayingTail { peak, .. } => *peak,
        InitialConfig::Constant { level } => *level,
        InitialConfig::Spike { mass, .. } => *mass,
        InitialConfig::Table { values, .. } => values.iter().copied().fold(0.0, f64::max),
    }
}

pub fn with_peak(initial: &InitialConfig, peak: f64) -> InitialConfig {
    let mut out = initial.clone();
    match &mut out {
        InitialConfig::Bump { peak: p, .. }
        | InitialConfig::Cosine { peak: p }
        | InitialConfig::DecayingTail { peak: p, .. } => *p = peak,
        InitialConfig::Constant { level } => *level = peak,
        InitialConfig::Spike { mass, .. } => *mass = peak,
        InitialConfig::Table { values, .. } => {
            let old = peak_of(initial);
            if old > 0.0 {
                values.iter_mut().for_each(|v| *v *= peak / old);
            }
        }
    }
    out
}

/// Grid points in row order: `p` outermost, then `beta`, then `peak`.
pub fn points(cfg: &ScenarioConfig) -> Vec<SweepPoint> {
    let sw = cfg.sweep.clone().unwrap_or_default();
    let ps = sw.p.unwrap_or_else(|| vec![cfg.problem.p]);
    let betas = sw.beta.unwrap_or_else(|| vec![cfg.problem.beta]);
    let peaks = sw.peak.unwrap_or_else(|| vec![peak_of(&cfg.problem.initial)]);
    let mut out = Vec::with_capacity(ps.len() * betas.len() * peaks.len());
    for &p in &ps {
        for &beta in &betas {
            for &peak in &peaks {
                out.push(SweepPoint { p, beta, peak });
            }
        }
    }
    out
}

pub fn config_at(cfg: &ScenarioConfig, pt: SweepPoint) -> ScenarioConfig {
    let mut c = cfg.clone();
    c.problem.p = pt.p;
    c.problem.beta = pt.beta;
    c.problem.initial = with_peak(&cfg.problem.initial, pt.peak);
    c.sweep = None;
    c
}

fn run_point(cfg: &ScenarioConfig, pt: SweepPoint) -> Result<SweepRow, CliError> {
    let c = config_at(cfg, pt);
    c.validate()?;
    let spec = c.problem_spec()?;
    let traj = single_run(&c)?;
    let tau = c.verify.tau;
    let bracket = solve(
        "bracket",
        bracket_sup(tau, spec.sup_norm(), spec.source(), spec.p(), spec.beta()),
    )?;
    let floor = c.verify.gradient_floor_eps * c.regularization.epsilon;
    let ratio = if traj.end_time() >= tau {
        Some(gradient_ratio_statistic(&traj, bracket, &spec.constants(), tau, floor).0)
    } else {
        None
    };
    let radius = traj
        .support
        .iter()
        .filter_map(|s| s.interval)
        .map(|[a, b]| a.abs().max(b.abs()))
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
    Ok(SweepRow {
        point: pt,
        error: None,
        quench_time: quench_time_of(&traj),
        quench_bound: Some(quench_bound_sup(spec.sup_norm(), spec.beta())),
        support_radius: radius,
        gradient_ratio: ratio,
    })
}

/// Runs every grid point on a pool of `workers` threads. Failures are
/// recorded in their row; the order of rows is the order of [`points`].
pub fn run(cfg: &ScenarioConfig, workers: usize) -> Result<Vec<SweepRow>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {workers} workers: {e}")))?;
    let pts = points(cfg);
    Ok(pool.install(|| {
        pts.par_iter()
            .map(|&pt| {
                run_point(cfg, pt).unwrap_or_else(|e| SweepRow {
                    point: pt,
                    error: Some(e.to_string()),
                    quench_time: None,
                    quench_bound: None,
                    support_radius: None,
                    gradient_ratio: None,
                })
            })
            .collect()
    }))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

pub const HEADER: [&str; 9] = [
    "p",
    "beta",
    "peak",
    "status",
    "error",
    "quench_time",
    "quench_bound",
    "support_radius",
    "gradient_ratio",
];

pub fn write_csv(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            format!("{:.16e}", r.point.p),
            format!("{:.16e}", r.point.beta),
            format!("{:.16e}", r.point.peak),
            if r.error.is_some() { "error" } else { "ok" }.to_string(),
            r.error.clone().unwrap_or_default(),
            opt(r.quench_time),
            opt(r.quench_bound),
            opt(r.support_radius),
            opt(r.gradient_ratio),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse, SweepConfig};

    const BASE: &str = r#"
[problem]
p = 3.0
beta = 0.5
domain = { kind = "dirichlet", half_length = 1.0 }
source = { kind = "zero" }
initial = { kind = "cosine", peak = 1.0 }

[regularization]
epsilon = 0.0125
eta = 1.25e-5

[grid]
n_cells = 40

[stepping]
t_end = 0.8

[experiment]
kind = "sweep"
"#;

    #[test]
    fn grid_is_crossed_in_row_order() {
        let mut cfg = parse(BASE, &[]).unwrap();
        cfg.sweep = Some(SweepConfig {
            p: Some(vec![2.5, 3.0]),
            beta: None,
            peak: Some(vec![0.5, 1.0, 2.0]),
        });
        let pts = points(&cfg);
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1], SweepPoint { p: 2.5, beta: 0.5, peak: 1.0 });
        assert_eq!(pts[3].p, 3.0);
    }

    #[test]
    fn empty_axis_gives_empty_grid() {
        let mut cfg = parse(BASE, &[]).unwrap();
        cfg.sweep = Some(SweepConfig {
            p: Some(vec![]),
            ..SweepConfig::default()
        });
        assert!(points(&cfg).is_empty());
        assert!(run(&cfg, 2).unwrap().is_empty());
    }

    #[test]
    fn quench_time_is_monotone_in_peak() {
        let mut cfg = parse(BASE, &[]).unwrap();
        cfg.sweep = Some(SweepConfig {
            peak: Some(vec![0.5, 0.75, 1.0]),
            ..SweepConfig::default()
        });
        let rows = run(&cfg, 3).unwrap();
        let tq: Vec<f64> = rows.iter().map(|r| r.quench_time.unwrap()).collect();
        assert!(tq.windows(2).all(|w| w[0] <= w[1]), "{tq:?}");
        for r in &rows {
            assert!(r.quench_time.unwrap() <= r.quench_bound.unwrap() + 2e-2);
        }
    }

    #[test]
    fn failures_stay_in_their_row() {
        let mut cfg = parse(BASE, &[]).unwrap();
        cfg.sweep = Some(SweepConfig {
            beta: Some(vec![0.5, 1.5]),
            ..SweepConfig::default()
        });
        let rows = run(&cfg, 2).unwrap();
        assert!(rows[0].error.is_none());
        assert!(rows[1].error.as_deref().unwrap().contains("problem.beta"));
    }

    #[test]
    fn peak_rescales_table_data() {
        let t = InitialConfig::Table {
            nodes: vec![-1.0, 0.0, 1.0],
            values: vec![0.0, 2.0, 0.0],
        };
        assert_eq!(peak_of(&with_peak(&t, 3.0)), 3.0);
    }
}
