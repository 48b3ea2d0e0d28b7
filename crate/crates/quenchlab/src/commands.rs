//! The four subcommands. Each returns the process exit code on success.

use std::path::{Path, PathBuf};

use crate::config::{self, ScenarioConfig};
use crate::error::CliError;
use crate::experiments::{self, quench_time_of};
use crate::output::{self, RunMeta, RunSummary, Timing};
use crate::sweep;

use quenchlab_core::scenarios::Experiment;
use quenchlab_core::verify::{Status, VerificationReport};

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub overrides: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig, CliError> {
        let path = self
            .config
            .as_deref()
            .ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
        let mut cfg = config::load(path, &self.overrides)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.outputs.directory = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

const PASS: u8 = 0;
const PROPERTY_FAILURE: u8 = 1;

fn exit_for(report: &VerificationReport) -> u8 {
    if report.any_failed() {
        PROPERTY_FAILURE
    } else {
        PASS
    }
}

fn print_report(report: &VerificationReport) {
    for p in &report.properties {
        let status = match p.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Inconclusive => "inconclusive",
        };
        match p.worst_violation {
            Some(v) => println!("{:<24} {status:<12} violation {v:.3e} (tol {:.3e})", p.name, p.tolerance),
            None => println!("{:<24} {status}", p.name),
        }
    }
}

pub fn bounds(common: &Common) -> Result<u8, CliError> {
    let cfg = common.load()?;
    let report = experiments::bounds(&cfg)?;
    println!("gamma   = {:.10}", report.gamma);
    println!("lambda  = {:.10}", report.lambda);
    println!("sigma   = {:.10}", report.sigma);
    println!("|u0|_inf = {:.10}", report.sup_norm);
    println!("|u0|_1   = {:.10}", report.l1_norm);
    match report.support_radius_m0 {
        Some(m0) => println!("m0      = {m0:.10}"),
        None => println!("m0      = (data not compactly supported)"),
    }
    println!("T_sup   = {:.10}", report.quench_bound_sup);
    println!(
        "T_l1    = {:.10} (tau* = {:.10}, calibrated)",
        report.quench_bound_l1.bound, report.quench_bound_l1.tau_star
    );
    for b in &report.bracket_sup {
        println!("bracket_sup(t = {}) = {:.10}", b.time, b.value);
    }
    for b in &report.bracket_l1 {
        println!("bracket_l1(tau = {}) = {:.10}", b.time, b.value);
    }
    if let Some(dir) = &common.out {
        output::ensure_dir(dir)?;
        output::write_json(&dir.join("bounds.json"), &report)?;
    }
    Ok(PASS)
}

pub fn run(common: &Common) -> Result<u8, CliError> {
    let cfg = common.load()?;
    if cfg.experiment.kind == Experiment::Sweep {
        return run_sweep(&cfg, common.workers());
    }
    let dir = cfg.outputs.directory.clone();
    output::ensure_dir(&dir)?;
    let mut timing = Timing::default();
    let outcome = experiments::execute(&cfg, &mut timing)?;
    let report = outcome
        .report
        .clone()
        .with_metadata("name", cfg.experiment.name.clone().unwrap_or_default());

    let mut files = Vec::new();
    let wants = |f: &str| cfg.outputs.wants(f);
    timing.time("write", || -> Result<(), CliError> {
        if let Some(traj) = &outcome.trajectory {
            if wants("snapshots") {
                output::write_snapshots(&dir.join(output::SNAPSHOTS), traj)?;
                files.push(output::SNAPSHOTS.to_string());
            }
            if wants("ledger") {
                output::write_ledger(&dir.join(output::LEDGER), &traj.ledger)?;
                files.push(output::LEDGER.to_string());
            }
        }
        if wants("verify") {
            output::write_json(&dir.join(output::VERIFY), &report)?;
            files.push(output::VERIFY.to_string());
        }
        Ok(())
    })?;
    if wants("timing") {
        files.push(output::TIMING.to_string());
    }
    if wants("summary") {
        files.push(output::SUMMARY.to_string());
        let traj = outcome.trajectory.as_ref();
        let summary = RunSummary {
            experiment: cfg.experiment.kind.name().to_string(),
            name: cfg.experiment.name.clone(),
            config: cfg.clone(),
            run: traj.map(RunMeta::of),
            quench_time: traj.and_then(quench_time_of),
            support_history: traj.map(|t| t.support.clone()).unwrap_or_default(),
            bounds: experiments::bounds(&cfg)?,
            verification: report.clone(),
            diagnostics: outcome.diagnostics.clone(),
            files: files.clone(),
        };
        output::write_json(&dir.join(output::SUMMARY), &summary)?;
    }
    if wants("timing") {
        output::write_json(&dir.join(output::TIMING), &timing)?;
    }
    print_report(&report);
    if let Some(t) = outcome.trajectory.as_ref().and_then(quench_time_of) {
        println!("quench time {t:.6}");
    }
    println!("wrote {} to {}", files.join(", "), dir.display());
    Ok(exit_for(&report))
}

/// Directory to re-check: `--out`, else the configured output directory.
fn verify_dir(common: &Common) -> Result<PathBuf, CliError> {
    if let Some(out) = &common.out {
        return Ok(out.clone());
    }
    match &common.config {
        Some(path) => Ok(config::load(path, &common.overrides)?.outputs.directory),
        None => Err(CliError::Usage("verify needs --out DIR or --config PATH".into())),
    }
}

/// Re-checks a stored run. Tolerances come from the stored configuration,
/// with `--override` applied on top.
pub fn verify(common: &Common) -> Result<u8, CliError> {
    let dir = verify_dir(common)?;
    let (summary, traj) = output::load_trajectory(&dir)?;
    let cfg = reconfigure(&summary.config, &common.overrides, &dir)?;
    let mut report = VerificationReport::new()
        .with_metadata("experiment", summary.experiment.clone())
        .with_metadata("source", "stored trajectory");
    for check in experiments::trajectory_checks(&cfg, &traj)? {
        report.push(check);
    }
    output::write_json(&dir.join(output::VERIFY), &report)?;
    print_report(&report);
    Ok(exit_for(&report))
}

fn reconfigure(stored: &ScenarioConfig, overrides: &[String], dir: &Path) -> Result<ScenarioConfig, CliError> {
    if overrides.is_empty() {
        return Ok(stored.clone());
    }
    let text = toml::to_string(stored).map_err(|e| CliError::Format {
        path: dir.join(output::SUMMARY).display().to_string(),
        message: e.to_string(),
    })?;
    let cfg = config::parse(&text, overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn sweep(common: &Common) -> Result<u8, CliError> {
    let cfg = common.load()?;
    run_sweep(&cfg, common.workers())
}

fn run_sweep(cfg: &ScenarioConfig, workers: usize) -> Result<u8, CliError> {
    let dir = &cfg.outputs.directory;
    output::ensure_dir(dir)?;
    let rows = sweep::run(cfg, workers)?;
    let path = dir.join(sweep::SWEEP);
    sweep::write_csv(&path, &rows)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!("{} runs, {failed} failed; wrote {}", rows.len(), path.display());
    Ok(PASS)
}
