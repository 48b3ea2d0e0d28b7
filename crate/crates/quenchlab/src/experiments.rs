//! End-to-end experiments behind `quenchlab run`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use quenchlab_core::analytic::{bounds_report, bracket_sup, BoundsReport};
use quenchlab_core::ladder::{approximate_maximal, cauchy_solve, LadderResult};
use quenchlab_core::scenarios::Experiment;
use quenchlab_core::scheme::detect_quench;
use quenchlab_core::verify::{
    check_barrier_dominance, check_barrier_profile, check_gradient_ratio, check_holder_exponent,
    check_mass_accounting, check_ordering, check_quench_bounds, check_smoothing_effect,
    check_smoothing_rescaling, check_smoothing_slope, check_support_containment,
    detect_iss, fit_smoothing, fit_time_holder, gradient_ratio_statistic,
    min_over_run, nonexistence_probe, Location, PropertyResult, VerificationReport,
};
use quenchlab_core::{Grid, InitialData, ProblemSpec, Scheme, Trajectory};

use crate::config::{InitialConfig, ScenarioConfig};
use crate::error::CliError;
use crate::output::Timing;

/// What an experiment leaves behind.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// Representative trajectory, written to the CSV files.
    pub trajectory: Option<Trajectory>,
    pub report: VerificationReport,
    pub diagnostics: serde_json::Value,
}

pub(crate) fn solve<T>(context: &str, r: quenchlab_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::solver(context, e))
}

pub fn bounds(cfg: &ScenarioConfig) -> Result<BoundsReport, CliError> {
    let spec = cfg.problem_spec()?;
    solve(
        "bounds",
        bounds_report(&spec, &cfg.calibration(), &cfg.bounds.times, &cfg.bounds.taus),
    )
}

/// Runs the configured problem once on the configured grid.
pub fn single_run(cfg: &ScenarioConfig) -> Result<Trajectory, CliError> {
    run_on(cfg, &cfg.problem_spec()?, cfg.grid()?)
}

fn run_on(cfg: &ScenarioConfig, spec: &ProblemSpec, grid: Grid) -> Result<Trajectory, CliError> {
    let knobs = cfg.knobs()?;
    let mut scheme = solve("setup", Scheme::new(spec, knobs, grid, cfg.stepping.step_config()))?;
    let mut state = scheme.init_state();
    solve("run", scheme.run(&mut state, cfg.stepping.t_end))
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Checks that apply to any stored trajectory of the configured problem.
/// `verify` re-runs exactly these.
pub fn trajectory_checks(
    cfg: &ScenarioConfig,
    traj: &Trajectory,
) -> Result<Vec<PropertyResult>, CliError> {
    let spec = cfg.problem_spec()?;
    let report = bounds(cfg)?;
    let v = &cfg.verify;
    let mut out = Vec::new();
    if !spec.source().violates_origin() {
        let slack = v.quench_slack.unwrap_or(2.0 * traj.knobs.eta + 1e-3);
        out.push(check_quench_bounds(traj, &report, slack));
        if let Some(first) = traj.snapshots.first() {
            let l = max_of(&first.values);
            if l > 0.0 {
                out.push(solve(
                    "barrier_dominance",
                    check_barrier_dominance(traj, l, spec.beta(), &traj.knobs, 0.0, v.barrier_tol),
                )?);
            }
        }
    }
    let scale = traj.final_ledger.initial_mass.max(1.0);
    out.push(check_mass_accounting(
        traj,
        spec.l1_norm(),
        v.mass_tol,
        1e-12 * scale,
        v.mass_tol,
    ));
    if let Some(m0) = report.support_radius_m0 {
        out.push(check_support_containment(traj, m0, v.support_slack_cells * traj.grid.h));
    }
    Ok(out)
}

/// Seeded comparison: data lowered by random nodewise factors must stay
/// below the reference run.
fn randomized_ordering(cfg: &ScenarioConfig, traj: &Trajectory) -> Result<PropertyResult, CliError> {
    let spec = cfg.problem_spec()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let eta = traj.knobs.eta;
    let lower: Vec<f64> = traj.snapshots[0]
        .values
        .iter()
        .map(|v| eta + rng.gen_range(0.0..=1.0) * (v - eta))
        .collect();
    let mut scheme = solve(
        "ordering",
        Scheme::new(&spec, traj.knobs, traj.grid, cfg.stepping.step_config()),
    )?;
    let mut state = solve("ordering", scheme.state_from(lower))?;
    let low = solve("ordering", scheme.run(&mut state, traj.end_time()))?;
    Ok(check_ordering(&low, traj, 1e-10).with_detail("seed", cfg.seed as f64))
}

fn report_for(cfg: &ScenarioConfig) -> VerificationReport {
    VerificationReport::new()
        .with_metadata("experiment", cfg.experiment.kind.name())
        .with_metadata("seed", cfg.seed.to_string())
}

fn push_all(report: &mut VerificationReport, results: Vec<PropertyResult>) {
    for r in results {
        report.push(r);
    }
}

pub fn execute(cfg: &ScenarioConfig, timing: &mut Timing) -> Result<Outcome, CliError> {
    match cfg.experiment.kind {
        Experiment::Quench | Experiment::Propagation => quench(cfg, timing),
        Experiment::Iss => iss(cfg, timing),
        Experiment::Maximal => maximal(cfg, timing),
        Experiment::Gradient => gradient(cfg, timing),
        Experiment::Smoothing => smoothing(cfg, timing),
        Experiment::Nonexistence => nonexistence(cfg, timing),
        Experiment::Sweep => Err(CliError::Usage(
            "experiment `sweep` runs through `quenchlab sweep`".into(),
        )),
    }
}

fn quench(cfg: &ScenarioConfig, timing: &mut Timing) -> Result<Outcome, CliError> {
    let traj = timing.time("solve", || single_run(cfg))?;
    let mut report = report_for(cfg);
    timing.time("verify", || -> Result<(), CliError> {
        push_all(&mut report, trajectory_checks(cfg, &traj)?);
        if cfg.experiment.kind == Experiment::Propagation {
            let spec = cfg.problem_spec()?;
            match spec.initial().support_radius() {
                Some(r0) => report.push(check_barrier_profile(
                    &traj,
                    r0,
                    spec.sup_norm(),
                    &spec.constants(),
                    cfg.verify.barrier_tol,
                )),
                None => report.push(PropertyResult::inconclusive(
                    "barrier_profile",
                    cfg.verify.barrier_tol,
                    "initial data are not compactly supported",
                )),
            }
        }
        if cfg.verify.randomized_ordering {
            report.push(randomized_ordering(cfg, &traj)?);
        }
        Ok(())
    })?;
    let diagnostics = json!({
        "min_value": min_over_run(&traj),
        "steps": traj.steps,
        "end_time": traj.end_time(),
    });
    Ok(Outcome {
        trajectory: Some(traj),
        report,
        diagnostics,
    })
}

fn iss(cfg: &ScenarioConfig, timing: &mut Timing) -> Result<Outcome, CliError> {
    let spec = cfg.problem_spec()?;
    let r = match spec.domain() {
        quenchlab_core::Domain::CauchyTruncated { radius } => radius,
        _ => {
            return Err(CliError::config(
                "problem.domain.kind",
                "the iss experiment needs a cauchy domain",
            ))
        }
    };
    let mut plan = cfg.ladder_plan()?;
    let given = cfg.ladder.as_ref();
    if given.and_then(|l| l.eps_sequence.as_ref()).is_none() {
        plan.eps_sequence = vec![cfg.regularization.epsilon];
    }
    if given.and_then(|l| l.eta_sequence.as_ref()).is_none() {
        plan.eta_sequence = vec![cfg.regularization.eta];
    }
    if given.and_then(|l| l.radius_sequence.as_ref()).is_none() {
        plan.radius_sequence = vec![r, 2.0 * r, 4.0 * r];
    }
    if plan.probe_times.is_empty() {
        plan.probe_times = vec![cfg.stepping.t_end];
    }
    solve("ladder", plan.validate())?;
    let res = timing.time("solve", || solve("cauchy_solve", cauchy_solve(&spec, &plan)))?;
    let mut report = report_for(cfg);
    let exploratory = spec.source().q0().is_none();
    timing.time("verify", || -> Result<(), CliError> {
        for k in 0..plan.probe_times.len() {
            let mut check = detect_iss(&res.report, k, cfg.verify.iss_threshold);
            if plan.probe_times.len() > 1 {
                check.name = format!("iss_t{k}");
            }
            if exploratory {
                check = check.with_note("exploratory: the source carries no sublinear exponent");
            }
            report.push(check);
        }
        let traj = res.largest();
        let scale = traj.final_ledger.initial_mass.max(1.0);
        report.push(check_mass_accounting(
            traj,
            spec.l1_norm(),
            cfg.verify.mass_tol,
            1e-12 * scale,
            cfg.verify.mass_tol,
        ));
        Ok(())
    })?;
    let diagnostics = json!({
        "radius_report": res.report,
        "exploratory": exploratory,
    });
    Ok(Outcome {
        trajectory: Some(res.largest().clone()),
        report,
        diagnostics,
    })
}

fn ladder_diagnostics(res: &LadderResult) -> serde_json::Value {
    let level = |l: &quenchlab_core::ladder::LevelRun| {
        json!({
            "epsilon": l.epsilon,
            "eta": l.eta,
            "quench_time": l.quench_time,
            "sup_diff": l.sup_diff,
            "l1_diff": l.l1_diff,
        })
    };
    json!({
        "levels": res.levels.iter().map(level).collect::<Vec<_>>(),
        "eta_limit": {
            "levels": res.eta_limit.levels.iter().map(level).collect::<Vec<_>>(),
            "converging": res.eta_limit.converging,
            "contraction_factors": res.eta_limit.contraction_factors,
        },
        "monotonicity": res.monotonicity,
        "extrapolated_quench_time": res.extrapolated_quench_time,
    })
}

fn maximal(cfg: &ScenarioConfig, timing: &mut Timing) -> Result<Outcome, CliError> {
    let spec = cfg.problem_spec()?;
    let plan = cfg.ladder_plan()?;
    let res = timing.time("solve", || solve("ladder", approximate_maximal(&spec, &plan)))?;
    let mut report = report_for(cfg);
    timing.time("verify", || -> Result<(), CliError> {
        let m = res.monotonicity;
        report.push(
            PropertyResult::judged("maximal_monotonicity", m.worst_violation, m.tolerance)
                .with_location(m.location.map(|(x, t)| Location::at(x, t)))
                .with_trend(res.levels.iter().filter_map(|l| l.quench_time).collect()),
        );
        let fits: Vec<_> = res
            .levels
            .iter()
            .filter_map(|l| {
                let t = &l.trajectory;
                fit_time_holder(t, t.grid.n_cells / 2, cfg.verify.holder_tau, None)
            })
            .collect();
        report.push(check_holder_exponent(&fits, cfg.verify.holder_min, cfg.verify.holder_max));
        push_all(&mut report, trajectory_checks(cfg, res.maximal())?);
        Ok(())
    })?;
    Ok(Outcome {
        trajectory: Some(res.maximal().clone()),
        report,
        diagnostics: ladder_diagnostics(&res),
    })
}

fn gradient(cfg: &ScenarioConfig, timing: &mut Timing) -> Result<Outcome, CliError> {
    let spec = cfg.problem_spec()?;
    let half = spec.domain().half_length();
    let n = cfg.grid()?.n_cells;
    let levels = if cfg.grid.refinement.is_empty() {
        vec![(n / 4).max(2), (n / 2).max(2), n]
    } else {
        cfg.grid.refinement.clone()
    };
    let tau = cfg.verify.tau;
    let consts = spec.constants();
    let bracket = solve(
        "bracket",
        bracket_sup(tau, spec.sup_norm(), spec.source(), spec.p(), spec.beta()),
    )?;
    let floor = cfg.verify.gradient_floor_eps * cfg.regularization.epsilon;
    let mut ratios = Vec::new();
    let mut locations = Vec::new();
    let mut finest = None;
    for &cells in &levels {
        let grid = solve("grid", Grid::new(half, cells))?;
        let traj = timing.time(&format!("solve_n{cells}"), || run_on(cfg, &spec, grid))?;
        let (r, loc) = gradient_ratio_statistic(&traj, bracket, &consts, tau, floor);
        ratios.push(r);
        locations.push(loc);
        finest = Some(traj);
    }
    let mut report = report_for(cfg);
    let check = check_gradient_ratio(&ratios, cfg.verify.gradient_band)
        .with_location(locations.last().copied().flatten())
        .with_detail("bracket", bracket)
        .with_detail("tau", tau)
        .with_detail("value_floor", floor);
    report.push(check);
    let traj = finest.expect("at least one refinement level");
    push_all(&mut report, trajectory_checks(cfg, &traj)?);
    let diagnostics = json!({
        "cells": levels,
        "ratios": ratios,
        "bracket": bracket,
    });
    Ok(Outcome {
        trajectory: Some(traj),
        report,
        diagnostics,
    })
}

fn smoothing(cfg: &ScenarioConfig, timing: &mut Timing) -> Result<Outcome, CliError> {
    let (mass, width) = match cfg.problem.initial {
        InitialConfig::Spike { mass, width } => (mass, width),
        _ => {
            return Err(CliError::config(
                "problem.initial.kind",
                "the smoothing experiment needs spike data",
            ))
        }
    };
    let base = cfg.problem_spec()?;
    let lambda = base.constants().lambda;
    let t_end = cfg.stepping.t_end;
    let t_min = t_end / 100.0;
    let window = (t_end / 1000.0, t_end / 10.0);
    let mut fits = Vec::new();
    let mut first = None;
    for k in 0..3 {
        let m = mass * f64::from(1u32 << k);
        let spec = solve("spike", base.with_initial(InitialData::Spike { mass: m, width }))?;
        let traj = timing.time(&format!("solve_m{m}"), || run_on(cfg, &spec, cfg.grid()?))?;
        fits.push(fit_smoothing(&traj, m, lambda, t_min, window));
        first.get_or_insert(traj);
    }
    let p = base.p();
    let v = &cfg.verify;
    let mut report = report_for(cfg);
    report.push(check_smoothing_rescaling(&fits, p, lambda, v.smoothing_band));
    report.push(check_smoothing_slope(&fits, lambda, v.smoothing_slope_slack));
    report.push(
        check_smoothing_effect(&fits, p, lambda, v.smoothing_band)
            .with_detail("calibrated_constant", cfg.calibration.c_smoothing),
    );
    let traj = first.expect("three masses");
    push_all(&mut report, trajectory_checks(cfg, &traj)?);
    let diagnostics = json!({
        "fits": fits,
        "t_min": t_min,
        "slope_window": [window.0, window.1],
    });
    Ok(Outcome {
        trajectory: Some(traj),
        report,
        diagnostics,
    })
}

fn nonexistence(cfg: &ScenarioConfig, timing: &mut Timing) -> Result<Outcome, CliError> {
    let spec = cfg.problem_spec()?;
    let knobs = cfg.knobs()?;
    let grid = cfg.grid()?;
    let step = cfg.stepping.step_config();
    let diag = timing.time("probe", || {
        solve(
            "nonexistence_probe",
            nonexistence_probe(&spec, knobs, grid, step, cfg.stepping.t_end, cfg.verify.probe_steps),
        )
    })?;
    let traj = timing.time("solve", || single_run(cfg))?;
    // the probe is a diagnostic: it goes to the summary, not the verdicts
    let mut report = report_for(cfg);
    let scale = traj.final_ledger.initial_mass.max(1.0);
    report.push(check_mass_accounting(
        &traj,
        spec.l1_norm(),
        cfg.verify.mass_tol,
        1e-12 * scale,
        cfg.verify.mass_tol,
    ));
    Ok(Outcome {
        trajectory: Some(traj),
        report,
        diagnostics: json!({ "probe": diag }),
    })
}

/// Detected quench time of a stored run.
pub fn quench_time_of(traj: &Trajectory) -> Option<f64> {
    traj.quench_time.or_else(|| detect_quench(traj, traj.quench_tol))
}
