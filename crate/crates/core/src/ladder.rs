//! Limit ladders: `eta -> 0` for the cut-off problem, `eps -> 0` for the
//! maximal solution and `r -> inf` for the Cauchy problem.
//!
//! Levels are independent runs on matched grids; comparisons interpolate
//! snapshots linearly in time and only look at the common time window.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::analytic::support_bound;
use crate::error::{Error, Result};
use crate::model::{Domain, ProblemSpec, RegularizationKnobs};
use crate::scheme::{support_interval, Grid, Scheme, StepConfig, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderPlan {
    /// Absolute diffusivity-lift cutoffs, strictly decreasing.
    pub eta_sequence: Vec<f64>,
    /// Absorption cutoffs, strictly decreasing.
    pub eps_sequence: Vec<f64>,
    /// Truncation radii, strictly increasing (Cauchy problems only).
    pub radius_sequence: Vec<f64>,
    pub step: StepConfig,
    /// Cells on the Dirichlet interval.
    pub n_cells: usize,
    /// Fixed spacing for truncated Cauchy runs.
    pub cauchy_spacing: f64,
    pub t_end: f64,
    /// Times where the Cauchy support radius is sampled.
    pub probe_times: Vec<f64>,
    /// `None` selects the default exponent for `p`.
    pub alpha: Option<f64>,
    pub monotonicity_tol: f64,
    pub radius_tol: f64,
    /// Run the full eta ladder at every eps level instead of only the finest.
    pub eta_ladder_each_level: bool,
}

impl LadderPlan {
    /// Geometric defaults scaled to the data: eps in `{0.1, 0.05, 0.025,
    /// 0.0125} * |u0|_inf`, eta in `{1e-1, 1e-2, 1e-3} * eps_min`, radii
    /// doubling from `m0 / 2` when the data are compactly supported.
    pub fn default_for(spec: &ProblemSpec, n_cells: usize, t_end: f64) -> LadderPlan {
        let sup = spec.sup_norm();
        let scale = if sup > 0.0 { sup } else { 1.0 };
        let eps_sequence: Vec<f64> = [0.1, 0.05, 0.025, 0.0125].iter().map(|f| f * scale).collect();
        let eps_min = eps_sequence[eps_sequence.len() - 1];
        let eta_sequence = [1e-1, 1e-2, 1e-3].iter().map(|f| f * eps_min).collect();
        let radius_sequence = match spec.initial().support_radius() {
            Some(r0) if spec.domain().is_cauchy() => {
                let m0 = support_bound(r0, sup, &spec.constants());
                (0..3).map(|k| 0.5 * m0 * (1u32 << k) as f64).collect()
            }
            _ => Vec::new(),
        };
        LadderPlan {
            eta_sequence,
            eps_sequence,
            radius_sequence,
            step: StepConfig {
                stop_on_quench: false,
                ..StepConfig::default()
            },
            n_cells,
            cauchy_spacing: 2.0 * spec.domain().half_length() / n_cells as f64,
            t_end,
            probe_times: Vec::new(),
            alpha: None,
            monotonicity_tol: 1e-6,
            radius_tol: 1e-8,
            eta_ladder_each_level: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        strictly(&self.eta_sequence, "ladder.eta_sequence", |a, b| a > b)?;
        strictly(&self.eps_sequence, "ladder.eps_sequence", |a, b| a > b)?;
        strictly(&self.radius_sequence, "ladder.radius_sequence", |a, b| a < b)?;
        if let (Some(eta), Some(eps)) = (self.eta_sequence.first(), self.eps_sequence.last()) {
            if eta >= eps {
                return Err(Error::invalid(
                    "ladder.eta_sequence",
                    format!("eta = {eta} is not below the smallest eps = {eps}"),
                ));
            }
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid("ladder.t_end", "must be finite and > 0"));
        }
        if !(self.cauchy_spacing > 0.0) {
            return Err(Error::invalid("ladder.cauchy_spacing", "must be > 0"));
        }
        for (name, v) in [
            ("ladder.monotonicity_tol", self.monotonicity_tol),
            ("ladder.radius_tol", self.radius_tol),
        ] {
            if !(v >= 0.0) {
                return Err(Error::invalid(name, "must be >= 0"));
            }
        }
        self.step.validate()
    }
}

fn strictly(seq: &[f64], name: &'static str, ord: impl Fn(f64, f64) -> bool) -> Result<()> {
    if seq.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::invalid(name, "entries must be finite and > 0"));
    }
    if seq.windows(2).any(|w| !ord(w[0], w[1])) {
        return Err(Error::invalid(name, "must be strictly monotone"));
    }
    Ok(())
}

/// One rung of a ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRun {
    pub epsilon: f64,
    pub eta: f64,
    pub radius: Option<f64>,
    pub quench_time: Option<f64>,
    /// Differences to the previous rung at matched times (`None` on the first).
    pub sup_diff: Option<f64>,
    pub l1_diff: Option<f64>,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaLimit {
    pub levels: Vec<LevelRun>,
    /// Successive sup differences decrease strictly.
    pub converging: bool,
    /// `sup_diff[k+1] / sup_diff[k]`, recorded but not asserted.
    pub contraction_factors: Vec<f64>,
}

impl EtaLimit {
    pub fn finest(&self) -> &Trajectory {
        &self.levels[self.levels.len() - 1].trajectory
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// `max(0, max (u_fine - u_coarse))` over consecutive pairs and matched times.
    pub worst_violation: f64,
    /// `(x, t)` of the worst excess.
    pub location: Option<(f64, f64)>,
    /// Indices of the coarse and fine levels where it occurs.
    pub pair: Option<(usize, usize)>,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderResult {
    pub levels: Vec<LevelRun>,
    /// Eta diagnostic at the finest eps.
    pub eta_limit: EtaLimit,
    pub monotonicity: MonotonicityReport,
    pub extrapolated_quench_time: Option<f64>,
}

impl LadderResult {
    /// Finest-eps trajectory, the maximal-solution approximation.
    pub fn maximal(&self) -> &Trajectory {
        &self.levels[self.levels.len() - 1].trajectory
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusLevel {
    pub radius: f64,
    /// Support radius at each probe time (`None`: empty support).
    pub support_at_probes: Vec<Option<f64>>,
    /// Sup difference to the previous radius on common nodes.
    pub diff_to_prev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusReport {
    pub probe_times: Vec<f64>,
    pub levels: Vec<RadiusLevel>,
    /// Finite-propagation radius for compactly supported data.
    pub m0: Option<f64>,
    /// Worst common-node difference between consecutive radii `>= m0`.
    pub worst_diff_beyond_m0: Option<f64>,
    pub tolerance: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyResult {
    pub trajectories: Vec<Trajectory>,
    pub report: RadiusReport,
}

impl CauchyResult {
    pub fn largest(&self) -> &Trajectory {
        &self.trajectories[self.trajectories.len() - 1]
    }
}

fn grid_for(spec: &ProblemSpec, plan: &LadderPlan) -> Result<Grid> {
    match spec.domain() {
        Domain::Dirichlet { half_length } => Grid::new(half_length, plan.n_cells),
        Domain::CauchyTruncated { radius } => Grid::with_spacing(radius, plan.cauchy_spacing),
    }
}

fn knobs_for(spec: &ProblemSpec, plan: &LadderPlan, eps: f64, eta: f64) -> Result<RegularizationKnobs> {
    let consts = spec.constants();
    match plan.alpha {
        Some(a) => RegularizationKnobs::new(eps, eta, a, &consts),
        None => RegularizationKnobs::with_default_alpha(eps, eta, &consts),
    }
}

/// Single run of the doubly regularized problem.
pub fn run_level(spec: &ProblemSpec, plan: &LadderPlan, eps: f64, eta: f64) -> Result<Trajectory> {
    let grid = grid_for(spec, plan)?;
    let knobs = knobs_for(spec, plan, eps, eta)?;
    let mut scheme = Scheme::new(spec, knobs, grid, plan.step)?;
    let mut state = scheme.init_state();
    scheme.run(&mut state, plan.t_end)
}

/// `(sup, L1)` distance of two runs on the same grid over the snapshot
/// times of `b` inside the common time window.
pub fn matched_difference(a: &Trajectory, b: &Trajectory) -> (f64, f64) {
    let end = a.end_time().min(b.end_time());
    let h = a.grid.h;
    let mut sup: f64 = 0.0;
    let mut l1: f64 = 0.0;
    for snap in b.snapshots.iter().filter(|s| s.time <= end) {
        let va = a.values_at(snap.time);
        let diffs: Vec<f64> = va.iter().zip(&snap.values).map(|(x, y)| (x - y).abs()).collect();
        sup = sup.max(diffs.iter().copied().fold(0.0, f64::max));
        l1 = l1.max(crate::scheme::trapezoid(&diffs, h));
    }
    (sup, l1)
}

/// Runs the eta ladder at fixed `eps`.
pub fn solve_p_eps(spec: &ProblemSpec, eps: f64, plan: &LadderPlan) -> Result<EtaLimit> {
    plan.validate()?;
    if plan.eta_sequence.is_empty() {
        return Err(Error::Precondition("the eta ladder is empty".into()));
    }
    let mut levels: Vec<LevelRun> = Vec::new();
    for &eta in &plan.eta_sequence {
        if eta >= eps {
            return Err(Error::invalid(
                "ladder.eta_sequence",
                format!("eta = {eta} is not below eps = {eps}"),
            ));
        }
        let trajectory = run_level(spec, plan, eps, eta)?;
        let (sup_diff, l1_diff) = match levels.last() {
            Some(prev) => {
                let (s, l) = matched_difference(&prev.trajectory, &trajectory);
                (Some(s), Some(l))
            }
            None => (None, None),
        };
        levels.push(LevelRun {
            epsilon: eps,
            eta,
            radius: radius_of(spec),
            quench_time: trajectory.quench_time,
            sup_diff,
            l1_diff,
            trajectory,
        });
    }
    let diffs: Vec<f64> = levels.iter().filter_map(|l| l.sup_diff).collect();
    let converging = diffs.windows(2).all(|w| w[1] < w[0]);
    let contraction_factors = diffs
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    Ok(EtaLimit {
        levels,
        converging,
        contraction_factors,
    })
}

fn radius_of(spec: &ProblemSpec) -> Option<f64> {
    match spec.domain() {
        Domain::CauchyTruncated { radius } => Some(radius),
        Domain::Dirichlet { .. } => None,
    }
}

/// Runs the eps ladder and checks that finer levels never exceed coarser
/// ones beyond `plan.monotonicity_tol`.
pub fn approximate_maximal(spec: &ProblemSpec, plan: &LadderPlan) -> Result<LadderResult> {
    plan.validate()?;
    if plan.eps_sequence.len() < 3 {
        return Err(Error::Precondition(format!(
            "the eps ladder needs at least 3 levels, got {}",
            plan.eps_sequence.len()
        )));
    }
    let finest_eta = *plan
        .eta_sequence
        .last()
        .ok_or_else(|| Error::Precondition("the eta ladder is empty".into()))?;
    let n = plan.eps_sequence.len();
    let mut levels: Vec<LevelRun> = Vec::new();
    let mut eta_limit = None;
    for (k, &eps) in plan.eps_sequence.iter().enumerate() {
        let trajectory = if plan.eta_ladder_each_level || k + 1 == n {
            let lim = solve_p_eps(spec, eps, plan)?;
            let t = lim.finest().clone();
            eta_limit = Some(lim);
            t
        } else {
            run_level(spec, plan, eps, finest_eta)?
        };
        let (sup_diff, l1_diff) = match levels.last() {
            Some(prev) => {
                let (s, l) = matched_difference(&prev.trajectory, &trajectory);
                (Some(s), Some(l))
            }
            None => (None, None),
        };
        levels.push(LevelRun {
            epsilon: eps,
            eta: finest_eta,
            radius: radius_of(spec),
            quench_time: trajectory.quench_time,
            sup_diff,
            l1_diff,
            trajectory,
        });
    }
    let monotonicity = monotonicity_report(&levels, plan.monotonicity_tol);
    let times: Vec<Option<f64>> = levels.iter().map(|l| l.quench_time).collect();
    let extrapolated_quench_time = aitken_tail(&times);
    Ok(LadderResult {
        levels,
        eta_limit: eta_limit.expect("the finest level runs the eta ladder"),
        monotonicity,
        extrapolated_quench_time,
    })
}

pub fn monotonicity_report(levels: &[LevelRun], tol: f64) -> MonotonicityReport {
    let mut worst = 0.0;
    let mut location = None;
    let mut pair = None;
    for k in 1..levels.len() {
        let coarse = &levels[k - 1].trajectory;
        let fine = &levels[k].trajectory;
        let end = coarse.end_time().min(fine.end_time());
        let nodes = fine.grid.nodes();
        for snap in fine.snapshots.iter().filter(|s| s.time <= end) {
            let upper = coarse.values_at(snap.time);
            for (i, (f, c)) in snap.values.iter().zip(&upper).enumerate() {
                let excess = f - c;
                if excess > worst {
                    worst = excess;
                    location = Some((nodes[i], snap.time));
                    pair = Some((k - 1, k));
                }
            }
        }
    }
    MonotonicityReport {
        worst_violation: worst,
        location,
        pair,
        tolerance: tol,
        passed: worst <= tol,
    }
}

/// Aitken's delta-squared on the last three entries; falls back to the last
/// entry when the differences do not contract.
pub fn aitken_tail(values: &[Option<f64>]) -> Option<f64> {
    let last = *values.last()?;
    if values.len() < 3 {
        return last;
    }
    let k = values.len();
    let (a, b, c) = (values[k - 3]?, values[k - 2]?, values[k - 1]?);
    aitken(a, b, c).or(Some(c))
}

/// Limit of `a, b, c` under geometric convergence, `None` if the
/// differences do not shrink with a common sign.
pub fn aitken(a: f64, b: f64, c: f64) -> Option<f64> {
    let d1 = b - a;
    let d2 = c - b;
    let denom = d2 - d1;
    if d1 == 0.0 || d2 == 0.0 || d1.signum() != d2.signum() || d2.abs() >= d1.abs() {
        return None;
    }
    Some(c - d2 * d2 / denom)
}

/// Runs the radius ladder at the finest regularization.
pub fn cauchy_solve(spec: &ProblemSpec, plan: &LadderPlan) -> Result<CauchyResult> {
    plan.validate()?;
    if !spec.domain().is_cauchy() {
        return Err(Error::Precondition("cauchy_solve needs a truncated Cauchy domain".into()));
    }
    if plan.radius_sequence.is_empty() {
        return Err(Error::Precondition("the radius ladder is empty".into()));
    }
    let eps = *plan
        .eps_sequence
        .last()
        .ok_or_else(|| Error::Precondition("the eps ladder is empty".into()))?;
    let eta = *plan
        .eta_sequence
        .last()
        .ok_or_else(|| Error::Precondition("the eta ladder is empty".into()))?;
    let h = plan.cauchy_spacing;
    let m0 = spec
        .initial()
        .support_radius()
        .map(|r0| support_bound(r0, spec.sup_norm(), &spec.constants()));
    let mut trajectories: Vec<Trajectory> = Vec::new();
    let mut levels: Vec<RadiusLevel> = Vec::new();
    let mut worst_beyond: Option<f64> = None;
    for (k, &r) in plan.radius_sequence.iter().enumerate() {
        let shifts = libm::round(r / h);
        if ((r / h) - shifts).abs() > 1e-9 * shifts.max(1.0) {
            return Err(Error::invalid(
                "ladder.radius_sequence",
                format!("radius {r} is not a multiple of the spacing {h}"),
            ));
        }
        let level_spec = spec.with_domain(Domain::CauchyTruncated { radius: r })?;
        let traj = run_level(&level_spec, plan, eps, eta)?;
        let nodes = traj.grid.nodes();
        let support_at_probes = plan
            .probe_times
            .iter()
            .map(|&t| {
                support_interval(&nodes, &traj.values_at(t), traj.support_tol)
                    .map(|iv| iv[0].abs().max(iv[1].abs()))
            })
            .collect();
        let diff_to_prev = if k > 0 {
            let d = common_node_difference(&trajectories[k - 1], &traj);
            if let Some(m0) = m0 {
                if plan.radius_sequence[k - 1] >= m0 {
                    worst_beyond = Some(worst_beyond.map_or(d, |w: f64| w.max(d)));
                }
            }
            Some(d)
        } else {
            None
        };
        levels.push(RadiusLevel {
            radius: r,
            support_at_probes,
            diff_to_prev,
        });
        trajectories.push(traj);
    }
    let stable = worst_beyond.is_none_or(|w| w <= plan.radius_tol);
    Ok(CauchyResult {
        trajectories,
        report: RadiusReport {
            probe_times: plan.probe_times.clone(),
            levels,
            m0,
            worst_diff_beyond_m0: worst_beyond,
            tolerance: plan.radius_tol,
            stable,
        },
    })
}

/// Sup difference of two same-spacing runs over the nodes of the smaller
/// domain, at the snapshot times of `small` inside the common window.
pub fn common_node_difference(small: &Trajectory, large: &Trajectory) -> f64 {
    let offset = libm::round((large.grid.half_length - small.grid.half_length) / small.grid.h) as usize;
    let end = small.end_time().min(large.end_time());
    let mut worst: f64 = 0.0;
    for snap in small.snapshots.iter().filter(|s| s.time <= end) {
        let big = large.values_at(snap.time);
        for (i, v) in snap.values.iter().enumerate() {
            worst = worst.max((v - big[i + offset]).abs());
        }
    }
    worst
}
