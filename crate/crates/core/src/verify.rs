//! Executable property checks over trajectories.
//!
//! Every check returns a [`PropertyResult`] with a quantified violation and
//! the tolerance it was judged against. Constants that the estimates leave
//! unnamed are fitted, and only their stability is judged.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::analytic::{solve_gamma_eps, stationary_barrier, BoundsReport};
use crate::error::{Error, Result};
use crate::ladder::{aitken, RadiusReport};
use crate::model::{DerivedConstants, Hypotheses, ProblemSpec, SourceKind, SourceTerm, UserSource};
use crate::scheme::{is_quenched, Grid, Scheme, StepConfig, Trajectory};
use crate::RegularizationKnobs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

/// Where the worst case sits; either coordinate may be absent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Location {
    pub x: Option<f64>,
    pub t: Option<f64>,
}

impl Location {
    pub fn at(x: f64, t: f64) -> Self {
        Location {
            x: Some(x),
            t: Some(t),
        }
    }

    pub fn time(t: f64) -> Self {
        Location { x: None, t: Some(t) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub status: Status,
    pub passed: bool,
    /// `None` when the check was inconclusive.
    pub worst_violation: Option<f64>,
    pub location: Option<Location>,
    pub tolerance: f64,
    pub refinement_trend: Vec<f64>,
    /// Auxiliary numbers (fitted constants, slopes, counts).
    pub details: BTreeMap<String, f64>,
    pub note: Option<String>,
}

impl PropertyResult {
    /// `passed` is `violation <= tolerance`.
    pub fn judged(name: &str, violation: f64, tolerance: f64) -> Self {
        let passed = violation <= tolerance;
        PropertyResult {
            name: name.to_string(),
            status: if passed { Status::Pass } else { Status::Fail },
            passed,
            worst_violation: Some(violation),
            location: None,
            tolerance,
            refinement_trend: Vec::new(),
            details: BTreeMap::new(),
            note: None,
        }
    }

    pub fn inconclusive(name: &str, tolerance: f64, why: impl Into<String>) -> Self {
        PropertyResult {
            name: name.to_string(),
            status: Status::Inconclusive,
            passed: false,
            worst_violation: None,
            location: None,
            tolerance,
            refinement_trend: Vec::new(),
            details: BTreeMap::new(),
            note: Some(why.into()),
        }
    }

    pub fn with_location(mut self, loc: Option<Location>) -> Self {
        self.location = loc;
        self
    }

    pub fn with_trend(mut self, trend: Vec<f64>) -> Self {
        self.refinement_trend = trend;
        self
    }

    pub fn with_detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn is_failure(&self) -> bool {
        self.status == Status::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VerificationReport {
    pub metadata: BTreeMap<String, String>,
    pub properties: Vec<PropertyResult>,
}

impl VerificationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_metadata(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    /// Adds a property; a second result with the same name replaces the first.
    pub fn push(&mut self, result: PropertyResult) {
        match self.properties.iter_mut().find(|p| p.name == result.name) {
            Some(slot) => *slot = result,
            None => self.properties.push(result),
        }
    }

    pub fn get(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn any_failed(&self) -> bool {
        self.properties.iter().any(|p| p.is_failure())
    }
}

fn argmax(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
}

/// `max_x u(x, tau + s) - Gamma_eps(s)` over the snapshots at or after `tau`,
/// with `Gamma_eps` started from level `l` at `tau`.
pub fn check_barrier_dominance(
    traj: &Trajectory,
    l: f64,
    beta: f64,
    knobs: &RegularizationKnobs,
    tau: f64,
    tol: f64,
) -> Result<PropertyResult> {
    const NAME: &str = "barrier_dominance";
    let snaps: Vec<_> = traj.snapshots.iter().filter(|s| s.time >= tau).collect();
    let Some(first) = snaps.first() else {
        return Ok(PropertyResult::inconclusive(NAME, tol, "no snapshot at or after tau"));
    };
    let start_max = argmax(&first.values).1;
    if start_max > l * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "barrier level {l} is below max u(tau) = {start_max}"
        )));
    }
    let shifts: Vec<f64> = snaps.iter().map(|s| s.time - first.time).collect();
    let gamma = solve_gamma_eps(knobs, beta, l, &shifts)?;
    let nodes = traj.grid.nodes();
    let mut worst = f64::NEG_INFINITY;
    let mut loc = None;
    for (snap, g) in snaps.iter().zip(&gamma.values) {
        let (i, m) = argmax(&snap.values);
        if m - g > worst {
            worst = m - g;
            loc = Some(Location::at(nodes[i], snap.time));
        }
    }
    let worst = worst.max(0.0);
    Ok(PropertyResult::judged(NAME, worst, tol).with_location(loc))
}

/// Detected quench time against the sup-norm bound plus `dt + slack`.
/// The position relative to the calibrated `L^1` bound is reported only.
pub fn check_quench_bounds(traj: &Trajectory, report: &BoundsReport, slack: f64) -> PropertyResult {
    const NAME: &str = "quench_bound";
    let bound = report.quench_bound_sup;
    let tol = traj.dt + slack;
    let detected = traj
        .quench_time
        .or_else(|| crate::scheme::detect_quench(traj, traj.quench_tol));
    match detected {
        Some(tq) => {
            let l1 = report.quench_bound_l1.bound;
            let r = PropertyResult::judged(NAME, tq - bound, tol)
                .with_location(Some(Location::time(tq)))
                .with_detail("quench_time", tq)
                .with_detail("bound_sup", bound)
                .with_detail("bound_l1_calibrated", l1);
            if l1 > 0.0 {
                r.with_detail("ratio_to_l1_bound", tq / l1)
            } else {
                r
            }
        }
        None if traj.end_time() > bound + tol => {
            PropertyResult::judged(NAME, traj.end_time() - bound, tol)
                .with_location(Some(Location::time(traj.end_time())))
                .with_note("no quench detected although the run passed the bound")
        }
        None => PropertyResult::inconclusive(
            NAME,
            tol,
            "run ended before both the bound and a quench",
        ),
    }
}

/// `max_t (support radius - m0)`.
pub fn check_support_containment(traj: &Trajectory, m0: f64, tol: f64) -> PropertyResult {
    const NAME: &str = "support_containment";
    let mut worst = f64::NEG_INFINITY;
    let mut loc = None;
    for s in &traj.support {
        let Some([a, b]) = s.interval else { continue };
        let (x, r) = if a.abs() > b.abs() { (a, a.abs()) } else { (b, b.abs()) };
        if r - m0 > worst {
            worst = r - m0;
            loc = Some(Location::at(x, s.time));
        }
    }
    if loc.is_none() {
        return PropertyResult::judged(NAME, 0.0, tol).with_note("support empty at every snapshot");
    }
    PropertyResult::judged(NAME, worst.max(0.0), tol)
        .with_location(loc)
        .with_detail("m0", m0)
        .with_detail("max_radius", worst + m0)
}

/// `u(x, t) <= w(|x| - r0)` for `|x| > r0`, `w` the stationary barrier of
/// height `m`.
pub fn check_barrier_profile(
    traj: &Trajectory,
    r0: f64,
    m: f64,
    consts: &DerivedConstants,
    tol: f64,
) -> PropertyResult {
    const NAME: &str = "stationary_barrier";
    let nodes = traj.grid.nodes();
    let mut worst = 0.0;
    let mut loc = None;
    for snap in &traj.snapshots {
        for (x, u) in nodes.iter().zip(&snap.values) {
            if x.abs() <= r0 {
                continue;
            }
            let excess = u - stationary_barrier(m, consts, x.abs() - r0);
            if excess > worst {
                worst = excess;
                loc = Some(Location::at(*x, snap.time));
            }
        }
    }
    PropertyResult::judged(NAME, worst, tol).with_location(loc)
}

/// `max |slope| / (u_bar^{1-1/gamma} bracket)` over faces and snapshots at
/// `t >= tau`. `u_bar` is the face average floored at `eta`; faces with an
/// endpoint at or below `value_floor` are skipped.
pub fn gradient_ratio_statistic(
    traj: &Trajectory,
    bracket: f64,
    consts: &DerivedConstants,
    tau: f64,
    value_floor: f64,
) -> (f64, Option<Location>) {
    let h = traj.grid.h;
    let eta = traj.knobs.eta;
    let nodes = traj.grid.nodes();
    let mut worst = 0.0;
    let mut loc = None;
    for snap in traj.snapshots.iter().filter(|s| s.time >= tau) {
        let r = max_face_ratio(&snap.values, h, eta, consts.gradient_power(), value_floor);
        if r.1 > worst {
            worst = r.1;
            loc = Some(Location::at(0.5 * (nodes[r.0] + nodes[r.0 + 1]), snap.time));
        }
    }
    (worst / bracket, loc)
}

/// `(face, max |slope| / u_bar^{power})` of one state.
pub fn max_face_ratio(values: &[f64], h: f64, eta: f64, power: f64, value_floor: f64) -> (usize, f64) {
    let mut best = (0, 0.0);
    for (j, w) in values.windows(2).enumerate() {
        if w[0] <= value_floor || w[1] <= value_floor {
            continue;
        }
        let slope = ((w[1] - w[0]) / h).abs();
        let avg = (0.5 * (w[0] + w[1])).max(eta);
        let r = slope / libm::pow(avg, power);
        if r > best.1 {
            best = (j, r);
        }
    }
    best
}

/// Relative spread `max/min - 1` of a refinement sequence of ratio
/// statistics.
pub fn check_gradient_ratio(ratios: &[f64], band: f64) -> PropertyResult {
    const NAME: &str = "gradient_ratio";
    if ratios.len() < 3 {
        return PropertyResult::inconclusive(NAME, band, "refinement sequence shorter than 3")
            .with_trend(ratios.to_vec());
    }
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    if !(lo > 0.0) {
        return PropertyResult::inconclusive(NAME, band, "ratio statistic vanished")
            .with_trend(ratios.to_vec());
    }
    let growth = ratios
        .windows(2)
        .map(|w| w[1] / w[0] - 1.0)
        .fold(f64::NEG_INFINITY, f64::max);
    PropertyResult::judged(NAME, hi / lo - 1.0, band)
        .with_trend(ratios.to_vec())
        .with_detail("max_step_growth", growth)
}

/// Time-regularity fit at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    /// Log-log slope of `C(delta) = max |u(t + delta) - u(t)|`.
    pub exponent: f64,
    /// Smallest `C` with `|u(t) - u(s)| <= C |t - s|^{1/2}` over the window.
    pub half_constant: f64,
    pub samples: usize,
    pub node: usize,
}

/// Regresses `log C(delta)` on `log delta` for `delta` on a geometric grid of
/// snapshot separations in `[10 dt, delta_max]`, using snapshots at `t >= tau`
/// with regular spacing.
pub fn fit_time_holder(
    traj: &Trajectory,
    node: usize,
    tau: f64,
    delta_max: Option<f64>,
) -> Option<HolderFit> {
    let snaps: Vec<_> = traj.snapshots.iter().filter(|s| s.time >= tau).collect();
    if snaps.len() < 3 {
        return None;
    }
    let spacing = snaps[1].time - snaps[0].time;
    if !(spacing > 0.0) {
        return None;
    }
    // drop the trailing irregular snapshots (quench record, truncated step)
    let mut k = snaps.len();
    while k > 2 && ((snaps[k - 1].time - snaps[k - 2].time) - spacing).abs() > 1e-9 * spacing {
        k -= 1;
    }
    let series: Vec<f64> = snaps[..k].iter().map(|s| s.values[node]).collect();
    let span = spacing * (k - 1) as f64;
    let d_max = delta_max.unwrap_or(0.5 * span).min(0.5 * span);
    let lo_steps = (libm::ceil(10.0 * traj.dt / spacing) as usize).max(1);
    let hi_steps = libm::floor(d_max / spacing) as usize;
    if hi_steps <= lo_steps {
        return None;
    }
    let mut points = Vec::new();
    let mut half: f64 = 0.0;
    let mut s = lo_steps;
    while s <= hi_steps {
        let c = series
            .windows(s + 1)
            .map(|w| (w[s] - w[0]).abs())
            .fold(0.0, f64::max);
        let delta = s as f64 * spacing;
        if c > 0.0 {
            points.push((libm::log(delta), libm::log(c)));
        }
        half = half.max(c / libm::sqrt(delta));
        s = (libm::ceil(s as f64 * 1.2) as usize).max(s + 1);
    }
    if points.len() < 3 {
        return Some(HolderFit {
            exponent: 0.0,
            half_constant: half,
            samples: points.len(),
            node,
        });
    }
    Some(HolderFit {
        exponent: least_squares_slope(&points),
        half_constant: half,
        samples: points.len(),
        node,
    })
}

pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Stability of the fitted `1/2`-Hölder constant under `dt` refinement.
pub fn check_time_holder(fits: &[HolderFit], band: f64) -> PropertyResult {
    const NAME: &str = "time_holder_constant";
    let cs: Vec<f64> = fits.iter().map(|f| f.half_constant).collect();
    if cs.len() < 2 {
        return PropertyResult::inconclusive(NAME, band, "need at least two dt levels").with_trend(cs);
    }
    let hi = cs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = cs.iter().copied().fold(f64::INFINITY, f64::min);
    if hi == 0.0 {
        return PropertyResult::judged(NAME, 0.0, band).with_trend(cs);
    }
    PropertyResult::judged(NAME, if lo > 0.0 { hi / lo - 1.0 } else { f64::MAX }, band)
        .with_trend(cs)
}

/// Log-log exponent against `[lo, hi]`. The fits come from a cutoff ladder
/// (coarse to fine); when three or more contract geometrically the judged
/// exponent is the Aitken limit of the last three, otherwise the finest.
pub fn check_holder_exponent(fits: &[HolderFit], lo: f64, hi: f64) -> PropertyResult {
    const NAME: &str = "time_holder_exponent";
    let slopes: Vec<f64> = fits.iter().map(|f| f.exponent).collect();
    let Some(&finest) = slopes.last() else {
        return PropertyResult::inconclusive(NAME, 0.0, "no fit");
    };
    let k = slopes.len();
    let limit = if k >= 3 {
        aitken(slopes[k - 3], slopes[k - 2], slopes[k - 1])
    } else {
        None
    };
    let judged = limit.unwrap_or(finest);
    let violation = (lo - judged).max(judged - hi).max(0.0);
    let mut r = PropertyResult::judged(NAME, violation, 0.0)
        .with_trend(slopes)
        .with_detail("exponent", judged)
        .with_detail("finest_exponent", finest)
        .with_detail("lower", lo)
        .with_detail("upper", hi);
    if let Some(l) = limit {
        r = r.with_detail("extrapolated_exponent", l);
    }
    r
}

/// Ledger checks: mass nonincreasing up to `step_tol`, absorbed totals below
/// `u0_l1 + tol`, ledger identity residual within `rel_tol` of the initial
/// mass.
pub fn check_mass_accounting(
    traj: &Trajectory,
    u0_l1: f64,
    tol: f64,
    step_tol: f64,
    rel_tol: f64,
) -> PropertyResult {
    const NAME: &str = "mass_accounting";
    let rows = &traj.ledger;
    let forced = traj.final_ledger.forcing_injected != 0.0;
    let mut increase: f64 = 0.0;
    let mut loc = None;
    if !forced {
        for w in rows.windows(2) {
            let d = w[1].mass - w[0].mass;
            if d > increase {
                increase = d;
                loc = Some(Location::time(w[1].time));
            }
        }
    }
    let last = traj.final_ledger;
    let over_singular = (last.absorbed_singular - u0_l1).max(0.0);
    let over_source = (last.absorbed_source - u0_l1).max(0.0);
    let scale = last.initial_mass.abs().max(f64::MIN_POSITIVE);
    let rel_residual = rows
        .iter()
        .map(|r| r.residual.abs() / scale)
        .chain(core::iter::once(last.relative_residual()))
        .fold(0.0, f64::max);
    // each part normalized by its own tolerance
    let parts = [
        increase / step_tol,
        over_singular / tol,
        over_source / tol,
        rel_residual / rel_tol,
    ];
    let worst = parts.iter().copied().fold(0.0, f64::max);
    PropertyResult::judged(NAME, worst, 1.0)
        .with_location(loc)
        .with_detail("mass_increase", increase)
        .with_detail("absorbed_singular", last.absorbed_singular)
        .with_detail("absorbed_source", last.absorbed_source)
        .with_detail("u0_l1", u0_l1)
        .with_detail("relative_residual", rel_residual)
        .with_detail("final_mass", last.mass)
        .with_note("violation is the largest part relative to its own tolerance")
}

/// Envelope fit of one smoothing run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingFit {
    pub mass: f64,
    /// `max_{t >= t_min} |u(t)|_inf t^{1/lambda}`.
    pub envelope: f64,
    /// Slope of `log |u(t)|_inf` against `log t` on the slope window.
    pub small_t_slope: f64,
}

pub fn fit_smoothing(
    traj: &Trajectory,
    mass: f64,
    lambda: f64,
    t_min: f64,
    slope_window: (f64, f64),
) -> SmoothingFit {
    let eta = traj.knobs.eta;
    let mut envelope: f64 = 0.0;
    let mut points = Vec::new();
    for (t, u) in traj.sup_history() {
        let u = u - eta;
        if t >= t_min && t > 0.0 {
            envelope = envelope.max(u * libm::pow(t, 1.0 / lambda));
        }
        if t >= slope_window.0 && t <= slope_window.1 && t > 0.0 && u > 0.0 {
            points.push((libm::log(t), libm::log(u)));
        }
    }
    SmoothingFit {
        mass,
        envelope,
        small_t_slope: if points.len() >= 2 { least_squares_slope(&points) } else { 0.0 },
    }
}

/// Envelope ratios between consecutive masses against `(m2/m1)^{p/lambda}`.
pub fn check_smoothing_rescaling(fits: &[SmoothingFit], p: f64, lambda: f64, band: f64) -> PropertyResult {
    const NAME: &str = "smoothing_rescaling";
    if fits.len() < 2 {
        return PropertyResult::inconclusive(NAME, band, "need at least two masses");
    }
    let mut worst: f64 = 0.0;
    let mut trend = Vec::new();
    for w in fits.windows(2) {
        if !(w[0].envelope > 0.0) {
            return PropertyResult::inconclusive(NAME, band, "vanishing envelope");
        }
        let ratio = w[1].envelope / w[0].envelope;
        let expected = libm::pow(w[1].mass / w[0].mass, p / lambda);
        trend.push(ratio);
        worst = worst.max((ratio / expected - 1.0).abs());
    }
    PropertyResult::judged(NAME, worst, band)
        .with_trend(trend)
        .with_detail("expected_per_doubling", libm::pow(2.0, p / lambda))
}

/// Small-time slope at least `-1/lambda - slack`.
pub fn check_smoothing_slope(fits: &[SmoothingFit], lambda: f64, slack: f64) -> PropertyResult {
    const NAME: &str = "smoothing_slope";
    if fits.is_empty() {
        return PropertyResult::inconclusive(NAME, slack, "no runs");
    }
    let slopes: Vec<f64> = fits.iter().map(|f| f.small_t_slope).collect();
    let worst = slopes
        .iter()
        .map(|s| -1.0 / lambda - s)
        .fold(f64::NEG_INFINITY, f64::max);
    PropertyResult::judged(NAME, worst.max(0.0), slack)
        .with_trend(slopes)
        .with_detail("exponent", -1.0 / lambda)
}

/// Stability of the fitted constant `envelope / m^{p/lambda}` across a run
/// family (refinements and rescalings).
pub fn check_smoothing_effect(fits: &[SmoothingFit], p: f64, lambda: f64, band: f64) -> PropertyResult {
    const NAME: &str = "smoothing_constant";
    let cs: Vec<f64> = fits
        .iter()
        .filter(|f| f.mass > 0.0)
        .map(|f| f.envelope / libm::pow(f.mass, p / lambda))
        .collect();
    if fits.iter().all(|f| f.envelope == 0.0) && !fits.is_empty() {
        return PropertyResult::judged(NAME, 0.0, band).with_detail("fitted_constant", 0.0);
    }
    if cs.len() < 2 {
        return PropertyResult::inconclusive(NAME, band, "insufficient run family");
    }
    let hi = cs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = cs.iter().copied().fold(f64::INFINITY, f64::min);
    PropertyResult::judged(NAME, hi / lo - 1.0, band)
        .with_trend(cs)
        .with_detail("fitted_constant", hi)
}

/// Support radius at `probe` stabilizes over the last two radii.
pub fn detect_iss(report: &RadiusReport, probe: usize, threshold: f64) -> PropertyResult {
    const NAME: &str = "iss";
    let radii: Vec<Option<f64>> = report
        .levels
        .iter()
        .map(|l| l.support_at_probes.get(probe).copied().flatten())
        .collect();
    let trend: Vec<f64> = radii.iter().map(|r| r.unwrap_or(0.0)).collect();
    if radii.len() < 2 {
        return PropertyResult::inconclusive(NAME, threshold, "radius sweep too short").with_trend(trend);
    }
    let k = radii.len();
    let (a, b) = (radii[k - 2], radii[k - 1]);
    let t = report.probe_times.get(probe).copied();
    let r = match (a, b) {
        (None, None) => PropertyResult::judged(NAME, 0.0, threshold).with_note("support empty"),
        (Some(a), Some(b)) => {
            let last_radius = report.levels[k - 1].radius;
            if b >= last_radius - 1e-12 {
                PropertyResult::judged(NAME, f64::MAX, threshold)
                    .with_note("support reaches the truncation boundary")
            } else {
                PropertyResult::judged(NAME, (b - a).abs() / a.max(b), threshold)
            }
        }
        _ => PropertyResult::judged(NAME, 1.0, threshold).with_note("support appears at one radius only"),
    };
    r.with_trend(trend).with_location(t.map(Location::time))
}

/// Nodewise `lower <= upper + tol` at matched times on the common window.
/// `lower` may live on a subgrid of `upper` with the same spacing.
pub fn check_ordering(lower: &Trajectory, upper: &Trajectory, tol: f64) -> PropertyResult {
    const NAME: &str = "ordering";
    let offset = libm::round((upper.grid.half_length - lower.grid.half_length) / lower.grid.h) as usize;
    let end = lower.end_time().min(upper.end_time());
    let nodes = lower.grid.nodes();
    let mut worst = 0.0;
    let mut loc = None;
    for snap in lower.snapshots.iter().filter(|s| s.time <= end) {
        let up = upper.values_at(snap.time);
        for (i, v) in snap.values.iter().enumerate() {
            let excess = v - up[i + offset];
            if excess > worst {
                worst = excess;
                loc = Some(Location::at(nodes[i], snap.time));
            }
        }
    }
    PropertyResult::judged(NAME, worst, tol).with_location(loc)
}

/// Comparison problem for instantaneous shrinking: same data and diffusion,
/// no singular absorption, source `r0^{-(beta+q0)} y^{q0}`. For values below
/// `r0` its absorption is weaker, so its solution lies above.
pub fn iss_comparison_spec(spec: &ProblemSpec, r0: f64) -> Result<ProblemSpec> {
    let q0 = spec
        .source()
        .q0()
        .ok_or_else(|| Error::Precondition("the source carries no sublinear exponent q0".into()))?;
    if !(r0 > 0.0) {
        return Err(Error::invalid("r0", "must be > 0"));
    }
    let coef = libm::pow(r0, -(spec.beta() + q0));
    let func = move |s: f64| -> core::result::Result<f64, String> {
        Ok(coef * libm::pow(s.max(0.0), q0))
    };
    let src = SourceTerm::new(
        SourceKind::UserExpression(UserSource::new(
            format!("{coef}*s^{q0}"),
            alloc::sync::Arc::new(func),
        )),
        Hypotheses {
            h1: false,
            h2: true,
            h3: true,
            global_lipschitz: false,
        },
        Some(q0),
        None,
    )?;
    Ok(ProblemSpec::new(spec.p(), spec.beta(), spec.domain(), src, spec.initial().clone())?
        .without_singular_absorption())
}

/// Outcome of running past quench without the nonnegativity floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonexistenceDiagnostic {
    pub quench_time: Option<f64>,
    pub first_negative_time: Option<f64>,
    /// Reaction steps after quench until the first negative nodal value.
    pub steps_after_quench: Option<usize>,
    pub min_value: f64,
    /// Node of the first negative value.
    pub locus: Option<f64>,
}

/// Steps the floored scheme to quench (at most `t_max`), then continues
/// unfloored for up to `max_steps` steps.
pub fn nonexistence_probe(
    spec: &ProblemSpec,
    knobs: RegularizationKnobs,
    grid: Grid,
    cfg: StepConfig,
    t_max: f64,
    max_steps: usize,
) -> Result<NonexistenceDiagnostic> {
    let mut scheme = Scheme::new(spec, knobs, grid, cfg)?;
    let mut state = scheme.init_state();
    let tol = scheme.quench_tol();
    let mut quench = None;
    while state.time < t_max {
        if is_quenched(&state.values, tol) {
            quench = Some(state.time);
            break;
        }
        scheme.advance(&mut state)?;
    }
    if quench.is_none() && is_quenched(&state.values, tol) {
        quench = Some(state.time);
    }
    let mut diag = NonexistenceDiagnostic {
        quench_time: quench,
        first_negative_time: None,
        steps_after_quench: None,
        min_value: state.min_value(),
        locus: None,
    };
    if quench.is_none() {
        return Ok(diag);
    }
    for k in 1..=max_steps {
        scheme.advance_unfloored(&mut state)?;
        let (i, v) = state
            .values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |b, (i, v)| if v < b.1 { (i, v) } else { b });
        diag.min_value = diag.min_value.min(v);
        if v < 0.0 {
            diag.first_negative_time = Some(state.time);
            diag.steps_after_quench = Some(k);
            diag.locus = Some(grid.node(i));
            break;
        }
    }
    Ok(diag)
}

/// Minimum nodal value over all snapshots.
pub fn min_over_run(traj: &Trajectory) -> f64 {
    traj.snapshots
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .fold(f64::INFINITY, f64::min)
}
