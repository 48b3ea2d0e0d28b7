//! Monotone finite-difference scheme for the regularized problem on a uniform
//! grid: implicit p-Laplacian diffusion followed by an implicit pointwise
//! reaction step (Lie splitting), with quench detection, support tracking and
//! a discrete mass ledger.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    diffusivity, eval_psi, eval_psi_prime, g_eps, g_eps_prime, ProblemSpec, RegularizationKnobs,
};
use crate::tridiag;

/// Uniform grid on `[-half_length, half_length]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub half_length: f64,
    pub n_cells: usize,
    pub h: f64,
}

impl Grid {
    pub fn new(half_length: f64, n_cells: usize) -> Result<Self> {
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::invalid(
                "grid.half_length",
                format!("must be finite and > 0, got {half_length}"),
            ));
        }
        if n_cells < 8 {
            return Err(Error::invalid(
                "grid.n_cells",
                format!("need at least 8 cells, got {n_cells}"),
            ));
        }
        Ok(Grid {
            half_length,
            n_cells,
            h: 2.0 * half_length / n_cells as f64,
        })
    }

    /// Grid with (as nearly as possible) spacing `h`; the cell count is
    /// rounded so that the endpoints stay at `+-half_length`.
    pub fn with_spacing(half_length: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid("grid.h", format!("must be > 0, got {h}")));
        }
        let n = libm::round(2.0 * half_length / h) as usize;
        Grid::new(half_length, n)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn node(&self, i: usize) -> f64 {
        // symmetric evaluation keeps x_{n-i} = -x_i exactly
        let n = self.n_cells as f64;
        self.half_length * (2.0 * i as f64 - n) / n
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.node(i)).collect()
    }
}

/// Running mass balance of a trajectory.
///
/// `initial_mass + forcing_injected = mass + absorbed_singular +
/// absorbed_source + boundary_outflux` up to the scalar-solve tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MassLedger {
    pub initial_mass: f64,
    pub mass: f64,
    pub absorbed_singular: f64,
    pub absorbed_source: f64,
    pub boundary_outflux: f64,
    /// Mass added by an external forcing term (manufactured solutions only).
    pub forcing_injected: f64,
}

impl MassLedger {
    pub fn new(initial_mass: f64) -> Self {
        MassLedger {
            initial_mass,
            mass: initial_mass,
            ..MassLedger::default()
        }
    }

    pub fn residual(&self) -> f64 {
        self.initial_mass + self.forcing_injected
            - (self.mass + self.absorbed_singular + self.absorbed_source + self.boundary_outflux)
    }

    /// Residual relative to the initial mass (absolute when that vanishes).
    pub fn relative_residual(&self) -> f64 {
        let scale = self.initial_mass + self.forcing_injected;
        if scale > 0.0 {
            self.residual().abs() / scale
        } else {
            self.residual().abs()
        }
    }
}

/// Trapezoid rule on a uniform grid.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            h * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    pub values: Vec<f64>,
    pub time: f64,
    pub ledger: MassLedger,
}

impl GridState {
    /// State from explicit nodal values; the endpoints are overwritten with
    /// the boundary value.
    pub fn from_values(mut values: Vec<f64>, grid: &Grid, boundary: f64) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::invalid(
                "values",
                format!("expected {} nodal values, got {}", grid.n_nodes(), values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "nodal values must be finite"));
        }
        let last = values.len() - 1;
        values[0] = boundary;
        values[last] = boundary;
        let mass = trapezoid(&values, grid.h);
        Ok(GridState {
            values,
            time: 0.0,
            ledger: MassLedger::new(mass),
        })
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Stepping controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub dt_max: f64,
    /// The step is capped at `dt_courant_factor * h`.
    pub dt_courant_factor: f64,
    /// Absolute tolerance of the scalar reaction solve.
    pub reaction_tol: f64,
    /// Record every `snapshot_stride`-th step (the first and last states are
    /// always recorded).
    pub snapshot_stride: usize,
    /// `None` selects `2 eps + 2 eta + 1e-8`.
    pub quench_tol: Option<f64>,
    /// `None` selects `max(2 (eps + eta), 1e-6)`.
    pub support_tol: Option<f64>,
    pub stop_on_quench: bool,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            dt_max: 1.0e-2,
            dt_courant_factor: 0.5,
            reaction_tol: 1.0e-12,
            snapshot_stride: 1,
            quench_tol: None,
            support_tol: None,
            stop_on_quench: true,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("stepping.dt_max", self.dt_max),
            ("stepping.dt_courant_factor", self.dt_courant_factor),
            ("stepping.reaction_tol", self.reaction_tol),
        ];
        for (name, v) in checks {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if self.snapshot_stride == 0 {
            return Err(Error::invalid("stepping.snapshot_stride", "must be >= 1"));
        }
        for (name, v) in [
            ("stepping.quench_tol", self.quench_tol),
            ("stepping.support_tol", self.support_tol),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn time_step(&self, grid: &Grid) -> f64 {
        self.dt_max.min(self.dt_courant_factor * grid.h)
    }
}

pub fn default_quench_tol(knobs: &RegularizationKnobs) -> f64 {
    2.0 * knobs.epsilon + 2.0 * knobs.eta + 1.0e-8
}

pub fn default_support_tol(knobs: &RegularizationKnobs) -> f64 {
    (2.0 * (knobs.epsilon + knobs.eta)).max(1.0e-6)
}

/// External forcing `F(x, t)` added to the equation's right-hand side.
pub type ForcingFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub time: f64,
    pub mass: f64,
    pub absorbed_singular: f64,
    pub absorbed_source: f64,
    pub boundary_outflux: f64,
    pub residual: f64,
}

impl LedgerRow {
    fn of(time: f64, l: &MassLedger) -> Self {
        LedgerRow {
            time,
            mass: l.mass,
            absorbed_singular: l.absorbed_singular,
            absorbed_source: l.absorbed_source,
            boundary_outflux: l.boundary_outflux,
            residual: l.residual(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportSample {
    pub time: f64,
    /// `[x_left, x_right]`, `None` when nothing exceeds the tolerance.
    pub interval: Option<[f64; 2]>,
}

impl SupportSample {
    /// `max(|x_left|, |x_right|)`, 0 for an empty support.
    pub fn radius(&self) -> f64 {
        self.interval.map_or(0.0, |[a, b]| a.abs().max(b.abs()))
    }
}

/// Output of [`Scheme::run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: Grid,
    pub knobs: RegularizationKnobs,
    /// Nominal step; the last step may be shorter to land on `t_end`.
    pub dt: f64,
    pub quench_tol: f64,
    pub support_tol: f64,
    pub snapshots: Vec<Snapshot>,
    pub ledger: Vec<LedgerRow>,
    pub support: Vec<SupportSample>,
    pub quench_time: Option<f64>,
    pub steps: usize,
    pub final_ledger: MassLedger,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn end_time(&self) -> f64 {
        self.snapshots.last().map_or(0.0, |s| s.time)
    }

    pub fn final_values(&self) -> &[f64] {
        self.snapshots.last().map_or(&[], |s| &s.values)
    }

    /// Field at time `t`, linearly interpolated between snapshots and clamped
    /// to the recorded range.
    pub fn values_at(&self, t: f64) -> Vec<f64> {
        let snaps = &self.snapshots;
        if snaps.is_empty() {
            return Vec::new();
        }
        if t <= snaps[0].time {
            return snaps[0].values.clone();
        }
        let last = snaps.len() - 1;
        if t >= snaps[last].time {
            return snaps[last].values.clone();
        }
        let k = snaps.partition_point(|s| s.time <= t);
        let (a, b) = (&snaps[k - 1], &snaps[k]);
        if a.time == t {
            return a.values.clone();
        }
        let w = (t - a.time) / (b.time - a.time);
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x * (1.0 - w) + y * w)
            .collect()
    }

    /// `max_x u` at every snapshot.
    pub fn sup_history(&self) -> Vec<(f64, f64)> {
        self.snapshots
            .iter()
            .map(|s| (s.time, s.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
            .collect()
    }
}

/// First snapshot time with `max_i u_i <= tol`.
pub fn detect_quench(traj: &Trajectory, tol: f64) -> Option<f64> {
    traj.snapshots
        .iter()
        .find(|s| is_quenched(&s.values, tol))
        .map(|s| s.time)
}

pub fn is_quenched(values: &[f64], tol: f64) -> bool {
    values.iter().all(|v| *v <= tol)
}

/// Smallest node interval containing `{i : u_i > tol}`.
pub fn support_interval(nodes: &[f64], values: &[f64], tol: f64) -> Option<[f64; 2]> {
    let first = values.iter().position(|v| *v > tol)?;
    let last = values.iter().rposition(|v| *v > tol)?;
    Some([nodes[first], nodes[last]])
}

pub fn measure_support(state: &GridState, grid: &Grid, tol: f64) -> Option<[f64; 2]> {
    let first = state.values.iter().position(|v| *v > tol)?;
    let last = state.values.iter().rposition(|v| *v > tol)?;
    Some([grid.node(first), grid.node(last)])
}

/// Face slopes `(u_{i+1} - u_i) / h`.
pub fn sample_gradient(values: &[f64], h: f64) -> Vec<f64> {
    values.windows(2).map(|w| (w[1] - w[0]) / h).collect()
}

/// `phi(s) = (s^2 + lift)^{(p-2)/2} s`, the regularized flux.
#[inline]
pub fn flux(lift: f64, p: f64, s: f64) -> f64 {
    diffusivity(lift, p, s) * s
}

/// `phi'(s) = (s^2 + lift)^{(p-4)/2} ((p-1) s^2 + lift)`.
#[inline]
pub fn flux_prime(lift: f64, p: f64, s: f64) -> f64 {
    let b = s * s + lift;
    if b == 0.0 {
        return 0.0;
    }
    let scale = if p == 3.0 {
        1.0 / libm::sqrt(b)
    } else if p == 4.0 {
        1.0
    } else {
        libm::pow(b, 0.5 * (p - 4.0))
    };
    scale * ((p - 1.0) * s * s + lift)
}

/// Discrete `(phi(u_x))_x` at interior nodes (zero at the endpoints).
pub fn flux_divergence(values: &[f64], h: f64, lift: f64, p: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    for i in 1..n.saturating_sub(1) {
        let right = flux(lift, p, (values[i + 1] - values[i]) / h);
        let left = flux(lift, p, (values[i] - values[i - 1]) / h);
        out[i] = (right - left) / h;
    }
    out
}

const MAX_NEWTON: usize = 60;
const MAX_HALVINGS: u32 = 12;
const SCAN_PER_OCTAVE: f64 = 8.0;

/// Stepper for one problem on one grid. Holds scratch buffers, so a single
/// instance is used sequentially; distinct instances are independent.
#[derive(Clone)]
pub struct Scheme {
    spec: ProblemSpec,
    knobs: RegularizationKnobs,
    grid: Grid,
    cfg: StepConfig,
    lift: f64,
    boundary: f64,
    dt: f64,
    forcing: Option<Arc<ForcingFn>>,
    work: Work,
}

#[derive(Clone, Default)]
struct Work {
    old: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
    base: Vec<f64>,
    trial: Vec<f64>,
    faces: Vec<f64>,
    face_slopes: Vec<f64>,
}

impl core::fmt::Debug for Scheme {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Scheme")
            .field("knobs", &self.knobs)
            .field("grid", &self.grid)
            .field("cfg", &self.cfg)
            .field("dt", &self.dt)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Copy)]
struct ReactionOutcome {
    value: f64,
    singular: f64,
    source: f64,
}

impl Scheme {
    pub fn new(
        spec: &ProblemSpec,
        knobs: RegularizationKnobs,
        grid: Grid,
        cfg: StepConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let consts = spec.constants();
        // re-validate in case the knobs were assembled field by field
        RegularizationKnobs::new(knobs.epsilon, knobs.eta, knobs.alpha, &consts)?;
        if (grid.half_length - spec.domain().half_length()).abs()
            > 1e-12 * spec.domain().half_length()
        {
            return Err(Error::invalid(
                "grid.half_length",
                format!(
                    "grid covers [-{}, {}] but the domain half-length is {}",
                    grid.half_length,
                    grid.half_length,
                    spec.domain().half_length()
                ),
            ));
        }
        let n = grid.n_nodes();
        let work = Work {
            old: vec![0.0; n],
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
            scratch: vec![0.0; n],
            base: vec![0.0; n],
            trial: vec![0.0; n],
            faces: vec![0.0; n],
            face_slopes: vec![0.0; n],
        };
        Ok(Scheme {
            spec: spec.clone(),
            knobs,
            grid,
            cfg,
            lift: knobs.diffusivity_lift(),
            boundary: knobs.eta,
            dt: cfg.time_step(&grid),
            forcing: None,
            work,
        })
    }

    /// Adds `F(x, t)` to the equation (evaluated at the new time level).
    pub fn with_forcing(mut self, forcing: Arc<ForcingFn>) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn knobs(&self) -> &RegularizationKnobs {
        &self.knobs
    }

    pub fn config(&self) -> &StepConfig {
        &self.cfg
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn quench_tol(&self) -> f64 {
        self.cfg
            .quench_tol
            .unwrap_or_else(|| default_quench_tol(&self.knobs))
    }

    pub fn support_tol(&self) -> f64 {
        self.cfg
            .support_tol
            .unwrap_or_else(|| default_support_tol(&self.knobs))
    }

    /// Sampled `u0 + eta` with the endpoints at `eta`.
    pub fn init_state(&self) -> GridState {
        let values = (0..self.grid.n_nodes())
            .map(|i| self.spec.u0(self.grid.node(i)) + self.boundary)
            .collect();
        GridState::from_values(values, &self.grid, self.boundary)
            .expect("sampled initial data has the grid's length")
    }

    /// State from explicit nodal values (endpoints forced to `eta`).
    pub fn state_from(&self, values: Vec<f64>) -> Result<GridState> {
        GridState::from_values(values, &self.grid, self.boundary)
    }

    /// One step of the nominal size.
    pub fn advance(&mut self, state: &mut GridState) -> Result<()> {
        let dt = self.dt;
        self.step(state, dt)
    }

    /// One step of size `dt`; a diffusion solve that fails is retried as two
    /// half steps.
    pub fn step(&mut self, state: &mut GridState, dt: f64) -> Result<()> {
        self.step_inner(state, dt, 0, false)
    }

    /// One step without the nonnegativity structure: the source acts without
    /// the cutoff and values may go negative.
    pub fn advance_unfloored(&mut self, state: &mut GridState) -> Result<()> {
        let dt = self.dt;
        self.step_inner(state, dt, 0, true)
    }

    fn step_inner(
        &mut self,
        state: &mut GridState,
        dt: f64,
        depth: u32,
        unfloored: bool,
    ) -> Result<()> {
        let t_new = state.time + dt;
        self.work.old.copy_from_slice(&state.values);
        match self.diffuse(&mut state.values, dt, t_new) {
            Ok((outflux, injected)) => {
                let h = self.grid.h;
                let n = state.values.len();
                let mut singular = 0.0;
                let mut source = 0.0;
                for i in 1..n - 1 {
                    let out = if unfloored {
                        self.react_unfloored(state.values[i], dt, i)?
                    } else {
                        self.react(state.values[i], dt, i)?
                    };
                    let v = if unfloored {
                        out.value
                    } else {
                        out.value.max(self.boundary)
                    };
                    state.values[i] = v;
                    singular += out.singular;
                    source += out.source;
                }
                let l = &mut state.ledger;
                l.absorbed_singular += h * dt * singular;
                l.absorbed_source += h * dt * source;
                l.boundary_outflux += outflux;
                l.forcing_injected += injected;
                l.mass = trapezoid(&state.values, h);
                state.time = t_new;
                Ok(())
            }
            Err(err @ Error::DiffusionNonConvergence { .. }) | Err(err @ Error::ZeroPivot { .. }) => {
                state.values.copy_from_slice(&self.work.old);
                if depth >= MAX_HALVINGS {
                    return Err(err);
                }
                let half = 0.5 * dt;
                self.step_inner(state, half, depth + 1, unfloored)?;
                self.step_inner(state, dt - half, depth + 1, unfloored)
            }
            Err(e) => Err(e),
        }
    }

    /// Implicit diffusion: solves `u - (dt/h) (phi(s_{i+1/2}) - phi(s_{i-1/2}))
    /// = u^k + dt F` for the interior nodes. A frozen-coefficient linear step
    /// gives the initial guess, Newton with backtracking solves the nonlinear
    /// system. Returns the boundary outflux and injected forcing mass.
    fn diffuse(&mut self, u: &mut [f64], dt: f64, t_new: f64) -> Result<(f64, f64)> {
        let n = u.len();
        let m = n - 1;
        let h = self.grid.h;
        let k = dt / (h * h);
        let (lift, p) = (self.lift, self.spec.p());
        let w = &mut self.work;

        let mut injected = 0.0;
        for i in 0..n {
            w.base[i] = w.old[i];
        }
        if let Some(force) = &self.forcing {
            for i in 1..m {
                let f = force(self.grid.node(i), t_new);
                w.base[i] += dt * f;
                injected += h * dt * f;
            }
        }

        let scale = {
            let mut s: f64 = 1.0;
            for i in 1..m {
                s = s.max(w.base[i].abs());
            }
            for j in 0..m {
                let sl = (u[j + 1] - u[j]) / h;
                s = s.max(dt / h * flux(lift, p, sl).abs());
            }
            s
        };
        let tol = 64.0 * f64::EPSILON * scale;
        let accept = 1.0e-10 * scale;

        let mut res = residual(u, &w.base, h, dt, lift, p, &mut w.face_slopes, &mut w.rhs);
        if res > tol {
            // frozen-coefficient predictor
            for j in 0..m {
                w.faces[j] = diffusivity(lift, p, w.face_slopes[j]);
            }
            for i in 1..m {
                let a_l = w.faces[i - 1];
                let a_r = w.faces[i];
                w.lower[i] = if i > 1 { -k * a_l } else { 0.0 };
                w.upper[i] = if i + 1 < m { -k * a_r } else { 0.0 };
                w.diag[i] = 1.0 + k * (a_l + a_r);
                w.rhs[i] = w.base[i];
            }
            w.rhs[1] += k * w.faces[0] * u[0];
            w.rhs[m - 1] += k * w.faces[m - 1] * u[m];
            tridiag::solve_in_place(
                &w.lower[1..m],
                &w.diag[1..m],
                &w.upper[1..m],
                &mut w.rhs[1..m],
                &mut w.scratch[1..m],
            )?;
            u[1..m].copy_from_slice(&w.rhs[1..m]);
            res = residual(u, &w.base, h, dt, lift, p, &mut w.face_slopes, &mut w.rhs);
        }

        // Newton on the fully implicit system
        let mut iter = 0;
        while res > tol {
            if iter >= MAX_NEWTON {
                if res <= accept {
                    break;
                }
                return Err(Error::DiffusionNonConvergence {
                    time: t_new,
                    residual: res,
                });
            }
            iter += 1;
            // Jacobian at the current iterate; rhs already holds R
            for j in 0..m {
                w.faces[j] = flux_prime(lift, p, w.face_slopes[j]);
            }
            for i in 1..m {
                let (dl, dr) = (w.faces[i - 1], w.faces[i]);
                w.lower[i] = if i > 1 { -k * dl } else { 0.0 };
                w.upper[i] = if i + 1 < m { -k * dr } else { 0.0 };
                w.diag[i] = 1.0 + k * (dl + dr);
                w.rhs[i] = -w.rhs[i];
            }
            tridiag::solve_in_place(
                &w.lower[1..m],
                &w.diag[1..m],
                &w.upper[1..m],
                &mut w.rhs[1..m],
                &mut w.scratch[1..m],
            )?;
            let mut lambda = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                w.trial.copy_from_slice(u);
                for ((t, ui), r) in w.trial[1..m].iter_mut().zip(&u[1..m]).zip(&w.rhs[1..m]) {
                    *t = ui + lambda * r;
                }
                let r_new = residual_norm(&w.trial, &w.base, h, dt, lift, p);
                if r_new < res {
                    improved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !improved {
                if res <= accept {
                    break;
                }
                return Err(Error::DiffusionNonConvergence {
                    time: t_new,
                    residual: res,
                });
            }
            u[1..m].copy_from_slice(&w.trial[1..m]);
            res = residual(u, &w.base, h, dt, lift, p, &mut w.face_slopes, &mut w.rhs);
        }
        let left = flux(lift, p, (u[1] - u[0]) / h);
        let right = flux(lift, p, (u[m] - u[m - 1]) / h);
        Ok((dt * (left - right), injected))
    }

    fn rates(&self, v: f64) -> Result<(f64, f64)> {
        let eps = self.knobs.epsilon;
        let gs = if self.spec.singular_absorption() {
            g_eps(eps, self.spec.beta(), v)
        } else {
            0.0
        };
        let src = self.spec.source();
        let fs = if src.is_zero() {
            0.0
        } else {
            let w = eval_psi(v / eps);
            if w == 0.0 {
                0.0
            } else {
                src.eval(v)? * w
            }
        };
        Ok((gs, fs))
    }

    fn rate_prime(&self, v: f64) -> Result<f64> {
        let eps = self.knobs.epsilon;
        let mut d = if self.spec.singular_absorption() {
            g_eps_prime(eps, self.spec.beta(), v)
        } else {
            0.0
        };
        let src = self.spec.source();
        if !src.is_zero() {
            let w = eval_psi(v / eps);
            if w > 0.0 {
                d += src.eval_prime(v)? * w;
                let dw = eval_psi_prime(v / eps) / eps;
                if dw != 0.0 {
                    d += src.eval(v)? * dw;
                }
            }
        }
        Ok(d)
    }

    /// Largest root of `v + dt (g_eps(v) + f(v) psi_eps(v)) = c`. The largest
    /// root is nondecreasing in `c` and nonincreasing in the rate, which keeps
    /// the step monotone.
    fn react(&self, c: f64, dt: f64, node: usize) -> Result<ReactionOutcome> {
        let eps = self.knobs.epsilon;
        let unchanged = ReactionOutcome {
            value: c,
            singular: 0.0,
            source: 0.0,
        };
        if c <= eps {
            return Ok(unchanged);
        }
        let (g0, f0) = self.rates(c)?;
        let r0 = g0 + f0;
        if r0 == 0.0 {
            return Ok(unchanged);
        }
        let excess = |v: f64| -> Result<f64> {
            let (g, f) = self.rates(v)?;
            Ok(v + dt * (g + f) - c)
        };
        let tol = self.cfg.reaction_tol;
        let v = if r0 < 0.0 {
            // a negative source pushes the root above c
            let mut step = 2.0 * dt * (-r0);
            let mut hi = c + step;
            let mut tries = 0;
            while excess(hi)? < 0.0 {
                step *= 2.0;
                hi = c + step;
                tries += 1;
                if tries > 200 {
                    return Err(Error::ReactionNonConvergence {
                        node,
                        residual: excess(hi)?,
                    });
                }
            }
            bracketed_root(&excess, c, hi, tol)?
        } else {
            let beta = self.spec.beta();
            let v_safe = if self.spec.source().is_nondecreasing() {
                if self.spec.singular_absorption() {
                    (2.0 * eps).max(libm::pow(2.0 * dt * beta, 1.0 / (1.0 + beta)))
                } else {
                    eps
                }
            } else {
                c
            };
            if v_safe < c && excess(v_safe)? <= 0.0 {
                // unique root, the map is increasing on [v_safe, c]
                self.safeguarded_newton(&excess, dt, v_safe, c, tol)?
            } else {
                let top = v_safe.min(c);
                let mut hi = top;
                let mut k = libm::floor(SCAN_PER_OCTAVE * libm::log2(top / eps)) as i64;
                loop {
                    let v = if k <= 0 {
                        eps
                    } else {
                        eps * libm::exp2(k as f64 / SCAN_PER_OCTAVE)
                    };
                    if v < hi {
                        if excess(v)? <= 0.0 {
                            break bracketed_root(&excess, v, hi, tol)?;
                        }
                        hi = v;
                    }
                    if k <= 0 {
                        // unreachable: excess(eps) = eps - c < 0
                        return Err(Error::ReactionNonConvergence {
                            node,
                            residual: excess(eps)?,
                        });
                    }
                    k -= 1;
                }
            }
        };
        let (g, f) = self.rates(v)?;
        Ok(ReactionOutcome {
            value: v,
            singular: g,
            source: f,
        })
    }

    fn safeguarded_newton<F>(&self, excess: &F, dt: f64, lo: f64, hi: f64, tol: f64) -> Result<f64>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let (mut a, mut b) = (lo, hi);
        let mut x = hi;
        let mut fx = excess(x)?;
        for _ in 0..200 {
            if fx == 0.0 {
                return Ok(x);
            }
            if fx > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let d = 1.0 + dt * self.rate_prime(x)?;
            let mut next = if d > 0.0 { x - fx / d } else { f64::NAN };
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            let dx = (next - x).abs();
            x = next;
            fx = excess(x)?;
            if dx <= tol || b - a <= tol {
                return Ok(x);
            }
        }
        Ok(x)
    }

    fn react_unfloored(&self, c: f64, dt: f64, node: usize) -> Result<ReactionOutcome> {
        let eps = self.knobs.epsilon;
        let beta = self.spec.beta();
        let singular = self.spec.singular_absorption();
        let src = self.spec.source();
        let rates = |v: f64| -> Result<(f64, f64)> {
            let g = if singular { g_eps(eps, beta, v) } else { 0.0 };
            Ok((g, src.eval(v)?))
        };
        let excess = |v: f64| -> Result<f64> {
            let (g, f) = rates(v)?;
            Ok(v + dt * (g + f) - c)
        };
        let (g0, f0) = rates(c)?;
        let r0 = g0 + f0;
        if r0 == 0.0 {
            return Ok(ReactionOutcome {
                value: c,
                singular: 0.0,
                source: 0.0,
            });
        }
        let mut spread = 2.0 * dt * r0.abs();
        let (lo, hi) = if r0 > 0.0 {
            let mut lo = c - spread;
            let mut tries = 0;
            while excess(lo)? > 0.0 {
                spread *= 2.0;
                lo = c - spread;
                tries += 1;
                if tries > 200 {
                    return Err(Error::ReactionNonConvergence {
                        node,
                        residual: excess(lo)?,
                    });
                }
            }
            (lo, c)
        } else {
            let mut hi = c + spread;
            let mut tries = 0;
            while excess(hi)? < 0.0 {
                spread *= 2.0;
                hi = c + spread;
                tries += 1;
                if tries > 200 {
                    return Err(Error::ReactionNonConvergence {
                        node,
                        residual: excess(hi)?,
                    });
                }
            }
            (c, hi)
        };
        let v = bracketed_root(&excess, lo, hi, self.cfg.reaction_tol)?;
        let (g, f) = rates(v)?;
        Ok(ReactionOutcome {
            value: v,
            singular: g,
            source: f,
        })
    }

    /// Steps until `t_end`, recording snapshots, the ledger and the support.
    /// Stops at the first quench when `stop_on_quench` is set.
    pub fn run(&mut self, state: &mut GridState, t_end: f64) -> Result<Trajectory> {
        if !(t_end >= state.time) {
            return Err(Error::invalid(
                "t_end",
                format!("t_end = {t_end} precedes the state time {}", state.time),
            ));
        }
        let quench_tol = self.quench_tol();
        let support_tol = self.support_tol();
        let nodes = self.grid.nodes();
        let mut traj = Trajectory {
            grid: self.grid,
            knobs: self.knobs,
            dt: self.dt,
            quench_tol,
            support_tol,
            snapshots: Vec::new(),
            ledger: Vec::new(),
            support: Vec::new(),
            quench_time: None,
            steps: 0,
            final_ledger: state.ledger,
        };
        let record = |traj: &mut Trajectory, state: &GridState| {
            traj.snapshots.push(Snapshot {
                time: state.time,
                values: state.values.clone(),
            });
            traj.ledger.push(LedgerRow::of(state.time, &state.ledger));
            traj.support.push(SupportSample {
                time: state.time,
                interval: support_interval(&nodes, &state.values, support_tol),
            });
        };
        record(&mut traj, state);
        if is_quenched(&state.values, quench_tol) {
            traj.quench_time = Some(state.time);
        }
        let mut steps = 0usize;
        let mut recorded_last = true;
        while !(traj.quench_time.is_some() && self.cfg.stop_on_quench) {
            let remaining = t_end - state.time;
            if remaining <= 1e-12 * t_end.abs().max(1e-300) {
                break;
            }
            let mut dt = self.dt;
            if remaining - dt <= 1e-9 * dt {
                dt = remaining;
            }
            self.step(state, dt)?;
            steps += 1;
            let quenched_now = traj.quench_time.is_none() && is_quenched(&state.values, quench_tol);
            if quenched_now {
                traj.quench_time = Some(state.time);
            }
            recorded_last = false;
            if steps.is_multiple_of(self.cfg.snapshot_stride) || quenched_now {
                record(&mut traj, state);
                recorded_last = true;
            }
        }
        if !recorded_last {
            record(&mut traj, state);
        }
        traj.steps = steps;
        traj.final_ledger = state.ledger;
        Ok(traj)
    }
}

/// `R(u)` into `out` (interior entries), face slopes into `slopes`; returns
/// `max |R_i|`.
#[allow(clippy::too_many_arguments)]
fn residual(
    u: &[f64],
    base: &[f64],
    h: f64,
    dt: f64,
    lift: f64,
    p: f64,
    slopes: &mut [f64],
    out: &mut [f64],
) -> f64 {
    let m = u.len() - 1;
    for j in 0..m {
        slopes[j] = (u[j + 1] - u[j]) / h;
    }
    let c = dt / h;
    let mut worst: f64 = 0.0;
    let mut left = flux(lift, p, slopes[0]);
    for i in 1..m {
        let right = flux(lift, p, slopes[i]);
        let r = u[i] - base[i] - c * (right - left);
        out[i] = r;
        worst = worst.max(r.abs());
        left = right;
    }
    worst
}

fn residual_norm(u: &[f64], base: &[f64], h: f64, dt: f64, lift: f64, p: f64) -> f64 {
    let m = u.len() - 1;
    let c = dt / h;
    let mut worst: f64 = 0.0;
    let mut left = flux(lift, p, (u[1] - u[0]) / h);
    for i in 1..m {
        let right = flux(lift, p, (u[i + 1] - u[i]) / h);
        let r = u[i] - base[i] - c * (right - left);
        worst = worst.max(r.abs());
        left = right;
    }
    worst
}

/// Root of `f` in `[lo, hi]` with `f(lo) <= 0 < f(hi)`: Illinois-modified
/// regula falsi with a bisection step whenever the bracket fails to halve.
fn bracketed_root<F>(f: &F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;
    let mut side = 0i8;
    for _ in 0..200 {
        let width = hi - lo;
        if width <= tol {
            break;
        }
        let mut x = if f_hi != f_lo {
            hi - f_hi * width / (f_hi - f_lo)
        } else {
            0.5 * (lo + hi)
        };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
        if hi - lo > 0.5 * width {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid)?;
            if fm <= 0.0 {
                lo = mid;
                f_lo = fm;
            } else {
                hi = mid;
                f_hi = fm;
            }
            side = 0;
        }
    }
    let (a, b) = (f(lo)?, f(hi)?);
    Ok(if b.abs() < a.abs() { hi } else { lo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derived_constants, Domain, InitialData, SourceTerm};
    use proptest::prelude::*;

    fn spec(initial: InitialData, src: SourceTerm) -> ProblemSpec {
        ProblemSpec::new(3.0, 0.5, Domain::Dirichlet { half_length: 1.0 }, src, initial).unwrap()
    }

    fn knobs(eps: f64, eta: f64) -> RegularizationKnobs {
        RegularizationKnobs::with_default_alpha(eps, eta, &derived_constants(3.0, 0.5)).unwrap()
    }

    #[test]
    fn grid_nodes_are_symmetric() {
        let g = Grid::new(1.0, 10).unwrap();
        assert_eq!(g.h, 0.2);
        assert_eq!(g.node(0), -1.0);
        assert_eq!(g.node(10), 1.0);
        assert_eq!(g.node(5), 0.0);
        for i in 0..=10 {
            assert_eq!(g.node(i), -g.node(10 - i));
        }
        assert!(Grid::new(1.0, 7).is_err());
        assert_eq!(Grid::with_spacing(4.0, 0.01).unwrap().n_cells, 800);
    }

    #[test]
    fn init_state_examples() {
        let s = spec(InitialData::Constant { level: 0.0 }, SourceTerm::zero());
        let g = Grid::new(1.0, 100).unwrap();
        let sch = Scheme::new(&s, knobs(0.1, 0.01), g, StepConfig::default()).unwrap();
        let st = sch.init_state();
        assert!(st.values.iter().all(|v| (*v - 0.01).abs() < 1e-18));
        assert!((st.ledger.initial_mass - 0.02).abs() < 1e-15);

        let b = ProblemSpec::new(
            3.0,
            0.5,
            Domain::CauchyTruncated { radius: 4.0 },
            SourceTerm::zero(),
            InitialData::Bump {
                radius: 1.0,
                peak: 1.0,
            },
        )
        .unwrap();
        let g = Grid::new(4.0, 80).unwrap();
        let sch = Scheme::new(&b, knobs(0.1, 0.0), g, StepConfig::default()).unwrap();
        let st = sch.init_state();
        for (i, v) in st.values.iter().enumerate() {
            assert_eq!(*v, b.u0(g.node(i)));
        }
    }

    #[test]
    fn grid_must_match_domain() {
        let s = spec(InitialData::Cosine { peak: 1.0 }, SourceTerm::zero());
        let g = Grid::new(2.0, 100).unwrap();
        assert!(Scheme::new(&s, knobs(0.1, 0.01), g, StepConfig::default()).is_err());
    }

    #[test]
    fn floor_state_is_a_fixed_point() {
        let s = spec(InitialData::Constant { level: 0.0 }, SourceTerm::zero());
        let g = Grid::new(1.0, 50).unwrap();
        let mut sch = Scheme::new(&s, knobs(0.1, 0.01), g, StepConfig::default()).unwrap();
        let mut st = sch.init_state();
        for _ in 0..10 {
            sch.advance(&mut st).unwrap();
        }
        assert!(st.values.iter().all(|v| *v == 0.01));
    }

    #[test]
    fn linear_profile_has_zero_interior_divergence() {
        // u = (x + l) / 2l: constant slope, so every interior flux difference
        // vanishes; on u = x^2 the p = 3 stencil gives
        // (|s_r| s_r - |s_l| s_l) / h by hand
        let g = Grid::new(1.0, 20).unwrap();
        let lin: Vec<f64> = g.nodes().iter().map(|x| (x + 1.0) / 2.0).collect();
        let div = flux_divergence(&lin, g.h, 0.0, 3.0);
        assert!(div.iter().all(|d| d.abs() < 1e-12));
        let quad: Vec<f64> = g.nodes().iter().map(|x| x * x).collect();
        let div = flux_divergence(&quad, g.h, 0.0, 3.0);
        for (i, d) in div.iter().enumerate().take(20).skip(1) {
            let x = g.node(i);
            let sr = 2.0 * x + g.h;
            let sl = 2.0 * x - g.h;
            let hand = (sr.abs() * sr - sl.abs() * sl) / g.h;
            assert!((d - hand).abs() < 1e-10, "i={i}");
        }
    }

    #[test]
    fn flux_prime_matches_difference() {
        for &(lift, p) in &[(0.0, 3.0), (1e-3, 3.0), (1e-3, 4.0), (1e-2, 5.5), (0.0, 2.5)] {
            for &s in &[-2.0, -0.3, 0.01, 0.7, 3.0] {
                let d = 1e-6;
                let fd = (flux(lift, p, s + d) - flux(lift, p, s - d)) / (2.0 * d);
                let an = flux_prime(lift, p, s);
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{lift} {p} {s}");
            }
        }
        assert_eq!(flux_prime(0.0, 3.0, 0.0), 0.0);
    }

    #[test]
    fn implicit_step_solves_nonlinear_system() {
        let s = spec(InitialData::Cosine { peak: 1.0 }, SourceTerm::zero());
        let g = Grid::new(1.0, 64).unwrap();
        let k = knobs(0.01, 1e-5);
        let mut sch = Scheme::new(&s, k, g, StepConfig::default()).unwrap();
        let mut st = sch.init_state();
        let before = st.values.clone();
        sch.work.old.copy_from_slice(&st.values);
        let dt = sch.dt();
        sch.diffuse(&mut st.values, dt, dt).unwrap();
        let div = flux_divergence(&st.values, g.h, k.diffusivity_lift(), 3.0);
        for i in 1..64 {
            let r = st.values[i] - before[i] - dt * div[i];
            assert!(r.abs() < 1e-13, "i={i} r={r}");
        }
    }

    #[test]
    fn support_interval_example() {
        let nodes = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        let u = [0.0, 0.0, 0.2, 0.5, 0.1, 0.0, 0.0];
        assert_eq!(support_interval(&nodes, &u, 0.05), Some([-1.0, 1.0]));
        assert_eq!(support_interval(&nodes, &u, 0.6), None);
    }

    #[test]
    fn bump_support_at_start() {
        let b = ProblemSpec::new(
            3.0,
            0.5,
            Domain::CauchyTruncated { radius: 4.0 },
            SourceTerm::zero(),
            InitialData::Bump {
                radius: 1.0,
                peak: 1.0,
            },
        )
        .unwrap();
        let g = Grid::new(4.0, 400).unwrap();
        let sch = Scheme::new(&b, knobs(1e-3, 1e-6), g, StepConfig::default()).unwrap();
        let st = sch.init_state();
        let [a, c] = measure_support(&st, &g, sch.support_tol()).unwrap();
        assert!(a >= -1.0 - g.h && c <= 1.0 + g.h);
    }

    #[test]
    fn sample_gradient_examples() {
        assert!(sample_gradient(&[0.3; 6], 0.1).iter().all(|s| *s == 0.0));
        let lin: Vec<f64> = (0..6).map(|i| 0.25 * i as f64 * 0.1).collect();
        assert!(sample_gradient(&lin, 0.1)
            .iter()
            .all(|s| (s - 0.25).abs() < 1e-14));
    }

    #[test]
    fn barrier_slopes_are_first_order_accurate() {
        let c = derived_constants(3.0, 0.5);
        let g = Grid::new(1.0, 800).unwrap();
        let vals: Vec<f64> = g
            .nodes()
            .iter()
            .map(|x| crate::analytic::stationary_barrier(1.0, &c, x.abs()))
            .collect();
        let slopes = sample_gradient(&vals, g.h);
        let edge = 1.0 / c.sigma;
        for (j, s) in slopes.iter().enumerate() {
            let mid = 0.5 * (g.node(j) + g.node(j + 1));
            if mid > 0.05 && mid < edge - 0.05 {
                let exact = crate::analytic::stationary_barrier_slope(1.0, &c, mid);
                assert!((s - exact).abs() < 10.0 * g.h, "{mid}");
            }
        }
    }

    #[test]
    fn quench_detection() {
        let s = spec(InitialData::Constant { level: 0.0 }, SourceTerm::zero());
        let g = Grid::new(1.0, 16).unwrap();
        let mut sch = Scheme::new(&s, knobs(0.1, 0.0), g, StepConfig::default()).unwrap();
        let mut st = sch.init_state();
        let traj = sch.run(&mut st, 0.0).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(detect_quench(&traj, 1e-8), Some(0.0));
        assert_eq!(traj.quench_time, Some(0.0));
        assert_eq!(detect_quench(&traj, -1.0), None);
    }

    #[test]
    fn canonical_run_quenches_before_bound() {
        let s = spec(InitialData::Cosine { peak: 1.0 }, SourceTerm::zero());
        let g = Grid::new(1.0, 200).unwrap();
        let k = knobs(0.01, 1e-5);
        let mut sch = Scheme::new(&s, k, g, StepConfig::default()).unwrap();
        let mut st = sch.init_state();
        let traj = sch.run(&mut st, 1.0).unwrap();
        let tq = traj.quench_time.unwrap();
        assert!(tq <= 2.0 / 3.0 + traj.dt, "{tq}");
        assert!(tq > 0.3);
        for row in &traj.ledger {
            assert!(row.residual.abs() < 1e-10);
        }
    }

    #[test]
    fn constant_data_center_follows_extinction_ode() {
        // far from the boundary layers the center node sees u' = -u^{-beta}
        let s = ProblemSpec::new(
            3.0,
            0.5,
            Domain::Dirichlet { half_length: 4.0 },
            SourceTerm::zero(),
            InitialData::Constant { level: 1.0 },
        )
        .unwrap();
        let g = Grid::new(4.0, 1600).unwrap();
        let k = knobs(1e-3, 1e-6);
        let cfg = StepConfig {
            dt_max: 1e-3,
            ..StepConfig::default()
        };
        let mut sch = Scheme::new(&s, k, g, cfg).unwrap();
        let mut st = sch.init_state();
        let traj = sch.run(&mut st, 1.0).unwrap();
        let tq = traj.quench_time.unwrap();
        assert!(tq <= 2.0 / 3.0 + traj.dt);
        assert!(tq > 2.0 / 3.0 - 0.01, "{tq}");
        let mid = traj.values_at(0.4)[800];
        let exact = crate::analytic::extinction_profile(1.0, 0.5, 0.4);
        assert!(mid <= exact + 1e-6 && mid > exact - 1e-3, "{mid} {exact}");
    }

    #[test]
    fn t_end_before_state_is_rejected() {
        let s = spec(InitialData::Cosine { peak: 1.0 }, SourceTerm::zero());
        let g = Grid::new(1.0, 16).unwrap();
        let mut sch = Scheme::new(&s, knobs(0.1, 0.01), g, StepConfig::default()).unwrap();
        let mut st = sch.init_state();
        st.time = 1.0;
        assert!(sch.run(&mut st, 0.5).is_err());
    }

    #[test]
    fn reaction_root_is_largest_and_monotone() {
        let s = spec(
            InitialData::Cosine { peak: 1.0 },
            SourceTerm::power(1.0).unwrap(),
        );
        let g = Grid::new(1.0, 16).unwrap();
        let sch = Scheme::new(&s, knobs(0.05, 1e-4), g, StepConfig::default()).unwrap();
        let dt = 0.05;
        let mut prev = f64::NEG_INFINITY;
        for k in 0..400 {
            let c = 0.01 + k as f64 * 0.0025;
            let out = sch.react(c, dt, 1).unwrap();
            assert!(out.value <= c);
            assert!(out.value >= prev, "c={c}");
            prev = out.value;
            if out.value > 0.05 {
                let (gg, ff) = sch.rates(out.value).unwrap();
                assert!((out.value + dt * (gg + ff) - c).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn unfloored_constant_source_goes_negative() {
        let src = SourceTerm::violating_origin(crate::model::SourceKind::Constant { c: 0.1 }).unwrap();
        let s = spec(InitialData::Constant { level: 0.0 }, src);
        let g = Grid::new(1.0, 16).unwrap();
        let mut sch = Scheme::new(&s, knobs(0.01, 0.0), g, StepConfig::default()).unwrap();
        let mut st = sch.init_state();
        sch.advance_unfloored(&mut st).unwrap();
        assert!(st.values[8] < 0.0);
        assert!((st.values[8] + 0.1 * sch.dt()).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn one_step_preserves_order(
            base in proptest::collection::vec(0.0f64..1.0, 33),
            bump in proptest::collection::vec(0.0f64..0.3, 33),
            q in 0.5f64..2.0,
        ) {
            let s = spec(InitialData::Cosine { peak: 1.0 }, SourceTerm::power(q).unwrap());
            let g = Grid::new(1.0, 32).unwrap();
            let k = knobs(0.02, 1e-4);
            let mut sch = Scheme::new(&s, k, g, StepConfig::default()).unwrap();
            let lo: Vec<f64> = base.iter().map(|v| v + k.eta).collect();
            let hi: Vec<f64> = lo.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let mut a = sch.state_from(lo).unwrap();
            let mut b = sch.state_from(hi).unwrap();
            for _ in 0..5 {
                sch.advance(&mut a).unwrap();
                sch.advance(&mut b).unwrap();
            }
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!(*x <= *y + 1e-12);
            }
        }

        #[test]
        fn max_principle_and_ledger(peak in 0.1f64..3.0, eps in 0.005f64..0.1) {
            let s = spec(InitialData::Cosine { peak }, SourceTerm::exp_minus_one());
            let g = Grid::new(1.0, 40).unwrap();
            let k = knobs(eps, eps * 1e-2);
            let mut sch = Scheme::new(&s, k, g, StepConfig::default()).unwrap();
            let mut st = sch.init_state();
            let top = st.max_value();
            for _ in 0..20 {
                sch.advance(&mut st).unwrap();
                prop_assert!(st.max_value() <= top + 1e-12);
                prop_assert!(st.min_value() >= k.eta);
                prop_assert!(st.ledger.relative_residual() < 1e-10);
            }
        }
    }
}
