//! Closed-form quantities: extinction profiles, the stationary barrier,
//! quenching-time bounds, the support radius, gradient-estimate brackets and
//! the L^1 -> L^inf smoothing envelope.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{g_eps, DerivedConstants, ProblemSpec, RegularizationKnobs, SourceTerm};

/// Constants the estimates leave implicit. Only their functional role is
/// fixed; the values are user inputs or fitted from runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConstants {
    /// Prefactor of the smoothing bound `C t^{-1/lambda} m^{p/lambda}`.
    pub c_smoothing: f64,
    /// Prefactor inside `m_f` of the L^1 gradient bracket.
    pub c2_mf: f64,
}

impl Default for CalibrationConstants {
    fn default() -> Self {
        CalibrationConstants {
            c_smoothing: 1.0,
            c2_mf: 1.0,
        }
    }
}

impl CalibrationConstants {
    pub fn new(c_smoothing: f64, c2_mf: f64) -> Result<Self> {
        for (name, v) in [
            ("calibration.c_smoothing", c_smoothing),
            ("calibration.c2_mf", c2_mf),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(CalibrationConstants {
            c_smoothing,
            c2_mf,
        })
    }
}

/// `Gamma(t) = (L^{1+beta} - (1+beta) t)_+^{1/(1+beta)}`, the exact solution of
/// `Gamma' = -Gamma^{-beta}` that reaches zero in finite time.
pub fn extinction_profile(l: f64, beta: f64, t: f64) -> f64 {
    let base = libm::pow(l, 1.0 + beta) - (1.0 + beta) * t;
    if base <= 0.0 {
        0.0
    } else {
        libm::pow(base, 1.0 / (1.0 + beta))
    }
}

/// Sampled solution of `Gamma_eps' + g_eps(Gamma_eps) = 0`, `Gamma_eps(0) = L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaEpsProfile {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// First time `Gamma_eps` drops below `2 eps`, if it happens before the
    /// last requested time.
    pub crossing_two_eps: Option<f64>,
}

impl GammaEpsProfile {
    /// Linear interpolation in time (clamped to the sampled range).
    pub fn value_at(&self, t: f64) -> f64 {
        interpolate(&self.times, &self.values, t)
    }
}

pub(crate) fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    if times.is_empty() {
        return f64::NAN;
    }
    if t <= times[0] {
        return values[0];
    }
    let last = times.len() - 1;
    if t >= times[last] {
        return values[last];
    }
    let k = times.partition_point(|s| *s <= t);
    let (t0, t1) = (times[k - 1], times[k]);
    if t1 == t0 {
        return values[k];
    }
    let w = (t - t0) / (t1 - t0);
    values[k - 1] * (1.0 - w) + values[k] * w
}

/// Integrates the scalar extinction ODE with the classical fourth-order
/// Runge-Kutta method at base step `1e-4 L^{1+beta}`, shortened where the
/// relative change per step would exceed 1%.
pub fn solve_gamma_eps(
    knobs: &RegularizationKnobs,
    beta: f64,
    l: f64,
    t_grid: &[f64],
) -> Result<GammaEpsProfile> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::invalid("L", format!("initial level must be > 0, got {l}")));
    }
    if t_grid.iter().any(|t| !(*t >= 0.0)) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid(
            "t_grid",
            "times must be nonnegative and nondecreasing",
        ));
    }
    let eps = knobs.epsilon;
    let two_eps = 2.0 * eps;
    let rhs = |y: f64| -g_eps(eps, beta, y);
    let step = 1.0e-4 * libm::pow(l, 1.0 + beta);
    let t_last = t_grid.last().copied().unwrap_or(0.0);

    let mut values = Vec::with_capacity(t_grid.len());
    let mut t = 0.0;
    let mut y = l;
    let mut frozen = l <= eps;
    let mut crossing = if l < two_eps { Some(0.0) } else { None };

    for &target in t_grid {
        while !frozen && t < target {
            let k1 = rhs(y);
            // near the singular end the base step is refined so that one step
            // changes Gamma by at most 1%
            let k = step.min(target - t).min(0.01 * y / k1.abs().max(1e-300));

            let k2 = rhs(y + 0.5 * k * k1);
            let k3 = rhs(y + 0.5 * k * k2);
            let k4 = rhs(y + k * k3);
            let next = y + k / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !next.is_finite() {
                return Err(Error::IntegrationFailure { time: t });
            }
            if crossing.is_none() && y >= two_eps && next < two_eps {
                let w = (y - two_eps) / (y - next);
                crossing = Some(t + w * k);
            }
            t += k;
            // below the cutoff band the right-hand side is flat; once the
            // remaining drift is negligible the profile is constant
            if next == y || g_eps(eps, beta, next) * (t_last - t) <= 1.0e-16 * next {
                frozen = true;
            }
            y = next;
        }
        values.push(y);
    }
    Ok(GammaEpsProfile {
        times: t_grid.to_vec(),
        values,
        crossing_two_eps: crossing,
    })
}

/// Stationary barrier `w(x) = (M^{1/gamma} - sigma x)_+^gamma`, an exact
/// solution of `-(|w'|^{p-2} w')' + w^{-beta} = 0` on `{w > 0}`.
pub fn stationary_barrier(m: f64, consts: &DerivedConstants, x: f64) -> f64 {
    let base = libm::pow(m, 1.0 / consts.gamma) - consts.sigma * x;
    if base <= 0.0 {
        0.0
    } else {
        libm::pow(base, consts.gamma)
    }
}

/// Derivative of [`stationary_barrier`] in `x`.
pub fn stationary_barrier_slope(m: f64, consts: &DerivedConstants, x: f64) -> f64 {
    let base = libm::pow(m, 1.0 / consts.gamma) - consts.sigma * x;
    if base <= 0.0 {
        0.0
    } else {
        -consts.gamma * consts.sigma * libm::pow(base, consts.gamma - 1.0)
    }
}

/// `m0 = R0 + M^{1/gamma} / sigma`: no solution started from data supported
/// in `[-R0, R0]` with sup-norm `M` ever leaves `[-m0, m0]`.
pub fn support_bound(r0: f64, m: f64, consts: &DerivedConstants) -> f64 {
    r0 + libm::pow(m, 1.0 / consts.gamma) / consts.sigma
}

/// `M^{1+beta} / (1+beta)`.
pub fn quench_bound_sup(m: f64, beta: f64) -> f64 {
    libm::pow(m, 1.0 + beta) / (1.0 + beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1QuenchBound {
    pub bound: f64,
    pub tau_star: f64,
}

struct L1Objective {
    /// `(C m^{p/lambda})^{1+beta}`.
    k: f64,
    /// `(1+beta) / lambda`.
    a: f64,
    beta: f64,
    lambda: f64,
}

impl L1Objective {
    fn new(m: f64, consts: &DerivedConstants, cal: &CalibrationConstants) -> Self {
        let level = cal.c_smoothing * libm::pow(m, consts.p / consts.lambda);
        L1Objective {
            k: libm::pow(level, 1.0 + consts.beta),
            a: (1.0 + consts.beta) / consts.lambda,
            beta: consts.beta,
            lambda: consts.lambda,
        }
    }

    fn value(&self, tau: f64) -> f64 {
        tau + self.k * libm::pow(tau, -self.a) / (1.0 + self.beta)
    }

    fn derivative(&self, tau: f64) -> f64 {
        1.0 - self.k / self.lambda * libm::pow(tau, -self.a - 1.0)
    }

    fn second_derivative(&self, tau: f64) -> f64 {
        (self.a + 1.0) * self.k / self.lambda * libm::pow(tau, -self.a - 2.0)
    }
}

/// `h(tau) = tau + L(tau)^{1+beta} / (1+beta)` with
/// `L(tau) = C tau^{-1/lambda} m^{p/lambda}`.
pub fn quench_l1_objective(
    tau: f64,
    m: f64,
    consts: &DerivedConstants,
    cal: &CalibrationConstants,
) -> f64 {
    L1Objective::new(m, consts, cal).value(tau)
}

/// `h'(tau)`.
pub fn quench_l1_objective_prime(
    tau: f64,
    m: f64,
    consts: &DerivedConstants,
    cal: &CalibrationConstants,
) -> f64 {
    L1Objective::new(m, consts, cal).derivative(tau)
}

const TAU_MIN: f64 = 1.0e-8;
const TAU_MAX: f64 = 1.0e8;

/// Minimizes `h` over `tau > 0`: log-scale bracketing over `[1e-8, 1e8]`,
/// golden-section search in `log tau`, then Newton steps on `h'(tau) = 0`.
pub fn quench_bound_l1(
    m: f64,
    consts: &DerivedConstants,
    cal: &CalibrationConstants,
) -> L1QuenchBound {
    if m <= 0.0 {
        return L1QuenchBound {
            bound: 0.0,
            tau_star: 0.0,
        };
    }
    let obj = L1Objective::new(m, consts, cal);
    let f = |s: f64| obj.value(libm::exp(s));

    let (lo, hi) = (libm::log(TAU_MIN), libm::log(TAU_MAX));
    let samples = 64;
    let mut best = 0usize;
    let mut best_val = f64::INFINITY;
    for k in 0..=samples {
        let s = lo + (hi - lo) * k as f64 / samples as f64;
        let v = f(s);
        if v < best_val {
            best_val = v;
            best = k;
        }
    }
    let cell = (hi - lo) / samples as f64;
    let mut a = lo + cell * (best.saturating_sub(1)) as f64;
    let mut b = (lo + cell * (best + 1) as f64).min(hi);

    let ratio = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1.0e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let mut tau = libm::exp(0.5 * (a + b));
    // the golden-section optimum is only located to ~sqrt(machine eps);
    // polish on the stationarity condition
    for _ in 0..8 {
        let g = obj.derivative(tau);
        let h2 = obj.second_derivative(tau);
        if !(h2 > 0.0) {
            break;
        }
        let next = tau - g / h2;
        if !(next > 0.0) {
            break;
        }
        if (next - tau).abs() <= 1e-16 * tau {
            tau = next;
            break;
        }
        tau = next;
    }
    L1QuenchBound {
        bound: obj.value(tau),
        tau_star: tau,
    }
}

/// `M_g = (max_{0 <= s <= 2M} |g(s)|)^{1/p}` over a dense uniform sample, or
/// `|g(2M)|^{1/p}` when `g` is known to be monotone.
pub fn cap_mg<G>(g: G, m: f64, p: f64, monotone: bool) -> Result<f64>
where
    G: Fn(f64) -> Result<f64>,
{
    let top = 2.0 * m;
    let max_abs = if monotone {
        g(top)?.abs()
    } else {
        const SAMPLES: usize = 2048;
        let mut acc: f64 = 0.0;
        for k in 0..=SAMPLES {
            let s = top * k as f64 / SAMPLES as f64;
            acc = acc.max(g(s)?.abs());
        }
        acc
    };
    Ok(libm::pow(max_abs, 1.0 / p))
}

/// Bracket of the sup-norm gradient estimate at time `t`:
/// `t^{-1/p} M^{(1+beta)/p} + M_f M^{beta/p} + M_{f'} M^{(1+beta)/p} + 1`.
///
/// For nondecreasing sources (H2) the `f'` term is dropped and `M_f^p =
/// f(2M)`; for globally Lipschitz sources `M_{f'}` is `C_f^{1/p}`.
pub fn bracket_sup(t: f64, m: f64, src: &SourceTerm, p: f64, beta: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", format!("bracket needs t > 0, got {t}")));
    }
    let hyp = src.hypotheses();
    let m_f = cap_mg(|s| src.eval(s), m, p, hyp.h2)?;
    let m_fprime = if hyp.h2 {
        0.0
    } else if let (true, Some(c)) = (hyp.global_lipschitz, src.lipschitz_constant()) {
        libm::pow(c, 1.0 / p)
    } else {
        cap_mg(|s| src.eval_prime(s), m, p, false)?
    };
    let e1 = (1.0 + beta) / p;
    Ok(libm::pow(t, -1.0 / p) * libm::pow(m, e1)
        + m_f * libm::pow(m, beta / p)
        + m_fprime * libm::pow(m, e1)
        + 1.0)
}

/// Bracket of the L^1 gradient estimate at `tau`:
/// `tau^{-(lambda+beta+1)/(lambda p)} m^{(1+beta)/lambda}
///  + tau^{-beta/(lambda p)} m^{beta/lambda} m_f(tau) + 1` with
/// `m_f(tau) = f^{1/p}(C2 tau^{-1/lambda} m^{p/lambda})`.
pub fn bracket_l1(
    tau: f64,
    m: f64,
    src: &SourceTerm,
    consts: &DerivedConstants,
    cal: &CalibrationConstants,
) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::invalid("tau", format!("bracket needs tau > 0, got {tau}")));
    }
    let (p, beta, lambda) = (consts.p, consts.beta, consts.lambda);
    let level = cal.c2_mf * libm::pow(tau, -1.0 / lambda) * libm::pow(m, p / lambda);
    let m_f = libm::pow(src.eval(level)?.abs(), 1.0 / p);
    Ok(
        libm::pow(tau, -(lambda + beta + 1.0) / (lambda * p)) * libm::pow(m, (1.0 + beta) / lambda)
            + libm::pow(tau, -beta / (lambda * p)) * libm::pow(m, beta / lambda) * m_f
            + 1.0,
    )
}

/// `C t^{-1/lambda} m^{p/lambda}`.
pub fn smoothing_bound(t: f64, m: f64, consts: &DerivedConstants, c: f64) -> f64 {
    c * libm::pow(t, -1.0 / consts.lambda) * libm::pow(m, consts.p / consts.lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketSample {
    pub time: f64,
    pub value: f64,
}

/// Record of the smoothing envelope `t -> C t^{-1/lambda} m^{p/lambda}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingEnvelope {
    pub coefficient: f64,
    pub time_exponent: f64,
    pub mass_exponent: f64,
    pub l1_norm: f64,
}

impl SmoothingEnvelope {
    pub fn at(&self, t: f64) -> f64 {
        self.coefficient * libm::pow(t, self.time_exponent) * libm::pow(self.l1_norm, self.mass_exponent)
    }
}

/// Every closed-form quantity for one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub gamma: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub sup_norm: f64,
    pub l1_norm: f64,
    pub quench_bound_sup: f64,
    pub quench_bound_l1: L1QuenchBound,
    /// `None` when the initial data are not compactly supported.
    pub support_radius_m0: Option<f64>,
    pub bracket_sup: Vec<BracketSample>,
    pub bracket_l1: Vec<BracketSample>,
    pub smoothing: SmoothingEnvelope,
    pub calibration: CalibrationConstants,
}

pub fn bounds_report(
    spec: &ProblemSpec,
    cal: &CalibrationConstants,
    bracket_times: &[f64],
    bracket_taus: &[f64],
) -> Result<BoundsReport> {
    let consts = spec.constants();
    let m = spec.sup_norm();
    let l1 = spec.l1_norm();
    let bracket_sup = bracket_times
        .iter()
        .map(|&t| {
            Ok(BracketSample {
                time: t,
                value: bracket_sup(t, m, spec.source(), spec.p(), spec.beta())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let bracket_l1 = bracket_taus
        .iter()
        .map(|&tau| {
            Ok(BracketSample {
                time: tau,
                value: bracket_l1(tau, l1, spec.source(), &consts, cal)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundsReport {
        gamma: consts.gamma,
        lambda: consts.lambda,
        sigma: consts.sigma,
        sup_norm: m,
        l1_norm: l1,
        quench_bound_sup: quench_bound_sup(m, spec.beta()),
        quench_bound_l1: quench_bound_l1(l1, &consts, cal),
        support_radius_m0: spec
            .initial()
            .support_radius()
            .map(|r0| support_bound(r0, m, &consts)),
        bracket_sup,
        bracket_l1,
        smoothing: SmoothingEnvelope {
            coefficient: cal.c_smoothing,
            time_exponent: -1.0 / consts.lambda,
            mass_exponent: consts.p / consts.lambda,
            l1_norm: l1,
        },
        calibration: *cal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derived_constants, SourceKind, SourceTerm};
    use alloc::vec;
    use proptest::prelude::*;

    const SIGMA: f64 = 1.201_874_641_922_840_3;

    #[test]
    fn extinction_profile_examples() {
        assert_eq!(extinction_profile(1.0, 0.5, 0.0), 1.0);
        assert!((extinction_profile(1.0, 0.5, 0.4) - 0.542_883_523_318_981_3).abs() < 1e-12);
        assert_eq!(extinction_profile(1.0, 0.5, 2.0 / 3.0), 0.0);
        assert_eq!(extinction_profile(1.0, 0.5, 5.0), 0.0);
    }

    #[test]
    fn gamma_eps_tracks_closed_form_above_cutoff() {
        let c = derived_constants(3.0, 0.5);
        let k = RegularizationKnobs::new(1e-4, 1e-7, 1.0, &c).unwrap();
        let t_end = 2.0 / 3.0;
        let grid: Vec<f64> = (0..=2000).map(|i| t_end * i as f64 / 2000.0).collect();
        let prof = solve_gamma_eps(&k, 0.5, 1.0, &grid).unwrap();
        let mut worst: f64 = 0.0;
        for (t, v) in prof.times.iter().zip(&prof.values) {
            let exact = extinction_profile(1.0, 0.5, *t);
            if exact >= 2e-4 {
                worst = worst.max((v - exact).abs());
            }
            // never below the closed form
            assert!(*v >= exact - 1e-9);
        }
        assert!(worst <= 1e-6, "worst {worst}");
        let cross = prof.crossing_two_eps.unwrap();
        let expected = (1.0 - libm::pow(2e-4, 1.5)) / 1.5;
        assert!((cross - expected).abs() < 1e-4);
    }

    #[test]
    fn gamma_eps_below_cutoff_is_constant() {
        let c = derived_constants(3.0, 0.5);
        let k = RegularizationKnobs::new(0.1, 0.001, 1.0, &c).unwrap();
        let prof = solve_gamma_eps(&k, 0.5, 0.05, &[0.0, 1.0, 10.0]).unwrap();
        assert_eq!(prof.values, vec![0.05, 0.05, 0.05]);
    }

    #[test]
    fn gamma_eps_is_nonincreasing_and_floored() {
        let c = derived_constants(3.0, 0.5);
        let k = RegularizationKnobs::new(0.05, 1e-5, 1.0, &c).unwrap();
        let grid: Vec<f64> = (0..=400).map(|i| i as f64 * 0.005).collect();
        let prof = solve_gamma_eps(&k, 0.5, 1.0, &grid).unwrap();
        for w in prof.values.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(prof.values.iter().all(|v| *v >= 0.05));
        assert!(solve_gamma_eps(&k, 0.5, 1.0, &[0.5, 0.1]).is_err());
    }

    #[test]
    fn barrier_examples() {
        let c = derived_constants(3.0, 0.5);
        assert!((c.sigma - SIGMA).abs() < 1e-13);
        assert_eq!(stationary_barrier(1.0, &c, 0.0), 1.0);
        assert_eq!(stationary_barrier(1.0, &c, 1.0 / c.sigma), 0.0);
        assert!((1.0 / c.sigma - 0.832_033_529_220_761_6).abs() < 1e-12);
        assert!(stationary_barrier(1.0, &c, 0.5) > 0.0);
    }

    #[test]
    fn barrier_solves_stationary_equation() {
        // centered-difference residual of -(|w'|^{p-2} w')' + w^{-beta}
        // shrinks under refinement away from the free boundary
        let c = derived_constants(3.0, 0.5);
        let residual = |h: f64| {
            let mut worst: f64 = 0.0;
            let mut x = 0.1;
            while x < 0.6 {
                let flux = |y: f64| {
                    let s = (stationary_barrier(1.0, &c, y + 0.5 * h)
                        - stationary_barrier(1.0, &c, y - 0.5 * h))
                        / h;
                    s.abs() * s
                };
                let div = (flux(x + 0.5 * h) - flux(x - 0.5 * h)) / h;
                let w = stationary_barrier(1.0, &c, x);
                worst = worst.max((-div + libm::pow(w, -0.5)).abs());
                x += 0.01;
            }
            worst
        };
        let (r1, r2) = (residual(1e-2), residual(5e-3));
        assert!(r2 < r1);
        assert!(r2 < 1e-2);
        // exact identity behind it: (gamma-1)(p-1) - 1 = -beta gamma
        assert!(((c.gamma - 1.0) * 2.0 - 1.0 + 0.5 * c.gamma).abs() < 1e-15);
        // and the slope ratio |w'| / w^{1-1/gamma} = gamma sigma
        for &x in &[0.1, 0.4, 0.8] {
            let w = stationary_barrier(1.0, &c, x);
            let r = stationary_barrier_slope(1.0, &c, x).abs() / libm::pow(w, c.gradient_power());
            assert!((r - c.gamma * c.sigma).abs() < 1e-12);
        }
    }

    #[test]
    fn support_bound_examples() {
        let c = derived_constants(3.0, 0.5);
        assert!((support_bound(1.0, 1.0, &c) - 1.832_033_529_220_761_6).abs() < 1e-12);
        assert!((support_bound(0.0, 1.0, &c) - 0.832_033_529_220_761_6).abs() < 1e-12);
        assert!((support_bound(1.0, 1e-30, &c) - 1.0).abs() < 1e-20);
    }

    #[test]
    fn quench_bound_sup_examples() {
        assert!((quench_bound_sup(1.0, 0.5) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(quench_bound_sup(0.0, 0.5), 0.0);
        assert!((quench_bound_sup(2.0, 0.5) - 1.885_618_083_164_126_7).abs() < 1e-12);
    }

    #[test]
    fn quench_bound_l1_examples() {
        let c = derived_constants(3.0, 0.5);
        let cal = CalibrationConstants::default();
        let r = quench_bound_l1(1.0, &c, &cal);
        assert!((r.tau_star - 0.364_870_026_420_361_5).abs() < 1e-10);
        assert!((r.bound - 1.337_856_763_541_325_7).abs() < 1e-12);
        // closed-form stationarity: tau* = (K / lambda)^{1/(a+1)} with K = 1
        let closed = libm::pow(0.25, 1.0 / (1.0 + 1.5 / 4.0));
        assert!((r.tau_star - closed).abs() < 1e-12);
        let hp = quench_l1_objective_prime(r.tau_star, 1.0, &c, &cal);
        assert!(hp.abs() <= 1e-8 * r.bound.max(1.0));
        assert_eq!(quench_bound_l1(0.0, &c, &cal).bound, 0.0);
    }

    #[test]
    fn bracket_sup_examples() {
        let zero = SourceTerm::zero();
        assert!((bracket_sup(1.0, 1.0, &zero, 3.0, 0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!((bracket_sup(1e12, 1.0, &zero, 3.0, 0.5).unwrap() - 1.0).abs() < 1e-3);
        assert!(bracket_sup(0.0, 1.0, &zero, 3.0, 0.5).is_err());
        // s^2 under H1 only: M_f = M_{f'} = 4^{1/3}
        let sq = SourceTerm::new(
            SourceKind::Power { q: 2.0 },
            crate::model::Hypotheses {
                h1: true,
                ..crate::model::Hypotheses::NONE
            },
            None,
            None,
        )
        .unwrap();
        let m_f = cap_mg(|s| sq.eval(s), 1.0, 3.0, false).unwrap();
        assert!((m_f - 1.587_401_051_968_199_5).abs() < 1e-12);
        let b = bracket_sup(1.0, 1.0, &sq, 3.0, 0.5).unwrap();
        assert!((b - (1.0 + 2.0 * 1.587_401_051_968_199_5 + 1.0)).abs() < 1e-12);
        // H2 drops the f' term
        let sq_h2 = SourceTerm::power(2.0).unwrap();
        let b2 = bracket_sup(1.0, 1.0, &sq_h2, 3.0, 0.5).unwrap();
        assert!((b2 - (2.0 + 1.587_401_051_968_199_5)).abs() < 1e-12);
        // Lipschitz constant replaces M_{f'}
        let lip = SourceTerm::new(
            SourceKind::Power { q: 1.0 },
            crate::model::Hypotheses {
                h1: true,
                global_lipschitz: true,
                ..crate::model::Hypotheses::NONE
            },
            None,
            Some(8.0),
        )
        .unwrap();
        let b3 = bracket_sup(1.0, 1.0, &lip, 3.0, 0.5).unwrap();
        let m_f1 = libm::pow(2.0, 1.0 / 3.0);
        assert!((b3 - (1.0 + m_f1 + 2.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn bracket_l1_examples() {
        let c = derived_constants(3.0, 0.5);
        let cal = CalibrationConstants::default();
        let zero = SourceTerm::zero();
        assert!((bracket_l1(1.0, 1.0, &zero, &c, &cal).unwrap() - 2.0).abs() < 1e-15);
        let b = bracket_l1(16.0, 1.0, &zero, &c, &cal).unwrap();
        assert!((b - 1.280_615_512_077_343_2).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for k in 1..50 {
            let v = bracket_l1(0.1 * k as f64, 1.0, &zero, &c, &cal).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(bracket_l1(-1.0, 1.0, &zero, &c, &cal).is_err());
    }

    #[test]
    fn cap_mg_examples() {
        assert_eq!(cap_mg(|_| Ok(0.0), 1.0, 3.0, false).unwrap(), 0.0);
        let mono = cap_mg(|s| Ok(s * s * s), 0.5, 3.0, true).unwrap();
        assert!((mono - 1.0).abs() < 1e-15);
        let dense = cap_mg(|s| Ok(s * s), 1.0, 3.0, false).unwrap();
        assert!((dense - 1.587_401_051_968_199_5).abs() < 1e-12);
    }

    #[test]
    fn bounds_report_for_canonical_bump() {
        let spec = ProblemSpec::new(
            3.0,
            0.5,
            crate::model::Domain::CauchyTruncated { radius: 4.0 },
            SourceTerm::zero(),
            crate::model::InitialData::Bump {
                radius: 1.0,
                peak: 1.0,
            },
        )
        .unwrap();
        let r = bounds_report(&spec, &CalibrationConstants::default(), &[1.0], &[1.0]).unwrap();
        assert!((r.gamma - 1.2).abs() < 1e-15);
        assert_eq!(r.lambda, 4.0);
        assert!((r.support_radius_m0.unwrap() - 1.832_033_529_220_761_6).abs() < 1e-12);
        assert!((r.quench_bound_sup - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.bracket_sup[0].value - 2.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn l1_bound_scaling(m in 0.05f64..20.0, c in 0.5f64..4.0) {
            let consts = derived_constants(3.0, 0.5);
            let cal = CalibrationConstants::default();
            let b1 = quench_bound_l1(m, &consts, &cal).bound;
            let b2 = quench_bound_l1(c * m, &consts, &cal).bound;
            let expo = (1.5 * 3.0) / (1.5 + 4.0);
            prop_assert!(((b2 / b1) - libm::pow(c, expo)).abs() < 1e-9 * libm::pow(c, expo));
        }

        #[test]
        fn l1_minimizer_is_stationary(m in 1e-3f64..1e3, p in 2.2f64..6.0, beta in 0.05f64..0.95) {
            let consts = derived_constants(p, beta);
            let cal = CalibrationConstants::default();
            let r = quench_bound_l1(m, &consts, &cal);
            let hp = quench_l1_objective_prime(r.tau_star, m, &consts, &cal);
            prop_assert!(hp.abs() <= 1e-8 * r.bound.max(1.0));
        }

        #[test]
        fn extinction_profile_monotone(l in 0.01f64..5.0, t1 in 0.0f64..5.0, t2 in 0.0f64..5.0) {
            let (a, b) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(extinction_profile(l, 0.5, b) <= extinction_profile(l, 0.5, a));
            prop_assert!(extinction_profile(l * 1.1, 0.5, a) >= extinction_profile(l, 0.5, a));
        }

        #[test]
        fn brackets_at_least_one(t in 1e-3f64..1e3, m in 0.0f64..10.0) {
            let consts = derived_constants(3.0, 0.5);
            let src = SourceTerm::power(1.0).unwrap();
            prop_assert!(bracket_sup(t, m, &src, 3.0, 0.5).unwrap() >= 1.0);
            prop_assert!(bracket_l1(t, m, &src, &consts, &CalibrationConstants::default()).unwrap() >= 1.0);
        }
    }
}
