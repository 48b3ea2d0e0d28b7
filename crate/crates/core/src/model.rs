//! The continuous problem, the hypothesis classes for the source term and the
//! regularized nonlinearities `psi_eps`, `g_eps` and the lifted diffusivity.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// User-supplied scalar source `s -> f(s)`.
pub type UserFn = dyn Fn(f64) -> core::result::Result<f64, String> + Send + Sync;

/// Spatial domain of the problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    /// `I = (-l, l)` with homogeneous Dirichlet data.
    Dirichlet { half_length: f64 },
    /// The Cauchy problem on the line, truncated to `(-r, r)` with zero
    /// Dirichlet data at `+-r`.
    CauchyTruncated { radius: f64 },
}

impl Domain {
    pub fn half_length(&self) -> f64 {
        match *self {
            Domain::Dirichlet { half_length } => half_length,
            Domain::CauchyTruncated { radius } => radius,
        }
    }

    pub fn is_cauchy(&self) -> bool {
        matches!(self, Domain::CauchyTruncated { .. })
    }

    /// Same kind of domain with a different extent.
    pub fn with_half_length(&self, half_length: f64) -> Domain {
        match self {
            Domain::Dirichlet { .. } => Domain::Dirichlet { half_length },
            Domain::CauchyTruncated { .. } => Domain::CauchyTruncated {
                radius: half_length,
            },
        }
    }
}

/// Hypothesis tags claimed for a source term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypotheses {
    /// `f` is C^1 and `f(0) = 0`.
    pub h1: bool,
    /// `f` is nondecreasing and `f(0) = 0`.
    pub h2: bool,
    /// `f(s) >= s^{q0}` for large `s`, with `q0` in (0, 1).
    pub h3: bool,
    /// `f` is globally Lipschitz with `f(0) = 0`.
    pub global_lipschitz: bool,
}

impl Hypotheses {
    pub const NONE: Hypotheses = Hypotheses {
        h1: false,
        h2: false,
        h3: false,
        global_lipschitz: false,
    };
}

#[derive(Clone)]
pub struct UserSource {
    label: String,
    func: Arc<UserFn>,
}

impl UserSource {
    pub fn new(label: impl Into<String>, func: Arc<UserFn>) -> Self {
        UserSource {
            label: label.into(),
            func,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for UserSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UserSource")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum SourceKind {
    Zero,
    /// `f(s) = s^q`.
    Power { q: f64 },
    /// `f(s) = e^s - 1`.
    ExpMinusOne,
    /// `f(s) = c`. Only admissible for the nonexistence experiment.
    Constant { c: f64 },
    UserExpression(UserSource),
}

impl SourceKind {
    /// Built-in kinds that are nondecreasing on `[0, inf)`.
    fn is_builtin_nondecreasing(&self) -> bool {
        match self {
            SourceKind::Zero | SourceKind::ExpMinusOne | SourceKind::Constant { .. } => true,
            SourceKind::Power { .. } => true,
            SourceKind::UserExpression(_) => false,
        }
    }

    pub fn label(&self) -> String {
        match self {
            SourceKind::Zero => "zero".to_string(),
            SourceKind::Power { q } => format!("s^{q}"),
            SourceKind::ExpMinusOne => "exp(s)-1".to_string(),
            SourceKind::Constant { c } => format!("{c}"),
            SourceKind::UserExpression(u) => u.label.clone(),
        }
    }
}

/// Source term `f` together with the hypotheses it is claimed to satisfy.
#[derive(Debug, Clone)]
pub struct SourceTerm {
    kind: SourceKind,
    hypotheses: Hypotheses,
    q0: Option<f64>,
    lipschitz_constant: Option<f64>,
    violates_origin: bool,
}

const MONOTONE_SPOT_CHECKS: usize = 64;
const WORKING_RANGE_MAX: f64 = 1.0e2;

impl SourceTerm {
    /// Validating constructor. `f(0) = 0` is checked by evaluation, H2 is
    /// spot-checked on a logarithmic grid, H3 requires `q0`, and a global
    /// Lipschitz claim requires its constant.
    pub fn new(
        kind: SourceKind,
        hypotheses: Hypotheses,
        q0: Option<f64>,
        lipschitz_constant: Option<f64>,
    ) -> Result<Self> {
        let src = SourceTerm {
            kind,
            hypotheses,
            q0,
            lipschitz_constant,
            violates_origin: false,
        };
        let f0 = src.eval(0.0)?;
        if f0 != 0.0 {
            return Err(Error::invalid(
                "source",
                format!("f(0) = {f0} but f(0) = 0 is required (use the nonexistence constructor to flag a violation)"),
            ));
        }
        src.check_tags()?;
        Ok(src)
    }

    /// A source with `f(0) != 0`, flagged for the nonexistence experiment.
    pub fn violating_origin(kind: SourceKind) -> Result<Self> {
        let src = SourceTerm {
            kind,
            hypotheses: Hypotheses::NONE,
            q0: None,
            lipschitz_constant: None,
            violates_origin: true,
        };
        let f0 = src.eval(0.0)?;
        if !(f0 > 0.0) {
            return Err(Error::invalid(
                "source",
                format!("nonexistence source must have f(0) > 0, got {f0}"),
            ));
        }
        Ok(src)
    }

    pub fn zero() -> Self {
        SourceTerm {
            kind: SourceKind::Zero,
            hypotheses: Hypotheses {
                h1: true,
                h2: true,
                h3: false,
                global_lipschitz: true,
            },
            q0: None,
            lipschitz_constant: Some(0.0),
            violates_origin: false,
        }
    }

    /// `s^q` tagged with H2, with H1 when `q >= 1`, and with H3 (`q0 = q`)
    /// when `q < 1`.
    pub fn power(q: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::invalid("source.q", format!("q must be > 0, got {q}")));
        }
        let sublinear = q < 1.0;
        SourceTerm::new(
            SourceKind::Power { q },
            Hypotheses {
                h1: q >= 1.0,
                h2: true,
                h3: sublinear,
                global_lipschitz: false,
            },
            if sublinear { Some(q) } else { None },
            None,
        )
    }

    pub fn exp_minus_one() -> Self {
        SourceTerm {
            kind: SourceKind::ExpMinusOne,
            hypotheses: Hypotheses {
                h1: true,
                h2: true,
                h3: true,
                global_lipschitz: false,
            },
            q0: Some(0.5),
            lipschitz_constant: None,
            violates_origin: false,
        }
    }

    fn check_tags(&self) -> Result<()> {
        let h = self.hypotheses;
        if h.h2 {
            let mut prev = self.eval(0.0)?;
            for k in 0..MONOTONE_SPOT_CHECKS {
                let s = spot_point(k);
                let v = self.eval(s)?;
                if v < prev {
                    return Err(Error::invalid(
                        "source.hypotheses",
                        format!("H2 claimed but f decreases near s = {s}"),
                    ));
                }
                prev = v;
            }
        }
        if h.h1 {
            for k in 0..MONOTONE_SPOT_CHECKS {
                let d = self.eval_prime(spot_point(k))?;
                if !d.is_finite() {
                    return Err(Error::invalid(
                        "source.hypotheses",
                        "H1 claimed but f' is not finite on the working range",
                    ));
                }
            }
            let d0 = self.eval_prime(0.0)?;
            if !d0.is_finite() {
                return Err(Error::invalid(
                    "source.hypotheses",
                    "H1 claimed but f is not C^1 at 0",
                ));
            }
        }
        if h.h3 {
            match self.q0 {
                Some(q0) if q0 > 0.0 && q0 < 1.0 => {}
                Some(q0) => {
                    return Err(Error::invalid(
                        "source.q0",
                        format!("q0 must lie in (0, 1), got {q0}"),
                    ))
                }
                None => return Err(Error::invalid("source.q0", "H3 claimed without q0")),
            }
        }
        if h.global_lipschitz {
            match self.lipschitz_constant {
                Some(c) if c >= 0.0 && c.is_finite() => {}
                _ => {
                    return Err(Error::invalid(
                        "source.lipschitz_constant",
                        "global Lipschitz claimed without a finite constant",
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> &SourceKind {
        &self.kind
    }

    pub fn hypotheses(&self) -> Hypotheses {
        self.hypotheses
    }

    pub fn q0(&self) -> Option<f64> {
        self.q0
    }

    pub fn lipschitz_constant(&self) -> Option<f64> {
        self.lipschitz_constant
    }

    pub fn violates_origin(&self) -> bool {
        self.violates_origin
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, SourceKind::Zero)
    }

    /// `f` is known to be nondecreasing on `[0, inf)`, either because it is a
    /// built-in monotone kind or because H2 was claimed and spot-checked.
    pub fn is_nondecreasing(&self) -> bool {
        self.hypotheses.h2 || self.kind.is_builtin_nondecreasing()
    }

    /// `f(s)`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        let v = match &self.kind {
            SourceKind::Zero => 0.0,
            SourceKind::Power { q } => {
                if s <= 0.0 {
                    0.0
                } else {
                    libm::pow(s, *q)
                }
            }
            SourceKind::ExpMinusOne => libm::expm1(s),
            SourceKind::Constant { c } => *c,
            SourceKind::UserExpression(u) => (u.func)(s)
                .map_err(|reason| Error::SourceEvaluation { s, reason })?,
        };
        if v.is_nan() {
            return Err(Error::SourceEvaluation {
                s,
                reason: "evaluated to NaN".to_string(),
            });
        }
        Ok(v)
    }

    /// `f'(s)`: analytic for built-in kinds, central difference with step
    /// `1e-6 * max(1, s)` for user expressions.
    pub fn eval_prime(&self, s: f64) -> Result<f64> {
        match &self.kind {
            SourceKind::Zero | SourceKind::Constant { .. } => Ok(0.0),
            SourceKind::Power { q } => {
                let q = *q;
                if s > 0.0 {
                    Ok(q * libm::pow(s, q - 1.0))
                } else if q > 1.0 {
                    Ok(0.0)
                } else if q == 1.0 {
                    Ok(1.0)
                } else {
                    Ok(f64::INFINITY)
                }
            }
            SourceKind::ExpMinusOne => Ok(libm::exp(s)),
            SourceKind::UserExpression(_) => {
                let step = 1.0e-6 * s.abs().max(1.0);
                let hi = self.eval(s + step)?;
                let lo = self.eval(s - step)?;
                Ok((hi - lo) / (2.0 * step))
            }
        }
    }
}

fn spot_point(k: usize) -> f64 {
    // logarithmic grid from 1e-6 to WORKING_RANGE_MAX
    let lo = libm::log(1.0e-6);
    let hi = libm::log(WORKING_RANGE_MAX);
    libm::exp(lo + (hi - lo) * (k as f64) / ((MONOTONE_SPOT_CHECKS - 1) as f64))
}

/// Free function form of [`SourceTerm::eval`].
pub fn eval_f(src: &SourceTerm, s: f64) -> Result<f64> {
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::SourceEvaluation {
            s,
            reason: "argument must be finite and nonnegative".to_string(),
        });
    }
    src.eval(s)
}

/// Initial data profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialData {
    /// `peak * cos^2(pi x / (2 radius))` on `|x| < radius`, zero outside.
    Bump { radius: f64, peak: f64 },
    /// `peak * cos(pi x / (2 l))` on `(-l, l)`.
    Cosine { peak: f64 },
    /// Constant `level` in the open domain.
    Constant { level: f64 },
    /// Narrow bump of total mass `mass` and support radius `width`.
    Spike { mass: f64, width: f64 },
    /// `peak * min(1, (|x| / core)^(-power))`: positive everywhere, tends to
    /// zero at infinity.
    DecayingTail { peak: f64, core: f64, power: f64 },
    /// Piecewise linear through `(nodes, values)`, zero outside the table.
    Table { nodes: Vec<f64>, values: Vec<f64> },
}

impl InitialData {
    pub fn value_at(&self, x: f64, half_length: f64) -> f64 {
        match self {
            InitialData::Bump { radius, peak } => cos2_bump(x, *radius, *peak),
            InitialData::Cosine { peak } => {
                if x.abs() >= half_length {
                    0.0
                } else {
                    peak * libm::cos(PI * x / (2.0 * half_length))
                }
            }
            InitialData::Constant { level } => {
                if x.abs() >= half_length {
                    0.0
                } else {
                    *level
                }
            }
            InitialData::Spike { mass, width } => cos2_bump(x, *width, mass / width),
            InitialData::DecayingTail { peak, core, power } => {
                let r = x.abs() / core;
                if r <= 1.0 {
                    *peak
                } else {
                    peak * libm::pow(r, -power)
                }
            }
            InitialData::Table { nodes, values } => table_value(nodes, values, x),
        }
    }

    /// Radius of the support when the data are compactly supported.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            InitialData::Bump { radius, .. } => Some(*radius),
            InitialData::Spike { width, .. } => Some(*width),
            InitialData::Table { nodes, values } => {
                let mut r: Option<f64> = None;
                for (x, v) in nodes.iter().zip(values) {
                    if *v > 0.0 {
                        r = Some(r.map_or(x.abs(), |cur: f64| cur.max(x.abs())));
                    }
                }
                Some(r.unwrap_or(0.0))
            }
            _ => None,
        }
    }

    fn sup_norm(&self, half_length: f64) -> f64 {
        match self {
            InitialData::Bump { peak, .. } => *peak,
            InitialData::Cosine { peak } => *peak,
            InitialData::Constant { level } => *level,
            InitialData::Spike { mass, width } => mass / width,
            InitialData::DecayingTail { peak, .. } => *peak,
            InitialData::Table { nodes, values } => nodes
                .iter()
                .zip(values)
                .filter(|(x, _)| x.abs() <= half_length)
                .map(|(_, v)| *v)
                .fold(0.0, f64::max),
        }
    }

    fn l1_norm(&self, half_length: f64) -> f64 {
        match self {
            InitialData::Bump { radius, peak } => peak * radius,
            InitialData::Cosine { peak } => 4.0 * peak * half_length / PI,
            InitialData::Constant { level } => 2.0 * level * half_length,
            InitialData::Spike { mass, .. } => *mass,
            InitialData::DecayingTail { peak, core, power } => {
                if half_length <= *core {
                    return 2.0 * peak * half_length;
                }
                let ratio = half_length / core;
                let tail = if (*power - 1.0).abs() < 1e-14 {
                    libm::log(ratio)
                } else {
                    (libm::pow(ratio, 1.0 - power) - 1.0) / (1.0 - power)
                };
                2.0 * peak * core * (1.0 + tail)
            }
            InitialData::Table { nodes, values } => nodes
                .windows(2)
                .zip(values.windows(2))
                .map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0] + v[1]))
                .sum(),
        }
    }

    fn validate(&self, half_length: f64) -> Result<()> {
        let positive = |name: &'static str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be finite and > 0, got {v}")))
            }
        };
        let nonneg = |name: &'static str, v: f64| -> Result<()> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")))
            }
        };
        match self {
            InitialData::Bump { radius, peak } => {
                positive("initial.radius", *radius)?;
                nonneg("initial.peak", *peak)?;
                if *radius > half_length {
                    return Err(Error::invalid(
                        "initial.radius",
                        format!("bump radius {radius} exceeds the domain half-length {half_length}"),
                    ));
                }
            }
            InitialData::Cosine { peak } => nonneg("initial.peak", *peak)?,
            InitialData::Constant { level } => nonneg("initial.level", *level)?,
            InitialData::Spike { mass, width } => {
                nonneg("initial.mass", *mass)?;
                positive("initial.width", *width)?;
                if *width > half_length {
                    return Err(Error::invalid(
                        "initial.width",
                        "spike wider than the domain",
                    ));
                }
            }
            InitialData::DecayingTail { peak, core, power } => {
                nonneg("initial.peak", *peak)?;
                positive("initial.core", *core)?;
                positive("initial.power", *power)?;
            }
            InitialData::Table { nodes, values } => {
                if nodes.len() != values.len() || nodes.len() < 2 {
                    return Err(Error::invalid(
                        "initial.table",
                        "nodes and values must have the same length >= 2",
                    ));
                }
                if nodes.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::invalid(
                        "initial.table",
                        "nodes must be strictly increasing",
                    ));
                }
                for v in values {
                    nonneg("initial.table", *v)?;
                }
            }
        }
        Ok(())
    }
}

fn cos2_bump(x: f64, radius: f64, peak: f64) -> f64 {
    if x.abs() >= radius {
        0.0
    } else {
        let c = libm::cos(PI * x / (2.0 * radius));
        peak * c * c
    }
}

fn table_value(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    if x < nodes[0] || x > nodes[nodes.len() - 1] {
        return 0.0;
    }
    let k = nodes.partition_point(|n| *n <= x);
    if k == 0 {
        return values[0];
    }
    if k >= nodes.len() {
        return values[nodes.len() - 1];
    }
    let (x0, x1) = (nodes[k - 1], nodes[k]);
    let w = (x - x0) / (x1 - x0);
    values[k - 1] * (1.0 - w) + values[k] * w
}

/// `gamma`, `lambda` and `sigma` of the problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub p: f64,
    pub beta: f64,
    /// `p / (p + beta - 1)`.
    pub gamma: f64,
    /// `2 (p - 1)`.
    pub lambda: f64,
    /// `(1 / (gamma^{p-1} (gamma - 1) (p - 1)))^{1/p}`.
    pub sigma: f64,
}

impl DerivedConstants {
    /// Exponent `1 - 1/gamma` of the sharp gradient estimate.
    pub fn gradient_power(&self) -> f64 {
        1.0 - 1.0 / self.gamma
    }

    /// Lower bound for the diffusivity smoothing exponent `alpha`.
    pub fn alpha_threshold(&self) -> f64 {
        2.0 * (self.gamma - 1.0) / self.gamma
    }
}

pub fn derived_constants(p: f64, beta: f64) -> DerivedConstants {
    let gamma = p / (p + beta - 1.0);
    let lambda = 2.0 * (p - 1.0);
    let sigma = libm::pow(
        1.0 / (libm::pow(gamma, p - 1.0) * (gamma - 1.0) * (p - 1.0)),
        1.0 / p,
    );
    DerivedConstants {
        p,
        beta,
        gamma,
        lambda,
        sigma,
    }
}

/// The continuous problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    p: f64,
    beta: f64,
    domain: Domain,
    source: SourceTerm,
    initial: InitialData,
    singular_absorption: bool,
    sup_norm: f64,
    l1_norm: f64,
}

impl ProblemSpec {
    pub fn new(
        p: f64,
        beta: f64,
        domain: Domain,
        source: SourceTerm,
        initial: InitialData,
    ) -> Result<Self> {
        if !(p > 2.0 && p.is_finite()) {
            return Err(Error::invalid("problem.p", format!("p must be > 2, got {p}")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid(
                "problem.beta",
                format!("beta must lie in (0, 1), got {beta}"),
            ));
        }
        let l = domain.half_length();
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::invalid(
                "problem.domain",
                format!("half-length / radius must be finite and > 0, got {l}"),
            ));
        }
        initial.validate(l)?;
        let sup_norm = initial.sup_norm(l);
        let l1_norm = initial.l1_norm(l);
        Ok(ProblemSpec {
            p,
            beta,
            domain,
            source,
            initial,
            singular_absorption: true,
            sup_norm,
            l1_norm,
        })
    }

    /// Drops the `u^{-beta}` sink, leaving `u_t - Delta_p u + f(u) = 0`. Used
    /// for comparison runs with a pure power absorption and for manufactured
    /// solutions.
    pub fn without_singular_absorption(mut self) -> Self {
        self.singular_absorption = false;
        self
    }

    pub fn with_domain(&self, domain: Domain) -> Result<Self> {
        let mut spec = ProblemSpec::new(
            self.p,
            self.beta,
            domain,
            self.source.clone(),
            self.initial.clone(),
        )?;
        spec.singular_absorption = self.singular_absorption;
        Ok(spec)
    }

    pub fn with_initial(&self, initial: InitialData) -> Result<Self> {
        let mut spec =
            ProblemSpec::new(self.p, self.beta, self.domain, self.source.clone(), initial)?;
        spec.singular_absorption = self.singular_absorption;
        Ok(spec)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn source(&self) -> &SourceTerm {
        &self.source
    }

    pub fn initial(&self) -> &InitialData {
        &self.initial
    }

    pub fn singular_absorption(&self) -> bool {
        self.singular_absorption
    }

    /// `||u0||_inf`.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// `||u0||_{L^1}` over the (possibly truncated) domain.
    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }

    pub fn constants(&self) -> DerivedConstants {
        derived_constants(self.p, self.beta)
    }

    pub fn u0(&self, x: f64) -> f64 {
        self.initial.value_at(x, self.domain.half_length())
    }
}

/// Regularization parameters of the approximate problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationKnobs {
    pub epsilon: f64,
    /// Boundary and diffusivity lift. `0` is the exact-diffusivity limit mode.
    pub eta: f64,
    pub alpha: f64,
}

impl RegularizationKnobs {
    pub fn new(epsilon: f64, eta: f64, alpha: f64, consts: &DerivedConstants) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(
                "regularization.epsilon",
                format!("epsilon must be > 0, got {epsilon}"),
            ));
        }
        if !(eta >= 0.0 && eta < epsilon) {
            return Err(Error::invalid(
                "regularization.eta",
                format!("eta must satisfy 0 <= eta < epsilon = {epsilon}, got {eta}"),
            ));
        }
        let threshold = consts.alpha_threshold();
        if !(alpha > threshold && alpha.is_finite()) {
            return Err(Error::invalid(
                "regularization.alpha",
                format!("alpha must exceed 2(gamma-1)/gamma = {threshold}, got {alpha}"),
            ));
        }
        Ok(RegularizationKnobs {
            epsilon,
            eta,
            alpha,
        })
    }

    /// Knobs with the default `alpha` for the given exponent.
    pub fn with_default_alpha(epsilon: f64, eta: f64, consts: &DerivedConstants) -> Result<Self> {
        RegularizationKnobs::new(epsilon, eta, default_alpha(consts.p), consts)
    }

    /// `eta^alpha`, the additive lift inside the diffusivity.
    pub fn diffusivity_lift(&self) -> f64 {
        if self.eta == 0.0 {
            0.0
        } else {
            libm::pow(self.eta, self.alpha)
        }
    }
}

pub fn default_alpha(p: f64) -> f64 {
    if p <= 4.0 {
        1.0
    } else {
        1.5
    }
}

fn bump_weight(t: f64) -> f64 {
    if t > 0.0 {
        libm::exp(-1.0 / t)
    } else {
        0.0
    }
}

/// Smooth nondecreasing cutoff: 0 on `(-inf, 1]`, 1 on `[2, inf)`.
pub fn eval_psi(s: f64) -> f64 {
    if s <= 1.0 {
        0.0
    } else if s >= 2.0 {
        1.0
    } else {
        let a = bump_weight(s - 1.0);
        let b = bump_weight(2.0 - s);
        a / (a + b)
    }
}

/// Derivative of [`eval_psi`].
pub fn eval_psi_prime(s: f64) -> f64 {
    if s <= 1.0 || s >= 2.0 {
        return 0.0;
    }
    let t1 = s - 1.0;
    let t2 = 2.0 - s;
    let a = bump_weight(t1);
    let b = bump_weight(t2);
    let da = a / (t1 * t1);
    let db = -b / (t2 * t2);
    let den = a + b;
    (da * b - a * db) / (den * den)
}

/// `psi(s / eps)`.
#[inline]
pub fn psi_eps(epsilon: f64, s: f64) -> f64 {
    eval_psi(s / epsilon)
}

/// `g_eps(s) = s^{-beta} psi(s / eps)` for `s > 0`.
pub fn eval_g_eps(knobs: &RegularizationKnobs, beta: f64, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::invalid("s", format!("g_eps needs s > 0, got {s}")));
    }
    Ok(g_eps(knobs.epsilon, beta, s))
}

/// Unchecked `g_eps`; returns 0 for `s <= eps` (including `s <= 0`).
#[inline]
pub fn g_eps(epsilon: f64, beta: f64, s: f64) -> f64 {
    if s <= epsilon {
        return 0.0;
    }
    let w = eval_psi(s / epsilon);
    if w == 0.0 {
        0.0
    } else {
        libm::pow(s, -beta) * w
    }
}

/// `d/ds g_eps(s)`.
#[inline]
pub fn g_eps_prime(epsilon: f64, beta: f64, s: f64) -> f64 {
    if s <= epsilon {
        return 0.0;
    }
    let w = eval_psi(s / epsilon);
    let dw = eval_psi_prime(s / epsilon) / epsilon;
    let pw = libm::pow(s, -beta);
    -beta * pw / s * w + pw * dw
}

/// Lifted diffusivity `a(slope) = (slope^2 + eta^alpha)^{(p-2)/2}`.
pub fn eval_diffusivity(knobs: &RegularizationKnobs, p: f64, slope: f64) -> f64 {
    diffusivity(knobs.diffusivity_lift(), p, slope)
}

#[inline]
pub(crate) fn diffusivity(lift: f64, p: f64, slope: f64) -> f64 {
    let b = slope * slope + lift;
    if p == 3.0 {
        libm::sqrt(b)
    } else if p == 4.0 {
        b
    } else {
        libm::pow(b, 0.5 * (p - 2.0))
    }
}

/// `derived_constants` on a validated spec.
pub fn constants_of(spec: &ProblemSpec) -> DerivedConstants {
    spec.constants()
}
