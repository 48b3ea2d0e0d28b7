//! Scenario configuration: a TOML file with one section per concern.
//!
//! Unknown keys are rejected. Optional settings take the defaults listed on
//! their fields; the fully resolved configuration is echoed into
//! `summary.json` so no default goes unrecorded.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use quenchlab_core::analytic::CalibrationConstants;
use quenchlab_core::ladder::LadderPlan;
use quenchlab_core::model::{UserSource, DerivedConstants};
use quenchlab_core::scenarios::Experiment;
use quenchlab_core::{
    Domain, Grid, Hypotheses, InitialData, ProblemSpec, RegularizationKnobs, SourceKind,
    SourceTerm, StepConfig,
};

use crate::error::CliError;
use crate::expr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub problem: ProblemConfig,
    pub regularization: RegularizationConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub stepping: SteppingConfig,
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub ladder: Option<LadderConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub p: f64,
    pub beta: f64,
    #[serde(default = "yes")]
    pub singular_absorption: bool,
    pub domain: DomainConfig,
    pub source: SourceConfig,
    pub initial: InitialConfig,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Dirichlet { half_length: f64 },
    Cauchy { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisTag {
    H1,
    H2,
    H3,
    GlobalLipschitz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    Zero,
    Power { q: f64 },
    ExpMinusOne,
    /// `f = c > 0`: only for the nonexistence experiment.
    Constant { c: f64 },
    /// Expression in the variable `s`, e.g. `"s^2 + 0.5 * s"`.
    Expression {
        expr: String,
        #[serde(default)]
        hypotheses: Vec<HypothesisTag>,
        #[serde(default)]
        q0: Option<f64>,
        #[serde(default)]
        lipschitz: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Bump { radius: f64, peak: f64 },
    Cosine { peak: f64 },
    Constant { level: f64 },
    Spike { mass: f64, width: f64 },
    DecayingTail { peak: f64, core: f64, power: f64 },
    Table { nodes: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizationConfig {
    pub epsilon: f64,
    pub eta: f64,
    /// Default: the smallest admissible exponent for `p`.
    #[serde(default)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Cells on the whole domain; exactly one of `n_cells`, `spacing`.
    #[serde(default)]
    pub n_cells: Option<usize>,
    #[serde(default)]
    pub spacing: Option<f64>,
    /// Cell counts for refinement studies (gradient experiment).
    #[serde(default)]
    pub refinement: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteppingConfig {
    #[serde(default = "d_dt_max")]
    pub dt_max: f64,
    #[serde(default = "d_courant")]
    pub dt_courant_factor: f64,
    #[serde(default = "d_reaction_tol")]
    pub reaction_tol: f64,
    #[serde(default = "d_stride")]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub quench_tol: Option<f64>,
    #[serde(default)]
    pub support_tol: Option<f64>,
    #[serde(default = "yes")]
    pub stop_on_quench: bool,
    #[serde(default = "d_t_end")]
    pub t_end: f64,
}

fn d_dt_max() -> f64 {
    StepConfig::default().dt_max
}
fn d_courant() -> f64 {
    StepConfig::default().dt_courant_factor
}
fn d_reaction_tol() -> f64 {
    StepConfig::default().reaction_tol
}
fn d_stride() -> usize {
    1
}
fn d_t_end() -> f64 {
    1.0
}

impl Default for SteppingConfig {
    fn default() -> Self {
        SteppingConfig {
            dt_max: d_dt_max(),
            dt_courant_factor: d_courant(),
            reaction_tol: d_reaction_tol(),
            snapshot_stride: d_stride(),
            quench_tol: None,
            support_tol: None,
            stop_on_quench: true,
            t_end: d_t_end(),
        }
    }
}

impl SteppingConfig {
    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            dt_max: self.dt_max,
            dt_courant_factor: self.dt_courant_factor,
            reaction_tol: self.reaction_tol,
            snapshot_stride: self.snapshot_stride,
            quench_tol: self.quench_tol,
            support_tol: self.support_tol,
            stop_on_quench: self.stop_on_quench,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Experiment,
    /// Optional label copied into the outputs.
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    #[serde(default)]
    pub eps_sequence: Option<Vec<f64>>,
    #[serde(default)]
    pub eta_sequence: Option<Vec<f64>>,
    #[serde(default)]
    pub radius_sequence: Option<Vec<f64>>,
    #[serde(default)]
    pub probe_times: Vec<f64>,
    #[serde(default = "d_mono_tol")]
    pub monotonicity_tol: f64,
    #[serde(default = "d_radius_tol")]
    pub radius_tol: f64,
    #[serde(default)]
    pub eta_ladder_each_level: bool,
}

fn d_mono_tol() -> f64 {
    1e-6
}
fn d_radius_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "d_barrier_tol")]
    pub barrier_tol: f64,
    /// Added to `dt` in the quench-time check; `None` is `2 eta + 1e-3`.
    #[serde(default)]
    pub quench_slack: Option<f64>,
    /// Spatial slack of support containment in units of `h`.
    #[serde(default = "d_support_cells")]
    pub support_slack_cells: f64,
    #[serde(default = "d_mass_tol")]
    pub mass_tol: f64,
    /// Time where gradient brackets are evaluated.
    #[serde(default = "d_tau")]
    pub tau: f64,
    /// Value floor of the gradient ratio in units of `eps`.
    #[serde(default = "d_floor")]
    pub gradient_floor_eps: f64,
    #[serde(default = "d_gradient_band")]
    pub gradient_band: f64,
    /// Start of the window used by the time-regularity fit.
    #[serde(default = "d_holder_tau")]
    pub holder_tau: f64,
    #[serde(default = "d_holder_lo")]
    pub holder_min: f64,
    #[serde(default = "d_holder_hi")]
    pub holder_max: f64,
    #[serde(default = "d_smoothing_band")]
    pub smoothing_band: f64,
    #[serde(default = "d_smoothing_slack")]
    pub smoothing_slope_slack: f64,
    #[serde(default = "d_iss")]
    pub iss_threshold: f64,
    /// Maximum unfloored steps after quench in the nonexistence probe.
    #[serde(default = "d_probe_steps")]
    pub probe_steps: usize,
    /// Adds a seeded comparison run with randomly lowered data.
    #[serde(default)]
    pub randomized_ordering: bool,
}

fn d_barrier_tol() -> f64 {
    1e-3
}
fn d_support_cells() -> f64 {
    2.0
}
fn d_mass_tol() -> f64 {
    1e-8
}
fn d_tau() -> f64 {
    0.15
}
fn d_floor() -> f64 {
    8.0
}
fn d_gradient_band() -> f64 {
    0.10
}
fn d_holder_tau() -> f64 {
    0.1
}
fn d_holder_lo() -> f64 {
    0.45
}
fn d_holder_hi() -> f64 {
    0.75
}
fn d_smoothing_band() -> f64 {
    0.15
}
fn d_smoothing_slack() -> f64 {
    0.1
}
fn d_iss() -> f64 {
    0.05
}
fn d_probe_steps() -> usize {
    10
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            barrier_tol: d_barrier_tol(),
            quench_slack: None,
            support_slack_cells: d_support_cells(),
            mass_tol: d_mass_tol(),
            tau: d_tau(),
            gradient_floor_eps: d_floor(),
            gradient_band: d_gradient_band(),
            holder_tau: d_holder_tau(),
            holder_min: d_holder_lo(),
            holder_max: d_holder_hi(),
            smoothing_band: d_smoothing_band(),
            smoothing_slope_slack: d_smoothing_slack(),
            iss_threshold: d_iss(),
            probe_steps: d_probe_steps(),
            randomized_ordering: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    #[serde(default = "d_one")]
    pub c_smoothing: f64,
    #[serde(default = "d_one")]
    pub c2_mf: f64,
}

fn d_one() -> f64 {
    1.0
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            c_smoothing: 1.0,
            c2_mf: 1.0,
        }
    }
}

/// Parameter grid; the listed axes are crossed. An omitted axis takes the
/// value in `[problem]`; an axis given as `[]` makes the grid empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    #[serde(default)]
    pub beta: Option<Vec<f64>>,
    /// Scales the initial data to this sup norm (mass for spikes).
    #[serde(default)]
    pub peak: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    /// Times of the sup-norm gradient bracket.
    #[serde(default)]
    pub times: Vec<f64>,
    /// Times of the L^1 gradient bracket.
    #[serde(default)]
    pub taus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default = "d_dir")]
    pub directory: PathBuf,
    /// Subset of `snapshots`, `ledger`, `summary`, `verify`, `timing`.
    #[serde(default = "d_formats")]
    pub files: Vec<String>,
}

fn d_dir() -> PathBuf {
    PathBuf::from("out")
}
fn d_formats() -> Vec<String> {
    ["snapshots", "ledger", "summary", "verify", "timing"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig {
            directory: d_dir(),
            files: d_formats(),
        }
    }
}

impl OutputsConfig {
    pub fn wants(&self, file: &str) -> bool {
        self.files.iter().any(|f| f == file)
    }
}

/// Parses TOML text, applying `key.path=value` overrides first.
pub fn parse(text: &str, overrides: &[String]) -> Result<ScenarioConfig, CliError> {
    let mut value: toml::Value = toml::from_str(text).map_err(|e| CliError::Config {
        path: String::new(),
        message: e.message().to_string(),
    })?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let mut path = e.path().to_string();
        let inner = e.into_inner().to_string();
        let inner = inner.lines().next().unwrap_or_default().trim().to_string();
        // name the missing key itself, e.g. `problem.beta`
        if let Some(field) = missing_field(&inner) {
            path = if path.is_empty() || path == "." {
                field.to_string()
            } else {
                format!("{path}.{field}")
            };
        }
        CliError::Config { path, message: inner }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn missing_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    rest.split('`').next()
}

pub fn load(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!(
        "cannot read config {}: {e}",
        path.display()
    )))?;
    parse(&text, overrides)
}

/// `a.b.c=value`; the value is parsed as a TOML literal and falls back to a
/// plain string.
pub fn apply_override(root: &mut toml::Value, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{spec}` is not key=value")))?;
    let key = key.trim();
    let parsed: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => t.remove("v").expect("key v was just written"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = root;
    for (i, part) in parts.iter().enumerate() {
        let table = node.as_table_mut().ok_or_else(|| CliError::Config {
            path: parts[..i].join("."),
            message: "not a table".into(),
        })?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Err(CliError::Usage(format!("empty override key in `{spec}`")))
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match (self.grid.n_cells, self.grid.spacing) {
            (Some(_), Some(_)) => {
                return Err(CliError::config("grid", "set exactly one of n_cells and spacing"))
            }
            (None, None) => {
                return Err(CliError::config("grid.n_cells", "missing field `n_cells` (or `spacing`)"))
            }
            _ => {}
        }
        if !(self.stepping.t_end > 0.0) {
            return Err(CliError::config("stepping.t_end", "must be > 0"));
        }
        self.stepping.step_config().validate()?;
        CalibrationConstants::new(self.calibration.c_smoothing, self.calibration.c2_mf)?;
        self.problem_spec()?;
        self.knobs()?;
        self.grid()?;
        Ok(())
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec, CliError> {
        let pr = &self.problem;
        let spec = ProblemSpec::new(
            pr.p,
            pr.beta,
            self.domain(),
            self.source()?,
            self.initial(),
        )?;
        Ok(if pr.singular_absorption {
            spec
        } else {
            spec.without_singular_absorption()
        })
    }

    pub fn domain(&self) -> Domain {
        match self.problem.domain {
            DomainConfig::Dirichlet { half_length } => Domain::Dirichlet { half_length },
            DomainConfig::Cauchy { radius } => Domain::CauchyTruncated { radius },
        }
    }

    pub fn source(&self) -> Result<SourceTerm, CliError> {
        Ok(match &self.problem.source {
            SourceConfig::Zero => SourceTerm::zero(),
            SourceConfig::Power { q } => SourceTerm::power(*q)?,
            SourceConfig::ExpMinusOne => SourceTerm::exp_minus_one(),
            SourceConfig::Constant { c } => SourceTerm::violating_origin(SourceKind::Constant { c: *c })?,
            SourceConfig::Expression {
                expr: text,
                hypotheses,
                q0,
                lipschitz,
            } => {
                let func = expr::compile(text)
                    .map_err(|m| CliError::config("problem.source.expr", m))?;
                let hyps = Hypotheses {
                    h1: hypotheses.contains(&HypothesisTag::H1),
                    h2: hypotheses.contains(&HypothesisTag::H2),
                    h3: hypotheses.contains(&HypothesisTag::H3),
                    global_lipschitz: hypotheses.contains(&HypothesisTag::GlobalLipschitz),
                };
                SourceTerm::new(
                    SourceKind::UserExpression(UserSource::new(text.clone(), Arc::new(func))),
                    hyps,
                    *q0,
                    *lipschitz,
                )?
            }
        })
    }

    pub fn initial(&self) -> InitialData {
        match self.problem.initial.clone() {
            InitialConfig::Bump { radius, peak } => InitialData::Bump { radius, peak },
            InitialConfig::Cosine { peak } => InitialData::Cosine { peak },
            InitialConfig::Constant { level } => InitialData::Constant { level },
            InitialConfig::Spike { mass, width } => InitialData::Spike { mass, width },
            InitialConfig::DecayingTail { peak, core, power } => {
                InitialData::DecayingTail { peak, core, power }
            }
            InitialConfig::Table { nodes, values } => InitialData::Table { nodes, values },
        }
    }

    pub fn constants(&self) -> Result<DerivedConstants, CliError> {
        Ok(self.problem_spec()?.constants())
    }

    pub fn knobs(&self) -> Result<RegularizationKnobs, CliError> {
        self.knobs_at(self.regularization.epsilon, self.regularization.eta)
    }

    pub fn knobs_at(&self, eps: f64, eta: f64) -> Result<RegularizationKnobs, CliError> {
        let consts = self.constants()?;
        Ok(match self.regularization.alpha {
            Some(a) => RegularizationKnobs::new(eps, eta, a, &consts)?,
            None => RegularizationKnobs::with_default_alpha(eps, eta, &consts)?,
        })
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        self.grid_for(self.domain().half_length())
    }

    pub fn grid_for(&self, half_length: f64) -> Result<Grid, CliError> {
        Ok(match (self.grid.n_cells, self.grid.spacing) {
            (Some(n), _) => Grid::new(half_length, n)?,
            (None, Some(h)) => Grid::with_spacing(half_length, h)?,
            (None, None) => unreachable!("validated"),
        })
    }

    pub fn calibration(&self) -> CalibrationConstants {
        CalibrationConstants {
            c_smoothing: self.calibration.c_smoothing,
            c2_mf: self.calibration.c2_mf,
        }
    }

    /// Ladder plan from `[ladder]`, falling back to the data-scaled defaults.
    pub fn ladder_plan(&self) -> Result<LadderPlan, CliError> {
        let spec = self.problem_spec()?;
        let grid = self.grid()?;
        let mut plan = LadderPlan::default_for(&spec, grid.n_cells, self.stepping.t_end);
        plan.step = self.stepping.step_config();
        plan.cauchy_spacing = grid.h;
        plan.alpha = self.regularization.alpha;
        if let Some(l) = &self.ladder {
            if let Some(s) = &l.eps_sequence {
                plan.eps_sequence = s.clone();
            }
            if let Some(s) = &l.eta_sequence {
                plan.eta_sequence = s.clone();
            }
            if let Some(s) = &l.radius_sequence {
                plan.radius_sequence = s.clone();
            }
            plan.probe_times = l.probe_times.clone();
            plan.monotonicity_tol = l.monotonicity_tol;
            plan.radius_tol = l.radius_tol;
            plan.eta_ladder_each_level = l.eta_ladder_each_level;
        }
        plan.validate()?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const CANONICAL: &str = r#"
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
n_cells = 200

[experiment]
kind = "quench"
"#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = parse(CANONICAL, &[]).unwrap();
        assert_eq!(cfg.stepping, SteppingConfig::default());
        assert_eq!(cfg.experiment.kind, Experiment::Quench);
        assert_eq!(cfg.grid().unwrap().n_cells, 200);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn missing_beta_names_the_field_path() {
        let text = CANONICAL.replace("beta = 0.5\n", "");
        match parse(&text, &[]) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "problem.beta"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = CANONICAL.replace("[grid]\n", "[grid]\ncells = 3\n");
        match parse(&text, &[]) {
            Err(CliError::Config { path, message }) => {
                assert!(path.starts_with("grid"), "{path}");
                assert!(message.contains("cells"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_values_carry_their_path() {
        let text = CANONICAL.replace("beta = 0.5", "beta = 1.5");
        match parse(&text, &[]) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "problem.beta"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_rewrite_nested_keys() {
        let cfg = parse(
            CANONICAL,
            &["grid.n_cells=400".into(), "problem.initial.peak=2.0".into(), "experiment.kind=gradient".into()],
        )
        .unwrap();
        assert_eq!(cfg.grid.n_cells, Some(400));
        assert_eq!(cfg.initial(), InitialData::Cosine { peak: 2.0 });
        assert_eq!(cfg.experiment.kind, Experiment::Gradient);
        assert!(matches!(parse(CANONICAL, &["grid".into()]), Err(CliError::Usage(_))));
    }

    #[test]
    fn expression_sources_compile() {
        let text = CANONICAL.replace(
            "source = { kind = \"zero\" }",
            "source = { kind = \"expression\", expr = \"s^2\", hypotheses = [\"h1\", \"h2\"] }",
        );
        let cfg = parse(&text, &[]).unwrap();
        let src = cfg.source().unwrap();
        assert_eq!(src.eval(3.0).unwrap(), 9.0);
        let bad = CANONICAL.replace(
            "source = { kind = \"zero\" }",
            "source = { kind = \"expression\", expr = \"s +\" }",
        );
        match parse(&bad, &[]) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "problem.source.expr"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = parse(CANONICAL, &[]).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(parse(&text, &[]).unwrap(), cfg);
    }
}
