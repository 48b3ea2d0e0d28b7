//! Built-in scenarios: the canonical runs every experiment starts from.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Domain, InitialData, ProblemSpec, RegularizationKnobs, SourceKind, SourceTerm};
use crate::scheme::{Grid, Scheme, StepConfig, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Quench,
    Propagation,
    Iss,
    Maximal,
    Gradient,
    Smoothing,
    Nonexistence,
    Sweep,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Quench => "quench",
            Experiment::Propagation => "propagation",
            Experiment::Iss => "iss",
            Experiment::Maximal => "maximal",
            Experiment::Gradient => "gradient",
            Experiment::Smoothing => "smoothing",
            Experiment::Nonexistence => "nonexistence",
            Experiment::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub experiment: Experiment,
    pub spec: ProblemSpec,
    pub knobs: RegularizationKnobs,
    pub grid: Grid,
    pub step: StepConfig,
    pub t_end: f64,
}

impl Scenario {
    pub fn scheme(&self) -> Result<Scheme> {
        Scheme::new(&self.spec, self.knobs, self.grid, self.step)
    }

    pub fn run(&self) -> Result<Trajectory> {
        let mut scheme = self.scheme()?;
        let mut state = scheme.init_state();
        scheme.run(&mut state, self.t_end)
    }
}

fn knobs(spec: &ProblemSpec, eps: f64, eta: f64) -> Result<RegularizationKnobs> {
    RegularizationKnobs::with_default_alpha(eps, eta, &spec.constants())
}

/// `p = 3`, `beta = 1/2`, `u0 = cos(pi x / 2)` on `(-1, 1)`, `f = 0`.
pub fn canonical_spec() -> ProblemSpec {
    ProblemSpec::new(
        3.0,
        0.5,
        Domain::Dirichlet { half_length: 1.0 },
        SourceTerm::zero(),
        InitialData::Cosine { peak: 1.0 },
    )
    .expect("canonical parameters are admissible")
}

pub fn canonical_quench(n_cells: usize) -> Result<Scenario> {
    let spec = canonical_spec();
    Ok(Scenario {
        name: "canonical_quench".to_string(),
        description: "cosine data on (-1,1), f = 0, quenching run".to_string(),
        experiment: Experiment::Quench,
        knobs: knobs(&spec, 0.0125, 1.25e-5)?,
        grid: Grid::new(1.0, n_cells)?,
        step: StepConfig {
            stop_on_quench: true,
            ..StepConfig::default()
        },
        t_end: 0.75,
        spec,
    })
}

pub fn propagation() -> Result<Scenario> {
    let spec = ProblemSpec::new(
        3.0,
        0.5,
        Domain::CauchyTruncated { radius: 4.0 },
        SourceTerm::zero(),
        InitialData::Bump { radius: 1.0, peak: 1.0 },
    )?;
    Ok(Scenario {
        name: "propagation".to_string(),
        description: "compact bump on the truncated line, f = 0".to_string(),
        experiment: Experiment::Propagation,
        knobs: knobs(&spec, 1e-3, 1e-6)?,
        grid: Grid::new(4.0, 2000)?,
        step: StepConfig {
            stop_on_quench: true,
            ..StepConfig::default()
        },
        t_end: 0.7,
        spec,
    })
}

/// Slowly decaying data with a sublinear source on the truncated line.
pub fn iss(radius: f64) -> Result<Scenario> {
    let spec = ProblemSpec::new(
        3.0,
        0.5,
        Domain::CauchyTruncated { radius },
        SourceTerm::power(0.5)?,
        InitialData::DecayingTail {
            peak: 1.0,
            core: 1.0,
            power: 1.0,
        },
    )?;
    Ok(Scenario {
        name: "iss".to_string(),
        description: "tail min(1, 1/|x|), f = s^0.5".to_string(),
        experiment: Experiment::Iss,
        knobs: knobs(&spec, 1e-3, 1e-6)?,
        grid: Grid::with_spacing(radius, 0.01)?,
        step: StepConfig {
            dt_max: 1e-3,
            stop_on_quench: false,
            ..StepConfig::default()
        },
        t_end: 0.1,
        spec,
    })
}

/// Narrow spike of the given mass.
pub fn smoothing(mass: f64) -> Result<Scenario> {
    let spec = ProblemSpec::new(
        3.0,
        0.5,
        Domain::Dirichlet { half_length: 1.0 },
        SourceTerm::zero(),
        InitialData::Spike { mass, width: 0.02 },
    )?;
    Ok(Scenario {
        name: "smoothing".to_string(),
        description: "spike of width 0.02, short times".to_string(),
        experiment: Experiment::Smoothing,
        knobs: knobs(&spec, 1e-3, 1e-6)?,
        grid: Grid::new(1.0, 1000)?,
        step: StepConfig {
            dt_max: 1e-5,
            stop_on_quench: false,
            ..StepConfig::default()
        },
        t_end: 1e-2,
        spec,
    })
}

pub fn nonexistence(c: f64) -> Result<Scenario> {
    let spec = ProblemSpec::new(
        3.0,
        0.5,
        Domain::Dirichlet { half_length: 1.0 },
        SourceTerm::violating_origin(SourceKind::Constant { c })?,
        InitialData::Cosine { peak: 0.5 },
    )?;
    Ok(Scenario {
        name: "nonexistence".to_string(),
        description: "constant source f = c > 0".to_string(),
        experiment: Experiment::Nonexistence,
        knobs: knobs(&spec, 0.0125, 1.25e-5)?,
        grid: Grid::new(1.0, 200)?,
        step: StepConfig::default(),
        t_end: 1.0,
        spec,
    })
}

/// Canonical data with the source `s^q`.
pub fn power_source(q: f64) -> Result<Scenario> {
    let spec = canonical_spec();
    let spec = ProblemSpec::new(
        spec.p(),
        spec.beta(),
        spec.domain(),
        SourceTerm::power(q)?,
        spec.initial().clone(),
    )?;
    Ok(Scenario {
        name: "power_source".to_string(),
        description: "cosine data with f = s^q".to_string(),
        experiment: Experiment::Quench,
        knobs: knobs(&spec, 0.0125, 1.25e-5)?,
        grid: Grid::new(1.0, 400)?,
        step: StepConfig::default(),
        t_end: 0.75,
        spec,
    })
}

pub fn exp_source() -> Result<Scenario> {
    let base = canonical_spec();
    let spec = ProblemSpec::new(
        base.p(),
        base.beta(),
        base.domain(),
        SourceTerm::exp_minus_one(),
        base.initial().clone(),
    )?;
    Ok(Scenario {
        name: "exp_source".to_string(),
        description: "cosine data with f = e^s - 1".to_string(),
        experiment: Experiment::Quench,
        knobs: knobs(&spec, 0.0125, 1.25e-5)?,
        grid: Grid::new(1.0, 400)?,
        step: StepConfig::default(),
        t_end: 0.75,
        spec,
    })
}

/// Every built-in scenario at its default size.
pub fn catalog() -> Result<Vec<Scenario>> {
    Ok(vec![
        canonical_quench(800)?,
        propagation()?,
        iss(8.0)?,
        smoothing(1.0)?,
        power_source(1.0)?,
        exp_source()?,
        nonexistence(0.1)?,
    ])
}

pub fn by_name(name: &str) -> Result<Scenario> {
    catalog()?
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::invalid("scenario", alloc::format!("unknown scenario `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_names_are_unique() {
        let cat = catalog().unwrap();
        for (i, a) in cat.iter().enumerate() {
            assert!(cat[i + 1..].iter().all(|b| b.name != a.name));
            assert!(a.scheme().is_ok(), "{}", a.name);
        }
        assert!(by_name("propagation").is_ok());
        assert!(by_name("nope").is_err());
    }

    #[test]
    fn scenario_grids_match_domains() {
        for s in catalog().unwrap() {
            assert_eq!(s.grid.half_length, s.spec.domain().half_length(), "{}", s.name);
        }
        assert_eq!(iss(16.0).unwrap().grid.n_cells, 3200);
    }
}
