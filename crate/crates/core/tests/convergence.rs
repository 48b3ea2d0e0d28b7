//! Grid convergence against manufactured solutions, and comparison across
//! ordered data.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use quenchlab_core::scheme::detect_quench;
use quenchlab_core::verify::check_support_containment;
use quenchlab_core::analytic::support_bound;
use quenchlab_core::*;

/// `U = (1 + t) cos(pi x / 2)` with the forcing that makes it exact for
/// `u_t - (|u_x|^{p-2} u_x)_x = F`.
fn manufactured_error(p: f64, n: usize, t_end: f64) -> f64 {
    let spec = ProblemSpec::new(
        p,
        0.5,
        Domain::Dirichlet { half_length: 1.0 },
        SourceTerm::zero(),
        InitialData::Cosine { peak: 1.0 },
    )
    .unwrap()
    .without_singular_absorption();
    let knobs = RegularizationKnobs::with_default_alpha(1e-3, 1e-9, &spec.constants()).unwrap();
    let grid = Grid::new(1.0, n).unwrap();
    let exact = |x: f64, t: f64| (1.0 + t) * (FRAC_PI_2 * x).cos();
    let forcing = move |x: f64, t: f64| {
        let a = 1.0 + t;
        let ux = -a * FRAC_PI_2 * (FRAC_PI_2 * x).sin();
        let uxx = -a * FRAC_PI_2 * FRAC_PI_2 * (FRAC_PI_2 * x).cos();
        (FRAC_PI_2 * x).cos() - (p - 1.0) * ux.abs().powf(p - 2.0) * uxx
    };
    // dt tied to h so both refine together
    let cfg = StepConfig {
        dt_max: 0.25 * grid.h,
        stop_on_quench: false,
        ..StepConfig::default()
    };
    let mut scheme = Scheme::new(&spec, knobs, grid, cfg)
        .unwrap()
        .with_forcing(Arc::new(forcing));
    let mut state = scheme.init_state();
    let traj = scheme.run(&mut state, t_end).unwrap();
    let t = traj.end_time();
    grid.nodes()
        .iter()
        .zip(traj.final_values())
        .map(|(x, u)| (u - exact(*x, t)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn manufactured_solution_converges_at_first_order() {
    for p in [3.0, 4.0] {
        let errs: Vec<f64> = [50, 100, 200, 400]
            .iter()
            .map(|&n| manufactured_error(p, n, 0.1))
            .collect();
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate > 0.8, "p = {p}: errors {errs:?}");
        }
        assert!(errs[3] < 5e-3, "p = {p}: {errs:?}");
    }
}

fn quench_time(peak: f64) -> f64 {
    let spec = ProblemSpec::new(
        3.0,
        0.5,
        Domain::Dirichlet { half_length: 1.0 },
        SourceTerm::power(1.0).unwrap(),
        InitialData::Cosine { peak },
    )
    .unwrap();
    let knobs = RegularizationKnobs::with_default_alpha(0.0125, 1.25e-5, &spec.constants()).unwrap();
    let grid = Grid::new(1.0, 100).unwrap();
    let mut scheme = Scheme::new(&spec, knobs, grid, StepConfig::default()).unwrap();
    let mut state = scheme.init_state();
    let traj = scheme.run(&mut state, 2.0).unwrap();
    traj.quench_time
        .or_else(|| detect_quench(&traj, traj.quench_tol))
        .expect("quenches before t = 2")
}

#[test]
fn larger_data_quench_no_earlier() {
    let times: Vec<f64> = [0.25, 0.5, 1.0, 2.0].iter().map(|&m| quench_time(m)).collect();
    assert!(times.windows(2).all(|w| w[0] <= w[1]), "{times:?}");
}

#[test]
fn bump_support_stays_inside_m0_across_p() {
    for p in [2.5, 3.0, 4.0] {
        let spec = ProblemSpec::new(
            p,
            0.5,
            Domain::CauchyTruncated { radius: 3.0 },
            SourceTerm::zero(),
            InitialData::Bump { radius: 1.0, peak: 1.0 },
        )
        .unwrap();
        let consts = spec.constants();
        let knobs = RegularizationKnobs::with_default_alpha(1e-3, 1e-6, &consts).unwrap();
        let grid = Grid::new(3.0, 600).unwrap();
        let mut scheme = Scheme::new(&spec, knobs, grid, StepConfig::default()).unwrap();
        let mut state = scheme.init_state();
        let traj = scheme.run(&mut state, 1.0).unwrap();
        let m0 = support_bound(1.0, 1.0, &consts);
        let check = check_support_containment(&traj, m0, 2.0 * grid.h);
        assert!(check.passed, "p = {p}: {check:?}");
    }
}
