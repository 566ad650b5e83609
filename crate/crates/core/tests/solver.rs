//! End-to-end solver checks: spectral accuracy of high degrees on coarse
//! grids, and the linear-problem link between one step and the stability
//! function.

use radau_dae::analysis::{self, Complex64, ErrorClass, Norm, SampleSet};
use radau_dae::basis;
use radau_dae::dae_model::{register_builtin_problems, DaeProblem, ProblemParams};
use radau_dae::predictor::NewtonOptions;
use radau_dae::stepper::{self, GridSpec};

fn problem(name: &str) -> DaeProblem {
    register_builtin_problems()
        .create(name, &ProblemParams::empty())
        .expect("builtin problem")
}

#[test]
fn high_degree_reaches_double_precision_on_coarse_cells() {
    // Ten cells across 20 oscillation periods: each cell spans two full
    // periods, yet degree 16 resolves the nodes to ~1e-10.
    let problem = problem("demo_index1");
    let (t0, tf) = problem.span();
    let grid = GridSpec::uniform(t0, tf, 10).unwrap();
    let tables = basis::build_tables(16).unwrap();
    let report = stepper::solve(&problem, &grid, 16, &NewtonOptions::default()).unwrap();
    assert!(report.failures().is_empty());
    let errors = analysis::pointwise_errors(&problem, &report, &tables, 4).unwrap();
    let node_u = errors.global(SampleSet::Nodes, ErrorClass::U, Norm::Linf);
    assert!(node_u <= 1e-9, "node error {node_u:e}");
    let node_g = errors.global(SampleSet::Nodes, ErrorClass::G(0), Norm::Linf);
    assert!(node_g <= 1e-10, "constraint residual {node_g:e}");
}

#[test]
fn degrees_above_the_conditioning_cap_still_solve_accurately() {
    // Degree 32 exceeds the conditioning guarantee but must still build and
    // deliver the local solution at round-off level mid-cell.
    let tables = basis::build_tables(32).unwrap();
    assert!(!tables.conditioning_guaranteed());
    assert!(basis::build_tables(30).unwrap().conditioning_guaranteed());

    let problem = problem("demo_index1");
    let (t0, tf) = problem.span();
    let grid = GridSpec::uniform(t0, tf, 10).unwrap();
    let report = stepper::solve(&problem, &grid, 32, &NewtonOptions::default()).unwrap();
    assert!(report.failures().is_empty());

    let mut worst = 0.0f64;
    let mut ue = vec![0.0; problem.d_u()];
    let mut ve = vec![0.0; problem.d_v()];
    for sample in stepper::tabulate_local(&report, &tables, 1) {
        assert!(problem.eval_exact(sample.t, &mut ue, &mut ve));
        for (x, e) in sample.u.iter().zip(&ue) {
            worst = worst.max((x - e).abs());
        }
    }
    assert!(worst <= 1e-13, "mid-cell error {worst:e}");
}

#[test]
fn linear_test_equation_steps_by_the_stability_function() {
    // For u' = z u, one unit step multiplies the state by R(z) exactly, up
    // to the rounding difference between the real and complex solves.
    for z in [-0.5, -2.0, -10.0] {
        let dahlquist = DaeProblem::new(
            "dahlquist",
            "ode",
            1,
            0,
            (0.0, 1.0),
            vec![1.0],
            vec![],
            Box::new(move |u: &[f64], _v: &[f64], _t, out: &mut [f64]| out[0] = z * u[0]),
            Box::new(|_u: &[f64], _v: &[f64], _t, _out: &mut [f64]| {}),
        );
        let grid = GridSpec::uniform(0.0, 1.0, 1).unwrap();
        let opts = NewtonOptions {
            tolerance: Some(1e-14),
            ..NewtonOptions::default()
        };
        for degree in [1usize, 3, 5] {
            let tables = basis::build_tables(degree).unwrap();
            let report = stepper::solve(&dahlquist, &grid, degree, &opts).unwrap();
            assert!(report.failures().is_empty());
            let stepped = report.node_u_at(1)[0];
            let r = analysis::stability_function(&tables, Complex64::new(z, 0.0)).unwrap();
            assert_eq!(r.im, 0.0, "real z keeps R(z) real");
            assert!(
                (stepped - r.re).abs() <= 1e-11,
                "z={z} degree {degree}: step {stepped:e} vs R(z) {:e}",
                r.re
            );
        }
    }
}
