//! Error measurement and stability diagnostics.
//!
//! [`pointwise_errors`] compares a solve report against the problem's
//! reference solution at grid nodes and at midpoint sub-nodes inside each
//! completed cell, tracking constraint residuals per labelled constraint.
//! [`global_error`] reduces a weighted sample set to a discrete norm and
//! [`fit_order`] turns (step, error) pairs into a least-squares convergence
//! slope with a precision-floor filter.  [`stability_function`] evaluates
//! the amplification factor R(z) of the scheme applied to u' = z u over one
//! unit step, and [`stability_scan`] rasters |R| over a rectangle of the
//! complex plane.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

pub use num_complex::Complex64;
// Float supplies libm-backed f64 math in no_std builds; std test builds
// resolve the same methods inherently, leaving the import unused there.
#[allow(unused_imports)]
use num_traits::Float;

use crate::basis::BasisTables;
use crate::dae_model::DaeProblem;
use crate::linalg::{complex_solve, LinalgError};
use crate::stepper::{self, SolveReport};

/// Analysis failures.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisError {
    /// The problem carries no reference solution to compare against.
    NoExactSolution,
    /// Fewer than two usable (step, error) samples remain after filtering.
    InsufficientData {
        /// Usable samples (above the floor, distinct steps).
        available: usize,
    },
}

impl core::fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            AnalysisError::NoExactSolution => {
                write!(f, "problem provides no reference solution")
            }
            AnalysisError::InsufficientData { available } => write!(
                f,
                "order fit needs at least 2 usable samples, found {available}"
            ),
        }
    }
}

impl core::error::Error for AnalysisError {}

/// Discrete norm over a weighted error sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    /// Weighted sum of magnitudes.
    L1,
    /// Square root of the weighted sum of squares.
    L2,
    /// Largest magnitude; weights are ignored.
    Linf,
    /// Magnitude of the last sample, the value at the end of the run.
    /// Meaningful for node sample sets, whose last sample sits at t_f.
    Final,
}

impl Norm {
    /// Stable text name used in CSV output.
    pub fn as_str(self) -> &'static str {
        match self {
            Norm::L1 => "L1",
            Norm::L2 => "L2",
            Norm::Linf => "Linf",
            Norm::Final => "final",
        }
    }
}

/// Which sample set of a [`PointwiseErrors`] to reduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSet {
    /// Errors at grid nodes.
    Nodes,
    /// Errors at the midpoint sub-nodes inside each cell.
    Local,
}

/// Which error component of a sample to reduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Differential state error.
    U,
    /// Algebraic state error.
    V,
    /// Residual of the labelled constraint at this index, in the order
    /// reported by [`PointwiseErrors::g_labels`].
    G(usize),
}

/// Errors at one sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSample {
    /// Sample time.
    pub t: f64,
    /// max-abs error over the differential components.
    pub eps_u: f64,
    /// max-abs error over the algebraic components; 0 when there are none.
    pub eps_v: f64,
    /// max-abs residual of each labelled constraint, evaluated on the
    /// numerical solution.
    pub eps_g: Vec<f64>,
}

/// Pointwise error tables for one solve, with quadrature weights.
///
/// Node sample n carries the width of the cell to its left as weight
/// (t_0 carries 0), local samples carry cell width / m; either weighting
/// sums to the covered span, so a constant error of size c reduces to
/// c * (t_f - t_0) in L1.
#[derive(Debug, Clone)]
pub struct PointwiseErrors {
    g_labels: Vec<String>,
    node_samples: Vec<ErrorSample>,
    node_weights: Vec<f64>,
    local_samples: Vec<ErrorSample>,
    local_weights: Vec<f64>,
    reference_inf: f64,
}

impl PointwiseErrors {
    /// Constraint labels, enforced constraint first, in `eps_g` order.
    pub fn g_labels(&self) -> &[String] {
        &self.g_labels
    }

    /// Errors at grid nodes, one per completed node time.
    pub fn node_samples(&self) -> &[ErrorSample] {
        &self.node_samples
    }

    /// Quadrature weight of each node sample.
    pub fn node_weights(&self) -> &[f64] {
        &self.node_weights
    }

    /// Errors at the interior sub-nodes, cell by cell.
    pub fn local_samples(&self) -> &[ErrorSample] {
        &self.local_samples
    }

    /// Quadrature weight of each local sample.
    pub fn local_weights(&self) -> &[f64] {
        &self.local_weights
    }

    /// max-abs of the reference solution over all sampled times, the scale
    /// entering [`PointwiseErrors::precision_floor`].
    pub fn reference_inf_norm(&self) -> f64 {
        self.reference_inf
    }

    /// Smallest error magnitude still considered resolved in double
    /// precision: 1e-12 * (1 + reference scale).
    pub fn precision_floor(&self) -> f64 {
        1e-12 * (1.0 + self.reference_inf)
    }

    /// Reduces one error class over one sample set.
    pub fn global(&self, set: SampleSet, class: ErrorClass, norm: Norm) -> f64 {
        let (samples, weights) = match set {
            SampleSet::Nodes => (&self.node_samples, &self.node_weights),
            SampleSet::Local => (&self.local_samples, &self.local_weights),
        };
        let values: Vec<f64> = samples
            .iter()
            .map(|s| match class {
                ErrorClass::U => s.eps_u,
                ErrorClass::V => s.eps_v,
                ErrorClass::G(k) => s.eps_g[k],
            })
            .collect();
        global_error(weights, &values, norm)
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, &v| m.max(v.abs()))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (&x, &y)| m.max((x - y).abs()))
}

/// Residual magnitude of every labelled constraint at one state.
/// `slots[k]` is `None` for the enforced constraint, `Some(i)` for extra i.
fn constraint_residuals(
    problem: &DaeProblem,
    u: &[f64],
    v: &[f64],
    t: f64,
    slots: &[Option<usize>],
) -> Vec<f64> {
    slots
        .iter()
        .map(|slot| match slot {
            None => {
                let mut buf = vec![0.0; problem.d_v()];
                problem.eval_g(u, v, t, &mut buf);
                max_abs(&buf)
            }
            Some(i) => {
                let extra = &problem.extra_constraints()[*i];
                let mut buf = vec![0.0; extra.dim()];
                extra.eval(u, v, t, &mut buf);
                max_abs(&buf)
            }
        })
        .collect()
}

/// Compares a report against the problem's reference solution.
///
/// Produces one sample per completed node time and `m_subnodes` samples per
/// completed cell at tau = (j + 1/2)/m.  Constraint residuals are evaluated
/// on the numerical solution, the enforced constraint first and then every
/// extra constraint; a problem with no algebraic part reports only the
/// extras.  Fails when the problem has no reference solution.
pub fn pointwise_errors(
    problem: &DaeProblem,
    report: &SolveReport,
    tables: &BasisTables,
    m_subnodes: usize,
) -> Result<PointwiseErrors, AnalysisError> {
    if !problem.has_exact() {
        return Err(AnalysisError::NoExactSolution);
    }
    let mut slots: Vec<Option<usize>> = Vec::new();
    if problem.d_v() > 0 {
        slots.push(None);
    }
    for i in 0..problem.extra_constraints().len() {
        slots.push(Some(i));
    }
    let mut g_labels: Vec<String> = Vec::with_capacity(slots.len());
    for slot in &slots {
        match slot {
            None => g_labels.push(problem.enforced_label().to_string()),
            Some(i) => g_labels.push(problem.extra_constraints()[*i].label().to_string()),
        }
    }

    let grid = report.grid();
    let completed = report.completed_cells();
    let mut reference_inf: f64 = 0.0;

    let mut node_samples = Vec::with_capacity(completed + 1);
    let mut node_weights = Vec::with_capacity(completed + 1);
    for n in 0..=completed {
        let t = grid.node_times()[n];
        let (ue, ve) = problem.exact(t).expect("reference checked above");
        reference_inf = reference_inf.max(max_abs(&ue)).max(max_abs(&ve));
        let u = report.node_u_at(n);
        let v = report.node_v_at(n);
        node_samples.push(ErrorSample {
            t,
            eps_u: max_abs_diff(u, &ue),
            eps_v: max_abs_diff(v, &ve),
            eps_g: constraint_residuals(problem, u, v, t, &slots),
        });
        node_weights.push(if n == 0 { 0.0 } else { grid.cell_dt(n - 1) });
    }

    let locals = stepper::tabulate_local(report, tables, m_subnodes);
    let mut local_samples = Vec::with_capacity(locals.len());
    let mut local_weights = Vec::with_capacity(locals.len());
    for (k, sample) in locals.iter().enumerate() {
        let (ue, ve) = problem.exact(sample.t).expect("reference checked above");
        reference_inf = reference_inf.max(max_abs(&ue)).max(max_abs(&ve));
        local_samples.push(ErrorSample {
            t: sample.t,
            eps_u: max_abs_diff(&sample.u, &ue),
            eps_v: max_abs_diff(&sample.v, &ve),
            eps_g: constraint_residuals(problem, &sample.u, &sample.v, sample.t, &slots),
        });
        local_weights.push(grid.cell_dt(k / m_subnodes) / m_subnodes as f64);
    }

    Ok(PointwiseErrors {
        g_labels,
        node_samples,
        node_weights,
        local_samples,
        local_weights,
        reference_inf,
    })
}

/// Reduces weighted samples to a single number.  `weights` and `values`
/// run in time order and must have equal length; `Final` takes the last
/// value, the other norms discrete weighted sums.
///
/// # Panics
/// Panics on a length mismatch or an empty sample set.
pub fn global_error(weights: &[f64], values: &[f64], norm: Norm) -> f64 {
    assert_eq!(weights.len(), values.len(), "one weight per sample");
    assert!(!values.is_empty(), "global error of an empty sample set");
    match norm {
        Norm::L1 => weights
            .iter()
            .zip(values)
            .map(|(&w, &v)| w * v.abs())
            .sum(),
        Norm::L2 => weights
            .iter()
            .zip(values)
            .map(|(&w, &v)| w * v * v)
            .sum::<f64>()
            .sqrt(),
        Norm::Linf => max_abs(values),
        Norm::Final => values[values.len() - 1].abs(),
    }
}

/// One fitted convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    /// Norm the error samples were measured in.
    pub norm: Norm,
    /// The (step, error) samples as given, including filtered ones.
    pub samples: Vec<(f64, f64)>,
    /// Least-squares slope of ln(error) against ln(step).
    pub fitted_p: f64,
    /// Root-mean-square residual of the fit in log space.
    pub fit_residual: f64,
    /// Samples that entered the fit.
    pub used: usize,
    /// Samples dropped for sitting at or below the precision floor.
    pub floor_filtered: usize,
}

/// Fits a convergence order to (step, error) samples.
///
/// Errors at or below `floor` are treated as noise and dropped before
/// fitting; two samples on an exact power law recover its exponent exactly.
/// Needs at least two retained samples with distinct steps.
pub fn fit_order(
    norm: Norm,
    samples: &[(f64, f64)],
    floor: f64,
) -> Result<ConvergenceStudy, AnalysisError> {
    let used_points: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(_, e)| e > floor)
        .map(|&(dt, e)| (dt.ln(), e.ln()))
        .collect();
    let floor_filtered = samples.len() - used_points.len();
    if used_points.len() < 2 {
        return Err(AnalysisError::InsufficientData {
            available: used_points.len(),
        });
    }
    let n = used_points.len() as f64;
    let x_bar = used_points.iter().map(|&(x, _)| x).sum::<f64>() / n;
    let y_bar = used_points.iter().map(|&(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = used_points.iter().map(|&(x, _)| (x - x_bar) * (x - x_bar)).sum();
    if sxx == 0.0 {
        // All retained steps identical: no slope information.
        return Err(AnalysisError::InsufficientData { available: 1 });
    }
    let sxy: f64 = used_points
        .iter()
        .map(|&(x, y)| (x - x_bar) * (y - y_bar))
        .sum();
    let fitted_p = sxy / sxx;
    let intercept = y_bar - fitted_p * x_bar;
    let ss_res: f64 = used_points
        .iter()
        .map(|&(x, y)| {
            let r = y - (intercept + fitted_p * x);
            r * r
        })
        .sum();
    Ok(ConvergenceStudy {
        norm,
        samples: samples.to_vec(),
        fitted_p,
        fit_residual: (ss_res / n).sqrt(),
        used: used_points.len(),
        floor_filtered,
    })
}

/// Amplification factor R(z) = 1 + z w^T (I - z A)^{-1} 1 of one step of
/// the scheme applied to u' = z u with unit step.  R(0) = 1 exactly; the
/// degree-0 scheme gives 1/(1 - z).  Fails only where I - z A is singular,
/// at the poles of R.
pub fn stability_function(tables: &BasisTables, z: Complex64) -> Result<Complex64, LinalgError> {
    let s = tables.n_nodes();
    let a = tables.a_matrix();
    let mut matrix = vec![Complex64::new(0.0, 0.0); s * s];
    for i in 0..s {
        for j in 0..s {
            let mut entry = -z * a.get(i, j);
            if i == j {
                entry += 1.0;
            }
            matrix[i * s + j] = entry;
        }
    }
    let rhs = vec![Complex64::new(1.0, 0.0); s];
    let x = complex_solve(&matrix, &rhs)?;
    let mut dot = Complex64::new(0.0, 0.0);
    for (w, xi) in tables.weights().iter().zip(&x) {
        dot += *w * *xi;
    }
    Ok(Complex64::new(1.0, 0.0) + z * dot)
}

/// |R| rastered over a rectangle of the complex plane.
#[derive(Debug, Clone)]
pub struct StabilityScan {
    re: Vec<f64>,
    im: Vec<f64>,
    magnitudes: Vec<f64>,
    max_magnitude: f64,
}

impl StabilityScan {
    /// Sampled real parts, ascending.
    pub fn re_values(&self) -> &[f64] {
        &self.re
    }

    /// Sampled imaginary parts, ascending.
    pub fn im_values(&self) -> &[f64] {
        &self.im
    }

    /// |R| at (re index i, im index j).
    pub fn magnitude(&self, i: usize, j: usize) -> f64 {
        self.magnitudes[j * self.re.len() + i]
    }

    /// Row-major magnitudes, imaginary index outer, real index inner.
    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    /// Largest sampled |R|; infinite if the rectangle contains a pole.
    pub fn max_magnitude(&self) -> f64 {
        self.max_magnitude
    }
}

/// Rasters |R| over `re_range` x `im_range` at `resolution` = (n_re, n_im)
/// samples per axis.  The real axis is sampled half-open, re_0 + i * step
/// for i < n_re, so a range ending at 0 never touches the imaginary axis;
/// the imaginary axis is sampled inclusively at both ends.  A pole inside
/// the rectangle records an infinite magnitude rather than failing.
///
/// # Panics
/// Panics if either resolution is below 2.
pub fn stability_scan(
    tables: &BasisTables,
    re_range: (f64, f64),
    im_range: (f64, f64),
    resolution: (usize, usize),
) -> StabilityScan {
    let (n_re, n_im) = resolution;
    assert!(n_re >= 2 && n_im >= 2, "scan needs at least 2 samples per axis");
    let re_step = (re_range.1 - re_range.0) / n_re as f64;
    let re: Vec<f64> = (0..n_re).map(|i| re_range.0 + i as f64 * re_step).collect();
    let im_step = (im_range.1 - im_range.0) / (n_im - 1) as f64;
    let mut im: Vec<f64> = (0..n_im).map(|j| im_range.0 + j as f64 * im_step).collect();
    im[n_im - 1] = im_range.1;
    let mut magnitudes = Vec::with_capacity(n_re * n_im);
    let mut max_magnitude: f64 = 0.0;
    for &b in &im {
        for &a in &re {
            let mag = match stability_function(tables, Complex64::new(a, b)) {
                Ok(r) => r.norm(),
                Err(_) => f64::INFINITY,
            };
            max_magnitude = max_magnitude.max(mag);
            magnitudes.push(mag);
        }
    }
    StabilityScan {
        re,
        im,
        magnitudes,
        max_magnitude,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis;
    use crate::dae_model::{register_builtin_problems, DaeProblem, ProblemParams};
    use crate::predictor::NewtonOptions;
    use crate::stepper::GridSpec;
    use alloc::boxed::Box;
    use core::f64::consts::PI;

    fn tables(n: usize) -> BasisTables {
        basis::build_tables(n).expect("degree in range")
    }

    #[test]
    fn norms_match_hand_sums() {
        let w = [0.5, 0.5];
        let v = [1.0, 3.0];
        assert_eq!(global_error(&w, &v, Norm::L1), 2.0);
        assert!((global_error(&w, &v, Norm::L2) - 5.0_f64.sqrt()).abs() < 1e-15);
        assert_eq!(global_error(&w, &v, Norm::Linf), 3.0);
        assert_eq!(global_error(&w, &v, Norm::Final), 3.0);

        // Constant error c over total span T: L1 = c T, L2 = c sqrt(T).
        let w = [0.25; 8];
        let v = [0.25; 8];
        assert!((global_error(&w, &v, Norm::L1) - 0.5).abs() < 1e-15);
        assert!((global_error(&w, &v, Norm::L2) - 0.25 * 2.0_f64.sqrt()).abs() < 1e-15);

        assert!((global_error(&[0.7], &[2.0], Norm::L1) - 1.4).abs() < 1e-15);
        assert_eq!(global_error(&[0.7], &[-2.0], Norm::Final), 2.0);
    }

    #[test]
    fn order_fit_recovers_exact_power_law() {
        let samples = [(0.1, 1e-3), (0.05, 1.25e-4)];
        let study = fit_order(Norm::Linf, &samples, 0.0).expect("two usable samples");
        assert!((study.fitted_p - 3.0).abs() < 1e-12, "p = {}", study.fitted_p);
        assert!(study.fit_residual < 1e-12);
        assert_eq!(study.used, 2);
        assert_eq!(study.floor_filtered, 0);
        assert_eq!(study.samples.len(), 2);
    }

    #[test]
    fn order_fit_filters_samples_below_floor() {
        let samples = [(0.1, 1e-3), (0.05, 1.25e-4), (0.025, 1e-14)];
        let study = fit_order(Norm::L2, &samples, 1e-12).expect("two survive the floor");
        assert_eq!(study.floor_filtered, 1);
        assert_eq!(study.used, 2);
        assert!((study.fitted_p - 3.0).abs() < 1e-12);

        // A floor that leaves a single sample is not enough to fit.
        let err = fit_order(Norm::L2, &samples, 1.3e-4).unwrap_err();
        assert_eq!(err, AnalysisError::InsufficientData { available: 1 });
    }

    #[test]
    fn order_fit_tolerates_measurement_noise() {
        let noise = [1.01, 0.992, 1.008, 0.995, 1.006, 0.99];
        let samples: Vec<(f64, f64)> = (0..6)
            .map(|k| {
                let dt = 0.1 * 0.5_f64.powi(k as i32);
                (dt, dt.powi(5) * noise[k])
            })
            .collect();
        let study = fit_order(Norm::L1, &samples, 0.0).expect("all samples usable");
        assert!(
            (study.fitted_p - 5.0).abs() < 0.1,
            "p = {} strays from 5",
            study.fitted_p
        );
        assert!(study.fit_residual < 0.02);
    }

    #[test]
    fn order_fit_requires_two_usable_samples() {
        assert_eq!(
            fit_order(Norm::L1, &[], 0.0).unwrap_err(),
            AnalysisError::InsufficientData { available: 0 }
        );
        assert_eq!(
            fit_order(Norm::L1, &[(0.1, 1e-3)], 0.0).unwrap_err(),
            AnalysisError::InsufficientData { available: 1 }
        );
        // Identical steps carry no slope information.
        assert_eq!(
            fit_order(Norm::L1, &[(0.1, 1e-3), (0.1, 2e-3)], 0.0).unwrap_err(),
            AnalysisError::InsufficientData { available: 1 }
        );
    }

    #[test]
    fn stability_function_matches_closed_forms() {
        // R(0) = 1 exactly for every degree.
        for n in [0, 1, 3] {
            let r = stability_function(&tables(n), Complex64::new(0.0, 0.0)).unwrap();
            assert_eq!(r, Complex64::new(1.0, 0.0));
        }

        // Degree 0 is the backward Euler factor 1/(1 - z).
        let t0 = tables(0);
        for z in [
            Complex64::new(-2.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-3.0, 4.0),
        ] {
            let r = stability_function(&t0, z).unwrap();
            let want = Complex64::new(1.0, 0.0) / (Complex64::new(1.0, 0.0) - z);
            assert!((r - want).norm() < 1e-14, "z = {z}, r = {r}");
        }

        // Degree 1: R(-1) = 4/11 and the rational closed form
        // (1 + z/3) / (1 - 2z/3 + z^2/6).
        let t1 = tables(1);
        let r = stability_function(&t1, Complex64::new(-1.0, 0.0)).unwrap();
        assert!((r - Complex64::new(4.0 / 11.0, 0.0)).norm() < 1e-14);
        for z in [
            Complex64::new(-1.0, 0.0),
            Complex64::new(2.0, 3.0),
            Complex64::new(-5.0, 1.0),
            Complex64::new(0.3, -0.7),
        ] {
            let r = stability_function(&t1, z).unwrap();
            let one = Complex64::new(1.0, 0.0);
            let want = (one + z / 3.0) / (one - 2.0 * z / 3.0 + z * z / 6.0);
            assert!((r - want).norm() < 1e-12 * (1.0 + want.norm()), "z = {z}");
        }
    }

    #[test]
    fn stability_is_conjugate_symmetric() {
        for n in [1, 3] {
            let t = tables(n);
            for z in [
                Complex64::new(-3.0, 4.0),
                Complex64::new(-10.0, 50.0),
                Complex64::new(0.5, 2.0),
                Complex64::new(-100.0, 100.0),
            ] {
                let r = stability_function(&t, z).unwrap();
                let rc = stability_function(&t, z.conj()).unwrap();
                assert!((rc - r.conj()).norm() < 1e-13 * (1.0 + r.norm()));
            }
        }
    }

    #[test]
    fn stability_matches_exponential_to_superconvergent_order() {
        // |R(z) - e^z| ~ |z|^(2N + 2) near the origin; fit the slope on a
        // dyadic ladder along a fixed direction.  Degree 2 stops at three
        // rungs to stay above double-precision noise.
        let direction = Complex64::new(0.5, 3.0_f64.sqrt() / 2.0);
        for (n, rungs) in [(1usize, 5usize), (2, 3)] {
            let t = tables(n);
            let samples: Vec<(f64, f64)> = (0..rungs)
                .map(|k| {
                    let radius = 0.1 * 0.5_f64.powi(k as i32);
                    let z = direction * radius;
                    let defect = (stability_function(&t, z).unwrap() - z.exp()).norm();
                    (radius, defect)
                })
                .collect();
            let study = fit_order(Norm::Linf, &samples, 0.0).expect("defects above noise");
            let want = (2 * n + 2) as f64;
            assert!(
                (study.fitted_p - want).abs() < 0.4,
                "degree {n}: slope {} wants {want}",
                study.fitted_p
            );
        }
    }

    #[test]
    fn amplification_exceeds_one_on_positive_real_axis() {
        for n in [1, 2, 4] {
            let r = stability_function(&tables(n), Complex64::new(0.1, 0.0)).unwrap();
            assert!(r.norm() > 1.0, "degree {n}: |R(0.1)| = {}", r.norm());
        }
    }

    #[test]
    fn left_half_plane_raster_stays_bounded() {
        let t = tables(1);
        let scan = stability_scan(&t, (-100.0, 0.0), (-100.0, 100.0), (60, 61));
        assert!(scan.max_magnitude() <= 1.0 + 1e-12, "max = {}", scan.max_magnitude());
        assert_eq!(scan.re_values().len(), 60);
        assert_eq!(scan.im_values().len(), 61);
        assert_eq!(scan.magnitudes().len(), 60 * 61);
        // Half-open real axis: the boundary Re = 0 is never sampled.
        assert_eq!(scan.re_values()[0], -100.0);
        assert!(*scan.re_values().last().unwrap() < 0.0);
        assert_eq!(scan.im_values()[0], -100.0);
        assert_eq!(*scan.im_values().last().unwrap(), 100.0);
        // Indexing: corner (0, 0) is z = -100 - 100i.
        let corner = stability_function(&t, Complex64::new(-100.0, -100.0)).unwrap();
        assert_eq!(scan.magnitude(0, 0), corner.norm());
    }

    #[test]
    fn stiff_decay_along_negative_real_axis() {
        // R ~ c/z far out on the negative real axis, so one decade of z
        // costs one decade of |R|.
        for n in [1, 2, 4] {
            let t = tables(n);
            let far = stability_function(&t, Complex64::new(-1e6, 0.0)).unwrap().norm();
            let near = stability_function(&t, Complex64::new(-1e5, 0.0)).unwrap().norm();
            let ratio = far / near;
            assert!(
                (0.08..=0.12).contains(&ratio),
                "degree {n}: decade ratio {ratio}"
            );
        }
    }

    #[test]
    fn pointwise_errors_vanish_when_reference_equals_numerical() {
        // Frozen dynamics: F = 0 and g pins v, so the numerical solution is
        // the initial state bitwise and the reference matches it.
        let problem = DaeProblem::new(
            "frozen",
            "index-1",
            2,
            1,
            (0.0, 1.0),
            vec![3.0, -1.25],
            vec![2.0],
            Box::new(|_u, _v, _t, out: &mut [f64]| {
                out[0] = 0.0;
                out[1] = 0.0;
            }),
            Box::new(|_u, v, _t, out: &mut [f64]| {
                out[0] = v[0] - 2.0;
            }),
        )
        .with_exact(Box::new(|_t, u: &mut [f64], v: &mut [f64]| {
            u[0] = 3.0;
            u[1] = -1.25;
            v[0] = 2.0;
        }));
        let grid = GridSpec::uniform(0.0, 1.0, 4).unwrap();
        let t = tables(2);
        let report = stepper::solve(&problem, &grid, 2, &NewtonOptions::default()).unwrap();
        assert!(report.failures().is_empty());
        let errors = pointwise_errors(&problem, &report, &t, 3).unwrap();

        assert_eq!(errors.g_labels(), &["g".to_string()]);
        assert_eq!(errors.node_samples().len(), 5);
        assert_eq!(errors.local_samples().len(), 12);
        for s in errors.node_samples() {
            assert_eq!(s.eps_u, 0.0);
            assert_eq!(s.eps_v, 0.0);
            assert_eq!(s.eps_g[0], 0.0);
        }
        // Interior samples re-evaluate the basis; constant reproduction is
        // exact only up to rounding in the barycentric weights.
        for s in errors.local_samples() {
            assert!(s.eps_u <= 1e-12);
            assert!(s.eps_v <= 1e-12);
            assert!(s.eps_g[0] <= 1e-12);
        }
        assert_eq!(errors.node_weights()[0], 0.0);
        for &w in &errors.node_weights()[1..] {
            assert_eq!(w, 0.25);
        }
        for &w in errors.local_weights() {
            assert!((w - 0.25 / 3.0).abs() < 1e-16);
        }
        assert_eq!(errors.global(SampleSet::Nodes, ErrorClass::U, Norm::L1), 0.0);
        assert_eq!(errors.reference_inf_norm(), 3.0);
        assert!((errors.precision_floor() - 4e-12).abs() < 1e-27);
    }

    #[test]
    fn pointwise_errors_track_a_known_run() {
        // Two-period cells over ten oscillation periods: degree 8 sits in
        // the visibly dissipative regime, degree 16 resolves the solution
        // with node errors around 1e-11..1e-10 and a node/local accuracy
        // gap of several orders.
        let registry = register_builtin_problems();
        let problem = registry.create("demo_index1", &ProblemParams::empty()).unwrap();
        let grid = GridSpec::uniform(0.0, 40.0 * PI, 10).unwrap();

        let t8 = tables(8);
        let coarse = stepper::solve(&problem, &grid, 8, &NewtonOptions::default()).unwrap();
        assert!(coarse.failures().is_empty());
        let coarse_errors = pointwise_errors(&problem, &coarse, &t8, 4).unwrap();
        let coarse_u = coarse_errors.global(SampleSet::Nodes, ErrorClass::U, Norm::Linf);
        assert!(
            (1e-2..=1.5).contains(&coarse_u),
            "degree 8 should dissipate visibly, node error {coarse_u}"
        );

        let t16 = tables(16);
        let report = stepper::solve(&problem, &grid, 16, &NewtonOptions::default()).unwrap();
        assert!(report.failures().is_empty());
        let errors = pointwise_errors(&problem, &report, &t16, 4).unwrap();

        // Labels: enforced constraint first.
        assert_eq!(errors.g_labels()[0], "g1");
        let node_u = errors.global(SampleSet::Nodes, ErrorClass::U, Norm::Linf);
        assert!(
            (1e-13..=1e-8).contains(&node_u),
            "node error {node_u} outside the resolvable band"
        );
        // The scheme takes its node state from the last collocation node,
        // so the enforced constraint holds there to Newton tolerance.
        let node_g = errors.global(SampleSet::Nodes, ErrorClass::G(0), Norm::Linf);
        assert!(node_g <= 1e-11, "node constraint residual {node_g}");
        // Interior accuracy trails node accuracy by orders of magnitude.
        let local_u = errors.global(SampleSet::Local, ErrorClass::U, Norm::Linf);
        assert!(
            local_u >= 100.0 * node_u,
            "local {local_u} vs node {node_u}"
        );
        // Final-time error is at most the node maximum.
        let final_u = errors.global(SampleSet::Nodes, ErrorClass::U, Norm::Final);
        assert!(final_u <= node_u);
    }

    #[test]
    fn pointwise_errors_need_a_reference_solution() {
        let problem = DaeProblem::new(
            "bare",
            "ode",
            1,
            0,
            (0.0, 1.0),
            vec![1.0],
            vec![],
            Box::new(|u: &[f64], _v, _t, out: &mut [f64]| out[0] = -u[0]),
            Box::new(|_u, _v, _t, _out: &mut [f64]| {}),
        );
        let grid = GridSpec::uniform(0.0, 1.0, 2).unwrap();
        let t = tables(1);
        let report = stepper::solve(&problem, &grid, 1, &NewtonOptions::default()).unwrap();
        let err = pointwise_errors(&problem, &report, &t, 2).unwrap_err();
        assert_eq!(err, AnalysisError::NoExactSolution);
    }
}
