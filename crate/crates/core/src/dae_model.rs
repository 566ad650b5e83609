//! DAE problem abstraction and the registry of built-in test systems.
//!
//! A problem is the data of du/dt = F(u, v, t), 0 = G(u, v, t) together with
//! dimensions, span, consistent initial values, hand-coded Jacobians, an
//! optional exact solution and optional labelled extra constraints (the
//! non-enforced constraint levels of index-reduced families, tracked for
//! error reporting only). Pure ODEs are the d_v = 0 degenerate case of the
//! same machinery. Index reduction is manual: differentiated constraints are
//! transcribed as sibling problems sharing F and initial data.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

// Float supplies libm-backed f64 math in no_std builds; std test builds
// resolve the same methods inherently, leaving the import unused there.
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::DenseMatrix;
use crate::reference;

/// Right-hand-side evaluator: writes F(u, v, t) (or G) into `out`.
pub type RhsFn = Box<dyn Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync>;
/// Jacobian evaluator: writes the matrix at (u, v, t) into `out`.
pub type JacFn = Box<dyn Fn(&[f64], &[f64], f64, &mut DenseMatrix) + Send + Sync>;
/// Exact-solution evaluator: writes u(t) and v(t) into the buffers.
pub type ExactFn = Box<dyn Fn(f64, &mut [f64], &mut [f64]) + Send + Sync>;

/// A labelled constraint tracked for error reporting but not enforced.
pub struct ExtraConstraint {
    label: String,
    dim: usize,
    eval: RhsFn,
}

impl ExtraConstraint {
    /// Constraint label, e.g. `g2`.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of components.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evaluates the constraint residual into `out` (length [`dim`](Self::dim)).
    pub fn eval(&self, u: &[f64], v: &[f64], t: f64, out: &mut [f64]) {
        (self.eval)(u, v, t, out);
    }
}

impl fmt::Debug for ExtraConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExtraConstraint")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .finish()
    }
}

/// A DAE initial value problem du/dt = F(u, v, t), 0 = G(u, v, t).
pub struct DaeProblem {
    name: String,
    index_label: String,
    d_u: usize,
    d_v: usize,
    span: (f64, f64),
    u0: Vec<f64>,
    v0: Vec<f64>,
    f: RhsFn,
    g: RhsFn,
    jf_u: Option<JacFn>,
    jf_v: Option<JacFn>,
    jg_u: Option<JacFn>,
    jg_v: Option<JacFn>,
    exact: Option<ExactFn>,
    enforced_label: String,
    extra_constraints: Vec<ExtraConstraint>,
}

impl fmt::Debug for DaeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DaeProblem")
            .field("name", &self.name)
            .field("index_label", &self.index_label)
            .field("d_u", &self.d_u)
            .field("d_v", &self.d_v)
            .field("span", &self.span)
            .finish()
    }
}

impl DaeProblem {
    /// Creates a problem from its defining data; Jacobians default to the
    /// finite-difference fallback until provided.
    ///
    /// # Panics
    /// Panics if initial-value lengths disagree with the dimensions.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        index_label: &str,
        d_u: usize,
        d_v: usize,
        span: (f64, f64),
        u0: Vec<f64>,
        v0: Vec<f64>,
        f: RhsFn,
        g: RhsFn,
    ) -> Self {
        assert_eq!(u0.len(), d_u, "u0 length vs d_u");
        assert_eq!(v0.len(), d_v, "v0 length vs d_v");
        DaeProblem {
            name: name.to_owned(),
            index_label: index_label.to_owned(),
            d_u,
            d_v,
            span,
            u0,
            v0,
            f,
            g,
            jf_u: None,
            jf_v: None,
            jg_u: None,
            jg_v: None,
            exact: None,
            enforced_label: "g".to_owned(),
            extra_constraints: Vec::new(),
        }
    }

    /// Attaches the four analytic Jacobians.
    pub fn with_jacobians(mut self, jf_u: JacFn, jf_v: JacFn, jg_u: JacFn, jg_v: JacFn) -> Self {
        self.jf_u = Some(jf_u);
        self.jf_v = Some(jf_v);
        self.jg_u = Some(jg_u);
        self.jg_v = Some(jg_v);
        self
    }

    /// Attaches an exact-solution evaluator.
    pub fn with_exact(mut self, exact: ExactFn) -> Self {
        self.exact = Some(exact);
        self
    }

    /// Names the enforced constraint for error reports (default `g`).
    pub fn with_enforced_label(mut self, label: &str) -> Self {
        self.enforced_label = label.to_owned();
        self
    }

    /// Adds a labelled constraint tracked in error reports but not enforced.
    pub fn with_extra_constraint(mut self, label: &str, dim: usize, eval: RhsFn) -> Self {
        self.extra_constraints.push(ExtraConstraint { label: label.to_owned(), dim, eval });
        self
    }

    /// Problem name as registered.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Declared differentiation index (informational).
    pub fn index_label(&self) -> &str {
        &self.index_label
    }

    /// Count of differential variables.
    pub fn d_u(&self) -> usize {
        self.d_u
    }

    /// Count of algebraic variables; 0 means pure ODE.
    pub fn d_v(&self) -> usize {
        self.d_v
    }

    /// Time span (t0, t_f).
    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    /// Initial differential state.
    pub fn u0(&self) -> &[f64] {
        &self.u0
    }

    /// Initial algebraic state (consistent with G = 0).
    pub fn v0(&self) -> &[f64] {
        &self.v0
    }

    /// Label of the enforced constraint in error reports.
    pub fn enforced_label(&self) -> &str {
        &self.enforced_label
    }

    /// Non-enforced labelled constraints.
    pub fn extra_constraints(&self) -> &[ExtraConstraint] {
        &self.extra_constraints
    }

    /// Whether an exact solution is available.
    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Evaluates F into `out` (length d_u).
    pub fn eval_f(&self, u: &[f64], v: &[f64], t: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.d_u);
        (self.f)(u, v, t, out);
    }

    /// Evaluates G into `out` (length d_v).
    pub fn eval_g(&self, u: &[f64], v: &[f64], t: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.d_v);
        (self.g)(u, v, t, out);
    }

    /// Evaluates the exact solution, if any, into the buffers.
    pub fn eval_exact(&self, t: f64, u_out: &mut [f64], v_out: &mut [f64]) -> bool {
        match &self.exact {
            Some(exact) => {
                exact(t, u_out, v_out);
                true
            }
            None => false,
        }
    }

    /// Exact solution as owned vectors, if available.
    pub fn exact(&self, t: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        self.exact.as_ref().map(|e| {
            let mut u = vec![0.0; self.d_u];
            let mut v = vec![0.0; self.d_v];
            e(t, &mut u, &mut v);
            (u, v)
        })
    }

    /// dF/du (d_u x d_u), analytic if provided, else central differences.
    pub fn eval_jf_u(&self, u: &[f64], v: &[f64], t: f64, out: &mut DenseMatrix) {
        match &self.jf_u {
            Some(j) => j(u, v, t, out),
            None => self.fd_jacobian(true, true, u, v, t, out),
        }
    }

    /// dF/dv (d_u x d_v).
    pub fn eval_jf_v(&self, u: &[f64], v: &[f64], t: f64, out: &mut DenseMatrix) {
        match &self.jf_v {
            Some(j) => j(u, v, t, out),
            None => self.fd_jacobian(true, false, u, v, t, out),
        }
    }

    /// dG/du (d_v x d_u).
    pub fn eval_jg_u(&self, u: &[f64], v: &[f64], t: f64, out: &mut DenseMatrix) {
        match &self.jg_u {
            Some(j) => j(u, v, t, out),
            None => self.fd_jacobian(false, true, u, v, t, out),
        }
    }

    /// dG/dv (d_v x d_v).
    pub fn eval_jg_v(&self, u: &[f64], v: &[f64], t: f64, out: &mut DenseMatrix) {
        match &self.jg_v {
            Some(j) => j(u, v, t, out),
            None => self.fd_jacobian(false, false, u, v, t, out),
        }
    }

    /// Central-difference Jacobian of F or G with respect to u or v.
    fn fd_jacobian(
        &self,
        of_f: bool,
        wrt_u: bool,
        u: &[f64],
        v: &[f64],
        t: f64,
        out: &mut DenseMatrix,
    ) {
        let rows = if of_f { self.d_u } else { self.d_v };
        let cols = if wrt_u { self.d_u } else { self.d_v };
        debug_assert_eq!((out.rows(), out.cols()), (rows, cols));
        let mut plus = vec![0.0; rows];
        let mut minus = vec![0.0; rows];
        let mut xp = if wrt_u { u.to_vec() } else { v.to_vec() };
        let mut xm = xp.clone();
        let scale = f64::EPSILON.cbrt();
        for j in 0..cols {
            let base = xp[j];
            let h = scale * (1.0 + base.abs());
            xp[j] = base + h;
            xm[j] = base - h;
            {
                let (up, vp): (&[f64], &[f64]) = if wrt_u { (&xp, v) } else { (u, &xp) };
                let (um, vm): (&[f64], &[f64]) = if wrt_u { (&xm, v) } else { (u, &xm) };
                if of_f {
                    (self.f)(up, vp, t, &mut plus);
                    (self.f)(um, vm, t, &mut minus);
                } else {
                    (self.g)(up, vp, t, &mut plus);
                    (self.g)(um, vm, t, &mut minus);
                }
            }
            for i in 0..rows {
                out.set(i, j, (plus[i] - minus[i]) / (2.0 * h));
            }
            xp[j] = base;
            xm[j] = base;
        }
    }

    /// Diagnostic consistency check of initial data, Jacobians and the exact
    /// solution; thresholds follow the registry invariants.
    pub fn check_consistency(&self) -> ConsistencyReport {
        let mut report = ConsistencyReport {
            constraint_residual: 0.0,
            jacobian_deviation: 0.0,
            exact_ode_defect: None,
            exact_constraint_residual: None,
        };
        let (t0, tf) = self.span;
        if self.d_v > 0 {
            let mut g = vec![0.0; self.d_v];
            self.eval_g(&self.u0, &self.v0, t0, &mut g);
            report.constraint_residual = max_abs(&g);
        }

        // analytic vs central-difference Jacobians at the initial point
        let mut dev = 0.0_f64;
        let mut compare = |analytic: &Option<JacFn>, of_f: bool, wrt_u: bool| {
            if let Some(j) = analytic {
                let rows = if of_f { self.d_u } else { self.d_v };
                let cols = if wrt_u { self.d_u } else { self.d_v };
                if rows == 0 || cols == 0 {
                    return;
                }
                let mut a = DenseMatrix::zeros(rows, cols);
                let mut fd = DenseMatrix::zeros(rows, cols);
                j(&self.u0, &self.v0, t0, &mut a);
                self.fd_jacobian(of_f, wrt_u, &self.u0, &self.v0, t0, &mut fd);
                let scale = 1.0 + a.max_abs();
                for r in 0..rows {
                    for c in 0..cols {
                        dev = dev.max((a.get(r, c) - fd.get(r, c)).abs() / scale);
                    }
                }
            }
        };
        compare(&self.jf_u, true, true);
        compare(&self.jf_v, true, false);
        compare(&self.jg_u, false, true);
        compare(&self.jg_v, false, false);
        report.jacobian_deviation = dev;

        if self.exact.is_some() {
            let mut defect = 0.0_f64;
            let mut g_res = 0.0_f64;
            let h = 1e-5;
            let mut up = vec![0.0; self.d_u];
            let mut um = vec![0.0; self.d_u];
            let mut uc = vec![0.0; self.d_u];
            let mut vc = vec![0.0; self.d_v];
            let mut vv = vec![0.0; self.d_v];
            let mut rhs = vec![0.0; self.d_u];
            let mut g = vec![0.0; self.d_v];
            for i in 0..20 {
                // offset keeps the finite-difference stencil away from cell
                // boundaries of piecewise-polynomial reference evaluators
                let t = t0 + (i as f64 + 0.37) / 20.0 * (tf - t0);
                self.eval_exact(t, &mut uc, &mut vc);
                self.eval_exact(t + h, &mut up, &mut vv);
                self.eval_exact(t - h, &mut um, &mut vv);
                self.eval_f(&uc, &vc, t, &mut rhs);
                for j in 0..self.d_u {
                    let dudt = (up[j] - um[j]) / (2.0 * h);
                    defect = defect.max((dudt - rhs[j]).abs());
                }
                if self.d_v > 0 {
                    self.eval_g(&uc, &vc, t, &mut g);
                    g_res = g_res.max(max_abs(&g));
                }
            }
            report.exact_ode_defect = Some(defect);
            report.exact_constraint_residual = Some(g_res);
        }
        report
    }
}

/// Outcome of [`DaeProblem::check_consistency`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    /// Initial constraint residual, max-abs of G(u0, v0, t0).
    pub constraint_residual: f64,
    /// Worst relative deviation of analytic Jacobians from central differences.
    pub jacobian_deviation: f64,
    /// Max |du/dt − F| along the exact solution at 20 sample times, if any.
    pub exact_ode_defect: Option<f64>,
    /// Max constraint residual along the exact solution, if any.
    pub exact_constraint_residual: Option<f64>,
}

impl ConsistencyReport {
    /// Whether every measured quantity is inside its threshold.
    pub fn passes(&self) -> bool {
        self.constraint_residual <= 1e-10
            && self.jacobian_deviation <= 1e-6
            && self.exact_ode_defect.map_or(true, |d| d <= 1e-8)
            && self.exact_constraint_residual.map_or(true, |g| g <= 1e-9)
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, &v| m.max(v.abs()))
}

/// Errors from registry lookup and problem construction.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemError {
    /// Name not in the registry.
    UnknownProblem { name: String },
    /// Parameter key not accepted by the factory.
    UnknownParameter { problem: String, key: String },
    /// Parameter value outside the valid range.
    InvalidParameter { key: String, value: f64, reason: String },
    /// Malformed problem-spec string.
    ParseFailure { what: String },
    /// Building a wired-in reference solution failed.
    ReferenceConstruction { message: String },
}

impl fmt::Display for ProblemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemError::UnknownProblem { name } => write!(f, "unknown problem `{}`", name),
            ProblemError::UnknownParameter { problem, key } => {
                write!(f, "problem `{}` does not accept parameter `{}`", problem, key)
            }
            ProblemError::InvalidParameter { key, value, reason } => {
                write!(f, "invalid parameter {} = {}: {}", key, value, reason)
            }
            ProblemError::ParseFailure { what } => write!(f, "bad problem spec: {}", what),
            ProblemError::ReferenceConstruction { message } => {
                write!(f, "reference construction failed: {}", message)
            }
        }
    }
}

impl core::error::Error for ProblemError {}

/// Key-value parameters for a problem factory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProblemParams {
    entries: Vec<(String, f64)>,
}

impl ProblemParams {
    /// No parameters (every factory accepts this).
    pub fn empty() -> Self {
        ProblemParams::default()
    }

    /// Sets (or replaces) a parameter.
    pub fn set(&mut self, key: &str, value: f64) {
        if let Some(e) = self.entries.iter_mut().find(|(k, _)| k == key) {
            e.1 = value;
        } else {
            self.entries.push((key.to_owned(), value));
        }
    }

    /// All (key, value) pairs in insertion order, for config records.
    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    /// Value for `key`, or `default` when absent.
    pub fn get_or(&self, key: &str, default: f64) -> f64 {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .unwrap_or(default)
    }

    /// Rejects any key outside `allowed`.
    fn ensure_only(&self, problem: &str, allowed: &[&str]) -> Result<(), ProblemError> {
        for (k, _) in &self.entries {
            if !allowed.contains(&k.as_str()) {
                return Err(ProblemError::UnknownParameter {
                    problem: problem.to_owned(),
                    key: k.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Parsed `--problem` argument: a name plus key-value parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    /// Registry name.
    pub name: String,
    /// Factory parameters.
    pub params: ProblemParams,
}

/// Parses `flame,delta=1e-4` or `name=flame,delta=1e-4` into name and
/// parameters.
///
/// # Errors
/// `ParseFailure` on empty input, missing name, duplicate name or
/// unparseable numeric values.
pub fn parse_problem_spec(input: &str) -> Result<ProblemSpec, ProblemError> {
    let mut name: Option<String> = None;
    let mut params = ProblemParams::empty();
    for token in input.split(',') {
        let token = token.trim();
        if token.is_empty() {
            return Err(ProblemError::ParseFailure { what: format!("empty token in `{}`", input) });
        }
        match token.split_once('=') {
            None => {
                if name.is_some() {
                    return Err(ProblemError::ParseFailure {
                        what: format!("two problem names in `{}`", input),
                    });
                }
                name = Some(token.to_owned());
            }
            Some(("name", v)) => {
                if name.is_some() {
                    return Err(ProblemError::ParseFailure {
                        what: format!("two problem names in `{}`", input),
                    });
                }
                name = Some(v.trim().to_owned());
            }
            Some((k, v)) => {
                let value: f64 = v.trim().parse().map_err(|_| ProblemError::ParseFailure {
                    what: format!("cannot parse `{}` as a number for key `{}`", v, k),
                })?;
                params.set(k.trim(), value);
            }
        }
    }
    match name {
        Some(name) => Ok(ProblemSpec { name, params }),
        None => Err(ProblemError::ParseFailure { what: format!("no problem name in `{}`", input) }),
    }
}

type Factory = fn(&ProblemParams) -> Result<DaeProblem, ProblemError>;

/// One registry entry: a named factory with parameter documentation.
pub struct RegistryEntry {
    name: &'static str,
    summary: &'static str,
    params_doc: &'static str,
    factory: Factory,
}

impl RegistryEntry {
    /// Registered name.
    pub fn name(&self) -> &'static str {
        self.name
    }

    /// One-line description.
    pub fn summary(&self) -> &'static str {
        self.summary
    }

    /// Accepted parameters with defaults, empty when none.
    pub fn params_doc(&self) -> &'static str {
        self.params_doc
    }
}

/// Name-to-factory mapping for all built-in problems.
pub struct ProblemRegistry {
    entries: Vec<RegistryEntry>,
}

impl ProblemRegistry {
    /// Registered names in listing order.
    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name).collect()
    }

    /// All entries, for listings.
    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    /// Instantiates `name` with `params`.
    ///
    /// # Errors
    /// `UnknownProblem` for unregistered names; factory errors propagate.
    pub fn create(&self, name: &str, params: &ProblemParams) -> Result<DaeProblem, ProblemError> {
        match self.entries.iter().find(|e| e.name == name) {
            Some(e) => (e.factory)(params),
            None => Err(ProblemError::UnknownProblem { name: name.to_owned() }),
        }
    }

    /// Parses a spec string and instantiates it.
    ///
    /// # Errors
    /// Parse and factory errors propagate.
    pub fn create_from_spec(&self, spec: &str) -> Result<DaeProblem, ProblemError> {
        let spec = parse_problem_spec(spec)?;
        self.create(&spec.name, &spec.params)
    }
}

/// Builds the registry of every built-in problem.
pub fn register_builtin_problems() -> ProblemRegistry {
    ProblemRegistry {
        entries: vec![
            RegistryEntry {
                name: "ode_harmonic",
                summary: "linear harmonic oscillator, pure ODE (d_v = 0)",
                params_doc: "",
                factory: make_ode_harmonic,
            },
            RegistryEntry {
                name: "demo_index1",
                summary: "index-1 oscillator with algebraic mirror variable, span [0, 40 pi]",
                params_doc: "",
                factory: make_demo_index1,
            },
            RegistryEntry {
                name: "newton_demo",
                summary: "index-1 circle system used for Newton convergence studies",
                params_doc: "",
                factory: make_newton_demo,
            },
            RegistryEntry {
                name: "simple_index1",
                summary: "index-1 circle system (same dynamics as newton_demo)",
                params_doc: "",
                factory: make_simple_index1,
            },
            RegistryEntry {
                name: "hessenberg_index1",
                summary: "Hessenberg-form index-1 system with polynomial-phase exact solution",
                params_doc: "",
                factory: make_hessenberg_index1,
            },
            RegistryEntry {
                name: "hessenberg_index2",
                summary: "Hessenberg-form index-2 system, constraint g1 (no explicit v)",
                params_doc: "",
                factory: make_hessenberg_index2,
            },
            RegistryEntry {
                name: "hessenberg_index2_reduced1",
                summary: "index-2 Hessenberg system with once-differentiated constraint g2",
                params_doc: "",
                factory: make_hessenberg_index2_reduced1,
            },
            RegistryEntry {
                name: "pendulum_index3",
                summary: "mathematical pendulum, position constraint g1 (index 3)",
                params_doc: "phi0 (default pi/4), g (default 1)",
                factory: |p| make_pendulum(p, 3),
            },
            RegistryEntry {
                name: "pendulum_index2",
                summary: "mathematical pendulum, velocity constraint g2 (index 2)",
                params_doc: "phi0 (default pi/4), g (default 1)",
                factory: |p| make_pendulum(p, 2),
            },
            RegistryEntry {
                name: "pendulum_index1",
                summary: "mathematical pendulum, acceleration constraint g3 (index 1)",
                params_doc: "phi0 (default pi/4), g (default 1)",
                factory: |p| make_pendulum(p, 1),
            },
            RegistryEntry {
                name: "double_pendulum_index3",
                summary: "double pendulum, position constraints g1 (index 3)",
                params_doc: "phi1 (default 0.25 pi), phi2 (default 0.30 pi), g (default 1)",
                factory: |p| make_double_pendulum(p, 3),
            },
            RegistryEntry {
                name: "double_pendulum_index2",
                summary: "double pendulum, velocity constraints g2 (index 2)",
                params_doc: "phi1 (default 0.25 pi), phi2 (default 0.30 pi), g (default 1)",
                factory: |p| make_double_pendulum(p, 2),
            },
            RegistryEntry {
                name: "double_pendulum_index1",
                summary: "double pendulum, acceleration constraints g3 (index 1)",
                params_doc: "phi1 (default 0.25 pi), phi2 (default 0.30 pi), g (default 1)",
                factory: |p| make_double_pendulum(p, 1),
            },
            RegistryEntry {
                name: "flame",
                summary: "stiff flame-propagation ball, span (0, 2/delta)",
                params_doc: "delta (default 1e-4)",
                factory: make_flame,
            },
        ],
    }
}

fn make_ode_harmonic(params: &ProblemParams) -> Result<DaeProblem, ProblemError> {
    params.ensure_only("ode_harmonic", &[])?;
    let p = DaeProblem::new(
        "ode_harmonic",
        "0",
        2,
        0,
        (0.0, 4.0 * PI),
        vec![1.0, 0.0],
        vec![],
        Box::new(|u, _v, _t, out| {
            out[0] = u[1];
            out[1] = -u[0];
        }),
        Box::new(|_u, _v, _t, _out| {}),
    )
    .with_jacobians(
        Box::new(|_u, _v, _t, out| {
            out.set(0, 0, 0.0);
            out.set(0, 1, 1.0);
            out.set(1, 0, -1.0);
            out.set(1, 1, 0.0);
        }),
        Box::new(|_u, _v, _t, _out| {}),
        Box::new(|_u, _v, _t, _out| {}),
        Box::new(|_u, _v, _t, _out| {}),
    )
    .with_exact(Box::new(|t, u, _v| {
        u[0] = t.cos();
        u[1] = -t.sin();
    }));
    Ok(p)
}

fn make_demo_index1(params: &ProblemParams) -> Result<DaeProblem, ProblemError> {
    params.ensure_only("demo_index1", &[])?;
    let p = DaeProblem::new(
        "demo_index1",
        "1",
        2,
        1,
        (0.0, 40.0 * PI),
        vec![1.0, 0.0],
        vec![1.0],
        Box::new(|u, v, _t, out| {
            out[0] = u[1];
            out[1] = -v[0];
        }),
        Box::new(|u, v, _t, out| {
            out[0] = u[0] - v[0];
        }),
    )
    .with_jacobians(
        Box::new(|_u, _v, _t, out| {
            out.set(0, 0, 0.0);
            out.set(0, 1, 1.0);
            out.set(1, 0, 0.0);
            out.set(1, 1, 0.0);
        }),
        Box::new(|_u, _v, _t, out| {
            out.set(0, 0, 0.0);
            out.set(1, 0, -1.0);
        }),
        Box::new(|_u, _v, _t, out| {
            out.set(0, 0, 1.0);
            out.set(0, 1, 0.0);
        }),
        Box::new(|_u, _v, _t, out| {
            out.set(0, 0, -1.0);
        }),
    )
    .with_enforced_label("g1")
    .with_exact(Box::new(|t, u, v| {
        u[0] = t.cos();
        u[1] = -t.sin();
        v[0] = t.cos();
    }));
    Ok(p)
}

/// Circle system x'' + x = z - 1, y'' + y = 1 - z, x^2 + y^2 = z^2 with
/// state u = (x, y, xdot, ydot), v = (z); exact (cos, sin, -sin, cos; 1).
fn circle_system(name: &str) -> DaeProblem {
    DaeProblem::new(
        name,
        "1",
        4,
        1,
        (0.0, 2.0 * PI),
        vec![1.0, 0.0, 0.0, 1.0],
        vec![1.0],
        Box::new(|u, v, _t, out| {
            out[0] = u[2];
            out[1] = u[3];
            out[2] = -u[0] + v[0] - 1.0;
            out[3] = -u[1] + 1.0 - v[0];
        }),
        Box::new(|u, v, _t, out| {
            out[0] = u[0] * u[0] + u[1] * u[1] - v[0] * v[0];
        }),
    )
    .with_jacobians(
        Box::new(|_u, _v, _t, out| {
            for r in 0..4 {
                for c in 0..4 {
                    out.set(r, c, 0.0);
                }
            }
            out.set(0, 2, 1.0);
            out.set(1, 3, 1.0);
            out.set(2, 0, -1.0);
            out.set(3, 1, -1.0);
        }),
        Box::new(|_u, _v, _t, out| {
            out.set(0, 0, 0.0);
            out.set(1, 0, 0.0);
            out.set(2, 0, 1.0);
            out.set(3, 0, -1.0);
        }),
        Box::new(|u, _v, _t, out| {
            out.set(0, 0, 2.0 * u[0]);
            out.set(0, 1, 2.0 * u[1]);
            out.set(0, 2, 0.0);
            out.set(0, 3, 0.0);
        }),
        Box::new(|_u, v, _t, out| {
            out.set(0, 0, -2.0 * v[0]);
        }),
    )
    .with_enforced_label("g1")
    .with_extra_constraint(
        "g2",
        1,
        Box::new(|_u, v, _t, out| {
            out[0] = v[0] - 1.0;
        }),
    )
    .with_exact(Box::new(|t, u, v| {
        u[0] = t.cos();
        u[1] = t.sin();
        u[2] = -t.sin();
        u[3] = t.cos();
        v[0] = 1.0;
    }))
}

fn make_newton_demo(params: &ProblemParams) -> Result<DaeProblem, ProblemError> {
    params.ensure_only("newton_demo", &[])?;
    Ok(circle_system("newton_demo"))
}

fn make_simple_index1(params: &ProblemParams) -> Result<DaeProblem, ProblemError> {
    params.ensure_only("simple_index1", &[])?;
    Ok(circle_system("simple_index1"))
}

fn make_hessenberg_index1(params: &ProblemParams) -> Result<DaeProblem, ProblemError> {
    params.ensure_only("hessenberg_index1", &[])?;
    let p = DaeProblem::new(
        "hessenberg_index1",
        "1",
        4,
        1,
        (0.0, 1.0),
        vec![0.0, 0.0, 1.0, 2.0],
        vec![0.0],
        Box::new(|u, v, t, out| {
            out[0] = u[2];
            out[1] = u[3];
            out[2] = -u[0] * (4.0 * v[0] + 1.0) - u[1] * (3.0 * t + 1.0);
            out[3] = -u[1] * (4.0 * v[0] + 1.0) + 4.0 * v[0].cos();
        }),
        Box::new(|u, v, t, out| {
            out[0] = 4.0 * u[0] * v[0].cos() + t * u[1] * u[1] - 4.0 * (v[0] - t * t);
        }),
    )
    .with_jacobians(
        Box::new(|_u, v, t, out| {
            for r in 0..4 {
                for c in 0..4 {
                    out.set(r, c, 0.0);
                }
            }
            out.set(0, 2, 1.0);
            out.set(1, 3, 1.0);
            out.set(2, 0, -(4.0 * v[0] + 1.0));
            out.set(2, 1, -(3.0 * t + 1.0));
            out.set(3, 1, -(4.0 * v[0] + 1.0));
        }),
        Box::new(|u, v, _t, out| {
            out.set(0, 0, 0.0);
            out.set(1, 0, 0.0);
            out.set(2, 0, -4.0 * u[0]);
            out.set(3, 0, -4.0 * u[1] - 4.0 * v[0].sin());
        }),
        Box::new(|u, v, t, out| {
            out.set(0, 0, 4.0 * v[0].cos());
            out.set(0, 1, 2.0 * t * u[1]);
            out.set(0, 2, 0.0);
            out.set(0, 3, 0.0);
        }),
        Box::new(|u, v, _t, out| {
            out.set(0, 0, -4.0 * u[0] * v[0].sin() - 4.0);
        }),
    )
    .with_enforced_label("g1")
    .with_extra_constraint(
        "g2",
        1,
        Box::new(|_u, v, t, out| {
            out[0] = v[0] - t * t - t;
        }),
    )
    .with_exact(Box::new(|t, u, v| {
        let theta = t * t + t;
        let (s, c) = (theta.sin(), theta.cos());
        u[0] = t * c;
        u[1] = 2.0 * s;
        u[2] = c - t * (2.0 * t + 1.0) * s;
        u[3] = 2.0 * (2.0 * t + 1.0) * c;
        v[0] = theta;
    }));
    Ok(p)
}

/// Shared dynamics of the index-2 Hessenberg family; only the enforced
/// constraint differs between the original and the reduced sibling.
fn hessenberg2_base(name: &str, index_label: &str) -> DaeProblem {
    DaeProblem::new(
        name,
        index_label,
        4,
        1,
        (0.0, 1.0),
        vec![0.0, 1.0, 0.0, 0.0],
        vec![0.0],
        Box::new(|u, v, t, out| {
            out[0] = u[2];
            out[1] = u[3];
            out[2] = u[0] * (4.0 * v[0] - 1.0) + 2.0 * (1.0 - 3.0 * t) * u[1];
            out[3] = u[1] * (4.0 * v[0] - 1.0) + 2.0 * v[0].sin();
        }),
        // placeholder; each sibling installs its own constraint below
        Box::new(|_u, _v, _t, out| {
            out[0] = 0.0;
        }),
    )
    .with_exact(Box::new(|t, u, v| {
        let theta = t - t * t;
        let (s, c) = (theta.sin(), theta.cos());
        u[0] = t * s;
        u[1] = c;
        u[2] = s + t * (1.0 - 2.0 * t) * c;
        u[3] = -(1.0 - 2.0 * t) * s;
        v[0] = theta;
    }))
}

fn hessenberg2_jf_u() -> JacFn {
    Box::new(|_u, v, t, out| {
        for r in 0..4 {
            for c in 0..4 {
                out.set(r, c, 0.0);
            }
        }
        out.set(0, 2, 1.0);
        out.set(1, 3, 1.0);
        out.set(2, 0, 4.0 * v[0] - 1.0);
        out.set(2, 1, 2.0 * (1.0 - 3.0 * t));
        out.set(3, 1, 4.0 * v[0] - 1.0);
    })
}

fn hessenberg2_jf_v() -> JacFn {
    Box::new(|u, v, _t, out| {
        out.set(0, 0, 0.0);
        out.set(1, 0, 0.0);
        out.set(2, 0, 4.0 * u[0]);
        out.set(3, 0, 4.0 * u[1] + 2.0 * v[0].cos());
    })
}

fn make_hessenberg_index2(params: &ProblemParams) -> Result<DaeProblem, ProblemError> {
    params.ensure_only("hessenberg_index2", &[])?;
    let mut p = hessenberg2_base("hessenberg_index2", "2");
    p.g = Box::new(|u, _v, t, out| {
        out[0] = u[0] * u[0] + t * t * (u[1] * u[1] - 1.0);
    });
    let p = p
        .with_jacobians(
            hessenberg2_jf_u(),
            hessenberg2_jf_v(),
            Box::new(|u, _v, t, out| {
                out.set(0, 0, 2.0 * u[0]);
                out.set(0, 1, 2.0 * t * t * u[1]);
                out.set(0, 2, 0.0);
                out.set(0, 3, 0.0);
            }),
            // g1 has no explicit dependence on v: the block is identically 0
            Box::new(|_u, _v, _t, out| {
                out.set(0, 0, 0.0);
            }),
        )
        .with_enforced_label("g1")
        .with_extra_constraint(
            "g2",
            1,
            Box::new(|u, _v, t, out| {
                out[0] = u[0] * u[2] + t * t * u[1] * u[3] + t * (u[1] * u[1] - 1.0);
            }),
        );
    Ok(p)
}

fn make_hessenberg_index2_reduced1(params: &ProblemParams) -> Result<DaeProblem, ProblemError> {
    params.ensure_only("hessenberg_index2_reduced1", &[])?;
    let mut p = hessenberg2_base("hessenberg_index2_reduced1", "1");
    p.g = Box::new(|u, _v, t, out| {
        out[0] = u[0] * u[2] + t * t * u[1] * u[3] + t * (u[1] * u[1] - 1.0);
    });
    let p = p
        .with_jacobians(
            hessenberg2_jf_u(),
            hessenberg2_jf_v(),
            Box::new(|u, _v, t, out| {
                out.set(0, 0, u[2]);
                out.set(0, 1, t * t * u[3] + 2.0 * t * u[1]);
                out.set(0, 2, u[0]);
                out.set(0, 3, t * t * u[1]);
            }),
            // the differentiated constraint still has no explicit v
            Box::new(|_u, _v, _t, out| {
                out.set(0, 0, 0.0);
            }),
        )
        .with_enforced_label("g2")
        .with_extra_constraint(
            "g1",
            1,
            Box::new(|u, _v, t, out| {
                out[0] = u[0] * u[0] + t * t * (u[1] * u[1] - 1.0);
            }),
        );
    Ok(p)
}

/// Pendulum family: state u = (x, y, xdot, ydot), v = (lambda), with the
/// constraint level selected by `index` (3: position, 2: velocity,
/// 1: acceleration).
fn make_pendulum(params: &ProblemParams, index: u8) -> Result<DaeProblem, ProblemError> {
    let name = match index {
        3 => "pendulum_index3",
        2 => "pendulum_index2",
        _ => "pendulum_index1",
    };
    params.ensure_only(name, &["phi0", "g"])?;
    let phi0 = params.get_or("phi0", 0.25 * PI);
    let g_accel = params.get_or("g", 1.0);
    if phi0.abs() >= PI {
        return Err(ProblemError::InvalidParameter {
            key: "phi0".to_owned(),
            value: phi0,
            reason: "release angle must satisfy |phi0| < pi".to_owned(),
        });
    }
    if g_accel <= 0.0 {
        return Err(ProblemError::InvalidParameter {
            key: "g".to_owned(),
            value: g_accel,
            reason: "gravity must be positive".to_owned(),
        });
    }

    let g1: RhsFn = Box::new(|u, _v, _t, out| {
        out[0] = u[0] * u[0] + u[1] * u[1] - 1.0;
    });
    let g2: RhsFn = Box::new(|u, _v, _t, out| {
        out[0] = u[0] * u[2] + u[1] * u[3];
    });
    let grav = g_accel;
    let g3: RhsFn = Box::new(move |u, v, _t, out| {
        out[0] = u[2] * u[2] + u[3] * u[3] - v[0] * (u[0] * u[0] + u[1] * u[1]) - grav * u[1];
    });
    let jg1_u: JacFn = Box::new(|u, _v, _t, out| {
        out.set(0, 0, 2.0 * u[0]);
        out.set(0, 1, 2.0 * u[1]);
        out.set(0, 2, 0.0);
        out.set(0, 3, 0.0);
    });
    let jg2_u: JacFn = Box::new(|u, _v, _t, out| {
        out.set(0, 0, u[2]);
        out.set(0, 1, u[3]);
        out.set(0, 2, u[0]);
        out.set(0, 3, u[1]);
    });
    let jg3_u: JacFn = Box::new(move |u, v, _t, out| {
        out.set(0, 0, -2.0 * v[0] * u[0]);
        out.set(0, 1, -2.0 * v[0] * u[1] - grav);
        out.set(0, 2, 2.0 * u[2]);
        out.set(0, 3, 2.0 * u[3]);
    });
    let jg_zero: JacFn = Box::new(|_u, _v, _t, out| {
        out.set(0, 0, 0.0);
    });
    let jg3_v: JacFn = Box::new(|u, _v, _t, out| {
        out.set(0, 0, -(u[0] * u[0] + u[1] * u[1]));
    });

    let (label, g, jg_u, jg_v, index_label) = match index {
        3 => ("g1", g1, jg1_u, jg_zero, "3"),
        2 => ("g2", g2, jg2_u, jg_zero, "2"),
        _ => ("g3", g3, jg3_u, jg3_v, "1"),
    };

    let mut p = DaeProblem::new(
        name,
        index_label,
        4,
        1,
        (0.0, 10.0),
        vec![phi0.sin(), -phi0.cos(), 0.0, 0.0],
        vec![g_accel * phi0.cos()],
        Box::new(move |u, v, _t, out| {
            out[0] = u[2];
            out[1] = u[3];
            out[2] = -u[0] * v[0];
            out[3] = -u[1] * v[0] - grav;
        }),
        g,
    )
    .with_jacobians(
        Box::new(|_u, v, _t, out| {
            for r in 0..4 {
                for c in 0..4 {
                    out.set(r, c, 0.0);
                }
            }
            out.set(0, 2, 1.0);
            out.set(1, 3, 1.0);
            out.set(2, 0, -v[0]);
            out.set(3, 1, -v[0]);
        }),
        Box::new(|u, _v, _t, out| {
            out.set(0, 0, 0.0);
            out.set(1, 0, 0.0);
            out.set(2, 0, -u[0]);
            out.set(3, 0, -u[1]);
        }),
        jg_u,
        jg_v,
    )
    .with_enforced_label(label)
    .with_exact(Box::new(move |t, u, v| {
        let (ue, ve) = reference::pendulum_exact(t, phi0, grav)
            .expect("pendulum parameters validated at construction");
        u.copy_from_slice(&ue);
        v[0] = ve;
    }));

    // the two non-enforced levels, re-created because RhsFn is not Clone
    let mk_g1: RhsFn = Box::new(|u, _v, _t, out| {
        out[0] = u[0] * u[0] + u[1] * u[1] - 1.0;
    });
    let mk_g2: RhsFn = Box::new(|u, _v, _t, out| {
        out[0] = u[0] * u[2] + u[1] * u[3];
    });
    let mk_g3: RhsFn = Box::new(move |u, v, _t, out| {
        out[0] = u[2] * u[2] + u[3] * u[3] - v[0] * (u[0] * u[0] + u[1] * u[1]) - grav * u[1];
    });
    p = match index {
        3 => p.with_extra_constraint("g2", 1, mk_g2).with_extra_constraint("g3", 1, mk_g3),
        2 => p.with_extra_constraint("g1", 1, mk_g1).with_extra_constraint("g3", 1, mk_g3),
        _ => p.with_extra_constraint("g1", 1, mk_g1).with_extra_constraint("g2", 1, mk_g2),
    };
    Ok(p)
}

/// Double pendulum: u = (x1, y1, x2, y2, and the four velocities),
/// v = (lambda1, lambda2); constraint pairs per index level as for the
/// single pendulum.
fn make_double_pendulum(params: &ProblemParams, index: u8) -> Result<DaeProblem, ProblemError> {
    let name = match index {
        3 => "double_pendulum_index3",
        2 => "double_pendulum_index2",
        _ => "double_pendulum_index1",
    };
    params.ensure_only(name, &["phi1", "phi2", "g"])?;
    let phi1 = params.get_or("phi1", 0.25 * PI);
    let phi2 = params.get_or("phi2", 0.30 * PI);
    let grav = params.get_or("g", 1.0);
    if grav <= 0.0 {
        return Err(ProblemError::InvalidParameter {
            key: "g".to_owned(),
            value: grav,
            reason: "gravity must be positive".to_owned(),
        });
    }
    let t_f = 20.0;

    let g1: RhsFn = Box::new(|u, _v, _t, out| {
        out[0] = u[0] * u[0] + u[1] * u[1] - 1.0;
        out[1] = (u[0] - u[2]) * (u[0] - u[2]) + (u[1] - u[3]) * (u[1] - u[3]) - 1.0;
    });
    let g2: RhsFn = Box::new(|u, _v, _t, out| {
        out[0] = u[0] * u[4] + u[1] * u[5];
        out[1] = (u[0] - u[2]) * (u[4] - u[6]) + (u[1] - u[3]) * (u[5] - u[7]);
    });
    let g3: RhsFn = Box::new(move |u, v, _t, out| {
        let (a, b) = (u[0] - u[2], u[1] - u[3]);
        let (c, d) = (u[4] - u[6], u[5] - u[7]);
        out[0] = u[4] * u[4] + u[5] * u[5]
            - grav * u[1]
            - v[0] * (u[0] * u[0] + u[1] * u[1])
            - v[1] * (u[0] * a + u[1] * b);
        out[1] = c * c + d * d
            - a * (v[0] * u[0] + 2.0 * v[1] * a)
            - b * (v[0] * u[1] + 2.0 * v[1] * b);
    });

    let zero_2x8 = |out: &mut DenseMatrix| {
        for r in 0..2 {
            for c in 0..8 {
                out.set(r, c, 0.0);
            }
        }
    };
    let jg1_u: JacFn = Box::new(move |u, _v, _t, out| {
        zero_2x8(out);
        out.set(0, 0, 2.0 * u[0]);
        out.set(0, 1, 2.0 * u[1]);
        let (a, b) = (u[0] - u[2], u[1] - u[3]);
        out.set(1, 0, 2.0 * a);
        out.set(1, 1, 2.0 * b);
        out.set(1, 2, -2.0 * a);
        out.set(1, 3, -2.0 * b);
    });
    let jg2_u: JacFn = Box::new(move |u, _v, _t, out| {
        zero_2x8(out);
        out.set(0, 0, u[4]);
        out.set(0, 1, u[5]);
        out.set(0, 4, u[0]);
        out.set(0, 5, u[1]);
        let (a, b) = (u[0] - u[2], u[1] - u[3]);
        let (c, d) = (u[4] - u[6], u[5] - u[7]);
        out.set(1, 0, c);
        out.set(1, 1, d);
        out.set(1, 2, -c);
        out.set(1, 3, -d);
        out.set(1, 4, a);
        out.set(1, 5, b);
        out.set(1, 6, -a);
        out.set(1, 7, -b);
    });
    let jg3_u: JacFn = Box::new(move |u, v, _t, out| {
        zero_2x8(out);
        let (a, b) = (u[0] - u[2], u[1] - u[3]);
        let (c, d) = (u[4] - u[6], u[5] - u[7]);
        out.set(0, 0, -2.0 * v[0] * u[0] - v[1] * (2.0 * u[0] - u[2]));
        out.set(0, 1, -grav - 2.0 * v[0] * u[1] - v[1] * (2.0 * u[1] - u[3]));
        out.set(0, 2, v[1] * u[0]);
        out.set(0, 3, v[1] * u[1]);
        out.set(0, 4, 2.0 * u[4]);
        out.set(0, 5, 2.0 * u[5]);
        out.set(1, 0, -v[0] * (u[0] + a) - 4.0 * v[1] * a);
        out.set(1, 1, -v[0] * (u[1] + b) - 4.0 * v[1] * b);
        out.set(1, 2, v[0] * u[0] + 4.0 * v[1] * a);
        out.set(1, 3, v[0] * u[1] + 4.0 * v[1] * b);
        out.set(1, 4, 2.0 * c);
        out.set(1, 5, 2.0 * d);
        out.set(1, 6, -2.0 * c);
        out.set(1, 7, -2.0 * d);
    });
    let jg_zero: JacFn = Box::new(|_u, _v, _t, out| {
        for r in 0..2 {
            for c in 0..2 {
                out.set(r, c, 0.0);
            }
        }
    });
    let jg3_v: JacFn = Box::new(|u, _v, _t, out| {
        let (a, b) = (u[0] - u[2], u[1] - u[3]);
        let coupling = u[0] * a + u[1] * b;
        out.set(0, 0, -(u[0] * u[0] + u[1] * u[1]));
        out.set(0, 1, -coupling);
        out.set(1, 0, -coupling);
        out.set(1, 1, -2.0 * (a * a + b * b));
    });

    let (label, g, jg_u, jg_v, index_label) = match index {
        3 => ("g1", g1, jg1_u, jg_zero, "3"),
        2 => ("g2", g2, jg2_u, jg_zero, "2"),
        _ => ("g3", g3, jg3_u, jg3_v, "1"),
    };

    let dp = reference::double_pendulum_reference(phi1, phi2, grav, t_f).map_err(|e| {
        ProblemError::ReferenceConstruction { message: format!("{}", e) }
    })?;

    let u0 = vec![
        phi1.sin(),
        -phi1.cos(),
        phi1.sin() + phi2.sin(),
        -(phi1.cos() + phi2.cos()),
        0.0,
        0.0,
        0.0,
        0.0,
    ];
    let d0 = 1.0 - u0[0] * u0[2] - u0[1] * u0[3];
    let den0 = 2.0 - d0 * d0;
    let v0 = vec![-2.0 * grav * u0[1] / den0, grav * u0[1] * d0 / den0];

    let mut p = DaeProblem::new(
        name,
        index_label,
        8,
        2,
        (0.0, t_f),
        u0,
        v0,
        Box::new(move |u, v, _t, out| {
            let (a, b) = (u[0] - u[2], u[1] - u[3]);
            out[0] = u[4];
            out[1] = u[5];
            out[2] = u[6];
            out[3] = u[7];
            out[4] = -v[0] * u[0] - v[1] * a;
            out[5] = -v[0] * u[1] - v[1] * b - grav;
            out[6] = v[1] * a;
            out[7] = v[1] * b - grav;
        }),
        g,
    )
    .with_jacobians(
        Box::new(|_u, v, _t, out| {
            for r in 0..8 {
                for c in 0..8 {
                    out.set(r, c, 0.0);
                }
            }
            for i in 0..4 {
                out.set(i, 4 + i, 1.0);
            }
            out.set(4, 0, -v[0] - v[1]);
            out.set(4, 2, v[1]);
            out.set(5, 1, -v[0] - v[1]);
            out.set(5, 3, v[1]);
            out.set(6, 0, v[1]);
            out.set(6, 2, -v[1]);
            out.set(7, 1, v[1]);
            out.set(7, 3, -v[1]);
        }),
        Box::new(|u, _v, _t, out| {
            for r in 0..8 {
                for c in 0..2 {
                    out.set(r, c, 0.0);
                }
            }
            let (a, b) = (u[0] - u[2], u[1] - u[3]);
            out.set(4, 0, -u[0]);
            out.set(4, 1, -a);
            out.set(5, 0, -u[1]);
            out.set(5, 1, -b);
            out.set(6, 1, a);
            out.set(7, 1, b);
        }),
        jg_u,
        jg_v,
    )
    .with_enforced_label(label)
    .with_exact(Box::new(move |t, u, v| {
        let (ue, ve) = dp.eval(t).expect("sample inside reference span");
        u.copy_from_slice(&ue);
        v.copy_from_slice(&ve);
    }));

    let mk_g1: RhsFn = Box::new(|u, _v, _t, out| {
        out[0] = u[0] * u[0] + u[1] * u[1] - 1.0;
        out[1] = (u[0] - u[2]) * (u[0] - u[2]) + (u[1] - u[3]) * (u[1] - u[3]) - 1.0;
    });
    let mk_g2: RhsFn = Box::new(|u, _v, _t, out| {
        out[0] = u[0] * u[4] + u[1] * u[5];
        out[1] = (u[0] - u[2]) * (u[4] - u[6]) + (u[1] - u[3]) * (u[5] - u[7]);
    });
    let mk_g3: RhsFn = Box::new(move |u, v, _t, out| {
        let (a, b) = (u[0] - u[2], u[1] - u[3]);
        let (c, d) = (u[4] - u[6], u[5] - u[7]);
        out[0] = u[4] * u[4] + u[5] * u[5]
            - grav * u[1]
            - v[0] * (u[0] * u[0] + u[1] * u[1])
            - v[1] * (u[0] * a + u[1] * b);
        out[1] = c * c + d * d
            - a * (v[0] * u[0] + 2.0 * v[1] * a)
            - b * (v[0] * u[1] + 2.0 * v[1] * b);
    });
    p = match index {
        3 => p.with_extra_constraint("g2", 2, mk_g2).with_extra_constraint("g3", 2, mk_g3),
        2 => p.with_extra_constraint("g1", 2, mk_g1).with_extra_constraint("g3", 2, mk_g3),
        _ => p.with_extra_constraint("g1", 2, mk_g1).with_extra_constraint("g2", 2, mk_g2),
    };
    Ok(p)
}

fn make_flame(params: &ProblemParams) -> Result<DaeProblem, ProblemError> {
    params.ensure_only("flame", &["delta"])?;
    let delta = params.get_or("delta", 1e-4);
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ProblemError::InvalidParameter {
            key: "delta".to_owned(),
            value: delta,
            reason: "initial radius must lie in (0, 1)".to_owned(),
        });
    }
    let p = DaeProblem::new(
        "flame",
        "1",
        1,
        1,
        (0.0, 2.0 / delta),
        vec![delta],
        vec![delta * delta * delta],
        Box::new(|u, v, _t, out| {
            out[0] = u[0] * u[0] - v[0];
        }),
        Box::new(|u, v, _t, out| {
            out[0] = u[0] * u[0] * u[0] - v[0];
        }),
    )
    .with_jacobians(
        Box::new(|u, _v, _t, out| {
            out.set(0, 0, 2.0 * u[0]);
        }),
        Box::new(|_u, _v, _t, out| {
            out.set(0, 0, -1.0);
        }),
        Box::new(|u, _v, _t, out| {
            out.set(0, 0, 3.0 * u[0] * u[0]);
        }),
        Box::new(|_u, _v, _t, out| {
            out.set(0, 0, -1.0);
        }),
    )
    .with_enforced_label("g1")
    .with_exact(Box::new(move |t, u, v| {
        let (ue, ve) = reference::flame_exact(t, delta)
            .expect("flame exact solution defined on the whole span");
        u[0] = ue;
        v[0] = ve;
    }));
    Ok(p)
}
