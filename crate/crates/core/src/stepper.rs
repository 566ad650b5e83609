//! Grid marching. Each cell runs the predictor, then the node state advances
//! by u_{n+1} = u_n + sum_p w_p (dt F)(q_p, r_p, t_p) using the cached
//! right-hand sides (no further F calls) and v_{n+1} = r_N, the local
//! solution at tau = 1. All cell coefficients are retained so the local
//! discrete solution can be evaluated anywhere afterwards.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;


use crate::basis::{BasisError, BasisTables};
use crate::dae_model::DaeProblem;
use crate::predictor::{self, CellSolution, Counters, NewtonOptions, NewtonTrace, PredictorError};

/// A contiguous, possibly multi-segment time grid; the step is constant
/// within a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    segments: Vec<(f64, f64, usize)>,
    nodes: Vec<f64>,
    dts: Vec<f64>,
}

/// Grid construction failures.
#[derive(Debug, Clone, PartialEq)]
pub enum GridError {
    /// No segments given.
    EmptySpec,
    /// A segment is degenerate or non-finite.
    BadSegment { index: usize, reason: String },
    /// Segment start does not equal the previous segment end.
    Discontiguous { index: usize },
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridError::EmptySpec => write!(f, "grid needs at least one segment"),
            GridError::BadSegment { index, reason } => {
                write!(f, "bad grid segment {}: {}", index, reason)
            }
            GridError::Discontiguous { index } => {
                write!(f, "grid segment {} does not start where the previous one ends", index)
            }
        }
    }
}

impl core::error::Error for GridError {}

impl GridSpec {
    /// Single-segment grid with `cells` equal steps on [t0, tf].
    ///
    /// # Errors
    /// Propagates segment validation.
    pub fn uniform(t0: f64, tf: f64, cells: usize) -> Result<Self, GridError> {
        GridSpec::from_segments(&[(t0, tf, cells)])
    }

    /// Multi-segment grid; segments must be listed in order and contiguous
    /// (bitwise-equal shared endpoints).
    ///
    /// # Errors
    /// `EmptySpec`, `BadSegment` (non-finite bounds, t_end <= t_start,
    /// zero cells) or `Discontiguous`.
    pub fn from_segments(segments: &[(f64, f64, usize)]) -> Result<Self, GridError> {
        if segments.is_empty() {
            return Err(GridError::EmptySpec);
        }
        for (i, &(s, e, m)) in segments.iter().enumerate() {
            if !s.is_finite() || !e.is_finite() {
                return Err(GridError::BadSegment {
                    index: i,
                    reason: String::from("bounds must be finite"),
                });
            }
            if !(e > s) {
                return Err(GridError::BadSegment {
                    index: i,
                    reason: format!("end {} must exceed start {}", e, s),
                });
            }
            if m == 0 {
                return Err(GridError::BadSegment {
                    index: i,
                    reason: String::from("cell count must be at least 1"),
                });
            }
            if i > 0 && segments[i - 1].1 != s {
                return Err(GridError::Discontiguous { index: i });
            }
        }
        let total: usize = segments.iter().map(|&(_, _, m)| m).sum();
        let mut nodes = Vec::with_capacity(total + 1);
        let mut dts = Vec::with_capacity(total);
        nodes.push(segments[0].0);
        for &(s, e, m) in segments {
            // dt computed once per segment; interior nodes by multiplication,
            // the segment end exactly, so long stiff spans accumulate no drift
            let dt = (e - s) / m as f64;
            for i in 1..m {
                nodes.push(s + i as f64 * dt);
            }
            nodes.push(e);
            for _ in 0..m {
                dts.push(dt);
            }
        }
        Ok(GridSpec { segments: segments.to_vec(), nodes, dts })
    }

    /// Covered interval (t0, tf).
    pub fn span(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().expect("grid has nodes"))
    }

    /// Number of cells L.
    pub fn cell_count(&self) -> usize {
        self.dts.len()
    }

    /// All L+1 node times in order.
    pub fn node_times(&self) -> &[f64] {
        &self.nodes
    }

    /// Left node time of cell `n`.
    pub fn cell_t_left(&self, n: usize) -> f64 {
        self.nodes[n]
    }

    /// Width of cell `n`.
    pub fn cell_dt(&self, n: usize) -> f64 {
        self.dts[n]
    }

    /// The defining segments.
    pub fn segments(&self) -> &[(f64, f64, usize)] {
        &self.segments
    }

    /// Smallest cell width; the representative step of a segmented grid
    /// (refinement scales every segment by the same factor, so any fixed
    /// choice leaves fitted convergence slopes unchanged).
    pub fn min_dt(&self) -> f64 {
        self.dts.iter().fold(f64::INFINITY, |m, &d| m.min(d))
    }

    /// Owning cell of time `t` among the first `limit` cells: cell n owns
    /// (t_n, t_{n+1}], and the very first node belongs to cell 0. Ties at
    /// interior nodes therefore resolve to the left cell.
    fn locate(&self, t: f64, limit: usize) -> Option<usize> {
        if limit == 0 || t < self.nodes[0] || t > self.nodes[limit] || t.is_nan() {
            return None;
        }
        let idx = self.nodes[..=limit].partition_point(|&x| x < t);
        Some(idx.saturating_sub(1).min(limit - 1))
    }
}

/// Errors detected before marching starts.
#[derive(Debug, Clone, PartialEq)]
pub enum SolveError {
    /// Grid start disagrees with the problem start, or the grid stops
    /// short of the problem end.
    SpanMismatch { grid: (f64, f64), problem: (f64, f64) },
    /// Basis construction failed (degree over the cap, root search).
    Basis(BasisError),
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::SpanMismatch { grid, problem } => write!(
                f,
                "grid [{}, {}] does not cover the problem span [{}, {}]",
                grid.0, grid.1, problem.0, problem.1
            ),
            SolveError::Basis(e) => write!(f, "basis: {}", e),
        }
    }
}

impl core::error::Error for SolveError {}

impl From<BasisError> for SolveError {
    fn from(e: BasisError) -> Self {
        SolveError::Basis(e)
    }
}

/// Local-evaluation failures.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    /// Requested time outside the (completed part of the) grid.
    OutOfRange { t: f64, covered: (f64, f64) },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::OutOfRange { t, covered } => write!(
                f,
                "t = {} is outside the covered interval [{}, {}]",
                t, covered.0, covered.1
            ),
        }
    }
}

impl core::error::Error for EvalError {}

/// Complete record of one marching run.
///
/// On a Newton failure the march stops at the failing cell: node arrays and
/// cell lists cover only the completed prefix and `failures` holds the
/// (cell index, error) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    degree: usize,
    d_u: usize,
    d_v: usize,
    grid: GridSpec,
    node_u: Vec<f64>,
    node_v: Vec<f64>,
    cells: Vec<CellSolution>,
    traces: Vec<NewtonTrace>,
    counters: Counters,
    failures: Vec<(usize, PredictorError)>,
}

impl SolveReport {
    /// Polynomial degree N of the run.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Differential dimension.
    pub fn d_u(&self) -> usize {
        self.d_u
    }

    /// Algebraic dimension.
    pub fn d_v(&self) -> usize {
        self.d_v
    }

    /// The grid marched over.
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Number of cells completed (equals the grid cell count iff no failure).
    pub fn completed_cells(&self) -> usize {
        self.cells.len()
    }

    /// Differential node state at node `n` (0 = initial state).
    ///
    /// # Panics
    /// Panics if node `n` was not reached.
    pub fn node_u_at(&self, n: usize) -> &[f64] {
        &self.node_u[n * self.d_u..(n + 1) * self.d_u]
    }

    /// Algebraic node state at node `n`.
    ///
    /// # Panics
    /// Panics if node `n` was not reached.
    pub fn node_v_at(&self, n: usize) -> &[f64] {
        &self.node_v[n * self.d_v..(n + 1) * self.d_v]
    }

    /// Stored cell solutions in marching order.
    pub fn cells(&self) -> &[CellSolution] {
        &self.cells
    }

    /// Per-cell Newton increment histories.
    pub fn traces(&self) -> &[NewtonTrace] {
        &self.traces
    }

    /// Accumulated work counters.
    pub fn counters(&self) -> Counters {
        self.counters
    }

    /// Abort record: empty on success, one (cell, error) pair otherwise.
    pub fn failures(&self) -> &[(usize, PredictorError)] {
        &self.failures
    }
}

/// Corrector: advances the node state across one solved cell using the
/// cached dt-scaled right-hand sides; v_next is the last algebraic
/// coefficient row (the local solution at tau = 1).
pub fn advance_cell(
    tables: &BasisTables,
    cell: &CellSolution,
    u_n: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut u_next = u_n.to_vec();
    for p in 0..tables.n_nodes() {
        let w = tables.weights()[p];
        for (x, f) in u_next.iter_mut().zip(cell.f_cache_row(p)) {
            *x += w * f;
        }
    }
    let v_next = cell.r_hat_row(tables.n_nodes() - 1).to_vec();
    (u_next, v_next)
}

/// Marches `problem` across `grid` with polynomial degree `degree`.
///
/// Cells are solved strictly sequentially; the run aborts at the first
/// predictor failure, which is recorded in the report rather than returned
/// as an error. Identical inputs produce bit-identical reports.
///
/// # Errors
/// `SpanMismatch` if the grid start is off the problem start to a relative
/// 1e-9, or the grid ends short of the problem span by more than that
/// slack; `Basis` if the degree is unsupported.
pub fn solve(
    problem: &DaeProblem,
    grid: &GridSpec,
    degree: usize,
    opts: &NewtonOptions,
) -> Result<SolveReport, SolveError> {
    let (g0, g1) = grid.span();
    let (p0, p1) = problem.span();
    // The initial data is anchored at the problem start, so the grid must
    // begin there; it may overshoot the end (a hand-rounded endpoint stays
    // usable) but not stop short of it.
    let slack = |a: f64, b: f64| 1e-9 * (1.0 + a.abs().max(b.abs()));
    if (g0 - p0).abs() > slack(g0, p0) || g1 < p1 - slack(g1, p1) {
        return Err(SolveError::SpanMismatch { grid: (g0, g1), problem: (p0, p1) });
    }
    let tables = crate::basis::build_tables(degree)?;
    let d_u = problem.d_u();
    let d_v = problem.d_v();

    let mut report = SolveReport {
        degree,
        d_u,
        d_v,
        grid: grid.clone(),
        node_u: problem.u0().to_vec(),
        node_v: problem.v0().to_vec(),
        cells: Vec::with_capacity(grid.cell_count()),
        traces: Vec::with_capacity(grid.cell_count()),
        counters: Counters::default(),
        failures: Vec::new(),
    };

    for n in 0..grid.cell_count() {
        let u_n = report.node_u[n * d_u..(n + 1) * d_u].to_vec();
        let v_n = report.node_v[n * d_v..(n + 1) * d_v].to_vec();
        match predictor::newton_solve(
            problem,
            &tables,
            grid.cell_dt(n),
            grid.cell_t_left(n),
            &u_n,
            &v_n,
            opts,
            &mut report.counters,
        ) {
            Ok((cell, trace)) => {
                let cell = predictor::with_cell_index(cell, n);
                let (u_next, v_next) = advance_cell(&tables, &cell, &u_n);
                report.node_u.extend_from_slice(&u_next);
                report.node_v.extend_from_slice(&v_next);
                report.cells.push(cell);
                report.traces.push(trace);
            }
            Err(e) => {
                report.failures.push((n, e));
                break;
            }
        }
    }
    Ok(report)
}

/// Evaluates the local discrete solution at `t`.
///
/// The owning cell is found by binary search with ties at interior nodes
/// resolved to the left cell, so t exactly at a node returns that cell's
/// tau = 1 values; in particular v there equals the corrector's node value
/// bit-for-bit. Jumps across cell boundaries are a property of the method
/// and are not smoothed.
///
/// # Errors
/// `OutOfRange` outside the completed part of the grid.
///
/// # Panics
/// Panics if `tables` was built for a different degree than the report.
pub fn eval_local(
    report: &SolveReport,
    tables: &BasisTables,
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    assert_eq!(tables.degree(), report.degree, "basis tables degree mismatch");
    let limit = report.cells.len();
    let nodes = report.grid.node_times();
    let n = report.grid.locate(t, limit).ok_or(EvalError::OutOfRange {
        t,
        covered: (nodes[0], nodes[limit.min(nodes.len() - 1)]),
    })?;
    let cell = &report.cells[n];
    let tau = if t == nodes[n + 1] {
        1.0
    } else {
        ((t - cell.t_left()) / cell.dt()).clamp(0.0, 1.0)
    };
    let phi = tables.eval_basis(tau);
    let mut u = alloc::vec![0.0; report.d_u];
    let mut v = alloc::vec![0.0; report.d_v];
    for p in 0..tables.n_nodes() {
        let w = phi[p];
        for (x, q) in u.iter_mut().zip(cell.q_hat_row(p)) {
            *x += w * q;
        }
        for (x, r) in v.iter_mut().zip(cell.r_hat_row(p)) {
            *x += w * r;
        }
    }
    Ok((u, v))
}

/// One sampled point of the local solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSample {
    /// Sample time.
    pub t: f64,
    /// Differential components.
    pub u: Vec<f64>,
    /// Algebraic components.
    pub v: Vec<f64>,
}

/// Samples the local solution at `m` midpoint-centred sub-nodes per
/// completed cell, tau_j = (j + 1/2)/m; m = 1 gives cell midpoints. The
/// basis rows are evaluated once and re-applied to every cell.
///
/// # Panics
/// Panics if `m == 0` or on a degree mismatch with the report.
pub fn tabulate_local(report: &SolveReport, tables: &BasisTables, m: usize) -> Vec<LocalSample> {
    assert!(m >= 1, "sub-node count must be at least 1");
    assert_eq!(tables.degree(), report.degree, "basis tables degree mismatch");
    let s = tables.n_nodes();
    let taus: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) / m as f64).collect();
    let rows: Vec<Vec<f64>> = taus.iter().map(|&tau| tables.eval_basis(tau)).collect();
    let mut out = Vec::with_capacity(report.cells.len() * m);
    for cell in &report.cells {
        for (tau, phi) in taus.iter().zip(&rows) {
            let t = cell.t_left() + cell.dt() * tau;
            let mut u = alloc::vec![0.0; report.d_u];
            let mut v = alloc::vec![0.0; report.d_v];
            for p in 0..s {
                let w = phi[p];
                for (x, q) in u.iter_mut().zip(cell.q_hat_row(p)) {
                    *x += w * q;
                }
                for (x, r) in v.iter_mut().zip(cell.r_hat_row(p)) {
                    *x += w * r;
                }
            }
            out.push(LocalSample { t, u, v });
        }
    }
    out
}
