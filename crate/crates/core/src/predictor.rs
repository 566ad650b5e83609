//! Per-cell predictor: Newton iteration on the collocation system
//! q_p - sum_q A_pq f(q_q, r_q, t(tau_q)) = u_n, g(q_p, r_p, t(tau_p)) = 0,
//! with f = dt * F rescaled to the reference cell and g = G unscaled.
//!
//! The linearized system has block shape [[P, Q], [blockdiag R, blockdiag S]]
//! over unknowns [dq (node-major); dr (node-major)]. Either variable family
//! can be eliminated through the small per-node diagonal blocks before the
//! single LU of the iteration; the increments are unchanged up to roundoff.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;


use crate::basis::BasisTables;
use crate::dae_model::DaeProblem;
use crate::linalg::{self, DenseMatrix, LinalgError, LuFactors};

/// Per-Jacobian evaluation counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JacCounters {
    /// dF/du evaluations.
    pub jf_u: u64,
    /// dF/dv evaluations.
    pub jf_v: u64,
    /// dG/du evaluations.
    pub jg_u: u64,
    /// dG/dv evaluations.
    pub jg_v: u64,
}

/// Work counters accumulated across Newton iterations and cells.
///
/// One iteration costs exactly N+1 evaluations of each of F, G and the four
/// Jacobians (the G family is skipped entirely when d_v = 0) plus one LU
/// factorization of the active, possibly reduced, linear system. The small
/// per-node factorizations used by the eliminations are not LUs of the
/// active system and are not counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    /// F evaluations.
    pub f_evals: u64,
    /// G evaluations.
    pub g_evals: u64,
    /// Jacobian evaluations, per block.
    pub jac_evals: JacCounters,
    /// LU factorizations of the active per-iteration system.
    pub lu_factorizations: u64,
    /// Newton iterations over all cells.
    pub newton_iterations: u64,
}

/// Which linear-system formulation the Newton iteration uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    /// Full block system of size (N+1)(d_u + d_v).
    FullBlock,
    /// Eliminate dq through the R_p blocks (requires d_u = d_v).
    ViaR,
    /// Eliminate dr through the S_p blocks.
    ViaS,
    /// Probe S_p then R_p at the first iteration and commit per cell.
    Auto,
}

/// Newton iteration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Convergence threshold on the max increment; `None` selects
    /// 1e-13 (1 + inf-norm of the entering node state) per cell.
    pub tolerance: Option<f64>,
    /// Iteration cap.
    pub max_iterations: usize,
    /// Linear-system formulation.
    pub reduction: Reduction,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tolerance: None,
            max_iterations: 50,
            reduction: Reduction::Auto,
        }
    }
}

/// Per-iteration increment history of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonTrace {
    increments: Vec<f64>,
    converged: bool,
}

impl NewtonTrace {
    /// Max-increment value of every iteration actually performed.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Whether the increment fell under the tolerance.
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Number of iterations performed.
    pub fn iterations(&self) -> usize {
        self.increments.len()
    }
}

/// Converged predictor coefficients of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    cell_index: usize,
    t_left: f64,
    dt: f64,
    d_u: usize,
    d_v: usize,
    q_hat: Vec<f64>,
    r_hat: Vec<f64>,
    f_cache: Vec<f64>,
}

impl CellSolution {
    /// Index of the cell within its run.
    pub fn cell_index(&self) -> usize {
        self.cell_index
    }

    /// Left node time.
    pub fn t_left(&self) -> f64 {
        self.t_left
    }

    /// Cell width.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Differential dimension.
    pub fn d_u(&self) -> usize {
        self.d_u
    }

    /// Algebraic dimension.
    pub fn d_v(&self) -> usize {
        self.d_v
    }

    /// Node count N+1.
    pub fn n_nodes(&self) -> usize {
        if self.d_u == 0 {
            0
        } else {
            self.q_hat.len() / self.d_u
        }
    }

    /// Differential coefficients at basis node `p`.
    pub fn q_hat_row(&self, p: usize) -> &[f64] {
        &self.q_hat[p * self.d_u..(p + 1) * self.d_u]
    }

    /// Algebraic coefficients at basis node `p` (empty when d_v = 0).
    pub fn r_hat_row(&self, p: usize) -> &[f64] {
        &self.r_hat[p * self.d_v..(p + 1) * self.d_v]
    }

    /// Cached dt-scaled right-hand side dt F at node `p`, from the final
    /// Newton assembly; the corrector re-uses it without further F calls.
    pub fn f_cache_row(&self, p: usize) -> &[f64] {
        &self.f_cache[p * self.d_u..(p + 1) * self.d_u]
    }
}

/// Predictor failures.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictorError {
    /// Iteration cap hit, the increment grew three times in a row, or a
    /// non-finite increment appeared.
    NonConvergence { iterations: usize, last_increment: f64 },
    /// Requested elimination needs square, invertible diagonal blocks.
    ReductionInapplicable { what: String },
    /// The active linear system lost a pivot.
    Singular(LinalgError),
}

impl fmt::Display for PredictorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictorError::NonConvergence { iterations, last_increment } => write!(
                f,
                "newton iteration failed to converge after {} iterations (last increment {:e})",
                iterations, last_increment
            ),
            PredictorError::ReductionInapplicable { what } => {
                write!(f, "block elimination inapplicable: {}", what)
            }
            PredictorError::Singular(e) => write!(f, "newton system: {}", e),
        }
    }
}

impl core::error::Error for PredictorError {}

impl From<LinalgError> for PredictorError {
    fn from(e: LinalgError) -> Self {
        PredictorError::Singular(e)
    }
}

/// Constant-in-time starting iterate: every node row copies (u_n, v_n).
pub fn initial_guess(u_n: &[f64], v_n: &[f64], tables: &BasisTables) -> (Vec<f64>, Vec<f64>) {
    let s = tables.n_nodes();
    let mut q_hat = Vec::with_capacity(s * u_n.len());
    let mut r_hat = Vec::with_capacity(s * v_n.len());
    for _ in 0..s {
        q_hat.extend_from_slice(u_n);
        r_hat.extend_from_slice(v_n);
    }
    (q_hat, r_hat)
}

/// Linearization blocks of one Newton iteration.
///
/// P is dense (N+1) d_u square, Q is (N+1) d_u by (N+1) d_v; the constraint
/// rows are block-diagonal with per-node R_p (d_v x d_u) and S_p (d_v x d_v).
pub struct NewtonBlocks {
    s: usize,
    d_u: usize,
    d_v: usize,
    p: DenseMatrix,
    q: DenseMatrix,
    r_blocks: Vec<DenseMatrix>,
    s_blocks: Vec<DenseMatrix>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl NewtonBlocks {
    /// Node count N+1.
    pub fn n_nodes(&self) -> usize {
        self.s
    }

    /// Prediction block P = I - A (dt dF/du).
    pub fn p(&self) -> &DenseMatrix {
        &self.p
    }

    /// Prediction block Q = -A (dt dF/dv).
    pub fn q(&self) -> &DenseMatrix {
        &self.q
    }

    /// Constraint block R_p = dG/du at node `p`.
    pub fn r_block(&self, p: usize) -> &DenseMatrix {
        &self.r_blocks[p]
    }

    /// Constraint block S_p = dG/dv at node `p`.
    pub fn s_block(&self, p: usize) -> &DenseMatrix {
        &self.s_blocks[p]
    }

    /// Prediction residual rhs b_p = u_n + sum_q A_pq f_q - q_p.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Constraint residual rhs c_p = -g_p.
    pub fn c(&self) -> &[f64] {
        &self.c
    }
}

/// Evaluates every node function and Jacobian once and forms the blocks;
/// returns the dt-scaled right-hand-side values alongside for caching.
#[allow(clippy::too_many_arguments)]
fn assemble_blocks(
    problem: &DaeProblem,
    tables: &BasisTables,
    dt: f64,
    t_left: f64,
    u_n: &[f64],
    q_hat: &[f64],
    r_hat: &[f64],
    counters: &mut Counters,
) -> (NewtonBlocks, Vec<f64>) {
    let s = tables.n_nodes();
    let d_u = problem.d_u();
    let d_v = problem.d_v();
    let a = tables.a_matrix();

    let mut f_vals = vec![0.0; s * d_u];
    let mut g_vals = vec![0.0; s * d_v];
    let mut jfu = Vec::with_capacity(s);
    let mut jfv = Vec::with_capacity(s);
    let mut r_blocks = Vec::with_capacity(s);
    let mut s_blocks = Vec::with_capacity(s);

    for node in 0..s {
        let t = t_left + dt * tables.nodes()[node];
        let qu = &q_hat[node * d_u..(node + 1) * d_u];
        let rv = &r_hat[node * d_v..(node + 1) * d_v];

        let f_row = &mut f_vals[node * d_u..(node + 1) * d_u];
        problem.eval_f(qu, rv, t, f_row);
        counters.f_evals += 1;
        for x in f_row.iter_mut() {
            *x *= dt;
        }

        let mut m = DenseMatrix::zeros(d_u, d_u);
        problem.eval_jf_u(qu, rv, t, &mut m);
        counters.jac_evals.jf_u += 1;
        for e in 0..d_u * d_u {
            let v = m.entries()[e] * dt;
            m.set(e / d_u, e % d_u, v);
        }
        jfu.push(m);

        if d_v > 0 {
            problem.eval_g(qu, rv, t, &mut g_vals[node * d_v..(node + 1) * d_v]);
            counters.g_evals += 1;

            let mut m = DenseMatrix::zeros(d_u, d_v);
            problem.eval_jf_v(qu, rv, t, &mut m);
            counters.jac_evals.jf_v += 1;
            for r in 0..d_u {
                for c in 0..d_v {
                    let v = m.get(r, c) * dt;
                    m.set(r, c, v);
                }
            }
            jfv.push(m);

            let mut r = DenseMatrix::zeros(d_v, d_u);
            problem.eval_jg_u(qu, rv, t, &mut r);
            counters.jac_evals.jg_u += 1;
            r_blocks.push(r);

            let mut sm = DenseMatrix::zeros(d_v, d_v);
            problem.eval_jg_v(qu, rv, t, &mut sm);
            counters.jac_evals.jg_v += 1;
            s_blocks.push(sm);
        }
    }

    let mut p = DenseMatrix::zeros(s * d_u, s * d_u);
    for bp in 0..s {
        for bq in 0..s {
            let apq = a.get(bp, bq);
            for i in 0..d_u {
                for j in 0..d_u {
                    let mut v = -apq * jfu[bq].get(i, j);
                    if bp == bq && i == j {
                        v += 1.0;
                    }
                    p.set(bp * d_u + i, bq * d_u + j, v);
                }
            }
        }
    }

    let mut q = DenseMatrix::zeros(s * d_u, s * d_v);
    if d_v > 0 {
        for bp in 0..s {
            for bq in 0..s {
                let apq = a.get(bp, bq);
                for i in 0..d_u {
                    for j in 0..d_v {
                        q.set(bp * d_u + i, bq * d_v + j, -apq * jfv[bq].get(i, j));
                    }
                }
            }
        }
    }

    let mut b = vec![0.0; s * d_u];
    for bp in 0..s {
        for i in 0..d_u {
            let mut acc = u_n[i] - q_hat[bp * d_u + i];
            for bq in 0..s {
                acc += a.get(bp, bq) * f_vals[bq * d_u + i];
            }
            b[bp * d_u + i] = acc;
        }
    }
    let c: Vec<f64> = g_vals.iter().map(|&g| -g).collect();

    (
        NewtonBlocks { s, d_u, d_v, p, q, r_blocks, s_blocks, b, c },
        f_vals,
    )
}

/// Assembles the Newton system in block form at the given iterate,
/// incrementing the evaluation counters.  The second return value holds the
/// dt-scaled right-hand-side rows f(q_p, r_p, t_p), node-major.
#[allow(clippy::too_many_arguments)]
pub fn assemble_newton_blocks(
    problem: &DaeProblem,
    tables: &BasisTables,
    dt: f64,
    t_left: f64,
    u_n: &[f64],
    q_hat: &[f64],
    r_hat: &[f64],
    counters: &mut Counters,
) -> (NewtonBlocks, Vec<f64>) {
    assemble_blocks(problem, tables, dt, t_left, u_n, q_hat, r_hat, counters)
}

/// Assembles the full block matrix [[P, Q], [blockdiag R, blockdiag S]] and
/// rhs [b; c] at the given iterate, incrementing the evaluation counters.
#[allow(clippy::too_many_arguments)]
pub fn assemble_newton_system(
    problem: &DaeProblem,
    tables: &BasisTables,
    dt: f64,
    t_left: f64,
    u_n: &[f64],
    q_hat: &[f64],
    r_hat: &[f64],
    counters: &mut Counters,
) -> (DenseMatrix, Vec<f64>) {
    let (blocks, _f_vals) =
        assemble_blocks(problem, tables, dt, t_left, u_n, q_hat, r_hat, counters);
    build_full_system(&blocks)
}

/// Full system assembly from precomputed blocks.
fn build_full_system(blocks: &NewtonBlocks) -> (DenseMatrix, Vec<f64>) {
    let (s, d_u, d_v) = (blocks.s, blocks.d_u, blocks.d_v);
    let nu = s * d_u;
    let nv = s * d_v;
    let n = nu + nv;
    let mut m = DenseMatrix::zeros(n, n);
    for r in 0..nu {
        for c in 0..nu {
            m.set(r, c, blocks.p.get(r, c));
        }
        for c in 0..nv {
            m.set(r, nu + c, blocks.q.get(r, c));
        }
    }
    for node in 0..s {
        if d_v == 0 {
            break;
        }
        let rb = &blocks.r_blocks[node];
        let sb = &blocks.s_blocks[node];
        for i in 0..d_v {
            for j in 0..d_u {
                m.set(nu + node * d_v + i, node * d_u + j, rb.get(i, j));
            }
            for j in 0..d_v {
                m.set(nu + node * d_v + i, nu + node * d_v + j, sb.get(i, j));
            }
        }
    }
    let mut rhs = Vec::with_capacity(n);
    rhs.extend_from_slice(&blocks.b);
    rhs.extend_from_slice(&blocks.c);
    (m, rhs)
}

/// A reduced linear system plus the data to recover the eliminated family.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    matrix: DenseMatrix,
    rhs: Vec<f64>,
    // per node: block applied to the solved increment, and eliminated rhs part
    elim_apply: Vec<DenseMatrix>,
    elim_rhs: Vec<Vec<f64>>,
    solved_width: usize,
    elim_width: usize,
}

impl ReducedSystem {
    /// Reduced matrix.
    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    /// Reduced right-hand side.
    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Recovers the eliminated increments from the solved ones,
    /// node by node: eliminated_p = elim_rhs_p - elim_apply_p solved_p.
    pub fn back_substitute(&self, solved: &[f64]) -> Vec<f64> {
        let s = self.elim_apply.len();
        let mut out = vec![0.0; s * self.elim_width];
        for node in 0..s {
            let sol = &solved[node * self.solved_width..(node + 1) * self.solved_width];
            let correction = self.elim_apply[node].mul_vec(sol);
            for i in 0..self.elim_width {
                out[node * self.elim_width + i] = self.elim_rhs[node][i] - correction[i];
            }
        }
        out
    }
}

/// Pivot-ratio floor below which a diagonal block set is treated as
/// effectively singular for elimination purposes.
const ELIMINATION_PIVOT_FLOOR: f64 = 1e-10;

fn factor_block(m: &DenseMatrix, family: &str, node: usize) -> Result<LuFactors, PredictorError> {
    let f = linalg::lu_factor(m).map_err(|_| PredictorError::ReductionInapplicable {
        what: format!("{} block at node {} is singular", family, node),
    })?;
    if f.pivot_ratio() <= ELIMINATION_PIVOT_FLOOR {
        return Err(PredictorError::ReductionInapplicable {
            what: format!(
                "{} block at node {} is ill-conditioned (pivot ratio {:e})",
                family,
                node,
                f.pivot_ratio()
            ),
        });
    }
    Ok(f)
}

/// Eliminates dr through the S_p blocks: the reduced matrix is
/// V = P - Q blockdiag(S_q^-1 R_q) with rhs h = b - Q blockdiag(S_q^-1) c,
/// solved for dq; dr follows by back-substitution. With d_v = 0 this is the
/// degenerate no-op returning (P, b).
///
/// # Errors
/// `ReductionInapplicable` when any S_p is singular or ill-conditioned.
pub fn reduce_via_s(blocks: &NewtonBlocks) -> Result<ReducedSystem, PredictorError> {
    let (s, d_u, d_v) = (blocks.s, blocks.d_u, blocks.d_v);
    if d_v == 0 {
        return Ok(ReducedSystem {
            matrix: blocks.p.clone(),
            rhs: blocks.b.clone(),
            elim_apply: Vec::new(),
            elim_rhs: Vec::new(),
            solved_width: d_u,
            elim_width: 0,
        });
    }
    let mut sinv_r = Vec::with_capacity(s);
    let mut sinv_c = Vec::with_capacity(s);
    for node in 0..s {
        let f = factor_block(&blocks.s_blocks[node], "S", node)?;
        sinv_r.push(linalg::lu_solve_columns(&f, &blocks.r_blocks[node]));
        sinv_c.push(linalg::lu_solve(&f, &blocks.c[node * d_v..(node + 1) * d_v]));
    }

    let nu = s * d_u;
    let mut v = blocks.p.clone();
    for bq in 0..s {
        let red = &sinv_r[bq]; // d_v x d_u
        for r in 0..nu {
            for j in 0..d_u {
                let mut acc = 0.0;
                for m in 0..d_v {
                    acc += blocks.q.get(r, bq * d_v + m) * red.get(m, j);
                }
                let val = v.get(r, bq * d_u + j) - acc;
                v.set(r, bq * d_u + j, val);
            }
        }
    }
    let mut h = blocks.b.clone();
    for r in 0..nu {
        let mut acc = 0.0;
        for bq in 0..s {
            for m in 0..d_v {
                acc += blocks.q.get(r, bq * d_v + m) * sinv_c[bq][m];
            }
        }
        h[r] -= acc;
    }
    Ok(ReducedSystem {
        matrix: v,
        rhs: h,
        elim_apply: sinv_r,
        elim_rhs: sinv_c,
        solved_width: d_u,
        elim_width: d_v,
    })
}

/// Eliminates dq through the R_p blocks (requires d_u = d_v): the reduced
/// matrix is U = Q - P blockdiag(R_q^-1 S_q) with rhs
/// d = b - P blockdiag(R_q^-1) c, solved for dr; dq follows by
/// back-substitution.
///
/// # Errors
/// `ReductionInapplicable` for non-square (d_u != d_v), singular or
/// ill-conditioned R_p.
pub fn reduce_via_r(blocks: &NewtonBlocks) -> Result<ReducedSystem, PredictorError> {
    let (s, d_u, d_v) = (blocks.s, blocks.d_u, blocks.d_v);
    if d_u != d_v {
        return Err(PredictorError::ReductionInapplicable {
            what: format!("R blocks are {}x{}, not square", d_v, d_u),
        });
    }
    let mut rinv_s = Vec::with_capacity(s);
    let mut rinv_c = Vec::with_capacity(s);
    for node in 0..s {
        let f = factor_block(&blocks.r_blocks[node], "R", node)?;
        rinv_s.push(linalg::lu_solve_columns(&f, &blocks.s_blocks[node]));
        rinv_c.push(linalg::lu_solve(&f, &blocks.c[node * d_v..(node + 1) * d_v]));
    }

    let nu = s * d_u;
    let mut u = blocks.q.clone();
    for bq in 0..s {
        let red = &rinv_s[bq]; // d_u x d_v
        for r in 0..nu {
            for j in 0..d_v {
                let mut acc = 0.0;
                for m in 0..d_u {
                    acc += blocks.p.get(r, bq * d_u + m) * red.get(m, j);
                }
                let val = u.get(r, bq * d_v + j) - acc;
                u.set(r, bq * d_v + j, val);
            }
        }
    }
    let mut d = blocks.b.clone();
    for r in 0..nu {
        let mut acc = 0.0;
        for bq in 0..s {
            for m in 0..d_u {
                acc += blocks.p.get(r, bq * d_u + m) * rinv_c[bq][m];
            }
        }
        d[r] -= acc;
    }
    Ok(ReducedSystem {
        matrix: u,
        rhs: d,
        elim_apply: rinv_s,
        elim_rhs: rinv_c,
        solved_width: d_v,
        elim_width: d_u,
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ActiveMode {
    Full,
    ViaS,
    ViaR,
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, &v| m.max(v.abs()))
}

/// Solves the predictor system of one cell.
///
/// Iterates full Newton (Jacobians refreshed every pass) from the constant
/// initial guess until the max increment over both families falls under the
/// tolerance. `Auto` probes the S_p blocks, then the R_p blocks when square,
/// at the first iteration and commits the choice for the cell; a forced
/// elimination that turns out inapplicable falls back to the full block
/// system. The returned cell keeps the right-hand-side values of the final
/// assembly so the corrector needs no further F evaluations.
///
/// # Errors
/// `NonConvergence` after `max_iterations`, three consecutive increment
/// growths, or a non-finite increment; `Singular` if the active system loses
/// a pivot.
#[allow(clippy::too_many_arguments)]
pub fn newton_solve(
    problem: &DaeProblem,
    tables: &BasisTables,
    dt: f64,
    t_left: f64,
    u_n: &[f64],
    v_n: &[f64],
    opts: &NewtonOptions,
    counters: &mut Counters,
) -> Result<(CellSolution, NewtonTrace), PredictorError> {
    let d_u = problem.d_u();
    let d_v = problem.d_v();
    let tolerance = opts
        .tolerance
        .unwrap_or_else(|| 1e-13 * (1.0 + max_abs(u_n).max(max_abs(v_n))));
    let (mut q_hat, mut r_hat) = initial_guess(u_n, v_n, tables);
    let mut increments: Vec<f64> = Vec::new();
    let mut committed: Option<ActiveMode> = match opts.reduction {
        Reduction::FullBlock => Some(ActiveMode::Full),
        _ => None,
    };
    let mut grow_streak = 0usize;

    for _iter in 0..opts.max_iterations {
        let (blocks, f_vals) =
            assemble_blocks(problem, tables, dt, t_left, u_n, &q_hat, &r_hat, counters);

        // mode selection: on the first pass for Auto, or retained thereafter;
        // inapplicable eliminations degrade to the full block system
        let mode = match committed {
            Some(m) => m,
            None => {
                let chosen = match opts.reduction {
                    Reduction::ViaS => match reduce_via_s(&blocks) {
                        Ok(_) => ActiveMode::ViaS,
                        Err(_) => ActiveMode::Full,
                    },
                    Reduction::ViaR => match reduce_via_r(&blocks) {
                        Ok(_) => ActiveMode::ViaR,
                        Err(_) => ActiveMode::Full,
                    },
                    Reduction::Auto => {
                        if reduce_via_s(&blocks).is_ok() {
                            ActiveMode::ViaS
                        } else if reduce_via_r(&blocks).is_ok() {
                            ActiveMode::ViaR
                        } else {
                            ActiveMode::Full
                        }
                    }
                    Reduction::FullBlock => ActiveMode::Full,
                };
                committed = Some(chosen);
                chosen
            }
        };

        let (dq, dr) = match mode {
            ActiveMode::Full => {
                let (m, rhs) = build_full_system(&blocks);
                counters.lu_factorizations += 1;
                let f = linalg::lu_factor(&m)?;
                let sol = linalg::lu_solve(&f, &rhs);
                let nu = blocks.s * d_u;
                (sol[..nu].to_vec(), sol[nu..].to_vec())
            }
            ActiveMode::ViaS => match reduce_via_s(&blocks) {
                Ok(red) => {
                    counters.lu_factorizations += 1;
                    let f = linalg::lu_factor(red.matrix())?;
                    let dq = linalg::lu_solve(&f, red.rhs());
                    let dr = red.back_substitute(&dq);
                    (dq, dr)
                }
                Err(_) => {
                    // block went singular mid-run: stay on full from now on
                    committed = Some(ActiveMode::Full);
                    let (m, rhs) = build_full_system(&blocks);
                    counters.lu_factorizations += 1;
                    let f = linalg::lu_factor(&m)?;
                    let sol = linalg::lu_solve(&f, &rhs);
                    let nu = blocks.s * d_u;
                    (sol[..nu].to_vec(), sol[nu..].to_vec())
                }
            },
            ActiveMode::ViaR => match reduce_via_r(&blocks) {
                Ok(red) => {
                    counters.lu_factorizations += 1;
                    let f = linalg::lu_factor(red.matrix())?;
                    let dr = linalg::lu_solve(&f, red.rhs());
                    let dq = red.back_substitute(&dr);
                    (dq, dr)
                }
                Err(_) => {
                    committed = Some(ActiveMode::Full);
                    let (m, rhs) = build_full_system(&blocks);
                    counters.lu_factorizations += 1;
                    let f = linalg::lu_factor(&m)?;
                    let sol = linalg::lu_solve(&f, &rhs);
                    let nu = blocks.s * d_u;
                    (sol[..nu].to_vec(), sol[nu..].to_vec())
                }
            },
        };

        for (x, d) in q_hat.iter_mut().zip(&dq) {
            *x += d;
        }
        for (x, d) in r_hat.iter_mut().zip(&dr) {
            *x += d;
        }
        let increment = max_abs(&dq).max(max_abs(&dr));
        counters.newton_iterations += 1;

        if !increment.is_finite() {
            increments.push(increment);
            return Err(PredictorError::NonConvergence {
                iterations: increments.len(),
                last_increment: increment,
            });
        }
        let grew = increments.last().map_or(false, |&prev| increment > prev);
        increments.push(increment);
        if increment <= tolerance {
            let trace = NewtonTrace { increments, converged: true };
            let cell = CellSolution {
                cell_index: 0,
                t_left,
                dt,
                d_u,
                d_v,
                q_hat,
                r_hat,
                f_cache: f_vals,
            };
            return Ok((cell, trace));
        }
        if grew {
            grow_streak += 1;
            if grow_streak >= 3 {
                return Err(PredictorError::NonConvergence {
                    iterations: increments.len(),
                    last_increment: increment,
                });
            }
        } else {
            grow_streak = 0;
        }
    }
    let last = increments.last().copied().unwrap_or(f64::INFINITY);
    Err(PredictorError::NonConvergence {
        iterations: increments.len(),
        last_increment: last,
    })
}

/// Stamps the owning cell index onto a solution (the predictor itself is
/// cell-agnostic).
pub fn with_cell_index(mut cell: CellSolution, index: usize) -> CellSolution {
    cell.cell_index = index;
    cell
}
