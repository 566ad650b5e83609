//! Nodal Radau basis construction for the local DG predictor.
//!
//! For degree `N` the basis lives on the `N+1` roots `tau_0 < ... < tau_N = 1`
//! of the right Radau polynomial
//!
//! ```text
//! R_{N+1}(tau) = ((-1)^{N+1} / 2) * (L_{N+1}(tau) - L_N(tau)),
//! ```
//!
//! where `L_k` are shifted Legendre polynomials on [0, 1]. The Lagrange
//! cardinal polynomials `phi_p` at those nodes satisfy `phi_p(tau_k) =
//! delta_pk`, which makes the mass matrix diagonal, `M = diag(w_k)`, with the
//! Gauss-Radau weights `w_k` normalized to one. The predictor uses
//!
//! ```text
//! K_pq = phi_p(1) phi_q(1) - int_0^1 phi_p'(tau) phi_q(tau) dtau,
//! A    = K^{-1} M,
//! ```
//!
//! and the last row of `A` equals the weights (stiffly accurate structure);
//! row sums of `A` reproduce the nodes. All integrals are evaluated with an
//! `(N+1)`-point Gauss-Legendre rule, which is exact for the integrands here.
//!
//! Basis evaluation at arbitrary `tau` uses the barycentric Lagrange form;
//! monomial coefficients via Vandermonde inversion are ill-conditioned beyond
//! `N ~ 20` and are kept only as a low-degree test oracle.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;


use crate::linalg::{self, DenseMatrix, LinalgError};

/// Degree above which double-precision table construction is no longer
/// guaranteed to meet the stated tolerances; builds are allowed but flagged.
pub const DEGREE_CAP: usize = 30;

/// Errors from basis construction.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisError {
    /// A Radau root refinement did not reach tolerance within 100 iterations.
    ConvergenceFailure { root_index: usize, residual: f64 },
    /// Propagated from the `K` factorization (not expected: Radau nodes are
    /// distinct).
    Linalg(LinalgError),
}

impl fmt::Display for BasisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisError::ConvergenceFailure { root_index, residual } => write!(
                f,
                "Radau root {} did not converge (residual {:.3e})",
                root_index, residual
            ),
            BasisError::Linalg(e) => write!(f, "basis construction failed: {}", e),
        }
    }
}

impl core::error::Error for BasisError {}

impl From<LinalgError> for BasisError {
    fn from(e: LinalgError) -> Self {
        BasisError::Linalg(e)
    }
}

/// Immutable per-degree tables for the predictor and corrector.
#[derive(Debug, Clone)]
pub struct BasisTables {
    degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    a_matrix: DenseMatrix,
    k_inv: DenseMatrix,
    phi_at_zero: Vec<f64>,
    phi_at_one: Vec<f64>,
    barycentric_weights: Vec<f64>,
}

impl BasisTables {
    /// Polynomial degree `N`; the basis has `N+1` nodes.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis nodes, `N+1`.
    pub fn n_nodes(&self) -> usize {
        self.degree + 1
    }

    /// Radau nodes `tau_0 < ... < tau_N` in (0, 1], with `tau_N = 1` exactly.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Gauss-Radau weights, positive and summing to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Predictor matrix `A = K^{-1} M`; `A_pq = int_0^{tau_p} phi_q`.
    pub fn a_matrix(&self) -> &DenseMatrix {
        &self.a_matrix
    }

    /// Inverse of `K_pq = phi_p(1) phi_q(1) - int phi_p' phi_q`.
    pub fn k_inv(&self) -> &DenseMatrix {
        &self.k_inv
    }

    /// Basis values at the left cell edge, `phi_p(0)`.
    pub fn phi_at_zero(&self) -> &[f64] {
        &self.phi_at_zero
    }

    /// Basis values at the right cell edge; equals `(0, ..., 0, 1)`.
    pub fn phi_at_one(&self) -> &[f64] {
        &self.phi_at_one
    }

    /// Barycentric weights (normalized to unit max magnitude).
    pub fn barycentric_weights(&self) -> &[f64] {
        &self.barycentric_weights
    }

    /// Whether the degree is within the double-precision construction cap;
    /// above [`DEGREE_CAP`] conditioning of the tables is not guaranteed.
    pub fn conditioning_guaranteed(&self) -> bool {
        self.degree <= DEGREE_CAP
    }

    /// Evaluates all `phi_p(tau)`.
    ///
    /// Exact Kronecker vectors are returned when `tau` hits a node, so the
    /// interpolation property holds without rounding.
    pub fn eval_basis(&self, tau: f64) -> Vec<f64> {
        let n = self.n_nodes();
        let mut out = vec![0.0; n];
        for (k, &t) in self.nodes.iter().enumerate() {
            if tau == t {
                out[k] = 1.0;
                return out;
            }
        }
        // second barycentric form; scale invariance makes the normalized
        // weights safe
        let mut denom = 0.0;
        for k in 0..n {
            let term = self.barycentric_weights[k] / (tau - self.nodes[k]);
            out[k] = term;
            denom += term;
        }
        for v in out.iter_mut() {
            *v /= denom;
        }
        out
    }

    /// Evaluates all basis derivatives `phi_p'(tau)` at a point that is not a
    /// node (sufficient for quadrature at Gauss-Legendre points, which never
    /// coincide with Radau points).
    fn eval_basis_derivative_off_nodes(&self, tau: f64) -> Vec<f64> {
        let n = self.n_nodes();
        let phi = self.eval_basis(tau);
        let mut sum_all = 0.0;
        for k in 0..n {
            sum_all += 1.0 / (tau - self.nodes[k]);
        }
        let mut out = vec![0.0; n];
        for k in 0..n {
            out[k] = phi[k] * (sum_all - 1.0 / (tau - self.nodes[k]));
        }
        out
    }
}

/// Right Radau polynomial `R_s` and derivative at `tau` in [0, 1], where
/// `R_s = ((-1)^s / 2) (L_s - L_{s-1})` in shifted Legendre polynomials.
fn radau_poly_with_derivative(s: usize, tau: f64) -> (f64, f64) {
    let x = 2.0 * tau - 1.0;
    let (ps, dps) = linalg::legendre_with_derivative(s, x);
    let (pm, dpm) = linalg::legendre_with_derivative(s - 1, x);
    let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
    // chain rule: d/dtau = 2 d/dx
    (sign * 0.5 * (ps - pm), sign * (dps - dpm))
}

/// Roots of the degree-`s` right Radau polynomial: `s` strictly increasing
/// values in (0, 1] with the last pinned to 1.
///
/// Interior roots are bracketed between adjacent `s`-point Gauss-Legendre
/// nodes and refined by a bisection-safeguarded Newton iteration.
///
/// # Errors
/// [`BasisError::ConvergenceFailure`] if a refinement does not reach residual
/// `<= 1e-13` in 100 iterations.
///
/// # Panics
/// Panics if `n_points == 0`.
pub fn radau_nodes(n_points: usize) -> Result<Vec<f64>, BasisError> {
    assert!(n_points >= 1, "need at least one node");
    let s = n_points;
    let mut roots = vec![0.0; s];
    roots[s - 1] = 1.0;
    if s == 1 {
        return Ok(roots);
    }
    let (gl_nodes, _) = linalg::gauss_legendre_rule(s);
    for i in 0..(s - 1) {
        let mut lo = gl_nodes[i];
        let mut hi = gl_nodes[i + 1];
        let (f_lo, _) = radau_poly_with_derivative(s, lo);
        let mut x = 0.5 * (lo + hi);
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..100 {
            let (f, df) = radau_poly_with_derivative(s, x);
            residual = f.abs();
            if residual <= 1e-13 {
                converged = true;
                break;
            }
            // keep the bracket alive for the bisection fallback
            if (f > 0.0) == (f_lo > 0.0) {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - f / df;
            x = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        if !converged {
            return Err(BasisError::ConvergenceFailure { root_index: i, residual });
        }
        // one polishing step
        let (f, df) = radau_poly_with_derivative(s, x);
        let polished = x - f / df;
        if polished > 0.0 && polished < 1.0 {
            x = polished;
        }
        roots[i] = x;
    }
    Ok(roots)
}

/// Builds the full table set for degree `n`.
///
/// Degrees above [`DEGREE_CAP`] are permitted but flagged via
/// [`BasisTables::conditioning_guaranteed`].
///
/// # Errors
/// Propagates root-refinement failures and (never expected for distinct
/// nodes) a singular `K`.
pub fn build_tables(n: usize) -> Result<BasisTables, BasisError> {
    let s = n + 1;
    let nodes = radau_nodes(s)?;

    // barycentric weights b_j = 1 / prod_{i != j} (tau_j - tau_i),
    // normalized to unit max magnitude (the second form is scale invariant)
    let mut bary = vec![0.0; s];
    for j in 0..s {
        let mut prod = 1.0;
        for i in 0..s {
            if i != j {
                prod *= nodes[j] - nodes[i];
            }
        }
        bary[j] = 1.0 / prod;
    }
    let bmax = bary.iter().fold(0.0f64, |m, &b| m.max(b.abs()));
    for b in bary.iter_mut() {
        *b /= bmax;
    }

    let mut tables = BasisTables {
        degree: n,
        nodes,
        weights: vec![0.0; s],
        a_matrix: DenseMatrix::zeros(s, s),
        k_inv: DenseMatrix::zeros(s, s),
        phi_at_zero: vec![0.0; s],
        phi_at_one: vec![0.0; s],
        barycentric_weights: bary,
    };

    tables.phi_at_zero = tables.eval_basis(0.0);
    tables.phi_at_one = tables.eval_basis(1.0);

    // (N+1)-point Gauss-Legendre: exact for phi_k (degree N), phi_k^2
    // (degree 2N) and phi_p' phi_q (degree 2N-1)
    let (gl_nodes, gl_weights) = linalg::gauss_legendre_rule(s);
    let phi_at_gl: Vec<Vec<f64>> = gl_nodes.iter().map(|&x| tables.eval_basis(x)).collect();
    let dphi_at_gl: Vec<Vec<f64>> = gl_nodes
        .iter()
        .map(|&x| tables.eval_basis_derivative_off_nodes(x))
        .collect();

    for k in 0..s {
        let mut w = 0.0;
        for (g, &gw) in gl_weights.iter().enumerate() {
            w += gw * phi_at_gl[g][k];
        }
        tables.weights[k] = w;
    }

    let mut k_matrix = DenseMatrix::zeros(s, s);
    for p in 0..s {
        for q in 0..s {
            let mut integral = 0.0;
            for (g, &gw) in gl_weights.iter().enumerate() {
                integral += gw * dphi_at_gl[g][p] * phi_at_gl[g][q];
            }
            let boundary = tables.phi_at_one[p] * tables.phi_at_one[q];
            k_matrix.set(p, q, boundary - integral);
        }
    }

    tables.k_inv = linalg::invert(&k_matrix)?;
    // A = K^{-1} M with M = diag(w): scale columns by the weights
    for p in 0..s {
        for q in 0..s {
            tables
                .a_matrix
                .set(p, q, tables.k_inv.get(p, q) * tables.weights[q]);
        }
    }
    Ok(tables)
}
