//! Dense real and complex linear algebra used by the rest of the crate.
//!
//! The Newton block systems of the predictor are dense and moderately sized
//! ((N+1)*(d_u+d_v) stays in the low hundreds), so a straightforward LU with
//! partial (row) pivoting is sufficient; no sparse storage or iterative
//! solvers are provided. The module also carries a fixed-order Gauss-Legendre
//! rule on [0, 1] used to evaluate the basis integrals exactly.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
// Float supplies libm-backed f64 math in no_std builds; std test builds
// resolve the same methods inherently, leaving the import unused there.
#[allow(unused_imports)]
use num_traits::Float;

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from row-major entries.
    ///
    /// # Panics
    /// Panics if `entries.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<f64>) -> Self {
        assert_eq!(
            entries.len(),
            rows * cols,
            "entry count {} does not match shape {}x{}",
            entries.len(),
            rows,
            cols
        );
        DenseMatrix { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.entries[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.entries[r * self.cols + c] = value;
    }

    /// Row `r` as a slice.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    /// All entries in row-major order.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Largest absolute entry; zero for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, &e| m.max(e.abs()))
    }

    /// Matrix-vector product `self * x`.
    ///
    /// # Panics
    /// Panics if `x.len() != self.cols()`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "vector length mismatch");
        let mut out = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = self.row(r);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            out[r] = acc;
        }
        out
    }

    /// Matrix product `self * other`.
    ///
    /// # Panics
    /// Panics if the inner dimensions differ.
    pub fn mul_mat(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out.entries[r * other.cols + c] += a * other.get(k, c);
                }
            }
        }
        out
    }
}

/// Errors from the dense factorizations.
#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    /// A pivot fell below `1e3 * machine_epsilon * max_abs(a)`; the matrix is
    /// singular to working precision.
    SingularMatrix { pivot_row: usize },
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::SingularMatrix { pivot_row } => {
                write!(f, "singular matrix: no usable pivot in column {}", pivot_row)
            }
        }
    }
}

impl core::error::Error for LinalgError {}

/// Packed LU factorization `P * a = L * U` with unit-diagonal `L`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    factors: DenseMatrix,
    pivots: Vec<usize>,
}

impl LuFactors {
    pub fn order(&self) -> usize {
        self.factors.rows()
    }

    /// Row permutation: row `i` of `P * a` is row `pivots[i]` of `a`.
    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Packed factors: strict lower triangle holds `L` (unit diagonal
    /// implied), upper triangle holds `U`.
    pub fn factors(&self) -> &DenseMatrix {
        &self.factors
    }

    /// Ratio of the smallest to the largest absolute U-diagonal entry; a
    /// cheap conditioning probe (1.0 best, 0.0 singular).
    pub fn pivot_ratio(&self) -> f64 {
        let n = self.order();
        if n == 0 {
            return 1.0;
        }
        let mut min = f64::INFINITY;
        let mut max: f64 = 0.0;
        for i in 0..n {
            let d = self.factors.get(i, i).abs();
            min = min.min(d);
            max = max.max(d);
        }
        if max == 0.0 {
            0.0
        } else {
            min / max
        }
    }
}

/// LU factorization with partial pivoting.
///
/// # Errors
/// [`LinalgError::SingularMatrix`] when a pivot magnitude falls below
/// `1e3 * machine_epsilon * max_abs(a)`.
///
/// # Panics
/// Panics if `a` is not square.
pub fn lu_factor(a: &DenseMatrix) -> Result<LuFactors, LinalgError> {
    assert_eq!(a.rows(), a.cols(), "lu_factor requires a square matrix");
    let n = a.rows();
    let mut f = a.clone();
    let mut pivots: Vec<usize> = (0..n).collect();
    let tiny = 1e3 * f64::EPSILON * a.max_abs();

    for k in 0..n {
        let mut best = k;
        let mut best_abs = f.get(k, k).abs();
        for r in (k + 1)..n {
            let v = f.get(r, k).abs();
            if v > best_abs {
                best = r;
                best_abs = v;
            }
        }
        if best_abs <= tiny {
            return Err(LinalgError::SingularMatrix { pivot_row: k });
        }
        if best != k {
            for c in 0..n {
                let t = f.get(k, c);
                f.set(k, c, f.get(best, c));
                f.set(best, c, t);
            }
            pivots.swap(k, best);
        }
        let pivot = f.get(k, k);
        for r in (k + 1)..n {
            let m = f.get(r, k) / pivot;
            f.set(r, k, m);
            if m == 0.0 {
                continue;
            }
            for c in (k + 1)..n {
                let v = f.get(r, c) - m * f.get(k, c);
                f.set(r, c, v);
            }
        }
    }
    Ok(LuFactors { factors: f, pivots })
}

/// Solves `a * x = rhs` from a prior factorization.
///
/// # Panics
/// Panics if `rhs.len()` does not match the factored order.
pub fn lu_solve(f: &LuFactors, rhs: &[f64]) -> Vec<f64> {
    let n = f.order();
    assert_eq!(rhs.len(), n, "rhs length mismatch");
    let mut x = vec![0.0; n];
    for i in 0..n {
        x[i] = rhs[f.pivots[i]];
    }
    // forward substitution with unit-diagonal L
    for i in 0..n {
        let mut acc = x[i];
        for j in 0..i {
            acc -= f.factors.get(i, j) * x[j];
        }
        x[i] = acc;
    }
    // back substitution with U
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in (i + 1)..n {
            acc -= f.factors.get(i, j) * x[j];
        }
        x[i] = acc / f.factors.get(i, i);
    }
    x
}

/// Column-by-column solve for a multi-column right-hand side.
pub fn lu_solve_columns(f: &LuFactors, rhs: &DenseMatrix) -> DenseMatrix {
    let n = f.order();
    assert_eq!(rhs.rows(), n, "rhs row count mismatch");
    let mut out = DenseMatrix::zeros(n, rhs.cols());
    let mut col = vec![0.0; n];
    for c in 0..rhs.cols() {
        for r in 0..n {
            col[r] = rhs.get(r, c);
        }
        let x = lu_solve(f, &col);
        for r in 0..n {
            out.set(r, c, x[r]);
        }
    }
    out
}

/// Inverse via LU; convenience for the small `K` matrices of the basis.
///
/// # Errors
/// Propagates [`LinalgError::SingularMatrix`].
pub fn invert(a: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    let f = lu_factor(a)?;
    Ok(lu_solve_columns(&f, &DenseMatrix::identity(a.rows())))
}

/// Gauss-Legendre quadrature on [0, 1].
///
/// Nodes are found by Newton iteration on the Legendre polynomial with
/// Chebyshev initial guesses; the rule integrates polynomials of degree
/// `<= 2*order - 1` exactly.
///
/// # Panics
/// Panics if `order == 0`.
pub fn gauss_legendre_rule(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be at least 1");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev guess for the i-th root of P_n on [-1, 1], descending.
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let step = p / dp;
            x -= step;
            if p.abs() <= 1e-15 && step.abs() <= 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        // roots come out descending in x; store ascending on [0, 1]
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n` and its derivative at `x` (on [-1, 1]), by the
/// three-term recurrence.
pub(crate) fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
    }
    // (1 - x^2) P_n' = n (P_{n-1} - x P_n)
    let dp = if (1.0 - x * x).abs() > 1e-300 {
        n as f64 * (p_prev - x * p) / (1.0 - x * x)
    } else {
        // endpoint limit: P_n'(+-1) = (+-1)^{n-1} n(n+1)/2
        let sign = if x > 0.0 { 1.0 } else { (-1.0f64).powi(n as i32 - 1) };
        sign * n as f64 * (n as f64 + 1.0) / 2.0
    };
    (p, dp)
}

/// Solves the dense complex system `a * x = rhs` by LU with partial
/// pivoting; `a` is row-major of order `rhs.len()`.
///
/// # Errors
/// [`LinalgError::SingularMatrix`] on vanishing pivots.
///
/// # Panics
/// Panics if `a.len() != rhs.len()^2`.
pub fn complex_solve(a: &[Complex64], rhs: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
    let n = rhs.len();
    assert_eq!(a.len(), n * n, "matrix/vector size mismatch");
    let mut m: Vec<Complex64> = a.to_vec();
    let mut x: Vec<Complex64> = rhs.to_vec();
    let scale = m.iter().fold(0.0f64, |s, z| s.max(z.norm()));
    let tiny = 1e3 * f64::EPSILON * scale;

    for k in 0..n {
        let mut best = k;
        let mut best_abs = m[k * n + k].norm();
        for r in (k + 1)..n {
            let v = m[r * n + k].norm();
            if v > best_abs {
                best = r;
                best_abs = v;
            }
        }
        if best_abs <= tiny {
            return Err(LinalgError::SingularMatrix { pivot_row: k });
        }
        if best != k {
            for c in 0..n {
                m.swap(k * n + c, best * n + c);
            }
            x.swap(k, best);
        }
        let pivot = m[k * n + k];
        for r in (k + 1)..n {
            let factor = m[r * n + k] / pivot;
            if factor.norm() == 0.0 {
                continue;
            }
            for c in (k + 1)..n {
                let v = m[r * n + c] - factor * m[k * n + c];
                m[r * n + c] = v;
            }
            let v = x[r] - factor * x[k];
            x[r] = v;
        }
    }
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in (i + 1)..n {
            acc -= m[i * n + j] * x[j];
        }
        x[i] = acc / m[i * n + i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::vec::Vec;

    fn det_from_lu(f: &LuFactors) -> f64 {
        // permutation parity from the pivot vector
        let mut perm = f.pivots().to_vec();
        let mut sign = 1.0;
        for i in 0..perm.len() {
            while perm[i] != i {
                let j = perm[i];
                perm.swap(i, j);
                sign = -sign;
            }
        }
        let mut det = sign;
        for i in 0..f.order() {
            det *= f.factors().get(i, i);
        }
        det
    }

    #[test]
    fn identity_factors_trivially() {
        let a = DenseMatrix::identity(3);
        let f = lu_factor(&a).unwrap();
        assert_eq!(f.pivots(), &[0, 1, 2]);
        let x = lu_solve(&f, &[1.0, 2.0, 3.0]);
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn permutation_matrix_solves_by_swap() {
        let a = DenseMatrix::from_row_major(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        let f = lu_factor(&a).unwrap();
        let x = lu_solve(&f, &[2.0, 3.0]);
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn radau_block_determinant_is_one_sixth() {
        // A-matrix of the 2-stage Radau IIA tableau; det = 5/48 + 3/48 = 1/6
        let a = DenseMatrix::from_row_major(
            2,
            2,
            vec![5.0 / 12.0, -1.0 / 12.0, 3.0 / 4.0, 1.0 / 4.0],
        );
        let f = lu_factor(&a).unwrap();
        assert!((det_from_lu(&f) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_solve() {
        let a = DenseMatrix::from_row_major(2, 2, vec![2.0, 0.0, 0.0, 4.0]);
        let f = lu_factor(&a).unwrap();
        assert_eq!(lu_solve(&f, &[2.0, 4.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn vandermonde_gives_lagrange_coefficients() {
        // nodes {1/3, 1}: transposed Vandermonde maps monomial coefficients
        // to nodal values; Kronecker columns yield phi_0 = 3/2 - (3/2) tau,
        // phi_1 = -1/2 + (3/2) tau
        let v = DenseMatrix::from_row_major(2, 2, vec![1.0, 1.0 / 3.0, 1.0, 1.0]);
        let f = lu_factor(&v).unwrap();
        let phi0 = lu_solve(&f, &[1.0, 0.0]);
        let phi1 = lu_solve(&f, &[0.0, 1.0]);
        assert!((phi0[0] - 1.5).abs() < 1e-14 && (phi0[1] + 1.5).abs() < 1e-14);
        assert!((phi1[0] + 0.5).abs() < 1e-14 && (phi1[1] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            lu_factor(&a),
            Err(LinalgError::SingularMatrix { .. })
        ));
    }

    #[test]
    fn reconstruction_of_random_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let n = 5;
            let mut entries: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            // diagonal dominance keeps the samples well conditioned
            for i in 0..n {
                entries[i * n + i] += 3.0;
            }
            let a = DenseMatrix::from_row_major(n, n, entries);
            let f = lu_factor(&a).unwrap();
            // rebuild P*A from L*U and compare
            let mut max_dev: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let mut lu = 0.0;
                    for k in 0..n {
                        let l = if i == k {
                            1.0
                        } else if k < i {
                            f.factors().get(i, k)
                        } else {
                            0.0
                        };
                        let u = if k <= j { f.factors().get(k, j) } else { 0.0 };
                        lu += l * u;
                    }
                    let pa = a.get(f.pivots()[i], j);
                    max_dev = max_dev.max((lu - pa).abs());
                }
            }
            assert!(max_dev <= 1e-12 * a.max_abs(), "deviation {max_dev}");
        }
    }

    #[test]
    fn solve_residual_bound() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 6;
            let mut entries: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for i in 0..n {
                entries[i * n + i] += 4.0;
            }
            let a = DenseMatrix::from_row_major(n, n, entries);
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = lu_factor(&a).unwrap();
            let x = lu_solve(&f, &rhs);
            let ax = a.mul_vec(&x);
            let x_norm = x.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            let rhs_norm = rhs.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            for i in 0..n {
                let resid = (ax[i] - rhs[i]).abs();
                assert!(resid <= 1e-10 * (a.max_abs() * x_norm + rhs_norm));
            }
        }
    }

    #[test]
    fn gauss_legendre_order_one_is_midpoint() {
        let (nodes, weights) = gauss_legendre_rule(1);
        assert!((nodes[0] - 0.5).abs() < 1e-15);
        assert!((weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_order_two_matches_closed_form() {
        let (nodes, weights) = gauss_legendre_rule(2);
        let s3 = 3.0f64.sqrt();
        assert!((nodes[0] - (3.0 - s3) / 6.0).abs() < 1e-15);
        assert!((nodes[1] - (3.0 + s3) / 6.0).abs() < 1e-15);
        assert!((weights[0] - 0.5).abs() < 1e-15);
        assert!((weights[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_exactness() {
        // order n integrates tau^k for k <= 2n-1 to 1e-13
        for order in 1..=16 {
            let (nodes, weights) = gauss_legendre_rule(order);
            for k in 0..=(2 * order - 1) {
                let q: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&t, &w)| w * t.powi(k as i32))
                    .sum();
                let exact = 1.0 / (k as f64 + 1.0);
                assert!(
                    (q - exact).abs() <= 1e-13,
                    "order {order} monomial {k}: {q} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn gauss_legendre_cubic_via_two_points() {
        let (nodes, weights) = gauss_legendre_rule(2);
        let q: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(&t, &w)| w * t * t * t)
            .sum();
        assert!((q - 0.25).abs() < 1e-15);
    }

    #[test]
    fn complex_identity_and_scalar() {
        let one = Complex64::new(1.0, 0.0);
        let a = vec![one, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), one];
        let rhs = vec![Complex64::new(2.0, 1.0), Complex64::new(-3.0, 0.5)];
        let x = complex_solve(&a, &rhs).unwrap();
        assert_eq!(x, rhs);

        // (1 - z) x = 1 at z = -1  ->  x = 1/2
        let a = vec![Complex64::new(2.0, 0.0)];
        let x = complex_solve(&a, &[one]).unwrap();
        assert!((x[0].re - 0.5).abs() < 1e-15 && x[0].im == 0.0);
    }

    #[test]
    fn complex_solve_radau_n1_at_minus_one() {
        // (I - zA) x = 1 with the 2-stage Radau A and z = -1; then
        // 1 + z * w.x = 4/11
        let z = Complex64::new(-1.0, 0.0);
        let a_real = [
            [5.0 / 12.0, -1.0 / 12.0],
            [3.0 / 4.0, 1.0 / 4.0],
        ];
        let mut a = Vec::new();
        for (i, row) in a_real.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let delta = if i == j { 1.0 } else { 0.0 };
                a.push(Complex64::new(delta, 0.0) - z * v);
            }
        }
        let one = Complex64::new(1.0, 0.0);
        let x = complex_solve(&a, &[one, one]).unwrap();
        assert!((x[0].re - 8.0 / 11.0).abs() < 1e-14);
        assert!((x[1].re - 4.0 / 11.0).abs() < 1e-14);
        let wx = 0.75 * x[0] + 0.25 * x[1];
        let r = one + z * wx;
        assert!((r.re - 4.0 / 11.0).abs() < 1e-14 && r.im.abs() < 1e-15);
    }
}
