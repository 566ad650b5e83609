//! Exact and reference solutions used by the error analysis.
//!
//! Closed forms: the pendulum via Jacobi elliptic functions (AGM/Landen
//! evaluation), the flame problem via a log-domain Lambert W (the natural
//! argument `a*exp(a - t)` with `a ~ 1/delta` overflows any fixed-width
//! exponent, so the defining equation `w + ln w = y` is solved for `ln w`
//! directly), and elementary trigonometric solutions wired in by the problem
//! registry. The double pendulum has no closed form; a high-accuracy
//! reference is produced by this library's own solver on the angle ODE
//! formulation and validated by a Richardson check on a refined grid.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use core::f64::consts::PI;
use core::fmt;

// Float supplies libm-backed f64 math in no_std builds; std test builds
// resolve the same methods inherently, leaving the import unused there.
#[allow(unused_imports)]
use num_traits::Float;

use crate::basis::{self, BasisTables};
use crate::dae_model::DaeProblem;
use crate::predictor::NewtonOptions;
use crate::stepper::{self, GridSpec, SolveReport};

/// Errors from reference-solution evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceError {
    /// Argument outside the supported domain.
    DomainError { what: String },
    /// An iterative evaluation did not reach tolerance.
    ConvergenceFailure { what: String, residual: f64 },
    /// The self-hosted reference solve missed its accuracy target.
    ReferenceAccuracyFailure { detail: String },
}

impl fmt::Display for ReferenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceError::DomainError { what } => write!(f, "domain error: {}", what),
            ReferenceError::ConvergenceFailure { what, residual } => {
                write!(f, "{} did not converge (residual {:.3e})", what, residual)
            }
            ReferenceError::ReferenceAccuracyFailure { detail } => {
                write!(f, "reference accuracy failure: {}", detail)
            }
        }
    }
}

impl core::error::Error for ReferenceError {}

/// Complete elliptic integral of the first kind, modulus convention
/// K(k) = int_0^{pi/2} (1 - k^2 sin^2 t)^{-1/2} dt.
///
/// Evaluated by the arithmetic-geometric mean; relative error <= 1e-13.
///
/// # Errors
/// `DomainError` unless 0 <= k < 1.
pub fn elliptic_k(k: f64) -> Result<f64, ReferenceError> {
    if !(0.0..1.0).contains(&k) {
        return Err(ReferenceError::DomainError {
            what: format!("elliptic_k needs 0 <= k < 1, got {}", k),
        });
    }
    let mut a = 1.0_f64;
    let mut b = (1.0 - k * k).sqrt();
    for _ in 0..60 {
        if (a - b).abs() <= f64::EPSILON * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    Ok(PI / (2.0 * a))
}

/// Jacobi elliptic functions sn, cn, dn with modulus `k` (not parameter
/// m = k^2), by the ascending AGM scale and descending amplitude recurrence.
///
/// sn and cn come from the recovered amplitude; dn uses the exact relation
/// dn^2 = 1 - k^2 sn^2, which stays well conditioned for k < 1 (the
/// amplitude-quotient form of dn loses every digit at the quarter period,
/// where numerator and denominator both vanish).  The defining-ODE test
/// validates dn independently of this identity.
///
/// # Errors
/// `DomainError` unless 0 <= k < 1.
pub fn jacobi_sn_cn_dn(u: f64, k: f64) -> Result<(f64, f64, f64), ReferenceError> {
    if !(0.0..1.0).contains(&k) {
        return Err(ReferenceError::DomainError {
            what: format!("jacobi_sn_cn_dn needs 0 <= k < 1, got {}", k),
        });
    }
    let mut a = [0.0_f64; 32];
    let mut c = [0.0_f64; 32];
    a[0] = 1.0;
    c[0] = k;
    let mut b = (1.0 - k * k).sqrt();
    let mut levels = 0;
    while c[levels].abs() > f64::EPSILON * a[levels] && levels + 1 < 32 {
        let an = 0.5 * (a[levels] + b);
        let bn = (a[levels] * b).sqrt();
        c[levels + 1] = 0.5 * (a[levels] - b);
        a[levels + 1] = an;
        b = bn;
        levels += 1;
    }
    if levels == 0 {
        // modulus at rounding level: degenerate circular functions
        return Ok((u.sin(), u.cos(), 1.0));
    }
    let mut phi = (2.0_f64).powi(levels as i32) * a[levels] * u;
    for i in (1..=levels).rev() {
        let s = (c[i] / a[i]) * phi.sin();
        let s = s.clamp(-1.0, 1.0);
        phi = 0.5 * (phi + s.asin());
    }
    let sn = phi.sin();
    let cn = phi.cos();
    let k_sn = k * sn;
    let dn = (1.0 - k_sn * k_sn).sqrt();
    Ok((sn, cn, dn))
}

/// Exact mathematical-pendulum state at time `t` for release angle `phi0`
/// and gravity `g_accel`, as the DAE state
/// (u, v) = ((sin phi, -cos phi, phidot cos phi, phidot sin phi), phidot^2 + g cos phi).
///
/// phi(t) = 2 arcsin(Y sn(K(Y) - w0 t, Y)) with Y = sin(phi0/2), w0 = sqrt(g);
/// the sign of phidot follows from d(phi)/dt of that expression (the pendulum
/// released at rest from a positive angle initially falls).
///
/// # Errors
/// `DomainError` unless |phi0| < pi and g_accel > 0.
pub fn pendulum_exact(t: f64, phi0: f64, g_accel: f64) -> Result<([f64; 4], f64), ReferenceError> {
    if phi0.abs() >= PI {
        return Err(ReferenceError::DomainError {
            what: format!("pendulum release angle must satisfy |phi0| < pi, got {}", phi0),
        });
    }
    if g_accel <= 0.0 {
        return Err(ReferenceError::DomainError {
            what: format!("pendulum gravity must be positive, got {}", g_accel),
        });
    }
    let upsilon = (0.5 * phi0).sin();
    let k = upsilon.abs();
    let omega0 = g_accel.sqrt();
    let quarter = elliptic_k(k)?;
    let (sn, cn, dn) = jacobi_sn_cn_dn(quarter - omega0 * t, k)?;
    let phi = 2.0 * (upsilon * sn).asin();
    let phidot = -2.0 * omega0 * upsilon * cn * dn / (1.0 - upsilon * upsilon * sn * sn).sqrt();
    let (sp, cp) = (phi.sin(), phi.cos());
    Ok(([sp, -cp, phidot * cp, phidot * sp], phidot * phidot + g_accel * cp))
}

/// Principal-branch Lambert W in logarithmic form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambertW {
    /// w itself; underflows to 0 for very negative `y` while `ln_w` stays exact.
    pub w: f64,
    /// ln w, the quantity actually solved for.
    pub ln_w: f64,
}

/// Solves w + ln w = y for the principal branch (w > 0), working on
/// l = ln w so that arguments far outside the double exponent range stay
/// representable. Residual |w + ln w − y| <= 1e-13 (1 + |y|).
///
/// # Errors
/// `DomainError` for non-finite input; `ConvergenceFailure` after 100
/// iterations (not expected: l + e^l is convex and increasing).
pub fn lambert_w_log(y: f64) -> Result<LambertW, ReferenceError> {
    if !y.is_finite() {
        return Err(ReferenceError::DomainError {
            what: format!("lambert_w_log needs finite input, got {}", y),
        });
    }
    // asymptotic guesses: w ~ y - ln y for large y, w ~ e^y far below zero
    let mut l = if y > 1.0 {
        (y - y.ln()).ln()
    } else if y < -1.0 {
        y
    } else {
        0.5 * (y - 1.0)
    };
    let tol = 1e-16 * (1.0 + y.abs());
    for _ in 0..100 {
        let e = l.exp();
        let h = l + e - y;
        if h.abs() <= tol {
            return Ok(LambertW { w: l.exp(), ln_w: l });
        }
        let step = h / (1.0 + e);
        l -= step;
        if step.abs() <= f64::EPSILON * (1.0 + l.abs()) {
            return Ok(LambertW { w: l.exp(), ln_w: l });
        }
    }
    let residual = l + l.exp() - y;
    Err(ReferenceError::ConvergenceFailure {
        what: String::from("lambert_w_log"),
        residual,
    })
}

/// Direct-argument wrapper: w with w e^w = x, for x > 0 representable in the
/// double exponent range. Prefer [`lambert_w_log`] otherwise.
///
/// # Errors
/// `DomainError` for x <= 0 (principal branch, positive w only).
pub fn lambert_w(x: f64) -> Result<f64, ReferenceError> {
    if !(x > 0.0) {
        return Err(ReferenceError::DomainError {
            what: format!("lambert_w wrapper needs x > 0, got {}", x),
        });
    }
    Ok(lambert_w_log(x.ln())?.w)
}

/// Exact flame-propagation solution u(t) = 1/(W(a e^{a-t}) + 1), v = u^3,
/// with a = 1/delta − 1, evaluated through the log-domain Lambert W at
/// y = ln a + a − t.
///
/// # Errors
/// `DomainError` unless delta in (0,1) and t >= 0; Lambert failures propagate.
pub fn flame_exact(t: f64, delta: f64) -> Result<(f64, f64), ReferenceError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ReferenceError::DomainError {
            what: format!("flame delta must lie in (0,1), got {}", delta),
        });
    }
    if t < 0.0 {
        return Err(ReferenceError::DomainError {
            what: format!("flame solution defined for t >= 0, got {}", t),
        });
    }
    let a = 1.0 / delta - 1.0;
    let lw = lambert_w_log(a.ln() + a - t)?;
    let u = 1.0 / (lw.w + 1.0);
    Ok((u, u * u * u))
}

/// High-accuracy double-pendulum reference built from the angle ODE
/// formulation, solved by this library's own stepper in ODE mode.
#[derive(Debug)]
pub struct DoublePendulumReference {
    g_accel: f64,
    tables: BasisTables,
    report: SolveReport,
}

/// Angle-space equations of motion for the equal-mass, unit-length double
/// pendulum: state (phi1, phi2, omega1, omega2).
fn angle_problem(phi10: f64, phi20: f64, g_accel: f64, t_f: f64) -> DaeProblem {
    let g = g_accel;
    DaeProblem::new(
        "double_pendulum_angles",
        "0",
        4,
        0,
        (0.0, t_f),
        vec![phi10, phi20, 0.0, 0.0],
        vec![],
        Box::new(move |u: &[f64], _v: &[f64], _t: f64, out: &mut [f64]| {
            let (p1, p2, w1, w2) = (u[0], u[1], u[2], u[3]);
            let d = p1 - p2;
            let (sd, cd) = (d.sin(), d.cos());
            let den = 2.0 - cd * cd;
            let drive = sd * w2 * w2 + 2.0 * g * p1.sin();
            let back = sd * w1 * w1 - g * p2.sin();
            out[0] = w1;
            out[1] = w2;
            out[2] = -(drive + cd * back) / den;
            out[3] = (cd * drive + 2.0 * back) / den;
        }),
        Box::new(|_u: &[f64], _v: &[f64], _t: f64, _out: &mut [f64]| {}),
    )
}

/// Cartesian DAE state from pendulum angles and angular velocities:
/// positions and velocities of both bobs, then the two multipliers.
fn angles_to_state(w: &[f64; 4], g_accel: f64) -> ([f64; 8], [f64; 2]) {
    let (p1, p2, w1, w2) = (w[0], w[1], w[2], w[3]);
    let (s1, c1) = (p1.sin(), p1.cos());
    let (s2, c2) = (p2.sin(), p2.cos());
    let u = [
        s1,
        -c1,
        s1 + s2,
        -(c1 + c2),
        w1 * c1,
        w1 * s1,
        w1 * c1 + w2 * c2,
        w1 * s1 + w2 * s2,
    ];
    // multipliers from the velocity-level data: with D = 1 - x1 x2 - y1 y2,
    // alpha = |v1|^2 - g y1 and beta = |v1 - v2|^2, the index-1 constraints
    // give lambda1 = (2 alpha - beta D)/(2 - D^2), lambda2 = (beta - D alpha)/(2 - D^2)
    let d = 1.0 - u[0] * u[2] - u[1] * u[3];
    let alpha = u[4] * u[4] + u[5] * u[5] - g_accel * u[1];
    let beta = (u[4] - u[6]) * (u[4] - u[6]) + (u[5] - u[7]) * (u[5] - u[7]);
    let den = 2.0 - d * d;
    (u, [(2.0 * alpha - beta * d) / den, (beta - d * alpha) / den])
}

impl DoublePendulumReference {
    /// Time span covered by the reference.
    pub fn span(&self) -> (f64, f64) {
        (0.0, self.report.grid().span().1)
    }

    /// Raw angle-space state (phi1, phi2, omega1, omega2) at `t`.
    ///
    /// # Errors
    /// `DomainError` outside the span.
    pub fn eval_angles(&self, t: f64) -> Result<[f64; 4], ReferenceError> {
        let (u, _v) = stepper::eval_local(&self.report, &self.tables, t).map_err(|e| {
            ReferenceError::DomainError { what: format!("double pendulum reference: {}", e) }
        })?;
        Ok([u[0], u[1], u[2], u[3]])
    }

    /// Full Cartesian DAE state (8 differential + 2 algebraic components).
    ///
    /// # Errors
    /// `DomainError` outside the span.
    pub fn eval(&self, t: f64) -> Result<([f64; 8], [f64; 2]), ReferenceError> {
        Ok(angles_to_state(&self.eval_angles(t)?, self.g_accel))
    }

    /// Total mechanical energy at `t` (conserved quantity for drift checks).
    ///
    /// # Errors
    /// `DomainError` outside the span.
    pub fn energy(&self, t: f64) -> Result<f64, ReferenceError> {
        let (u, _) = self.eval(t)?;
        Ok(0.5 * (u[4] * u[4] + u[5] * u[5]) + 0.5 * (u[6] * u[6] + u[7] * u[7])
            + self.g_accel * (u[1] + u[3]))
    }
}

/// Builds the double-pendulum reference: degree-10 solve of the angle ODE on
/// 400 uniform cells, Richardson-checked against 800 cells to 1e-11 at `t_f`.
///
/// # Errors
/// `DomainError` for bad parameters; `ReferenceAccuracyFailure` if either
/// solve fails or the two resolutions disagree beyond 1e-11.
pub fn double_pendulum_reference(
    phi10: f64,
    phi20: f64,
    g_accel: f64,
    t_f: f64,
) -> Result<DoublePendulumReference, ReferenceError> {
    if !(g_accel > 0.0) || !(t_f > 0.0) || !phi10.is_finite() || !phi20.is_finite() {
        return Err(ReferenceError::DomainError {
            what: String::from("double pendulum reference needs finite angles, g > 0, t_f > 0"),
        });
    }
    let problem = angle_problem(phi10, phi20, g_accel, t_f);
    let tables = basis::build_tables(10).map_err(|e| ReferenceError::ReferenceAccuracyFailure {
        detail: format!("basis construction failed: {}", e),
    })?;
    let opts = NewtonOptions::default();
    let run = |cells: usize| -> Result<SolveReport, ReferenceError> {
        let grid = GridSpec::uniform(0.0, t_f, cells).map_err(|e| {
            ReferenceError::ReferenceAccuracyFailure { detail: format!("grid: {}", e) }
        })?;
        let report = stepper::solve(&problem, &grid, 10, &opts).map_err(|e| {
            ReferenceError::ReferenceAccuracyFailure { detail: format!("solve: {}", e) }
        })?;
        if let Some((cell, err)) = report.failures().first() {
            return Err(ReferenceError::ReferenceAccuracyFailure {
                detail: format!("reference solve failed at cell {}: {}", cell, err),
            });
        }
        Ok(report)
    };
    let coarse = run(400)?;
    let fine = run(800)?;
    let uc = coarse.node_u_at(coarse.grid().cell_count());
    let uf = fine.node_u_at(fine.grid().cell_count());
    let mut diff = 0.0_f64;
    for i in 0..4 {
        diff = diff.max((uc[i] - uf[i]).abs());
    }
    if diff > 1e-11 {
        return Err(ReferenceError::ReferenceAccuracyFailure {
            detail: format!("Richardson gap {:.3e} at t_f exceeds 1e-11", diff),
        });
    }
    Ok(DoublePendulumReference { g_accel, tables, report: coarse })
}

#[cfg(test)]
mod tests {
    use super::*;
    

    #[test]
    fn elliptic_k_at_zero_is_quarter_circle() {
        assert!((elliptic_k(0.0).unwrap() - PI / 2.0).abs() <= 1e-15);
    }

    #[test]
    fn elliptic_k_rejects_unit_modulus() {
        assert!(matches!(elliptic_k(1.0), Err(ReferenceError::DomainError { .. })));
        assert!(matches!(elliptic_k(-0.1), Err(ReferenceError::DomainError { .. })));
    }

    #[test]
    fn elliptic_k_matches_quadrature_oracle() {
        // composite Simpson on the defining integral, fine enough for 1e-11
        let oracle = |k: f64| {
            let n = 20_000;
            let h = (PI / 2.0) / n as f64;
            let f = |t: f64| 1.0 / (1.0 - (k * t.sin()).powi(2)).sqrt();
            let mut acc = f(0.0) + f(PI / 2.0);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(i as f64 * h);
            }
            acc * h / 3.0
        };
        for &k in &[(PI / 8.0).sin(), 0.3, 0.6, 0.9, 0.99] {
            let got = elliptic_k(k).unwrap();
            let want = oracle(k);
            assert!(
                (got - want).abs() <= 1e-10 * want,
                "k={k}: {got} vs oracle {want}"
            );
        }
    }

    #[test]
    fn jacobi_degenerates_to_circular_at_zero_modulus() {
        for &u in &[-2.0, 0.0, 0.7, 3.1] {
            let (sn, cn, dn) = jacobi_sn_cn_dn(u, 0.0).unwrap();
            assert_eq!((sn, cn, dn), (u.sin(), u.cos(), 1.0));
        }
    }

    #[test]
    fn jacobi_quarter_period() {
        for &k in &[0.2, 0.5, 0.8, 0.95] {
            let (sn, cn, dn) = jacobi_sn_cn_dn(elliptic_k(k).unwrap(), k).unwrap();
            assert!((sn - 1.0).abs() <= 1e-12, "k={k}: sn {sn}");
            assert!(cn.abs() <= 1e-12, "k={k}: cn {cn}");
            assert!((dn - (1.0 - k * k).sqrt()).abs() <= 1e-12, "k={k}: dn {dn}");
        }
    }

    #[test]
    fn jacobi_matches_defining_ode() {
        // RK4 on sn' = cn dn, cn' = -sn dn, dn' = -k^2 sn cn from (0, 1, 1);
        // the independent oracle for all three functions, including dn near
        // the quarter period where quotient formulas degrade.
        for &k in &[0.2_f64, 0.6, 0.95] {
            let quarter = elliptic_k(k).unwrap();
            for &target in &[0.7_f64, quarter, 1.8 * quarter] {
                let steps = 40_000;
                let h = target / steps as f64;
                let rhs =
                    |s: [f64; 3]| [s[1] * s[2], -s[0] * s[2], -k * k * s[0] * s[1]];
                let mut s = [0.0, 1.0, 1.0];
                for _ in 0..steps {
                    let k1 = rhs(s);
                    let k2 = rhs([
                        s[0] + 0.5 * h * k1[0],
                        s[1] + 0.5 * h * k1[1],
                        s[2] + 0.5 * h * k1[2],
                    ]);
                    let k3 = rhs([
                        s[0] + 0.5 * h * k2[0],
                        s[1] + 0.5 * h * k2[1],
                        s[2] + 0.5 * h * k2[2],
                    ]);
                    let k4 = rhs([s[0] + h * k3[0], s[1] + h * k3[1], s[2] + h * k3[2]]);
                    for i in 0..3 {
                        s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                    }
                }
                let (sn, cn, dn) = jacobi_sn_cn_dn(target, k).unwrap();
                assert!((sn - s[0]).abs() <= 1e-11, "k={k} u={target}: sn {sn} vs {}", s[0]);
                assert!((cn - s[1]).abs() <= 1e-11, "k={k} u={target}: cn {cn} vs {}", s[1]);
                assert!((dn - s[2]).abs() <= 1e-11, "k={k} u={target}: dn {dn} vs {}", s[2]);
            }
        }
    }

    #[test]
    fn pendulum_exact_initial_state() {
        let phi0 = PI / 4.0;
        let (u, v) = pendulum_exact(0.0, phi0, 1.0).unwrap();
        assert!((u[0] - phi0.sin()).abs() <= 1e-13);
        assert!((u[1] + phi0.cos()).abs() <= 1e-13);
        assert!(u[2].abs() <= 1e-13 && u[3].abs() <= 1e-13);
        assert!((v - phi0.cos()).abs() <= 1e-13);
    }

    #[test]
    fn pendulum_exact_on_unit_circle() {
        for i in 0..=100 {
            let t = 10.0 * i as f64 / 100.0;
            let (u, _) = pendulum_exact(t, PI / 4.0, 1.0).unwrap();
            assert!((u[0] * u[0] + u[1] * u[1] - 1.0).abs() <= 1e-12, "t={t}");
        }
    }

    #[test]
    fn pendulum_exact_energy_conserved() {
        let (u0, _) = pendulum_exact(0.0, PI / 4.0, 1.0).unwrap();
        let e0 = 0.5 * (u0[2] * u0[2] + u0[3] * u0[3]) + u0[1];
        for i in 1..=200 {
            let t = 10.0 * i as f64 / 200.0;
            let (u, _) = pendulum_exact(t, PI / 4.0, 1.0).unwrap();
            let e = 0.5 * (u[2] * u[2] + u[3] * u[3]) + u[1];
            assert!((e - e0).abs() <= 1e-10, "t={t}: drift {:.3e}", e - e0);
        }
    }

    #[test]
    fn pendulum_phidot_sign_matches_finite_differences() {
        // released at rest from a positive angle, the bob must fall: the
        // angle phi = atan2(x, -y) decreases, so x momentarily decreases too
        let h = 1e-6;
        let (up, _) = pendulum_exact(0.1 + h, PI / 4.0, 1.0).unwrap();
        let (um, _) = pendulum_exact(0.1 - h, PI / 4.0, 1.0).unwrap();
        let (uc, _) = pendulum_exact(0.1, PI / 4.0, 1.0).unwrap();
        let fd = (up[0] - um[0]) / (2.0 * h);
        assert!(fd < 0.0, "x should decrease right after release");
        assert!((fd - uc[2]).abs() <= 1e-8, "fd {fd} vs xdot {}", uc[2]);
    }

    #[test]
    fn lambert_identity_points() {
        let w1 = lambert_w_log(1.0).unwrap();
        assert!((w1.w - 1.0).abs() <= 1e-15 && w1.ln_w.abs() <= 1e-15);
        // omega constant, bisection oracle on w + ln w
        let mut lo = 0.4_f64;
        let mut hi = 0.7_f64;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if mid + mid.ln() < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let omega = 0.5 * (lo + hi);
        let w0 = lambert_w_log(0.0).unwrap();
        assert!((w0.w - omega).abs() <= 1e-13, "{} vs {}", w0.w, omega);
    }

    #[test]
    fn lambert_residual_across_magnitudes() {
        for &y in &[-1e6, -10.0, 0.0, 1.0, 10.0, 1e4, 1e6] {
            let lw = lambert_w_log(y).unwrap();
            let residual = (lw.w + lw.ln_w - y).abs();
            assert!(
                residual <= 1e-13 * (1.0 + y.abs()),
                "y={y}: residual {residual:.3e}"
            );
        }
    }

    #[test]
    fn lambert_direct_wrapper() {
        let w = lambert_w(core::f64::consts::E).unwrap();
        assert!((w - 1.0).abs() <= 1e-14);
        assert!(matches!(lambert_w(0.0), Err(ReferenceError::DomainError { .. })));
    }

    #[test]
    fn flame_initial_and_final_values() {
        let delta = 1e-4;
        let (u0, v0) = flame_exact(0.0, delta).unwrap();
        assert!((u0 - delta).abs() <= 1e-13 * delta);
        assert!((v0 - delta * delta * delta).abs() <= 1e-12 * delta.powi(3));
        let (uf, _) = flame_exact(2.0 / delta, delta).unwrap();
        assert!((uf - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn flame_monotone_with_localized_transition() {
        // Non-decreasing, not strictly increasing: past the transition the
        // solution sits within an ulp of 1 and consecutive samples collide.
        let delta = 1e-4;
        let mut prev = 0.0;
        let mut crossed: Option<f64> = None;
        for i in 0..=2000 {
            let t = 2.0 / delta * i as f64 / 2000.0;
            let (u, _) = flame_exact(t, delta).unwrap();
            assert!(u >= prev, "t={t}: decreasing");
            assert!(u <= 1.0, "t={t}: overshoot {u}");
            if crossed.is_none() && u >= 0.5 {
                crossed = Some(t);
            }
            prev = u;
        }
        let t_half = crossed.expect("solution must pass 0.5");
        assert!(
            (0.99 / delta..=1.01 / delta).contains(&t_half),
            "transition at {t_half}"
        );
    }

    #[test]
    fn double_pendulum_reference_basics() {
        let g = 1.0;
        let (p1, p2) = (0.25 * PI, 0.30 * PI);
        let dp = double_pendulum_reference(p1, p2, g, 20.0).unwrap();
        let (u0, _l0) = dp.eval(0.0).unwrap();
        assert!((u0[0] - p1.sin()).abs() <= 1e-12);
        assert!((u0[1] + p1.cos()).abs() <= 1e-12);
        assert!((u0[2] - (p1.sin() + p2.sin())).abs() <= 1e-12);
        assert!((u0[3] + (p1.cos() + p2.cos())).abs() <= 1e-12);
        for i in 4..8 {
            assert!(u0[i].abs() <= 1e-12);
        }

        let e0 = dp.energy(0.0).unwrap();
        let mut constraint = 0.0_f64;
        let mut drift = 0.0_f64;
        for i in 0..=400 {
            let t = 20.0 * i as f64 / 400.0;
            let (u, _) = dp.eval(t).unwrap();
            constraint = constraint.max((u[0] * u[0] + u[1] * u[1] - 1.0).abs());
            let rod2 = (u[0] - u[2]).powi(2) + (u[1] - u[3]).powi(2) - 1.0;
            constraint = constraint.max(rod2.abs());
            drift = drift.max((dp.energy(t).unwrap() - e0).abs());
        }
        assert!(constraint <= 1e-11, "constraint residual {constraint:.3e}");
        assert!(drift <= 1e-10, "energy drift {drift:.3e}");
    }

    #[test]
    fn double_pendulum_multipliers_consistent_at_rest() {
        // at t = 0 the velocity terms vanish and the multipliers reduce to
        // lambda1 = -2 g y1/(2 - D^2), lambda2 = g y1 D/(2 - D^2)
        let g = 1.0;
        let (p1, p2) = (0.25 * PI, 0.30 * PI);
        let dp = double_pendulum_reference(p1, p2, g, 20.0).unwrap();
        let (u, l) = dp.eval(0.0).unwrap();
        let d = 1.0 - u[0] * u[2] - u[1] * u[3];
        let den = 2.0 - d * d;
        assert!((l[0] - (-2.0 * g * u[1] / den)).abs() <= 1e-12);
        assert!((l[1] - (g * u[1] * d / den)).abs() <= 1e-12);
    }
}
