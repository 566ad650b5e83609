//! ADER discontinuous-Galerkin time integration for differential-algebraic
//! equation (DAE) systems
//!
//! ```text
//! du/dt = F(u, v, t),      u(t0) = u0,   (differential variables)
//!     0 = G(u, v, t),      v(t0) = v0,   (algebraic variables)
//! ```
//!
//! The integrator is a one-step scheme of arbitrary polynomial degree `N`.
//! On each grid cell a *local DG predictor* computes a degree-`N` polynomial
//! in time (expanded in a nodal Lagrange basis at right Radau points) by
//! solving a nonlinear algebraic system with Newton iteration; the node value
//! at the end of the cell is then corrected by Gauss-Radau quadrature of the
//! right-hand side. The node solution superconverges at order `2N+1` for
//! ODEs and index-1 DAEs, while the local (between-node) solution converges
//! at order `N+1`.
//!
//! Modules:
//! - [`linalg`]: dense LU, complex solve, Gauss-Legendre rules
//! - [`basis`]: Radau nodes, weights and the predictor matrices `K`, `A`
//! - [`dae_model`]: the `DaeProblem` abstraction and built-in test systems
//! - [`predictor`]: the per-cell Newton solve with block eliminations
//! - [`stepper`]: grid marching, local-solution evaluation, cost counters
//! - [`reference`]: exact/reference solutions (elliptic functions, Lambert W)
//! - [`analysis`]: error norms, convergence-order fits, stability functions
//!
//! The crate is `no_std` (with `alloc`); file IO and the command-line runner
//! live in the companion `radau-dae-cli` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod basis;
pub mod dae_model;
pub mod linalg;
pub mod predictor;
pub mod reference;
pub mod stepper;
