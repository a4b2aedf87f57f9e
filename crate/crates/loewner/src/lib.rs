//! Non-autonomous holomorphic dynamics on the unit disc.
//!
//! The crate implements the classical correspondence between four objects:
//!
//! * infinitesimal generators of one-parameter semigroups of holomorphic
//!   self-maps of the disc (Berkson-Porta data, Denjoy-Wolff points,
//!   Koenigs conjugations) — [`generators`];
//! * Herglotz vector fields `G(z, t)`, i.e. time-dependent generators, with
//!   a decision procedure for whether a field splits as `g(t) * G(z)`
//!   (equivalently: its frozen-time fields commute) — [`herglotz`];
//! * the evolution families `phi_{s,t}` obtained by solving the associated
//!   ODE, together with residual checks for the algebraic laws they must
//!   satisfy (two-parameter composition, commuting, reversibility, product
//!   formula) — [`evolution`];
//! * Loewner chains, in particular the affine chains `f_s = A(lambda(s),
//!   h(z))` that linearize splitting fields — [`chains`].
//!
//! Numerical layers: a small expression language ([`expr`]), Cauchy-integral
//! derivatives and adaptive Gauss-Legendre contour integrals ([`calculus`]),
//! and a Dormand-Prince 5(4) integrator with breakpoint-aware stepping
//! (inside [`evolution`]). All "holds on the disc" claims are checked as
//! suprema over the fixed grids in [`grid`] and reported as
//! [`report::PropertyReport`] values whose verdict is exactly
//! `sup_residual <= tolerance`.

pub mod calculus;
pub mod chains;
pub mod disc;
pub mod error;
pub mod evolution;
pub mod expr;
pub mod generators;
pub mod grid;
pub mod herglotz;
pub mod report;

pub use disc::{cayley, poincare_distance, BoundaryPoint, DiscPoint, FixedPoint, EPS_BOUNDARY};
pub use error::{Error, Result};
pub use expr::{parse_expr, Arity, Expr, HoloFunction};

pub use num_complex::Complex64;
