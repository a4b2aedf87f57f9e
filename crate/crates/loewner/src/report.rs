//! Structured residual reports.
//!
//! Every "does property X hold" question in this crate is answered by a
//! [`PropertyReport`]: a named list of witnesses with their residuals, the
//! supremum, the tolerance the supremum was compared against, and the
//! verdict. The verdict is always exactly `sup_residual <= tolerance`; no
//! code path rounds a near miss either way.

use serde::{Deserialize, Serialize};

/// One witness (a tuple of times and/or a grid point, formatted as text so
/// reports from different checks share a shape) and its residual.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessResidual {
    pub witness: String,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub witnesses: Vec<WitnessResidual>,
    pub sup_residual: f64,
    pub tolerance: f64,
    pub verdict: bool,
}

impl PropertyReport {
    pub fn new(name: impl Into<String>, tolerance: f64, witnesses: Vec<WitnessResidual>) -> Self {
        let sup_residual = witnesses.iter().map(|w| w.residual).fold(0.0f64, f64::max);
        PropertyReport {
            name: name.into(),
            witnesses,
            sup_residual,
            tolerance,
            verdict: sup_residual <= tolerance,
        }
    }
}

impl std::fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} (sup residual {:.3e}, tolerance {:.1e})",
            self.name,
            if self.verdict { "holds" } else { "FAILS" },
            self.sup_residual,
            self.tolerance
        )
    }
}

// Residual tolerances are pinned to the ODE integrator's relative tolerance
// (default 1e-10) and scale with it if a caller loosens the integrator:
//
// * values that compose a handful of integrated maps lose ~3 digits;
// * values that additionally push an integrated map through the 64-point
//   derivative stencil or a finite difference lose ~5 digits.

/// Tolerance for residuals built from compositions of integrated maps
/// (evolution-family axioms, commuting, reversing): rel_tol * 1e3.
pub fn composition_tolerance(rel_tol: f64) -> f64 {
    rel_tol * 1e3
}

/// Tolerance for chain compatibility f_t(phi_{s,t}(z)) = f_s(z), which also
/// crosses a quadrature-backed conjugation: rel_tol * 1e4.
pub fn chain_tolerance(rel_tol: f64) -> f64 {
    rel_tol * 1e4
}

/// Tolerance for residuals involving derivatives of integrated maps (the
/// transport equation, the reversing field identity, the chain PDE):
/// rel_tol * 1e5.
pub fn derivative_tolerance(rel_tol: f64) -> f64 {
    rel_tol * 1e5
}
