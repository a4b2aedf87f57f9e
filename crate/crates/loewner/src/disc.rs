//! Points of the unit disc and its closure, the Poincaré metric, and the
//! Cayley transform.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical margin for "strictly inside the unit disc": a point qualifies
/// when |z| < 1 - EPS_BOUNDARY. The same margin decides membership of the
/// circle itself.
pub const EPS_BOUNDARY: f64 = 1e-12;

/// A point of the open unit disc, |z| < 1 - [`EPS_BOUNDARY`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscPoint(Complex64);

impl DiscPoint {
    pub fn new(z: Complex64) -> Result<Self> {
        let m = z.norm();
        if !m.is_finite() || m >= 1.0 - EPS_BOUNDARY {
            return Err(Error::NotInDisc { modulus: m });
        }
        Ok(DiscPoint(z))
    }

    pub fn value(self) -> Complex64 {
        self.0
    }
}

impl std::fmt::Display for DiscPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point of the unit circle. Construction accepts |z| within
/// [`EPS_BOUNDARY`] of 1 and renormalizes to exact modulus one, so that
/// conj(tau) = 1/tau holds to machine precision downstream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint(Complex64);

impl BoundaryPoint {
    pub fn new(z: Complex64) -> Result<Self> {
        let m = z.norm();
        if !m.is_finite() || (m - 1.0).abs() > EPS_BOUNDARY {
            return Err(Error::NotOnCircle { modulus: m });
        }
        Ok(BoundaryPoint(z / m))
    }

    pub fn from_angle(theta: f64) -> Self {
        BoundaryPoint(Complex64::from_polar(1.0, theta))
    }

    pub fn value(self) -> Complex64 {
        self.0
    }
}

impl std::fmt::Display for BoundaryPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A fixed point of a semigroup: the Denjoy-Wolff point is either inside the
/// disc or on the circle, and the two cases drive different formulas
/// everywhere else in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FixedPoint {
    Interior(DiscPoint),
    Boundary(BoundaryPoint),
}

impl FixedPoint {
    pub fn value(self) -> Complex64 {
        match self {
            FixedPoint::Interior(p) => p.value(),
            FixedPoint::Boundary(p) => p.value(),
        }
    }

    pub fn is_interior(self) -> bool {
        matches!(self, FixedPoint::Interior(_))
    }
}

impl std::fmt::Display for FixedPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Poincaré distance on the unit disc, curvature -4 normalization:
/// omega(z, w) = artanh |(z - w) / (1 - conj(w) z)|.
pub fn poincare_distance(z: DiscPoint, w: DiscPoint) -> f64 {
    let (z, w) = (z.value(), w.value());
    let rho = ((z - w) / (Complex64::new(1.0, 0.0) - w.conj() * z)).norm();
    // rho < 1 for interior points; clamp shields against roundoff at extreme radii.
    rho.min(1.0 - f64::EPSILON).atanh()
}

/// Cayley transform C_tau(z) = (tau + z) / (tau - z), mapping the disc onto
/// the right half-plane and tau to infinity.
pub fn cayley(tau: BoundaryPoint, z: DiscPoint) -> Complex64 {
    let tau = tau.value();
    (tau + z.value()) / (tau - z.value())
}
