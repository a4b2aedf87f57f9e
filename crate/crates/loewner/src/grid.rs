//! Validation grids. All residual checks in this crate quantify "on the
//! disc" as a supremum over one of these finite point sets, so the sets are
//! fixed here in one place.

use num_complex::Complex64;

use crate::disc::DiscPoint;

/// Polar grid: the given radii crossed with `angles` equispaced directions.
pub fn polar_grid(radii: &[f64], angles: usize) -> Vec<DiscPoint> {
    let mut out = Vec::with_capacity(radii.len() * angles);
    for &r in radii {
        for j in 0..angles {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / angles as f64;
            out.push(
                DiscPoint::new(Complex64::from_polar(r, theta))
                    .expect("grid radius must stay inside the disc"),
            );
        }
    }
    out
}

fn radii_to(max_tenths: usize) -> Vec<f64> {
    (1..=max_tenths).map(|k| k as f64 / 10.0).collect()
}

/// The default validation grid: radii 0.1, 0.2, ..., 0.9, sixteen angles.
pub fn default_grid() -> Vec<DiscPoint> {
    polar_grid(&radii_to(9), 16)
}

/// Grid capped at radius 0.8, used where quadrature-backed conjugations are
/// differentiated (their derivative stencils need headroom inside the disc).
pub fn radius08_grid() -> Vec<DiscPoint> {
    polar_grid(&radii_to(8), 16)
}

/// `n` equispaced points on the circle of the given radius.
pub fn circle_grid(radius: f64, n: usize) -> Vec<DiscPoint> {
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        out.push(
            DiscPoint::new(Complex64::from_polar(radius, theta))
                .expect("circle radius must stay inside the disc"),
        );
    }
    out
}

/// The near-boundary positivity certificate circle: 64 points at r = 0.999.
pub fn certification_circle() -> Vec<DiscPoint> {
    circle_grid(0.999, 64)
}
