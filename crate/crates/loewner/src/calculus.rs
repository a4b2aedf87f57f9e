//! Quadrature-based calculus for holomorphic maps: derivatives via the
//! Cauchy integral formula, contour integrals via adaptive Gauss-Legendre
//! panels, and local inversion via Newton's method.
//!
//! Everything here works on black-box maps `Fn(Complex64) -> Result<Complex64>`
//! so the same machinery serves closed-form expressions and numerically
//! defined maps (ODE flows, quadrature-backed conjugations).

use std::sync::LazyLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::disc::DiscPoint;
use crate::error::{Error, Result};
use crate::expr::HoloFunction;

/// Nodes on the derivative circle. With a spectrally accurate trapezoid rule
/// the truncation error is O(r^64); the node count mainly guards roundoff.
const DERIVATIVE_NODES: usize = 64;

/// Circle radius for [`derivative`] at `z`: stay well inside the disc, and
/// keep the radius large enough that the r^{-order} roundoff amplification
/// of the stencil stays below the advertised tolerances.
pub fn derivative_radius(z: Complex64) -> f64 {
    (0.5 * (1.0 - z.norm())).min(0.05)
}

/// n-th derivative (n = 1, 2, 3) of a black-box holomorphic map by the
/// Cauchy integral formula on a circle around `z`, trapezoid rule with 64
/// equispaced nodes.
pub fn map_derivative<F>(f: F, z: DiscPoint, order: u8) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    if !(1..=3).contains(&order) {
        return Err(Error::invalid(format!("derivative order must be 1, 2 or 3, got {order}")));
    }
    let z = z.value();
    let r = derivative_radius(z);
    let n = order as i32;
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..DERIVATIVE_NODES {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / DERIVATIVE_NODES as f64;
        let node = Complex64::from_polar(r, theta);
        let value = f(z + node)?;
        sum += value * Complex64::from_polar(1.0, -(n as f64) * theta);
    }
    let factorial = match order {
        1 => 1.0,
        2 => 2.0,
        _ => 6.0,
    };
    Ok(sum * factorial / (DERIVATIVE_NODES as f64 * r.powi(n)))
}

/// n-th derivative of a parsed function, `t` supplied iff the arity is two.
pub fn derivative(f: &HoloFunction, z: DiscPoint, order: u8, t: Option<f64>) -> Result<Complex64> {
    map_derivative(|w| f.eval(w, t), z, order)
}

/// An integration contour in the plane.
///
/// `samples` is the initial quadrature budget per piece (at least 16, i.e.
/// one 16-node Gauss-Legendre panel); adaptive splitting refines from there.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Path {
    RadialSegment { from: Complex64, to: Complex64, samples: usize },
    Polyline { points: Vec<Complex64>, samples: usize },
    Circle { center: Complex64, radius: f64, samples: usize },
}

impl Path {
    pub fn segment(from: Complex64, to: Complex64) -> Path {
        Path::RadialSegment { from, to, samples: 16 }
    }

    pub fn polyline(points: Vec<Complex64>) -> Path {
        Path::Polyline { points, samples: 16 }
    }

    pub fn circle(center: Complex64, radius: f64) -> Path {
        Path::Circle { center, radius, samples: 64 }
    }

    fn validate(&self) -> Result<usize> {
        let samples = match self {
            Path::RadialSegment { samples, .. } | Path::Circle { samples, .. } => *samples,
            Path::Polyline { points, samples } => {
                if points.len() < 2 {
                    return Err(Error::TooFewEntries { what: "polyline", min: 2, got: points.len() });
                }
                *samples
            }
        };
        if samples < 16 {
            return Err(Error::TooFewEntries { what: "path samples", min: 16, got: samples });
        }
        if let Path::Circle { radius, .. } = self {
            if radius.is_nan() || *radius <= 0.0 {
                return Err(Error::invalid("circle radius must be positive"));
            }
        }
        Ok(samples)
    }
}

/// 16-point Gauss-Legendre rule on [-1, 1]; roots of P_16 by Newton from the
/// Chebyshev initial guesses, weights 2 / ((1-x^2) P_16'(x)^2).
static GL16: LazyLock<[(f64, f64); 16]> = LazyLock::new(|| {
    const N: usize = 16;
    let mut rule = [(0.0f64, 0.0f64); N];
    for (i, slot) in rule.iter_mut().enumerate() {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(N, x);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(N, x);
        *slot = (x, 2.0 / ((1.0 - x * x) * dp * dp));
    }
    rule
});

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0f64, x);
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

const MAX_REFINE_LEVELS: u32 = 20;
const PANEL_REL_TOL: f64 = 1e-13;

/// One GL16 panel of `g` over the parameter interval [a, b] (g already
/// includes the path-derivative factor).
fn gl16_panel<F>(g: &F, a: f64, b: f64) -> Result<Complex64>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = Complex64::new(0.0, 0.0);
    for (x, w) in GL16.iter() {
        sum += g(mid + half * x)? * *w;
    }
    Ok(sum * half)
}

fn refine_panel<F>(g: &F, a: f64, b: f64, whole: Complex64, scale: f64, level: u32) -> Result<Complex64>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let mid = 0.5 * (a + b);
    let left = gl16_panel(g, a, mid)?;
    let right = gl16_panel(g, mid, b)?;
    let split = left + right;
    if (split - whole).norm() <= PANEL_REL_TOL * scale {
        return Ok(split);
    }
    if level >= MAX_REFINE_LEVELS {
        return Err(Error::QuadratureNonConvergent { levels: MAX_REFINE_LEVELS });
    }
    Ok(refine_panel(g, a, mid, left, scale, level + 1)? + refine_panel(g, mid, b, right, scale, level + 1)?)
}

/// Adaptive integral of `g` (integrand times path derivative) over the
/// parameter interval [0, 1], starting from `panels` uniform panels.
fn integrate_param<F>(g: &F, panels: usize) -> Result<Complex64>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let mut coarse = Vec::with_capacity(panels);
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..panels {
        let a = k as f64 / panels as f64;
        let b = (k + 1) as f64 / panels as f64;
        let v = gl16_panel(g, a, b)?;
        coarse.push((a, b, v));
        total += v;
    }
    let scale = total.norm().max(1.0);
    let mut refined = Complex64::new(0.0, 0.0);
    for (a, b, v) in coarse {
        refined += refine_panel(g, a, b, v, scale, 0)?;
    }
    Ok(refined)
}

/// Contour integral of a black-box map along `path`.
pub fn integrate_map<F>(f: F, path: &Path) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let samples = path.validate()?;
    let panels = (samples / 16).max(1);
    match path {
        Path::RadialSegment { from, to, .. } => {
            let (a, b) = (*from, *to);
            integrate_param(&|u: f64| Ok(f(a + (b - a) * u)? * (b - a)), panels)
        }
        Path::Polyline { points, .. } => {
            let mut total = Complex64::new(0.0, 0.0);
            for pair in points.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                total += integrate_param(&|u: f64| Ok(f(a + (b - a) * u)? * (b - a)), panels)?;
            }
            Ok(total)
        }
        Path::Circle { center, radius, .. } => {
            let (c, r) = (*center, *radius);
            let tau = 2.0 * std::f64::consts::PI;
            integrate_param(
                &|u: f64| {
                    let dir = Complex64::from_polar(1.0, tau * u);
                    Ok(f(c + r * dir)? * Complex64::new(0.0, tau * r) * dir)
                },
                panels.max(4),
            )
        }
    }
}

/// Contour integral of a parsed function along `path`.
pub fn path_integral(f: &HoloFunction, path: &Path, t: Option<f64>) -> Result<Complex64> {
    integrate_map(|z| f.eval(z, t), path)
}

const NEWTON_MAX_ITER: u32 = 100;
const NEWTON_TOL: f64 = 1e-12;
/// Newton iterates are kept inside this radius so domain-restricted maps
/// (quadrature-backed conjugations) stay evaluable; targets without a
/// preimage in the disc then surface as a convergence failure.
const NEWTON_CLAMP: f64 = 1.0 - 1e-9;

/// Solve f(z) = w by Newton's method from `seed`, with a caller-supplied
/// derivative. Stops when |f(z) - w| <= 1e-12 * max(1, |w|); the result must
/// land strictly inside the unit disc.
pub fn invert_map_at<F, D>(f: F, fprime: D, w: Complex64, seed: DiscPoint) -> Result<DiscPoint>
where
    F: Fn(Complex64) -> Result<Complex64>,
    D: Fn(Complex64) -> Result<Complex64>,
{
    let tol = NEWTON_TOL * w.norm().max(1.0);
    let mut z = seed.value();
    let mut residual = f(z)? - w;
    for _ in 0..NEWTON_MAX_ITER {
        if residual.norm() <= tol {
            return DiscPoint::new(z).map_err(|_| Error::ConvergedOutsideDisc { modulus: z.norm() });
        }
        let d = fprime(z)?;
        if d == Complex64::new(0.0, 0.0) {
            return Err(Error::NoConvergence { iterations: NEWTON_MAX_ITER, residual: residual.norm() });
        }
        let mut step = residual / d;
        // Back off when the full step leaves the evaluable region or fails.
        let mut accepted = false;
        for _ in 0..40 {
            let mut candidate = z - step;
            let m = candidate.norm();
            if m >= NEWTON_CLAMP {
                candidate *= NEWTON_CLAMP / m;
            }
            match f(candidate) {
                Ok(v) => {
                    z = candidate;
                    residual = v - w;
                    accepted = true;
                    break;
                }
                Err(_) => step *= 0.5,
            }
        }
        if !accepted {
            return Err(Error::NoConvergence { iterations: NEWTON_MAX_ITER, residual: residual.norm() });
        }
    }
    if residual.norm() <= tol {
        return DiscPoint::new(z).map_err(|_| Error::ConvergedOutsideDisc { modulus: z.norm() });
    }
    Err(Error::NoConvergence { iterations: NEWTON_MAX_ITER, residual: residual.norm() })
}

/// Local inverse of a parsed function at `w`, derivative taken by the Cauchy
/// stencil.
pub fn invert_at(f: &HoloFunction, w: Complex64, seed: DiscPoint, t: Option<f64>) -> Result<DiscPoint> {
    invert_map_at(
        |z| f.eval(z, t),
        |z| {
            map_derivative(
                |u| f.eval(u, t),
                DiscPoint::new(z).map_err(|_| Error::NotInDisc { modulus: z.norm() })?,
                1,
            )
        },
        w,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, Arity};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dp(re: f64, im: f64) -> DiscPoint {
        DiscPoint::new(c(re, im)).unwrap()
    }

    #[test]
    fn gl16_rule_is_sane() {
        let sum: f64 = GL16.iter().map(|(_, w)| w).sum();
        assert!((sum - 2.0).abs() < 1e-14);
        // integrates degree-31 monomials exactly: x^30 over [-1,1] = 2/31
        let v: f64 = GL16.iter().map(|(x, w)| w * x.powi(30)).sum();
        assert!((v - 2.0 / 31.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_of_square() {
        let f = parse_expr("z^2", Arity::One).unwrap();
        let d = derivative(&f, dp(0.3, 0.0), 1, None).unwrap();
        assert!((d - c(0.6, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn derivative_of_elliptic_generator() {
        let f = parse_expr("-z*(2+z)", Arity::One).unwrap();
        let d = derivative(&f, dp(0.0, 0.0), 1, None).unwrap();
        assert!((d - c(-2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn third_derivative_of_exp() {
        let f = parse_expr("exp(z)", Arity::One).unwrap();
        let d = derivative(&f, dp(0.0, 0.0), 3, None).unwrap();
        assert!((d - c(1.0, 0.0)).norm() < 1e-10, "off by {:e}", (d - c(1.0, 0.0)).norm());
    }

    #[test]
    fn derivative_respects_time_slice() {
        let f = parse_expr("(1+i*t)*(z-1)^2", Arity::Two).unwrap();
        // d/dz = (1+it) * 2(z-1); at z = 0, t = 2: (1+2i)(-2) = -2-4i
        let d = derivative(&f, dp(0.0, 0.0), 1, Some(2.0)).unwrap();
        assert!((d - c(-2.0, -4.0)).norm() < 1e-11);
    }

    #[test]
    fn derivative_orders_are_checked() {
        let f = parse_expr("z", Arity::One).unwrap();
        assert!(derivative(&f, dp(0.0, 0.0), 4, None).is_err());
        assert!(derivative(&f, dp(0.0, 0.0), 0, None).is_err());
    }

    #[test]
    fn integral_of_constant() {
        let f = parse_expr("1+0*z", Arity::One).unwrap();
        let v = path_integral(&f, &Path::segment(c(0.0, 0.0), c(0.5, 0.5)), None).unwrap();
        assert!((v - c(0.5, 0.5)).norm() < 1e-13);
    }

    #[test]
    fn integral_with_boundary_pole_off_path() {
        // 1/(z-1)^2 from 0 to 1/2: antiderivative -1/(z-1), value -1/(0.5-1) - 1 = 1
        let f = parse_expr("1/(z-1)^2", Arity::One).unwrap();
        let v = path_integral(&f, &Path::segment(c(0.0, 0.0), c(0.5, 0.0)), None).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-10, "off by {:e}", (v - c(1.0, 0.0)).norm());
    }

    #[test]
    fn residue_of_inverse() {
        let f = parse_expr("1/z", Arity::One).unwrap();
        let v = path_integral(&f, &Path::circle(c(0.0, 0.0), 0.5), None).unwrap();
        let expected = c(0.0, 2.0 * std::f64::consts::PI);
        assert!((v - expected).norm() < 1e-10);
    }

    #[test]
    fn closed_polyline_of_holomorphic_function_vanishes() {
        let f = parse_expr("exp(z)*(z^3-2*z+1)", Arity::One).unwrap();
        let square = Path::polyline(vec![c(0.1, 0.1), c(0.4, 0.2), c(0.3, 0.5), c(-0.1, 0.3), c(0.1, 0.1)]);
        let v = path_integral(&f, &square, None).unwrap();
        assert!(v.norm() < 1e-10, "got {:e}", v.norm());
    }

    #[test]
    fn singular_path_reports_nonconvergence() {
        // 1/z integrated through its pole at the start of the segment
        let f = parse_expr("1/z", Arity::One).unwrap();
        let r = path_integral(&f, &Path::segment(c(0.0, 0.0), c(0.5, 0.0)), None);
        assert!(matches!(r, Err(Error::QuadratureNonConvergent { .. }) | Err(Error::DivisionByZero { .. })));
    }

    #[test]
    fn path_validation() {
        let f = parse_expr("z", Arity::One).unwrap();
        let p = Path::Polyline { points: vec![c(0.0, 0.0)], samples: 16 };
        assert!(matches!(path_integral(&f, &p, None), Err(Error::TooFewEntries { .. })));
        let p = Path::RadialSegment { from: c(0.0, 0.0), to: c(0.5, 0.0), samples: 8 };
        assert!(matches!(path_integral(&f, &p, None), Err(Error::TooFewEntries { .. })));
    }

    #[test]
    fn invert_moebius() {
        let f = parse_expr("2*z/(2+z)", Arity::One).unwrap();
        let w = c(2.0 / 3.0 * (-2.0f64).exp(), 0.0);
        let z = invert_at(&f, w, dp(0.0, 0.0), None).unwrap();
        let expected = 2.0 * w / (c(2.0, 0.0) - w);
        assert!((z.value() - expected).norm() < 1e-11);
    }

    #[test]
    fn invert_detects_targets_outside_the_disc_image() {
        // z/(1-z) maps the disc onto Re w > -1/2; w = -2 has no preimage inside.
        let f = parse_expr("z/(1-z)", Arity::One).unwrap();
        let r = invert_at(&f, c(-2.0, 0.0), dp(0.0, 0.0), None);
        assert!(r.is_err());
    }

    #[test]
    fn invert_round_trip() {
        let f = parse_expr("z*exp(z)", Arity::One).unwrap();
        for k in 0..12 {
            let z0 = Complex64::from_polar(0.07 * k as f64, 0.9 * k as f64);
            let w = f.eval1(z0).unwrap();
            let back = invert_at(&f, w, dp(0.0, 0.0), None).unwrap();
            assert!((back.value() - z0).norm() < 1e-10, "k={k}");
        }
    }
}
