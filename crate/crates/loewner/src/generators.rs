//! Infinitesimal generators of one-parameter semigroups of holomorphic
//! self-maps of the unit disc.
//!
//! A holomorphic `G` generates such a semigroup exactly when it factors as
//!
//! ```text
//! G(z) = (z - tau)(conj(tau) z - 1) p(z),      Re p >= 0 on the disc,
//! ```
//!
//! where `tau` is the Denjoy-Wolff point of the flow. This module locates
//! `tau`, certifies the factorization, computes the spectral data
//! (`G'(tau)` inside, the real radial rate at the boundary), classifies the
//! semigroup, and builds the Koenigs conjugation that linearizes it:
//! `h(Phi_t(z)) = exp(G'(tau) t) h(z)` in the interior case and
//! `h(Phi_t(z)) = h(z) + t` in the boundary case.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{derivative, integrate_map, invert_map_at, map_derivative, Path};
use crate::disc::{poincare_distance, BoundaryPoint, DiscPoint, FixedPoint};
use crate::error::{Error, Result};
use crate::expr::{Arity, Expr, HoloFunction};
use crate::grid::{certification_circle, default_grid, radius08_grid};

/// Berkson-Porta positivity slack: the factor must satisfy Re p >= -BP_SLACK
/// at every validation point.
pub const BP_SLACK: f64 = 1e-9;

/// A boundary Denjoy-Wolff candidate is accepted when its radial rate is
/// below this (the rate of the true Denjoy-Wolff point is <= 0).
const DW_RATE_SLACK: f64 = 1e-6;

/// A certified infinitesimal generator: the field, its Denjoy-Wolff point,
/// the Berkson-Porta factor, and the spectral value at the fixed point.
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    field: HoloFunction,
    dw: FixedPoint,
    bp_factor: HoloFunction,
    spectral: Complex64,
}

impl GeneratorSpec {
    pub fn field(&self) -> &HoloFunction {
        &self.field
    }

    pub fn dw(&self) -> FixedPoint {
        self.dw
    }

    pub fn bp_factor(&self) -> &HoloFunction {
        &self.bp_factor
    }

    /// `G'(tau)` when the Denjoy-Wolff point is interior (Re <= 0); the real
    /// radial rate `beta <= 0` (zero imaginary part) when it is on the circle.
    pub fn spectral(&self) -> Complex64 {
        self.spectral
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        self.field.eval1(z)
    }
}

/// Largest |G| over the default grid; the scale that turns absolute
/// residuals into relative ones.
fn field_scale(g: &HoloFunction) -> Result<f64> {
    let mut scale = 0.0f64;
    for p in default_grid() {
        scale = scale.max(g.eval1(p.value())?.norm());
    }
    Ok(scale)
}

/// Compose a generator from its Berkson-Porta data and certify positivity.
pub fn bp_compose(tau: FixedPoint, p: &HoloFunction) -> Result<GeneratorSpec> {
    if p.arity() != Arity::One {
        return Err(Error::invalid("the Berkson-Porta factor must be a function of z alone"));
    }
    let tau_value = tau.value();
    validate_bp_positivity(p, tau)?;
    let ast = (Expr::Z - Expr::complex_const(tau_value))
        * (Expr::complex_const(tau_value.conj()) * Expr::Z - Expr::Num(1.0))
        * p.ast().clone();
    let field = HoloFunction::from_ast(ast, Arity::One)?;
    let spectral = spectral_value(&field, tau)?;
    if let FixedPoint::Boundary(_) = tau {
        if spectral.re > DW_RATE_SLACK {
            return Err(Error::invalid(format!(
                "tau is not the Denjoy-Wolff point: boundary rate {:.3e} > 0",
                spectral.re
            )));
        }
    }
    Ok(GeneratorSpec { field, dw: tau, bp_factor: p.clone(), spectral })
}

/// Certify `g` as a generator and recover its Berkson-Porta data: locate the
/// Denjoy-Wolff point, form p = G / ((z-tau)(conj(tau) z - 1)), and verify
/// Re p >= -1e-9 on the validation grid and the near-boundary circle.
pub fn bp_decompose(g: &HoloFunction) -> Result<GeneratorSpec> {
    let dw = denjoy_wolff(g)?;
    let tau = dw.value();
    let quotient = g.ast().clone()
        / ((Expr::Z - Expr::complex_const(tau))
            * (Expr::complex_const(tau.conj()) * Expr::Z - Expr::Num(1.0)));
    let bp_factor = HoloFunction::from_ast(quotient, Arity::One)?;
    validate_bp_positivity(&bp_factor, dw)?;
    let spectral = spectral_value(g, dw)?;
    Ok(GeneratorSpec { field: g.clone(), dw, bp_factor, spectral })
}

/// Re p >= -1e-9 on the default grid plus the 64-point circle at r = 0.999.
/// Grid points within 1e-6 of an interior tau are skipped: the factor has a
/// removable singularity there and the quotient form loses all digits.
fn validate_bp_positivity(p: &HoloFunction, tau: FixedPoint) -> Result<()> {
    let tau_value = tau.value();
    let skip_near_tau = tau.is_interior();
    let mut points = default_grid();
    points.extend(certification_circle());
    for point in points {
        let z = point.value();
        if skip_near_tau && (z - tau_value).norm() < 1e-6 {
            continue;
        }
        let value = p.eval1(z)?;
        if value.re < -BP_SLACK {
            return Err(Error::NotAGenerator { z, t: 0.0, re_p: value.re });
        }
    }
    Ok(())
}

/// Locate the Denjoy-Wolff point: Newton from interior seeds first, then a
/// scan of |G| on the circle of radius 1 - 1e-6 for boundary zeros, keeping
/// the candidate whose radial rate is <= 1e-6.
pub fn denjoy_wolff(g: &HoloFunction) -> Result<FixedPoint> {
    let scale = field_scale(g)?;
    if scale < 1e-14 {
        return Err(Error::ZeroField);
    }
    if let Some(z) = interior_zero(g, scale)? {
        return Ok(FixedPoint::Interior(z));
    }
    let candidates = boundary_zero_candidates(g, scale)?;
    let mut best: Option<(BoundaryPoint, f64)> = None;
    for tau in candidates {
        let Ok(rate) = boundary_rate(g, tau) else { continue };
        if rate.re <= DW_RATE_SLACK && best.is_none_or(|(_, b)| rate.re < b) {
            best = Some((tau, rate.re));
        }
    }
    match best {
        Some((tau, _)) => Ok(FixedPoint::Boundary(tau)),
        None => Err(Error::NoDenjoyWolff),
    }
}

const INTERIOR_SEEDS: [Complex64; 5] = [
    Complex64::new(0.0, 0.0),
    Complex64::new(0.5, 0.0),
    Complex64::new(-0.5, 0.0),
    Complex64::new(0.0, 0.5),
    Complex64::new(0.0, -0.5),
];

fn interior_zero(g: &HoloFunction, scale: f64) -> Result<Option<DiscPoint>> {
    for seed in INTERIOR_SEEDS {
        let mut z = seed;
        for _ in 0..60 {
            let value = match g.eval1(z) {
                Ok(v) => v,
                Err(_) => break,
            };
            if value.norm() <= 1e-13 * scale {
                // an interior zero of a generator is the Denjoy-Wolff point
                if z.norm() <= 1.0 - 1e-6 {
                    return Ok(Some(DiscPoint::new(z)?));
                }
                break;
            }
            // cheap finite-difference slope is plenty for a zero search
            let h = Complex64::new(1e-6, 0.0);
            let d = (g.eval1(z + h)? - g.eval1(z - h)?) / (2.0 * h);
            if d.norm() < 1e-14 * scale {
                break;
            }
            z -= value / d;
            if !z.re.is_finite() || !z.im.is_finite() || z.norm() >= 0.999999 {
                break;
            }
        }
    }
    Ok(None)
}

const SCAN_RADIUS: f64 = 1.0 - 1e-6;
const SCAN_ANGLES: usize = 720;

/// Angles on the scan circle where |G| dips: local minima at most 1e-4 of
/// the circle's maximum, each sharpened by golden-section search.
fn boundary_zero_candidates(g: &HoloFunction, _scale: f64) -> Result<Vec<BoundaryPoint>> {
    let tau_angle = 2.0 * std::f64::consts::PI;
    let mut samples = Vec::with_capacity(SCAN_ANGLES);
    for k in 0..SCAN_ANGLES {
        let theta = tau_angle * k as f64 / SCAN_ANGLES as f64;
        samples.push(g.eval1(Complex64::from_polar(SCAN_RADIUS, theta))?.norm());
    }
    let circle_max = samples.iter().cloned().fold(0.0f64, f64::max);
    if circle_max == 0.0 {
        return Ok(Vec::new());
    }
    let mut out: Vec<BoundaryPoint> = Vec::new();
    for k in 0..SCAN_ANGLES {
        let prev = samples[(k + SCAN_ANGLES - 1) % SCAN_ANGLES];
        let next = samples[(k + 1) % SCAN_ANGLES];
        if samples[k] < prev && samples[k] < next {
            let width = tau_angle / SCAN_ANGLES as f64;
            let center = tau_angle * k as f64 / SCAN_ANGLES as f64;
            let theta = golden_section_min(
                |theta| g.eval1(Complex64::from_polar(SCAN_RADIUS, theta)).map(|v| v.norm()),
                center - width,
                center + width,
            )?;
            let value = g.eval1(Complex64::from_polar(SCAN_RADIUS, theta))?.norm();
            if value <= 1e-4 * circle_max {
                out.push(BoundaryPoint::from_angle(theta));
            }
        }
    }
    Ok(out)
}

fn golden_section_min<F>(f: F, mut a: f64, mut b: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        if (b - a).abs() < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// Radial rate at a boundary fixed point: Richardson extrapolation of
/// q(r) = G(r tau) / ((r - 1) tau) along r = 1 - 2^{-k}, k = 4..=16.
/// The limit must be real; its sign separates Denjoy-Wolff from repelling.
fn boundary_rate(g: &HoloFunction, tau: BoundaryPoint) -> Result<Complex64> {
    const K_LO: i32 = 4;
    const K_HI: i32 = 16;
    let tau_c = tau.value();
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    let mut previous_diag = Complex64::new(0.0, 0.0);
    let mut estimate = Complex64::new(0.0, 0.0);
    for k in K_LO..=K_HI {
        let h = 2.0f64.powi(-k);
        let r = 1.0 - h;
        let q = g.eval1(r * tau_c)? / ((r - 1.0) * tau_c);
        let mut row = vec![q];
        if let Some(prev) = rows.last() {
            for j in 1..=prev.len().min(8) {
                let refined = row[j - 1] + (row[j - 1] - prev[j - 1]) / (2.0f64.powi(j as i32) - 1.0);
                row.push(refined);
            }
        }
        previous_diag = estimate;
        estimate = *row.last().expect("row is non-empty");
        rows.push(row);
    }
    let tail = (estimate - previous_diag).norm();
    if tail > 1e-8 * estimate.norm().max(1.0) {
        return Err(Error::RadialLimitDiverges { tau: tau_c, tail });
    }
    if estimate.im.abs() > 1e-8 * estimate.norm().max(1.0) {
        return Err(Error::RateNotReal { tau: tau_c, imaginary: estimate.im });
    }
    Ok(Complex64::new(estimate.re, 0.0))
}

/// Spectral value at a fixed point: `G'(tau)` inside the disc, the real
/// radial rate on the circle.
pub fn spectral_value(g: &HoloFunction, fp: FixedPoint) -> Result<Complex64> {
    match fp {
        FixedPoint::Interior(tau) => derivative(g, tau, 1, None),
        FixedPoint::Boundary(tau) => {
            let rate = boundary_rate(g, tau)?;
            if rate.re > DW_RATE_SLACK {
                // still a legitimate spectral value (repelling point); the
                // Denjoy-Wolff gate is applied by callers that need it
                return Ok(rate);
            }
            if rate.re > BP_SLACK {
                return Ok(Complex64::new(0.0, 0.0));
            }
            Ok(rate)
        }
    }
}

/// All boundary zeros of `G` with their (real) radial rates, sorted by
/// angle. The Denjoy-Wolff point carries a rate <= 0, repelling fixed
/// points a rate > 0.
pub fn boundary_fixed_points(g: &HoloFunction) -> Result<Vec<(BoundaryPoint, f64)>> {
    let scale = field_scale(g)?;
    if scale < 1e-14 {
        return Err(Error::ZeroField);
    }
    let mut out = Vec::new();
    for tau in boundary_zero_candidates(g, scale)? {
        if let Ok(rate) = boundary_rate(g, tau) {
            out.push((tau, rate.re));
        }
    }
    out.sort_by(|a, b| {
        let (x, y) = (a.0.value().arg(), b.0.value().arg());
        x.partial_cmp(&y).expect("angles are finite")
    });
    Ok(out)
}

/// Dynamic type of the semigroup generated by `G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SemigroupKind {
    /// Reserved for the trivial semigroup of the zero field; `classify`
    /// itself rejects the zero field per its precondition.
    Identity,
    Elliptic,
    EllipticAutomorphism,
    Hyperbolic,
    ParabolicZeroStep,
    ParabolicPositiveStep,
}

impl std::fmt::Display for SemigroupKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SemigroupKind::Identity => "identity",
            SemigroupKind::Elliptic => "elliptic",
            SemigroupKind::EllipticAutomorphism => "elliptic-automorphism-type",
            SemigroupKind::Hyperbolic => "hyperbolic",
            SemigroupKind::ParabolicZeroStep => "parabolic-zero-step",
            SemigroupKind::ParabolicPositiveStep => "parabolic-positive-step",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub kind: SemigroupKind,
    pub dw: FixedPoint,
    pub spectral: Complex64,
    pub boundary_repelling: Vec<(BoundaryPoint, f64)>,
    /// |Phi_1'(tau)| = exp(Re spectral), in (0, 1].
    pub angular_derivative: f64,
}

/// Classify the semigroup generated by `G` (elliptic / hyperbolic /
/// parabolic, with the parabolic case split by hyperbolic step).
pub fn classify(g: &HoloFunction) -> Result<ClassificationReport> {
    let spec = bp_decompose(g)?;
    let spectral = spec.spectral();
    let boundary_repelling: Vec<(BoundaryPoint, f64)> = boundary_fixed_points(g)?
        .into_iter()
        .filter(|(tau, rate)| *rate > DW_RATE_SLACK || (spec.dw().value() - tau.value()).norm() > 1e-6)
        .collect();
    let kind = match spec.dw() {
        FixedPoint::Interior(_) => {
            if spectral.re.abs() <= 1e-9 {
                SemigroupKind::EllipticAutomorphism
            } else {
                SemigroupKind::Elliptic
            }
        }
        FixedPoint::Boundary(_) => {
            if spectral.re < -DW_RATE_SLACK {
                SemigroupKind::Hyperbolic
            } else {
                let z0 = DiscPoint::new(Complex64::new(0.0, 0.0))?;
                match parabolic_step(&spec, z0)? {
                    ParabolicStep::Zero => SemigroupKind::ParabolicZeroStep,
                    ParabolicStep::Positive => SemigroupKind::ParabolicPositiveStep,
                }
            }
        }
    };
    Ok(ClassificationReport {
        kind,
        dw: spec.dw(),
        spectral,
        boundary_repelling,
        angular_derivative: spectral.re.min(0.0).exp(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParabolicStep {
    Zero,
    Positive,
}

const STEP_MAX_ITER: u32 = 1000;
const STEP_WINDOW: usize = 50;
const STEP_ZERO_THRESHOLD: f64 = 1e-3;
const STEP_POSITIVE_THRESHOLD: f64 = 1e-2;

/// Hyperbolic step of a boundary-parabolic semigroup: iterate the time-one
/// map and watch the Poincare increments omega(z_n, z_{n+1}). They decrease
/// to zero for zero-step semigroups and stabilize at a positive value
/// otherwise.
pub fn parabolic_step(spec: &GeneratorSpec, z0: DiscPoint) -> Result<ParabolicStep> {
    match spec.dw() {
        FixedPoint::Interior(tau) => return Err(Error::NotBoundaryCase { tau: tau.value() }),
        FixedPoint::Boundary(_) => {}
    }
    if spec.spectral().re < -DW_RATE_SLACK {
        return Err(Error::invalid(format!(
            "the hyperbolic step is a parabolic-case invariant; this semigroup is hyperbolic (rate {:.3e})",
            spec.spectral().re
        )));
    }
    let semigroup = Semigroup::new(spec)?;
    let mut increments: Vec<f64> = Vec::with_capacity(STEP_MAX_ITER as usize);
    let mut z = z0;
    for _ in 0..STEP_MAX_ITER {
        let next = semigroup.at(1.0, z)?;
        increments.push(poincare_distance(z, next));
        z = next;
        let n = increments.len();
        if n >= STEP_WINDOW {
            let window = &increments[n - STEP_WINDOW..];
            let last = window[STEP_WINDOW - 1];
            if last < STEP_ZERO_THRESHOLD && window.windows(2).all(|w| w[1] < w[0]) {
                return Ok(ParabolicStep::Zero);
            }
        }
    }
    let window = &increments[increments.len() - STEP_WINDOW..];
    let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = window.iter().cloned().fold(0.0f64, f64::max);
    if lo > STEP_POSITIVE_THRESHOLD && hi - lo <= 1e-4 {
        return Ok(ParabolicStep::Positive);
    }
    Err(Error::StepInconclusive {
        iterations: STEP_MAX_ITER,
        increment: *window.last().expect("window is non-empty"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KoenigsCase {
    Interior,
    Boundary,
}

/// The Koenigs conjugation of a semigroup.
///
/// Interior case: h(tau) = 0, h'(tau) = 1, and h' G = G'(tau) h, so
/// h(Phi_t(z)) = exp(G'(tau) t) h(z). Boundary case: h(0) = 0, h' G = 1, so
/// h(Phi_t(z)) = h(z) + t. Values are quadrature-backed:
///
/// * boundary: h(z) = integral of 1/G over the segment [0, z];
/// * interior: h(z) = (z - tau) exp(integral over [tau, z] of
///   G'(tau)/G(w) - 1/(w - tau), a removable singularity at tau).
#[derive(Debug, Clone)]
pub struct KoenigsMap {
    base: GeneratorSpec,
    case: KoenigsCase,
    /// sup over the radius-0.8 grid of the functional-equation residual,
    /// with h' taken by the Cauchy stencil (independent of the identities
    /// used for fast evaluation).
    residual: f64,
}

impl KoenigsMap {
    pub fn base(&self) -> &GeneratorSpec {
        &self.base
    }

    pub fn is_interior_case(&self) -> bool {
        self.case == KoenigsCase::Interior
    }

    pub fn validation_residual(&self) -> f64 {
        self.residual
    }

    pub fn eval(&self, z: DiscPoint) -> Result<Complex64> {
        let z = z.value();
        match self.case {
            KoenigsCase::Boundary => {
                let g = &self.base.field;
                integrate_map(
                    |w| {
                        let v = g.eval1(w)?;
                        if v == Complex64::new(0.0, 0.0) {
                            return Err(Error::DivisionByZero { z: w });
                        }
                        Ok(v.inv())
                    },
                    &Path::segment(Complex64::new(0.0, 0.0), z),
                )
            }
            KoenigsCase::Interior => {
                let tau = self.base.dw.value();
                if (z - tau).norm() < 1e-14 {
                    // h(tau) = 0 and h(z) = (z - tau)(1 + O(z - tau)); the
                    // integral representation degenerates on a zero-length path
                    return Ok(z - tau);
                }
                let kappa = self.base.spectral;
                let g = &self.base.field;
                let log_part = integrate_map(
                    |w| {
                        let v = g.eval1(w)?;
                        if v == Complex64::new(0.0, 0.0) {
                            return Err(Error::DivisionByZero { z: w });
                        }
                        Ok(kappa / v - (w - tau).inv())
                    },
                    &Path::segment(tau, z),
                )?;
                Ok((z - tau) * log_part.exp())
            }
        }
    }

    /// h' through the functional equation (1/G resp. G'(tau) h / G); used to
    /// drive Newton cheaply. Validation recomputes h' independently.
    pub fn derivative_via_identity(&self, z: DiscPoint) -> Result<Complex64> {
        let g_value = self.base.field.eval1(z.value())?;
        match self.case {
            KoenigsCase::Boundary => {
                if g_value == Complex64::new(0.0, 0.0) {
                    return Err(Error::DivisionByZero { z: z.value() });
                }
                Ok(g_value.inv())
            }
            KoenigsCase::Interior => {
                let tau = self.base.dw.value();
                if (z.value() - tau).norm() < 1e-9 {
                    return Ok(Complex64::new(1.0, 0.0));
                }
                if g_value == Complex64::new(0.0, 0.0) {
                    return Err(Error::DivisionByZero { z: z.value() });
                }
                Ok(self.base.spectral * self.eval(z)? / g_value)
            }
        }
    }

    /// Local inverse by Newton's method.
    pub fn invert(&self, w: Complex64, seed: DiscPoint) -> Result<DiscPoint> {
        invert_map_at(
            |z| {
                let z = DiscPoint::new(z).map_err(|_| Error::NotInDisc { modulus: z.norm() })?;
                self.eval(z)
            },
            |z| {
                let z = DiscPoint::new(z).map_err(|_| Error::NotInDisc { modulus: z.norm() })?;
                self.derivative_via_identity(z)
            },
            w,
            seed,
        )
    }
}

/// Residual tolerance for the Koenigs functional equation on the
/// radius-0.8 grid.
pub const KOENIGS_RESIDUAL_TOL: f64 = 1e-8;

/// Build and validate the Koenigs conjugation of a certified generator.
pub fn koenigs(spec: &GeneratorSpec) -> Result<KoenigsMap> {
    let case = match spec.dw() {
        FixedPoint::Interior(_) => KoenigsCase::Interior,
        FixedPoint::Boundary(_) => KoenigsCase::Boundary,
    };
    let mut map = KoenigsMap { base: spec.clone(), case, residual: 0.0 };

    // normalization at the distinguished point
    match case {
        KoenigsCase::Interior => {
            let tau = match spec.dw() {
                FixedPoint::Interior(p) => p,
                FixedPoint::Boundary(_) => unreachable!(),
            };
            let at_tau = map.eval(tau)?;
            if at_tau.norm() > 1e-10 {
                return Err(Error::invalid(format!(
                    "Koenigs normalization failed: |h(tau)| = {:.3e}",
                    at_tau.norm()
                )));
            }
            let slope = map_derivative(|z| map.eval(DiscPoint::new(z)?), tau, 1)?;
            if (slope - Complex64::new(1.0, 0.0)).norm() > 1e-8 {
                return Err(Error::invalid(format!("Koenigs normalization failed: h'(tau) = {slope}")));
            }
        }
        KoenigsCase::Boundary => {
            let origin = DiscPoint::new(Complex64::new(0.0, 0.0))?;
            let at_zero = map.eval(origin)?;
            if at_zero.norm() > 1e-12 {
                return Err(Error::invalid(format!(
                    "Koenigs normalization failed: |h(0)| = {:.3e}",
                    at_zero.norm()
                )));
            }
        }
    }

    // functional equation with an independently computed derivative, plus an
    // injectivity proxy: grid images must stay pairwise distinct
    let mut residual = 0.0f64;
    let mut images: Vec<Complex64> = Vec::new();
    for point in radius08_grid() {
        let h = map.eval(point)?;
        let h_prime = map_derivative(|z| map.eval(DiscPoint::new(z)?), point, 1)?;
        let g_value = spec.field.eval1(point.value())?;
        let r = match case {
            KoenigsCase::Boundary => (h_prime * g_value - Complex64::new(1.0, 0.0)).norm(),
            KoenigsCase::Interior => (h_prime * g_value - spec.spectral * h).norm(),
        };
        residual = residual.max(r);
        images.push(h);
    }
    if residual > KOENIGS_RESIDUAL_TOL {
        return Err(Error::invalid(format!(
            "Koenigs functional equation residual {residual:.3e} exceeds {KOENIGS_RESIDUAL_TOL:.1e}"
        )));
    }
    for (i, a) in images.iter().enumerate() {
        for b in images.iter().skip(i + 1) {
            if (a - b).norm() < 1e-9 {
                return Err(Error::invalid("Koenigs map is not injective on the validation grid"));
            }
        }
    }
    map.residual = residual;
    Ok(map)
}

/// The semigroup of a certified generator, transported through its Koenigs
/// conjugation. Construction validates the conjugation once; `at` then costs
/// one Newton solve per call.
#[derive(Debug, Clone)]
pub struct Semigroup {
    kgs: KoenigsMap,
}

impl Semigroup {
    pub fn new(spec: &GeneratorSpec) -> Result<Self> {
        Ok(Semigroup { kgs: koenigs(spec)? })
    }

    pub fn koenigs_map(&self) -> &KoenigsMap {
        &self.kgs
    }

    /// Phi_t(z) for t >= 0.
    pub fn at(&self, t: f64, z: DiscPoint) -> Result<DiscPoint> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::invalid(format!("semigroup time must be nonnegative, got {t}")));
        }
        if t == 0.0 {
            return Ok(z);
        }
        let spec = self.kgs.base();
        let h_z = self.kgs.eval(z)?;
        let target = match self.kgs.case {
            KoenigsCase::Interior => (spec.spectral * t).exp() * h_z,
            KoenigsCase::Boundary => h_z + t,
        };
        let seed = ode_seed(spec, t, z)?;
        self.kgs.invert(target, seed)
    }
}

/// Coarse fixed-step RK4 prediction of the flow, used only to seed Newton.
fn ode_seed(spec: &GeneratorSpec, t: f64, z: DiscPoint) -> Result<DiscPoint> {
    let steps = ((t / 0.05).ceil() as usize).clamp(1, 10_000);
    let h = t / steps as f64;
    let mut y = z.value();
    let f = |w: Complex64| -> Result<Complex64> { spec.field.eval1(w) };
    for _ in 0..steps {
        let k1 = f(y)?;
        let k2 = f(y + 0.5 * h * k1)?;
        let k3 = f(y + 0.5 * h * k2)?;
        let k4 = f(y + h * k3)?;
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let m = y.norm();
        if m >= 1.0 - 1e-9 {
            y *= (1.0 - 1e-9) / m;
        }
    }
    DiscPoint::new(y)
}

/// One semigroup element Phi_t(z). Building the conjugation dominates the
/// cost; use [`Semigroup`] directly when sampling many times.
pub fn semigroup_map(spec: &GeneratorSpec, t: f64, z: DiscPoint) -> Result<DiscPoint> {
    Semigroup::new(spec)?.at(t, z)
}

/// Generator of a group of hyperbolic automorphisms with boundary fixed
/// points tau (attracting) and sigma (repelling):
/// G(z) = lambda (z - tau)(z - sigma).
///
/// The stated pairing constraint Re(lambda (sigma + tau)) = |lambda|
/// |1 + tau sigma| is checked first, but it degenerates for antipodal fixed
/// points, so the returned generator is additionally certified: both +G and
/// -G must pass the Berkson-Porta test, which is what "generates a group"
/// means. A lambda that slips through the constraint without generating a
/// group (e.g. lambda = i with tau = 1, sigma = -1) is rejected there.
pub fn hyperbolic_group_generator(
    tau: BoundaryPoint,
    sigma: BoundaryPoint,
    lambda: Complex64,
) -> Result<GeneratorSpec> {
    if (tau.value() - sigma.value()).norm() < 1e-9 {
        return Err(Error::invalid("tau and sigma must be distinct boundary points"));
    }
    if lambda.norm() < 1e-14 {
        return Err(Error::ZeroField);
    }
    let lhs = (lambda * (sigma.value() + tau.value())).re;
    let rhs = lambda.norm() * (Complex64::new(1.0, 0.0) + tau.value() * sigma.value()).norm();
    if (lhs - rhs).abs() > 1e-9 {
        return Err(Error::GroupConstraintViolated { lhs, rhs });
    }
    let ast = Expr::complex_const(lambda)
        * (Expr::Z - Expr::complex_const(tau.value()))
        * (Expr::Z - Expr::complex_const(sigma.value()));
    let field = HoloFunction::from_ast(ast.clone(), Arity::One)?;
    let negated = HoloFunction::from_ast(-ast, Arity::One)?;
    let spec = bp_decompose(&field)?;
    bp_decompose(&negated)?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn f1(text: &str) -> HoloFunction {
        parse_expr(text, Arity::One).unwrap()
    }

    #[test]
    fn dw_of_linear_field_is_origin() {
        let fp = denjoy_wolff(&f1("-z")).unwrap();
        match fp {
            FixedPoint::Interior(p) => assert!(p.value().norm() < 1e-10),
            _ => panic!("expected interior point"),
        }
        let s = spectral_value(&f1("-z"), fp).unwrap();
        assert!((s - c(-1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn dw_of_parabolic_field_is_one() {
        let fp = denjoy_wolff(&f1("(z-1)^2")).unwrap();
        match fp {
            FixedPoint::Boundary(p) => assert!((p.value() - c(1.0, 0.0)).norm() < 1e-7),
            _ => panic!("expected boundary point"),
        }
        let s = spectral_value(&f1("(z-1)^2"), fp).unwrap();
        assert!(s.norm() < 1e-9, "rate should vanish, got {s}");
    }

    #[test]
    fn dw_of_hyperbolic_field() {
        let g = f1("1-z^2");
        let fp = denjoy_wolff(&g).unwrap();
        match fp {
            FixedPoint::Boundary(p) => assert!((p.value() - c(1.0, 0.0)).norm() < 1e-7),
            _ => panic!("expected boundary point"),
        }
        let s = spectral_value(&g, fp).unwrap();
        assert!((s - c(-2.0, 0.0)).norm() < 1e-9, "got {s}");
    }

    #[test]
    fn zero_field_is_rejected() {
        assert!(matches!(denjoy_wolff(&f1("0*z")), Err(Error::ZeroField)));
    }

    #[test]
    fn boundary_points_of_group_field() {
        let pts = boundary_fixed_points(&f1("1-z^2")).unwrap();
        assert_eq!(pts.len(), 2);
        // sorted by angle: -1 has angle pi, +1 has angle 0
        let at_one = pts.iter().find(|(p, _)| (p.value() - c(1.0, 0.0)).norm() < 1e-7).unwrap();
        let at_minus_one = pts.iter().find(|(p, _)| (p.value() + c(1.0, 0.0)).norm() < 1e-7).unwrap();
        assert!((at_one.1 + 2.0).abs() < 1e-8);
        assert!((at_minus_one.1 - 2.0).abs() < 1e-8);
    }

    #[test]
    fn no_boundary_zeros_for_elliptic_fields() {
        assert!(boundary_fixed_points(&f1("-z")).unwrap().is_empty());
        assert!(boundary_fixed_points(&f1("-z*(2+z)")).unwrap().is_empty());
    }

    #[test]
    fn bp_round_trip_elliptic() {
        let spec = bp_decompose(&f1("-z*(2+z)")).unwrap();
        assert!(spec.dw().value().norm() < 1e-9);
        assert!((spec.spectral() - c(-2.0, 0.0)).norm() < 1e-9);
        // p = -G/z = 2+z up to the quotient representation
        for z in [c(0.3, 0.2), c(-0.5, 0.1), c(0.0, -0.6)] {
            let p = spec.bp_factor().eval1(z).unwrap();
            assert!((p - (c(2.0, 0.0) + z)).norm() < 1e-9);
        }
    }

    #[test]
    fn bp_compose_rejects_wrong_half_plane() {
        let p = f1("-1-0*z");
        let tau = FixedPoint::Interior(DiscPoint::new(c(0.0, 0.0)).unwrap());
        assert!(matches!(bp_compose(tau, &p), Err(Error::NotAGenerator { .. })));
    }

    #[test]
    fn bp_compose_golden_parabolic() {
        // tau = 1, p = 1: G = (z-1)(z-1) = (z-1)^2
        let tau = FixedPoint::Boundary(BoundaryPoint::new(c(1.0, 0.0)).unwrap());
        let spec = bp_compose(tau, &f1("1+0*z")).unwrap();
        for z in [c(0.3, 0.2), c(-0.5, 0.1)] {
            let expected = (z - 1.0) * (z - 1.0);
            assert!((spec.eval(z).unwrap() - expected).norm() < 1e-12);
        }
        assert!(spec.spectral().norm() < 1e-9);
    }

    #[test]
    fn not_a_generator_is_detected() {
        // z^2 - 1 flows toward -1; (z-1)^2 reversed is not a generator
        assert!(bp_decompose(&f1("-(z-1)^2")).is_err());
    }

    #[test]
    fn group_generator_construction() {
        let tau = BoundaryPoint::new(c(1.0, 0.0)).unwrap();
        let sigma = BoundaryPoint::new(c(-1.0, 0.0)).unwrap();
        let spec = hyperbolic_group_generator(tau, sigma, c(-1.0, 0.0)).unwrap();
        for z in [c(0.3, 0.2), c(-0.5, 0.1)] {
            assert!((spec.eval(z).unwrap() - (1.0 - z * z)).norm() < 1e-12);
        }
        assert!((spec.dw().value() - c(1.0, 0.0)).norm() < 1e-7);

        // lambda = i satisfies the degenerate printed constraint but does not
        // generate a group; certification must reject it
        assert!(hyperbolic_group_generator(tau, sigma, c(0.0, 1.0)).is_err());

        // constraint violation is caught before certification
        let sigma_i = BoundaryPoint::new(c(0.0, 1.0)).unwrap();
        assert!(matches!(
            hyperbolic_group_generator(tau, sigma_i, c(1.0, 0.0)),
            Err(Error::GroupConstraintViolated { .. })
        ));
    }
}
