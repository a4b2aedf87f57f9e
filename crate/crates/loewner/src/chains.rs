//! Loewner chains attached to splitting fields.
//!
//! When `G(z, t) = g(t) G(z)` the chain is affine in the Koenigs map of the
//! base: with `lambda(s)` the primitive of `g` and `kappa` the spectral
//! value at the Denjoy-Wolff point,
//!
//!   interior case:  f_s(z) = exp(-kappa lambda(s)) h(z)
//!   boundary case:  f_s(z) = h(z) - lambda(s)
//!
//! and the evolution family is recovered from `f_t o phi_{s,t} = f_s` by
//! inverting the affine step in h-coordinates.

use num_complex::Complex64;

use crate::calculus::map_derivative;
use crate::disc::DiscPoint;
use crate::error::{Error, Result};
use crate::evolution::EvolutionFamilyHandle;
use crate::generators::{koenigs, KoenigsMap};
use crate::herglotz::{recover_g, FieldKind, HerglotzField, TimeFactor};
use crate::report::{chain_tolerance, derivative_tolerance, PropertyReport, WitnessResidual};

/// Inner margin for the range-inclusion certificate: pulled-back boundary
/// samples must stay at least this far from the unit circle (the Newton
/// clamp radius plus slack).
const RANGE_MARGIN: f64 = 1e-9 + 1e-8;

const PDE_DELTA: f64 = 1e-4;

/// Largest h-plane move per Newton continuation substep.
const CONTINUATION_STEP: f64 = 0.4;
const CONTINUATION_CAP: usize = 400;

#[derive(Debug, Clone)]
pub struct LoewnerChainHandle {
    koenigs: KoenigsMap,
    factor: TimeFactor,
}

impl LoewnerChainHandle {
    /// Assemble a chain from parts without any splitting certification.
    /// This is the door for hand-built examples, including ones that
    /// violate the nondecreasing-time-change requirement and therefore
    /// fail the range-inclusion certificate.
    pub fn from_parts(koenigs: KoenigsMap, factor: TimeFactor) -> Self {
        LoewnerChainHandle { koenigs, factor }
    }

    pub fn koenigs(&self) -> &KoenigsMap {
        &self.koenigs
    }

    pub fn factor(&self) -> &TimeFactor {
        &self.factor
    }

    /// lambda(s), the primitive of the scalar factor over [0, s].
    pub fn lambda(&self, s: f64) -> Result<Complex64> {
        self.factor.integral(s)
    }

    /// f_s(z).
    pub fn eval(&self, s: f64, z: DiscPoint) -> Result<Complex64> {
        let h = self.koenigs.eval(z)?;
        let lam = self.lambda(s)?;
        if self.koenigs.is_interior_case() {
            let kappa = self.koenigs.base().spectral();
            Ok((-kappa * lam).exp() * h)
        } else {
            Ok(h - lam)
        }
    }

    /// f_s'(z), by the Cauchy stencil on f_s.
    pub fn derivative(&self, s: f64, z: DiscPoint) -> Result<Complex64> {
        map_derivative(|w| self.eval(s, DiscPoint::new(w)?), z, 1)
    }

    /// The family member phi_{s,t}(z) = f_t^{-1}(f_s(z)) for s <= t,
    /// computed by Newton continuation in h-coordinates.
    pub fn family_map(&self, s: f64, t: f64, z: DiscPoint) -> Result<DiscPoint> {
        if t < s {
            return Err(Error::TimeOrder { s, t });
        }
        let delta = self.lambda(t)? - self.lambda(s)?;
        let hz = self.koenigs.eval(z)?;
        if self.koenigs.is_interior_case() {
            let exponent = self.koenigs.base().spectral() * delta;
            let m = ((exponent.norm() / CONTINUATION_STEP).ceil() as usize).clamp(1, CONTINUATION_CAP);
            let mut w = z;
            for j in 1..=m {
                let target = (exponent * (j as f64 / m as f64)).exp() * hz;
                w = self.koenigs.invert(target, w)?;
            }
            Ok(w)
        } else {
            let m = ((delta.norm() / CONTINUATION_STEP).ceil() as usize).clamp(1, CONTINUATION_CAP);
            let mut w = z;
            for j in 1..=m {
                let target = hz + delta * (j as f64 / m as f64);
                w = self.koenigs.invert(target, w)?;
            }
            Ok(w)
        }
    }
}

/// Build the affine chain of a splitting field.
///
/// Structurally splitting inputs (autonomous, explicit factor) pass
/// directly; piecewise and general fields are admitted only when every
/// sampled time slice is a scalar multiple of a common base, certified by
/// [`recover_g`].
pub fn affine_chain(field: &HerglotzField) -> Result<LoewnerChainHandle> {
    let grid = crate::grid::radius08_grid();
    let (base, factor) = match field.kind() {
        FieldKind::Autonomous { base } => (base.clone(), TimeFactor::constant(Complex64::new(1.0, 0.0))),
        FieldKind::Splitting { factor, base } => (base.clone(), factor.clone()),
        FieldKind::Piecewise { pieces } => {
            let base = pieces[0].1.clone();
            let mut mids = Vec::with_capacity(pieces.len());
            for (k, (start, _)) in pieces.iter().enumerate() {
                let end = pieces.get(k + 1).map(|(s, _)| *s).unwrap_or(field.horizon().max(start + 1.0));
                mids.push(0.5 * (start + end));
            }
            let rec = recover_g(field, &base, &mids, &grid)?;
            let steps: Vec<(f64, Complex64)> = pieces
                .iter()
                .zip(rec.samples.iter())
                .map(|((start, _), (_, value))| (*start, *value))
                .collect();
            (base, TimeFactor::from_steps(steps)?)
        }
        FieldKind::General { .. } => {
            let times = field.certification_times();
            let mut best = (times[0], 0.0f64);
            for &t in &times {
                let mut scale = 0.0f64;
                for z in &grid {
                    scale = scale.max(field.eval(z.value(), t)?.norm());
                }
                if scale > best.1 {
                    best = (t, scale);
                }
            }
            if best.1 < 1e-14 {
                return Err(Error::ZeroField);
            }
            let base = crate::generators::bp_decompose(&field.frozen(best.0)?)?;
            let rec = recover_g(field, &base, &times, &grid)?;
            (base, TimeFactor::from_samples(rec.samples)?)
        }
    };
    Ok(LoewnerChainHandle { koenigs: koenigs(&base)?, factor })
}

/// |f_t(phi_{s,t}(z)) - f_s(z)| over the grid for each pair s <= t, with
/// phi taken from the supplied family.
pub fn chain_compat_report(
    chain: &LoewnerChainHandle,
    family: &EvolutionFamilyHandle,
    pairs: &[(f64, f64)],
    grid: &[DiscPoint],
) -> Result<PropertyReport> {
    if pairs.is_empty() {
        return Err(Error::TooFewEntries { what: "time pairs", min: 1, got: 0 });
    }
    let mut witnesses = Vec::new();
    for &(s, t) in pairs {
        if t < s {
            return Err(Error::TimeOrder { s, t });
        }
        let mut sup = 0.0f64;
        let mut arg = Complex64::new(0.0, 0.0);
        for z in grid {
            let phi = family.evolve(s, t, *z)?;
            let r = (chain.eval(t, phi)? - chain.eval(s, *z)?).norm();
            if r > sup {
                sup = r;
                arg = z.value();
            }
        }
        witnesses.push(WitnessResidual { witness: format!("(s={s}, t={t}, z={arg})"), residual: sup });
    }
    let tol = chain_tolerance(family.settings().rel_tol);
    Ok(PropertyReport::new("chain-compatibility", tol, witnesses))
}

/// Residual of the chain PDE  d/ds f_s(z) = -G(z, s) f_s'(z)  with
/// G(z, s) = g(s) G_base(z), central differences in s and the Cauchy
/// stencil for f_s'. The residual is taken relative to the size of the
/// transport term: interior-case chain elements grow like exp(-kappa
/// lambda(s)), and an absolute comparison would only measure that growth.
pub fn chain_pde_report(
    chain: &LoewnerChainHandle,
    s_samples: &[f64],
    grid: &[DiscPoint],
) -> Result<PropertyReport> {
    if s_samples.is_empty() {
        return Err(Error::TooFewEntries { what: "s samples", min: 1, got: 0 });
    }
    let mut witnesses = Vec::new();
    for &s in s_samples {
        if s - PDE_DELTA < 0.0 {
            return Err(Error::invalid(format!("s = {s} must keep s - {PDE_DELTA} nonnegative")));
        }
        if chain.factor.breakpoints().iter().any(|b| (b - s).abs() <= PDE_DELTA) {
            return Err(Error::OnBreakpoint { t: s });
        }
        let g_s = chain.factor.eval(s)?;
        let mut sup = 0.0f64;
        let mut arg = Complex64::new(0.0, 0.0);
        for z in grid {
            let plus = chain.eval(s + PDE_DELTA, *z)?;
            let minus = chain.eval(s - PDE_DELTA, *z)?;
            let lhs = (plus - minus) / (2.0 * PDE_DELTA);
            let fprime = chain.derivative(s, *z)?;
            let g_base = chain.koenigs.base().eval(z.value())?;
            let rhs = -g_s * g_base * fprime;
            let r = (lhs - rhs).norm() / rhs.norm().max(1.0);
            if r > sup {
                sup = r;
                arg = z.value();
            }
        }
        witnesses.push(WitnessResidual { witness: format!("(s={s}, z={arg})"), residual: sup });
    }
    Ok(PropertyReport::new("chain-pde", derivative_tolerance(1e-10), witnesses))
}

/// Certify f_s(D) inside f_t(D) for each pair s <= t by pulling the
/// radius-0.999 circle back through f_t^{-1} o f_s and verifying the
/// preimages keep a fixed margin to the unit circle. An unreachable target
/// (Newton failure) is recorded as a unit residual and the remaining circle
/// points of that pair are skipped, since the sup cannot grow further.
pub fn range_inclusion_report(chain: &LoewnerChainHandle, pairs: &[(f64, f64)]) -> Result<PropertyReport> {
    if pairs.is_empty() {
        return Err(Error::TooFewEntries { what: "time pairs", min: 1, got: 0 });
    }
    let circle = crate::grid::certification_circle();
    let limit = 1.0 - RANGE_MARGIN;
    let mut witnesses = Vec::new();
    for &(s, t) in pairs {
        if t < s {
            return Err(Error::TimeOrder { s, t });
        }
        let mut sup = 0.0f64;
        let mut text = String::new();
        for z in &circle {
            match chain.family_map(s, t, *z) {
                Ok(u) => {
                    let r = (u.value().norm() - limit).max(0.0);
                    if r > sup {
                        sup = r;
                        text = format!("(s={s}, t={t}, z={})", z.value());
                    }
                }
                Err(e) => {
                    sup = 1.0;
                    text = format!("(s={s}, t={t}, z={}): preimage unreachable ({e})", z.value());
                    break;
                }
            }
        }
        if text.is_empty() {
            text = format!("(s={s}, t={t})");
        }
        witnesses.push(WitnessResidual { witness: text, residual: sup });
    }
    Ok(PropertyReport::new("range-inclusion", 0.0, witnesses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::EvolutionFamilyHandle;
    use crate::expr::{parse_expr, Arity};
    use crate::generators::bp_decompose;
    use crate::grid::{default_grid, radius08_grid};
    use crate::herglotz::{make_field, FieldSpec, OrderD, PieceSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dp(re: f64, im: f64) -> DiscPoint {
        DiscPoint::new(c(re, im)).unwrap()
    }

    fn boundary_demo() -> HerglotzField {
        make_field(
            &FieldSpec::Splitting { g: TimeFactor::parse("1+i*t").unwrap(), base: "(z-1)^2".into() },
            OrderD::Infinite,
            3.0,
        )
        .unwrap()
    }

    fn interior_demo() -> HerglotzField {
        make_field(
            &FieldSpec::Splitting { g: TimeFactor::parse("1+(1+i)*t").unwrap(), base: "-z*(2+z)".into() },
            OrderD::Infinite,
            3.0,
        )
        .unwrap()
    }

    #[test]
    fn boundary_chain_matches_closed_form() {
        let chain = affine_chain(&boundary_demo()).unwrap();
        let z = dp(0.3, 0.2);
        for s in [0.0, 0.5, 1.0, 2.0] {
            let lam = c(s, 0.5 * s * s);
            let want = z.value() / (1.0 - z.value()) - lam;
            let got = chain.eval(s, z).unwrap();
            assert!((got - want).norm() < 1e-10, "s={s}: {got} vs {want}");
        }
    }

    #[test]
    fn interior_chain_matches_closed_form() {
        let chain = affine_chain(&interior_demo()).unwrap();
        let z = dp(-0.4, 0.25);
        for s in [0.0, 0.7, 1.5] {
            let lam = c(s, 0.0) + c(1.0, 1.0) * 0.5 * s * s;
            let want = (2.0 * lam).exp() * 2.0 * z.value() / (z.value() + 2.0);
            let got = chain.eval(s, z).unwrap();
            assert!((got - want).norm() < 1e-9 * want.norm().max(1.0), "s={s}: {got} vs {want}");
        }
    }

    #[test]
    fn family_map_agrees_with_ode_flow() {
        for field in [boundary_demo(), interior_demo()] {
            let chain = affine_chain(&field).unwrap();
            let family = EvolutionFamilyHandle::from_field(field);
            for z in [dp(0.0, 0.0), dp(0.5, -0.3), dp(-0.7, 0.1)] {
                for (s, t) in [(0.0, 1.0), (0.5, 2.0)] {
                    let a = chain.family_map(s, t, z).unwrap().value();
                    let b = family.evolve(s, t, z).unwrap().value();
                    assert!((a - b).norm() < 1e-7, "s={s}, t={t}, z={}: {a} vs {b}", z.value());
                }
            }
        }
    }

    #[test]
    fn flip_field_chain_has_stepped_factor() {
        let field = make_field(
            &FieldSpec::Piecewise {
                pieces: vec![
                    PieceSpec { start: 0.0, base: "1-z^2".into() },
                    PieceSpec { start: 1.0, base: "z^2-1".into() },
                ],
            },
            OrderD::Infinite,
            2.0,
        )
        .unwrap();
        let chain = affine_chain(&field).unwrap();
        assert!((chain.factor().eval(0.5).unwrap() - c(1.0, 0.0)).norm() < 1e-9);
        assert!((chain.factor().eval(1.5).unwrap() - c(-1.0, 0.0)).norm() < 1e-9);
        // lambda is a triangle wave: the full period is a round trip
        assert!(chain.lambda(2.0).unwrap().norm() < 1e-12);
        let z = dp(0.3, -0.4);
        let round_trip = chain.family_map(0.0, 2.0, z).unwrap().value();
        assert!((round_trip - z.value()).norm() < 1e-8, "{round_trip}");
        // and the ODE flow agrees that one unit forward plus one flipped
        // unit is the identity
        let family = EvolutionFamilyHandle::from_field(field);
        let via_ode = family.evolve(0.0, 2.0, z).unwrap().value();
        assert!((via_ode - z.value()).norm() < 1e-9, "{via_ode}");
    }

    #[test]
    fn non_splitting_field_is_rejected() {
        let field = make_field(
            &FieldSpec::Piecewise {
                pieces: vec![
                    PieceSpec { start: 0.0, base: "-z".into() },
                    PieceSpec { start: 1.0, base: "-z*(2+z)".into() },
                ],
            },
            OrderD::Infinite,
            2.0,
        )
        .unwrap();
        assert!(matches!(affine_chain(&field), Err(Error::NotSplitting { .. })));
    }

    #[test]
    fn compatibility_reports_hold() {
        for field in [boundary_demo(), interior_demo()] {
            let chain = affine_chain(&field).unwrap();
            let family = EvolutionFamilyHandle::from_field(field);
            let grid = default_grid();
            let report =
                chain_compat_report(&chain, &family, &[(0.0, 0.5), (0.5, 1.5), (1.0, 1.0)], &grid).unwrap();
            assert!(report.verdict, "{report}");
        }
    }

    #[test]
    fn pde_reports_hold() {
        for field in [boundary_demo(), interior_demo()] {
            let chain = affine_chain(&field).unwrap();
            let grid = radius08_grid();
            let report = chain_pde_report(&chain, &[0.3, 1.0, 1.7], &grid).unwrap();
            assert!(report.verdict, "{report}");
        }
    }

    #[test]
    fn pde_respects_factor_breakpoints() {
        let field = make_field(
            &FieldSpec::Piecewise {
                pieces: vec![
                    PieceSpec { start: 0.0, base: "1-z^2".into() },
                    PieceSpec { start: 1.0, base: "z^2-1".into() },
                ],
            },
            OrderD::Infinite,
            2.0,
        )
        .unwrap();
        let chain = affine_chain(&field).unwrap();
        let grid = radius08_grid();
        let r = chain_pde_report(&chain, &[1.0 + 0.5 * PDE_DELTA], &grid);
        assert!(matches!(r, Err(Error::OnBreakpoint { .. })));
    }

    #[test]
    fn range_inclusion_holds_for_nondecreasing_real_factor() {
        // real, positive factor: ranges genuinely expand
        let field = make_field(
            &FieldSpec::Splitting { g: TimeFactor::parse("1+t").unwrap(), base: "(z-1)^2".into() },
            OrderD::Infinite,
            3.0,
        )
        .unwrap();
        let chain = affine_chain(&field).unwrap();
        let report = range_inclusion_report(&chain, &[(0.0, 1.0), (0.5, 2.0)]).unwrap();
        assert!(report.verdict, "{report}");

        let interior = affine_chain(
            &make_field(
                &FieldSpec::Splitting { g: TimeFactor::parse("1+t").unwrap(), base: "-z*(2+z)".into() },
                OrderD::Infinite,
                3.0,
            )
            .unwrap(),
        )
        .unwrap();
        let report = range_inclusion_report(&interior, &[(0.0, 1.5)]).unwrap();
        assert!(report.verdict, "{report}");
    }

    #[test]
    fn decreasing_time_change_fails_range_inclusion() {
        // g = -1 means every slice is -(z-1)^2, not a generator, so this
        // chain can only be built from parts; its ranges shrink
        let base = bp_decompose(&parse_expr("(z-1)^2", Arity::One).unwrap()).unwrap();
        let chain =
            LoewnerChainHandle::from_parts(koenigs(&base).unwrap(), TimeFactor::constant(c(-1.0, 0.0)));
        let report = range_inclusion_report(&chain, &[(0.0, 1.0)]).unwrap();
        assert!(!report.verdict, "{report}");
        assert!(report.sup_residual >= 1e-9, "sup = {:.3e}", report.sup_residual);
    }
}
