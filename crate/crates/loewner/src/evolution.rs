//! Evolution families `phi_{s,t}` obtained by flowing the generalized
//! Loewner ODE  d/dt phi_{s,t}(z) = G(phi_{s,t}(z), t),  phi_{s,s}(z) = z.
//!
//! The integrator is an embedded Dormand-Prince 5(4) pair with a first-same-
//! as-last stage. Time windows between field breakpoints are integrated
//! separately so no step ever straddles a jump; within a window every stage,
//! including the one landing on the window's right edge, reads the branch
//! the window belongs to.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::map_derivative;
use crate::disc::DiscPoint;
use crate::error::{Error, Result};
use crate::generators::{GeneratorSpec, Semigroup};
use crate::herglotz::{HerglotzField, TimeFactor};
use crate::report::{composition_tolerance, derivative_tolerance, PropertyReport, WitnessResidual};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings { rel_tol: 1e-10, abs_tol: 1e-12, max_step: 0.05 }
    }
}

impl IntegratorSettings {
    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0) {
            return Err(Error::invalid("integrator tolerances and max step must be positive"));
        }
        Ok(())
    }
}

// Dormand-Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const A7: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

const MAX_HALVINGS: u32 = 60;
const MAX_STEPS: u64 = 2_000_000;

/// One adaptive pass over a breakpoint-free window [a, b].
fn dopri5<F>(f: &mut F, a: f64, b: f64, y0: Complex64, settings: &IntegratorSettings) -> Result<Complex64>
where
    F: FnMut(f64, Complex64) -> Result<Complex64>,
{
    let span = b - a;
    if span <= 0.0 {
        return Ok(y0);
    }
    let arrival = 1e-12 * span.max(1.0);
    let min_h = 1e-13 * span.max(1.0);
    let mut y = y0;
    let mut cur = a;
    let mut h = span.min(settings.max_step);
    let mut k1 = f(cur, y)?;
    let mut halvings: u32 = 0;
    let mut steps: u64 = 0;
    while b - cur > arrival {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::invalid(format!("integrator exceeded its step budget on [{a}, {b}]")));
        }
        h = h.min(b - cur);
        if h < min_h {
            return Err(Error::StepSizeUnderflow { t: cur, h });
        }
        let attempt = (|| -> Result<(Complex64, Complex64, f64)> {
            let k2 = f(cur + C[1] * h, y + h * (A2[0] * k1))?;
            let k3 = f(cur + C[2] * h, y + h * (A3[0] * k1 + A3[1] * k2))?;
            let k4 = f(cur + C[3] * h, y + h * (A4[0] * k1 + A4[1] * k2 + A4[2] * k3))?;
            let k5 = f(cur + C[4] * h, y + h * (A5[0] * k1 + A5[1] * k2 + A5[2] * k3 + A5[3] * k4))?;
            let k6 =
                f(cur + C[5] * h, y + h * (A6[0] * k1 + A6[1] * k2 + A6[2] * k3 + A6[3] * k4 + A6[4] * k5))?;
            let y_new = y + h * (A7[0] * k1 + A7[2] * k3 + A7[3] * k4 + A7[4] * k5 + A7[5] * k6);
            let k7 = f(cur + C[6] * h, y_new)?;
            let err = h * (E[0] * k1 + E[2] * k3 + E[3] * k4 + E[4] * k5 + E[5] * k6 + E[6] * k7);
            Ok((y_new, k7, err.norm()))
        })();
        match attempt {
            Err(e) => {
                // a stage left the domain of the field; retry shorter
                if halvings >= MAX_HALVINGS {
                    return Err(e);
                }
                halvings += 1;
                h *= 0.5;
            }
            Ok((y_new, k7, err)) => {
                let scale = settings.abs_tol + settings.rel_tol * y.norm().max(y_new.norm());
                let err_norm = err / scale;
                if err_norm <= 1.0 {
                    if y_new.norm() >= 1.0 - crate::disc::EPS_BOUNDARY {
                        if halvings >= MAX_HALVINGS {
                            return Err(Error::LeftDisc { t: cur + h, modulus: y_new.norm() });
                        }
                        halvings += 1;
                        h *= 0.5;
                        continue;
                    }
                    cur += h;
                    y = y_new;
                    k1 = k7;
                    halvings = 0;
                    let factor =
                        if err_norm == 0.0 { 5.0 } else { (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0) };
                    h = (h * factor).min(settings.max_step);
                } else {
                    h *= (0.9 * err_norm.powf(-0.2)).clamp(0.2, 0.9);
                }
            }
        }
    }
    Ok(y)
}

/// Flow the field from time s to time t starting at z.
pub fn evolve_field(
    field: &HerglotzField,
    s: f64,
    t: f64,
    z: DiscPoint,
    settings: &IntegratorSettings,
) -> Result<DiscPoint> {
    settings.validate()?;
    if t < s {
        return Err(Error::TimeOrder { s, t });
    }
    if t == s {
        return Ok(z);
    }
    let mut cuts: Vec<f64> = vec![s];
    for &b in field.breakpoints() {
        if b > s && b < t {
            cuts.push(b);
        }
    }
    cuts.push(t);
    let mut y = z.value();
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let mid = 0.5 * (a + b);
        y = dopri5(&mut |tt, zz| field.eval_pinned(zz, tt, mid), a, b, y, settings)?;
    }
    DiscPoint::new(y)
}

/// Flow the frozen-time field G(., t_freeze) for duration r (the semigroup
/// the frozen slice generates, evaluated by the same integrator).
pub fn frozen_semigroup(
    field: &HerglotzField,
    t_freeze: f64,
    r: f64,
    z: DiscPoint,
    settings: &IntegratorSettings,
) -> Result<DiscPoint> {
    settings.validate()?;
    if r < 0.0 {
        return Err(Error::TimeOrder { s: 0.0, t: r });
    }
    if r == 0.0 {
        return Ok(z);
    }
    let y = dopri5(&mut |_, zz| field.eval(zz, t_freeze), 0.0, r, z.value(), settings)?;
    DiscPoint::new(y)
}

#[derive(Debug, Clone)]
enum FamilyBackend {
    Ode(HerglotzField),
    TimeChanged { semigroup: Semigroup, lambda: TimeFactor },
}

/// An evolution family, either the flow of a Herglotz field or a time-changed
/// semigroup phi_{s,t} = Phi_{lambda(t) - lambda(s)}.
#[derive(Debug, Clone)]
pub struct EvolutionFamilyHandle {
    backend: FamilyBackend,
    settings: IntegratorSettings,
}

impl EvolutionFamilyHandle {
    pub fn from_field(field: HerglotzField) -> Self {
        EvolutionFamilyHandle { backend: FamilyBackend::Ode(field), settings: IntegratorSettings::default() }
    }

    pub fn from_field_with(field: HerglotzField, settings: IntegratorSettings) -> Self {
        EvolutionFamilyHandle { backend: FamilyBackend::Ode(field), settings }
    }

    /// Build the family phi_{s,t} = Phi_{lambda(t)-lambda(s)} from an
    /// autonomous generator and a time change. The time change must be real
    /// and nondecreasing on [0, horizon]; only its increments enter the
    /// family.
    pub fn from_semigroup(spec: &GeneratorSpec, lambda: TimeFactor, horizon: f64) -> Result<Self> {
        if horizon.is_nan() || horizon <= 0.0 {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        let n = 256;
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..=n {
            let t = horizon * k as f64 / n as f64;
            let v = lambda.eval(t)?;
            if v.im.abs() > 1e-9 * v.re.abs().max(1.0) {
                return Err(Error::invalid(format!("time change must be real, lambda({t}) = {v}")));
            }
            if let Some((t1, v1)) = prev {
                if v.re < v1 - 1e-12 * v1.abs().max(1.0) {
                    return Err(Error::DecreasingTimeFactor { t1, v1, t2: t, v2: v.re });
                }
            }
            prev = Some((t, v.re));
        }
        Ok(EvolutionFamilyHandle {
            backend: FamilyBackend::TimeChanged { semigroup: Semigroup::new(spec)?, lambda },
            settings: IntegratorSettings::default(),
        })
    }

    pub fn settings(&self) -> &IntegratorSettings {
        &self.settings
    }

    pub fn set_settings(&mut self, settings: IntegratorSettings) {
        self.settings = settings;
    }

    /// The underlying field, when the family is an ODE flow.
    pub fn field(&self) -> Option<&HerglotzField> {
        match &self.backend {
            FamilyBackend::Ode(f) => Some(f),
            FamilyBackend::TimeChanged { .. } => None,
        }
    }

    /// phi_{s,t}(z) for 0 <= s <= t.
    pub fn evolve(&self, s: f64, t: f64, z: DiscPoint) -> Result<DiscPoint> {
        match &self.backend {
            FamilyBackend::Ode(field) => evolve_field(field, s, t, z, &self.settings),
            FamilyBackend::TimeChanged { semigroup, lambda } => {
                if t < s {
                    return Err(Error::TimeOrder { s, t });
                }
                let delta = lambda.eval(t)? - lambda.eval(s)?;
                if delta.im.abs() > 1e-9 * delta.re.abs().max(1.0) {
                    return Err(Error::invalid(format!("time change must be real, increment {delta}")));
                }
                if delta.re < -1e-10 {
                    return Err(Error::DecreasingTimeFactor { t1: s, v1: 0.0, t2: t, v2: delta.re });
                }
                semigroup.at(delta.re.max(0.0), z)
            }
        }
    }
}

/// Sampled orbit rows: phi_{s,t}(z0) over output times for each start point.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRow {
    pub s: f64,
    pub t: f64,
    pub z0: Complex64,
    pub phi: Complex64,
}

pub fn trajectory(
    handle: &EvolutionFamilyHandle,
    s: f64,
    times: &[f64],
    starts: &[DiscPoint],
) -> Result<Trajectory> {
    if times.is_empty() {
        return Err(Error::TooFewEntries { what: "output times", min: 1, got: 0 });
    }
    if starts.is_empty() {
        return Err(Error::TooFewEntries { what: "start points", min: 1, got: 0 });
    }
    let mut rows = Vec::with_capacity(times.len() * starts.len());
    for z0 in starts {
        for &t in times {
            let phi = handle.evolve(s, t, *z0)?;
            rows.push(TrajectoryRow { s, t, z0: z0.value(), phi: phi.value() });
        }
    }
    Ok(Trajectory { rows })
}

fn sup_over_grid<F>(grid: &[DiscPoint], mut residual_at: F) -> Result<(f64, Complex64)>
where
    F: FnMut(DiscPoint) -> Result<f64>,
{
    let mut sup = 0.0f64;
    let mut arg = Complex64::new(0.0, 0.0);
    for z in grid {
        let r = residual_at(*z)?;
        if r > sup {
            sup = r;
            arg = z.value();
        }
    }
    Ok((sup, arg))
}

/// Two-parameter semigroup law: |phi_{u,t} o phi_{s,u} - phi_{s,t}| over the
/// grid for each triple s <= u <= t, plus the exactness of phi_{s,s}.
pub fn ef_axiom_report(
    handle: &EvolutionFamilyHandle,
    triples: &[(f64, f64, f64)],
    grid: &[DiscPoint],
) -> Result<PropertyReport> {
    if triples.is_empty() {
        return Err(Error::TooFewEntries { what: "axiom triples", min: 1, got: 0 });
    }
    let mut witnesses = Vec::new();
    for &(s, u, t) in triples {
        if !(s <= u && u <= t) {
            return Err(Error::TimeOrder { s, t: u.min(t) });
        }
        let (sup, arg) = sup_over_grid(grid, |z| {
            let through = handle.evolve(u, t, handle.evolve(s, u, z)?)?;
            let direct = handle.evolve(s, t, z)?;
            Ok((through.value() - direct.value()).norm())
        })?;
        witnesses.push(WitnessResidual { witness: format!("(s={s}, u={u}, t={t}, z={arg})"), residual: sup });
    }
    let mut seen = Vec::new();
    for &(s, _, _) in triples {
        if seen.contains(&s.to_bits()) {
            continue;
        }
        seen.push(s.to_bits());
        let (sup, _) = sup_over_grid(grid, |z| Ok((handle.evolve(s, s, z)?.value() - z.value()).norm()))?;
        witnesses.push(WitnessResidual { witness: format!("(identity at s={s})"), residual: sup });
    }
    let tol = composition_tolerance(handle.settings.rel_tol);
    Ok(PropertyReport::new("evolution-family-axioms", tol, witnesses))
}

const TRANSPORT_DELTA: f64 = 1e-4;

/// Residual of the s-side transport equation
/// d/ds phi_{s,t}(z) = -phi_{s,t}'(z) G(z, s), by central differences in s
/// and the Cauchy stencil in z. Needs the ODE backend (the equation is about
/// the field).
pub fn transport_residual(
    handle: &EvolutionFamilyHandle,
    t: f64,
    s_samples: &[f64],
    grid: &[DiscPoint],
) -> Result<PropertyReport> {
    let field = handle
        .field()
        .ok_or_else(|| Error::invalid("the transport residual needs a family backed by a field"))?;
    if s_samples.is_empty() {
        return Err(Error::TooFewEntries { what: "s samples", min: 1, got: 0 });
    }
    let mut witnesses = Vec::new();
    for &s in s_samples {
        if s - TRANSPORT_DELTA < 0.0 || s + TRANSPORT_DELTA > t {
            return Err(Error::invalid(format!(
                "s = {s} must keep [s-{TRANSPORT_DELTA}, s+{TRANSPORT_DELTA}] inside [0, {t}]"
            )));
        }
        if field.breakpoints().iter().any(|b| (b - s).abs() <= TRANSPORT_DELTA) {
            return Err(Error::OnBreakpoint { t: s });
        }
        let (sup, arg) = sup_over_grid(grid, |z| {
            let plus = handle.evolve(s + TRANSPORT_DELTA, t, z)?.value();
            let minus = handle.evolve(s - TRANSPORT_DELTA, t, z)?.value();
            let lhs = (plus - minus) / (2.0 * TRANSPORT_DELTA);
            let phi_prime =
                map_derivative(|w| handle.evolve(s, t, DiscPoint::new(w)?).map(|p| p.value()), z, 1)?;
            let rhs = -phi_prime * field.eval(z.value(), s)?;
            Ok((lhs - rhs).norm())
        })?;
        witnesses.push(WitnessResidual { witness: format!("(s={s}, t={t}, z={arg})"), residual: sup });
    }
    let tol = derivative_tolerance(handle.settings.rel_tol);
    Ok(PropertyReport::new("transport-equation", tol, witnesses))
}

/// Two time intervals (a, b), (c, d) whose evolution maps are composed in
/// both orders.
pub type IntervalPair = ((f64, f64), (f64, f64));

/// |phi_I o phi_J - phi_J o phi_I| over the grid for interval pairs I, J.
pub fn commuting_report(
    handle: &EvolutionFamilyHandle,
    pairs: &[IntervalPair],
    grid: &[DiscPoint],
) -> Result<PropertyReport> {
    if pairs.is_empty() {
        return Err(Error::TooFewEntries { what: "interval pairs", min: 1, got: 0 });
    }
    let mut witnesses = Vec::new();
    for &((a, b), (c, d)) in pairs {
        let (sup, arg) = sup_over_grid(grid, |z| {
            let ij = handle.evolve(a, b, handle.evolve(c, d, z)?)?;
            let ji = handle.evolve(c, d, handle.evolve(a, b, z)?)?;
            Ok((ij.value() - ji.value()).norm())
        })?;
        witnesses
            .push(WitnessResidual { witness: format!("(I=[{a},{b}], J=[{c},{d}], z={arg})"), residual: sup });
    }
    let tol = composition_tolerance(handle.settings.rel_tol);
    Ok(PropertyReport::new("commuting-pairs", tol, witnesses))
}

/// Reversed composition order: |phi_{s,u} o phi_{u,t} - phi_{s,t}| for each
/// triple s <= u <= t. Vanishing for all triples characterizes families
/// whose members all commute.
pub fn reversing_report(
    handle: &EvolutionFamilyHandle,
    triples: &[(f64, f64, f64)],
    grid: &[DiscPoint],
) -> Result<PropertyReport> {
    if triples.is_empty() {
        return Err(Error::TooFewEntries { what: "reversing triples", min: 1, got: 0 });
    }
    let mut witnesses = Vec::new();
    for &(s, u, t) in triples {
        if !(s <= u && u <= t) {
            return Err(Error::TimeOrder { s, t: u.min(t) });
        }
        let (sup, arg) = sup_over_grid(grid, |z| {
            let reversed = handle.evolve(s, u, handle.evolve(u, t, z)?)?;
            let direct = handle.evolve(s, t, z)?;
            Ok((reversed.value() - direct.value()).norm())
        })?;
        witnesses.push(WitnessResidual { witness: format!("(s={s}, u={u}, t={t}, z={arg})"), residual: sup });
    }
    let tol = composition_tolerance(handle.settings.rel_tol);
    Ok(PropertyReport::new("reversing-composition", tol, witnesses))
}

/// Conjugation identity G(phi_{s,t}(z), u) = phi_{s,t}'(z) G(z, u) for the
/// sampled times u; it holds for all u exactly when the family commutes
/// with the field's frozen flows.
pub fn reversing_field_identity(
    handle: &EvolutionFamilyHandle,
    s: f64,
    t: f64,
    u_samples: &[f64],
    grid: &[DiscPoint],
) -> Result<PropertyReport> {
    let field = handle
        .field()
        .ok_or_else(|| Error::invalid("the field identity needs a family backed by a field"))?;
    if u_samples.is_empty() {
        return Err(Error::TooFewEntries { what: "u samples", min: 1, got: 0 });
    }
    if t < s {
        return Err(Error::TimeOrder { s, t });
    }
    let mut witnesses = Vec::new();
    for &u in u_samples {
        let (sup, arg) = sup_over_grid(grid, |z| {
            let phi = handle.evolve(s, t, z)?;
            let phi_prime =
                map_derivative(|w| handle.evolve(s, t, DiscPoint::new(w)?).map(|p| p.value()), z, 1)?;
            let lhs = field.eval(phi.value(), u)?;
            let rhs = phi_prime * field.eval(z.value(), u)?;
            Ok((lhs - rhs).norm())
        })?;
        witnesses.push(WitnessResidual { witness: format!("(s={s}, t={t}, u={u}, z={arg})"), residual: sup });
    }
    let tol = derivative_tolerance(handle.settings.rel_tol);
    Ok(PropertyReport::new("field-conjugation", tol, witnesses))
}

/// n-fold composition of the short-time map phi_{t,t+r/n} applied to z: the
/// Euler-product approximation of the frozen-time semigroup at parameter r.
pub fn product_formula_map(
    handle: &EvolutionFamilyHandle,
    t: f64,
    r: f64,
    n: usize,
    z: DiscPoint,
) -> Result<DiscPoint> {
    if n == 0 {
        return Err(Error::TooFewEntries { what: "product formula factors", min: 1, got: 0 });
    }
    if r < 0.0 {
        return Err(Error::TimeOrder { s: t, t: t + r });
    }
    let h = r / n as f64;
    let mut w = z;
    for _ in 0..n {
        w = handle.evolve(t, t + h, w)?;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::default_grid;
    use crate::herglotz::{make_field, FieldSpec, OrderD, PieceSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dp(re: f64, im: f64) -> DiscPoint {
        DiscPoint::new(c(re, im)).unwrap()
    }

    fn golden_field() -> HerglotzField {
        make_field(
            &FieldSpec::Splitting { g: TimeFactor::parse("1+i*t").unwrap(), base: "(z-1)^2".into() },
            OrderD::Infinite,
            4.0,
        )
        .unwrap()
    }

    fn piecewise_field() -> HerglotzField {
        make_field(
            &FieldSpec::Piecewise {
                pieces: vec![
                    PieceSpec { start: 0.0, base: "-z".into() },
                    PieceSpec { start: 1.0, base: "-z*(2+z)".into() },
                ],
            },
            OrderD::Infinite,
            4.0,
        )
        .unwrap()
    }

    #[test]
    fn autonomous_linear_flow_is_exponential() {
        let f = make_field(&FieldSpec::Autonomous { base: "-z".into() }, OrderD::Infinite, 4.0).unwrap();
        let handle = EvolutionFamilyHandle::from_field(f);
        let z = dp(0.3, 0.4);
        for (s, t) in [(0.0, 1.0), (0.5, 2.5), (1.0, 1.0)] {
            let got = handle.evolve(s, t, z).unwrap().value();
            let want = z.value() * (-(t - s)).exp();
            assert!((got - want).norm() < 1e-11, "s={s}, t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn golden_transport_value() {
        // for G(z,t) = (1+it)(z-1)^2: phi_{0,1}(0) = (lam)/(1+lam) with
        // lam = 1 + i/2, i.e. (2.25 + 0.5i)/4.25
        let handle = EvolutionFamilyHandle::from_field(golden_field());
        let got = handle.evolve(0.0, 1.0, dp(0.0, 0.0)).unwrap().value();
        let want = c(2.25, 0.5) / 4.25;
        assert!((got - want).norm() < 1e-10, "got {got}, want {want}");
    }

    #[test]
    fn piecewise_flow_crosses_breakpoint() {
        // -z for one unit, then -z(2+z): phi_{0,2}(z) = psi_1(z/e) where
        // psi_1 is the unit-time flow of -z(2+z): h(z) = 2z/(z+2),
        // psi_t(z) = h^{-1}(e^{-2t} h(z))
        let handle = EvolutionFamilyHandle::from_field(piecewise_field());
        let z = c(0.5, 0.2);
        let w1 = z / 1.0f64.exp();
        let hw = 2.0 * w1 / (w1 + 2.0);
        let target = (-2.0f64).exp() * hw;
        let want = 2.0 * target / (2.0 - target);
        let got = handle.evolve(0.0, 2.0, DiscPoint::new(z).unwrap()).unwrap().value();
        assert!((got - want).norm() < 1e-10, "got {got}, want {want}");
    }

    #[test]
    fn axioms_hold_for_golden_field() {
        let handle = EvolutionFamilyHandle::from_field(golden_field());
        let grid = default_grid();
        let triples = [(0.0, 0.5, 1.0), (0.25, 1.0, 2.0), (0.0, 0.0, 2.0)];
        let report = ef_axiom_report(&handle, &triples, &grid).unwrap();
        assert!(report.verdict, "{report}");
    }

    #[test]
    fn axioms_hold_across_piecewise_breakpoints() {
        let handle = EvolutionFamilyHandle::from_field(piecewise_field());
        let grid = default_grid();
        let triples = [(0.5, 1.0, 1.5), (0.0, 1.0, 2.0), (0.9, 1.1, 3.0)];
        let report = ef_axiom_report(&handle, &triples, &grid).unwrap();
        assert!(report.verdict, "{report}");
    }

    #[test]
    fn transport_equation_residual_small() {
        let handle = EvolutionFamilyHandle::from_field(golden_field());
        let grid = crate::grid::radius08_grid();
        let report = transport_residual(&handle, 1.5, &[0.25, 0.75, 1.2], &grid).unwrap();
        assert!(report.verdict, "{report}");
    }

    #[test]
    fn transport_rejects_breakpoint_straddle() {
        let handle = EvolutionFamilyHandle::from_field(piecewise_field());
        let grid = default_grid();
        let r = transport_residual(&handle, 2.0, &[1.0 + 0.5 * TRANSPORT_DELTA], &grid);
        assert!(matches!(r, Err(Error::OnBreakpoint { .. })));
    }

    #[test]
    fn splitting_families_commute_and_reverse() {
        let handle = EvolutionFamilyHandle::from_field(golden_field());
        let grid = default_grid();
        let pairs = [((0.0, 0.5), (0.5, 1.0)), ((0.0, 1.0), (1.0, 2.0)), ((0.25, 0.75), (1.5, 2.0))];
        let com = commuting_report(&handle, &pairs, &grid).unwrap();
        assert!(com.verdict, "{com}");
        let rev = reversing_report(&handle, &[(0.0, 0.5, 1.0), (0.5, 1.0, 2.0)], &grid).unwrap();
        assert!(rev.verdict, "{rev}");
    }

    #[test]
    fn piecewise_family_fails_commuting_and_reversing() {
        let handle = EvolutionFamilyHandle::from_field(piecewise_field());
        let grid = default_grid();
        let com = commuting_report(&handle, &[((0.0, 0.5), (1.0, 1.5))], &grid).unwrap();
        assert!(!com.verdict);
        assert!(com.sup_residual > 1e-3, "sup = {:.3e}", com.sup_residual);
        let rev = reversing_report(&handle, &[(0.0, 1.0, 1.5)], &grid).unwrap();
        assert!(!rev.verdict);
        assert!(rev.sup_residual > 1e-3, "sup = {:.3e}", rev.sup_residual);
    }

    #[test]
    fn conjugation_identity_for_splitting_field() {
        let handle = EvolutionFamilyHandle::from_field(golden_field());
        let grid = crate::grid::radius08_grid();
        let report = reversing_field_identity(&handle, 0.0, 1.0, &[0.0, 0.7, 1.5], &grid).unwrap();
        assert!(report.verdict, "{report}");
    }

    #[test]
    fn product_formula_first_order_rate() {
        // for a genuinely time-dependent field the n-fold short-map product
        // deviates from the frozen flow at rate O(1/n)
        let handle = EvolutionFamilyHandle::from_field(golden_field());
        let field = handle.field().unwrap();
        let z = dp(0.3, -0.2);
        let (t, r) = (0.5, 1.0);
        let frozen = frozen_semigroup(field, t, r, z, handle.settings()).unwrap().value();
        let mut deviations = Vec::new();
        for n in [4usize, 8, 16, 32] {
            let product = product_formula_map(&handle, t, r, n, z).unwrap().value();
            deviations.push((product - frozen).norm());
        }
        for w in deviations.windows(2) {
            let ratio = w[1] / w[0];
            assert!((ratio - 0.5).abs() < 0.2, "halving ratio {ratio}, deviations {deviations:?}");
        }
    }

    #[test]
    fn product_formula_exact_for_autonomous_fields() {
        let f =
            make_field(&FieldSpec::Autonomous { base: "-z*(2+z)".into() }, OrderD::Infinite, 4.0).unwrap();
        let handle = EvolutionFamilyHandle::from_field(f);
        let z = dp(0.4, 0.1);
        let frozen =
            frozen_semigroup(handle.field().unwrap(), 0.0, 1.0, z, handle.settings()).unwrap().value();
        let product = product_formula_map(&handle, 0.0, 1.0, 8, z).unwrap().value();
        assert!((product - frozen).norm() < 1e-9, "{product} vs {frozen}");
    }

    #[test]
    fn time_changed_semigroup_matches_ode_flow() {
        // G(z,t) = (1+t)(z-1)^2 equals the time change lambda(t) = t + t^2/2
        // of the autonomous flow of (z-1)^2
        let ode = EvolutionFamilyHandle::from_field(
            make_field(
                &FieldSpec::Splitting { g: TimeFactor::parse("1+t").unwrap(), base: "(z-1)^2".into() },
                OrderD::Infinite,
                3.0,
            )
            .unwrap(),
        );
        let spec = crate::generators::bp_decompose(
            &crate::expr::parse_expr("(z-1)^2", crate::expr::Arity::One).unwrap(),
        )
        .unwrap();
        let lam = TimeFactor::parse("t+t^2/2").unwrap();
        let changed = EvolutionFamilyHandle::from_semigroup(&spec, lam, 3.0).unwrap();
        for z in [dp(0.0, 0.0), dp(0.5, 0.3), dp(-0.6, -0.2)] {
            for (s, t) in [(0.0, 1.0), (0.5, 2.0), (1.0, 3.0)] {
                let a = ode.evolve(s, t, z).unwrap().value();
                let b = changed.evolve(s, t, z).unwrap().value();
                assert!((a - b).norm() < 1e-7, "s={s}, t={t}, z={}: {a} vs {b}", z.value());
            }
        }
    }

    #[test]
    fn from_semigroup_rejects_bad_time_changes() {
        let spec = crate::generators::bp_decompose(
            &crate::expr::parse_expr("(z-1)^2", crate::expr::Arity::One).unwrap(),
        )
        .unwrap();
        let dec = TimeFactor::parse("-t").unwrap();
        assert!(matches!(
            EvolutionFamilyHandle::from_semigroup(&spec, dec, 2.0),
            Err(Error::DecreasingTimeFactor { .. })
        ));
        let complex = TimeFactor::parse("i*t").unwrap();
        assert!(EvolutionFamilyHandle::from_semigroup(&spec, complex, 2.0).is_err());
    }

    #[test]
    fn trajectory_rows_are_ordered_and_consistent() {
        let handle = EvolutionFamilyHandle::from_field(golden_field());
        let starts = [dp(0.0, 0.0), dp(0.5, 0.0)];
        let times = [0.5, 1.0];
        let tr = trajectory(&handle, 0.0, &times, &starts).unwrap();
        assert_eq!(tr.rows.len(), 4);
        assert_eq!(tr.rows[0].t, 0.5);
        assert_eq!(tr.rows[1].t, 1.0);
        assert!((tr.rows[1].phi - handle.evolve(0.0, 1.0, starts[0]).unwrap().value()).norm() == 0.0);
    }

    #[test]
    fn evolve_rejects_reversed_times() {
        let handle = EvolutionFamilyHandle::from_field(golden_field());
        assert!(matches!(handle.evolve(1.0, 0.5, dp(0.0, 0.0)), Err(Error::TimeOrder { .. })));
    }
}
