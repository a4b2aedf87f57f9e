//! Herglotz vector fields: time-dependent infinitesimal generators
//! `G(z, t)`, measurable in `t`, generator-valued for (almost) every fixed
//! time.
//!
//! The central question this module answers is whether a field *splits* as
//! `G(z, t) = g(t) G(z)`: by the commuting-fields criterion that happens
//! exactly when the frozen-time fields pairwise commute, i.e. the bracket
//! `[X, Y] = Y X' - X Y'` of any two time slices vanishes identically.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{integrate_map, map_derivative, Path};
use crate::disc::{DiscPoint, FixedPoint};
use crate::error::{Error, Result};
use crate::expr::{parse_expr, Arity, Expr, HoloFunction};
use crate::generators::{bp_decompose, GeneratorSpec};
use crate::grid::{circle_grid, default_grid};
use crate::report::{PropertyReport, WitnessResidual};

/// Normalized-bracket threshold below which a field is declared splitting.
pub const SPLITTING_TOL: f64 = 1e-7;

/// Certification samples per unit of time for fields with genuine time
/// dependence.
const CERTIFY_SAMPLES_PER_UNIT: usize = 16;

/// The Dini/Orlicz-type regularity order of a field, metadata carried along
/// from the construction (d in [1, infinity]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderD {
    Finite(f64),
    Infinite,
}

impl Serialize for OrderD {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            OrderD::Finite(d) => s.serialize_f64(*d),
            OrderD::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for OrderD {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(x) if x >= 1.0 => Ok(OrderD::Finite(x)),
            Raw::Number(x) => Err(serde::de::Error::custom(format!("order must be >= 1, got {x}"))),
            Raw::Text(s) if s == "inf" => Ok(OrderD::Infinite),
            Raw::Text(s) => {
                Err(serde::de::Error::custom(format!("order must be a number or \"inf\", got {s:?}")))
            }
        }
    }
}

/// A scalar function of time: a closed-form expression in `t`, piecewise
/// linear interpolation of samples, or right-continuous steps.
#[derive(Debug, Clone)]
pub enum TimeFactor {
    Expr(HoloFunction),
    Samples(Vec<(f64, Complex64)>),
    Steps(Vec<(f64, Complex64)>),
}

impl TimeFactor {
    /// Parse a closed-form factor; the expression may use `t` only.
    pub fn parse(text: &str) -> Result<Self> {
        let f = parse_expr(text, Arity::Two)?;
        if f.ast().uses_z() {
            return Err(Error::invalid("a time factor must not depend on z"));
        }
        Ok(TimeFactor::Expr(f))
    }

    pub fn constant(value: Complex64) -> Self {
        TimeFactor::Steps(vec![(0.0, value)])
    }

    /// Piecewise-linear interpolation through `(t, value)` samples.
    pub fn from_samples(mut samples: Vec<(f64, Complex64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooFewEntries { what: "time factor samples", min: 2, got: samples.len() });
        }
        samples.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("sample times are finite"));
        if samples.windows(2).any(|w| w[1].0 - w[0].0 < 1e-12) {
            return Err(Error::invalid("time factor samples must have distinct times"));
        }
        Ok(TimeFactor::Samples(samples))
    }

    /// Right-continuous steps: value of the pair whose start is the last one
    /// <= t. The first start must be 0.
    pub fn from_steps(steps: Vec<(f64, Complex64)>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::TooFewEntries { what: "time factor steps", min: 1, got: 0 });
        }
        if steps[0].0 != 0.0 {
            return Err(Error::invalid("the first step must start at t = 0"));
        }
        if steps.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("step starts must be strictly increasing"));
        }
        Ok(TimeFactor::Steps(steps))
    }

    pub fn eval(&self, t: f64) -> Result<Complex64> {
        match self {
            TimeFactor::Expr(f) => f.eval2(Complex64::new(0.0, 0.0), t),
            TimeFactor::Samples(samples) => {
                let (t0, _) = samples[0];
                let (t1, _) = samples[samples.len() - 1];
                if t < t0 - 1e-12 || t > t1 + 1e-12 {
                    return Err(Error::invalid(format!("time {t} outside the sampled range [{t0}, {t1}]")));
                }
                let t = t.clamp(t0, t1);
                let idx = samples.partition_point(|(s, _)| *s <= t);
                if idx == samples.len() {
                    return Ok(samples[idx - 1].1);
                }
                let (a, va) = samples[idx.saturating_sub(1).min(samples.len() - 2)];
                let (b, vb) = samples[idx.max(1)];
                let u = if b > a { (t - a) / (b - a) } else { 0.0 };
                Ok(va + (vb - va) * u)
            }
            TimeFactor::Steps(steps) => {
                if t < 0.0 {
                    return Err(Error::invalid(format!("step factor is defined for t >= 0, got {t}")));
                }
                let idx = steps.partition_point(|(s, _)| *s <= t);
                Ok(steps[idx - 1].1)
            }
        }
    }

    /// Evaluation with the discontinuity side pinned by a window midpoint:
    /// step factors are constant on any breakpoint-free window, so they are
    /// read at the midpoint; continuous factors just evaluate at `t`.
    pub fn eval_pinned(&self, t: f64, window_mid: f64) -> Result<Complex64> {
        match self {
            TimeFactor::Steps(_) => self.eval(window_mid),
            _ => self.eval(t),
        }
    }

    /// Interior discontinuity/kink locations.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            TimeFactor::Expr(_) => Vec::new(),
            TimeFactor::Samples(samples) => samples[1..samples.len() - 1].iter().map(|(t, _)| *t).collect(),
            TimeFactor::Steps(steps) => steps[1..].iter().map(|(t, _)| *t).collect(),
        }
    }

    /// Integral over [0, upper] by adaptive panels split at breakpoints.
    pub fn integral(&self, upper: f64) -> Result<Complex64> {
        if upper == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if upper < 0.0 {
            return Err(Error::invalid(format!(
                "time integrals run over [0, T] with T >= 0, got T = {upper}"
            )));
        }
        let mut cuts: Vec<f64> = vec![0.0];
        for b in self.breakpoints() {
            if b > 0.0 && b < upper {
                cuts.push(b);
            }
        }
        cuts.push(upper);
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("cut points are finite"));
        let mut total = Complex64::new(0.0, 0.0);
        for pair in cuts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b - a < 1e-15 {
                continue;
            }
            let mid = 0.5 * (a + b);
            total += integrate_map(
                |u| self.eval_pinned(u.re, mid),
                &Path::segment(Complex64::new(a, 0.0), Complex64::new(b, 0.0)),
            )?;
        }
        Ok(total)
    }
}

impl Serialize for TimeFactor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        #[serde(tag = "kind", rename_all = "kebab-case")]
        enum Raw<'a> {
            Expr { expr: String },
            Samples { samples: &'a Vec<(f64, Complex64)> },
            Steps { steps: &'a Vec<(f64, Complex64)> },
        }
        match self {
            TimeFactor::Expr(f) => Raw::Expr { expr: f.source().to_string() }.serialize(s),
            TimeFactor::Samples(v) => Raw::Samples { samples: v }.serialize(s),
            TimeFactor::Steps(v) => Raw::Steps { steps: v }.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for TimeFactor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(tag = "kind", rename_all = "kebab-case")]
        enum Raw {
            Expr { expr: String },
            Samples { samples: Vec<(f64, Complex64)> },
            Steps { steps: Vec<(f64, Complex64)> },
        }
        match Raw::deserialize(d)? {
            Raw::Expr { expr } => TimeFactor::parse(&expr).map_err(serde::de::Error::custom),
            Raw::Samples { samples } => TimeFactor::from_samples(samples).map_err(serde::de::Error::custom),
            Raw::Steps { steps } => TimeFactor::from_steps(steps).map_err(serde::de::Error::custom),
        }
    }
}

/// Declarative description of a field, the shape used by configuration
/// files. [`make_field`] turns it into a certified [`HerglotzField`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldSpec {
    /// G(z, t) = G(z).
    Autonomous { base: String },
    /// G(z, t) = g(t) G(z).
    Splitting { g: TimeFactor, base: String },
    /// Right-open pieces [start_k, start_{k+1}), each an autonomous generator.
    Piecewise { pieces: Vec<PieceSpec> },
    /// An arbitrary expression in z and t.
    General { expr: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PieceSpec {
    pub start: f64,
    pub base: String,
}

#[derive(Debug, Clone)]
pub enum FieldKind {
    Autonomous { base: GeneratorSpec },
    Splitting { factor: TimeFactor, base: GeneratorSpec },
    Piecewise { pieces: Vec<(f64, GeneratorSpec)> },
    General { expr: HoloFunction },
}

/// A certified Herglotz vector field on [0, horizon].
#[derive(Debug, Clone)]
pub struct HerglotzField {
    kind: FieldKind,
    order: OrderD,
    breakpoints: Vec<f64>,
    horizon: f64,
}

impl HerglotzField {
    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn order(&self) -> OrderD {
        self.order
    }

    /// Interior times where the field may jump; the ODE integrator never
    /// steps across these.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// G(z, t) with right-limit semantics at breakpoints.
    pub fn eval(&self, z: Complex64, t: f64) -> Result<Complex64> {
        self.eval_pinned(z, t, t)
    }

    /// Like [`Self::eval`], but with discontinuities resolved by the
    /// midpoint of the breakpoint-free window the caller is working in, so
    /// a stage evaluation landing exactly on the window's right edge reads
    /// the piece the window belongs to.
    pub fn eval_pinned(&self, z: Complex64, t: f64, window_mid: f64) -> Result<Complex64> {
        if t < 0.0 {
            return Err(Error::invalid(format!("fields are defined for t >= 0, got t = {t}")));
        }
        match &self.kind {
            FieldKind::Autonomous { base } => base.eval(z),
            FieldKind::Splitting { factor, base } => Ok(factor.eval_pinned(t, window_mid)? * base.eval(z)?),
            FieldKind::Piecewise { pieces } => {
                let idx = pieces.partition_point(|(start, _)| *start <= window_mid);
                pieces[idx.saturating_sub(1)].1.eval(z)
            }
            FieldKind::General { expr } => expr.eval2(z, t),
        }
    }

    /// The time slice G(., t) as a closed-form function of z.
    pub fn frozen(&self, t: f64) -> Result<HoloFunction> {
        match &self.kind {
            FieldKind::Autonomous { base } => Ok(base.field().clone()),
            FieldKind::Splitting { factor, base } => {
                let g_t = factor.eval(t)?;
                HoloFunction::from_ast(Expr::complex_const(g_t) * base.field().ast().clone(), Arity::One)
            }
            FieldKind::Piecewise { pieces } => {
                let idx = pieces.partition_point(|(start, _)| *start <= t);
                Ok(pieces[idx.saturating_sub(1)].1.field().clone())
            }
            FieldKind::General { expr } => HoloFunction::from_ast(substitute_t(expr.ast(), t), Arity::One),
        }
    }

    /// Representative times for time-dependent certification and property
    /// sampling: 16 per unit interval, nudged off breakpoints.
    pub fn certification_times(&self) -> Vec<f64> {
        match &self.kind {
            FieldKind::Autonomous { .. } => vec![0.0],
            _ => {
                let n = ((self.horizon * CERTIFY_SAMPLES_PER_UNIT as f64).ceil() as usize).max(2);
                let mut out = Vec::with_capacity(n + 1);
                for k in 0..=n {
                    let mut t = self.horizon * k as f64 / n as f64;
                    if self.breakpoints.iter().any(|b| (b - t).abs() < 1e-9) {
                        t += 1e-6;
                    }
                    out.push(t.min(self.horizon));
                }
                out
            }
        }
    }
}

fn substitute_t(e: &Expr, t: f64) -> Expr {
    match e {
        Expr::T => Expr::Num(t),
        Expr::Num(_) | Expr::I | Expr::Z => e.clone(),
        Expr::Neg(a) => -substitute_t(a, t),
        Expr::Add(a, b) => substitute_t(a, t) + substitute_t(b, t),
        Expr::Sub(a, b) => substitute_t(a, t) - substitute_t(b, t),
        Expr::Mul(a, b) => substitute_t(a, t) * substitute_t(b, t),
        Expr::Div(a, b) => substitute_t(a, t) / substitute_t(b, t),
        Expr::Pow(a, b) => substitute_t(a, t).pow(substitute_t(b, t)),
        Expr::Call(func, a) => Expr::call(*func, substitute_t(a, t)),
    }
}

/// Build a field from its description and certify that every sampled time
/// slice is an infinitesimal generator (16 samples per unit of time for
/// time-dependent kinds). Certification failures report the offending time.
pub fn make_field(spec: &FieldSpec, order: OrderD, horizon: f64) -> Result<HerglotzField> {
    if horizon.is_nan() || horizon <= 0.0 {
        return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
    }
    if let OrderD::Finite(d) = order {
        if d < 1.0 {
            return Err(Error::invalid(format!("order must be >= 1, got {d}")));
        }
    }
    let kind = match spec {
        FieldSpec::Autonomous { base } => {
            let base = bp_decompose(&parse_expr(base, Arity::One)?)?;
            FieldKind::Autonomous { base }
        }
        FieldSpec::Splitting { g, base } => {
            let base = bp_decompose(&parse_expr(base, Arity::One)?)?;
            FieldKind::Splitting { factor: g.clone(), base }
        }
        FieldSpec::Piecewise { pieces } => {
            if pieces.is_empty() {
                return Err(Error::TooFewEntries { what: "field pieces", min: 1, got: 0 });
            }
            if pieces[0].start != 0.0 {
                return Err(Error::invalid("the first piece must start at t = 0"));
            }
            if pieces.windows(2).any(|w| w[1].start <= w[0].start) {
                return Err(Error::invalid("piece starts must be strictly increasing"));
            }
            let mut done = Vec::with_capacity(pieces.len());
            for piece in pieces {
                let spec = bp_decompose(&parse_expr(&piece.base, Arity::One)?)
                    .map_err(|e| at_time(e, piece.start))?;
                done.push((piece.start, spec));
            }
            FieldKind::Piecewise { pieces: done }
        }
        FieldSpec::General { expr } => FieldKind::General { expr: parse_expr(expr, Arity::Two)? },
    };
    let breakpoints = match &kind {
        FieldKind::Piecewise { pieces } => pieces[1..].iter().map(|(s, _)| *s).collect(),
        FieldKind::Splitting { factor, .. } => factor.breakpoints(),
        _ => Vec::new(),
    };
    let field = HerglotzField { kind, order, breakpoints, horizon };

    // time-slice certification
    match &field.kind {
        FieldKind::Autonomous { .. } | FieldKind::Piecewise { .. } => {} // pieces certified above
        FieldKind::Splitting { factor, base } => {
            for t in field.certification_times() {
                let g_t = factor.eval(t)?;
                if g_t.norm() < 1e-14 {
                    continue; // the zero field is a trivial generator
                }
                certify_scaled(base, g_t, &field, t)?;
            }
        }
        FieldKind::General { .. } => {
            for t in field.certification_times() {
                let slice = field.frozen(t)?;
                let scale = slice_scale(&slice)?;
                if scale < 1e-14 {
                    continue;
                }
                bp_decompose(&slice).map_err(|e| at_time(e, t))?;
            }
        }
    }
    Ok(field)
}

fn slice_scale(slice: &HoloFunction) -> Result<f64> {
    let mut m = 0.0f64;
    for p in default_grid() {
        m = m.max(slice.eval1(p.value())?.norm());
    }
    Ok(m)
}

/// Fast certification of g(t) * base: positivity of g(t) p(z) on the grids,
/// falling back to a full decomposition when the scaled factor leaves the
/// right half-plane (the base may generate a group, making -base a
/// generator around the opposite fixed point).
fn certify_scaled(base: &GeneratorSpec, g_t: Complex64, field: &HerglotzField, t: f64) -> Result<()> {
    let mut ok = true;
    let mut witness = (Complex64::new(0.0, 0.0), 0.0);
    let tau = base.dw().value();
    let interior = base.dw().is_interior();
    let mut points = default_grid();
    points.extend(circle_grid(0.999, 64));
    for point in points {
        let z = point.value();
        if interior && (z - tau).norm() < 1e-6 {
            continue;
        }
        let value = g_t * base.bp_factor().eval1(z)?;
        if value.re < -crate::generators::BP_SLACK {
            ok = false;
            witness = (z, value.re);
            break;
        }
    }
    if ok {
        return Ok(());
    }
    let slice = field.frozen(t)?;
    match bp_decompose(&slice) {
        Ok(_) => Ok(()),
        Err(Error::NotAGenerator { z, re_p, .. }) => Err(Error::NotAGenerator { z, t, re_p }),
        Err(Error::NoDenjoyWolff) => Err(Error::NotAGenerator { z: witness.0, t, re_p: witness.1 }),
        Err(e) => Err(at_time(e, t)),
    }
}

fn at_time(e: Error, t: f64) -> Error {
    match e {
        Error::NotAGenerator { z, re_p, .. } => Error::NotAGenerator { z, t, re_p },
        other => other,
    }
}

/// field_eval with the documented right-limit convention at breakpoints.
pub fn field_eval(field: &HerglotzField, z: DiscPoint, t: f64) -> Result<Complex64> {
    field.eval(z.value(), t)
}

/// The bracket [X, Y](z) = Y(z) X'(z) - X(z) Y'(z) of two autonomous fields,
/// derivatives by the Cauchy stencil.
pub fn lie_bracket(x: &HoloFunction, y: &HoloFunction, z: DiscPoint) -> Result<Complex64> {
    let xp = map_derivative(|w| x.eval1(w), z, 1)?;
    let yp = map_derivative(|w| y.eval1(w), z, 1)?;
    Ok(y.eval1(z.value())? * xp - x.eval1(z.value())? * yp)
}

fn bracket_of_slices(field: &HerglotzField, t1: f64, t2: f64, z: DiscPoint) -> Result<Complex64> {
    let x = |w: Complex64| field.eval(w, t1);
    let y = |w: Complex64| field.eval(w, t2);
    let xp = map_derivative(x, z, 1)?;
    let yp = map_derivative(y, z, 1)?;
    Ok(y(z.value())? * xp - x(z.value())? * yp)
}

/// Splitting test: sup over time pairs and the grid of |[G(., t_i), G(., t_j)]|,
/// normalized by sup |G| over the same grid and times so the verdict is
/// invariant under unimodular rescaling of the field.
pub fn splitting_residual(
    field: &HerglotzField,
    times: &[f64],
    grid: &[DiscPoint],
) -> Result<PropertyReport> {
    if times.len() < 2 {
        return Err(Error::TooFewEntries { what: "splitting sample times", min: 2, got: times.len() });
    }
    let mut scale = 0.0f64;
    for &t in times {
        for z in grid {
            scale = scale.max(field.eval(z.value(), t)?.norm());
        }
    }
    if scale < 1e-14 {
        return Ok(PropertyReport::new("splitting-bracket", SPLITTING_TOL, vec![]));
    }
    let mut witnesses = Vec::new();
    for (i, &t1) in times.iter().enumerate() {
        for &t2 in &times[i + 1..] {
            let mut sup = 0.0f64;
            let mut arg = Complex64::new(0.0, 0.0);
            for z in grid {
                let b = bracket_of_slices(field, t1, t2, *z)?.norm() / scale;
                if b > sup {
                    sup = b;
                    arg = z.value();
                }
            }
            witnesses.push(WitnessResidual { witness: format!("(t={t1}, s={t2}, z={arg})"), residual: sup });
        }
    }
    Ok(PropertyReport::new("splitting-bracket", SPLITTING_TOL, witnesses))
}

/// Recovered scalar factor of a splitting field.
#[derive(Debug, Clone, Serialize)]
pub struct RecoveredFactor {
    pub samples: Vec<(f64, Complex64)>,
    /// Largest across-grid deviation of G(z, t) / G_base(z) from its median,
    /// relative to the median's size.
    pub max_dispersion: f64,
}

const RECOVER_DISPERSION_LIMIT: f64 = 1e-4;

/// Recover g(t) = G(z, t) / G_base(z) as the per-time median of grid ratios,
/// with the across-grid dispersion as a certificate. Errors when any time's
/// dispersion exceeds 1e-4 (the field does not split over this base).
pub fn recover_g(
    field: &HerglotzField,
    base: &GeneratorSpec,
    times: &[f64],
    grid: &[DiscPoint],
) -> Result<RecoveredFactor> {
    if times.is_empty() {
        return Err(Error::TooFewEntries { what: "recover_g times", min: 1, got: 0 });
    }
    let mut base_scale = 0.0f64;
    for z in grid {
        base_scale = base_scale.max(base.eval(z.value())?.norm());
    }
    if base_scale < 1e-14 {
        return Err(Error::ZeroField);
    }
    let mut samples = Vec::with_capacity(times.len());
    let mut max_dispersion = 0.0f64;
    for &t in times {
        let mut ratios = Vec::with_capacity(grid.len());
        for z in grid {
            let b = base.eval(z.value())?;
            if b.norm() < 1e-12 * base_scale {
                continue; // isolated near-zero of the base; the median ignores it
            }
            ratios.push(field.eval(z.value(), t)? / b);
        }
        if ratios.is_empty() {
            return Err(Error::ZeroField);
        }
        let median = component_median(&ratios);
        let dispersion =
            ratios.iter().map(|r| (r - median).norm()).fold(0.0f64, f64::max) / median.norm().max(1.0);
        if dispersion > RECOVER_DISPERSION_LIMIT {
            return Err(Error::NotSplitting { t, dispersion });
        }
        max_dispersion = max_dispersion.max(dispersion);
        samples.push((t, median));
    }
    Ok(RecoveredFactor { samples, max_dispersion })
}

fn component_median(values: &[Complex64]) -> Complex64 {
    let mid = |mut xs: Vec<f64>| -> f64 {
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let n = xs.len();
        if n % 2 == 1 {
            xs[n / 2]
        } else {
            0.5 * (xs[n / 2 - 1] + xs[n / 2])
        }
    };
    Complex64::new(mid(values.iter().map(|v| v.re).collect()), mid(values.iter().map(|v| v.im).collect()))
}

/// Berkson-Porta data of one time slice.
#[derive(Debug, Clone)]
pub struct BPDataSample {
    pub t: f64,
    pub tau: FixedPoint,
    pub p: HoloFunction,
    pub spectral: Complex64,
}

/// Time-sliced Berkson-Porta data: for each requested time, certify the
/// slice and report its Denjoy-Wolff point, factor, and spectral value.
/// For a splitting field the points tau(t) coincide and p(., t) are scalar
/// multiples of one another.
pub fn bp_data_in_time(field: &HerglotzField, times: &[f64]) -> Result<Vec<BPDataSample>> {
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let slice = field.frozen(t)?;
        let spec = bp_decompose(&slice).map_err(|e| at_time(e, t))?;
        out.push(BPDataSample { t, tau: spec.dw(), p: spec.bp_factor().clone(), spectral: spec.spectral() });
    }
    Ok(out)
}

/// sup of |G(z, t)| over the circle of the given radius (the disc sup, by
/// the maximum principle) and 256 time samples in [0, t_max]. Finiteness of
/// this bound on every compact set is the Herglotz regularity axiom.
pub fn herglotz_bound_check(field: &HerglotzField, radius: f64, t_max: f64) -> Result<f64> {
    if radius.is_nan() || radius <= 0.0 || radius >= 1.0 {
        return Err(Error::invalid(format!("radius must lie in (0, 1), got {radius}")));
    }
    if t_max.is_nan() || t_max < 0.0 {
        return Err(Error::invalid(format!("t_max must be nonnegative, got {t_max}")));
    }
    let circle = circle_grid(radius, 128);
    let mut sup = 0.0f64;
    for k in 0..256 {
        let t = if t_max == 0.0 { 0.0 } else { t_max * k as f64 / 255.0 };
        for z in &circle {
            sup = sup.max(field.eval(z.value(), t)?.norm());
        }
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn golden_splitting() -> HerglotzField {
        make_field(
            &FieldSpec::Splitting { g: TimeFactor::parse("1+i*t").unwrap(), base: "(z-1)^2".into() },
            OrderD::Infinite,
            4.0,
        )
        .unwrap()
    }

    fn piecewise_demo() -> HerglotzField {
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
    fn field_eval_golden() {
        let f = golden_splitting();
        let v = f.eval(c(0.0, 0.0), 1.0).unwrap();
        assert!((v - c(1.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn piecewise_right_limit_at_breakpoint() {
        let f = piecewise_demo();
        let z = c(0.5, 0.0);
        assert!((f.eval(z, 0.999).unwrap() - c(-0.5, 0.0)).norm() < 1e-14);
        // right limit at t = 1: already the second piece
        assert!((f.eval(z, 1.0).unwrap() - c(-1.25, 0.0)).norm() < 1e-14);
        assert_eq!(f.breakpoints(), &[1.0]);
        // pinning by a window left of the breakpoint reads the first piece
        assert!((f.eval_pinned(z, 1.0, 0.5).unwrap() - c(-0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn certification_rejects_wrong_sign() {
        // -(z-1)^2 is not a generator at any time
        let r = make_field(&FieldSpec::Autonomous { base: "-(z-1)^2".into() }, OrderD::Infinite, 1.0);
        assert!(r.is_err());
        // the factor t-1 makes the slice at t = 0 the non-generator -(z-1)^2
        let r = make_field(
            &FieldSpec::Splitting { g: TimeFactor::parse("t-1").unwrap(), base: "(z-1)^2".into() },
            OrderD::Infinite,
            2.0,
        );
        assert!(matches!(r, Err(Error::NotAGenerator { .. })), "{r:?}");
    }

    #[test]
    fn group_base_allows_sign_changing_factor() {
        // cos(t) flips sign, but 1-z^2 generates a group, so every slice is
        // still a generator
        let r = make_field(
            &FieldSpec::Splitting { g: TimeFactor::parse("cos(t)").unwrap(), base: "1-z^2".into() },
            OrderD::Infinite,
            4.0,
        );
        assert!(r.is_ok(), "{r:?}");
    }

    #[test]
    fn bracket_of_the_two_pieces() {
        // X = -z, Y = -z(2+z): [X, Y] = -z^2
        let x = parse_expr("-z", Arity::One).unwrap();
        let y = parse_expr("-z*(2+z)", Arity::One).unwrap();
        let z = DiscPoint::new(c(0.5, 0.0)).unwrap();
        let b = lie_bracket(&x, &y, z).unwrap();
        assert!((b - c(-0.25, 0.0)).norm() < 1e-11, "got {b}");
    }

    #[test]
    fn splitting_residual_verdicts() {
        let grid = default_grid();
        let f = golden_splitting();
        let report = splitting_residual(&f, &[0.0, 0.5, 1.0, 2.0], &grid).unwrap();
        assert!(report.verdict, "sup = {:.3e}", report.sup_residual);
        assert!(report.sup_residual <= 1e-9);

        let p = piecewise_demo();
        let report = splitting_residual(&p, &[0.5, 1.5], &grid).unwrap();
        assert!(!report.verdict);
        assert!(report.sup_residual >= 0.1, "sup = {:.3e}", report.sup_residual);
    }

    #[test]
    fn splitting_residual_is_unimodular_invariant() {
        let grid = default_grid();
        let base = piecewise_demo();
        let r1 = splitting_residual(&base, &[0.5, 1.5], &grid).unwrap();
        // same field times exp(i*pi/3), built by scaling both pieces
        let phase = "(0.5+0.8660254037844387*i)";
        let rotated = make_field(
            &FieldSpec::Piecewise {
                pieces: vec![
                    PieceSpec { start: 0.0, base: format!("{phase}*(-z)") },
                    PieceSpec { start: 1.0, base: format!("{phase}*(-z*(2+z))") },
                ],
            },
            OrderD::Infinite,
            4.0,
        );
        // a unimodular multiple of a generator is generally NOT a generator;
        // build it unchecked through the general kind instead
        drop(rotated);
        let rotated = HerglotzField {
            kind: FieldKind::General {
                expr: parse_expr(&format!("{phase}*(-z)*(1-t+(t*(2+z)))"), Arity::Two).unwrap(),
            },
            order: OrderD::Infinite,
            breakpoints: vec![],
            horizon: 4.0,
        };
        // evaluate the rotated field only at t = 0 and t = 1, where it equals
        // phase * (-z) and phase * (-z(2+z))
        let r2 = splitting_residual(&rotated, &[0.0, 1.0], &grid).unwrap();
        assert!((r1.sup_residual - r2.sup_residual).abs() <= 1e-9 * (1.0 + r1.sup_residual));
        assert_eq!(r1.verdict, r2.verdict);
    }

    #[test]
    fn recover_g_on_golden_field() {
        let f = golden_splitting();
        let base = match f.kind() {
            FieldKind::Splitting { base, .. } => base.clone(),
            _ => unreachable!(),
        };
        let grid = default_grid();
        let times = [0.0, 0.5, 1.0, 2.0];
        let rec = recover_g(&f, &base, &times, &grid).unwrap();
        assert!(rec.max_dispersion <= 1e-9, "dispersion {:.3e}", rec.max_dispersion);
        for (t, g) in rec.samples {
            assert!((g - c(1.0, t)).norm() < 1e-9);
        }
    }

    #[test]
    fn recover_g_rejects_non_splitting() {
        let p = piecewise_demo();
        let base = match p.kind() {
            FieldKind::Piecewise { pieces } => pieces[0].1.clone(),
            _ => unreachable!(),
        };
        let grid = default_grid();
        let r = recover_g(&p, &base, &[0.5, 1.5], &grid);
        assert!(matches!(r, Err(Error::NotSplitting { .. })));
    }

    #[test]
    fn bp_data_is_constant_in_time_for_splitting_fields() {
        let f = golden_splitting();
        let data = bp_data_in_time(&f, &[0.0, 0.5, 1.0, 2.0]).unwrap();
        for sample in &data {
            assert!((sample.tau.value() - c(1.0, 0.0)).norm() < 1e-8, "t = {}", sample.t);
        }
        // p(z, t) / p(z, 0) is constant in z
        let grid = default_grid();
        for sample in &data[1..] {
            let mut ratios = Vec::new();
            for z in &grid {
                let p0 = data[0].p.eval1(z.value()).unwrap();
                let pt = sample.p.eval1(z.value()).unwrap();
                ratios.push(pt / p0);
            }
            let median = component_median(&ratios);
            for r in ratios {
                assert!((r - median).norm() <= 1e-6 * median.norm().max(1.0), "t = {}", sample.t);
            }
            assert!((median - c(1.0, sample.t)).norm() < 1e-7);
        }
    }

    #[test]
    fn herglotz_bounds_match_hand_values() {
        let f = golden_splitting();
        let sup = herglotz_bound_check(&f, 0.9, 1.0).unwrap();
        let expected = 2.0f64.sqrt() * 1.9 * 1.9;
        assert!((sup - expected).abs() < 1e-12, "got {sup}, expected {expected}");

        let p = piecewise_demo();
        let sup = herglotz_bound_check(&p, 0.5, 2.0).unwrap();
        assert!((sup - 1.25).abs() < 1e-12, "got {sup}");
    }

    #[test]
    fn time_factor_forms() {
        let e = TimeFactor::parse("1+t^2").unwrap();
        assert!((e.eval(2.0).unwrap() - c(5.0, 0.0)).norm() < 1e-15);
        assert!(TimeFactor::parse("z+t").is_err());

        let s = TimeFactor::from_samples(vec![(0.0, c(1.0, 0.0)), (2.0, c(3.0, 0.0))]).unwrap();
        assert!((s.eval(1.0).unwrap() - c(2.0, 0.0)).norm() < 1e-14);
        assert!(s.eval(5.0).is_err());

        let st = TimeFactor::from_steps(vec![(0.0, c(1.0, 0.0)), (1.0, c(-1.0, 0.0))]).unwrap();
        assert!((st.eval(0.999).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert!((st.eval(1.0).unwrap() - c(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(st.breakpoints(), vec![1.0]);
    }

    #[test]
    fn time_factor_integrals() {
        // integral of 1 + t^2 over [0, 2] = 2 + 8/3
        let e = TimeFactor::parse("1+t^2").unwrap();
        let v = e.integral(2.0).unwrap();
        assert!((v - c(2.0 + 8.0 / 3.0, 0.0)).norm() < 1e-12);

        // alternating steps integrate to a triangle wave
        let st = TimeFactor::from_steps(vec![(0.0, c(1.0, 0.0)), (1.0, c(-1.0, 0.0)), (2.0, c(1.0, 0.0))])
            .unwrap();
        assert!((st.integral(1.5).unwrap() - c(0.5, 0.0)).norm() < 1e-12);
        assert!((st.integral(2.0).unwrap() - c(0.0, 0.0)).norm() < 1e-12);
        assert!((st.integral(2.5).unwrap() - c(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn order_metadata_serde() {
        let inf: OrderD = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(inf, OrderD::Infinite);
        let two: OrderD = serde_json::from_str("2.0").unwrap();
        assert_eq!(two, OrderD::Finite(2.0));
        assert!(serde_json::from_str::<OrderD>("0.5").is_err());
        assert_eq!(serde_json::to_string(&OrderD::Infinite).unwrap(), "\"inf\"");
    }
}
