//! Flag-value parsing and artifact rendering.
//!
//! Every artifact is rendered to a `String` first and written in one shot,
//! so a run either produces the whole file or none of it, and identical
//! inputs produce byte-identical artifacts.

use anyhow::{anyhow, bail, Context, Result};
use loewner::grid::polar_grid;
use loewner::{parse_expr, Arity, Complex64, DiscPoint};
use std::path::PathBuf;

pub fn parse_times(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for tok in text.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        let v: f64 = tok.parse().with_context(|| format!("bad time {tok:?}"))?;
        if !v.is_finite() {
            bail!("times must be finite, got {tok:?}");
        }
        out.push(v);
    }
    if out.is_empty() {
        bail!("no times given");
    }
    Ok(out)
}

/// Comma-separated complex constants. Each token is parsed with the
/// expression grammar, so "0.3+0.2*i", "-0.5*i", and "0.1*exp(i*1.2)" all
/// work; z and t are rejected.
pub fn parse_points(text: &str) -> Result<Vec<DiscPoint>> {
    let mut out = Vec::new();
    for tok in text.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        let f = parse_expr(tok, Arity::Two).with_context(|| format!("bad point {tok:?}"))?;
        if f.ast().uses_z() || f.ast().uses_t() {
            bail!("point {tok:?} must be a constant, not a function of z or t");
        }
        let v = f.eval2(Complex64::new(0.0, 0.0), 0.0)?;
        out.push(DiscPoint::new(v).with_context(|| format!("point {tok:?} is not inside the unit disc"))?);
    }
    if out.is_empty() {
        bail!("no points given");
    }
    Ok(out)
}

/// "R1,R2,.../ANGLES": polar grid with the given radii and angle count.
pub fn parse_grid(text: &str) -> Result<Vec<DiscPoint>> {
    let (radii_text, angles_text) =
        text.rsplit_once('/').ok_or_else(|| anyhow!("grid must look like R1,R2,.../ANGLES, got {text:?}"))?;
    let angles: usize =
        angles_text.trim().parse().with_context(|| format!("bad angle count {angles_text:?}"))?;
    if angles == 0 {
        bail!("the grid needs at least one angle");
    }
    let mut radii = Vec::new();
    for tok in radii_text.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        let r: f64 = tok.parse().with_context(|| format!("bad radius {tok:?}"))?;
        if !(r > 0.0 && r < 1.0) {
            bail!("grid radii must lie in (0, 1), got {r}");
        }
        radii.push(r);
    }
    if radii.is_empty() {
        bail!("the grid needs at least one radius");
    }
    Ok(polar_grid(&radii, angles))
}

/// 24 points on three rings; small enough that checks stay fast in debug
/// builds, spread enough to catch non-radial defects.
pub fn default_cli_grid() -> Vec<DiscPoint> {
    polar_grid(&[0.3, 0.6, 0.85], 8)
}

pub fn resolve_points(points: &Option<String>, grid: &Option<String>) -> Result<Vec<DiscPoint>> {
    match (points, grid) {
        (Some(p), _) => parse_points(p),
        (None, Some(g)) => parse_grid(g),
        (None, None) => Ok(default_cli_grid()),
    }
}

/// Fixed-point formatting with numerical noise removed: 9 significant
/// decimals, trailing zeros trimmed, negative zero folded to zero.
pub fn fmt_f(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let s = format!("{x:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Complex values in "a+bi" form, components cleaned like [`fmt_f`] and
/// components below 1e-9 of the magnitude dropped, so a computed -2+3e-13i
/// prints as "-2".
pub fn fmt_c(z: Complex64) -> String {
    let scale = z.norm();
    let clean = |x: f64| if x.abs() < 1e-9 * scale.max(1e-300) { 0.0 } else { x };
    let re = clean(z.re);
    let im = clean(z.im);
    if im == 0.0 {
        fmt_f(re)
    } else if re == 0.0 {
        format!("{}i", fmt_f(im))
    } else if im > 0.0 {
        format!("{}+{}i", fmt_f(re), fmt_f(im))
    } else {
        format!("{}-{}i", fmt_f(re), fmt_f(-im))
    }
}

/// Write to the path when given, otherwise print to stdout.
pub fn write_artifact(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
