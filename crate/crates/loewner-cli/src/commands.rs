//! Subcommand implementations. Each returns the process exit code: 0 when
//! every requested verdict holds, 2 when some verdict is false; execution
//! errors propagate as `Err` and the caller exits 1.

use crate::cli::{
    ChainArgs, CheckArgs, ClassifyArgs, DemoArgs, EvolveArgs, FieldSource, Format, KoenigsArgs,
};
use crate::config::RunConfig;
use crate::demos::{self, Expect};
use crate::output::{self, fmt_c, fmt_f};
use anyhow::{bail, Context, Result};
use loewner::chains::{
    affine_chain, chain_compat_report, chain_pde_report, range_inclusion_report, LoewnerChainHandle,
};
use loewner::evolution::{
    commuting_report, ef_axiom_report, reversing_field_identity, reversing_report, trajectory,
    transport_residual, EvolutionFamilyHandle, Trajectory,
};
use loewner::generators::{bp_decompose, classify, koenigs};
use loewner::grid::circle_grid;
use loewner::herglotz::{herglotz_bound_check, splitting_residual, FieldKind, HerglotzField, TimeFactor};
use loewner::report::PropertyReport;
use loewner::DiscPoint;
use serde_json::json;

pub struct Loaded {
    pub name: String,
    pub config: RunConfig,
    pub field: HerglotzField,
    pub handle: EvolutionFamilyHandle,
}

pub fn load(source: &FieldSource, tol: Option<f64>) -> Result<Loaded> {
    let (name, config) = if let Some(path) = &source.config {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        (path.display().to_string(), RunConfig::from_json(&text)?)
    } else if let Some(demo) = &source.demo {
        (demo.clone(), demos::find(demo)?.config())
    } else if let Some(expr) = &source.expr {
        (format!("expr {expr}"), RunConfig::autonomous(expr))
    } else {
        bail!("one of --config, --demo, --expr is required");
    };
    let field = config.build_field().with_context(|| format!("cannot build the field from {name}"))?;
    let mut settings = config.settings()?;
    if let Some(tol) = tol {
        if !(tol.is_finite() && tol > 0.0) {
            bail!("--tol must be a positive real, got {tol}");
        }
        settings.rel_tol = tol;
        settings.abs_tol = tol * 1e-2;
    }
    let handle = EvolutionFamilyHandle::from_field_with(field.clone(), settings);
    Ok(Loaded { name, config, field, handle })
}

fn kind_name(field: &HerglotzField) -> &'static str {
    match field.kind() {
        FieldKind::Autonomous { .. } => "autonomous",
        FieldKind::Splitting { .. } => "splitting",
        FieldKind::Piecewise { .. } => "piecewise",
        FieldKind::General { .. } => "general",
    }
}

// ---------------------------------------------------------------- sampling

/// Push a value away from breakpoints in `step` increments. Residual checks
/// differentiate across s and must keep a finite-difference margin from any
/// jump of the field.
fn nudged(t: f64, breakpoints: &[f64], step: f64, lo: f64, hi: f64) -> f64 {
    let near = |x: f64| breakpoints.iter().any(|b| (x - b).abs() < 1e-3);
    let mut x = t;
    let mut guard = 0;
    while near(x) && guard < 8 {
        x += step;
        guard += 1;
    }
    x.clamp(lo, hi)
}

/// Five times spanning [0, horizon]: the quarter points, nudged off
/// breakpoints (the last one downward so it stays inside the horizon).
pub fn canonical_times(field: &HerglotzField) -> Vec<f64> {
    let h = field.horizon();
    let bps = field.breakpoints();
    (0..=4)
        .map(|k| {
            let t = h * k as f64 / 4.0;
            if k == 0 {
                0.0
            } else if k == 4 {
                nudged(t, bps, -h / 100.0, 0.0, h)
            } else {
                nudged(t, bps, h / 100.0, 0.0, h)
            }
        })
        .collect()
}

/// n interior samples of (0, t_hi), clear of the field's breakpoints.
pub fn interior_samples(field: &HerglotzField, t_hi: f64, n: usize) -> Vec<f64> {
    let bps = field.breakpoints();
    (0..n)
        .map(|j| {
            let t = t_hi * (2 * j + 1) as f64 / (2 * n) as f64;
            nudged(t, bps, t_hi / 100.0, 1e-3, t_hi)
        })
        .collect()
}

/// Like [`interior_samples`] but clear of the chain factor's breakpoints,
/// which for a recovered (sampled) factor sit at every sample time.
fn pde_samples(chain: &LoewnerChainHandle, t_hi: f64, n: usize) -> Vec<f64> {
    let bps = chain.factor().breakpoints();
    (0..n)
        .map(|j| {
            let mut x = t_hi * (2 * j + 1) as f64 / (2 * n) as f64;
            let mut guard = 0;
            while bps.iter().any(|b| (x - b).abs() <= 2e-4) && guard < 64 {
                x += 5e-4;
                guard += 1;
            }
            x.clamp(2e-4, t_hi)
        })
        .collect()
}

// ---------------------------------------------------------------- battery

pub const ALL_CHECKS: &[&str] = &[
    "axioms",
    "transport",
    "splitting",
    "commuting",
    "reversing",
    "conjugation",
    "chain-compat",
    "chain-pde",
    "range",
];

pub enum Outcome {
    Report(PropertyReport),
    Skipped(String),
}

pub fn parse_checks(arg: &Option<String>) -> Result<Vec<&'static str>> {
    let Some(text) = arg else {
        return Ok(ALL_CHECKS.to_vec());
    };
    let text = text.trim();
    if text == "all" {
        return Ok(ALL_CHECKS.to_vec());
    }
    let mut requested: Vec<&'static str> = Vec::new();
    for tok in text.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        match ALL_CHECKS.iter().find(|n| **n == tok) {
            Some(n) => {
                if !requested.contains(n) {
                    requested.push(n);
                }
            }
            None => bail!("unknown check {tok:?}; available: {}", ALL_CHECKS.join(", ")),
        }
    }
    if requested.is_empty() {
        bail!("no checks requested");
    }
    // battery order is canonical regardless of how the flag was spelled
    Ok(ALL_CHECKS.iter().copied().filter(|n| requested.contains(n)).collect())
}

/// Run the named checks. `grid` drives the composition-style residuals;
/// `deriv_grid` the finite-difference ones (transport, conjugation,
/// chain-pde), which cost a derivative stencil per point.
pub fn run_battery(
    loaded: &Loaded,
    names: &[&'static str],
    grid: &[DiscPoint],
    deriv_grid: &[DiscPoint],
    times: &[f64],
) -> Result<Vec<(&'static str, Outcome)>> {
    if times.len() < 3 {
        bail!("property checks need at least 3 sample times, got {}", times.len());
    }
    let t = times;
    let n = t.len();

    let mut triples: Vec<(f64, f64, f64)> = t.windows(3).map(|w| (w[0], w[1], w[2])).collect();
    triples.push((t[0], t[n / 2], t[n - 1]));

    let mut pairs = vec![((t[0], t[1]), (t[1], t[2]))];
    if n >= 4 {
        pairs.push(((t[0], t[1]), (t[2], t[3])));
        pairs.push(((t[1], t[2]), (t[n - 2], t[n - 1])));
    } else {
        pairs.push(((t[0], t[2]), (t[1], t[2])));
    }

    let fd_samples = interior_samples(&loaded.field, 0.9 * t[n - 1], 5);

    let needs_chain = names.iter().any(|n| matches!(*n, "chain-compat" | "chain-pde" | "range"));
    let chain = if needs_chain { Some(affine_chain(&loaded.field)) } else { None };
    // a recovered factor is only sampled up to its last sample time
    let chain_hi = match &chain {
        Some(Ok(c)) => match c.factor() {
            TimeFactor::Samples(samples) => samples.last().expect("samples are nonempty").0,
            _ => f64::INFINITY,
        },
        _ => f64::INFINITY,
    };
    let ct: Vec<f64> = t.iter().map(|&x| x.min(chain_hi)).collect();

    let mut out = Vec::new();
    for &name in names {
        let outcome = match name {
            "axioms" => Outcome::Report(ef_axiom_report(&loaded.handle, &triples, grid)?),
            "transport" => {
                Outcome::Report(transport_residual(&loaded.handle, t[n - 1], &fd_samples, deriv_grid)?)
            }
            "splitting" => Outcome::Report(splitting_residual(&loaded.field, t, grid)?),
            "commuting" => Outcome::Report(commuting_report(&loaded.handle, &pairs, grid)?),
            "reversing" => Outcome::Report(reversing_report(&loaded.handle, &triples, grid)?),
            "conjugation" => {
                Outcome::Report(reversing_field_identity(&loaded.handle, t[0], t[n / 2], t, deriv_grid)?)
            }
            "chain-compat" => match chain.as_ref().expect("chain computed above") {
                Ok(c) => {
                    let cpairs = [(ct[0], ct[1]), (ct[1], ct[n - 1]), (ct[0], ct[n - 1])];
                    Outcome::Report(chain_compat_report(c, &loaded.handle, &cpairs, grid)?)
                }
                Err(e) => Outcome::Skipped(format!("no affine chain: {e}")),
            },
            "chain-pde" => match chain.as_ref().expect("chain computed above") {
                Ok(c) => {
                    Outcome::Report(chain_pde_report(c, &pde_samples(c, 0.9 * ct[n - 1], 5), deriv_grid)?)
                }
                Err(e) => Outcome::Skipped(format!("no affine chain: {e}")),
            },
            "range" => match chain.as_ref().expect("chain computed above") {
                Ok(c) => {
                    let candidates = [(ct[0], ct[n / 2]), (ct[0], ct[n - 1]), (ct[n / 2], ct[n - 1])];
                    let mut kept = Vec::new();
                    for &(s, u) in &candidates {
                        if (c.lambda(u)? - c.lambda(s)?).re >= -1e-12 {
                            kept.push((s, u));
                        }
                    }
                    if kept.is_empty() {
                        Outcome::Skipped("every sampled pair has decreasing Re(lambda)".to_string())
                    } else {
                        Outcome::Report(range_inclusion_report(c, &kept)?)
                    }
                }
                Err(e) => Outcome::Skipped(format!("no affine chain: {e}")),
            },
            other => bail!("unknown check {other:?}"),
        };
        out.push((name, outcome));
    }
    Ok(out)
}

fn print_battery(entries: &[(&'static str, Outcome)]) {
    let (mut passed, mut failed, mut skipped) = (0usize, 0usize, 0usize);
    for (name, outcome) in entries {
        match outcome {
            Outcome::Report(r) => {
                if r.verdict {
                    passed += 1;
                } else {
                    failed += 1;
                }
                println!(
                    "check {name:<13} {}  sup {:.3e}  tol {:.1e}",
                    if r.verdict { "PASS" } else { "FAIL" },
                    r.sup_residual,
                    r.tolerance
                );
            }
            Outcome::Skipped(reason) => {
                skipped += 1;
                println!("check {name:<13} SKIP  {reason}");
            }
        }
    }
    println!("summary: {passed} passed, {failed} failed, {skipped} skipped");
}

fn battery_failures(entries: &[(&'static str, Outcome)]) -> usize {
    entries.iter().filter(|(_, o)| matches!(o, Outcome::Report(r) if !r.verdict)).count()
}

fn battery_artifact(field_name: &str, entries: &[(&'static str, Outcome)], format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let mut reports = Vec::new();
            let mut skipped = Vec::new();
            for (name, outcome) in entries {
                match outcome {
                    Outcome::Report(r) => reports.push(serde_json::to_value(r)?),
                    Outcome::Skipped(reason) => skipped.push(json!({ "check": name, "reason": reason })),
                }
            }
            let doc = json!({ "field": field_name, "reports": reports, "skipped": skipped });
            Ok(serde_json::to_string_pretty(&doc)? + "\n")
        }
        Format::Csv => {
            let mut text = String::from("check,status,sup_residual,tolerance\n");
            for (name, outcome) in entries {
                match outcome {
                    Outcome::Report(r) => {
                        let status = if r.verdict { "PASS" } else { "FAIL" };
                        text += &format!("{name},{status},{},{}\n", r.sup_residual, r.tolerance);
                    }
                    Outcome::Skipped(_) => text += &format!("{name},SKIP,,\n"),
                }
            }
            Ok(text)
        }
    }
}

// ---------------------------------------------------------------- evolve

fn trajectory_csv(traj: &Trajectory) -> String {
    let mut text = String::from("s,t,re_z0,im_z0,re_phi,im_phi\n");
    for r in &traj.rows {
        text += &format!("{},{},{},{},{},{}\n", r.s, r.t, r.z0.re, r.z0.im, r.phi.re, r.phi.im);
    }
    text
}

fn trajectory_json(traj: &Trajectory) -> Result<String> {
    let rows: Vec<_> = traj
        .rows
        .iter()
        .map(|r| json!({ "s": r.s, "t": r.t, "z0": [r.z0.re, r.z0.im], "phi": [r.phi.re, r.phi.im] }))
        .collect();
    Ok(serde_json::to_string_pretty(&json!({ "rows": rows }))? + "\n")
}

pub fn run_evolve(a: &EvolveArgs) -> Result<i32> {
    let loaded = load(&a.source, a.tol)?;
    let times = output::parse_times(&a.times)?;
    let starts = output::resolve_points(&a.points, &a.grid)?;
    let traj = trajectory(&loaded.handle, a.s, &times, &starts)?;
    eprintln!(
        "evolved {} ({}) from s={}: {} points x {} times",
        loaded.name,
        kind_name(&loaded.field),
        fmt_f(a.s),
        starts.len(),
        times.len()
    );
    let text = match a.format {
        Format::Csv => trajectory_csv(&traj),
        Format::Json => trajectory_json(&traj)?,
    };
    output::write_artifact(&a.out, &text)?;
    Ok(0)
}

// ---------------------------------------------------------------- classify

pub fn run_classify(a: &ClassifyArgs) -> Result<i32> {
    let loaded = load(&a.source, None)?;
    let slice = loaded.field.frozen(a.time)?;
    let report = classify(&slice)?;
    let text = match a.format {
        None => {
            let mut text = format!(
                "{}, dw={}, spectral={}\n",
                report.kind,
                fmt_c(report.dw.value()),
                fmt_c(report.spectral)
            );
            if !report.dw.is_interior() {
                text += &format!(
                    "angular derivative at the Denjoy-Wolff point: {}\n",
                    fmt_f(report.angular_derivative)
                );
            }
            for (bp, rate) in &report.boundary_repelling {
                text += &format!(
                    "repelling boundary fixed point {} with rate {}\n",
                    fmt_c(bp.value()),
                    fmt_f(*rate)
                );
            }
            text
        }
        Some(Format::Json) => {
            let repelling: Vec<_> = report
                .boundary_repelling
                .iter()
                .map(|(bp, rate)| json!({ "point": fmt_c(bp.value()), "rate": rate }))
                .collect();
            let doc = json!({
                "kind": report.kind.to_string(),
                "dw": fmt_c(report.dw.value()),
                "interior": report.dw.is_interior(),
                "spectral": fmt_c(report.spectral),
                "angular_derivative": report.angular_derivative,
                "boundary_repelling": repelling,
            });
            serde_json::to_string_pretty(&doc)? + "\n"
        }
        Some(Format::Csv) => {
            format!(
                "kind,dw,spectral\n{},{},{}\n",
                report.kind,
                fmt_c(report.dw.value()),
                fmt_c(report.spectral)
            )
        }
    };
    output::write_artifact(&a.out, &text)?;
    Ok(0)
}

// ---------------------------------------------------------------- koenigs

pub fn run_koenigs(a: &KoenigsArgs) -> Result<i32> {
    let loaded = load(&a.source, None)?;
    let slice = loaded.field.frozen(a.time)?;
    let spec = bp_decompose(&slice)?;
    let map = koenigs(&spec)?;
    let case = if map.is_interior_case() { "interior" } else { "boundary" };
    eprintln!(
        "koenigs: case={case}, dw={}, spectral={}, validation residual {:.3e}",
        fmt_c(spec.dw().value()),
        fmt_c(spec.spectral()),
        map.validation_residual()
    );
    let points = output::resolve_points(&a.points, &a.grid)?;
    let text = match a.format {
        Format::Csv => {
            let mut text = String::from("re_z,im_z,re_h,im_h\n");
            for z in &points {
                let h = map.eval(*z)?;
                let zv = z.value();
                text += &format!("{},{},{},{}\n", zv.re, zv.im, h.re, h.im);
            }
            text
        }
        Format::Json => {
            let mut values = Vec::new();
            for z in &points {
                let h = map.eval(*z)?;
                let zv = z.value();
                values.push(json!({ "z": [zv.re, zv.im], "h": [h.re, h.im] }));
            }
            let doc = json!({
                "case": case,
                "dw": fmt_c(spec.dw().value()),
                "spectral": fmt_c(spec.spectral()),
                "validation_residual": map.validation_residual(),
                "values": values,
            });
            serde_json::to_string_pretty(&doc)? + "\n"
        }
    };
    output::write_artifact(&a.out, &text)?;
    Ok(0)
}

// ---------------------------------------------------------------- chain

pub fn run_chain(a: &ChainArgs) -> Result<i32> {
    let loaded = load(&a.source, None)?;
    let chain =
        affine_chain(&loaded.field).context("no affine chain: the field must split as g(t) * G(z)")?;
    let h = loaded.field.horizon();
    let times = match &a.times {
        Some(text) => output::parse_times(text)?,
        None => vec![0.0, 0.5 * h, h],
    };
    let points = output::resolve_points(&a.points, &a.grid)?;
    let case = if chain.koenigs().is_interior_case() { "interior" } else { "boundary" };
    eprintln!("chain: case={case}, {} times x {} points", times.len(), points.len());
    let text = match a.format {
        Format::Csv => {
            let mut text = String::from("s,re_f,im_f\n");
            for &s in &times {
                for z in &points {
                    let f = chain.eval(s, *z)?;
                    text += &format!("{s},{},{}\n", f.re, f.im);
                }
            }
            text
        }
        Format::Json => {
            let mut lambdas = Vec::new();
            for &s in &times {
                let l = chain.lambda(s)?;
                lambdas.push(json!([l.re, l.im]));
            }
            let mut rows = Vec::new();
            for &s in &times {
                for z in &points {
                    let f = chain.eval(s, *z)?;
                    let zv = z.value();
                    rows.push(json!({ "s": s, "z": [zv.re, zv.im], "f": [f.re, f.im] }));
                }
            }
            let doc = json!({ "case": case, "times": times, "lambda": lambdas, "rows": rows });
            serde_json::to_string_pretty(&doc)? + "\n"
        }
    };
    output::write_artifact(&a.out, &text)?;
    Ok(0)
}

// ---------------------------------------------------------------- check

pub fn run_check(a: &CheckArgs) -> Result<i32> {
    let loaded = load(&a.source, a.tol)?;
    let names = parse_checks(&a.checks)?;
    let grid = match &a.grid {
        Some(g) => output::parse_grid(g)?,
        None => output::default_cli_grid(),
    };
    // with an explicit --grid the user pays the stencil cost knowingly
    let deriv_grid = match &a.grid {
        Some(_) => grid.clone(),
        None => circle_grid(0.6, 8),
    };
    let times = match &a.times {
        Some(text) => {
            let mut v = output::parse_times(text)?;
            v.sort_by(|x, y| x.partial_cmp(y).expect("times are finite"));
            v
        }
        None => canonical_times(&loaded.field),
    };
    println!(
        "field: {} ({}, horizon {})",
        loaded.name,
        kind_name(&loaded.field),
        fmt_f(loaded.field.horizon())
    );
    let entries = run_battery(&loaded, &names, &grid, &deriv_grid, &times)?;
    print_battery(&entries);
    if a.out.is_some() {
        let text = battery_artifact(&loaded.name, &entries, a.format)?;
        output::write_artifact(&a.out, &text)?;
    }
    Ok(if battery_failures(&entries) > 0 { 2 } else { 0 })
}

// ---------------------------------------------------------------- demo

pub fn run_demo(a: &DemoArgs) -> Result<i32> {
    if a.list {
        for d in demos::ALL {
            println!("{:<24} {}", d.name, d.summary);
        }
        return Ok(0);
    }
    let Some(name) = &a.name else {
        bail!("give a demo name, or --list to see them");
    };
    let def = demos::find(name)?;
    if a.emit_config {
        let text = serde_json::to_string_pretty(&def.config())? + "\n";
        print!("{text}");
        return Ok(0);
    }
    let source = FieldSource { config: None, demo: Some(def.name.to_string()), expr: None };
    let loaded = load(&source, None)?;
    println!("demo {}: {}", def.name, def.summary);
    let bound = herglotz_bound_check(&loaded.field, 0.9, loaded.field.horizon())?;
    println!(
        "sup |G| on |z| <= 0.9 for t <= {}: {:.4} (finite, as a Herglotz field must be)",
        fmt_f(loaded.field.horizon()),
        bound
    );
    let names: Vec<&'static str> = def.expected.iter().map(|(n, _)| *n).collect();
    let entries = run_battery(
        &loaded,
        &names,
        &output::default_cli_grid(),
        &circle_grid(0.6, 8),
        &canonical_times(&loaded.field),
    )?;
    let mut rows = Vec::new();
    let mut matches = 0usize;
    for ((name, outcome), (_, expected)) in entries.iter().zip(def.expected) {
        let observed = match outcome {
            Outcome::Report(r) if r.verdict => Expect::Pass,
            Outcome::Report(_) => Expect::Fail,
            Outcome::Skipped(_) => Expect::Skip,
        };
        let ok = observed == *expected;
        if ok {
            matches += 1;
        }
        println!(
            "  {name:<13} expected {expected}  observed {observed}  {}",
            if ok { "as predicted" } else { "UNEXPECTED" }
        );
        rows.push(json!({
            "check": name,
            "expected": expected.to_string(),
            "observed": observed.to_string(),
            "as_predicted": ok,
        }));
    }
    let total = def.expected.len();
    let all_ok = matches == total;
    if all_ok {
        println!("verdict: behaves as predicted ({matches}/{total})");
    } else {
        println!("verdict: deviates from prediction ({matches}/{total} as predicted)");
    }
    if a.out.is_some() {
        let doc = json!({ "demo": def.name, "as_predicted": all_ok, "checks": rows });
        output::write_artifact(&a.out, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    }
    Ok(if all_ok { 0 } else { 2 })
}
