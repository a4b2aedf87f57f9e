//! Built-in demonstration fields. Each carries the check outcomes the theory
//! predicts, so `loewner demo NAME` can report expected-vs-observed: a
//! predicted failure that fails is the demo behaving correctly.

use crate::config::{IntegratorOverrides, RunConfig, SCHEMA_VERSION};
use anyhow::{bail, Result};
use loewner::herglotz::{FieldSpec, OrderD, PieceSpec, TimeFactor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    Pass,
    Fail,
    Skip,
}

impl std::fmt::Display for Expect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Expect::Pass => "PASS",
            Expect::Fail => "FAIL",
            Expect::Skip => "SKIP",
        })
    }
}

pub struct DemoDef {
    pub name: &'static str,
    pub summary: &'static str,
    pub horizon: f64,
    /// Predicted outcome per check, in battery order.
    pub expected: &'static [(&'static str, Expect)],
    spec: fn() -> FieldSpec,
}

impl DemoDef {
    pub fn config(&self) -> RunConfig {
        RunConfig {
            schema: SCHEMA_VERSION,
            field: (self.spec)(),
            order: OrderD::Infinite,
            horizon: self.horizon,
            integrator: IntegratorOverrides::default(),
        }
    }
}

fn splitting_parabolic() -> FieldSpec {
    FieldSpec::Splitting { g: TimeFactor::parse("1+i*t").expect("fixed expression"), base: "(z-1)^2".into() }
}

fn splitting_elliptic() -> FieldSpec {
    FieldSpec::Splitting {
        g: TimeFactor::parse("1+(1+i)*t").expect("fixed expression"),
        base: "-z*(2+z)".into(),
    }
}

fn hyperbolic_group_flip() -> FieldSpec {
    FieldSpec::Piecewise {
        pieces: vec![
            PieceSpec { start: 0.0, base: "1-z^2".into() },
            PieceSpec { start: 1.0, base: "z^2-1".into() },
            PieceSpec { start: 2.0, base: "1-z^2".into() },
            PieceSpec { start: 3.0, base: "z^2-1".into() },
        ],
    }
}

fn piecewise_nonsplitting() -> FieldSpec {
    FieldSpec::Piecewise {
        pieces: vec![
            PieceSpec { start: 0.0, base: "-z".into() },
            PieceSpec { start: 1.0, base: "-z*(2+z)".into() },
        ],
    }
}

fn autonomous_linear() -> FieldSpec {
    FieldSpec::Autonomous { base: "-z".into() }
}

const ALL_PASS: &[(&str, Expect)] = &[
    ("axioms", Expect::Pass),
    ("transport", Expect::Pass),
    ("splitting", Expect::Pass),
    ("commuting", Expect::Pass),
    ("reversing", Expect::Pass),
    ("conjugation", Expect::Pass),
    ("chain-compat", Expect::Pass),
    ("chain-pde", Expect::Pass),
    ("range", Expect::Pass),
];

// A genuine evolution family (axioms, transport) whose field does not split:
// the algebraic consequences of splitting all fail, and the affine chain
// cannot be built at all.
const NONSPLITTING: &[(&str, Expect)] = &[
    ("axioms", Expect::Pass),
    ("transport", Expect::Pass),
    ("splitting", Expect::Fail),
    ("commuting", Expect::Fail),
    ("reversing", Expect::Fail),
    ("conjugation", Expect::Fail),
    ("chain-compat", Expect::Skip),
    ("chain-pde", Expect::Skip),
    ("range", Expect::Skip),
];

pub const ALL: &[DemoDef] = &[
    DemoDef {
        name: "splitting-parabolic",
        summary: "g(t) = 1+it times the parabolic generator (z-1)^2; splits, every check passes",
        horizon: 3.0,
        expected: ALL_PASS,
        spec: splitting_parabolic,
    },
    DemoDef {
        name: "splitting-elliptic",
        summary: "g(t) = 1+(1+i)t times the elliptic generator -z(2+z); splits, every check passes",
        horizon: 3.0,
        expected: ALL_PASS,
        spec: splitting_elliptic,
    },
    DemoDef {
        name: "hyperbolic-group-flip",
        summary: "the group generator 1-z^2 with its sign flipped at integer times; splits with a step factor of +/-1",
        horizon: 4.0,
        expected: ALL_PASS,
        spec: hyperbolic_group_flip,
    },
    DemoDef {
        name: "piecewise-nonsplitting",
        summary: "-z on [0,1), then -z(2+z): a genuine evolution family whose field does not split",
        horizon: 3.0,
        expected: NONSPLITTING,
        spec: piecewise_nonsplitting,
    },
    DemoDef {
        name: "autonomous-linear",
        summary: "-z frozen in time: the radial contraction semigroup",
        horizon: 3.0,
        expected: ALL_PASS,
        spec: autonomous_linear,
    },
];

pub fn find(name: &str) -> Result<&'static DemoDef> {
    match ALL.iter().find(|d| d.name == name) {
        Some(d) => Ok(d),
        None => {
            let names: Vec<&str> = ALL.iter().map(|d| d.name).collect();
            bail!("unknown demo {name:?}; available: {}", names.join(", "))
        }
    }
}
