//! Closed-form checks for the four reference generators whose Koenigs maps
//! and semigroups have elementary formulas, plus the classification table
//! and hyperbolic-step detection they anchor.

use num_complex::Complex64;

use loewner::generators::{
    bp_decompose, classify, koenigs, parabolic_step, ParabolicStep, Semigroup, SemigroupKind,
};
use loewner::grid::{default_grid, radius08_grid};
use loewner::{parse_expr, poincare_distance, Arity, DiscPoint};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn dp(re: f64, im: f64) -> DiscPoint {
    DiscPoint::new(c(re, im)).unwrap()
}

fn spec_of(source: &str) -> loewner::generators::GeneratorSpec {
    bp_decompose(&parse_expr(source, Arity::One).unwrap()).unwrap()
}

type ClosedForm = fn(Complex64) -> Complex64;

#[test]
fn koenigs_maps_match_closed_forms() {
    let cases: [(&str, ClosedForm); 4] = [
        ("-z", |z| z),
        ("(z-1)^2", |z| z / (1.0 - z)),
        ("-z*(2+z)", |z| 2.0 * z / (z + 2.0)),
        ("1-z^2", |z| 0.5 * ((1.0 + z) / (1.0 - z)).ln()),
    ];
    for (source, exact) in cases {
        let h = koenigs(&spec_of(source)).unwrap();
        for z in radius08_grid() {
            let got = h.eval(z).unwrap();
            let want = exact(z.value());
            assert!(
                (got - want).norm() <= 1e-10 * want.norm().max(1.0),
                "{source} at z = {}: got {got}, want {want}",
                z.value()
            );
        }
    }
}

#[test]
fn koenigs_inverse_round_trips() {
    for source in ["(z-1)^2", "-z*(2+z)", "1-z^2"] {
        let h = koenigs(&spec_of(source)).unwrap();
        for z in radius08_grid().into_iter().step_by(5) {
            let w = h.eval(z).unwrap();
            let back = h.invert(w, z).unwrap();
            assert!(
                (back.value() - z.value()).norm() <= 1e-9,
                "{source}: h^-1(h(z)) = {} vs z = {}",
                back.value(),
                z.value()
            );
        }
    }
}

#[test]
fn semigroup_law_holds() {
    for source in ["(z-1)^2", "-z*(2+z)"] {
        let sg = Semigroup::new(&spec_of(source)).unwrap();
        for z in default_grid().into_iter().step_by(17) {
            let one = sg.at(0.5, z).unwrap();
            let two = sg.at(0.7, one).unwrap();
            let direct = sg.at(1.2, z).unwrap();
            assert!(
                (two.value() - direct.value()).norm() <= 1e-9,
                "{source} at z = {}: {} vs {}",
                z.value(),
                two.value(),
                direct.value()
            );
        }
    }
}

#[test]
fn semigroups_contract_the_hyperbolic_metric() {
    let points: Vec<DiscPoint> = default_grid().into_iter().step_by(19).collect();
    for source in ["-z", "(z-1)^2", "-z*(2+z)", "1-z^2"] {
        let sg = Semigroup::new(&spec_of(source)).unwrap();
        for (i, &z) in points.iter().enumerate() {
            for &w in &points[i + 1..] {
                let before = poincare_distance(z, w);
                let after = poincare_distance(sg.at(0.8, z).unwrap(), sg.at(0.8, w).unwrap());
                assert!(
                    after <= before + 1e-9,
                    "{source}: d grew from {before} to {after} at ({}, {})",
                    z.value(),
                    w.value()
                );
            }
        }
    }
}

#[test]
fn group_semigroup_preserves_the_hyperbolic_metric() {
    // 1 - z^2 generates a group of automorphisms, so the distance is exactly
    // preserved, not merely contracted
    let sg = Semigroup::new(&spec_of("1-z^2")).unwrap();
    let points: Vec<DiscPoint> = default_grid().into_iter().step_by(13).collect();
    for (i, &z) in points.iter().enumerate() {
        for &w in &points[i + 1..] {
            let before = poincare_distance(z, w);
            let after = poincare_distance(sg.at(0.8, z).unwrap(), sg.at(0.8, w).unwrap());
            assert!(
                (after - before).abs() <= 1e-8,
                "distance moved from {before} to {after} at ({}, {})",
                z.value(),
                w.value()
            );
        }
    }
}

#[test]
fn classification_table() {
    let table: [(&str, SemigroupKind); 6] = [
        ("-z", SemigroupKind::Elliptic),
        ("i*z", SemigroupKind::EllipticAutomorphism),
        ("-z*(2+z)", SemigroupKind::Elliptic),
        ("(z-1)^2", SemigroupKind::ParabolicZeroStep),
        ("i*(z-1)^2", SemigroupKind::ParabolicPositiveStep),
        ("1-z^2", SemigroupKind::Hyperbolic),
    ];
    for (source, want) in table {
        let report = classify(&parse_expr(source, Arity::One).unwrap()).unwrap();
        assert_eq!(report.kind, want, "{source}: {report:?}");
    }
}

#[test]
fn classification_details_for_the_hyperbolic_group() {
    let report = classify(&parse_expr("1-z^2", Arity::One).unwrap()).unwrap();
    assert!((report.dw.value() - c(1.0, 0.0)).norm() < 1e-9);
    assert!((report.spectral - c(-2.0, 0.0)).norm() < 1e-8);
    assert!((report.angular_derivative - (-2.0f64).exp()).abs() < 1e-8);
    assert_eq!(report.boundary_repelling.len(), 1);
    let (sigma, rate) = &report.boundary_repelling[0];
    assert!((sigma.value() - c(-1.0, 0.0)).norm() < 1e-8);
    assert!((rate - 2.0).abs() < 1e-6, "repelling rate {rate}");
}

#[test]
fn classification_details_for_interior_cases() {
    let report = classify(&parse_expr("-z*(2+z)", Arity::One).unwrap()).unwrap();
    assert!(report.dw.value().norm() < 1e-9);
    assert!((report.spectral - c(-2.0, 0.0)).norm() < 1e-9);
    assert!(report.boundary_repelling.is_empty(), "{:?}", report.boundary_repelling);

    let rot = classify(&parse_expr("i*z", Arity::One).unwrap()).unwrap();
    assert!((rot.spectral - c(0.0, 1.0)).norm() < 1e-9);
    assert!((rot.angular_derivative - 1.0).abs() < 1e-12);
}

#[test]
fn parabolic_steps_are_detected_from_any_base_point() {
    let translation = spec_of("(z-1)^2");
    for z0 in [dp(0.0, 0.0), dp(0.0, 0.3)] {
        let step = parabolic_step(&translation, z0).unwrap();
        assert_eq!(step, ParabolicStep::Zero, "from {}", z0.value());
    }
    let skew = spec_of("i*(z-1)^2");
    let step = parabolic_step(&skew, dp(0.0, 0.0)).unwrap();
    assert_eq!(step, ParabolicStep::Positive);
}

#[test]
fn parabolic_step_rejects_non_parabolic_input() {
    let interior = spec_of("-z");
    assert!(parabolic_step(&interior, dp(0.0, 0.0)).is_err());
    let hyperbolic = spec_of("1-z^2");
    assert!(parabolic_step(&hyperbolic, dp(0.0, 0.0)).is_err());
}
