//! Certify a splitting field and check that its evolution maps commute.

use loewner::evolution::{commuting_report, EvolutionFamilyHandle};
use loewner::grid::default_grid;
use loewner::herglotz::{make_field, FieldSpec, OrderD, TimeFactor};

fn main() -> loewner::error::Result<()> {
    let spec = FieldSpec::Splitting { g: TimeFactor::parse("1+i*t")?, base: "(z-1)^2".into() };
    let field = make_field(&spec, OrderD::Infinite, 3.0)?;
    let family = EvolutionFamilyHandle::from_field(field);
    let report = commuting_report(&family, &[((0.0, 0.5), (1.0, 1.5))], &default_grid())?;
    assert!(report.verdict, "{report}");
    println!("{report}");
    Ok(())
}
