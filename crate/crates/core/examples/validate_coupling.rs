//! Checks the growth and non-degeneracy conditions for a few couplings.
//!
//! `cargo run --example validate_coupling`

use ringflow::{CouplingSpec, C64};
use ringflow::model::validate_coupling;

fn main() -> ringflow::Result<()> {
    let specs = [
        ("delta pair c=0.5 x1=1", CouplingSpec::delta_pair(0.5, 1.0)?),
        ("delta pair c=0.5 x1=pi/2", CouplingSpec::delta_pair(0.5, std::f64::consts::FRAC_PI_2)?),
        ("power law theta=-0.3", CouplingSpec::power_law(-0.3, 1.0, 0.7, 0.4)?),
        // α₂ = iα₁ at n = 2 makes α₁² + α₂² vanish there
        (
            "table, degenerate at n = 2",
            CouplingSpec::custom_table(
                0.0,
                (0..=40).map(|n| {
                    let a = C64::new(1.0, 0.0);
                    let b = if n == 2 { C64::new(0.0, 1.0) } else { C64::new(0.3, if n == 0 { 0.0 } else { 0.8 }) };
                    (n, a, b)
                }),
            )?,
        ),
    ];
    for (name, spec) in &specs {
        let rep = validate_coupling(spec, 40)?;
        println!("{name:28} passed={:<5} {}", rep.passed, rep.summary());
    }
    Ok(())
}
