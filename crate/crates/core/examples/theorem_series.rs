//! Limiting current from the mode series, with both summation methods.
//!
//! `cargo run --release --example theorem_series`

use ringflow::analytic::{example_current, theorem_current, SumMethod};
use ringflow::CouplingSpec;

fn main() -> ringflow::Result<()> {
    let spec = CouplingSpec::delta_pair(0.5, 1.0)?;
    for method in [SumMethod::Cesaro, SumMethod::Abel, SumMethod::Consensus] {
        let r = theorem_current(&spec, 2.0, 1.0, 1 << 16, method)?;
        println!(
            "{:10} value {:.12e}  err {:.1e}  converged {}  (cesaro {:.12e}, abel {:.12e})",
            method.name(),
            r.value,
            r.error_estimate,
            r.converged,
            r.cesaro,
            r.abel
        );
    }
    // the closed-form δ-pair terms give the same number
    let r = example_current(0.5, 1.0, 1.0, 1 << 16, SumMethod::Consensus)?;
    println!("delta-pair closed form {:.12e}", r.value);

    let spec = CouplingSpec::power_law(-0.25, 1.0, 0.6, 0.3)?;
    let r = theorem_current(&spec, 2.0, 1.0, 1 << 16, SumMethod::Consensus)?;
    println!("power law theta=-0.25  {:.12e} ± {:.1e}", r.value, r.error_estimate);
    Ok(())
}
