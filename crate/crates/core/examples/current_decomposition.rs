//! Breaks the exact current into eigenmode pair contributions.
//!
//! `cargo run --release --example current_decomposition`

use ringflow::spectral::{eigendecompose, EigenOptions};
use ringflow::stationary::{decompose_current, PairClass};
use ringflow::{assemble_drift, CouplingSpec, SystemParams};

fn main() -> ringflow::Result<()> {
    let ds = assemble_drift(&SystemParams::new(8, 0.2, 2.0, 1.0)?, &CouplingSpec::delta_pair(0.5, 1.0)?)?;
    let eig = eigendecompose(&ds, &EigenOptions::default())?;
    println!("eigen residual {:.1e}, condition {:.1e}", eig.eigen_residual, eig.condition);
    for p in eig.pairs().iter().take(6) {
        println!("  {:10} λ = {:+.6e} {:+.6e}i", p.label.to_string(), p.lambda.re, p.lambda.im);
    }

    let rep = decompose_current(&eig, &ds)?;
    println!("total {:.12e}   term sum {:.12e}", rep.total, rep.term_sum);
    for class in PairClass::ALL {
        println!("  {:14} {:+.6e}", class.name(), rep.by_class.get(class));
    }
    println!("  n   nearResonant    diagonal      antiresonant");
    for m in &rep.by_mode {
        println!("  {:<3} {:+.6e}  {:+.6e}  {:+.6e}", m.n, m.near_resonant, m.diagonal, m.antiresonant);
    }
    Ok(())
}
