//! With a bounded nonlinearity and equal temperatures there is no current.
//!
//! `cargo run --release --example nonlinear_equilibrium`

use ringflow::simulate::{estimate_current, Scheme, SimConfig};
use ringflow::{assemble_drift, CouplingSpec, Nonlinearity, SystemParams};

fn main() -> ringflow::Result<()> {
    let g = Nonlinearity::tanh(0.5, 1.0)?;
    let spec = CouplingSpec::delta_pair(0.5, 1.0)?;
    let cfg = SimConfig {
        dt: 0.25,
        burn_in_time: 1e3,
        sample_time: 2e5,
        batches: 32,
        seed: 3,
        chains: 4,
        scheme: Scheme::StrangSplit,
    };
    for (t1, t2) in [(1.5, 1.5), (2.0, 1.0)] {
        let params = SystemParams::new(4, 1.0, t1, t2)?.with_nonlinearity(g.clone());
        let ds = assemble_drift(&params, &spec)?;
        let est = estimate_current(&ds, &cfg, &params.g)?;
        println!("T = ({t1}, {t2})  J = {:+.3e} ± {:.1e}", est.mean, est.stderr);
    }
    Ok(())
}
