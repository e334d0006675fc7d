//! Exact stationary current at finite η, by all Lyapunov solvers.
//!
//! `cargo run --release --example exact_current`

use ringflow::stationary::{expected_current, stationary_covariance, LyapunovMethod};
use ringflow::{assemble_drift, CouplingSpec, SystemParams};

fn main() -> ringflow::Result<()> {
    let params = SystemParams::new(8, 0.5, 2.0, 1.0)?;
    let spec = CouplingSpec::delta_pair(0.5, 1.0)?;
    let ds = assemble_drift(&params, &spec)?;
    println!("dim = {}", ds.layout().dim());
    for method in [LyapunovMethod::Eigenbasis, LyapunovMethod::Schur, LyapunovMethod::Kronecker, LyapunovMethod::Integration] {
        let cov = stationary_covariance(&ds, method, 1e-9)?;
        println!(
            "{:12} J = {:+.12e}   relative residual {:.1e}   min eig {:+.2e}",
            method.name(),
            expected_current(&cov, ds.current_matrix()),
            cov.relative_residual,
            cov.min_eigenvalue
        );
    }

    // swapping the bath temperatures reverses the current
    let cold = assemble_drift(&SystemParams::new(8, 0.5, 1.0, 2.0)?, &spec)?;
    let cov = stationary_covariance(&cold, LyapunovMethod::Eigenbasis, 1e-9)?;
    println!("T1<T2      J = {:+.12e}", expected_current(&cov, cold.current_matrix()));
    Ok(())
}
