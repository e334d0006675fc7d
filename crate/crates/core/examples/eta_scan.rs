//! Approach of the exact current to the truncated series as η → 0.
//!
//! The gap |J(η) - S_M| should close like η².
//!
//! `cargo run --release --example eta_scan`

use ringflow::analytic::truncated_series;
use ringflow::linalg::loglog_slope;
use ringflow::stationary::exact_current;
use ringflow::{assemble_drift, CouplingSpec, SystemParams};

fn main() -> ringflow::Result<()> {
    let m = 8;
    let spec = CouplingSpec::delta_pair(0.5, 1.0)?;
    let s_m = truncated_series(&spec, 2.0, 1.0, m)?;
    println!("S_{m} = {s_m:.12e}");
    let etas = [0.4, 0.2, 0.1, 0.05, 0.025];
    let mut gaps = Vec::new();
    for &eta in &etas {
        let ds = assemble_drift(&SystemParams::new(m, eta, 2.0, 1.0)?, &spec)?;
        let j = exact_current(&ds)?;
        gaps.push((j - s_m).abs());
        println!("eta = {eta:<6} J = {j:.12e}   |J - S| = {:.3e}", (j - s_m).abs());
    }
    let (slope, _, rms) = loglog_slope(&etas, &gaps)?;
    println!("log-log slope {slope:.3} (fit rms {rms:.1e})");
    Ok(())
}
