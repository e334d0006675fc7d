//! Scan of C(x₁) for the δ pair and its jumps at rational multiples of π.
//!
//! `cargo run --release --example jump_scan [out.csv]`

use std::f64::consts::PI;

use ringflow::analytic::{jump_at, linear_grid, rational_jump, scan_example};

fn main() -> ringflow::Result<()> {
    let c = 0.5;
    for (x0, q) in [(PI / 2.0, 2), (PI / 3.0, 3), (PI, 1)] {
        let j = jump_at(c, x0, 1.0, 20_000)?;
        println!(
            "x0 = {x0:.6}  jump {:+.6e} ± {:.1e}  predicted {:+.6e}  detected {}",
            j.jump,
            j.error_estimate,
            rational_jump(c, 1.0, q),
            j.detected
        );
    }

    let scan = scan_example(c, &linear_grid(0.2, 3.1, 30), 1.0, 10_000)?;
    match std::env::args().nth(1) {
        Some(path) => scan.write_csv(std::fs::File::create(path)?)?,
        None => scan.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}
