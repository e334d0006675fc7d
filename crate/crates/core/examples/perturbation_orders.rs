//! Numerical eigenpairs against second-order perturbation theory.
//!
//! `cargo run --release --example perturbation_orders`

use ringflow::spectral::check_perturbation_orders;
use ringflow::CouplingSpec;

fn main() -> ringflow::Result<()> {
    let spec = CouplingSpec::delta_pair(0.5, 1.0)?;
    for n in [2, 5, 9] {
        let rep = check_perturbation_orders(&spec, 12, n, &[0.4, 0.3, 0.2, 0.1])?;
        println!(
            "n = {n}: eigenvalue error slopes {:.2?}, eigenvector leakage slopes {:.2?}",
            rep.eigen_slopes, rep.vector_slopes
        );
    }
    let rep = check_perturbation_orders(&spec, 12, 5, &[0.4, 0.3, 0.2, 0.1])?;
    rep.write_csv(std::io::stdout().lock())
}
