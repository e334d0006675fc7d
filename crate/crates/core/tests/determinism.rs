use ringflow::simulate::{estimate_current, Scheme, SimConfig};
use ringflow::{assemble_drift, CouplingSpec, Nonlinearity, SystemParams};

fn cfg(seed: u64, scheme: Scheme) -> SimConfig {
    SimConfig {
        dt: 0.5,
        burn_in_time: 50.0,
        sample_time: 4000.0,
        batches: 16,
        seed,
        chains: 3,
        scheme,
    }
}

#[test]
fn same_seed_same_estimate_on_any_pool() {
    let params = SystemParams::new(3, 0.5, 2.0, 1.0).unwrap();
    let ds = assemble_drift(&params, &CouplingSpec::delta_pair(0.5, 1.0).unwrap()).unwrap();
    let g = Nonlinearity::tanh(0.3, 1.0).unwrap();
    for scheme in [Scheme::ExactOu, Scheme::StrangSplit] {
        let g = if scheme == Scheme::ExactOu { Nonlinearity::Zero } else { g.clone() };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| estimate_current(&ds, &cfg(11, scheme), &g)).unwrap();
        let b = three.install(|| estimate_current(&ds, &cfg(11, scheme), &g)).unwrap();
        assert_eq!(a.batch_means, b.batch_means);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        let c = estimate_current(&ds, &cfg(12, scheme), &g).unwrap();
        assert_ne!(a.mean, c.mean);
    }
}
