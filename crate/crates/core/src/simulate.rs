//! Monte Carlo integration of the truncated stochastic system and
//! time-average current estimates with batch-means errors.
//!
//! Linear runs use the exact Gaussian transition over one step. With a
//! nonlinearity the step is a Strang splitting: half a kick of `-g(φ)` on the
//! momenta, the exact linear step, another half kick.
//!
//! Every chain owns a `ChaCha8` generator seeded with the run seed and
//! switched to stream number `chain`, so chains are independent and a run is
//! reproducible bit for bit regardless of the thread count.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{fmt_f64, Section};
use crate::error::{Error, Result};
use crate::linalg::ou_propagator;
use crate::model::Nonlinearity;
use crate::operator::{current_value, quadratic_energy, DriftSystem, Layout};
use crate::stationary::spectral_abscissa;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Scheme {
    ExactOu,
    StrangSplit,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::ExactOu => "exactOU",
            Self::StrangSplit => "strangSplit",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exactOU" | "exact-ou" | "exact" => Ok(Self::ExactOu),
            "strangSplit" | "strang-split" | "strang" => Ok(Self::StrangSplit),
            other => Err(Error::Parse(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SimConfig {
    pub dt: f64,
    pub burn_in_time: f64,
    pub sample_time: f64,
    pub batches: usize,
    pub seed: u64,
    pub chains: usize,
    pub scheme: Scheme,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            burn_in_time: 100.0,
            sample_time: 1e4,
            batches: 32,
            seed: 0,
            chains: 1,
            scheme: Scheme::ExactOu,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, g: &Nonlinearity) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.burn_in_time >= 0.0) {
            return bad(format!("burn-in time must be nonnegative, got {}", self.burn_in_time));
        }
        if self.batches < 8 {
            return bad(format!("need at least 8 batches, got {}", self.batches));
        }
        if self.chains < 1 {
            return bad("need at least one chain".into());
        }
        if !(self.sample_time >= self.batches as f64 * self.dt) {
            return bad(format!(
                "sample time {} is shorter than batches·dt = {}",
                self.sample_time,
                self.batches as f64 * self.dt
            ));
        }
        if self.scheme == Scheme::ExactOu && !g.is_zero() {
            return bad("the exactOU scheme only applies to g = 0; use strangSplit".into());
        }
        Ok(())
    }

    /// Steps per batch; the sample time is rounded down to whole batches.
    pub fn steps_per_batch(&self) -> usize {
        ((self.sample_time / self.dt / self.batches as f64).floor() as usize).max(1)
    }

    pub fn burn_in_steps(&self) -> usize {
        (self.burn_in_time / self.dt).ceil() as usize
    }

    pub fn to_section(&self, name: &str) -> Section {
        let mut s = Section::new(name);
        s.set_f64("dt", self.dt);
        s.set_f64("burn_in", self.burn_in_time);
        s.set_f64("sample_time", self.sample_time);
        s.set("batches", self.batches.to_string());
        s.set("seed", self.seed.to_string());
        s.set("chains", self.chains.to_string());
        s.set("scheme", self.scheme.name());
        s
    }

    pub fn from_section(s: &Section) -> Result<Self> {
        let d = Self::default();
        Ok(Self {
            dt: s.get_parsed("dt")?.unwrap_or(d.dt),
            burn_in_time: s.get_parsed("burn_in")?.unwrap_or(d.burn_in_time),
            sample_time: s.get_parsed("sample_time")?.unwrap_or(d.sample_time),
            batches: s.get_parsed("batches")?.unwrap_or(d.batches),
            seed: s.get_parsed("seed")?.unwrap_or(d.seed),
            chains: s.get_parsed("chains")?.unwrap_or(d.chains),
            scheme: s.get_parsed("scheme")?.unwrap_or(d.scheme),
        })
    }
}

/// Exact one-step transition `u' = P u + L ξ` with `P = e^{A dt}`,
/// `L Lᵀ = C_dt = ∫_0^dt e^{As} Q e^{Aᵀs} ds`.
#[derive(Debug, Clone)]
pub struct ExactPropagator {
    pub dt: f64,
    pub transition: DMatrix<f64>,
    pub noise_covariance: DMatrix<f64>,
    /// Lower-triangular factor of the noise covariance (zero when there is no noise).
    pub noise_factor: DMatrix<f64>,
    /// Diagonal jitter added before the factorization.
    pub jitter: f64,
}

impl ExactPropagator {
    pub fn new(ds: &DriftSystem, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let (p, c) = ou_propagator(ds.drift(), ds.diffusion(), dt);
        if !p.iter().chain(c.iter()).all(|v| v.is_finite()) {
            return Err(Error::Factorization("non-finite propagator".into()));
        }
        let tr = c.trace();
        let n = c.nrows();
        if tr == 0.0 {
            return Ok(Self {
                dt,
                transition: p,
                noise_factor: DMatrix::zeros(n, n),
                noise_covariance: c,
                jitter: 0.0,
            });
        }
        for jitter in [0.0, 1e-15, 1e-14, 1e-13, 1e-12] {
            let shifted = &c + DMatrix::<f64>::identity(n, n) * (jitter * tr);
            if let Some(ch) = shifted.cholesky() {
                return Ok(Self {
                    dt,
                    transition: p,
                    noise_factor: ch.l(),
                    noise_covariance: c,
                    jitter: jitter * tr,
                });
            }
        }
        Err(Error::Factorization(format!(
            "noise covariance over dt = {dt} is not positive definite even with jitter 1e-12·trace"
        )))
    }
}

/// Evaluation of `g(φ)` on a `4M`-point grid and projection back onto the modes.
#[derive(Debug, Clone)]
pub struct Collocation {
    layout: Layout,
    points: usize,
    // basis values at the grid points, field coordinate major
    cos: Vec<Vec<f64>>,
    sin: Vec<Vec<f64>>,
}

impl Collocation {
    pub fn new(layout: Layout) -> Self {
        let m = layout.cutoff();
        let points = (4 * m).max(4);
        let xs: Vec<f64> = (0..points).map(|j| 2.0 * PI * j as f64 / points as f64).collect();
        let c0 = 1.0 / (2.0 * PI).sqrt();
        let cn = 1.0 / PI.sqrt();
        let cos = (0..=m)
            .map(|n| xs.iter().map(|x| if n == 0 { c0 } else { cn * (n as f64 * x).cos() }).collect())
            .collect();
        let sin = (0..=m)
            .map(|n| xs.iter().map(|x| if n == 0 { 0.0 } else { cn * (n as f64 * x).sin() }).collect())
            .collect();
        Self { layout, points, cos, sin }
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Field values `φ(x_j)`.
    pub fn synthesize(&self, u: &[f64]) -> Vec<f64> {
        let l = self.layout;
        let mut out = vec![0.0; self.points];
        for n in 0..=l.cutoff() {
            let a = u[l.phi_cos(n)];
            let b = if n >= 1 { u[l.phi_sin(n)] } else { 0.0 };
            for j in 0..self.points {
                out[j] += a * self.cos[n][j] + b * self.sin[n][j];
            }
        }
        out
    }

    /// `π ← π - h · P[g(φ)]`.
    pub fn kick(&self, u: &mut [f64], g: &Nonlinearity, h: f64) {
        let l = self.layout;
        let vals: Vec<f64> = self.synthesize(u).into_iter().map(|y| g.eval(y)).collect();
        let w = 2.0 * PI / self.points as f64;
        for n in 0..=l.cutoff() {
            let pc: f64 = vals.iter().zip(&self.cos[n]).map(|(v, c)| v * c).sum();
            u[l.pi_cos(n)] -= h * w * pc;
            if n >= 1 {
                let ps: f64 = vals.iter().zip(&self.sin[n]).map(|(v, s)| v * s).sum();
                u[l.pi_sin(n)] -= h * w * ps;
            }
        }
    }
}

/// One-step integrator holding the propagator and work buffers.
#[derive(Debug, Clone)]
pub struct Stepper {
    layout: Layout,
    scheme: Scheme,
    g: Nonlinearity,
    prop: ExactPropagator,
    colloc: Option<Collocation>,
    p_rows: Vec<f64>,
    l_rows: Vec<f64>,
    noiseless: bool,
    tmp: Vec<f64>,
    z: Vec<f64>,
}

impl Stepper {
    pub fn new(ds: &DriftSystem, dt: f64, scheme: Scheme, g: Nonlinearity) -> Result<Self> {
        if scheme == Scheme::ExactOu && !g.is_zero() {
            return Err(Error::InvalidParameter("the exactOU scheme only applies to g = 0".into()));
        }
        let prop = ExactPropagator::new(ds, dt)?;
        let dim = ds.layout().dim();
        let row_major = |m: &DMatrix<f64>| (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect::<Vec<_>>();
        Ok(Self {
            layout: ds.layout(),
            scheme,
            colloc: (scheme == Scheme::StrangSplit && !g.is_zero()).then(|| Collocation::new(ds.layout())),
            g,
            p_rows: row_major(&prop.transition),
            l_rows: row_major(&prop.noise_factor),
            noiseless: prop.noise_factor.iter().all(|v| *v == 0.0),
            prop,
            tmp: vec![0.0; dim],
            z: vec![0.0; dim],
        })
    }

    pub fn propagator(&self) -> &ExactPropagator {
        &self.prop
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    fn linear_step<R: Rng>(&mut self, u: &mut [f64], rng: &mut R) {
        let dim = u.len();
        for i in 0..dim {
            let row = &self.p_rows[i * dim..(i + 1) * dim];
            self.tmp[i] = row.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
        }
        if !self.noiseless {
            for zi in self.z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            for i in 0..dim {
                let row = &self.l_rows[i * dim..i * dim + i + 1];
                self.tmp[i] += row.iter().zip(&self.z[..=i]).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        u.copy_from_slice(&self.tmp);
    }

    /// Advances `u` by one step `dt`.
    pub fn step<R: Rng>(&mut self, u: &mut [f64], rng: &mut R) -> Result<()> {
        if u.len() != self.layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.layout.dim(),
                got: u.len(),
            });
        }
        let h = 0.5 * self.prop.dt;
        if let Some(c) = &self.colloc {
            c.kick(u, &self.g, h);
        }
        self.linear_step(u, rng);
        if let Some(c) = &self.colloc {
            c.kick(u, &self.g, h);
        }
        Ok(())
    }
}

/// Convenience single step; builds the propagator on every call.
pub fn step<R: Rng>(ds: &DriftSystem, state: &mut DVector<f64>, dt: f64, scheme: Scheme, g: &Nonlinearity, rng: &mut R) -> Result<()> {
    let mut s = Stepper::new(ds, dt, scheme, g.clone())?;
    s.step(state.as_mut_slice(), rng)
}

/// Generator for chain `chain` of a run seeded with `seed`.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CurrentEstimate {
    pub schema: u32,
    pub mean: f64,
    pub stderr: f64,
    /// Batch means, chain by chain.
    pub batch_means: Vec<f64>,
    pub chain_means: Vec<f64>,
    /// `var(samples) / stderr²`.
    pub effective_samples: f64,
    pub samples: usize,
    pub sample_time: f64,
    /// `1 / min |Re λ|` over the drift eigenvalues.
    pub relaxation_time: f64,
    /// Whether the burn-in covered ten relaxation times.
    pub burn_in_ok: bool,
}

struct ChainOutput {
    batch_means: Vec<f64>,
    sum: f64,
    sum_sq: f64,
    count: usize,
}

fn run_chain(base: &Stepper, cfg: &SimConfig, chain: usize) -> Result<ChainOutput> {
    let mut stepper = base.clone();
    let layout = stepper.layout();
    let mut rng = chain_rng(cfg.seed, chain);
    let mut u = vec![0.0; layout.dim()];
    let check = |u: &[f64], k: usize| {
        let e = quadratic_energy(layout, u);
        if !e.is_finite() || e > 1e150 {
            return Err(Error::BlowUp { t: k as f64 * cfg.dt });
        }
        Ok(())
    };
    let burn = cfg.burn_in_steps();
    for k in 0..burn {
        stepper.step(&mut u, &mut rng)?;
        if k % 1024 == 0 {
            check(&u, k)?;
        }
    }
    check(&u, burn)?;
    let per_batch = cfg.steps_per_batch();
    let mut out = ChainOutput {
        batch_means: Vec::with_capacity(cfg.batches),
        sum: 0.0,
        sum_sq: 0.0,
        count: 0,
    };
    for b in 0..cfg.batches {
        let mut acc = 0.0;
        for _ in 0..per_batch {
            stepper.step(&mut u, &mut rng)?;
            let j = current_value(layout, &u);
            acc += j;
            out.sum_sq += j * j;
        }
        if !acc.is_finite() {
            return Err(Error::BlowUp {
                t: (burn + (b + 1) * per_batch) as f64 * cfg.dt,
            });
        }
        out.sum += acc;
        out.count += per_batch;
        out.batch_means.push(acc / per_batch as f64);
    }
    Ok(out)
}

/// Time average of the ring current after burn-in, with batch-means standard error.
pub fn estimate_current(ds: &DriftSystem, cfg: &SimConfig, g: &Nonlinearity) -> Result<CurrentEstimate> {
    cfg.validate(g)?;
    if ds.eta() == 0.0 {
        return Err(Error::InvalidParameter("estimating a stationary current needs eta > 0".into()));
    }
    let abscissa = spectral_abscissa(ds);
    let relaxation_time = if abscissa < 0.0 { 1.0 / -abscissa } else { f64::INFINITY };
    let stepper = Stepper::new(ds, cfg.dt, cfg.scheme, g.clone())?;
    let outputs = (0..cfg.chains)
        .into_par_iter()
        .map(|c| run_chain(&stepper, cfg, c))
        .collect::<Result<Vec<_>>>()?;

    let batch_means: Vec<f64> = outputs.iter().flat_map(|o| o.batch_means.iter().copied()).collect();
    let chain_means: Vec<f64> = outputs.iter().map(|o| o.sum / o.count as f64).collect();
    let samples: usize = outputs.iter().map(|o| o.count).sum();
    let mean = outputs.iter().map(|o| o.sum).sum::<f64>() / samples as f64;
    let nb = batch_means.len() as f64;
    let bm = batch_means.iter().sum::<f64>() / nb;
    let var_b = batch_means.iter().map(|v| (v - bm).powi(2)).sum::<f64>() / (nb - 1.0);
    let stderr = (var_b / nb).sqrt();
    let sum_sq: f64 = outputs.iter().map(|o| o.sum_sq).sum();
    let var = (sum_sq / samples as f64 - mean * mean).max(0.0);
    let effective_samples = if stderr > 0.0 { var / (stderr * stderr) } else { samples as f64 };
    Ok(CurrentEstimate {
        schema: 1,
        mean,
        stderr,
        batch_means,
        chain_means,
        effective_samples,
        samples,
        sample_time: samples as f64 * cfg.dt,
        relaxation_time,
        burn_in_ok: cfg.burn_in_time >= 10.0 * relaxation_time,
    })
}

/// `(t, current, energy)` of chain 0, recorded every `thin` steps for `steps` steps.
pub fn trajectory(ds: &DriftSystem, cfg: &SimConfig, g: &Nonlinearity, steps: usize, thin: usize) -> Result<Vec<(f64, f64, f64)>> {
    let mut stepper = Stepper::new(ds, cfg.dt, cfg.scheme, g.clone())?;
    let layout = ds.layout();
    let mut rng = chain_rng(cfg.seed, 0);
    let mut u = vec![0.0; layout.dim()];
    let thin = thin.max(1);
    let mut rows = Vec::with_capacity(steps / thin + 1);
    rows.push((0.0, current_value(layout, &u), quadratic_energy(layout, &u)));
    for k in 1..=steps {
        stepper.step(&mut u, &mut rng)?;
        if k % thin == 0 {
            let e = quadratic_energy(layout, &u);
            if !e.is_finite() {
                return Err(Error::BlowUp { t: k as f64 * cfg.dt });
            }
            rows.push((k as f64 * cfg.dt, current_value(layout, &u), e));
        }
    }
    Ok(rows)
}

pub fn write_trajectory_csv<W: Write>(rows: &[(f64, f64, f64)], mut w: W) -> Result<()> {
    writeln!(w, "t,current,energy")?;
    for (t, j, e) in rows {
        writeln!(w, "{},{},{}", fmt_f64(*t), fmt_f64(*j), fmt_f64(*e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CouplingSpec, SystemParams};
    use crate::operator::assemble_drift;

    fn system(m: usize, eta: f64, t1: f64, t2: f64) -> DriftSystem {
        let spec = CouplingSpec::delta_pair(0.5, 1.0).unwrap();
        assemble_drift(&SystemParams::new(m, eta, t1, t2).unwrap(), &spec).unwrap()
    }

    #[test]
    fn config_checks() {
        let g = Nonlinearity::tanh(1.0, 1.0).unwrap();
        let cfg = SimConfig::default();
        assert!(cfg.validate(&Nonlinearity::Zero).is_ok());
        assert!(cfg.validate(&g).is_err());
        let strang = SimConfig { scheme: Scheme::StrangSplit, ..cfg.clone() };
        assert!(strang.validate(&g).is_ok());
        assert!(SimConfig { batches: 4, ..cfg.clone() }.validate(&Nonlinearity::Zero).is_err());
        assert!(SimConfig { sample_time: 1.0, ..cfg.clone() }.validate(&Nonlinearity::Zero).is_err());
        let back = SimConfig::from_section(&strang.to_section("sim")).unwrap();
        assert_eq!(back, strang);
    }

    #[test]
    fn zero_temperature_step_dissipates() {
        let ds = system(3, 0.5, 0.0, 0.0);
        let mut s = Stepper::new(&ds, 0.3, Scheme::ExactOu, Nonlinearity::Zero).unwrap();
        let mut u: Vec<f64> = (0..ds.layout().dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut rng = chain_rng(1, 0);
        let mut e0 = quadratic_energy(ds.layout(), &u);
        let mut other = u.clone();
        let mut rng2 = chain_rng(99, 3);
        for _ in 0..50 {
            s.step(&mut u, &mut rng).unwrap();
            s.step(&mut other, &mut rng2).unwrap();
            assert_eq!(u, other);
            let e = quadratic_energy(ds.layout(), &u);
            assert!(e <= e0 * (1.0 + 1e-12));
            e0 = e;
        }
    }

    #[test]
    fn one_step_mean_is_transition() {
        let ds = system(2, 0.5, 2.0, 1.0);
        let mut s = Stepper::new(&ds, 0.5, Scheme::ExactOu, Nonlinearity::Zero).unwrap();
        let dim = ds.layout().dim();
        let u0: Vec<f64> = (0..dim).map(|i| 0.3 * i as f64 - 1.0).collect();
        let expect = &s.propagator().transition * DVector::from_vec(u0.clone());
        let cov = s.propagator().noise_covariance.clone();
        let mut rng = chain_rng(7, 0);
        let draws = 100_000;
        let mut mean = vec![0.0; dim];
        let mut second = DMatrix::<f64>::zeros(dim, dim);
        for _ in 0..draws {
            let mut u = u0.clone();
            s.step(&mut u, &mut rng).unwrap();
            let d = DVector::from_iterator(dim, u.iter().zip(expect.iter()).map(|(a, b)| a - b));
            for i in 0..dim {
                mean[i] += d[i];
            }
            second += &d * d.transpose();
        }
        second /= draws as f64;
        for i in 0..dim {
            let sd = cov[(i, i)].sqrt();
            assert!((mean[i] / draws as f64).abs() < 5.0 * sd / (draws as f64).sqrt() + 1e-15, "mean {i}");
            for j in 0..dim {
                // standard error of a sample covariance ≈ sqrt((σ_ii σ_jj + σ_ij²)/n)
                let se = ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)].powi(2)) / draws as f64).sqrt();
                assert!((second[(i, j)] - cov[(i, j)]).abs() < 5.0 * se + 1e-14, "cov ({i},{j})");
            }
        }
    }

    #[test]
    fn decoupled_bath_variance() {
        // η small: each r_i is close to an OU process with variance T_i/2
        let ds = system(1, 1e-3, 2.0, 0.5);
        let cfg = SimConfig {
            dt: 0.5,
            burn_in_time: 20.0,
            sample_time: 2e5,
            batches: 32,
            seed: 3,
            chains: 1,
            scheme: Scheme::ExactOu,
        };
        let mut s = Stepper::new(&ds, cfg.dt, cfg.scheme, Nonlinearity::Zero).unwrap();
        let l = ds.layout();
        let mut rng = chain_rng(cfg.seed, 0);
        let mut u = vec![0.0; l.dim()];
        for _ in 0..cfg.burn_in_steps() {
            s.step(&mut u, &mut rng).unwrap();
        }
        let per = cfg.steps_per_batch();
        let mut means = [Vec::new(), Vec::new()];
        for _ in 0..cfg.batches {
            let mut acc = [0.0; 2];
            for _ in 0..per {
                s.step(&mut u, &mut rng).unwrap();
                acc[0] += u[l.bath(0)].powi(2);
                acc[1] += u[l.bath(1)].powi(2);
            }
            for i in 0..2 {
                means[i].push(acc[i] / per as f64);
            }
        }
        for (i, t) in [2.0, 0.5].into_iter().enumerate() {
            let nb = means[i].len() as f64;
            let m = means[i].iter().sum::<f64>() / nb;
            let se = (means[i].iter().map(|v| (v - m).powi(2)).sum::<f64>() / (nb - 1.0) / nb).sqrt();
            assert!((m - t / 2.0).abs() < 3.0 * se + 1e-4, "bath {i}: {m} ± {se}");
        }
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let ds = system(2, 0.8, 2.0, 1.0);
        let cfg = SimConfig {
            dt: 0.5,
            burn_in_time: 10.0,
            sample_time: 400.0,
            batches: 8,
            seed: 11,
            chains: 3,
            scheme: Scheme::ExactOu,
        };
        let a = estimate_current(&ds, &cfg, &Nonlinearity::Zero).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| estimate_current(&ds, &cfg, &Nonlinearity::Zero).unwrap());
        assert_eq!(a.batch_means, b.batch_means);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.batch_means.len(), 24);
        let t1 = trajectory(&ds, &cfg, &Nonlinearity::Zero, 100, 10).unwrap();
        let t2 = trajectory(&ds, &cfg, &Nonlinearity::Zero, 100, 10).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(t1.len(), 11);
    }

    #[test]
    fn collocation_projects_trig_polynomials_exactly() {
        let l = Layout::new(3);
        let c = Collocation::new(l);
        let mut u = vec![0.0; l.dim()];
        u[l.phi_cos(2)] = 0.7;
        u[l.phi_sin(3)] = -0.4;
        u[l.phi_cos(0)] = 0.2;
        let lin = Nonlinearity::custom("identity", |y| y, 1e300, 1.0).unwrap();
        let mut v = u.clone();
        c.kick(&mut v, &lin, 1.0);
        for n in 0..=3 {
            assert!((v[l.pi_cos(n)] + u[l.phi_cos(n)]).abs() < 1e-14);
            if n >= 1 {
                assert!((v[l.pi_sin(n)] + u[l.phi_sin(n)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let ds = system(2, 0.8, 1.0, 1.0);
        let cfg = SimConfig {
            dt: 1.0,
            burn_in_time: 0.0,
            sample_time: 5e4,
            batches: 8,
            seed: 1,
            chains: 1,
            scheme: Scheme::StrangSplit,
        };
        // an anti-restoring force with a huge slope destabilizes the splitting
        let g = Nonlinearity::custom("repel", |y| -1e6 * y, 1e300, 1e6).unwrap();
        assert!(matches!(estimate_current(&ds, &cfg, &g), Err(Error::BlowUp { .. })));
    }
}
