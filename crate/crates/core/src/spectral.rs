//! Eigenvalue shifts of the coupled field modes, their perturbative
//! eigenvalues, and a labeled numerical eigendecomposition of the drift.
//!
//! At η = 0 every field frequency `±i sqrt(n^2+1)`, `n >= 1`, is doubly
//! degenerate (cos and sin). The coupling lifts the degeneracy at order η²
//! along the eigenvectors of the 2×2 matrix `M(n)`, whose eigenvalues are
//! `μ_{n,1} >= μ_{n,2}`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::fmt_f64;
use crate::error::{Error, Result};
use crate::linalg::{complex_eigen, loglog_slope, to_complex};
use crate::model::{Branch, CouplingSpec, ModeIndex, SystemParams, C64};
use crate::operator::{assemble_drift, omega_sq, DriftSystem, Layout};

/// Shift data of mode `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftData {
    pub n: i64,
    pub mu1: f64,
    pub mu2: f64,
    pub psi: f64,
    pub nu: f64,
}

/// The Hermitian matrix `M(n)`, row-major.
pub fn coupling_matrix(spec: &CouplingSpec, n: i64) -> Result<[[C64; 2]; 2]> {
    let (a1, a2) = spec.coupling_fourier(n)?;
    let s = C64::new(a1.norm_sqr() + a2.norm_sqr(), 0.0);
    let z = a1 * a1 + a2 * a2;
    Ok([[s, z], [z.conj(), s]])
}

/// `(μ_{n,1}, μ_{n,2}) = |a1|² + |a2|² ± |a1² + a2²|`.
pub fn mu_shifts(spec: &CouplingSpec, n: i64) -> Result<(f64, f64)> {
    if n < 1 {
        return Err(Error::InvalidParameter(format!("mu shifts need n >= 1, got {n}")));
    }
    let (a1, a2) = spec.coupling_fourier(n)?;
    let s = a1.norm_sqr() + a2.norm_sqr();
    let z = (a1 * a1 + a2 * a2).norm();
    Ok((s + z, (s - z).max(0.0)))
}

/// Phase `ψ_n = arg(a1² + a2²)` and `ν_n = Im(conj(a1)² a2²) / |a1² + a2²|`.
pub fn phase_and_nu(spec: &CouplingSpec, n: i64) -> Result<(f64, f64)> {
    let (a1, a2) = spec.coupling_fourier(n)?;
    let z = a1 * a1 + a2 * a2;
    let s = a1.norm_sqr() + a2.norm_sqr();
    if z.norm() <= 1e-14 * s || z.norm() == 0.0 {
        return Err(Error::DegenerateSum { n });
    }
    let nu = (a1.conj() * a1.conj() * a2 * a2).im / z.norm();
    Ok((z.arg(), nu))
}

pub fn shift_data(spec: &CouplingSpec, n: i64) -> Result<ShiftData> {
    let (mu1, mu2) = mu_shifts(spec, n)?;
    let (psi, nu) = phase_and_nu(spec, n)?;
    Ok(ShiftData { n, mu1, mu2, psi, nu })
}

/// `λ_n(0)`.
pub fn unperturbed_eigenvalue(mode: &ModeIndex) -> C64 {
    match mode.branch() {
        None => C64::new(-1.0, 0.0),
        Some(b) => C64::new(0.0, b.sign() * omega_sq(mode.n() as usize).sqrt()),
    }
}

/// Second-order eigenvalue `λ0 - η² κ / (2 (λ0 + 1))` with `λ0 = ±i sqrt(n²+1)`.
///
/// With `alpha(n) = ∫ e^{-inx} alpha(x) dx` the coupling strength of mode
/// `(n, σ)` is `κ = μ_{n,σ} / (2π)`; for `n = 0` it is `(a1(0)² + a2(0)²)/(2π)`.
/// Bath modes return the leading value `-1`.
pub fn perturbative_eigenvalue(spec: &CouplingSpec, eta: f64, mode: &ModeIndex) -> Result<C64> {
    let lambda0 = unperturbed_eigenvalue(mode);
    if mode.is_bath() {
        return Ok(lambda0);
    }
    let kappa = if mode.n() == 0 {
        let (a1, a2) = spec.coupling_fourier(0)?;
        (a1.re * a1.re + a2.re * a2.re) / (2.0 * PI)
    } else {
        let (mu1, mu2) = mu_shifts(spec, mode.n())?;
        let mu = if mode.sigma() == Some(1) { mu1 } else { mu2 };
        mu / (2.0 * PI)
    };
    Ok(lambda0 - eta * eta * kappa / (2.0 * (lambda0 + 1.0)))
}

/// Unit `(cos, sin)` momentum directions of the σ = 1 and σ = 2 profiles of mode `n >= 1`.
///
/// These are the eigenvectors of `Σ_i ⟨alpha_i, ·⟩ alpha_i` restricted to
/// `span{cos nx, sin nx}`; σ = 1 carries the larger shift.
pub fn sigma_profiles(ds: &DriftSystem, n: usize) -> [[f64; 2]; 2] {
    let m = ds.cutoff();
    let w = ds.pairings();
    let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
    for wi in w.iter() {
        let (c, s) = (wi[n], wi[m + n]);
        p += c * c;
        q += s * s;
        r += c * s;
    }
    let beta = 0.5 * (2.0 * r).atan2(p - q);
    let (sb, cb) = beta.sin_cos();
    [[cb, sb], [-sb, cb]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EigenSource {
    Perturbative,
    Numerical,
}

/// Labeled eigenvalue with right eigenvector and left functional.
///
/// Normalized so that `⟨f, e⟩ = 1` (real bilinear pairing) and, for `n >= 0`,
/// the momentum part of `e` has L² norm 1/2. Bath modes have unit `r` part.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub label: ModeIndex,
    pub lambda: C64,
    pub right: DVector<C64>,
    pub left: DVector<C64>,
    pub source: EigenSource,
}

impl EigenPair {
    /// The two bath components `f_r` of the left functional.
    pub fn left_bath(&self, layout: Layout) -> [C64; 2] {
        [self.left[layout.bath(0)], self.left[layout.bath(1)]]
    }

    /// Momentum block of the right vector.
    pub fn right_pi(&self, layout: Layout) -> DVector<C64> {
        self.right.rows(layout.pi_offset(), layout.field_dim()).into_owned()
    }

    pub fn right_phi(&self, layout: Layout) -> DVector<C64> {
        self.right.rows(0, layout.field_dim()).into_owned()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Eigen-residual tolerance relative to `‖A‖`.
    pub residual_tol: f64,
    /// Required ratio between the half-gap of unperturbed eigenvalues and the largest shift.
    pub separation_factor: f64,
    pub max_condition: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-9,
            separation_factor: 4.0,
            max_condition: 1e12,
        }
    }
}

/// Full labeled eigensystem of a drift matrix.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    layout: Layout,
    pairs: Vec<EigenPair>,
    a_norm: f64,
    pub eigen_residual: f64,
    pub biorthogonality_residual: f64,
    pub condition: f64,
}

impl Eigensystem {
    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn pairs(&self) -> &[EigenPair] {
        &self.pairs
    }

    pub fn drift_norm(&self) -> f64 {
        self.a_norm
    }

    pub fn get(&self, label: &ModeIndex) -> Option<&EigenPair> {
        self.pairs.iter().find(|p| p.label == *label)
    }

    /// Right eigenvectors as columns.
    pub fn right_matrix(&self) -> DMatrix<C64> {
        let cols: Vec<_> = self.pairs.iter().map(|p| p.right.clone()).collect();
        DMatrix::from_columns(&cols)
    }

    /// Left functionals as rows.
    pub fn left_matrix(&self) -> DMatrix<C64> {
        let rows: Vec<_> = self.pairs.iter().map(|p| p.left.transpose()).collect();
        DMatrix::from_rows(&rows)
    }

    pub fn lambdas(&self) -> Vec<C64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }
}

fn all_labels(m: usize) -> Vec<ModeIndex> {
    let mut out = Vec::with_capacity(4 * m + 4);
    for b in [Branch::Plus, Branch::Minus] {
        out.push(ModeIndex::constant(b));
        for n in 1..=m as i64 {
            for s in 1..=2u8 {
                out.push(ModeIndex::field(b, n, s).expect("valid label"));
            }
        }
    }
    out.push(ModeIndex::bath(1).expect("valid label"));
    out.push(ModeIndex::bath(2).expect("valid label"));
    out
}

/// Cluster key: `(branch, n)`, with the bath cluster keyed by `n = -1`.
type ClusterKey = (Option<Branch>, i64);

fn cluster_center(key: ClusterKey) -> C64 {
    match key.0 {
        None => C64::new(-1.0, 0.0),
        Some(b) => C64::new(0.0, b.sign() * omega_sq(key.1 as usize).sqrt()),
    }
}

/// Assigns the numerical eigenvector of a field mode its unperturbed profile.
fn unperturbed_vector(layout: Layout, label: &ModeIndex, profile: [f64; 2]) -> DVector<C64> {
    let mut e = DVector::<C64>::zeros(layout.dim());
    match label.branch() {
        None => {
            let s = label.sigma().unwrap() as usize - 1;
            e[layout.bath(s)] = C64::new(1.0, 0.0);
        }
        Some(b) => {
            let n = label.n() as usize;
            let omega = omega_sq(n).sqrt();
            let phi = C64::new(0.0, -b.sign() / omega);
            if n == 0 {
                e[layout.pi_cos(0)] = C64::new(0.5, 0.0);
                e[layout.phi_cos(0)] = phi * 0.5;
            } else {
                e[layout.pi_cos(n)] = C64::new(0.5 * profile[0], 0.0);
                e[layout.pi_sin(n)] = C64::new(0.5 * profile[1], 0.0);
                e[layout.phi_cos(n)] = phi * 0.5 * profile[0];
                e[layout.phi_sin(n)] = phi * 0.5 * profile[1];
            }
        }
    }
    e
}

fn finish(
    ds: &DriftSystem,
    labels: Vec<ModeIndex>,
    lambdas: Vec<C64>,
    rights: Vec<DVector<C64>>,
    source: EigenSource,
    opts: &EigenOptions,
) -> Result<Eigensystem> {
    let layout = ds.layout();
    let dim = layout.dim();
    let e = DMatrix::from_columns(&rights);
    let f = e
        .clone()
        .try_inverse()
        .ok_or(Error::NotDiagonalizable(f64::INFINITY))?;
    let condition = e.norm() * f.norm() / dim as f64;
    if !condition.is_finite() || condition > opts.max_condition {
        return Err(Error::NotDiagonalizable(condition));
    }
    let a = to_complex(ds.drift());
    let a_norm = ds.drift().norm();
    let mut eig_res: f64 = 0.0;
    for (k, lam) in lambdas.iter().enumerate() {
        let col = e.column(k);
        let r = (&a * col - col * *lam).norm() / col.norm();
        eig_res = eig_res.max(r);
    }
    if eig_res > opts.residual_tol * a_norm.max(1.0) {
        return Err(Error::Inaccurate {
            residual: eig_res,
            tol: opts.residual_tol * a_norm.max(1.0),
        });
    }
    let bi = (&f * &e - DMatrix::<C64>::identity(dim, dim))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let pairs = labels
        .into_iter()
        .zip(lambdas)
        .zip(rights)
        .enumerate()
        .map(|(k, ((label, lambda), right))| EigenPair {
            label,
            lambda,
            right,
            left: f.row(k).transpose(),
            source,
        })
        .collect();
    Ok(Eigensystem {
        layout,
        pairs,
        a_norm,
        eigen_residual: eig_res,
        biorthogonality_residual: bi,
        condition,
    })
}

/// Numerical eigendecomposition with labels `(±, n, σ)`.
///
/// Labels come from the nearest unperturbed eigenvalue, and inside a
/// degenerate pair from the overlap of the momentum part with the σ
/// profiles. At η = 0 the exact unperturbed system is returned.
pub fn eigendecompose(ds: &DriftSystem, opts: &EigenOptions) -> Result<Eigensystem> {
    let layout = ds.layout();
    let m = layout.cutoff();
    let profiles: Vec<[[f64; 2]; 2]> = (0..=m).map(|n| if n == 0 { [[1.0, 0.0], [0.0, 1.0]] } else { sigma_profiles(ds, n) }).collect();

    if ds.eta() == 0.0 {
        let labels = all_labels(m);
        let mut lambdas = Vec::with_capacity(labels.len());
        let mut rights = Vec::with_capacity(labels.len());
        for l in &labels {
            lambdas.push(unperturbed_eigenvalue(l));
            let prof = if l.n() >= 1 { profiles[l.n() as usize][l.sigma().unwrap() as usize - 1] } else { [1.0, 0.0] };
            rights.push(unperturbed_vector(layout, l, prof));
        }
        return finish(ds, labels, lambdas, rights, EigenSource::Perturbative, opts);
    }

    let (vals, vecs) = complex_eigen(ds.drift())?;

    let mut keys: Vec<ClusterKey> = vec![(None, -1)];
    for b in [Branch::Plus, Branch::Minus] {
        for n in 0..=m as i64 {
            keys.push((Some(b), n));
        }
    }
    let centers: Vec<C64> = keys.iter().map(|k| cluster_center(*k)).collect();
    // half-distance from each center to its nearest neighbour
    let half_gap: Vec<f64> = centers
        .iter()
        .enumerate()
        .map(|(i, c)| {
            0.5 * centers
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, d)| (c - d).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); keys.len()];
    for (idx, v) in vals.iter().enumerate() {
        let (best, dist) = centers
            .iter()
            .enumerate()
            .map(|(i, c)| (i, (v - c).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if opts.separation_factor * dist >= half_gap[best] {
            return Err(Error::AmbiguousLabels(format!(
                "eigenvalue {v} is shifted by {dist:.3e} from {}, not separated from the half-gap {:.3e}",
                centers[best], half_gap[best]
            )));
        }
        members[best].push(idx);
    }
    for (key, mem) in keys.iter().zip(&members) {
        let expect = if key.1 >= 1 || key.1 == -1 { 2 } else { 1 };
        if mem.len() != expect {
            return Err(Error::AmbiguousLabels(format!(
                "cluster {key:?} holds {} eigenvalues, expected {expect}",
                mem.len()
            )));
        }
    }

    let mut labels = Vec::with_capacity(layout.dim());
    let mut lambdas = Vec::with_capacity(layout.dim());
    let mut rights = Vec::with_capacity(layout.dim());
    for (key, mem) in keys.iter().zip(&members) {
        match key {
            (None, _) => {
                // bath pair: label by the dominant r component
                let v0 = vecs.column(mem[0]);
                let v1 = vecs.column(mem[1]);
                let r = |v: &nalgebra::DVectorView<C64>, s: usize| v[layout.bath(s)].norm();
                let direct = r(&v0.as_view(), 0) * r(&v1.as_view(), 1);
                let swapped = r(&v0.as_view(), 1) * r(&v1.as_view(), 0);
                let order = if direct >= swapped { [mem[0], mem[1]] } else { [mem[1], mem[0]] };
                for (s, &idx) in order.iter().enumerate() {
                    let mut e = vecs.column(idx).into_owned();
                    let pivot = e[layout.bath(s)];
                    let rnorm = (e[layout.bath(0)].norm_sqr() + e[layout.bath(1)].norm_sqr()).sqrt();
                    let phase = pivot.conj() / pivot.norm().max(f64::MIN_POSITIVE);
                    e *= phase / rnorm;
                    labels.push(ModeIndex::bath(s as u8 + 1)?);
                    lambdas.push(vals[idx]);
                    rights.push(e);
                }
            }
            (Some(Branch::Minus), _) => {
                // filled from the conjugate of the plus branch below
            }
            (Some(Branch::Plus), n) => {
                let n = *n as usize;
                let assigned: Vec<(ModeIndex, usize, [f64; 2])> = if n == 0 {
                    vec![(ModeIndex::constant(Branch::Plus), mem[0], [1.0, 0.0])]
                } else {
                    let prof = profiles[n];
                    let overlap = |idx: usize, s: usize| {
                        let v = vecs.column(idx);
                        let p = [v[layout.pi_cos(n)], v[layout.pi_sin(n)]];
                        let den = (p[0].norm_sqr() + p[1].norm_sqr()).sqrt().max(f64::MIN_POSITIVE);
                        (p[0] * prof[s][0] + p[1] * prof[s][1]).norm() / den
                    };
                    let direct = overlap(mem[0], 0) + overlap(mem[1], 1);
                    let swapped = overlap(mem[0], 1) + overlap(mem[1], 0);
                    let order = if direct >= swapped { [mem[0], mem[1]] } else { [mem[1], mem[0]] };
                    vec![
                        (ModeIndex::field(Branch::Plus, n as i64, 1)?, order[0], prof[0]),
                        (ModeIndex::field(Branch::Plus, n as i64, 2)?, order[1], prof[1]),
                    ]
                };
                for (label, idx, prof) in assigned {
                    let mut e = vecs.column(idx).into_owned();
                    let pi_norm = e.rows(layout.pi_offset(), layout.field_dim()).norm();
                    let ov = if n == 0 {
                        e[layout.pi_cos(0)]
                    } else {
                        e[layout.pi_cos(n)] * prof[0] + e[layout.pi_sin(n)] * prof[1]
                    };
                    let phase = ov.conj() / ov.norm().max(f64::MIN_POSITIVE);
                    e *= phase * (0.5 / pi_norm);
                    labels.push(label);
                    lambdas.push(vals[idx]);
                    rights.push(e);
                }
            }
        }
    }
    // minus branch as exact conjugates, keeping A real-consistent
    let plus: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].branch() == Some(Branch::Plus)).collect();
    for i in plus {
        labels.push(labels[i].conjugate());
        lambdas.push(lambdas[i].conj());
        rights.push(rights[i].map(|z| z.conj()));
    }
    finish(ds, labels, lambdas, rights, EigenSource::Numerical, opts)
}

/// Eigenvalue and eigenvector error exponents for mode `n` over an η grid.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub n: i64,
    pub cutoff: usize,
    pub rows: Vec<ScalingRow>,
    /// log-log slope of `|λ_num - λ_pert|` for σ = 1, 2.
    pub eigen_slopes: [f64; 2],
    pub eigen_fit_rms: [f64; 2],
    /// log-log slope of the cross-mode part of `e_{n,π}(η)` for σ = 1, 2.
    pub vector_slopes: [f64; 2],
    pub vector_fit_rms: [f64; 2],
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingRow {
    pub eta: f64,
    pub eigen_error: [f64; 2],
    pub cross_mode_norm: [f64; 2],
}

impl ScalingReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "eta,eigen_error_1,eigen_error_2,cross_mode_1,cross_mode_2,eigen_slope_1,eigen_slope_2,vector_slope_1,vector_slope_2")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                fmt_f64(r.eta),
                fmt_f64(r.eigen_error[0]),
                fmt_f64(r.eigen_error[1]),
                fmt_f64(r.cross_mode_norm[0]),
                fmt_f64(r.cross_mode_norm[1]),
                fmt_f64(self.eigen_slopes[0]),
                fmt_f64(self.eigen_slopes[1]),
                fmt_f64(self.vector_slopes[0]),
                fmt_f64(self.vector_slopes[1]),
            )?;
        }
        Ok(())
    }
}

/// Momentum-profile overlap of `pair` with each unperturbed mode `k`,
/// relative to the unperturbed norm 1/2: `k ↦ ‖P_k e_π‖ / (1/2)`.
pub fn cross_mode_coefficients(pair: &EigenPair, layout: Layout) -> Vec<(usize, f64)> {
    let m = layout.cutoff();
    (0..=m)
        .map(|k| {
            let mut s = pair.right[layout.pi_cos(k)].norm_sqr();
            if k >= 1 {
                s += pair.right[layout.pi_sin(k)].norm_sqr();
            }
            (k, 2.0 * s.sqrt())
        })
        .collect()
}

/// Fits the order of the eigenvalue error and of the cross-mode eigenvector
/// admixture of modes `(+, n, σ)` over `eta_grid`.
pub fn check_perturbation_orders(spec: &CouplingSpec, cutoff: usize, n: i64, eta_grid: &[f64]) -> Result<ScalingReport> {
    if eta_grid.len() < 4 {
        return Err(Error::InvalidParameter("eta grid needs at least 4 values".into()));
    }
    if eta_grid.windows(2).any(|w| !(w[1] < w[0])) || eta_grid.iter().any(|e| *e <= 0.0) {
        return Err(Error::InvalidParameter("eta grid must be positive and decreasing".into()));
    }
    if n < 1 || n as usize > cutoff {
        return Err(Error::InvalidParameter(format!("mode n = {n} outside 1..={cutoff}")));
    }
    let opts = EigenOptions::default();
    let mut rows = Vec::with_capacity(eta_grid.len());
    for &eta in eta_grid {
        let params = SystemParams::new(cutoff, eta, 1.0, 1.0)?;
        let ds = assemble_drift(&params, spec)?;
        let eig = eigendecompose(&ds, &opts)?;
        let layout = ds.layout();
        let mut eigen_error = [0.0; 2];
        let mut cross = [0.0; 2];
        for s in 0..2 {
            let label = ModeIndex::field(Branch::Plus, n, s as u8 + 1)?;
            let pair = eig.get(&label).expect("every label is present");
            let pert = perturbative_eigenvalue(spec, eta, &label)?;
            eigen_error[s] = (pair.lambda - pert).norm();
            if eigen_error[s] < 1e-13 * pair.lambda.norm() {
                return Err(Error::Fit(format!("eigenvalue error at eta = {eta} is at the rounding floor")));
            }
            cross[s] = cross_mode_coefficients(pair, layout)
                .into_iter()
                .filter(|(k, _)| *k as i64 != n)
                .map(|(_, c)| c * c)
                .sum::<f64>()
                .sqrt();
        }
        rows.push(ScalingRow {
            eta,
            eigen_error,
            cross_mode_norm: cross,
        });
    }
    let etas: Vec<f64> = rows.iter().map(|r| r.eta).collect();
    let mut eigen_slopes = [0.0; 2];
    let mut eigen_fit_rms = [0.0; 2];
    let mut vector_slopes = [0.0; 2];
    let mut vector_fit_rms = [0.0; 2];
    for s in 0..2 {
        let e: Vec<f64> = rows.iter().map(|r| r.eigen_error[s]).collect();
        let (sl, _, rms) = loglog_slope(&etas, &e)?;
        eigen_slopes[s] = sl;
        eigen_fit_rms[s] = rms;
        let v: Vec<f64> = rows.iter().map(|r| r.cross_mode_norm[s]).collect();
        let (sl, _, rms) = loglog_slope(&etas, &v)?;
        vector_slopes[s] = sl;
        vector_fit_rms[s] = rms;
    }
    Ok(ScalingReport {
        n,
        cutoff,
        rows,
        eigen_slopes,
        eigen_fit_rms,
        vector_slopes,
        vector_fit_rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn delta() -> CouplingSpec {
        CouplingSpec::delta_pair(0.5, 1.0).unwrap()
    }

    fn system(m: usize, eta: f64) -> DriftSystem {
        assemble_drift(&SystemParams::new(m, eta, 2.0, 1.0).unwrap(), &delta()).unwrap()
    }

    #[test]
    fn mu_single_coupling() {
        let spec = CouplingSpec::custom_table(0.0, [(0, C64::new(1.0, 0.0), C64::new(0.0, 0.0)), (1, C64::from_polar(1.0, 0.7), C64::new(0.0, 0.0))]).unwrap();
        let (m1, m2) = mu_shifts(&spec, 1).unwrap();
        assert_abs_diff_eq!(m1, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m2, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn mu_delta_pair_quarter_offset() {
        // |a|² sum = 1.25, |1 + 0.25 e^{-iπ}| = 0.75
        let spec = CouplingSpec::delta_pair(0.5, FRAC_PI_2).unwrap();
        let (m1, m2) = mu_shifts(&spec, 1).unwrap();
        assert_abs_diff_eq!(m1, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m2, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn mu_are_eigenvalues_of_coupling_matrix() {
        let spec = CouplingSpec::power_law(0.15, 1.3, 0.6, 0.9).unwrap();
        for n in 1..30 {
            let mm = coupling_matrix(&spec, n).unwrap();
            // Hermitian 2×2: eigenvalues from trace and determinant
            let tr = (mm[0][0] + mm[1][1]).re;
            let det = (mm[0][0] * mm[1][1] - mm[0][1] * mm[1][0]).re;
            let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
            let (m1, m2) = mu_shifts(&spec, n).unwrap();
            assert_abs_diff_eq!(m1, tr / 2.0 + disc, epsilon = 1e-12);
            assert_abs_diff_eq!(m2, tr / 2.0 - disc, epsilon = 1e-12);
        }
    }

    #[test]
    fn nu_delta_pair_closed_form() {
        for &(c, x1) in &[(0.5, 1.0), (0.3, 2.2), (0.9, 0.1)] {
            let spec = CouplingSpec::delta_pair(c, x1).unwrap();
            for n in 1..40i64 {
                let (_, nu) = phase_and_nu(&spec, n).unwrap();
                let t = 2.0 * n as f64 * x1;
                let expect = -c * c * t.sin() / (1.0 + c.powi(4) + 2.0 * c * c * t.cos()).sqrt();
                assert_abs_diff_eq!(nu, expect, epsilon = 1e-14);
            }
        }
        let spec = CouplingSpec::delta_pair(0.4, PI).unwrap();
        for n in 1..40 {
            assert!(phase_and_nu(&spec, n).unwrap().1.abs() < 1e-14);
        }
    }

    #[test]
    fn nu_vanishes_for_real_coefficients() {
        let spec = CouplingSpec::custom_table(0.0, [(0, C64::new(1.0, 0.0), C64::new(1.0, 0.0)), (1, C64::new(1.0, 0.0), C64::new(-0.3, 0.0))]).unwrap();
        assert_eq!(phase_and_nu(&spec, 1).unwrap().1, 0.0);
    }

    #[test]
    fn degenerate_sum_is_an_error() {
        let spec = CouplingSpec::custom_table(0.0, [(0, C64::new(1.0, 0.0), C64::new(1.0, 0.0)), (1, C64::new(1.0, 0.0), C64::new(0.0, 1.0))]).unwrap();
        assert!(matches!(phase_and_nu(&spec, 1), Err(Error::DegenerateSum { n: 1 })));
    }

    #[test]
    fn perturbative_eigenvalue_limits() {
        let spec = delta();
        let l = ModeIndex::field(Branch::Minus, 3, 2).unwrap();
        assert_eq!(perturbative_eigenvalue(&spec, 0.0, &l).unwrap(), C64::new(0.0, -(10f64).sqrt()));
        let eta = 0.3;
        for n in 1..10 {
            let (m1, _) = mu_shifts(&spec, n).unwrap();
            let l = ModeIndex::field(Branch::Plus, n, 1).unwrap();
            let lam = perturbative_eigenvalue(&spec, eta, &l).unwrap();
            let kappa = m1 / (2.0 * PI);
            assert_abs_diff_eq!(lam.re, -eta * eta * kappa / (2.0 * ((n * n) as f64 + 2.0)), epsilon = 1e-15);
        }
        assert_eq!(perturbative_eigenvalue(&spec, 0.3, &ModeIndex::bath(1).unwrap()).unwrap(), C64::new(-1.0, 0.0));
    }

    #[test]
    fn unperturbed_system_is_exact() {
        let ds = system(4, 0.0);
        let eig = eigendecompose(&ds, &EigenOptions::default()).unwrap();
        assert_eq!(eig.pairs().len(), 20);
        assert!(eig.eigen_residual < 1e-14);
        assert!(eig.biorthogonality_residual < 1e-12);
        for p in eig.pairs() {
            assert_eq!(p.lambda, unperturbed_eigenvalue(&p.label));
        }
    }

    #[test]
    fn numerical_matches_labels_and_normalization() {
        let ds = system(6, 0.3);
        let eig = eigendecompose(&ds, &EigenOptions::default()).unwrap();
        let layout = ds.layout();
        assert!(eig.biorthogonality_residual < 1e-10, "{}", eig.biorthogonality_residual);
        for p in eig.pairs() {
            let residual = (to_complex(ds.drift()) * &p.right - &p.right * p.lambda).norm();
            assert!(residual < 1e-9 * ds.drift().norm());
            let pairing: C64 = p.left.iter().zip(p.right.iter()).map(|(a, b)| a * b).sum();
            assert_abs_diff_eq!(pairing.re, 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(pairing.im, 0.0, epsilon = 1e-10);
            if !p.label.is_bath() {
                assert_abs_diff_eq!(p.right_pi(layout).norm(), 0.5, epsilon = 1e-12);
                let ratio = p.right_phi(layout) - p.right_pi(layout) / p.lambda;
                assert!(ratio.norm() < 1e-10);
            }
            assert!(p.lambda.re < 0.0, "{} has Re λ = {}", p.label, p.lambda.re);
            let conj = eig.get(&p.label.conjugate()).unwrap();
            assert_abs_diff_eq!((conj.lambda - p.lambda.conj()).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn numerical_near_perturbative_at_moderate_coupling() {
        let spec = delta();
        let ds = system(8, 0.5);
        let eig = eigendecompose(&ds, &EigenOptions::default()).unwrap();
        for n in 1..=8 {
            for s in 1..=2 {
                let l = ModeIndex::field(Branch::Plus, n, s).unwrap();
                let err = (eig.get(&l).unwrap().lambda - perturbative_eigenvalue(&spec, 0.5, &l).unwrap()).norm();
                assert!(err < 0.5f64.powi(4), "mode {l}: {err}");
            }
        }
    }

    #[test]
    fn strong_coupling_is_ambiguous() {
        let ds = system(8, 6.0);
        assert!(matches!(eigendecompose(&ds, &EigenOptions::default()), Err(Error::AmbiguousLabels(_))));
    }

    #[test]
    fn eigenvalue_error_is_fourth_order() {
        let rep = check_perturbation_orders(&delta(), 8, 4, &[0.4, 0.3, 0.2, 0.1]).unwrap();
        for s in 0..2 {
            assert!((rep.eigen_slopes[s] - 4.0).abs() <= 0.4, "{:?}", rep.eigen_slopes);
            assert!((rep.vector_slopes[s] - 2.0).abs() <= 0.3, "{:?}", rep.vector_slopes);
        }
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
    }

    #[test]
    fn cross_mode_coefficients_decay_away_from_n() {
        // far from n the admixture scales like 1/|n² - k²|
        let ds = system(24, 0.2);
        let eig = eigendecompose(&ds, &EigenOptions::default()).unwrap();
        let n = 3i64;
        let pair = eig.get(&ModeIndex::field(Branch::Plus, n, 1).unwrap()).unwrap();
        let coeffs = cross_mode_coefficients(pair, ds.layout());
        let scaled: Vec<f64> = coeffs
            .iter()
            .filter(|(k, _)| *k >= 8)
            .map(|(k, c)| c * ((*k * *k) as f64 - (n * n) as f64))
            .collect();
        let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = scaled.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.0 && hi / lo < 3.0, "scaled coefficients {scaled:?}");
    }

    #[test]
    fn grid_preconditions() {
        assert!(check_perturbation_orders(&delta(), 8, 4, &[0.4, 0.3, 0.2]).is_err());
        assert!(check_perturbation_orders(&delta(), 8, 4, &[0.1, 0.2, 0.3, 0.4]).is_err());
        assert!(check_perturbation_orders(&delta(), 8, 9, &[0.4, 0.3, 0.2, 0.1]).is_err());
    }
}
