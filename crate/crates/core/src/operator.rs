//! Truncated linear generator, bath diffusion, and the ring-averaged current
//! as matrices in a real orthonormal Fourier basis.
//!
//! Basis: `φ(x) = a_0/√(2π) + Σ_{n=1..M} (a_n cos nx + b_n sin nx)/√π`, the same
//! for `π(x)` with coefficients `pc_n`, `ps_n`, followed by the two bath
//! variables. The state vector is laid out as
//! `[a_0..a_M, b_1..b_M, pc_0..pc_M, ps_1..ps_M, r_1, r_2]`, dimension `4M + 4`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::config::fmt_f64;
use crate::error::{Error, Result};
use crate::model::{validate_coupling, CouplingSpec, SystemParams};

/// Index bookkeeping for the flattened state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    m: usize,
}

impl Layout {
    pub fn new(m: usize) -> Self {
        Self { m }
    }

    pub fn cutoff(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        4 * self.m + 4
    }

    pub fn phi_cos(&self, n: usize) -> usize {
        debug_assert!(n <= self.m);
        n
    }

    pub fn phi_sin(&self, n: usize) -> usize {
        debug_assert!(n >= 1 && n <= self.m);
        self.m + n
    }

    pub fn pi_cos(&self, n: usize) -> usize {
        debug_assert!(n <= self.m);
        2 * self.m + 1 + n
    }

    pub fn pi_sin(&self, n: usize) -> usize {
        debug_assert!(n >= 1 && n <= self.m);
        3 * self.m + 1 + n
    }

    pub fn bath(&self, i: usize) -> usize {
        debug_assert!(i < 2);
        4 * self.m + 2 + i
    }

    pub fn field_dim(&self) -> usize {
        2 * self.m + 1
    }

    /// Start of the momentum block.
    pub fn pi_offset(&self) -> usize {
        2 * self.m + 1
    }
}

/// Squared frequency `n^2 + 1` of mode `n`.
pub fn omega_sq(n: usize) -> f64 {
    (n * n) as f64 + 1.0
}

/// A point of the truncated phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedState {
    layout: Layout,
    values: DVector<f64>,
}

impl TruncatedState {
    pub fn zeros(m: usize) -> Self {
        let layout = Layout::new(m);
        Self {
            layout,
            values: DVector::zeros(layout.dim()),
        }
    }

    pub fn from_vector(m: usize, values: DVector<f64>) -> Result<Self> {
        let layout = Layout::new(m);
        if values.len() != layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("state has non-finite entries".into()));
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        self.values.as_mut_slice()
    }

    pub fn a(&self, n: usize) -> f64 {
        self.values[self.layout.phi_cos(n)]
    }
    pub fn b(&self, n: usize) -> f64 {
        self.values[self.layout.phi_sin(n)]
    }
    pub fn pc(&self, n: usize) -> f64 {
        self.values[self.layout.pi_cos(n)]
    }
    pub fn ps(&self, n: usize) -> f64 {
        self.values[self.layout.pi_sin(n)]
    }
    pub fn r(&self, i: usize) -> f64 {
        self.values[self.layout.bath(i)]
    }

    pub fn set(&mut self, index: usize, value: f64) {
        self.values[index] = value;
    }

    /// `½(‖π‖² + ‖∂ₓφ‖² + ‖φ‖² + |r|²)`.
    pub fn energy(&self) -> f64 {
        quadratic_energy(self.layout, self.values.as_slice())
    }

    /// Ring-averaged current `(1/2π) ∫ π ∂ₓφ dx`.
    pub fn current(&self) -> f64 {
        current_value(self.layout, self.values.as_slice())
    }
}

pub(crate) fn quadratic_energy(layout: Layout, u: &[f64]) -> f64 {
    let m = layout.cutoff();
    let mut e = 0.0;
    for n in 0..=m {
        let w2 = omega_sq(n);
        e += u[layout.pi_cos(n)].powi(2) + w2 * u[layout.phi_cos(n)].powi(2);
        if n >= 1 {
            e += u[layout.pi_sin(n)].powi(2) + w2 * u[layout.phi_sin(n)].powi(2);
        }
    }
    e += u[layout.bath(0)].powi(2) + u[layout.bath(1)].powi(2);
    0.5 * e
}

pub(crate) fn current_value(layout: Layout, u: &[f64]) -> f64 {
    let mut j = 0.0;
    for n in 1..=layout.cutoff() {
        j += n as f64 * (u[layout.pi_cos(n)] * u[layout.phi_sin(n)] - u[layout.pi_sin(n)] * u[layout.phi_cos(n)]);
    }
    j / (2.0 * PI)
}

/// Drift `A(η)`, diffusion `Q`, and current forms of the truncated system.
#[derive(Debug, Clone)]
pub struct DriftSystem {
    layout: Layout,
    eta: f64,
    temperatures: [f64; 2],
    a: DMatrix<f64>,
    q: DMatrix<f64>,
    b: DMatrix<f64>,
    b_raw: DMatrix<f64>,
    // ⟨alpha_i, basis_k⟩ over the momentum block
    pairings: [DVector<f64>; 2],
}

/// Checks the couplings on `1..=M`, then assembles.
pub fn assemble_drift(params: &SystemParams, spec: &CouplingSpec) -> Result<DriftSystem> {
    let report = validate_coupling(spec, params.m as i64)?;
    if !report.passed {
        return Err(Error::Validation(report.summary()));
    }
    assemble_drift_unchecked(params, spec)
}

/// Assembly without the coupling gate (the coefficients must still exist for `|n| <= M`).
pub fn assemble_drift_unchecked(params: &SystemParams, spec: &CouplingSpec) -> Result<DriftSystem> {
    let layout = Layout::new(params.m);
    let dim = layout.dim();
    let m = params.m;
    let eta = params.eta;

    let mut pairings = [DVector::zeros(layout.field_dim()), DVector::zeros(layout.field_dim())];
    for n in 0..=m {
        let (a1, a2) = spec.coupling_fourier(n as i64)?;
        for (i, alpha) in [a1, a2].into_iter().enumerate() {
            if n == 0 {
                pairings[i][0] = alpha.re / (2.0 * PI).sqrt();
            } else {
                // ∫ alpha cos nx = Re alpha(n), ∫ alpha sin nx = -Im alpha(n)
                pairings[i][n] = alpha.re / PI.sqrt();
                pairings[i][m + n] = -alpha.im / PI.sqrt();
            }
        }
    }

    let mut a = DMatrix::zeros(dim, dim);
    for n in 0..=m {
        let w2 = omega_sq(n);
        a[(layout.phi_cos(n), layout.pi_cos(n))] = 1.0;
        a[(layout.pi_cos(n), layout.phi_cos(n))] = -w2;
        if n >= 1 {
            a[(layout.phi_sin(n), layout.pi_sin(n))] = 1.0;
            a[(layout.pi_sin(n), layout.phi_sin(n))] = -w2;
        }
    }
    let off = layout.pi_offset();
    for (i, w) in pairings.iter().enumerate() {
        let col = layout.bath(i);
        for k in 0..layout.field_dim() {
            a[(off + k, col)] = -eta * w[k];
            a[(col, off + k)] = eta * w[k];
        }
        a[(col, col)] = -1.0;
    }

    let mut q = DMatrix::zeros(dim, dim);
    q[(layout.bath(0), layout.bath(0))] = params.t1;
    q[(layout.bath(1), layout.bath(1))] = params.t2;

    let b_raw = current_form_raw(m);
    let b = current_form(m);
    Ok(DriftSystem {
        layout,
        eta,
        temperatures: [params.t1, params.t2],
        a,
        q,
        b,
        b_raw,
        pairings,
    })
}

/// `π`-row by `φ`-column matrix of `(1/2π) ∫ π ∂ₓφ dx`.
pub fn current_form_raw(m: usize) -> DMatrix<f64> {
    let layout = Layout::new(m);
    let mut b = DMatrix::zeros(layout.dim(), layout.dim());
    for n in 1..=m {
        let k = n as f64 / (2.0 * PI);
        b[(layout.pi_cos(n), layout.phi_sin(n))] = k;
        b[(layout.pi_sin(n), layout.phi_cos(n))] = -k;
    }
    b
}

/// Symmetric `B` with `uᵀBu = (1/2π) Σ n (pc_n b_n - ps_n a_n)`.
pub fn current_form(m: usize) -> DMatrix<f64> {
    let raw = current_form_raw(m);
    (&raw + raw.transpose()) * 0.5
}

impl DriftSystem {
    pub fn layout(&self) -> Layout {
        self.layout
    }
    pub fn cutoff(&self) -> usize {
        self.layout.cutoff()
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn temperatures(&self) -> [f64; 2] {
        self.temperatures
    }
    pub fn drift(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn current_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn current_matrix_raw(&self) -> &DMatrix<f64> {
        &self.b_raw
    }
    /// `⟨alpha_i, e_k⟩` for the field basis functions `e_k` (cos block then sin block).
    pub fn pairings(&self) -> &[DVector<f64>; 2] {
        &self.pairings
    }

    /// Same drift with new bath temperatures.
    pub fn with_temperatures(&self, t1: f64, t2: f64) -> Self {
        let mut out = self.clone();
        out.temperatures = [t1, t2];
        out.q[(self.layout.bath(0), self.layout.bath(0))] = t1;
        out.q[(self.layout.bath(1), self.layout.bath(1))] = t2;
        out
    }

    pub fn apply(&self, u: &TruncatedState) -> Result<TruncatedState> {
        apply_drift(self, u)
    }

    /// Writes the three matrices as CSV blocks separated by `# name` lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (name, mat) in [("A", &self.a), ("Q", &self.q), ("B", &self.b)] {
            writeln!(w, "# {name}")?;
            for i in 0..mat.nrows() {
                let row: Vec<String> = (0..mat.ncols()).map(|j| fmt_f64(mat[(i, j)])).collect();
                writeln!(w, "{}", row.join(","))?;
            }
        }
        Ok(())
    }
}

/// Matrix-free `A u`.
pub fn apply_drift(ds: &DriftSystem, u: &TruncatedState) -> Result<TruncatedState> {
    if u.layout != ds.layout {
        return Err(Error::DimensionMismatch {
            expected: ds.layout.dim(),
            got: u.layout.dim(),
        });
    }
    let mut out = vec![0.0; ds.layout.dim()];
    apply_drift_slice(ds, u.values.as_slice(), &mut out);
    Ok(TruncatedState {
        layout: ds.layout,
        values: DVector::from_vec(out),
    })
}

pub(crate) fn apply_drift_slice(ds: &DriftSystem, u: &[f64], out: &mut [f64]) {
    let layout = ds.layout;
    let m = layout.cutoff();
    let off = layout.pi_offset();
    let nf = layout.field_dim();
    let r = [u[layout.bath(0)], u[layout.bath(1)]];
    for k in 0..nf {
        let n = if k <= m { k } else { k - m };
        out[k] = u[off + k];
        out[off + k] = -omega_sq(n) * u[k] - ds.eta * (ds.pairings[0][k] * r[0] + ds.pairings[1][k] * r[1]);
    }
    for i in 0..2 {
        let mut s = 0.0;
        for k in 0..nf {
            s += ds.pairings[i][k] * u[off + k];
        }
        out[layout.bath(i)] = -r[i] + ds.eta * s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn system(m: usize, eta: f64) -> DriftSystem {
        let p = SystemParams::new(m, eta, 2.0, 1.0).unwrap();
        assemble_drift(&p, &CouplingSpec::delta_pair(0.5, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn uncoupled_blocks() {
        let ds = system(1, 0.0);
        let a = ds.drift();
        let l = ds.layout();
        for n in 0..=1 {
            assert_eq!(a[(l.phi_cos(n), l.pi_cos(n))], 1.0);
            assert_eq!(a[(l.pi_cos(n), l.phi_cos(n))], -omega_sq(n));
        }
        assert_eq!(a[(l.phi_sin(1), l.pi_sin(1))], 1.0);
        assert_eq!(a[(l.pi_sin(1), l.phi_sin(1))], -2.0);
        assert_eq!(a[(l.bath(0), l.bath(0))], -1.0);
        assert_eq!(a[(l.bath(1), l.bath(1))], -1.0);
        let nonzero = a.iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 3 * 2 + 2);
    }

    #[test]
    fn trace_is_minus_two() {
        for (m, eta) in [(1, 0.0), (4, 0.3), (9, 1.7)] {
            assert_abs_diff_eq!(system(m, eta).drift().trace(), -2.0);
        }
    }

    #[test]
    fn diffusion_has_two_entries() {
        let ds = system(3, 0.2);
        let q = ds.diffusion();
        assert_eq!(q.iter().filter(|v| **v != 0.0).count(), 2);
        assert_eq!(q[(ds.layout().bath(0), ds.layout().bath(0))], 2.0);
    }

    #[test]
    fn coupling_blocks_are_antisymmetric_partners() {
        let ds = system(5, 0.7);
        let d = ds.drift() - system(5, 0.0).drift();
        let d_t = d.transpose();
        assert_abs_diff_eq!((&d + &d_t).norm(), 0.0, epsilon = 1e-14);
        let l = ds.layout();
        for i in 0..l.dim() {
            for j in 0..l.dim() {
                if d[(i, j)] != 0.0 {
                    let pi_r = i >= l.pi_offset() && i < l.bath(0) && j >= l.bath(0);
                    let r_pi = j >= l.pi_offset() && j < l.bath(0) && i >= l.bath(0);
                    assert!(pi_r || r_pi, "entry ({i},{j}) outside coupling blocks");
                }
            }
        }
        assert!(d.rank(1e-12) <= 4);
    }

    #[test]
    fn current_single_term() {
        let mut u = TruncatedState::zeros(3);
        let l = u.layout();
        u.set(l.phi_sin(1), 1.0);
        u.set(l.pi_cos(1), 1.0);
        assert_abs_diff_eq!(u.current(), 1.0 / (2.0 * PI), epsilon = 1e-16);
        let b = current_form(3);
        let q = u.as_vector().dot(&(&b * u.as_vector()));
        assert_abs_diff_eq!(q, 1.0 / (2.0 * PI), epsilon = 1e-16);

        assert_eq!(TruncatedState::zeros(3).current(), 0.0);

        let mut c = TruncatedState::zeros(3);
        c.set(l.phi_cos(0), 1.3);
        c.set(l.pi_cos(0), -0.4);
        assert_eq!(c.current(), 0.0);
    }

    #[test]
    fn current_support_is_equal_n_pairs() {
        let m = 4;
        let l = Layout::new(m);
        let b = current_form(m);
        for i in 0..l.dim() {
            for j in 0..l.dim() {
                if b[(i, j)] != 0.0 {
                    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                    let pair = (1..=m).any(|n| {
                        (lo == l.phi_sin(n) && hi == l.pi_cos(n)) || (lo == l.phi_cos(n) && hi == l.pi_sin(n))
                    });
                    assert!(pair);
                }
            }
        }
    }

    #[test]
    fn apply_matches_first_row_of_dynamics() {
        let ds = system(2, 0.0);
        let mut u = TruncatedState::zeros(2);
        let l = u.layout();
        u.set(l.pi_sin(2), 0.75);
        let du = ds.apply(&u).unwrap();
        assert_eq!(du.b(2), 0.75);
        let zero = ds.apply(&TruncatedState::zeros(2)).unwrap();
        assert!(zero.as_vector().iter().all(|v| *v == 0.0));
        assert!(ds.apply(&TruncatedState::zeros(3)).is_err());
    }

    #[test]
    fn rejects_invalid_coupling_unless_unchecked() {
        let rows = (0..=4).map(|n| (n, num_complex::Complex64::new(1.0, 0.0), num_complex::Complex64::new(0.0, if n == 0 { 0.0 } else { 1.0 })));
        let spec = CouplingSpec::custom_table(0.0, rows).unwrap();
        let p = SystemParams::new(4, 0.2, 1.0, 1.0).unwrap();
        assert!(matches!(assemble_drift(&p, &spec), Err(Error::Validation(_))));
        assert!(assemble_drift_unchecked(&p, &spec).is_ok());
    }

    proptest! {
        #[test]
        fn matrix_free_matches_dense(seed in proptest::collection::vec(-3.0f64..3.0, 20), eta in 0.0f64..2.0) {
            let ds = system(4, eta);
            let u = TruncatedState::from_vector(4, DVector::from_vec(seed)).unwrap();
            let dense = ds.drift() * u.as_vector();
            let free = ds.apply(&u).unwrap();
            prop_assert!((dense - free.as_vector()).norm() < 1e-12);
        }

        #[test]
        fn deterministic_flow_dissipates_through_baths(seed in proptest::collection::vec(-3.0f64..3.0, 28), eta in 0.0f64..2.0) {
            let ds = system(6, eta);
            let u = TruncatedState::from_vector(6, DVector::from_vec(seed)).unwrap();
            let du = ds.apply(&u).unwrap();
            // gradient of the quadratic energy dotted with the drift
            let mut de = 0.0;
            for n in 0..=6 {
                de += omega_sq(n) * u.a(n) * du.a(n) + u.pc(n) * du.pc(n);
                if n >= 1 {
                    de += omega_sq(n) * u.b(n) * du.b(n) + u.ps(n) * du.ps(n);
                }
            }
            de += u.r(0) * du.r(0) + u.r(1) * du.r(1);
            let rr = u.r(0).powi(2) + u.r(1).powi(2);
            prop_assert!((de + rr).abs() < 1e-10 * (1.0 + rr + u.as_vector().norm_squared()));
        }
    }
}
