//! Stationary covariance of the truncated linear system, the expected
//! current as a trace, and its eigenbasis decomposition by pair class.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::config::fmt_f64;
use crate::error::{Error, Result};
use crate::linalg::{complex_eigen, dot2, lyapunov_residual, lyapunov_residual_accurate, ou_propagator, to_complex};
use crate::model::{ModeIndex, C64};
use crate::operator::{DriftSystem, Layout};
use crate::spectral::{EigenPair, Eigensystem};

/// Largest cutoff accepted by the vectorized solve (an `(4M+4)²` dense system).
pub const KRONECKER_MAX_CUTOFF: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum LyapunovMethod {
    /// Diagonalize `A`, divide by `-(λ_j + conj λ_k)`, transform back.
    Eigenbasis,
    /// Complex Bartels–Stewart on the Schur form of `A`.
    Schur,
    /// Dense solve of `(I⊗A + A⊗I) vec Σ = -vec Q`.
    Kronecker,
    /// `Σ(∞)` of `dΣ/dt = AΣ + ΣAᵀ + Q` by exact doubling of the flow.
    Integration,
}

impl LyapunovMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Eigenbasis => "eigenbasis",
            Self::Schur => "schur",
            Self::Kronecker => "kronecker",
            Self::Integration => "integration",
        }
    }
}

impl std::str::FromStr for LyapunovMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eigenbasis" => Ok(Self::Eigenbasis),
            "schur" => Ok(Self::Schur),
            "kronecker" => Ok(Self::Kronecker),
            "integration" => Ok(Self::Integration),
            other => Err(Error::Parse(format!("unknown Lyapunov method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StationaryCovariance {
    pub sigma: DMatrix<f64>,
    /// Frobenius norm of `AΣ + ΣAᵀ + Q`.
    pub residual: f64,
    /// `residual / ‖Q‖_F`.
    pub relative_residual: f64,
    pub method: LyapunovMethod,
    /// Smallest eigenvalue of Σ.
    pub min_eigenvalue: f64,
    layout: Layout,
}

impl StationaryCovariance {
    pub fn layout(&self) -> Layout {
        self.layout
    }
}

/// Largest real part among the eigenvalues of the drift.
pub fn spectral_abscissa(ds: &DriftSystem) -> f64 {
    ds.drift()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn check_stable(ds: &DriftSystem) -> Result<()> {
    if ds.eta() == 0.0 {
        return Err(Error::Unstable { re: 0.0 });
    }
    let a = ds.drift();
    // rounding bound on computed eigenvalues: eps·‖A‖₂, with ‖A‖₂ ≤ √(‖A‖₁‖A‖∞)
    let col = a.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max);
    let row = a.row_iter().map(|r| r.lp_norm(1)).fold(0.0, f64::max);
    let re = spectral_abscissa(ds);
    if !(re < -8.0 * f64::EPSILON * (col * row).sqrt().max(1.0)) {
        return Err(Error::Unstable { re });
    }
    Ok(())
}

struct EigenSolver {
    e: DMatrix<C64>,
    e_adj: DMatrix<C64>,
    f: DMatrix<C64>,
    f_adj: DMatrix<C64>,
    lam: Vec<C64>,
}

impl EigenSolver {
    fn new(a: &DMatrix<f64>) -> Result<Self> {
        let (lam, e) = complex_eigen(a)?;
        let f = e
            .clone()
            .try_inverse()
            .ok_or(Error::NotDiagonalizable(f64::INFINITY))?;
        Ok(Self {
            e_adj: e.adjoint(),
            f_adj: f.adjoint(),
            e,
            f,
            lam,
        })
    }

    fn solve(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = &self.f * to_complex(q) * &self.f_adj;
        for j in 0..x.nrows() {
            for k in 0..x.ncols() {
                x[(j, k)] = -x[(j, k)] / (self.lam[j] + self.lam[k].conj());
            }
        }
        let s = (&self.e * x * &self.e_adj).map(|z| z.re);
        (&s + s.transpose()) * 0.5
    }
}

struct SchurSolver {
    u: DMatrix<C64>,
    t: DMatrix<C64>,
}

impl SchurSolver {
    fn new(a: &DMatrix<f64>) -> Result<Self> {
        let (u, t) = to_complex(a)
            .try_schur(f64::EPSILON, 0)
            .ok_or_else(|| Error::Factorization("complex Schur iteration did not converge".into()))?
            .unpack();
        Ok(Self { u, t })
    }

    // T Y + Y Tᴴ = -Uᴴ Q U, solved column by column from the bottom right
    fn solve(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.t.nrows();
        let t = &self.t;
        let qq = self.u.adjoint() * to_complex(q) * &self.u;
        let mut y = DMatrix::<C64>::zeros(n, n);
        for j in (0..n).rev() {
            for i in (0..n).rev() {
                let mut s = -qq[(i, j)];
                for k in (i + 1)..n {
                    s -= t[(i, k)] * y[(k, j)];
                }
                for k in (j + 1)..n {
                    s -= y[(i, k)] * t[(j, k)].conj();
                }
                y[(i, j)] = s / (t[(i, i)] + t[(j, j)].conj());
            }
        }
        let s = (&self.u * y * self.u.adjoint()).map(|z| z.re);
        (&s + s.transpose()) * 0.5
    }
}

fn kronecker_solve(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let big = id.kronecker(a) + a.kronecker(&id);
    let rhs = nalgebra::DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let sol = big
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Factorization("singular Kronecker system".into()))?;
    let s = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&s + s.transpose()) * 0.5)
}

fn integrate(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let h = 0.5 / a.norm().max(1.0);
    let (mut p, mut s) = ou_propagator(a, q, h);
    for _ in 0..200 {
        let tail = &p * &s * p.transpose();
        s += &tail;
        p = &p * &p;
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::Factorization("integration diverged".into()));
        }
        if p.norm() < 1e-12 && tail.norm() <= 1e-16 * s.norm() {
            return Ok((&s + s.transpose()) * 0.5);
        }
    }
    Err(Error::Factorization("integration did not reach stationarity".into()))
}

/// Solves `AΣ + ΣAᵀ + Q = 0` for the stationary covariance.
///
/// Requires every eigenvalue of `A` strictly in the left half-plane; fails
/// with [`Error::Unstable`] otherwise (in particular at η = 0). The direct
/// methods are followed by up to three steps of residual correction.
/// Fails with [`Error::Inaccurate`] unless the residual is at most `tol·‖Q‖`.
pub fn stationary_covariance(ds: &DriftSystem, method: LyapunovMethod, tol: f64) -> Result<StationaryCovariance> {
    check_stable(ds)?;
    let a = ds.drift();
    let q = ds.diffusion();
    let q_norm = q.norm();

    // the forward error, not the residual, limits small currents; refine
    // against an extra-precise residual until the correction stalls
    let refine = |solve: &dyn Fn(&DMatrix<f64>) -> DMatrix<f64>| {
        let mut s = solve(q);
        for _ in 0..3 {
            let r = lyapunov_residual_accurate(a, &s, q);
            let d = solve(&r);
            let small = d.norm() <= 4.0 * f64::EPSILON * s.norm();
            s += d;
            if small {
                break;
            }
        }
        s
    };

    let sigma = match method {
        LyapunovMethod::Eigenbasis => {
            let solver = EigenSolver::new(a)?;
            refine(&|rhs| solver.solve(rhs))
        }
        LyapunovMethod::Schur => {
            let solver = SchurSolver::new(a)?;
            refine(&|rhs| solver.solve(rhs))
        }
        LyapunovMethod::Kronecker => {
            if ds.cutoff() > KRONECKER_MAX_CUTOFF {
                return Err(Error::MethodUnavailable(format!(
                    "the Kronecker solve is limited to M <= {KRONECKER_MAX_CUTOFF}"
                )));
            }
            kronecker_solve(a, q)?
        }
        LyapunovMethod::Integration => integrate(a, q)?,
    };

    if !sigma.iter().all(|v| v.is_finite()) {
        return Err(Error::Factorization("non-finite covariance".into()));
    }
    let residual = lyapunov_residual(a, &sigma, q);
    let relative_residual = residual / q_norm.max(f64::MIN_POSITIVE);
    if residual > tol * q_norm {
        return Err(Error::Inaccurate { residual: relative_residual, tol });
    }
    let min_eigenvalue = SymmetricEigen::new(sigma.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_eigenvalue < -tol.max(1e-12) * sigma.trace().abs() {
        return Err(Error::Inaccurate {
            residual: min_eigenvalue,
            tol,
        });
    }
    Ok(StationaryCovariance {
        sigma,
        residual,
        relative_residual,
        method,
        min_eigenvalue,
        layout: ds.layout(),
    })
}

/// `trace(B Σ)`: the expected ring-averaged current.
pub fn expected_current(cov: &StationaryCovariance, b: &DMatrix<f64>) -> f64 {
    let s = &cov.sigma;
    dot2(b.row_iter().enumerate().flat_map(|(i, row)| {
        row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(k, v)| (*v, s[(k, i)])).collect::<Vec<_>>()
    }))
}

/// Exact current of the truncated system through the eigenbasis solve.
pub fn exact_current(ds: &DriftSystem) -> Result<f64> {
    let cov = stationary_covariance(ds, LyapunovMethod::Eigenbasis, 1e-9)?;
    Ok(expected_current(&cov, ds.current_matrix()))
}

/// Threshold on `|conj λ_m + λ_n|` relative to `‖A‖`.
pub const RESONANCE_THRESHOLD: f64 = 1e-12;

fn pair_covariance(fm: [C64; 2], lm: C64, fnn: [C64; 2], ln: C64, t: [f64; 2], a_norm: f64) -> Result<C64> {
    let den = lm.conj() + ln;
    if den.norm() < RESONANCE_THRESHOLD * a_norm {
        return Err(Error::Resonance(den.norm()));
    }
    let num = fm[0].conj() * t[0] * fnn[0] + fm[1].conj() * t[1] * fnn[1];
    Ok(-num / den)
}

/// `E[conj(Φ(f_m)) Φ(f_n)] = -conj(f_{m,r})ᵀ diag(T) f_{n,r} / (conj λ_m + λ_n)`,
/// with `Φ(f) = Σ_k f_k u_k`.
pub fn mode_pair_covariance(eig: &Eigensystem, t: [f64; 2], m: &ModeIndex, n: &ModeIndex) -> Result<C64> {
    let layout = eig.layout();
    let find = |l: &ModeIndex| {
        eig.get(l)
            .ok_or_else(|| Error::InvalidParameter(format!("no eigenpair labeled {l}")))
    };
    let pm: &EigenPair = find(m)?;
    let pn: &EigenPair = find(n)?;
    pair_covariance(pm.left_bath(layout), pm.lambda, pn.left_bath(layout), pn.lambda, t, eig.drift_norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum PairClass {
    Diagonal,
    OffDiagonal,
    Antiresonant,
    NearResonant,
    BathModes,
}

impl PairClass {
    pub const ALL: [PairClass; 5] = [
        PairClass::Diagonal,
        PairClass::OffDiagonal,
        PairClass::Antiresonant,
        PairClass::NearResonant,
        PairClass::BathModes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Diagonal => "diagonal",
            Self::OffDiagonal => "offDiagonal",
            Self::Antiresonant => "antiresonant",
            Self::NearResonant => "nearResonant",
            Self::BathModes => "bathModes",
        }
    }

    pub fn of(m: &ModeIndex, n: &ModeIndex) -> Self {
        if m == n {
            Self::Diagonal
        } else if m.is_bath() || n.is_bath() {
            Self::BathModes
        } else if m.n() != n.n() {
            Self::OffDiagonal
        } else if m.branch() == n.branch() {
            Self::NearResonant
        } else {
            Self::Antiresonant
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassTotals {
    pub diagonal: f64,
    pub off_diagonal: f64,
    pub antiresonant: f64,
    pub near_resonant: f64,
    pub bath_modes: f64,
}

impl ClassTotals {
    pub fn get(&self, c: PairClass) -> f64 {
        match c {
            PairClass::Diagonal => self.diagonal,
            PairClass::OffDiagonal => self.off_diagonal,
            PairClass::Antiresonant => self.antiresonant,
            PairClass::NearResonant => self.near_resonant,
            PairClass::BathModes => self.bath_modes,
        }
    }

    fn slot(&mut self, c: PairClass) -> &mut f64 {
        match c {
            PairClass::Diagonal => &mut self.diagonal,
            PairClass::OffDiagonal => &mut self.off_diagonal,
            PairClass::Antiresonant => &mut self.antiresonant,
            PairClass::NearResonant => &mut self.near_resonant,
            PairClass::BathModes => &mut self.bath_modes,
        }
    }

    pub fn sum(&self) -> f64 {
        PairClass::ALL.iter().map(|c| self.get(*c)).sum()
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModeContribution {
    pub n: i64,
    pub near_resonant: f64,
    pub diagonal: f64,
    pub antiresonant: f64,
}

/// Class-binned eigenbasis evaluation of the current.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CurrentReport {
    pub schema: u32,
    /// `trace(BΣ)` from the direct solve.
    pub total: f64,
    /// Sum of all pair terms.
    pub term_sum: f64,
    /// Largest imaginary part left in any class sum (zero up to rounding).
    pub imaginary_residual: f64,
    pub by_class: ClassTotals,
    pub by_mode: Vec<ModeContribution>,
}

impl CurrentReport {
    /// `|term_sum - total| / |total|`.
    pub fn mismatch(&self) -> f64 {
        (self.term_sum - self.total).abs() / self.total.abs().max(f64::MIN_POSITIVE)
    }

    /// Rows `n,class,value`; classes not tied to a single `n`, the term sum and
    /// the trace total use `n = *`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,class,value")?;
        for m in &self.by_mode {
            writeln!(w, "{},diagonal,{}", m.n, fmt_f64(m.diagonal))?;
            writeln!(w, "{},nearResonant,{}", m.n, fmt_f64(m.near_resonant))?;
            writeln!(w, "{},antiresonant,{}", m.n, fmt_f64(m.antiresonant))?;
        }
        writeln!(w, "*,offDiagonal,{}", fmt_f64(self.by_class.off_diagonal))?;
        writeln!(w, "*,bathModes,{}", fmt_f64(self.by_class.bath_modes))?;
        writeln!(w, "*,termSum,{}", fmt_f64(self.term_sum))?;
        writeln!(w, "*,total,{}", fmt_f64(self.total))?;
        Ok(())
    }
}

/// Evaluates every term `(1/2π)⟨conj e_{m,π}, ∂ₓ e_{n,φ}⟩ · E[conj(Φ(f_m)) Φ(f_n)]`
/// and bins it by pair class.
pub fn decompose_current(eig: &Eigensystem, ds: &DriftSystem) -> Result<CurrentReport> {
    let t = ds.temperatures();
    let layout = ds.layout();
    let pairs = eig.pairs();
    let e = eig.right_matrix();
    let g = e.adjoint() * to_complex(ds.current_matrix_raw()) * &e;

    let mut sums: BTreeMap<PairClass, C64> = BTreeMap::new();
    let mut per_mode: BTreeMap<(i64, PairClass), C64> = BTreeMap::new();
    for (j, pm) in pairs.iter().enumerate() {
        let fm = pm.left_bath(layout);
        for (k, pn) in pairs.iter().enumerate() {
            let x = pair_covariance(fm, pm.lambda, pn.left_bath(layout), pn.lambda, t, eig.drift_norm())?;
            let term = g[(j, k)] * x;
            let class = PairClass::of(&pm.label, &pn.label);
            *sums.entry(class).or_default() += term;
            if !matches!(class, PairClass::OffDiagonal | PairClass::BathModes) {
                *per_mode.entry((pm.label.n(), class)).or_default() += term;
            }
        }
    }

    let mut by_class = ClassTotals {
        diagonal: 0.0,
        off_diagonal: 0.0,
        antiresonant: 0.0,
        near_resonant: 0.0,
        bath_modes: 0.0,
    };
    let mut imaginary_residual: f64 = 0.0;
    let mut term_sum = 0.0;
    for (c, v) in &sums {
        *by_class.slot(*c) = v.re;
        term_sum += v.re;
        imaginary_residual = imaginary_residual.max(v.im.abs());
    }
    let by_mode = (0..=layout.cutoff() as i64)
        .map(|n| {
            let get = |c| per_mode.get(&(n, c)).map(|z: &C64| z.re).unwrap_or(0.0);
            ModeContribution {
                n,
                near_resonant: get(PairClass::NearResonant),
                diagonal: get(PairClass::Diagonal),
                antiresonant: get(PairClass::Antiresonant),
            }
        })
        .collect();

    let cov = stationary_covariance(ds, LyapunovMethod::Eigenbasis, 1e-9)?;
    Ok(CurrentReport {
        schema: 1,
        total: expected_current(&cov, ds.current_matrix()),
        term_sum,
        imaginary_residual,
        by_class,
        by_mode,
    })
}
