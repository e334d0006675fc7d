//! Dense helpers on top of nalgebra: complex eigenvectors from a Schur form,
//! matrix exponentials, and log-log regression.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::C64;

pub fn to_complex(a: &DMatrix<f64>) -> DMatrix<C64> {
    a.map(|x| C64::new(x, 0.0))
}

/// Eigenvalues and right eigenvectors of a real square matrix.
///
/// Complex Schur form `A = U T Uᴴ`, then back substitution on the triangular
/// factor. Columns are returned with unit Euclidean norm.
pub fn complex_eigen(a: &DMatrix<f64>) -> Result<(Vec<C64>, DMatrix<C64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    let schur = to_complex(a)
        .try_schur(f64::EPSILON, 0)
        .ok_or_else(|| Error::Factorization("complex Schur iteration did not converge".into()))?;
    let (u, t) = schur.unpack();
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let smin = f64::EPSILON * scale;
    let lambdas: Vec<C64> = (0..n).map(|k| t[(k, k)]).collect();
    let mut vecs = DMatrix::<C64>::zeros(n, n);
    for k in 0..n {
        let lk = lambdas[k];
        let mut v = DVector::<C64>::zeros(n);
        v[k] = C64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for l in (j + 1)..=k {
                s += t[(j, l)] * v[l];
            }
            let mut d = t[(j, j)] - lk;
            if d.norm() < smin {
                d = C64::new(smin, 0.0);
            }
            v[j] = -s / d;
        }
        let mut e = &u * v;
        let nrm = e.norm();
        e /= C64::new(nrm, 0.0);
        vecs.set_column(k, &e);
    }
    Ok((lambdas, vecs))
}

/// Matrix exponential (Padé scaling and squaring).
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().exp()
}

/// `(e^{A t}, ∫_0^t e^{As} Q e^{Aᵀs} ds)`.
///
/// Van Loan's block exponential on a short step `h` with `‖A‖ h <= 1/2`, then
/// exact doubling `C_{2h} = C_h + P_h C_h P_hᵀ`, `P_{2h} = P_h²`. This avoids
/// exponentiating `-A t`, which overflows for long steps.
pub fn ou_propagator(a: &DMatrix<f64>, q: &DMatrix<f64>, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let norm = a.norm().max(1e-300);
    let mut k = 0u32;
    while t / 2f64.powi(k as i32) * norm > 0.5 && k < 200 {
        k += 1;
    }
    let h = t / 2f64.powi(k as i32);
    let (mut p, mut c) = van_loan(a, q, h);
    for _ in 0..k {
        c = &c + &p * &c * p.transpose();
        p = &p * &p;
    }
    let c = (&c + c.transpose()) * 0.5;
    debug_assert_eq!(c.nrows(), n);
    (p, c)
}

/// Van Loan block exponential for a single short step.
pub fn van_loan(a: &DMatrix<f64>, q: &DMatrix<f64>, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut big = DMatrix::<f64>::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&(-a * h));
    big.view_mut((0, n), (n, n)).copy_from(&(q * h));
    big.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * h));
    let e = expm(&big);
    let f22t = e.view((n, n), (n, n)).transpose();
    let f12 = e.view((0, n), (n, n)).into_owned();
    let c = &f22t * f12;
    (f22t, c)
}

/// Least-squares fit of `log y = slope log x + c`.
///
/// Returns `(slope, intercept, rms residual)`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Fit("need at least two points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Fit("log-log fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let c = my - slope * mx;
    let rms = (lx.iter().zip(&ly).map(|(x, y)| (y - slope * x - c).powi(2)).sum::<f64>() / n).sqrt();
    Ok((slope, c, rms))
}

/// Frobenius norm of `A X + X Aᵀ + Q`.
/// Dot product in doubled working precision (Ogita–Rump–Oishi `Dot2`).
pub fn dot2(x: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for (a, b) in x {
        let p = a * b;
        let pe = a.mul_add(b, -p);
        let t = s + p;
        let z = t - s;
        c += (s - (t - z)) + (p - z) + pe;
        s = t;
    }
    s + c
}

/// `AX + XAᵀ + Q` with every entry accumulated by [`dot2`].
///
/// Iterative refinement needs this: at weak damping the Lyapunov operator is
/// ill-conditioned and a plain residual is all rounding noise.
pub fn lyapunov_residual_accurate(a: &DMatrix<f64>, x: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let at = a.transpose();
    let mut r = DMatrix::zeros(n, n);
    for j in 0..n {
        let xc = x.column(j);
        let ac = at.column(j);
        for i in 0..n {
            let ar = at.column(i);
            let xr = x.column(i);
            // (AX)_ij = Σ_k A_ik X_kj ; (XAᵀ)_ij = Σ_k X_ik A_jk, X symmetric
            let terms = ar.iter().zip(xc.iter()).map(|(a, b)| (*a, *b)).chain(xr.iter().zip(ac.iter()).map(|(a, b)| (*a, *b)));
            r[(i, j)] = dot2(terms.chain(std::iter::once((q[(i, j)], 1.0))));
        }
    }
    r
}

pub fn lyapunov_residual(a: &DMatrix<f64>, x: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    (a * x + x * a.transpose() + q).norm()
}
