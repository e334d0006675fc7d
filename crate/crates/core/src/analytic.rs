//! Limiting current as η → 0: the mode series, the δ-pair example `C(x₁)`,
//! and summation of these conditionally convergent series.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::fmt_f64;
use crate::error::{Error, Result};
use crate::model::CouplingSpec;
use crate::spectral::shift_data;

/// Term `n` of the limiting current, from the coupling coefficients.
pub fn theorem_term(spec: &CouplingSpec, n: i64, t1: f64, t2: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidParameter(format!("series terms start at n = 1, got {n}")));
    }
    let (a1, a2) = spec.coupling_fourier(n)?;
    let z = a1 * a1 + a2 * a2;
    let s = a1.norm_sqr() + a2.norm_sqr();
    if z.norm() <= 1e-14 * s || z.norm() == 0.0 {
        return Err(Error::DegenerateSum { n });
    }
    let im = (a1.conj() * a1.conj() * a2 * a2).im;
    let nf = n as f64;
    let den = (nf * nf + 1.0) * z.norm_sqr() + s * s;
    Ok(-((t1 - t2) / 2.0) / PI * nf * im / den)
}

/// The same term through the shifts: `-(ΔT/2)(1/2π) · 4nν(μ1-μ2)/((n²+1)(μ1-μ2)² + (μ1+μ2)²)`.
pub fn theorem_term_mu_nu(spec: &CouplingSpec, n: i64, t1: f64, t2: f64) -> Result<f64> {
    let sd = shift_data(spec, n)?;
    let nf = n as f64;
    let d = sd.mu1 - sd.mu2;
    let p = sd.mu1 + sd.mu2;
    Ok(-((t1 - t2) / 2.0) / (2.0 * PI) * 4.0 * nf * sd.nu * d / ((nf * nf + 1.0) * d * d + p * p))
}

/// Term `n` of `C(x₁)` for couplings `δ(x)` and `c δ(x - x₁)`.
pub fn example_term(c: f64, x1: f64, delta_t: f64, n: i64) -> f64 {
    let nf = n as f64;
    let (s, co) = (2.0 * nf * x1).sin_cos();
    let c2 = c * c;
    delta_t / (2.0 * PI) * nf * c2 * s / ((nf * nf + 1.0) * (1.0 + c2 * c2 + 2.0 * c2 * co) + (1.0 + c2).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum SumMethod {
    /// Midpoint of the two methods below.
    Consensus,
    /// (C,2) means with Richardson extrapolation in `1/N`.
    Cesaro,
    /// Abel means at `x = 1 - 2^{-k}` with Richardson extrapolation in `1 - x`.
    Abel,
}

impl std::str::FromStr for SumMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consensus" => Ok(Self::Consensus),
            "cesaro" => Ok(Self::Cesaro),
            "abel" => Ok(Self::Abel),
            other => Err(Error::Parse(format!("unknown summation method `{other}`"))),
        }
    }
}

impl SumMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Consensus => "consensus",
            Self::Cesaro => "cesaro",
            Self::Abel => "abel",
        }
    }
}

/// Default Cauchy tolerance on the last Cesàro increment.
pub const CAUCHY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SeriesResult {
    pub schema: u32,
    /// Raw partial sums `(N, S_N)` at `N = 2^k` and at `N_used`.
    pub partial_sums: Vec<(usize, f64)>,
    pub cesaro: f64,
    pub abel: f64,
    pub value: f64,
    pub error_estimate: f64,
    pub n_used: usize,
    pub method: SumMethod,
    /// Last increment of the extrapolated Cesàro value (`N/2 → N`).
    pub cesaro_increment: f64,
    pub converged: bool,
    /// `max_n n·|term(n)|`: the constant in `|term(n)| <= K/n`.
    pub decay_constant: f64,
}

fn cesaro2(a: &[f64]) -> f64 {
    let n = a.len() as f64;
    let norm = n * (n + 1.0);
    a.iter()
        .enumerate()
        .map(|(k, v)| {
            let k = k as f64;
            (n - k) * (n - k + 1.0) / norm * v
        })
        .sum()
}

/// Richardson tableau for values at step ratio 2 with error powers 1, 2, ...
fn richardson(vals: &[f64], levels: usize) -> f64 {
    let mut row = vals.to_vec();
    for lev in 1..=levels.min(vals.len() - 1) {
        let f = 2f64.powi(lev as i32);
        row = row.windows(2).map(|w| (f * w[1] - w[0]) / (f - 1.0)).collect();
    }
    *row.last().unwrap()
}

/// Extrapolated (C,2) value over prefixes N/8, N/4, N/2, N.
fn cesaro_extrapolated(a: &[f64]) -> f64 {
    let vals: Vec<f64> = (0..4).rev().map(|j| cesaro2(&a[..a.len() >> j])).collect();
    richardson(&vals, 3)
}

fn abel_extrapolated(a: &[f64]) -> Result<f64> {
    let kmax = ((a.len() as f64) / 40.0).log2().floor() as i32;
    if kmax < 7 {
        return Err(Error::InvalidParameter("too few terms for Abel means".into()));
    }
    let mut vals = Vec::new();
    for k in 4..=kmax {
        let x = 1.0 - 2f64.powi(-k);
        let mut p = 1.0;
        let mut s = 0.0;
        for v in a {
            p *= x;
            s += v * p;
        }
        vals.push(s);
    }
    let tail = &vals[vals.len() - 4..];
    Ok(richardson(tail, 3))
}

/// Sums `terms` (indexed from n = 1) with both methods.
pub fn sum_series(terms: &[f64], method: SumMethod) -> Result<SeriesResult> {
    let n = terms.len();
    if n < 16 {
        return Err(Error::InvalidParameter(format!("need at least 16 terms, got {n}")));
    }
    if terms.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("non-finite series term".into()));
    }
    let mut partial_sums = Vec::new();
    let mut s = 0.0;
    let mut next = 1usize;
    let mut decay_constant: f64 = 0.0;
    for (i, t) in terms.iter().enumerate() {
        s += t;
        decay_constant = decay_constant.max((i + 1) as f64 * t.abs());
        if i + 1 == next {
            partial_sums.push((next, s));
            next *= 2;
        }
    }
    if partial_sums.last().map(|p| p.0) != Some(n) {
        partial_sums.push((n, s));
    }

    let cesaro = cesaro_extrapolated(terms);
    let cesaro_half = cesaro_extrapolated(&terms[..n / 2]);
    let cesaro_increment = (cesaro - cesaro_half).abs();
    let abel = if n >= 40 * 128 { abel_extrapolated(terms)? } else { cesaro };
    let scale: f64 = terms.iter().map(|t| t.abs()).fold(0.0, f64::max);
    let floor = 1e3 * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    let (value, error_estimate) = match method {
        SumMethod::Consensus => (
            0.5 * (cesaro + abel),
            (cesaro - abel).abs().max(cesaro_increment).max(floor),
        ),
        SumMethod::Cesaro => (cesaro, cesaro_increment.max(floor)),
        SumMethod::Abel => (abel, (cesaro - abel).abs().max(floor)),
    };
    Ok(SeriesResult {
        schema: 1,
        partial_sums,
        cesaro,
        abel,
        value,
        error_estimate,
        n_used: n,
        method,
        cesaro_increment,
        converged: cesaro_increment <= CAUCHY_TOL,
        decay_constant,
    })
}

/// Limiting current `Σ_n theorem_term(n)` for `n ≤ N_max`, summed by `method`.
pub fn theorem_current(spec: &CouplingSpec, t1: f64, t2: f64, n_max: usize, method: SumMethod) -> Result<SeriesResult> {
    if n_max < 16 {
        return Err(Error::InvalidParameter(format!("N_max must be at least 16, got {n_max}")));
    }
    let terms = (1..=n_max as i64)
        .map(|n| theorem_term(spec, n, t1, t2))
        .collect::<Result<Vec<_>>>()?;
    sum_series(&terms, method)
}

/// Plain partial sum `Σ_{n=1}^{M} theorem_term(n)`, the finite-cutoff limit of the exact current.
pub fn truncated_series(spec: &CouplingSpec, t1: f64, t2: f64, m: usize) -> Result<f64> {
    (1..=m as i64).map(|n| theorem_term(spec, n, t1, t2)).sum()
}

fn check_example(c: f64, x1: f64) -> Result<()> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidParameter(format!("c must lie in (0, 1), got {c}")));
    }
    if !(x1 > 0.0 && x1 <= PI) {
        return Err(Error::InvalidParameter(format!("x1 must lie in (0, π], got {x1}")));
    }
    Ok(())
}

fn example_terms(c: f64, x1: f64, delta_t: f64, n_max: usize) -> Vec<f64> {
    (1..=n_max as i64).map(|n| example_term(c, x1, delta_t, n)).collect()
}

/// `C(x₁)` for `0 < c < 1`, `0 < x₁ <= π`.
pub fn example_current(c: f64, x1: f64, delta_t: f64, n_max: usize, method: SumMethod) -> Result<SeriesResult> {
    check_example(c, x1)?;
    sum_series(&example_terms(c, x1, delta_t, n_max), method)
}

/// `C(x₁)` at any real offset, reduced to `(0, π]` by `C(2π - x) = -C(x)`.
fn example_anywhere(c: f64, x1: f64, delta_t: f64, n_max: usize, method: SumMethod) -> Result<SeriesResult> {
    let x = x1.rem_euclid(2.0 * PI);
    if x == 0.0 {
        let zero = vec![0.0; n_max.max(16)];
        return sum_series(&zero, method);
    }
    if x <= PI {
        sum_series(&example_terms(c, x, delta_t, n_max), method)
    } else {
        let mut r = sum_series(&example_terms(c, 2.0 * PI - x, delta_t, n_max), method)?;
        r.value = -r.value;
        r.cesaro = -r.cesaro;
        r.abel = -r.abel;
        r.partial_sums.iter_mut().for_each(|p| p.1 = -p.1);
        Ok(r)
    }
}

/// `max |C(x) + C(2π - x)|` against the error estimates over `x`.
///
/// Both sides are summed from their own term sequences (no reduction), so
/// the check is not tautological.
pub fn antisymmetry_defect(c: f64, xs: &[f64], delta_t: f64, n_max: usize) -> Result<Vec<(f64, f64, f64)>> {
    xs.iter()
        .map(|&x| {
            let a = sum_series(&example_terms(c, x, delta_t, n_max), SumMethod::Consensus)?;
            let b = sum_series(&example_terms(c, 2.0 * PI - x, delta_t, n_max), SumMethod::Consensus)?;
            Ok((x, (a.value + b.value).abs(), a.error_estimate.max(b.error_estimate)))
        })
        .collect()
}

/// Sequence of values approaching `x0` from one side, plus the extrapolated limit.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OneSided {
    /// `(h, C(x0 ± h), errorEstimate)` with decreasing `h`.
    pub sequence: Vec<(f64, f64, f64)>,
    pub limit: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct JumpReport {
    pub x0: f64,
    pub left: OneSided,
    pub right: OneSided,
    /// `right.limit - left.limit`.
    pub jump: f64,
    pub error_estimate: f64,
    /// `|jump| > 10 · error_estimate`.
    pub detected: bool,
    /// Closed-form jump when `x0` is a rational multiple `pπ/q` with small `q`.
    pub predicted: Option<f64>,
}

/// Jump `C(x0+) - C(x0-)` at `x0 = pπ/q` (reduced, `q >= 1`).
///
/// For large `n` the summand is `(ΔT/2π) (c²/n) Σ_k (-c²)^{k-1} sin(2knx)`,
/// a superposition of sawtooth waves; the k-th one jumps by `π` wherever
/// `kx ∈ πℤ`. Only the multiples of `q` contribute at `pπ/q`, so every
/// rational multiple of π carries a jump of relative size `c^{2q}`.
pub fn rational_jump(c: f64, delta_t: f64, q: u32) -> f64 {
    let r = -c * c;
    delta_t / 2.0 * c * c * r.powi(q as i32 - 1) / (1.0 - r.powi(q as i32))
}

/// `(p, q)` with `|x - pπ/q| < tol` and the smallest `q <= q_max`.
pub fn rational_multiple_of_pi(x: f64, q_max: u32, tol: f64) -> Option<(i64, u32)> {
    (1..=q_max).find_map(|q| {
        let p = (x * q as f64 / PI).round();
        ((x - p * PI / q as f64).abs() < tol).then_some((p as i64, q))
    })
}

/// Smallest offset used for one-sided limits.
pub const JUMP_MIN_STEP: f64 = 1e-4;

fn one_sided(c: f64, x0: f64, side: f64, delta_t: f64, n_min: usize) -> Result<OneSided> {
    let mut hs = Vec::new();
    let mut h = 0.1;
    while h >= JUMP_MIN_STEP * 0.999 {
        hs.push(h);
        h /= 2.0;
    }
    let sequence = hs
        .par_iter()
        .map(|&h| {
            // the partial sums only resolve x0 ± h once N ≫ 1/h
            let n = n_min.max((256.0 / h).ceil() as usize);
            let r = example_anywhere(c, x0 + side * h, delta_t, n, SumMethod::Cesaro)?;
            Ok((h, r.value, r.error_estimate))
        })
        .collect::<Result<Vec<_>>>()?;
    let vals: Vec<f64> = sequence.iter().map(|s| s.1).collect();
    let k = vals.len();
    let limit = richardson(&vals[k - 3..], 2);
    let coarse = richardson(&vals[k - 4..k - 1], 2);
    let sum_err = sequence[k - 4..].iter().map(|s| s.2).fold(0.0, f64::max);
    Ok(OneSided {
        sequence,
        limit,
        error_estimate: (limit - coarse).abs().max(sum_err),
    })
}

/// One-sided limits of `C` at `x0`, by extrapolating `C(x0 ± h)` as `h → 0`
/// from `h = 0.1` halving down to `1e-4`.
pub fn jump_at(c: f64, x0: f64, delta_t: f64, n_max: usize) -> Result<JumpReport> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidParameter(format!("c must lie in (0, 1), got {c}")));
    }
    let left = one_sided(c, x0, -1.0, delta_t, n_max)?;
    let right = one_sided(c, x0, 1.0, delta_t, n_max)?;
    let jump = right.limit - left.limit;
    let error_estimate = left.error_estimate.max(right.error_estimate);
    Ok(JumpReport {
        x0,
        left,
        right,
        jump,
        error_estimate,
        detected: jump.abs() > 10.0 * error_estimate,
        predicted: rational_multiple_of_pi(x0, 12, 1e-12).map(|(_, q)| rational_jump(c, delta_t, q)),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScanRow {
    pub x1: f64,
    pub value: f64,
    pub error_estimate: f64,
    pub n_used: usize,
    pub jump_flag: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExampleScan {
    pub rows: Vec<ScanRow>,
    pub jumps: Vec<JumpReport>,
}

impl ExampleScan {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x1,value,error_estimate,n_used,jump_flag,jump_size")?;
        for r in &self.rows {
            let size = if r.jump_flag {
                self.jumps
                    .iter()
                    .filter(|j| j.detected)
                    .min_by(|a, b| (a.x0 - r.x1).abs().total_cmp(&(b.x0 - r.x1).abs()))
                    .map(|j| fmt_f64(j.jump))
                    .unwrap_or_default()
            } else {
                String::new()
            };
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_f64(r.x1),
                fmt_f64(r.value),
                fmt_f64(r.error_estimate),
                r.n_used,
                u8::from(r.jump_flag),
                size
            )?;
        }
        Ok(())
    }
}

/// Evenly spaced grid on `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Candidate discontinuities of a scan: the two points where jumps are
/// expected, plus interior intervals whose increment dwarfs the typical one.
fn jump_candidates(rows: &[ScanRow], f: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = Vec::new();
    let (lo, hi) = (rows[0].x1, rows[rows.len() - 1].x1);
    let near = |x: f64| x >= lo - 0.05 && x <= hi + 0.05;
    for x in [FRAC_PI_2, PI] {
        if near(x) {
            out.push(x);
        }
    }
    if rows.len() >= 5 {
        let mut d: Vec<f64> = rows.windows(2).map(|w| (w[1].value - w[0].value).abs()).collect();
        let diffs = d.clone();
        d.sort_by(f64::total_cmp);
        let median = d[d.len() / 2];
        for (i, di) in diffs.iter().enumerate() {
            let mid = 0.5 * (rows[i].x1 + rows[i + 1].x1);
            if *di > 20.0 * median && out.iter().all(|x| (x - mid).abs() > 2.0 * (rows[i + 1].x1 - rows[i].x1)) {
                out.push(bisect_jump(rows[i].x1, rows[i + 1].x1, rows[i].value, rows[i + 1].value, &f));
            }
        }
    }
    out
}

// narrows [a, b] to width 1e-4 keeping the half with the larger change
fn bisect_jump(mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, f: impl Fn(f64) -> f64) -> f64 {
    while b - a > JUMP_MIN_STEP {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if (fm - fa).abs() >= (fb - fm).abs() {
            b = m;
            fb = fm;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// Tabulates `C(x₁)` on `grid` and reports one-sided limits at candidate jumps.
pub fn scan_example(c: f64, grid: &[f64], delta_t: f64, n_max: usize) -> Result<ExampleScan> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty x1 grid".into()));
    }
    for &x in grid {
        check_example(c, x)?;
    }
    let mut rows = grid
        .par_iter()
        .map(|&x| {
            let r = example_current(c, x, delta_t, n_max, SumMethod::Consensus)?;
            Ok(ScanRow {
                x1: x,
                value: r.value,
                error_estimate: r.error_estimate,
                n_used: r.n_used,
                jump_flag: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let quick = |x: f64| {
        example_anywhere(c, x, delta_t, n_max, SumMethod::Cesaro)
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
    };
    let mut jumps = Vec::new();
    for x0 in jump_candidates(&rows, quick) {
        let rep = jump_at(c, x0, delta_t, n_max)?;
        if rep.detected {
            if let Some(r) = rows
                .iter_mut()
                .min_by(|a, b| (a.x1 - x0).abs().total_cmp(&(b.x1 - x0).abs()))
            {
                r.jump_flag = true;
            }
        }
        jumps.push(rep);
    }
    Ok(ExampleScan { rows, jumps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::C64;
    use approx::assert_abs_diff_eq;

    #[test]
    fn term_zero_at_equal_temperatures() {
        let spec = CouplingSpec::delta_pair(0.5, 1.0).unwrap();
        for n in 1..50 {
            assert_eq!(theorem_term(&spec, n, 1.3, 1.3).unwrap(), 0.0);
        }
    }

    #[test]
    fn term_zero_for_real_coefficients() {
        let spec = CouplingSpec::custom_table(0.0, [(0, C64::new(1.0, 0.0), C64::new(0.5, 0.0)), (1, C64::new(0.7, 0.0), C64::new(-0.2, 0.0))]).unwrap();
        assert_eq!(theorem_term(&spec, 1, 2.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn two_forms_of_the_term() {
        let spec = CouplingSpec::power_law(0.1, 1.0, 0.8, 1.1).unwrap();
        for n in 1..=200 {
            let a = theorem_term(&spec, n, 2.0, 1.0).unwrap();
            let b = theorem_term_mu_nu(&spec, n, 2.0, 1.0).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn example_matches_general_term() {
        for &(c, x1) in &[(0.5, 1.0), (0.2, 2.9), (0.8, 0.4)] {
            let spec = CouplingSpec::delta_pair(c, x1).unwrap();
            for n in 1..=500 {
                let a = theorem_term(&spec, n, 2.0, 1.0).unwrap();
                assert_abs_diff_eq!(a, example_term(c, x1, 1.0, n), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn cesaro_of_geometric_series() {
        // Σ (-1/2)^n from n = 1 converges to -1/3; (C,2) must not bias it at large N
        let terms: Vec<f64> = (1..=4096).map(|n| (-0.5f64).powi(n)).collect();
        let r = sum_series(&terms, SumMethod::Consensus).unwrap();
        assert_abs_diff_eq!(r.cesaro, -1.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.abel, -1.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn alternating_harmonic() {
        // Σ (-1)^{n+1}/n = ln 2, conditionally convergent
        let terms: Vec<f64> = (1..=100_000).map(|n| if n % 2 == 1 { 1.0 / n as f64 } else { -1.0 / n as f64 }).collect();
        let r = sum_series(&terms, SumMethod::Consensus).unwrap();
        assert_abs_diff_eq!(r.value, 2f64.ln(), epsilon = 1e-9);
        assert!(r.error_estimate < 1e-8);
        assert!(r.converged);
    }

    #[test]
    fn oscillating_series_with_known_sum() {
        // Σ sin(n t)/n = (π - t)/2 on (0, 2π)
        let t = 2.0;
        let terms: Vec<f64> = (1..=100_000).map(|n| (n as f64 * t).sin() / n as f64).collect();
        let r = sum_series(&terms, SumMethod::Consensus).unwrap();
        assert_abs_diff_eq!(r.value, (PI - t) / 2.0, epsilon = 1e-8);
        assert!((r.cesaro - r.abel).abs() <= r.error_estimate);
    }

    #[test]
    fn example_regression_value() {
        let r = example_current(0.5, 1.0, 1.0, 100_000, SumMethod::Consensus).unwrap();
        assert!(r.error_estimate < 1e-9, "{}", r.error_estimate);
        assert_abs_diff_eq!(r.value, 0.000585763794008, epsilon = 1e-12);
    }

    #[test]
    fn example_zeros() {
        for x1 in [PI, FRAC_PI_2] {
            let r = example_current(0.5, x1, 1.0, 100_000, SumMethod::Consensus).unwrap();
            assert!(r.value.abs() <= r.error_estimate, "{x1}: {} ± {}", r.value, r.error_estimate);
            assert!(r.error_estimate <= 1e-6);
        }
    }

    #[test]
    fn linear_in_temperature_difference() {
        let a = example_current(0.5, 0.7, 2.0, 20_000, SumMethod::Consensus).unwrap();
        let b = example_current(0.5, 0.7, 1.0, 20_000, SumMethod::Consensus).unwrap();
        assert_abs_diff_eq!(a.value, 2.0 * b.value, epsilon = 1e-15);
    }

    #[test]
    fn antisymmetric_under_mirror() {
        for (x, d, e) in antisymmetry_defect(0.5, &[0.3, 1.0, 2.0, 2.7], 1.0, 20_000).unwrap() {
            assert!(d <= e.max(1e-15), "x = {x}: defect {d}, estimate {e}");
        }
    }

    #[test]
    fn jump_at_quarter_turn() {
        let rep = jump_at(0.5, FRAC_PI_2, 1.0, 10_000).unwrap();
        assert!(rep.detected, "{rep:?}");
        // odd around π/2 via x -> π - x composed with the mirror
        assert_abs_diff_eq!(rep.left.limit, -rep.right.limit, epsilon = 10.0 * rep.error_estimate);
        assert!(rep.jump.abs() > 0.03);
    }

    #[test]
    fn scan_flags_both_jumps() {
        let grid = linear_grid(0.1, 3.14159, 60);
        let scan = scan_example(0.5, &grid, 1.0, 10_000).unwrap();
        let flagged: Vec<f64> = scan.rows.iter().filter(|r| r.jump_flag).map(|r| r.x1).collect();
        assert_eq!(flagged.len(), 2, "{flagged:?}");
        assert!((flagged[0] - FRAC_PI_2).abs() < 0.03);
        assert!((flagged[1] - PI).abs() < 0.03);
        let mut buf = Vec::new();
        scan.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 61);
    }

    #[test]
    fn jumps_match_sawtooth_prediction() {
        for (x0, q) in [(FRAC_PI_2, 2), (PI / 3.0, 3), (PI / 4.0, 4), (2.0 * PI / 3.0, 3)] {
            let rep = jump_at(0.5, x0, 1.0, 10_000).unwrap();
            let expect = rational_jump(0.5, 1.0, q);
            assert_eq!(rep.predicted, Some(expect));
            assert!(rep.detected, "x0 = {x0}");
            assert_abs_diff_eq!(rep.jump, expect, epsilon = 10.0 * rep.error_estimate + 1e-6);
        }
        // at π the two sides are C(π-) and C(π+) = -C(π-)
        let rep = jump_at(0.5, PI, 1.0, 10_000).unwrap();
        assert_abs_diff_eq!(rep.jump, rational_jump(0.5, 1.0, 1), epsilon = 10.0 * rep.error_estimate + 1e-6);
    }

    #[test]
    fn continuous_after_removing_rational_jumps() {
        // C minus its step discontinuities at pπ/q, q <= 8, is continuous on [0.3, 1.2]:
        // the largest successive difference shrinks in proportion to the step
        let steps: Vec<(f64, f64)> = (1..=8u32)
            .flat_map(|q| (1..=2 * q as i64).map(move |p| (p, q)))
            .filter(|(p, q)| rational_multiple_of_pi(*p as f64 * PI / *q as f64, 8, 1e-12) == Some((*p, *q)))
            .map(|(p, q)| (p as f64 * PI / q as f64, rational_jump(0.5, 1.0, q)))
            .collect();
        let smooth = |x: f64| {
            let v = example_current(0.5, x, 1.0, 20_000, SumMethod::Cesaro).unwrap().value;
            v - steps.iter().filter(|(x0, _)| *x0 < x).map(|(_, j)| j).sum::<f64>()
        };
        let maxd = |pts: usize| {
            let g = linear_grid(0.3, 1.2, pts);
            let v: Vec<f64> = g.iter().map(|&x| smooth(x)).collect();
            v.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
        };
        let (coarse, fine) = (maxd(19), maxd(73));
        assert!(fine < 0.4 * coarse, "coarse {coarse}, fine {fine}");
    }

    #[test]
    fn sawtooth_steps_are_not_visible_on_plain_grids() {
        // on an ordinary scan only π/2 and π stand out
        let scan = scan_example(0.5, &linear_grid(0.3, 1.2, 37), 1.0, 10_000).unwrap();
        assert!(scan.rows.iter().all(|r| !r.jump_flag));
    }

    #[test]
    fn preconditions() {
        assert!(example_current(1.0, 1.0, 1.0, 1000, SumMethod::Cesaro).is_err());
        assert!(example_current(0.5, 3.5, 1.0, 1000, SumMethod::Cesaro).is_err());
        let spec = CouplingSpec::delta_pair(0.5, 1.0).unwrap();
        assert!(theorem_current(&spec, 2.0, 1.0, 8, SumMethod::Cesaro).is_err());
        assert!(theorem_term(&spec, 0, 2.0, 1.0).is_err());
    }
}
