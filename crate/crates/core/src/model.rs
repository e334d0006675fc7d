//! Domain types: mode labels, bath coupling distributions, system
//! parameters, and the growth/non-degeneracy checks on the couplings.
//!
//! Couplings are described by their Fourier coefficients
//! `alpha_i(n) = ∫ e^{-inx} alpha_i(x) dx` on `[0, 2π)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::config::{fmt_f64, Section};
use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Frequency branch `±i sqrt(n^2 + 1)` of a field mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }
}

/// Eigenmode label `(±, n, σ)`.
///
/// `n >= 1` carries both a branch and `σ ∈ {1, 2}`, `n = 0` only a branch,
/// and the two bath modes `n = -1` only `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ModeIndex {
    branch: Option<Branch>,
    n: i64,
    sigma: Option<u8>,
}

impl ModeIndex {
    pub fn new(branch: Option<Branch>, n: i64, sigma: Option<u8>) -> Result<Self> {
        let ok = match n {
            n if n >= 1 => branch.is_some() && matches!(sigma, Some(1 | 2)),
            0 => branch.is_some() && sigma.is_none(),
            -1 => branch.is_none() && matches!(sigma, Some(1 | 2)),
            _ => false,
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "invalid mode label branch={branch:?} n={n} sigma={sigma:?}"
            )));
        }
        Ok(Self { branch, n, sigma })
    }

    pub fn field(branch: Branch, n: i64, sigma: u8) -> Result<Self> {
        Self::new(Some(branch), n, Some(sigma))
    }

    pub fn constant(branch: Branch) -> Self {
        Self {
            branch: Some(branch),
            n: 0,
            sigma: None,
        }
    }

    pub fn bath(sigma: u8) -> Result<Self> {
        Self::new(None, -1, Some(sigma))
    }

    pub fn branch(&self) -> Option<Branch> {
        self.branch
    }

    pub fn n(&self) -> i64 {
        self.n
    }

    pub fn sigma(&self) -> Option<u8> {
        self.sigma
    }

    pub fn is_bath(&self) -> bool {
        self.n == -1
    }

    /// Label of the complex-conjugate eigenpair.
    pub fn conjugate(&self) -> Self {
        Self {
            branch: self.branch.map(Branch::flip),
            ..*self
        }
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = |b: Branch| if b == Branch::Plus { "+" } else { "-" };
        match (self.branch, self.sigma) {
            (Some(br), Some(s)) => write!(f, "({},{},{})", b(br), self.n, s),
            (Some(br), None) => write!(f, "({},{})", b(br), self.n),
            (None, Some(s)) => write!(f, "(-1,{s})"),
            (None, None) => write!(f, "({})", self.n),
        }
    }
}

/// Declared constants `c1`, `c2` of the growth and non-degeneracy conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthBounds {
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CouplingKind {
    /// `alpha_1(n) = amp1 |n|^θ`, `alpha_2(n) = amp2 |n|^θ e^{-i n shift}`; at `n = 0` the amplitudes.
    PowerLaw { amp1: f64, amp2: f64, shift: f64 },
    /// `alpha_1 = δ(x)`, `alpha_2 = c δ(x - x1)`.
    DeltaPair { c: f64, x1: f64 },
    /// Tabulated coefficients for `n >= 0`; negative `n` follow by conjugation.
    CustomTable(BTreeMap<i64, (C64, C64)>),
}

/// The pair of bath coupling distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSpec {
    kind: CouplingKind,
    theta: f64,
    bounds: Option<GrowthBounds>,
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > -0.5 && theta < 0.25) {
        return Err(Error::InvalidParameter(format!(
            "growth exponent theta = {theta} must satisfy -1/2 < theta < 1/4"
        )));
    }
    Ok(())
}

impl CouplingSpec {
    pub fn delta_pair(c: f64, x1: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidParameter(format!("delta pair amplitude c = {c} must lie in (0, 1)")));
        }
        if !(x1 > 0.0 && x1 <= PI) {
            return Err(Error::InvalidParameter(format!("delta pair offset x1 = {x1} must lie in (0, π]")));
        }
        Ok(Self {
            kind: CouplingKind::DeltaPair { c, x1 },
            theta: 0.0,
            bounds: None,
        })
    }

    /// Delta pair without the `(0, π]` restriction on the offset.
    ///
    /// Used for mirror images `x1 -> 2π - x1`; the coefficients are the same formula.
    pub fn delta_pair_any_offset(c: f64, x1: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) || !x1.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid delta pair c = {c}, x1 = {x1}")));
        }
        Ok(Self {
            kind: CouplingKind::DeltaPair { c, x1 },
            theta: 0.0,
            bounds: None,
        })
    }

    pub fn power_law(theta: f64, amp1: f64, amp2: f64, shift: f64) -> Result<Self> {
        check_theta(theta)?;
        if !(amp1 > 0.0 && amp2 > 0.0 && shift.is_finite()) {
            return Err(Error::InvalidParameter(
                "power-law amplitudes must be positive and the shift finite".into(),
            ));
        }
        Ok(Self {
            kind: CouplingKind::PowerLaw { amp1, amp2, shift },
            theta,
            bounds: None,
        })
    }

    /// Builds a table from `(n, alpha_1(n), alpha_2(n))` rows.
    ///
    /// Rows with negative `n` must be the conjugates of the matching positive rows;
    /// `n = 0` coefficients must be real.
    pub fn custom_table(theta: f64, rows: impl IntoIterator<Item = (i64, C64, C64)>) -> Result<Self> {
        check_theta(theta)?;
        let mut table = BTreeMap::new();
        let mut negative = Vec::new();
        for (n, a1, a2) in rows {
            if !(a1.re.is_finite() && a1.im.is_finite() && a2.re.is_finite() && a2.im.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite coefficient at n = {n}")));
            }
            if n < 0 {
                negative.push((n, a1, a2));
                continue;
            }
            if n == 0 && (a1.im != 0.0 || a2.im != 0.0) {
                return Err(Error::InvalidParameter(
                    "n = 0 coefficients of real distributions must be real".into(),
                ));
            }
            if table.insert(n, (a1, a2)).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate table row n = {n}")));
            }
        }
        for (n, a1, a2) in negative {
            let (p1, p2) = table
                .get(&-n)
                .ok_or_else(|| Error::InvalidParameter(format!("row n = {n} has no positive partner")))?;
            let tol = 1e-12 * (1.0 + p1.norm() + p2.norm());
            if (a1 - p1.conj()).norm() > tol || (a2 - p2.conj()).norm() > tol {
                return Err(Error::InvalidParameter(format!(
                    "row n = {n} is not the conjugate of row n = {}",
                    -n
                )));
            }
        }
        if table.is_empty() {
            return Err(Error::InvalidParameter("empty coupling table".into()));
        }
        Ok(Self {
            kind: CouplingKind::CustomTable(table),
            theta,
            bounds: None,
        })
    }

    /// Reads a table from CSV rows `n, Re a1, Im a1, Re a2, Im a2`.
    ///
    /// Blank lines, `#` comments and a non-numeric header line are skipped.
    pub fn table_from_csv(theta: f64, text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(Error::Parse(format!("table line {}: expected 5 columns", lineno + 1)));
            }
            let Ok(n) = fields[0].parse::<i64>() else {
                if rows.is_empty() {
                    continue;
                }
                return Err(Error::Parse(format!("table line {}: bad index", lineno + 1)));
            };
            let mut v = [0.0; 4];
            for (slot, field) in v.iter_mut().zip(&fields[1..]) {
                *slot = field
                    .parse()
                    .map_err(|_| Error::Parse(format!("table line {}: bad number {field:?}", lineno + 1)))?;
            }
            rows.push((n, C64::new(v[0], v[1]), C64::new(v[2], v[3])));
        }
        Self::custom_table(theta, rows)
    }

    pub fn table_from_csv_file(theta: f64, path: &Path) -> Result<Self> {
        Self::table_from_csv(theta, &std::fs::read_to_string(path)?)
    }

    pub fn with_bounds(mut self, c1: f64, c2: f64) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0 && c1 <= c2) {
            return Err(Error::InvalidParameter(format!("bounds need 0 < c1 <= c2, got c1={c1}, c2={c2}")));
        }
        self.bounds = Some(GrowthBounds { c1, c2 });
        Ok(self)
    }

    pub fn kind(&self) -> &CouplingKind {
        &self.kind
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn bounds(&self) -> Option<GrowthBounds> {
        self.bounds
    }

    /// Largest `|n|` with defined coefficients, `None` when unbounded.
    pub fn max_index(&self) -> Option<i64> {
        match &self.kind {
            CouplingKind::CustomTable(t) => t.keys().next_back().copied(),
            _ => None,
        }
    }

    /// Fourier coefficients `(alpha_1(n), alpha_2(n))`.
    pub fn coupling_fourier(&self, n: i64) -> Result<(C64, C64)> {
        let (a1, a2) = match &self.kind {
            CouplingKind::DeltaPair { c, x1 } => {
                let phase = -(n as f64) * x1;
                (C64::new(1.0, 0.0), C64::from_polar(*c, phase))
            }
            CouplingKind::PowerLaw { amp1, amp2, shift } => {
                let scale = if n == 0 { 1.0 } else { (n.unsigned_abs() as f64).powf(self.theta) };
                let phase = if n == 0 { 0.0 } else { -(n as f64) * shift };
                (C64::new(amp1 * scale, 0.0), C64::from_polar(amp2 * scale, phase))
            }
            CouplingKind::CustomTable(t) => {
                let &(a1, a2) = t.get(&(n.abs())).ok_or(Error::OutOfRange { n })?;
                if n < 0 {
                    (a1.conj(), a2.conj())
                } else {
                    (a1, a2)
                }
            }
        };
        Ok((a1, a2))
    }

    pub fn to_section(&self, name: &str) -> Section {
        let mut s = Section::new(name);
        match &self.kind {
            CouplingKind::DeltaPair { c, x1 } => {
                s.set("kind", "delta_pair");
                s.set_f64("c", *c);
                s.set_f64("x1", *x1);
            }
            CouplingKind::PowerLaw { amp1, amp2, shift } => {
                s.set("kind", "power_law");
                s.set_f64("amp1", *amp1);
                s.set_f64("amp2", *amp2);
                s.set_f64("shift", *shift);
            }
            CouplingKind::CustomTable(t) => {
                s.set("kind", "table");
                for (n, (a1, a2)) in t {
                    s.set(
                        format!("row.{n}"),
                        format!("{},{},{},{}", fmt_f64(a1.re), fmt_f64(a1.im), fmt_f64(a2.re), fmt_f64(a2.im)),
                    );
                }
            }
        }
        s.set_f64("theta", self.theta);
        if let Some(b) = self.bounds {
            s.set_f64("c1", b.c1);
            s.set_f64("c2", b.c2);
        }
        s
    }

    /// Inverse of [`to_section`]; a `table_file` key loads rows from CSV instead of `row.N` keys.
    pub fn from_section(s: &Section) -> Result<Self> {
        let kind: String = s.require("kind")?;
        let theta: f64 = s.get_parsed("theta")?.unwrap_or(0.0);
        let spec = match kind.as_str() {
            "delta_pair" => {
                let spec = Self::delta_pair(s.require("c")?, s.require("x1")?)?;
                if theta != 0.0 {
                    return Err(Error::InvalidParameter("delta pair couplings have theta = 0".into()));
                }
                spec
            }
            "power_law" => Self::power_law(
                theta,
                s.get_parsed("amp1")?.unwrap_or(1.0),
                s.get_parsed("amp2")?.unwrap_or(0.5),
                s.get_parsed("shift")?.unwrap_or(1.0),
            )?,
            "table" => {
                if let Some(path) = s.get("table_file") {
                    Self::table_from_csv_file(theta, Path::new(path))?
                } else {
                    let mut rows = Vec::new();
                    for (k, v) in s.entries() {
                        let Some(idx) = k.strip_prefix("row.") else { continue };
                        let n: i64 = idx.parse().map_err(|_| Error::Parse(format!("bad row key {k}")))?;
                        let nums: Vec<f64> = v
                            .split(',')
                            .map(|x| x.trim().parse::<f64>())
                            .collect::<std::result::Result<_, _>>()
                            .map_err(|_| Error::Parse(format!("bad row value {v:?}")))?;
                        if nums.len() != 4 {
                            return Err(Error::Parse(format!("row {k} needs 4 numbers")));
                        }
                        rows.push((n, C64::new(nums[0], nums[1]), C64::new(nums[2], nums[3])));
                    }
                    Self::custom_table(theta, rows)?
                }
            }
            other => return Err(Error::Parse(format!("unknown coupling kind {other:?}"))),
        };
        match (s.get_parsed::<f64>("c1")?, s.get_parsed::<f64>("c2")?) {
            (Some(c1), Some(c2)) => spec.with_bounds(c1, c2),
            (None, None) => Ok(spec),
            _ => Err(Error::Parse("c1 and c2 must be given together".into())),
        }
    }
}

/// Outcome of checking the growth and non-degeneracy conditions on `1 <= n <= n_max`.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub n_max: i64,
    pub theta: f64,
    pub c1: f64,
    pub c2: f64,
    /// `true` when `c1`, `c2` are the tightest constants over the range rather than declared.
    pub bounds_inferred: bool,
    pub theta_in_range: bool,
    pub growth_violations: Vec<i64>,
    pub nondegeneracy_violations: Vec<i64>,
    /// Smallest slack of `c1 n^θ <= |alpha_i(n)| <= c2 n^θ`, relative to `n^θ`.
    pub growth_margin: f64,
    /// Smallest slack of `c1 (|a1|^2 + |a2|^2) <= |a1^2 + a2^2|^2`.
    pub nondegeneracy_margin: f64,
    /// Indices outside the tabulated range.
    pub missing: Vec<i64>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        format!(
            "growth violations at {:?}, non-degeneracy violations at {:?}, missing {:?}",
            self.growth_violations, self.nondegeneracy_violations, self.missing
        )
    }
}

// Values at or below this are treated as exact zeros when constants are inferred.
const ZERO_FLOOR: f64 = 1e-12;

/// Checks `c1 n^θ <= |alpha_i(n)| < c2 n^θ` and
/// `c1 (|alpha_1|^2 + |alpha_2|^2) <= |alpha_1^2 + alpha_2^2|^2` for `1 <= n <= n_max`.
///
/// The same `c1` is used in both conditions. Without declared bounds the
/// tightest constants over the range are inferred, and an index fails only
/// when it forces a constant to vanish.
pub fn validate_coupling(spec: &CouplingSpec, n_max: i64) -> Result<ValidationReport> {
    if n_max < 1 {
        return Err(Error::InvalidParameter(format!("n_max = {n_max} must be >= 1")));
    }
    let theta = spec.theta;
    let mut samples = Vec::with_capacity(n_max as usize);
    let mut missing = Vec::new();
    for n in 1..=n_max {
        match spec.coupling_fourier(n) {
            Ok((a1, a2)) => {
                let scale = (n as f64).powf(theta);
                let sum_sq = a1.norm_sqr() + a2.norm_sqr();
                let nd = (a1 * a1 + a2 * a2).norm_sqr();
                samples.push((n, a1.norm() / scale, a2.norm() / scale, sum_sq, nd));
            }
            Err(Error::OutOfRange { n }) => missing.push(n),
            Err(e) => return Err(e),
        }
    }

    let mut growth_violations = Vec::new();
    let mut nondegeneracy_violations = Vec::new();
    let (c1, c2, inferred) = match spec.bounds {
        Some(b) => (b.c1, b.c2, false),
        None => {
            let mut lo = f64::INFINITY;
            let mut hi: f64 = 0.0;
            for &(_, r1, r2, sum_sq, nd) in &samples {
                lo = lo.min(r1).min(r2);
                hi = hi.max(r1).max(r2);
                if sum_sq > 0.0 {
                    lo = lo.min(nd / sum_sq);
                }
            }
            (if lo.is_finite() { lo } else { 0.0 }, hi, true)
        }
    };

    let mut growth_margin = f64::INFINITY;
    let mut nd_margin = f64::INFINITY;
    for &(n, r1, r2, sum_sq, nd) in &samples {
        let g = (r1 - c1).min(r2 - c1).min(c2 - r1).min(c2 - r2);
        growth_margin = growth_margin.min(g);
        let d = nd - c1 * sum_sq;
        nd_margin = nd_margin.min(d);
        let (grow_bad, nd_bad) = if inferred {
            (
                r1 <= ZERO_FLOOR || r2 <= ZERO_FLOOR,
                nd <= ZERO_FLOOR * sum_sq * sum_sq,
            )
        } else {
            let tol = 1e-12;
            (g < -tol * c2.max(1.0), d < -tol * sum_sq.max(1.0))
        };
        if grow_bad {
            growth_violations.push(n);
        }
        if nd_bad {
            nondegeneracy_violations.push(n);
        }
    }
    let theta_in_range = theta > -0.5 && theta < 0.25;
    let passed =
        theta_in_range && growth_violations.is_empty() && nondegeneracy_violations.is_empty() && missing.is_empty();
    Ok(ValidationReport {
        n_max,
        theta,
        c1,
        c2,
        bounds_inferred: inferred,
        theta_in_range,
        growth_violations,
        nondegeneracy_violations,
        growth_margin,
        nondegeneracy_margin: nd_margin,
        missing,
        passed,
    })
}

/// Scalar nonlinearity `g` acting pointwise on the field.
#[derive(Clone)]
pub enum Nonlinearity {
    Zero,
    /// `amplitude * tanh(scale * y)`.
    Tanh { amplitude: f64, scale: f64 },
    /// `clamp(y, -clip, clip)^3`: the cubic made bounded and Lipschitz.
    ClippedCubic { clip: f64 },
    Custom(CustomNonlinearity),
}

/// User-provided bounded Lipschitz function with its declared constants.
#[derive(Clone)]
pub struct CustomNonlinearity {
    pub name: String,
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub bound: f64,
    pub lipschitz: f64,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::Zero => write!(f, "Zero"),
            Nonlinearity::Tanh { amplitude, scale } => write!(f, "Tanh({amplitude}, {scale})"),
            Nonlinearity::ClippedCubic { clip } => write!(f, "ClippedCubic({clip})"),
            Nonlinearity::Custom(c) => write!(f, "Custom({})", c.name),
        }
    }
}

impl Nonlinearity {
    pub fn tanh(amplitude: f64, scale: f64) -> Result<Self> {
        if !(amplitude >= 0.0 && scale > 0.0 && amplitude.is_finite() && scale.is_finite()) {
            return Err(Error::InvalidParameter("tanh nonlinearity needs amplitude >= 0, scale > 0".into()));
        }
        Ok(Nonlinearity::Tanh { amplitude, scale })
    }

    pub fn clipped_cubic(clip: f64) -> Result<Self> {
        if !(clip > 0.0 && clip.is_finite()) {
            return Err(Error::InvalidParameter("clipped cubic needs clip > 0".into()));
        }
        Ok(Nonlinearity::ClippedCubic { clip })
    }

    /// Wraps a custom function after spot-checking the declared constants.
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        bound: f64,
        lipschitz: f64,
    ) -> Result<Self> {
        let g = Nonlinearity::Custom(CustomNonlinearity {
            name: name.into(),
            f: Arc::new(f),
            bound,
            lipschitz,
        });
        g.spot_check(-10.0, 10.0, 2001)?;
        Ok(g)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Nonlinearity::Zero)
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Tanh { amplitude, scale } => amplitude * (scale * y).tanh(),
            Nonlinearity::ClippedCubic { clip } => y.clamp(-clip, *clip).powi(3),
            Nonlinearity::Custom(c) => (c.f)(y),
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Tanh { amplitude, .. } => *amplitude,
            Nonlinearity::ClippedCubic { clip } => clip.powi(3),
            Nonlinearity::Custom(c) => c.bound,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Tanh { amplitude, scale } => amplitude * scale,
            Nonlinearity::ClippedCubic { clip } => 3.0 * clip * clip,
            Nonlinearity::Custom(c) => c.lipschitz,
        }
    }

    /// Verifies the declared bound and Lipschitz constant on a uniform grid.
    pub fn spot_check(&self, lo: f64, hi: f64, points: usize) -> Result<()> {
        let points = points.max(2);
        let bound = self.bound();
        let lip = self.lipschitz();
        let step = (hi - lo) / (points - 1) as f64;
        let mut prev: Option<(f64, f64)> = None;
        for j in 0..points {
            let y = lo + step * j as f64;
            let v = self.eval(y);
            if !v.is_finite() || v.abs() > bound * (1.0 + 1e-12) + 1e-300 {
                return Err(Error::InvalidParameter(format!("g({y}) = {v} exceeds declared bound {bound}")));
            }
            if let Some((py, pv)) = prev {
                let slope = (v - pv).abs() / (y - py);
                if slope > lip * (1.0 + 1e-9) + 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "g has slope {slope} near y = {y}, above declared Lipschitz constant {lip}"
                    )));
                }
            }
            prev = Some((y, v));
        }
        Ok(())
    }

    pub fn to_section(&self, s: &mut Section) {
        match self {
            Nonlinearity::Zero => s.set("g", "zero"),
            Nonlinearity::Tanh { amplitude, scale } => {
                s.set("g", "tanh");
                s.set_f64("g_amplitude", *amplitude);
                s.set_f64("g_scale", *scale);
            }
            Nonlinearity::ClippedCubic { clip } => {
                s.set("g", "clipped_cubic");
                s.set_f64("g_clip", *clip);
            }
            Nonlinearity::Custom(c) => s.set("g", format!("custom:{}", c.name)),
        }
    }

    pub fn from_section(s: &Section) -> Result<Self> {
        match s.get("g").unwrap_or("zero") {
            "zero" => Ok(Nonlinearity::Zero),
            "tanh" => Nonlinearity::tanh(
                s.get_parsed("g_amplitude")?.unwrap_or(1.0),
                s.get_parsed("g_scale")?.unwrap_or(1.0),
            ),
            "clipped_cubic" => Nonlinearity::clipped_cubic(s.get_parsed("g_clip")?.unwrap_or(2.0)),
            other => Err(Error::Parse(format!("unknown nonlinearity {other:?}"))),
        }
    }
}

/// Cutoff, coupling strength, bath temperatures, and nonlinearity.
#[derive(Debug, Clone)]
pub struct SystemParams {
    pub m: usize,
    pub eta: f64,
    pub t1: f64,
    pub t2: f64,
    pub g: Nonlinearity,
}

impl SystemParams {
    pub fn new(m: usize, eta: f64, t1: f64, t2: f64) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidParameter("cutoff M must be >= 1".into()));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidParameter(format!("eta = {eta} must be finite and >= 0")));
        }
        if !(t1.is_finite() && t2.is_finite() && t1 >= 0.0 && t2 >= 0.0) {
            return Err(Error::InvalidParameter("temperatures must be finite and >= 0".into()));
        }
        Ok(Self {
            m,
            eta,
            t1,
            t2,
            g: Nonlinearity::Zero,
        })
    }

    pub fn with_nonlinearity(mut self, g: Nonlinearity) -> Self {
        self.g = g;
        self
    }

    pub fn temperatures(&self) -> [f64; 2] {
        [self.t1, self.t2]
    }

    pub fn to_section(&self, name: &str) -> Section {
        let mut s = Section::new(name);
        s.set("M", self.m.to_string());
        s.set_f64("eta", self.eta);
        s.set_f64("T1", self.t1);
        s.set_f64("T2", self.t2);
        self.g.to_section(&mut s);
        s
    }

    pub fn from_section(s: &Section) -> Result<Self> {
        let p = Self::new(s.require("M")?, s.require("eta")?, s.require("T1")?, s.require("T2")?)?;
        Ok(p.with_nonlinearity(Nonlinearity::from_section(s)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mode_index_invariants() {
        assert!(ModeIndex::field(Branch::Plus, 3, 1).is_ok());
        assert!(ModeIndex::new(Some(Branch::Plus), 3, None).is_err());
        assert!(ModeIndex::new(Some(Branch::Plus), 0, Some(1)).is_err());
        assert!(ModeIndex::new(Some(Branch::Minus), -1, Some(1)).is_err());
        assert!(ModeIndex::bath(2).is_ok());
        assert!(ModeIndex::bath(3).is_err());
        assert!(ModeIndex::new(None, -2, Some(1)).is_err());
        let m = ModeIndex::field(Branch::Plus, 4, 2).unwrap();
        assert_eq!(m.conjugate().branch(), Some(Branch::Minus));
        assert_eq!(m.to_string(), "(+,4,2)");
        assert_eq!(ModeIndex::bath(1).unwrap().to_string(), "(-1,1)");
    }

    #[test]
    fn delta_pair_coefficients() {
        let s = CouplingSpec::delta_pair(0.5, PI).unwrap();
        let (a1, a2) = s.coupling_fourier(2).unwrap();
        assert_abs_diff_eq!(a1.re, 1.0);
        assert_abs_diff_eq!(a2.re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a2.im, 0.0, epsilon = 1e-15);

        let s = CouplingSpec::delta_pair(0.3, 1.0).unwrap();
        let (_, a2) = s.coupling_fourier(1).unwrap();
        assert_abs_diff_eq!(a2.re, 0.3 * 1f64.cos(), epsilon = 1e-16);
        assert_abs_diff_eq!(a2.im, -0.3 * 1f64.sin(), epsilon = 1e-16);
    }

    #[test]
    fn delta_pair_passes_validation() {
        let s = CouplingSpec::delta_pair(0.5, 1.0).unwrap();
        let rep = validate_coupling(&s, 64).unwrap();
        assert!(rep.passed, "{}", rep.summary());
        assert!(rep.bounds_inferred);
        assert!(rep.c1 > 0.0);
    }

    #[test]
    fn degenerate_table_fails_nondegeneracy_everywhere() {
        let rows = (0..=10).map(|n| {
            let a2 = if n == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 1.0) };
            (n, C64::new(1.0, 0.0), a2)
        });
        let s = CouplingSpec::custom_table(0.0, rows).unwrap();
        let rep = validate_coupling(&s, 10).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.nondegeneracy_violations, (1..=10).collect::<Vec<_>>());
        assert!(rep.growth_violations.is_empty());
    }

    #[test]
    fn theta_bound_enforced_at_construction() {
        assert!(CouplingSpec::power_law(0.3, 1.0, 0.5, 1.0).is_err());
        assert!(CouplingSpec::power_law(-0.5, 1.0, 0.5, 1.0).is_err());
        assert!(CouplingSpec::power_law(0.2, 1.0, 0.5, 1.0).is_ok());
    }

    #[test]
    fn declared_bounds_report_violations() {
        let s = CouplingSpec::power_law(0.1, 1.0, 0.5, 1.0)
            .unwrap()
            .with_bounds(0.6, 2.0)
            .unwrap();
        let rep = validate_coupling(&s, 8).unwrap();
        assert!(!rep.bounds_inferred);
        // |alpha_2| / n^θ = 0.5 < c1 everywhere
        assert_eq!(rep.growth_violations, (1..=8).collect::<Vec<_>>());
        assert!(rep.growth_margin < 0.0);
    }

    #[test]
    fn table_range_and_missing_rows() {
        let s = CouplingSpec::table_from_csv(
            0.0,
            "n,re1,im1,re2,im2\n0,1,0,0.5,0\n1,1,0,0.2,0.3\n2,1,0,-0.1,0.4\n",
        )
        .unwrap();
        assert!(matches!(s.coupling_fourier(3), Err(Error::OutOfRange { n: 3 })));
        let (_, a2m) = s.coupling_fourier(-1).unwrap();
        assert_eq!(a2m, C64::new(0.2, -0.3));
        let rep = validate_coupling(&s, 4).unwrap();
        assert_eq!(rep.missing, vec![3, 4]);
        assert!(!rep.passed);
    }

    #[test]
    fn table_rejects_inconsistent_rows() {
        let bad_zero = CouplingSpec::custom_table(0.0, [(0, C64::new(1.0, 0.1), C64::new(1.0, 0.0))]);
        assert!(bad_zero.is_err());
        let bad_conj = CouplingSpec::custom_table(
            0.0,
            [(1, C64::new(1.0, 0.2), C64::new(1.0, 0.0)), (-1, C64::new(1.0, 0.2), C64::new(1.0, 0.0))],
        );
        assert!(bad_conj.is_err());
    }

    #[test]
    fn coupling_section_round_trip() {
        let specs = [
            CouplingSpec::delta_pair(0.5, 1.0).unwrap(),
            CouplingSpec::power_law(-0.2, 1.5, 0.7, 0.4).unwrap().with_bounds(0.1, 3.0).unwrap(),
            CouplingSpec::custom_table(0.0, [(0, C64::new(1.0, 0.0), C64::new(0.5, 0.0)), (1, C64::new(1.0, 0.0), C64::new(0.1, -0.4))])
                .unwrap(),
        ];
        for spec in specs {
            let back = CouplingSpec::from_section(&spec.to_section("coupling")).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn nonlinearity_spot_checks() {
        let g = Nonlinearity::tanh(0.5, 2.0).unwrap();
        g.spot_check(-5.0, 5.0, 1001).unwrap();
        assert_eq!(g.eval(0.0), 0.0);
        assert_abs_diff_eq!(g.eval(-1.0), -g.eval(1.0));
        Nonlinearity::clipped_cubic(1.5).unwrap().spot_check(-4.0, 4.0, 4001).unwrap();
        // sin has |g'| up to 1, so declaring 0.5 must fail
        assert!(Nonlinearity::custom("sin", f64::sin, 1.0, 0.5).is_err());
        assert!(Nonlinearity::custom("sin", f64::sin, 1.0, 1.0).is_ok());
        assert!(Nonlinearity::custom("big", |y| 2.0 * y.tanh(), 1.0, 2.0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::new(0, 0.1, 1.0, 1.0).is_err());
        assert!(SystemParams::new(4, -0.1, 1.0, 1.0).is_err());
        assert!(SystemParams::new(4, 0.1, f64::NAN, 1.0).is_err());
        let p = SystemParams::new(4, 0.1, 2.0, 1.0)
            .unwrap()
            .with_nonlinearity(Nonlinearity::tanh(0.3, 1.0).unwrap());
        let back = SystemParams::from_section(&p.to_section("system")).unwrap();
        assert_eq!(back.m, 4);
        assert_eq!(back.t1, 2.0);
        assert!(matches!(back.g, Nonlinearity::Tanh { .. }));
    }
}
