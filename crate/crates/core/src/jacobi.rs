//! Finite windows of two-sided Jacobi matrices.
//!
//! Site `k` carries the diagonal entry `q_k`; `p_k` couples sites `k − 1` and
//! `k`. A window stores `q_k, p_k` for `k = offset .. offset + len` and closes
//! both ends with a [`TailModel`] so that the half-line resolvents
//!
//! ```text
//! r₊(z, s) = −1 / (z − q_s + p²_{s+1} r₊(z, s+1))
//! r₋(z, s) = −1 / (z − q_s + p²_s     r₋(z, s−1))
//! ```
//!
//! can be evaluated as continued fractions.

use std::io::{Read, Write};
use std::ops::RangeInclusive;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::solve_tridiagonal;

/// Minimal admissible distance between `z` and the spectral interval.
pub const GAP_MIN: f64 = 1e-6;
/// Target relative accuracy of continued-fraction evaluation.
pub const EPS_CF: f64 = 1e-13;
/// Default depth for truncated tails.
pub const DEFAULT_TRUNCATE_DEPTH: usize = 24;
/// Minimal depth for truncated tails.
pub const MIN_TRUNCATE_DEPTH: usize = 8;
/// Bound on `sup |q| + 2 sup p`.
pub const NORM_CAP: f64 = 1e12;

/// Closure of a window beyond its stored entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TailModel {
    /// `p_k = p`, `q_k = q` beyond the window.
    Constant { p: f64, q: f64 },
    /// `p_k = p[k mod m]`, `q_k = q[k mod m]` with absolute indices `k`.
    Periodic { p: Vec<f64>, q: Vec<f64> },
    /// Unknown beyond the window; continued fractions start at the edge and
    /// need at least `depth` stored entries.
    Truncate { depth: usize },
}

impl TailModel {
    pub fn truncate() -> Self {
        TailModel::Truncate { depth: DEFAULT_TRUNCATE_DEPTH }
    }

    fn validate(&self) -> Result<()> {
        match self {
            TailModel::Constant { p, q } => {
                if !(*p > 0.0 && p.is_finite() && q.is_finite()) {
                    return Err(Error::InvalidWindow(format!("constant tail needs p > 0, got {p}")));
                }
            }
            TailModel::Periodic { p, q } => {
                if p.is_empty() || p.len() != q.len() {
                    return Err(Error::InvalidWindow("periodic tail cycles must match".into()));
                }
                if p.iter().any(|x| !(*x > 0.0 && x.is_finite())) || q.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidWindow("periodic tail needs p > 0".into()));
                }
            }
            TailModel::Truncate { depth } => {
                if *depth < MIN_TRUNCATE_DEPTH {
                    return Err(Error::InvalidWindow(format!(
                        "truncate depth must be at least {MIN_TRUNCATE_DEPTH}, got {depth}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `(p_k, q_k)` predicted by the tail, if it determines them.
    fn entry(&self, k: i64) -> Option<(f64, f64)> {
        match self {
            TailModel::Constant { p, q } => Some((*p, *q)),
            TailModel::Periodic { p, q } => {
                let j = k.rem_euclid(p.len() as i64) as usize;
                Some((p[j], q[j]))
            }
            TailModel::Truncate { .. } => None,
        }
    }

    fn period(&self) -> Option<usize> {
        match self {
            TailModel::Constant { .. } => Some(1),
            TailModel::Periodic { p, .. } => Some(p.len()),
            TailModel::Truncate { .. } => None,
        }
    }

    fn shifted(&self, k: i64) -> TailModel {
        match self {
            TailModel::Periodic { p, q } => {
                let m = p.len() as i64;
                let at = |v: &Vec<f64>, j: i64| v[(j + k).rem_euclid(m) as usize];
                TailModel::Periodic {
                    p: (0..m).map(|j| at(p, j)).collect(),
                    q: (0..m).map(|j| at(q, j)).collect(),
                }
            }
            other => other.clone(),
        }
    }

    fn reflected(&self) -> TailModel {
        match self {
            TailModel::Periodic { p, q } => {
                let m = p.len() as i64;
                TailModel::Periodic {
                    p: (0..m).map(|j| p[(2 - j).rem_euclid(m) as usize]).collect(),
                    q: (0..m).map(|j| q[(1 - j).rem_euclid(m) as usize]).collect(),
                }
            }
            other => other.clone(),
        }
    }

    fn scaled(&self, lambda: f64) -> TailModel {
        match self {
            TailModel::Constant { p, q } => TailModel::Constant { p: p * lambda, q: q * lambda },
            TailModel::Periodic { p, q } => TailModel::Periodic {
                p: p.iter().map(|x| x * lambda).collect(),
                q: q.iter().map(|x| x * lambda).collect(),
            },
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawWindow {
    offset: i64,
    q: Vec<f64>,
    p: Vec<f64>,
    tail_left: TailModel,
    tail_right: TailModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spectral_interval: Option<(f64, f64)>,
}

/// A finite window of a two-sided Jacobi matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWindow", into = "RawWindow")]
pub struct JacobiWindow {
    offset: i64,
    q: Vec<f64>,
    p: Vec<f64>,
    tail_left: TailModel,
    tail_right: TailModel,
    spectral_interval: Option<(f64, f64)>,
}

impl TryFrom<RawWindow> for JacobiWindow {
    type Error = Error;
    fn try_from(r: RawWindow) -> Result<Self> {
        let mut w = JacobiWindow::new(r.offset, r.q, r.p, r.tail_left, r.tail_right)?;
        w.spectral_interval = r.spectral_interval;
        Ok(w)
    }
}

impl From<JacobiWindow> for RawWindow {
    fn from(w: JacobiWindow) -> Self {
        RawWindow {
            offset: w.offset,
            q: w.q,
            p: w.p,
            tail_left: w.tail_left,
            tail_right: w.tail_right,
            spectral_interval: w.spectral_interval,
        }
    }
}

/// Entrywise distance of two windows on their common index range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    pub dp: f64,
    pub dq: f64,
    /// `dq + 2 dp`, an upper bound for the operator-norm difference.
    pub opnorm_bound: f64,
}

impl JacobiWindow {
    /// `p[i]` is `p_{offset+i}`, the coupling of sites `offset+i−1` and `offset+i`.
    pub fn new(
        offset: i64,
        q: Vec<f64>,
        p: Vec<f64>,
        tail_left: TailModel,
        tail_right: TailModel,
    ) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::InvalidWindow("window must hold at least one site".into()));
        }
        if q.len() != p.len() {
            return Err(Error::InvalidWindow(format!("p and q lengths differ: {} vs {}", p.len(), q.len())));
        }
        if let Some(i) = p.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::PositivityViolation { index: offset + i as i64, value: p[i] });
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidWindow("non-finite diagonal entry".into()));
        }
        tail_left.validate()?;
        tail_right.validate()?;
        let w = JacobiWindow { offset, q, p, tail_left, tail_right, spectral_interval: None };
        let size =
            w.q.iter().fold(0.0f64, |a, b| a.max(b.abs())) + 2.0 * w.p.iter().fold(0.0f64, |a, b| a.max(*b));
        if size > NORM_CAP {
            return Err(Error::InvalidWindow(format!("coefficients exceed norm cap: {size}")));
        }
        Ok(w)
    }

    /// Constant coefficients on `lo..=hi` with matching constant tails.
    pub fn constant(p: f64, q: f64, lo: i64, hi: i64) -> Result<Self> {
        let n = (hi - lo + 1).max(1) as usize;
        let tail = TailModel::Constant { p, q };
        JacobiWindow::new(lo, vec![q; n], vec![p; n], tail.clone(), tail)
    }

    /// Periodic coefficients (absolute index mod period) on `lo..=hi` with periodic tails.
    pub fn periodic(p: Vec<f64>, q: Vec<f64>, lo: i64, hi: i64) -> Result<Self> {
        let tail = TailModel::Periodic { p, q };
        tail.validate()?;
        let n = (hi - lo + 1).max(1) as usize;
        let (ps, qs): (Vec<f64>, Vec<f64>) = (0..n).map(|i| tail.entry(lo + i as i64).unwrap()).unzip();
        JacobiWindow::new(lo, qs, ps, tail.clone(), tail)
    }

    /// Builds a window from functions of the absolute index.
    pub fn from_fn<P, Q>(
        lo: i64,
        hi: i64,
        p: P,
        q: Q,
        tail_left: TailModel,
        tail_right: TailModel,
    ) -> Result<Self>
    where
        P: Fn(i64) -> f64,
        Q: Fn(i64) -> f64,
    {
        let ps = (lo..=hi).map(&p).collect();
        let qs = (lo..=hi).map(&q).collect();
        JacobiWindow::new(lo, qs, ps, tail_left, tail_right)
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Index of the first stored site.
    pub fn first(&self) -> i64 {
        self.offset
    }

    /// Index of the last stored site.
    pub fn last(&self) -> i64 {
        self.offset + self.q.len() as i64 - 1
    }

    pub fn range(&self) -> RangeInclusive<i64> {
        self.first()..=self.last()
    }

    pub fn q_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn p_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn tail_left(&self) -> &TailModel {
        &self.tail_left
    }

    pub fn tail_right(&self) -> &TailModel {
        &self.tail_right
    }

    pub fn set_tails(&mut self, left: TailModel, right: TailModel) -> Result<()> {
        left.validate()?;
        right.validate()?;
        self.tail_left = left;
        self.tail_right = right;
        Ok(())
    }

    /// Overrides the interval used for the spectrum-distance check.
    pub fn with_spectral_interval(mut self, lo: f64, hi: f64) -> Self {
        self.spectral_interval = Some((lo, hi));
        self
    }

    pub fn q_at(&self, k: i64) -> Option<f64> {
        if self.range().contains(&k) {
            Some(self.q[(k - self.offset) as usize])
        } else {
            self.tail_for(k).entry(k).map(|e| e.1)
        }
    }

    pub fn p_at(&self, k: i64) -> Option<f64> {
        if self.range().contains(&k) {
            Some(self.p[(k - self.offset) as usize])
        } else {
            self.tail_for(k).entry(k).map(|e| e.0)
        }
    }

    fn tail_for(&self, k: i64) -> &TailModel {
        if k < self.offset {
            &self.tail_left
        } else {
            &self.tail_right
        }
    }

    fn q_req(&self, k: i64) -> Result<f64> {
        self.q_at(k).ok_or(Error::WindowExhausted { index: k, reason: "q outside window".into() })
    }

    fn p_req(&self, k: i64) -> Result<f64> {
        self.p_at(k).ok_or(Error::WindowExhausted { index: k, reason: "p outside window".into() })
    }

    /// Indices `k` with `p_k = 0` inside the window.
    pub fn splits(&self) -> Vec<i64> {
        self.p.iter().enumerate().filter(|(_, x)| **x == 0.0).map(|(i, _)| self.offset + i as i64).collect()
    }

    /// Interval containing the spectrum: the override if present, otherwise
    /// the refined Gershgorin bound `[min(q_k − p_k − p_{k+1}), max(q_k + p_k + p_{k+1})]`
    /// over the window and its tails.
    pub fn spectral_interval(&self) -> (f64, f64) {
        if let Some(iv) = self.spectral_interval {
            return iv;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut visit = |q: f64, a: f64, b: f64| {
            lo = lo.min(q - a - b);
            hi = hi.max(q + a + b);
        };
        for k in self.range() {
            let q = self.q[(k - self.offset) as usize];
            let a = self.p[(k - self.offset) as usize];
            let b = self.p_at(k + 1).unwrap_or(0.0);
            visit(q, a, b);
        }
        for (tail, base) in [(&self.tail_left, self.first() - 1), (&self.tail_right, self.last() + 1)] {
            if let Some(m) = tail.period() {
                for j in 0..m as i64 {
                    let (a, q) = tail.entry(base + j).unwrap();
                    let (b, _) = tail.entry(base + j + 1).unwrap();
                    visit(q, a, b);
                }
            }
        }
        (lo, hi)
    }

    fn check_distance(&self, z: Complex64) -> Result<()> {
        let (lo, hi) = self.spectral_interval();
        let dist = distance_to_interval(z, lo, hi);
        if dist < GAP_MIN {
            return Err(Error::TooCloseToSpectrum { z: z.re, dist, lo, hi });
        }
        Ok(())
    }

    /// Number of continued-fraction levels after which the truncation error
    /// falls below `eps`.
    ///
    /// With `u = (z − c)/R` for the spectral interval `c ± R` and
    /// `w = u + √(u−1)√(u+1)` (so `|w| > 1`), the tail of the continued fraction
    /// contracts by roughly `|w|⁻²` per level, hence
    /// `depth ≥ log(eps) / log(|w|⁻²)`.
    pub fn required_depth(&self, z: Complex64, eps: f64) -> usize {
        let (lo, hi) = self.spectral_interval();
        let ratio = cf_contraction(z, lo, hi);
        if ratio <= 0.0 {
            return 1;
        }
        if ratio >= 1.0 {
            return usize::MAX;
        }
        (eps.ln() / ratio.ln()).ceil() as usize + 2
    }

    /// `r₊(z, s)` for all `s` in `range`, in increasing order of `s`.
    pub fn resolvents_plus_c(&self, z: Complex64, range: RangeInclusive<i64>) -> Result<Vec<Complex64>> {
        self.check_distance(z)?;
        let (s_lo, s_hi) = (*range.start(), *range.end());
        let last = self.last();
        let truncated = matches!(self.tail_right, TailModel::Truncate { .. });
        // start value r₊(z, start + 1) together with the first site `start`
        let (start, mut r) = match &self.tail_right {
            TailModel::Truncate { depth } => {
                let need = (*depth).max(self.required_depth(z, EPS_CF)) as i64;
                if last - s_hi + 1 < need {
                    return Err(Error::WindowExhausted {
                        index: s_hi,
                        reason: format!("needs {need} sites to the right, window ends at {last}"),
                    });
                }
                (last, Complex64::new(0.0, 0.0))
            }
            tail => {
                let start = last.max(s_hi);
                (start, self.periodic_fixed_point(tail, z, start + 1, Side::Right))
            }
        };
        let mut out = Vec::with_capacity((s_hi - s_lo + 1).max(0) as usize);
        let mut k = start;
        while k >= s_lo {
            let p = if k == last && truncated { 0.0 } else { self.p_req(k + 1)? };
            r = -1.0 / (z - self.q_req(k)? + p * p * r);
            if k <= s_hi {
                out.push(r);
            }
            k -= 1;
        }
        out.reverse();
        Ok(out)
    }

    /// `r₋(z, s)` for all `s` in `range`, in increasing order of `s`.
    pub fn resolvents_minus_c(&self, z: Complex64, range: RangeInclusive<i64>) -> Result<Vec<Complex64>> {
        self.check_distance(z)?;
        let (s_lo, s_hi) = (*range.start(), *range.end());
        let first = self.first();
        let truncated = matches!(self.tail_left, TailModel::Truncate { .. });
        let (start, mut r) = match &self.tail_left {
            TailModel::Truncate { depth } => {
                let need = (*depth).max(self.required_depth(z, EPS_CF)) as i64;
                if s_lo - first + 1 < need {
                    return Err(Error::WindowExhausted {
                        index: s_lo,
                        reason: format!("needs {need} sites to the left, window starts at {first}"),
                    });
                }
                (first, Complex64::new(0.0, 0.0))
            }
            tail => {
                let start = first.min(s_lo);
                (start, self.periodic_fixed_point(tail, z, start - 1, Side::Left))
            }
        };
        let mut out = Vec::with_capacity((s_hi - s_lo + 1).max(0) as usize);
        let mut k = start;
        while k <= s_hi {
            let p = if k == first && truncated { 0.0 } else { self.p_req(k)? };
            r = -1.0 / (z - self.q_req(k)? + p * p * r);
            if k >= s_lo {
                out.push(r);
            }
            k += 1;
        }
        Ok(out)
    }

    pub fn resolvent_plus_c(&self, z: Complex64, s: i64) -> Result<Complex64> {
        Ok(self.resolvents_plus_c(z, s..=s)?[0])
    }

    pub fn resolvent_minus_c(&self, z: Complex64, s: i64) -> Result<Complex64> {
        Ok(self.resolvents_minus_c(z, s..=s)?[0])
    }

    /// `r₊(z, s) = ⟨s|(J₊(s) − z)⁻¹|s⟩` for real `z` off the spectrum.
    pub fn resolvent_plus(&self, z: f64, s: i64) -> Result<f64> {
        Ok(self.resolvent_plus_c(Complex64::new(z, 0.0), s)?.re)
    }

    /// `r₋(z, s) = ⟨s|(J₋(s) − z)⁻¹|s⟩` for real `z` off the spectrum.
    pub fn resolvent_minus(&self, z: f64, s: i64) -> Result<f64> {
        Ok(self.resolvent_minus_c(Complex64::new(z, 0.0), s)?.re)
    }

    pub fn resolvents_plus(&self, z: f64, range: RangeInclusive<i64>) -> Result<Vec<f64>> {
        Ok(self.resolvents_plus_c(Complex64::new(z, 0.0), range)?.into_iter().map(|r| r.re).collect())
    }

    pub fn resolvents_minus(&self, z: f64, range: RangeInclusive<i64>) -> Result<Vec<f64>> {
        Ok(self.resolvents_minus_c(Complex64::new(z, 0.0), range)?.into_iter().map(|r| r.re).collect())
    }

    /// Exact continued-fraction value at site `j` inside a periodic tail:
    /// the attracting fixed point of the composed one-period Möbius map.
    fn periodic_fixed_point(&self, tail: &TailModel, z: Complex64, j: i64, side: Side) -> Complex64 {
        let m = tail.period().unwrap() as i64;
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        // r ↦ (a r + b) / (c r + e) stored as [a, b, c, e]
        let mut acc = [one, zero, zero, one];
        for t in 0..m {
            let (site, coupling) = match side {
                Side::Right => (j + t, j + t + 1),
                Side::Left => (j - t, j - t),
            };
            let (_, q) = tail.entry(site).unwrap();
            let (p, _) = tail.entry(coupling).unwrap();
            let step = [zero, -one, Complex64::new(p * p, 0.0), z - q];
            acc = mobius_mul(acc, step);
            let norm = acc.iter().map(|x| x.norm()).fold(0.0, f64::max);
            for x in acc.iter_mut() {
                *x /= norm;
            }
        }
        let [a, b, c, e] = acc;
        if c.norm() <= 1e-300 {
            return b / (e - a);
        }
        // c r² + (e − a) r − b = 0
        let disc = ((e - a) * (e - a) + 4.0 * b * c).sqrt();
        let r1 = (-(e - a) + disc) / (2.0 * c);
        let r2 = (-(e - a) - disc) / (2.0 * c);
        if (c * r1 + e).norm() >= (c * r2 + e).norm() {
            r1
        } else {
            r2
        }
    }

    /// `W(z) = [[r₋(z,0)⁻¹, p₁], [p₁, r₊(z,1)⁻¹]]⁻¹`, which equals the
    /// `{0,1}` block of `(J − z)⁻¹`.
    pub fn resolvent_matrix_w(&self, z: f64) -> Result<[[f64; 2]; 2]> {
        let rm = self.resolvent_minus(z, 0)?;
        let rp = self.resolvent_plus(z, 1)?;
        let p1 = self.p_req(1)?;
        let (a, b, d) = (1.0 / rm, p1, 1.0 / rp);
        // eigenvalues of the symmetric pencil give its condition number
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        let (l1, l2) = ((mean + rad).abs(), (mean - rad).abs());
        let cond = l1.max(l2) / l1.min(l2);
        if !cond.is_finite() || cond > 1e12 {
            return Err(Error::SingularPencil { cond });
        }
        let det = a * d - b * b;
        Ok([[d / det, -b / det], [-b / det, a / det]])
    }

    /// `⟨i|(J_sec − z)⁻¹|j⟩` for the finite section on sites `lo..=hi`.
    pub fn finite_section_resolvent(&self, lo: i64, hi: i64, z: f64, i: i64, j: i64) -> Result<f64> {
        let (diag, off) = self.section(lo, hi)?;
        let diag: Vec<f64> = diag.iter().map(|q| q - z).collect();
        let mut rhs = vec![0.0; diag.len()];
        rhs[(j - lo) as usize] = 1.0;
        let x = solve_tridiagonal(&diag, &off, &rhs);
        Ok(x[(i - lo) as usize])
    }

    /// Finite section on sites `lo..=hi` as `(q_lo..q_hi, p_{lo+1}..p_hi)`;
    /// entries outside the window come from the tails.
    pub fn section(&self, lo: i64, hi: i64) -> Result<(Vec<f64>, Vec<f64>)> {
        let diag = (lo..=hi).map(|k| self.q_req(k)).collect::<Result<Vec<_>>>()?;
        let off = (lo + 1..=hi).map(|k| self.p_req(k)).collect::<Result<Vec<_>>>()?;
        Ok((diag, off))
    }

    /// Entrywise distances over the common stored index range.
    pub fn entrywise_distance(&self, other: &JacobiWindow) -> Result<Distance> {
        let lo = self.first().max(other.first());
        let hi = self.last().min(other.last());
        if lo > hi {
            return Err(Error::DisjointWindows);
        }
        self.entrywise_distance_on(other, lo, hi)
    }

    /// Entrywise distances on sites `lo..=hi`, using tails where needed.
    pub fn entrywise_distance_on(&self, other: &JacobiWindow, lo: i64, hi: i64) -> Result<Distance> {
        let mut dp = 0.0f64;
        let mut dq = 0.0f64;
        for k in lo..=hi {
            dq = dq.max((self.q_req(k)? - other.q_req(k)?).abs());
            dp = dp.max((self.p_req(k)? - other.p_req(k)?).abs());
        }
        Ok(Distance { dp, dq, opnorm_bound: dq + 2.0 * dp })
    }

    /// Entry `m` of the result is entry `m + k` of `self`.
    pub fn shift(&self, k: i64) -> JacobiWindow {
        JacobiWindow {
            offset: self.offset - k,
            q: self.q.clone(),
            p: self.p.clone(),
            tail_left: self.tail_left.shifted(k),
            tail_right: self.tail_right.shifted(k),
            spectral_interval: self.spectral_interval,
        }
    }

    /// The involution `q_k ↦ q_{1−k}`, `p_k ↦ p_{2−k}` (reflection across the
    /// bond between sites 0 and 1).
    pub fn reflect(&self) -> JacobiWindow {
        let n = self.len();
        let first = 1 - self.last();
        let q: Vec<f64> = self.q.iter().rev().copied().collect();
        // output p at 1 − k + 1 = 2 − k couples output sites 1−k, 2−k
        let p: Vec<f64> = (0..n as i64)
            .map(|i| {
                let k = first + i;
                self.p_at(2 - k).unwrap_or(0.0)
            })
            .collect();
        JacobiWindow {
            offset: first,
            q,
            p,
            tail_left: self.tail_right.reflected(),
            tail_right: self.tail_left.reflected(),
            spectral_interval: self.spectral_interval,
        }
    }

    /// Multiplies all coefficients by `lambda > 0`.
    pub fn scaled(&self, lambda: f64) -> JacobiWindow {
        JacobiWindow {
            offset: self.offset,
            q: self.q.iter().map(|x| x * lambda).collect(),
            p: self.p.iter().map(|x| x * lambda).collect(),
            tail_left: self.tail_left.scaled(lambda),
            tail_right: self.tail_right.scaled(lambda),
            spectral_interval: self.spectral_interval.map(|(a, b)| (a * lambda, b * lambda)),
        }
    }

    /// Restriction to sites `lo..=hi`. Tails are kept where the crop reaches
    /// the stored edge; elsewhere they become truncated.
    pub fn crop(&self, lo: i64, hi: i64) -> Result<JacobiWindow> {
        if lo < self.first() || hi > self.last() || lo > hi {
            return Err(Error::InvalidWindow(format!(
                "crop {lo}..={hi} outside window {}..={}",
                self.first(),
                self.last()
            )));
        }
        let a = (lo - self.offset) as usize;
        let b = (hi - self.offset) as usize;
        let left = if lo == self.first() { self.tail_left.clone() } else { TailModel::truncate() };
        let right = if hi == self.last() { self.tail_right.clone() } else { TailModel::truncate() };
        Ok(JacobiWindow {
            offset: lo,
            q: self.q[a..=b].to_vec(),
            p: self.p[a..=b].to_vec(),
            tail_left: left,
            tail_right: right,
            spectral_interval: self.spectral_interval,
        })
    }

    /// Same coefficients with explicit entries replaced.
    pub fn with_entries(&self, q: Vec<f64>, p: Vec<f64>) -> Result<JacobiWindow> {
        let mut w = JacobiWindow::new(self.offset, q, p, self.tail_left.clone(), self.tail_right.clone())?;
        w.spectral_interval = self.spectral_interval;
        Ok(w)
    }

    /// Writes `index,p,q` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["index", "p", "q"]).map_err(io_err)?;
        for (i, (p, q)) in self.p.iter().zip(&self.q).enumerate() {
            let k = self.offset + i as i64;
            w.write_record([k.to_string(), format!("{p:.16e}"), format!("{q:.16e}")]).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }

    /// Reads `index,p,q` rows with consecutive indices; tails are truncated.
    pub fn read_csv<R: Read>(input: R) -> Result<JacobiWindow> {
        let mut rd = csv::Reader::from_reader(input);
        let mut offset = None;
        let mut p = Vec::new();
        let mut q = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(io_err)?;
            let field =
                |i: usize| -> Result<&str> { rec.get(i).ok_or_else(|| Error::Io("missing column".into())) };
            let k: i64 = field(0)?.trim().parse().map_err(|e| Error::Io(format!("{e}")))?;
            let pk: f64 = field(1)?.trim().parse().map_err(|e| Error::Io(format!("{e}")))?;
            let qk: f64 = field(2)?.trim().parse().map_err(|e| Error::Io(format!("{e}")))?;
            let start = *offset.get_or_insert(k);
            if k != start + p.len() as i64 {
                return Err(Error::Io(format!("non-consecutive index {k}")));
            }
            p.push(pk);
            q.push(qk);
        }
        let offset = offset.ok_or_else(|| Error::Io("empty coefficient file".into()))?;
        JacobiWindow::new(offset, q, p, TailModel::truncate(), TailModel::truncate())
    }
}

#[derive(Clone, Copy)]
enum Side {
    Left,
    Right,
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn mobius_mul(a: [Complex64; 4], b: [Complex64; 4]) -> [Complex64; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

/// Euclidean distance from `z` to the real segment `[lo, hi]`.
pub fn distance_to_interval(z: Complex64, lo: f64, hi: f64) -> f64 {
    let dx = if z.re < lo {
        lo - z.re
    } else if z.re > hi {
        z.re - hi
    } else {
        0.0
    };
    dx.hypot(z.im)
}

/// Per-level contraction `|w|⁻²` of the continued fraction at `z` for
/// spectrum in `[lo, hi]`.
pub fn cf_contraction(z: Complex64, lo: f64, hi: f64) -> f64 {
    let c = 0.5 * (lo + hi);
    let r = 0.5 * (hi - lo);
    if r <= 0.0 {
        return 0.0;
    }
    let u = (z - c) / r;
    let one = Complex64::new(1.0, 0.0);
    let mut w = u + (u - one).sqrt() * (u + one).sqrt();
    if w.norm() < 1.0 {
        w = one / w;
    }
    1.0 / w.norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_resolvent_closed_form() {
        let j = JacobiWindow::constant(0.5, 0.0, -10, 10).unwrap();
        let r = j.resolvent_plus(-11.0, 0).unwrap();
        // oracle: small root of r²/4 + z r + 1 = 0
        let expect = 2.0 * (11.0 - 120.0f64.sqrt());
        assert!((r - expect).abs() < 1e-15);
        assert!((r - 0.091093).abs() < 1e-5);
        let rm = j.resolvent_minus(-11.0, 0).unwrap();
        assert!((rm - r).abs() < 1e-15);
    }

    #[test]
    fn leading_term_at_infinity() {
        let j = JacobiWindow::constant(0.5, 0.3, 0, 40).unwrap();
        let z = 1e8;
        assert!((z * j.resolvent_plus(z, 3).unwrap() + 1.0).abs() < 1e-7);
    }

    #[test]
    fn herglotz_signs() {
        let j = JacobiWindow::periodic(vec![1.0, 0.4], vec![0.2, -0.1], -30, 30).unwrap();
        let (lo, hi) = j.spectral_interval();
        assert!(j.resolvent_plus(hi + 0.5, 0).unwrap() < 0.0);
        assert!(j.resolvent_minus(hi + 0.5, 0).unwrap() < 0.0);
        assert!(j.resolvent_plus(lo - 0.5, 0).unwrap() > 0.0);
        assert!(j.resolvent_minus(lo - 0.5, 0).unwrap() > 0.0);
    }

    #[test]
    fn too_close_to_spectrum() {
        let j = JacobiWindow::constant(0.5, 0.0, -10, 10).unwrap();
        assert!(matches!(j.resolvent_plus(0.5, 0), Err(Error::TooCloseToSpectrum { .. })));
    }

    #[test]
    fn truncated_window_requires_depth() {
        let j = JacobiWindow::constant(0.5, 0.0, 0, 10).unwrap();
        let mut t = j.clone();
        t.set_tails(TailModel::truncate(), TailModel::truncate()).unwrap();
        assert!(matches!(t.resolvent_plus(5.0, 0), Err(Error::WindowExhausted { .. })));
        let long = JacobiWindow::constant(0.5, 0.0, 0, 200).unwrap();
        let mut tl = long.clone();
        tl.set_tails(TailModel::truncate(), TailModel::truncate()).unwrap();
        let a = tl.resolvent_plus(5.0, 0).unwrap();
        let b = long.resolvent_plus(5.0, 0).unwrap();
        assert!((a - b).abs() < 1e-13 * b.abs());
    }

    #[test]
    fn w_matrix_matches_section() {
        let j = JacobiWindow::periodic(vec![1.0, 0.4, 0.7], vec![0.2, -0.1, 0.0], -40, 40).unwrap();
        let z = 4.0;
        let w = j.resolvent_matrix_w(z).unwrap();
        for (a, b) in [(0, 0), (0, 1), (1, 1)] {
            let fs = j.finite_section_resolvent(-400, 400, z, a, b).unwrap();
            assert!((w[a as usize][b as usize] - fs).abs() < 1e-12);
        }
        assert_eq!(w[0][1], w[1][0]);
    }

    #[test]
    fn shift_and_reflect() {
        let j = JacobiWindow::from_fn(
            -5,
            7,
            |k| 1.0 + 0.1 * k as f64,
            |k| 0.01 * (k * k) as f64,
            TailModel::truncate(),
            TailModel::truncate(),
        )
        .unwrap();
        assert_eq!(j.shift(0), j);
        assert_eq!(j.shift(3).shift(-3), j);
        let s = j.shift(2);
        assert_eq!(s.q_at(0), j.q_at(2));
        assert_eq!(s.p_at(1), j.p_at(3));
        let r = j.reflect();
        for k in r.first() + 1..=r.last() {
            assert_eq!(r.q_at(k), j.q_at(1 - k));
            assert_eq!(r.p_at(k), j.p_at(2 - k));
        }
    }

    #[test]
    fn periodic_tail_shift_is_consistent() {
        let j = JacobiWindow::periodic(vec![1.0, 0.4, 0.7], vec![0.2, -0.1, 0.0], 0, 5).unwrap();
        let s = j.shift(1);
        for k in -10..10 {
            assert_eq!(s.p_at(k), j.p_at(k + 1));
            assert_eq!(s.q_at(k), j.q_at(k + 1));
        }
        let r = j.reflect();
        for k in -10..10 {
            assert_eq!(r.q_at(k), j.q_at(1 - k));
            assert_eq!(r.p_at(k), j.p_at(2 - k));
        }
    }

    #[test]
    fn distance_single_entry() {
        let a = JacobiWindow::constant(0.5, 0.0, 0, 20).unwrap();
        let mut q = a.q_slice().to_vec();
        q[4] += 1e-3;
        let b = a.with_entries(q, a.p_slice().to_vec()).unwrap();
        let d = a.entrywise_distance(&b).unwrap();
        assert_eq!(d.dp, 0.0);
        assert!((d.dq - 1e-3).abs() < 1e-15);
        assert!((d.opnorm_bound - 1e-3).abs() < 1e-15);
        let c = JacobiWindow::constant(0.5, 0.0, 30, 40).unwrap();
        assert!(matches!(a.entrywise_distance(&c), Err(Error::DisjointWindows)));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let j = JacobiWindow::periodic(vec![1.0, 0.4], vec![0.2, -0.1], -3, 3).unwrap();
        let mut buf = Vec::new();
        j.write_csv(&mut buf).unwrap();
        let back = JacobiWindow::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.q_slice(), j.q_slice());
        assert_eq!(back.p_slice(), j.p_slice());
        let s = serde_json::to_string(&j).unwrap();
        let back: JacobiWindow = serde_json::from_str(&s).unwrap();
        assert_eq!(back, j);
        let bad = r#"{"offset":0,"q":[0.0],"p":[-1.0],"tail_left":{"type":"truncate","depth":24},"tail_right":{"type":"truncate","depth":24}}"#;
        assert!(serde_json::from_str::<JacobiWindow>(bad).is_err());
    }
}
