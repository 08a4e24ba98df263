//! The renormalization operator `J̃ ↦ J(δ, J̃; T)` and its consistency checks.
//!
//! Blocks are computed in the monic frame of `T`; [`renormalize`] converts
//! other symmetric frames on the fly via `J ↦ λ J`, `T ↦ λ T(·/λ)`.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobi::{JacobiWindow, TailModel};
use crate::poly::{HyperbolicPoly, Normalization, Poly};
use crate::spectral::{lanczos, matrix_polynomial, real_roots, solve_tridiagonal};

/// Off-diagonal entries below this (relative to ξ) are stored as exact zeros.
pub const SPLIT_TOL: f64 = 1e-13;
/// Periodic output tails are computed only up to this period.
pub const TAIL_PERIOD_CAP: usize = 1 << 16;
/// Imaginary-part tolerance for the roots of `T^(s)`.
pub const TPOLY_ROOT_TOL: f64 = 1e-9;

/// Choice `δ_c ∈ {−1, +1}` per critical point, ordered as the sorted critical points.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BranchVector(Vec<i8>);

impl BranchVector {
    pub fn new(delta: Vec<i8>) -> Result<Self> {
        if delta.iter().any(|&x| x != 1 && x != -1) {
            return Err(Error::BranchParse("entries must be ±1".into()));
        }
        Ok(BranchVector(delta))
    }

    /// `δ₋`, all entries −1.
    pub fn minus(len: usize) -> Self {
        BranchVector(vec![-1; len])
    }

    /// `δ₊`, all entries +1.
    pub fn plus(len: usize) -> Self {
        BranchVector(vec![1; len])
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn negated(&self) -> Self {
        BranchVector(self.0.iter().map(|x| -x).collect())
    }

    /// All `2^len` vectors; entry `j` of vector `m` is `+1` iff bit `j` of `m` is set.
    pub fn all(len: usize) -> Vec<BranchVector> {
        (0..1u64 << len)
            .map(|m| BranchVector((0..len).map(|j| if m >> j & 1 == 1 { 1 } else { -1 }).collect()))
            .collect()
    }

    fn check_len(&self, t: &HyperbolicPoly) -> Result<()> {
        let expected = t.critical_points().len();
        if self.0.len() != expected {
            return Err(Error::BranchLength { got: self.0.len(), expected });
        }
        Ok(())
    }
}

impl fmt::Display for BranchVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &x in &self.0 {
            f.write_str(if x > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl FromStr for BranchVector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|ch| match ch {
                '+' => Ok(1),
                '-' | '−' => Ok(-1),
                other => Err(Error::BranchParse(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<i8>>>()
            .map(BranchVector)
    }
}

/// The `s`-th `d × d` block of a renormalized matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub s: i64,
    /// `T^(s)(c)` at the sorted critical points.
    pub tvals: Vec<f64>,
    /// Monic `T^(s)`, ascending coefficients.
    pub tpoly: Poly,
    /// `q_{sd}, …, q_{sd+d−1}`.
    pub diag: Vec<f64>,
    /// `p_{sd+1}, …, p_{sd+d−1}`.
    pub off: Vec<f64>,
    /// `p_{sd+d}`.
    pub glue_p: f64,
}

/// Finitely supported positive measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() || support.is_empty() {
            return Err(Error::DegenerateMeasure("support and weights must match".into()));
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0)) {
            return Err(Error::NegativeWeight { weight: weights[i], at: support[i] });
        }
        let scale = support.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        let mut sorted = support.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        if sorted.windows(2).any(|w| w[1] - w[0] <= 1e-12 * scale) {
            return Err(Error::DegenerateMeasure("support points must be distinct".into()));
        }
        Ok(DiscreteMeasure { support, weights })
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.support.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Seed and polynomial carried to the monic frame.
#[derive(Debug, Clone)]
pub struct MonicFrame {
    pub seed: JacobiWindow,
    pub poly: HyperbolicPoly,
    /// `λ` with `poly = λ T(·/λ)` and `seed = λ J̃`.
    pub lambda: f64,
}

impl MonicFrame {
    pub fn new(seed: &JacobiWindow, t: &HyperbolicPoly) -> Result<Self> {
        if t.normalization() == Normalization::Monic {
            return Ok(MonicFrame { seed: seed.clone(), poly: t.clone(), lambda: 1.0 });
        }
        let lambda = t.monic_scale();
        Ok(MonicFrame { seed: seed.scaled(lambda), poly: t.to_monic()?, lambda })
    }
}

fn require_monic(t: &HyperbolicPoly) -> Result<()> {
    if t.normalization() != Normalization::Monic {
        return Err(Error::InvalidPolynomial("a monic polynomial is required here".into()));
    }
    Ok(())
}

/// `T^(s)(c)` for all critical points `c` and all `s` in `range`:
/// `δ_c = −1` gives `−1 / r̃₋(T(c), s)`, `δ_c = +1` gives `−p̃²_{s+1} r̃₊(T(c), s+1)`.
/// Result is indexed `[s − start][c]`.
pub fn branch_values_range(
    seed: &JacobiWindow,
    range: RangeInclusive<i64>,
    delta: &BranchVector,
    t: &HyperbolicPoly,
) -> Result<Vec<Vec<f64>>> {
    require_monic(t)?;
    delta.check_len(t)?;
    let (lo, hi) = (*range.start(), *range.end());
    let n = (hi - lo + 1) as usize;
    let mut out = vec![vec![0.0; delta.len()]; n];
    for (j, (&c, &tc)) in t.critical_points().iter().zip(t.critical_values()).enumerate() {
        let column: Vec<f64> = if delta.as_slice()[j] < 0 {
            seed.resolvents_minus(tc, lo..=hi)?.into_iter().map(|r| -1.0 / r).collect()
        } else {
            let r = seed.resolvents_plus(tc, lo + 1..=hi + 1)?;
            (0..n)
                .map(|i| {
                    let s = lo + i as i64;
                    let p = seed
                        .p_at(s + 1)
                        .ok_or(Error::WindowExhausted { index: s + 1, reason: "p outside window".into() })?;
                    Ok(-p * p * r[i])
                })
                .collect::<Result<_>>()?
        };
        for (i, v) in column.into_iter().enumerate() {
            if !(v.is_finite() && v != 0.0 && v.signum() == tc.signum()) {
                return Err(Error::SignViolation { s: lo + i as i64, c, value: v });
            }
            out[i][j] = v;
        }
    }
    Ok(out)
}

/// `T^(s)(c)` at one block index, in the frame of `t` (converted internally).
pub fn branch_values(
    seed: &JacobiWindow,
    s: i64,
    delta: &BranchVector,
    t: &HyperbolicPoly,
) -> Result<Vec<f64>> {
    let frame = MonicFrame::new(seed, t)?;
    let v = branch_values_range(&frame.seed, s..=s, delta, &frame.poly)?;
    Ok(v[0].iter().map(|x| x / frame.lambda).collect())
}

/// `T^(s)(z) = (z − q) T′(z)/d + Σ_c T′(z) / ((z − c) T″(c)) · T^(s)(c)`.
pub fn interpolate_tpoly(tvals: &[f64], q: f64, t: &HyperbolicPoly) -> Result<Poly> {
    let crit = t.critical_points();
    if tvals.len() != crit.len() {
        return Err(Error::BranchLength { got: tvals.len(), expected: crit.len() });
    }
    let d = t.degree() as f64;
    let dt = t.derivative_poly();
    let mut acc = Poly::new(vec![-q, 1.0])?.mul(&dt).scale(1.0 / d);
    for (&c, &v) in crit.iter().zip(tvals) {
        let (_, _, t2) = t.eval_derivs(c);
        if t2.abs() <= 1e-14 * dt.leading().abs().max(1.0) {
            return Err(Error::DegenerateCritical { gap: t2 });
        }
        acc = acc.add(&dt.deflate(c).scale(v / t2));
    }
    // the leading coefficient is exactly one by construction
    let mut c = acc.coeffs().to_vec();
    let last = c.len() - 1;
    c[last] = 1.0;
    Poly::new(c)
}

/// The `d × d` Jacobi block whose `⟨0|(z − B)⁻¹|0⟩ = (T′(z)/d) / T^(s)(z)`,
/// obtained by Lanczos on the measure `Σ_i w_i δ_{x_i}` with `x_i` the roots
/// of `T^(s)` and `w_i = T′(x_i) / (d · T^(s)′(x_i))`.
pub fn block_from_tpoly(tpoly: &Poly, t: &HyperbolicPoly) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = t.degree();
    if tpoly.degree() != d {
        return Err(Error::InvalidPolynomial(format!("T^(s) has degree {}, expected {d}", tpoly.degree())));
    }
    let roots =
        real_roots(tpoly.coeffs(), TPOLY_ROOT_TOL).map_err(|imag| Error::NonRealBlockSpectrum { imag })?;
    let dtp = tpoly.derivative();
    let weights: Vec<f64> = roots.iter().map(|&x| t.eval_derivs(x).1 / (d as f64 * dtp.eval(x))).collect();
    let measure = DiscreteMeasure::new(roots, weights)?;
    let mass = measure.mass();
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::DegenerateMeasure(format!("block measure has mass {mass}")));
    }
    let (diag, off) = lanczos(&measure.support, &measure.weights, d)?;
    let q = measure.integrate(|x| x);
    if (diag[0] - q).abs() > 1e-10 * t.xi().max(1.0) {
        return Err(Error::DegenerateMeasure(format!(
            "top-left entry {} differs from the mean {q}",
            diag[0]
        )));
    }
    Ok((diag, off))
}

/// Block `s` from its branch values.
pub fn build_block(seed: &JacobiWindow, s: i64, tvals: Vec<f64>, t: &HyperbolicPoly) -> Result<BlockSpec> {
    let tpoly = interpolate_tpoly(&tvals, t.q(), t)?;
    let (diag, off) = block_from_tpoly(&tpoly, t)?;
    let pt =
        seed.p_at(s + 1).ok_or(Error::WindowExhausted { index: s + 1, reason: "p outside window".into() })?;
    let prod: f64 = off.iter().product();
    if !(prod > 0.0) {
        return Err(Error::PositivityViolation { index: s * t.degree() as i64, value: prod });
    }
    let mut glue_p = pt / prod;
    if glue_p < SPLIT_TOL * t.xi() {
        glue_p = 0.0;
    }
    Ok(BlockSpec { s, tvals, tpoly, diag, off, glue_p })
}

/// Blocks for all `s` in `range`, in the monic frame.
pub fn blocks(
    seed: &JacobiWindow,
    range: RangeInclusive<i64>,
    delta: &BranchVector,
    t: &HyperbolicPoly,
) -> Result<Vec<BlockSpec>> {
    let start = *range.start();
    let tvals = branch_values_range(seed, range, delta, t)?;
    tvals.into_par_iter().enumerate().map(|(i, tv)| build_block(seed, start + i as i64, tv, t)).collect()
}

/// Assembles consecutive blocks `s₀, …, s₁` into a window on sites
/// `(s₀+1)d ..= s₁ d + d − 1`; block `s₀` only contributes its gluing entry.
pub fn glue(blocks: &[BlockSpec], d: usize) -> Result<JacobiWindow> {
    if blocks.len() < 2 {
        return Err(Error::InvalidWindow("gluing needs at least two blocks".into()));
    }
    for w in blocks.windows(2) {
        if w[1].s != w[0].s + 1 {
            return Err(Error::InvalidWindow("blocks must be consecutive".into()));
        }
    }
    let d64 = d as i64;
    let offset = (blocks[0].s + 1) * d64;
    let mut q = Vec::with_capacity((blocks.len() - 1) * d);
    let mut p = Vec::with_capacity((blocks.len() - 1) * d);
    for w in blocks.windows(2) {
        let (prev, b) = (&w[0], &w[1]);
        if b.diag.len() != d || b.off.len() + 1 != d {
            return Err(Error::InvalidWindow("block size mismatch".into()));
        }
        for i in 0..d {
            q.push(b.diag[i]);
            p.push(if i == 0 { prev.glue_p } else { b.off[i - 1] });
        }
    }
    if let Some(i) = p.iter().position(|x| !(*x >= 0.0)) {
        return Err(Error::PositivityViolation { index: offset + i as i64, value: p[i] });
    }
    JacobiWindow::new(offset, q, p, TailModel::truncate(), TailModel::truncate())
}

/// `J(δ, J̃; T)` on sites `window`, in the frame of `t`.
///
/// Constant or periodic seed tails of period `m` yield periodic output tails
/// of period `d m` (the renormalization of the tail cycle); truncated seed
/// tails give truncated output tails.
pub fn renormalize(
    seed: &JacobiWindow,
    delta: &BranchVector,
    t: &HyperbolicPoly,
    window: RangeInclusive<i64>,
) -> Result<JacobiWindow> {
    let frame = MonicFrame::new(seed, t)?;
    let out = renormalize_monic(&frame.seed, delta, &frame.poly, window)?;
    Ok(if frame.lambda == 1.0 { out } else { out.scaled(1.0 / frame.lambda) })
}

/// [`renormalize`] for a monic polynomial and a seed in its frame.
pub fn renormalize_monic(
    seed: &JacobiWindow,
    delta: &BranchVector,
    t: &HyperbolicPoly,
    window: RangeInclusive<i64>,
) -> Result<JacobiWindow> {
    require_monic(t)?;
    let (lo, hi) = (*window.start(), *window.end());
    if lo > hi {
        return Err(Error::InvalidWindow(format!("empty window {lo}..={hi}")));
    }
    let mut out = renormalize_entries(seed, delta, t, lo, hi)?;
    let left = renormalize_tail(seed.tail_left(), delta, t)?;
    let right = renormalize_tail(seed.tail_right(), delta, t)?;
    out.set_tails(left, right)?;
    let xi = t.xi();
    let (a, b) = seed.spectral_interval();
    if a >= -xi * (1.0 + 1e-12) && b <= xi * (1.0 + 1e-12) {
        out = out.with_spectral_interval(-xi, xi);
    }
    Ok(out)
}

fn renormalize_entries(
    seed: &JacobiWindow,
    delta: &BranchVector,
    t: &HyperbolicPoly,
    lo: i64,
    hi: i64,
) -> Result<JacobiWindow> {
    let d = t.degree() as i64;
    let s_first = lo.div_euclid(d) - 1;
    let s_last = hi.div_euclid(d);
    let bl = blocks(seed, s_first..=s_last, delta, t)?;
    glue(&bl, d as usize)?.crop(lo, hi)
}

fn renormalize_tail(tail: &TailModel, delta: &BranchVector, t: &HyperbolicPoly) -> Result<TailModel> {
    let (p, q) = match tail {
        TailModel::Constant { p, q } => (vec![*p], vec![*q]),
        TailModel::Periodic { p, q } => (p.clone(), q.clone()),
        TailModel::Truncate { .. } => return Ok(TailModel::truncate()),
    };
    let m = p.len();
    let d = t.degree();
    if d * m > TAIL_PERIOD_CAP {
        return Ok(TailModel::truncate());
    }
    let cycle = JacobiWindow::periodic(p, q, 0, m as i64 - 1)?;
    let w = renormalize_entries(&cycle, delta, t, 0, (d * m) as i64 - 1)?;
    if w.p_slice().iter().any(|x| *x <= 0.0) {
        return Ok(TailModel::truncate());
    }
    Ok(TailModel::Periodic { p: w.p_slice().to_vec(), q: w.q_slice().to_vec() })
}

/// Max over `s` and `c` of
/// `|T^(s)(c) + p̃²_s / T^(s−1)(c) − (T(c) − q̃_s)| / |T(c)|`
/// for consecutive blocks.
pub fn check_recurrence(blocks: &[BlockSpec], seed: &JacobiWindow, t: &HyperbolicPoly) -> Result<f64> {
    let start = blocks.first().map(|b| b.s).unwrap_or(0);
    let tvals: Vec<Vec<f64>> = blocks.iter().map(|b| b.tvals.clone()).collect();
    check_recurrence_tvals(&tvals, start, seed, t)
}

/// [`check_recurrence`] on raw branch values `tvals[s − start][c]`.
pub fn check_recurrence_tvals(
    tvals: &[Vec<f64>],
    start: i64,
    seed: &JacobiWindow,
    t: &HyperbolicPoly,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 1..tvals.len() {
        let s = start + i as i64;
        let p = seed.p_at(s).ok_or(Error::WindowExhausted { index: s, reason: "p".into() })?;
        let q = seed.q_at(s).ok_or(Error::WindowExhausted { index: s, reason: "q".into() })?;
        for (j, &tc) in t.critical_values().iter().enumerate() {
            let res = (tvals[i][j] + p * p / tvals[i - 1][j] - (tc - q)).abs() / tc.abs();
            worst = worst.max(res);
        }
    }
    Ok(worst)
}

/// Default sample points: `±(ξ + kξ)` for `k = 1, …, 4`.
pub fn default_z_samples(t: &HyperbolicPoly) -> Vec<f64> {
    let xi = t.xi();
    (1..=4).flat_map(|k| [xi * (1.0 + k as f64), -xi * (1.0 + k as f64)]).collect()
}

/// Options of the finite-section checks.
#[derive(Debug, Clone)]
pub struct SectionCheck {
    /// Size of the finite sections of `J`.
    pub n_sec: usize,
    /// Half-width (in units of `d`) of the compared central window.
    pub central: usize,
    /// Index `k₀` of the central site of `J̃` (site `d k₀` of `J`).
    pub center: i64,
    pub z_samples: Vec<f64>,
}

impl SectionCheck {
    pub fn new(t: &HyperbolicPoly, center: i64) -> Self {
        SectionCheck { n_sec: 600, central: 4, center, z_samples: default_z_samples(t) }
    }

    /// Centre of `J` in units of `d`.
    pub fn centred_on(j: &JacobiWindow, t: &HyperbolicPoly) -> Self {
        let d = t.degree() as i64;
        let mid = (j.first() + j.last()).div_euclid(2);
        SectionCheck::new(t, mid.div_euclid(d))
    }
}

/// Residual of `V*(z − J)⁻¹V = T′(z)/d · (T(z) − J̃)⁻¹` at one section size.
///
/// Entries `(dk, dl)` with `|k − k₀|, |l − k₀| ≤ central` are compared; the
/// result is the largest deviation divided by the largest right-hand entry.
pub fn renorm_equation_residual(
    j: &JacobiWindow,
    seed: &JacobiWindow,
    t: &HyperbolicPoly,
    opts: &SectionCheck,
    n_sec: usize,
) -> Result<f64> {
    let d = t.degree() as i64;
    let c = opts.center * d;
    let half = (n_sec / 2) as i64;
    let (jd, jo) = j.section(c - half, c + half)?;
    let half_t = half / d + opts.central as i64 + 2;
    let k0 = opts.center;
    let (sd, so) = seed.section(k0 - half_t, k0 + half_t)?;
    let k_range = -(opts.central as i64)..=opts.central as i64;
    let mut worst = 0.0f64;
    for &z in &opts.z_samples {
        let (tz, t1, _) = t.eval_derivs(z);
        let ad: Vec<f64> = jd.iter().map(|x| z - x).collect();
        let ao: Vec<f64> = jo.iter().map(|x| -x).collect();
        let bd: Vec<f64> = sd.iter().map(|x| tz - x).collect();
        let bo: Vec<f64> = so.iter().map(|x| -x).collect();
        let mut dev = 0.0f64;
        let mut scale = 0.0f64;
        for l in k_range.clone() {
            let mut e = vec![0.0; ad.len()];
            e[(half + l * d) as usize] = 1.0;
            let x = solve_tridiagonal(&ad, &ao, &e);
            let mut f = vec![0.0; bd.len()];
            f[(half_t + l) as usize] = 1.0;
            let y = solve_tridiagonal(&bd, &bo, &f);
            for k in k_range.clone() {
                let lhs = x[(half + k * d) as usize];
                let rhs = t1 / d as f64 * y[(half_t + k) as usize];
                dev = dev.max((lhs - rhs).abs());
                scale = scale.max(rhs.abs());
            }
        }
        worst = worst.max(dev / scale);
    }
    Ok(worst)
}

/// Result of the renormalization-equation check at sizes `n_sec / 2` and `n_sec`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EquationCheck {
    pub residual: f64,
    pub residual_half: f64,
    /// Doubling the section size at least halves the residual, or both are
    /// already at the rounding floor.
    pub truncation_consistent: bool,
}

/// Rounding floor below which the doubling test is considered saturated.
pub const SECTION_FLOOR: f64 = 1e-12;

pub fn check_renorm_equation(
    j: &JacobiWindow,
    seed: &JacobiWindow,
    t: &HyperbolicPoly,
    opts: &SectionCheck,
) -> Result<EquationCheck> {
    let residual = renorm_equation_residual(j, seed, t, opts, opts.n_sec)?;
    let residual_half = renorm_equation_residual(j, seed, t, opts, opts.n_sec / 2)?;
    let truncation_consistent =
        residual <= 0.5 * residual_half || residual.max(residual_half) <= SECTION_FLOOR;
    Ok(EquationCheck { residual, residual_half, truncation_consistent })
}

/// `(res1, res2)`: `V* T(J) = J̃ V*` on interior rows and
/// `V* [(T(z) − T(J))/(z − J)] V = T′(z)/d` at the sample points.
///
/// `res1` is relative to `Σ_k |a_k| ξ^k`, `res2` to `|T′(z)/d|`.
pub fn check_polynomial_form(
    j: &JacobiWindow,
    seed: &JacobiWindow,
    t: &HyperbolicPoly,
    opts: &SectionCheck,
) -> Result<(f64, f64)> {
    let d = t.degree() as i64;
    let coeffs = t.expanded().coeffs();
    let margin = d * d;
    let k_half = opts.central as i64;
    let c = opts.center * d;
    let lo = c - k_half * d - margin;
    let hi = c + k_half * d + margin;
    let (jd, jo) = j.section(lo, hi)?;
    let xi = t.xi();
    let scale1: f64 = coeffs.iter().enumerate().map(|(k, a)| a.abs() * xi.powi(k as i32)).sum();
    let tj = matrix_polynomial(coeffs, &jd, &jo);
    let mut res1 = 0.0f64;
    for k in -k_half..=k_half {
        let kk = opts.center + k;
        let row = (c + k * d - lo) as usize;
        for col in row.saturating_sub(d as usize)..=(row + d as usize).min(jd.len() - 1) {
            let abs_col = lo + col as i64;
            let expect = if (abs_col - c).rem_euclid(d) == 0 {
                let l = opts.center + (abs_col - c).div_euclid(d);
                seed_entry(seed, kk, l)?
            } else {
                0.0
            };
            res1 = res1.max((tj.get(row, col) - expect).abs() / scale1);
        }
    }
    let mut res2 = 0.0f64;
    for &z in &opts.z_samples {
        // b_i(z) = Σ_{k>i} a_k z^{k−1−i}
        let b: Vec<f64> = (0..d as usize)
            .map(|i| (i + 1..coeffs.len()).map(|k| coeffs[k] * z.powi((k - 1 - i) as i32)).sum::<f64>())
            .collect();
        let bj = matrix_polynomial(&b, &jd, &jo);
        let target = t.eval_derivs(z).1 / d as f64;
        for k in -k_half..=k_half {
            for l in -k_half..=k_half {
                let r = (c + k * d - lo) as usize;
                let s = (c + l * d - lo) as usize;
                let expect = if k == l { target } else { 0.0 };
                res2 = res2.max((bj.get(r, s) - expect).abs() / target.abs());
            }
        }
    }
    Ok((res1, res2))
}

fn seed_entry(seed: &JacobiWindow, k: i64, l: i64) -> Result<f64> {
    let missing = |i| Error::WindowExhausted { index: i, reason: "seed entry".into() };
    Ok(match l - k {
        0 => seed.q_at(k).ok_or_else(|| missing(k))?,
        1 => seed.p_at(l).ok_or_else(|| missing(l))?,
        -1 => seed.p_at(k).ok_or_else(|| missing(k))?,
        _ => 0.0,
    })
}

/// Measure `σ^(s)` on the critical points with weights `−d T^(s)(c) / T″(c)`,
/// together with the relative residuals of `Σ w = p²_{sd+1}` and
/// `∫ dσ / T^(s)(c)² = p²_{(s+1)d} / p̃²_{s+1}`.
pub fn sigma_s(
    block: &BlockSpec,
    seed: &JacobiWindow,
    t: &HyperbolicPoly,
) -> Result<(DiscreteMeasure, f64, f64)> {
    let d = t.degree() as f64;
    let weights: Vec<f64> =
        t.critical_points().iter().zip(&block.tvals).map(|(&c, &v)| -d * v / t.eval_derivs(c).2).collect();
    let measure = DiscreteMeasure::new(t.critical_points().to_vec(), weights)?;
    let p1 = block.off[0];
    let mass_res = (measure.mass() - p1 * p1).abs() / (p1 * p1);
    let pt =
        seed.p_at(block.s + 1).ok_or(Error::WindowExhausted { index: block.s + 1, reason: "p".into() })?;
    let lhs: f64 = measure.weights.iter().zip(&block.tvals).map(|(w, v)| w / (v * v)).sum();
    let rhs = (block.glue_p / pt).powi(2);
    Ok((measure, mass_res, (lhs - rhs).abs() / rhs))
}

/// All `2^(d−1)` solutions on `window`.
pub fn enumerate_branches(
    seed: &JacobiWindow,
    t: &HyperbolicPoly,
    window: RangeInclusive<i64>,
) -> Result<Vec<(BranchVector, JacobiWindow)>> {
    let n = t.critical_points().len();
    if n > 16 {
        return Err(Error::BranchLength { got: n, expected: 16 });
    }
    BranchVector::all(n)
        .into_iter()
        .map(|b| renormalize(seed, &b, t, window.clone()).map(|j| (b, j)))
        .collect()
}

/// Max entrywise deviation between `S^{d−1} J(J̃, δ)_τ S^{1−d}` and
/// `J(J̃_τ, −δ)` on the reflected window, where `τ` is `k ↦ 1 − k`.
pub fn dual_branch_check(
    seed: &JacobiWindow,
    delta: &BranchVector,
    t: &HyperbolicPoly,
    window: RangeInclusive<i64>,
) -> Result<f64> {
    let d = t.degree() as i64;
    let j = renormalize(seed, delta, t, window)?;
    let lhs = j.reflect().shift(1 - d);
    let rhs = renormalize(&seed.reflect(), &delta.negated(), t, lhs.range())?;
    let dist = lhs.entrywise_distance_on(&rhs, lhs.first() + 1, lhs.last())?;
    Ok(dist.dp.max(dist.dq))
}

/// Relative residuals of
///
/// ```text
/// r̃₋(T(z), 0)⁻¹ = r₋(z, 0)⁻¹ T′(z)/d + p₁² p̃₁ R_d(z)
/// r̃₊(T(z), 1)⁻¹ = r₊(z, d)⁻¹ T′(z)/d + p_d² p̃₁ R′_d(z)
/// ```
///
/// with `R_d = det(z − J[2..d−1]) / (p₁⋯p_d)` and
/// `R′_d = det(z − J[1..d−2]) / (p₁⋯p_d)`, both evaluated by the
/// three-term determinant recursion on block 0.
pub fn check_re0(
    j: &JacobiWindow,
    seed: &JacobiWindow,
    t: &HyperbolicPoly,
    z_samples: &[f64],
) -> Result<f64> {
    let d = t.degree() as i64;
    let (bd, bo) = j.section(0, d - 1)?;
    let pd = j.p_at(d).ok_or(Error::WindowExhausted { index: d, reason: "p".into() })?;
    let prod: f64 = bo.iter().product::<f64>() * pd;
    let p1 = if d >= 2 { bo[0] } else { pd };
    let pt1 = seed.p_at(1).ok_or(Error::WindowExhausted { index: 1, reason: "p".into() })?;
    let mut worst = 0.0f64;
    for &z in z_samples {
        let (tz, t1, _) = t.eval_derivs(z);
        let rd = det_recursion(&bd[2.min(bd.len())..], &bo[2.min(bo.len())..], z) / prod;
        let rd_right = det_recursion(
            &bd[1..(d as usize - 1).max(1)],
            if d >= 3 { &bo[1..d as usize - 2] } else { &[] },
            z,
        ) / prod;
        let lhs = 1.0 / seed.resolvent_minus(tz, 0)?;
        let rhs = t1 / d as f64 / j.resolvent_minus(z, 0)? + p1 * p1 * pt1 * rd;
        worst = worst.max((lhs - rhs).abs() / lhs.abs());
        let lhs = 1.0 / seed.resolvent_plus(tz, 1)?;
        let rhs = t1 / d as f64 / j.resolvent_plus(z, d)? + pd * pd * pt1 * rd_right;
        worst = worst.max((lhs - rhs).abs() / lhs.abs());
    }
    Ok(worst)
}

/// `det(z − B)` for the tridiagonal `B` with the given entries (empty → 1).
fn det_recursion(diag: &[f64], off: &[f64], z: f64) -> f64 {
    let mut prev = 1.0;
    let mut cur = 1.0;
    for (i, &q) in diag.iter().enumerate() {
        let next = if i == 0 { z - q } else { (z - q) * cur - off[i - 1] * off[i - 1] * prev };
        prev = cur;
        cur = next;
    }
    cur
}
