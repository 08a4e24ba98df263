//! Quadratic case: even/odd splitting and the Darboux factorization.
//!
//! For `T(x) = ρx² + 1 − ρ` the renormalized matrix `J = R_T(J̃)` has zero
//! diagonal, so in the even/odd decomposition it reads `[[0, Φ*], [Φ, 0]]`.
//! Row `m` of `Φ` is the odd site `2m + 1`, coupled to the even sites `2m`
//! and `2m + 2`:
//!
//! ```text
//! Φ[m, m] = p_{2m+1},   Φ[m, m+1] = p_{2m+2}
//! ```
//!
//! Then `ρΦ*Φ + (1 − ρ)I = J̃` (even sites, `2m ↦ m`) and the swapped product
//! `ρΦΦ* + (1 − ρ)I` is the Darboux transform.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobi::{JacobiWindow, TailModel};
use crate::poly::HyperbolicPoly;
use crate::renorm::{renormalize, BranchVector};
use crate::spectral::{symmetric_eigenvalues, tridiagonal_dense};

/// Bound on `sup |q_k|` accepted by [`split_even_odd`].
pub const ZERO_DIAG_TOL: f64 = 1e-10;

/// Bidiagonal factor: `main[i] = Φ[m, m]`, `upper[i] = Φ[m, m+1]` for `m = offset + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoDiagonalFactor {
    pub main: Vec<f64>,
    pub upper: Vec<f64>,
    pub offset: i64,
}

impl TwoDiagonalFactor {
    pub fn len(&self) -> usize {
        self.main.len()
    }

    pub fn is_empty(&self) -> bool {
        self.main.is_empty()
    }

    pub fn rows(&self) -> std::ops::RangeInclusive<i64> {
        self.offset..=self.offset + self.main.len() as i64 - 1
    }

    /// Dense block with rows `lo..=hi` and columns `lo..=hi + 1`.
    pub fn dense(&self, lo: i64, hi: i64) -> Result<DMatrix<f64>> {
        if lo < self.offset || hi > *self.rows().end() || lo > hi {
            return Err(Error::InvalidWindow(format!("rows {lo}..={hi} outside factor {:?}", self.rows())));
        }
        let n = (hi - lo + 1) as usize;
        let mut a = DMatrix::zeros(n, n + 1);
        for r in 0..n {
            let i = (lo - self.offset) as usize + r;
            a[(r, r)] = self.main[i];
            a[(r, r + 1)] = self.upper[i];
        }
        Ok(a)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        wr.write_record(["m", "main", "upper"]).map_err(io)?;
        for (i, (a, b)) in self.main.iter().zip(&self.upper).enumerate() {
            let m = self.offset + i as i64;
            wr.write_record([m.to_string(), format!("{a:.16e}"), format!("{b:.16e}")]).map_err(io)?;
        }
        wr.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Reads `Φ` off a zero-diagonal window. Returns the factor and `sup |q_k|`.
pub fn split_even_odd(j: &JacobiWindow) -> Result<(TwoDiagonalFactor, f64)> {
    let residual = j.q_slice().iter().fold(0.0f64, |a, q| a.max(q.abs()));
    if residual > ZERO_DIAG_TOL {
        return Err(Error::NonzeroDiagonal { residual });
    }
    // rows m with 2m ≥ first and 2m + 2 ≤ last
    let lo = j.first().div_euclid(2) + (j.first().rem_euclid(2) != 0) as i64;
    let hi = (j.last() - 2).div_euclid(2);
    if lo > hi {
        return Err(Error::InvalidWindow("window too short to split".into()));
    }
    let mut main = Vec::new();
    let mut upper = Vec::new();
    for m in lo..=hi {
        main.push(j.p_at(2 * m + 1).unwrap());
        upper.push(j.p_at(2 * m + 2).unwrap());
    }
    Ok((TwoDiagonalFactor { main, upper, offset: lo }, residual))
}

/// Residuals of the factorization identities and the Darboux transform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DarbouxCheck {
    /// `max |ρΦ*Φ + (1 − ρ)I − J̃|` on interior entries.
    pub res_in: f64,
    /// Largest entry of `ΦΦ*` outside the three central diagonals.
    pub res_out: f64,
    pub darb: JacobiWindow,
}

/// Rows trimmed from each end of the dense products.
const BOUNDARY: i64 = 1;

/// Checks `ρΦ*Φ + (1 − ρ)I = J̃` and returns `ρΦΦ* + (1 − ρ)I` as a window.
pub fn check_darboux(phi: &TwoDiagonalFactor, jt: &JacobiWindow, rho_quad: f64) -> Result<DarbouxCheck> {
    let lo = phi.offset.max(jt.first());
    let hi = (*phi.rows().end()).min(jt.last() - 1);
    if hi - lo < 2 * BOUNDARY + 1 {
        return Err(Error::DisjointWindows);
    }
    let a = phi.dense(lo, hi)?;
    let n = a.nrows();
    // Φ*Φ on even sites lo..=hi+1
    let ata = a.transpose() * &a;
    let mut res_in = 0.0f64;
    for r in BOUNDARY as usize..n + 1 - BOUNDARY as usize {
        let m = lo + r as i64;
        for c in r.saturating_sub(2)..(r + 3).min(n + 1) {
            let mc = lo + c as i64;
            let target = match (mc - m).abs() {
                0 => jt.q_at(m).unwrap(),
                1 => jt.p_at(m.max(mc)).unwrap(),
                _ => 0.0,
            };
            let id = if r == c { 1.0 - rho_quad } else { 0.0 };
            res_in = res_in.max((rho_quad * ata[(r, c)] + id - target).abs());
        }
    }
    let aat = &a * a.transpose();
    let mut res_out = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            if r.abs_diff(c) > 1 {
                res_out = res_out.max(aat[(r, c)].abs());
            }
        }
    }
    // Darb at odd row m: q′_m, and p′_m couples rows m − 1 and m
    let q: Vec<f64> = (0..n).map(|r| rho_quad * aat[(r, r)] + 1.0 - rho_quad).collect();
    let p: Vec<f64> = (0..n).map(|r| if r == 0 { 0.0 } else { rho_quad * aat[(r - 1, r)] }).collect();
    let tail = TailModel::Truncate { depth: crate::jacobi::DEFAULT_TRUNCATE_DEPTH };
    let darb = JacobiWindow::new(lo, q, p, tail.clone(), tail)?;
    Ok(DarbouxCheck { res_in, res_out, darb })
}

/// Renormalizes `jt` with `T(x) = ρx² + 1 − ρ`, splits, and checks the factorization.
/// The output window covers `2·lo..=2·hi + 2`.
pub fn darboux_transform(
    jt: &JacobiWindow,
    rho_quad: f64,
    lo: i64,
    hi: i64,
) -> Result<(TwoDiagonalFactor, DarbouxCheck)> {
    let t = HyperbolicPoly::quadratic(rho_quad)?;
    let j = renormalize(jt, &BranchVector::minus(1), &t, 2 * lo..=2 * hi + 2)?;
    let (phi, _) = split_even_odd(&j)?;
    let chk = check_darboux(&phi, jt, rho_quad)?;
    Ok((phi, chk))
}

/// Smallest eigenvalue of `(J̃ − (1 − ρ)I)/ρ` on the `n`-section starting at `lo`.
pub fn positivity_margin(jt: &JacobiWindow, rho_quad: f64, lo: i64, n: usize) -> Result<f64> {
    let (d, o) = jt.section(lo, lo + n as i64 - 1)?;
    let ev = symmetric_eigenvalues(tridiagonal_dense(&d, &o));
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((min - (1.0 - rho_quad)) / rho_quad)
}

/// Largest gap between the spectra of `Φ*Φ` and `ΦΦ*` on an `n`-row section,
/// after dropping the extra zero mode of `Φ*Φ`.
pub fn factor_swap_gap(phi: &TwoDiagonalFactor, lo: i64, n: usize) -> Result<f64> {
    let a = phi.dense(lo, lo + n as i64 - 1)?;
    let mut big = symmetric_eigenvalues(a.transpose() * &a);
    let mut small = symmetric_eigenvalues(&a * a.transpose());
    big.sort_by(|x, y| x.total_cmp(y));
    small.sort_by(|x, y| x.total_cmp(y));
    Ok(big[1..].iter().zip(&small).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Range of the Darboux-transform spectrum surrogate on an `n`-section.
pub fn darb_section_spectrum(darb: &JacobiWindow, n: usize) -> Result<(f64, f64)> {
    let lo = darb.first() + 1;
    let hi = (lo + n as i64 - 1).min(darb.last() - 1);
    let (d, o) = darb.section(lo, hi)?;
    let ev = symmetric_eigenvalues(tridiagonal_dense(&d, &o));
    Ok(ev.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x))))
}

/// Random admissible seed: `|q| ≤ 0.1`, `p ∈ [0.3, 0.45]`, so Gershgorin keeps it in `[−1, 1]`.
pub fn random_admissible<R: Rng>(rng: &mut R, lo: i64, hi: i64) -> Result<JacobiWindow> {
    let n = (hi - lo + 1) as usize;
    let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.1..=0.1)).collect();
    let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..=0.45)).collect();
    let tail = TailModel::Truncate { depth: crate::jacobi::DEFAULT_TRUNCATE_DEPTH };
    Ok(JacobiWindow::new(lo, q, p, tail.clone(), tail)?.with_spectral_interval(-1.0, 1.0))
}

/// Sup-norm entrywise distance between Darboux transforms over the distance between seeds.
/// Seeds are compared on the central `lo..=hi`, transforms on the rows both cover.
pub fn darboux_ratio(a: &JacobiWindow, b: &JacobiWindow, rho_quad: f64, lo: i64, hi: i64) -> Result<f64> {
    let (_, ca) = darboux_transform(a, rho_quad, lo, hi)?;
    let (_, cb) = darboux_transform(b, rho_quad, lo, hi)?;
    let dd = ca.darb.entrywise_distance_on(&cb.darb, lo + 1, hi - 1)?;
    let ds = a.entrywise_distance_on(b, lo, hi)?;
    let den = ds.dp.max(ds.dq);
    if den == 0.0 {
        return Err(Error::DegenerateMeasure("identical seeds".into()));
    }
    Ok(dd.dp.max(dd.dq) / den)
}

/// Sweep result for the Lipschitz corollary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub rhos: Vec<f64>,
    /// Largest ratio per `ρ`.
    pub max_ratio: Vec<f64>,
    /// `max_ratio · (ρ − 2)/(2ρ)` per `ρ`.
    pub c_per_rho: Vec<f64>,
    /// Fitted constant: the largest entry of `c_per_rho`.
    pub c_hat: f64,
    pub coefficient_of_variation: f64,
    /// Every ratio is at most `2ρĈ/(ρ − 2)`.
    pub bounded: bool,
    pub cv_ok: bool,
}

/// Largest ratio over `pairs` random pairs; each pair is a random seed and a
/// perturbation of size `h` on the central window.
pub fn darboux_lipschitz<R: Rng>(rng: &mut R, rho_quad: f64, pairs: usize, h: f64) -> Result<f64> {
    let (lo, hi) = (-40, 40);
    let seeds: Vec<(JacobiWindow, JacobiWindow)> = (0..pairs)
        .map(|_| {
            let a = random_admissible(rng, -200, 200)?;
            let q = a.q_slice().iter().map(|q| q + rng.gen_range(-h..=h)).collect();
            let p = a.p_slice().iter().map(|p| p + rng.gen_range(-h..=h)).collect();
            let b = a.with_entries(q, p)?;
            Ok((a, b))
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> =
        seeds.par_iter().map(|(a, b)| darboux_ratio(a, b, rho_quad, lo, hi)).collect::<Result<_>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Runs [`darboux_lipschitz`] over `rhos` and fits `Ĉ`.
pub fn lipschitz_sweep<R: Rng>(rng: &mut R, rhos: &[f64], pairs: usize, h: f64) -> Result<LipschitzReport> {
    let max_ratio: Vec<f64> =
        rhos.iter().map(|&r| darboux_lipschitz(rng, r, pairs, h)).collect::<Result<_>>()?;
    let c_per_rho: Vec<f64> = rhos.iter().zip(&max_ratio).map(|(r, m)| m * (r - 2.0) / (2.0 * r)).collect();
    let c_hat = c_per_rho.iter().copied().fold(0.0, f64::max);
    let n = c_per_rho.len() as f64;
    let mean = c_per_rho.iter().sum::<f64>() / n;
    let var = c_per_rho.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
    let cv = var.sqrt() / mean;
    let bounded = rhos.iter().zip(&max_ratio).all(|(r, m)| *m <= 2.0 * r * c_hat / (r - 2.0) * (1.0 + 1e-12));
    Ok(LipschitzReport {
        rhos: rhos.to_vec(),
        max_ratio,
        c_per_rho,
        c_hat,
        coefficient_of_variation: cv,
        bounded,
        cv_ok: cv <= 0.5,
    })
}
