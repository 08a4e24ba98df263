//! Measures on the Julia set and the Jacobi coefficients they generate.
//!
//! Both measures are discretized by backward orbits of the fixed point at the
//! right end of the invariant interval: the balanced measure carries equal
//! weights, the eigenmeasure of `(L₂ f)(x) = Σ_{T(y)=x} f(y)/T′(y)²` carries
//! weights renormalized after every spreading step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobi::JacobiWindow;
use crate::poly::{HyperbolicPoly, MAX_SAMPLES};
use crate::spectral::lanczos;

/// Nonnegative weights summing to one on real points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSamples {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WeightedSamples {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return Err(Error::DegenerateMeasure("points and weights must match".into()));
        }
        if let Some(i) = weights.iter().position(|w| !(*w >= 0.0)) {
            return Err(Error::NegativeWeight { weight: weights[i], at: points[i] });
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::DegenerateMeasure(format!("total weight {total}")));
        }
        Ok(WeightedSamples { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn moment(&self, k: i32) -> f64 {
        self.integrate(|x| x.powi(k))
    }

    /// Number of distinct support points (relative gap `1e−12`).
    pub fn distinct_points(&self) -> usize {
        let mut pts: Vec<f64> =
            self.points.iter().zip(&self.weights).filter(|(_, w)| **w > 0.0).map(|(x, _)| *x).collect();
        pts.sort_by(|a, b| a.total_cmp(b));
        let scale = pts.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        1 + pts.windows(2).filter(|w| w[1] - w[0] > 1e-12 * scale).count()
    }

    /// Largest distance of a point from `[−ξ, ξ]`.
    pub fn excess_beyond(&self, xi: f64) -> f64 {
        self.points.iter().map(|x| (x.abs() - xi).max(0.0)).fold(0.0, f64::max)
    }
}

fn check_budget(degree: usize, depth: usize) -> Result<()> {
    let total = (degree as f64).powi(depth as i32);
    if total > MAX_SAMPLES as f64 {
        return Err(Error::SampleBudget(total as usize));
    }
    Ok(())
}

/// One layer of preimages for every point, in parallel.
fn spread<F>(points: &[f64], preimages: &F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    let chunks: Vec<Vec<f64>> = points.par_iter().map(|&x| preimages(x)).collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Equal weights on the depth-`depth` backward orbit of `seed`.
pub fn balanced_measure_from<F>(
    preimages: F,
    degree: usize,
    seed: f64,
    depth: usize,
) -> Result<WeightedSamples>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    check_budget(degree, depth)?;
    let mut pts = vec![seed];
    for _ in 0..depth {
        pts = spread(&pts, &preimages)?;
    }
    let w = 1.0 / pts.len() as f64;
    let n = pts.len();
    WeightedSamples::new(pts, vec![w; n])
}

/// Balanced measure of `t` discretized at depth `depth`.
pub fn balanced_measure(t: &HyperbolicPoly, depth: usize) -> Result<WeightedSamples> {
    balanced_measure_from(|x| t.preimages(x), t.degree(), t.julia_seed(), depth)
}

/// Largest change of the moments of order `0..=max_order` under one more
/// preimage layer, relative to `ξ^k`.
pub fn moment_stability(t: &HyperbolicPoly, m: &WeightedSamples, max_order: i32) -> Result<f64> {
    let next = spread(&m.points, &|x| t.preimages(x))?;
    let w = 1.0 / next.len() as f64;
    let n = next.len();
    let next = WeightedSamples::new(next, vec![w; n])?;
    let xi = t.xi();
    Ok((0..=max_order).map(|k| (next.moment(k) - m.moment(k)).abs() / xi.powi(k)).fold(0.0, f64::max))
}

/// Largest relative deviation of `∫ (T′(z)/d)/(T(z) − x) dω(x)` from
/// `∫ dω(x)/(z − x)` over `z_samples`.
pub fn balanced_renorm_identity(t: &HyperbolicPoly, m: &WeightedSamples, z_samples: &[f64]) -> f64 {
    let d = t.degree() as f64;
    z_samples
        .iter()
        .map(|&z| {
            let (tz, t1, _) = t.eval_derivs(z);
            let lhs = m.integrate(|x| t1 / d / (tz - x));
            let rhs = m.integrate(|x| 1.0 / (z - x));
            (lhs - rhs).abs() / rhs.abs()
        })
        .fold(0.0, f64::max)
}

/// One-sided Jacobi coefficients of a measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneSided {
    /// `q₀, …, q_{n−1}`.
    pub q: Vec<f64>,
    /// `p₁, …, p_n`.
    pub p: Vec<f64>,
}

/// Margin between the number of requested coefficients and distinct atoms
/// above which quadrature exactness is considered comfortable.
pub const EXACTNESS_MARGIN: usize = 4;

/// `n` steps of the Stieltjes procedure (Lanczos with full
/// reorthogonalization). Needs at least `n + 1` distinct atoms.
pub fn jacobi_from_measure(m: &WeightedSamples, n: usize) -> Result<OneSided> {
    let distinct = m.distinct_points();
    if distinct < n + 1 {
        return Err(Error::DegenerateMeasure(format!(
            "{n} coefficients need at least {} distinct atoms, got {distinct}",
            n + 1
        )));
    }
    let (mut q, p) = lanczos(&m.points, &m.weights, n + 1)?;
    q.truncate(n);
    Ok(OneSided { q, p })
}

/// `true` when `n` coefficients sit within the exactness margin of `m`.
pub fn within_exactness_margin(m: &WeightedSamples, n: usize) -> bool {
    n * EXACTNESS_MARGIN <= m.distinct_points()
}

/// Largest relative deviation between the moments `⟨0|J^k|0⟩` of the
/// truncated matrix and those of `m`, for `k ≤ 2n − 1`, relative to `ξ^k`.
pub fn moment_consistency(m: &WeightedSamples, c: &OneSided, xi: f64) -> f64 {
    let n = c.q.len();
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    let mut worst = 0.0f64;
    for k in 0..2 * n {
        let jm = v[0];
        worst = worst.max((jm - m.moment(k as i32)).abs() / xi.powi(k as i32));
        let mut next = vec![0.0; n];
        for i in 0..n {
            let mut s = c.q[i] * v[i];
            if i > 0 {
                s += c.p[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s += c.p[i] * v[i + 1];
            }
            next[i] = s;
        }
        v = next;
    }
    worst
}

/// `J₊(0)`: `q₀, …, q_{n−1}` and `p₁, …, p_n` of a two-sided window.
pub fn right_half(j: &JacobiWindow, n: usize) -> Result<OneSided> {
    let q = (0..n as i64).map(|k| entry(j.q_at(k), k)).collect::<Result<_>>()?;
    let p = (1..=n as i64).map(|k| entry(j.p_at(k), k)).collect::<Result<_>>()?;
    Ok(OneSided { q, p })
}

/// `J₋(−1)` read from site `−1` leftwards: `q′_k = q_{−1−k}`, `p′_k = p_{−k}`.
pub fn left_half_reflected(j: &JacobiWindow, n: usize) -> Result<OneSided> {
    let q = (0..n as i64).map(|k| entry(j.q_at(-1 - k), -1 - k)).collect::<Result<_>>()?;
    let p = (1..=n as i64).map(|k| entry(j.p_at(-k), -k)).collect::<Result<_>>()?;
    Ok(OneSided { q, p })
}

fn entry(v: Option<f64>, k: i64) -> Result<f64> {
    v.ok_or(Error::WindowExhausted { index: k, reason: "coefficient outside window".into() })
}

/// Largest entrywise deviation between two coefficient lists.
pub fn max_deviation(a: &OneSided, b: &OneSided) -> f64 {
    a.q.iter().zip(&b.q).chain(a.p.iter().zip(&b.p)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Deviation between the balanced-measure coefficients and `J₊(0)` of `fixed`.
pub fn compare_fixedpoint_balanced(
    t: &HyperbolicPoly,
    depth: usize,
    n: usize,
    fixed: &JacobiWindow,
) -> Result<f64> {
    let m = balanced_measure(t, depth)?;
    let a = jacobi_from_measure(&m, n)?;
    let b = right_half(fixed, n)?;
    Ok(max_deviation(&a, &b))
}

/// Result of the `L₂*` power iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuelleEigen {
    pub measure: WeightedSamples,
    pub rho_ruelle: f64,
    /// `rho` estimates per spreading step.
    pub history: Vec<f64>,
}

/// Convergence tolerance for successive eigenvalue estimates.
pub const RUELLE_TOL: f64 = 1e-10;

fn ruelle_step(t: &HyperbolicPoly, m: &WeightedSamples) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let spawned: Vec<Vec<(f64, f64)>> = m
        .points
        .par_iter()
        .zip(&m.weights)
        .map(|(&x, &w)| {
            t.preimages(x).map(|ys| {
                ys.into_iter()
                    .map(|y| {
                        let d1 = t.eval_derivs(y).1;
                        (y, w / (d1 * d1))
                    })
                    .collect()
            })
        })
        .collect::<Result<_>>()?;
    let (pts, ws): (Vec<f64>, Vec<f64>) = spawned.into_iter().flatten().unzip();
    let mass: f64 = ws.iter().sum();
    Ok((pts, ws, mass))
}

/// Power iteration of the adjoint of `L₂` started from the fixed point
/// `T(ξ) = ξ`; each step spreads every atom to its preimages with weight
/// `w / T′(y)²` and renormalizes. Runs `depth` steps and requires the last
/// two eigenvalue estimates to agree to [`RUELLE_TOL`].
pub fn ruelle_l2_eigen(t: &HyperbolicPoly, depth: usize) -> Result<RuelleEigen> {
    check_budget(t.degree(), depth)?;
    let mut m = WeightedSamples::new(vec![t.julia_seed()], vec![1.0])?;
    let mut history = Vec::with_capacity(depth);
    for _ in 0..depth {
        let (pts, ws, mass) = ruelle_step(t, &m)?;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::DegenerateMeasure(format!("transfer mass {mass}")));
        }
        history.push(mass);
        m = WeightedSamples { points: pts, weights: normalize(ws) };
    }
    let change = match history.len() {
        0 | 1 => f64::INFINITY,
        n => (history[n - 1] - history[n - 2]).abs(),
    };
    if !(change <= RUELLE_TOL) {
        return Err(Error::NonConvergence { iters: depth, change });
    }
    let rho_ruelle = *history.last().unwrap();
    Ok(RuelleEigen { measure: m, rho_ruelle, history })
}

fn normalize(mut ws: Vec<f64>) -> Vec<f64> {
    let s: f64 = ws.iter().sum();
    for w in ws.iter_mut() {
        *w /= s;
    }
    ws
}

/// `max_f |∫ f d(L₂*σ) − ρ ∫ f dσ|` for `f ∈ {1, x, x²}`, relative to `ξ^k`.
pub fn ruelle_eigen_residual(t: &HyperbolicPoly, e: &RuelleEigen) -> Result<f64> {
    let (pts, ws, _) = ruelle_step(t, &e.measure)?;
    let xi = t.xi();
    let mut worst = 0.0f64;
    for k in 0..=2 {
        let lhs: f64 = pts.iter().zip(&ws).map(|(x, w)| w * x.powi(k)).sum();
        let rhs = e.rho_ruelle * e.measure.moment(k);
        worst = worst.max((lhs - rhs).abs() / xi.powi(k));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arcsine(depth: usize) -> WeightedSamples {
        // 2z² − 1: preimages ±√((x+1)/2)
        balanced_measure_from(
            |x| {
                let r = ((x + 1.0) / 2.0).max(0.0).sqrt();
                Ok(vec![-r, r])
            },
            2,
            1.0,
            depth,
        )
        .unwrap()
    }

    #[test]
    fn arcsine_moments() {
        let m = arcsine(12);
        assert!((m.moment(2) - 0.5).abs() < 1e-12);
        assert!((m.moment(4) - 0.375).abs() < 1e-12);
    }

    #[test]
    fn arcsine_recurrence() {
        let m = arcsine(12);
        let c = jacobi_from_measure(&m, 20).unwrap();
        assert!((c.p[0] - 0.5f64.sqrt()).abs() < 1e-10);
        for k in 1..20 {
            assert!((c.p[k] - 0.5).abs() < 1e-10, "p_{} = {}", k + 1, c.p[k]);
        }
        assert!(c.q.iter().all(|q| q.abs() < 1e-10));
        assert!(moment_consistency(&m, &c, 1.0) < 1e-10);
    }

    #[test]
    fn atoms() {
        let one = WeightedSamples::new(vec![0.3], vec![1.0]).unwrap();
        assert!(jacobi_from_measure(&one, 1).is_err());
        let two = WeightedSamples::new(vec![-0.7, 0.7], vec![0.5, 0.5]).unwrap();
        let c = jacobi_from_measure(&two, 1).unwrap();
        assert!((c.p[0] - 0.7).abs() < 1e-15);
        assert!(c.q[0].abs() < 1e-15);
        assert!(!within_exactness_margin(&two, 1));
        assert!(WeightedSamples::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn quadratic_balanced_symmetry() {
        let t = HyperbolicPoly::quadratic(12.0).unwrap();
        let m = balanced_measure(&t, 10).unwrap();
        assert!(m.moment(1).abs() < 1e-15);
        assert!(m.excess_beyond(1.0) < 1e-15);
        assert!(moment_stability(&t, &m, 6).unwrap() < 1e-10);
    }

    #[test]
    fn budget_cap() {
        let t = HyperbolicPoly::quadratic(12.0).unwrap();
        assert!(matches!(balanced_measure(&t, 25), Err(Error::SampleBudget(_))));
    }

    #[test]
    fn ruelle_positive() {
        let t = HyperbolicPoly::quadratic(12.0).unwrap();
        let e = ruelle_l2_eigen(&t, 14).unwrap();
        assert!(e.rho_ruelle > 0.0);
        assert!(ruelle_eigen_residual(&t, &e).unwrap() < 1e-9);
    }
}
