//! Fixed-point iteration of the renormalization, polynomial towers and
//! almost-periodicity diagnostics.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobi::{JacobiWindow, TailModel, DEFAULT_TRUNCATE_DEPTH};
use crate::poly::{HyperbolicPoly, PolySequence, DEFAULT_HYPERBOLICITY_THRESHOLD};
use crate::renorm::{renormalize, BranchVector};
use crate::spectral::{symmetric_eigenvalues, tridiagonal_dense};

/// Step distance at which the limit is declared.
pub const LIMIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// Step distance dropped below [`LIMIT_TOL`] at the recorded step.
    Converged { step: usize },
    /// All requested steps were carried out.
    StepBudget,
}

/// Iterates `J_0, J_1, …` with the distances between consecutive iterates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iterates: Vec<JacobiWindow>,
    /// `opnorm_bound(J_{n+1} − J_n)` on the common window.
    pub step_distances: Vec<f64>,
    /// `step_distances[n+1] / step_distances[n]`.
    pub empirical_ratio: Vec<f64>,
    pub stop: StopReason,
}

impl IterationTrace {
    fn start(j0: JacobiWindow) -> Self {
        IterationTrace {
            iterates: vec![j0],
            step_distances: Vec::new(),
            empirical_ratio: Vec::new(),
            stop: StopReason::StepBudget,
        }
    }

    /// Appends an iterate; returns `true` once the limit is declared.
    fn push(&mut self, j: JacobiWindow) -> Result<bool> {
        let prev = self.iterates.last().unwrap();
        let dist = prev.entrywise_distance(&j)?.opnorm_bound;
        if let Some(&last) = self.step_distances.last() {
            self.empirical_ratio.push(if last > 0.0 { dist / last } else { 0.0 });
        }
        self.step_distances.push(dist);
        self.iterates.push(j);
        if dist <= LIMIT_TOL {
            self.stop = StopReason::Converged { step: self.iterates.len() - 1 };
            return Ok(true);
        }
        Ok(false)
    }

    pub fn last(&self) -> &JacobiWindow {
        self.iterates.last().unwrap()
    }

    /// Largest ratio from step `from` on.
    pub fn max_ratio_from(&self, from: usize) -> f64 {
        self.empirical_ratio.iter().skip(from).copied().fold(0.0, f64::max)
    }
}

/// Options shared by the iteration drivers.
#[derive(Debug, Clone)]
pub struct IterateOptions {
    /// Sufficient-hyperbolicity threshold `A`.
    pub threshold: f64,
    /// Iterate even when the threshold is not met; contraction is then only measured.
    pub force: bool,
    /// Continued-fraction depth reserved at the window edges.
    pub depth: usize,
}

impl Default for IterateOptions {
    fn default() -> Self {
        IterateOptions {
            threshold: DEFAULT_HYPERBOLICITY_THRESHOLD,
            force: false,
            depth: DEFAULT_TRUNCATE_DEPTH,
        }
    }
}

/// Sites of `J̃` needed to produce `J(J̃)` on `window`: the window divided by
/// `d`, one block of slack on each side, and the continued-fraction depth.
pub fn required_seed_window(window: &RangeInclusive<i64>, d: usize, depth: usize) -> (i64, i64) {
    let d = d as i64;
    let extra = depth as i64 + 2;
    (window.start().div_euclid(d) - 1 - extra, window.end().div_euclid(d) + 1 + extra)
}

/// Refuses runs whose window cannot feed itself, or whose truncated seed
/// does not cover the required range.
pub fn check_window_budget(
    window: &RangeInclusive<i64>,
    seed: &JacobiWindow,
    degrees: &[usize],
    depth: usize,
) -> Result<()> {
    for &d in degrees {
        let (lo, hi) = required_seed_window(window, d, depth);
        if lo < *window.start() || hi > *window.end() {
            return Err(Error::WindowExhausted {
                index: if lo < *window.start() { lo } else { hi },
                reason: format!(
                    "window {}..={} is too small to renormalize itself for degree {d}",
                    window.start(),
                    window.end()
                ),
            });
        }
        let left_ok = !matches!(seed.tail_left(), TailModel::Truncate { .. }) || seed.first() <= lo;
        let right_ok = !matches!(seed.tail_right(), TailModel::Truncate { .. }) || seed.last() >= hi;
        if !(left_ok && right_ok) {
            return Err(Error::WindowExhausted {
                index: if left_ok { hi } else { lo },
                reason: format!("seed window must cover {lo}..={hi}"),
            });
        }
    }
    Ok(())
}

fn check_hyperbolic(t: &HyperbolicPoly, opts: &IterateOptions) -> Result<()> {
    let gap = t.hyperbolicity_gap();
    if gap < opts.threshold && !opts.force {
        return Err(Error::NotSufficientlyHyperbolic { gap, threshold: opts.threshold });
    }
    Ok(())
}

/// `J_{n+1} = J(δ, J_n; T)` on a fixed window, for `n` steps or until the
/// step distance drops below [`LIMIT_TOL`].
pub fn iterate_fixed(
    t: &HyperbolicPoly,
    delta: &BranchVector,
    j0: &JacobiWindow,
    n: usize,
    window: RangeInclusive<i64>,
    opts: &IterateOptions,
) -> Result<IterationTrace> {
    check_hyperbolic(t, opts)?;
    check_window_budget(&window, j0, &[t.degree()], opts.depth)?;
    let mut trace = IterationTrace::start(crop_or_keep(j0, &window));
    let mut cur = j0.clone();
    for _ in 0..n {
        cur = renormalize(&cur, delta, t, window.clone())?;
        if trace.push(cur.clone())? {
            break;
        }
    }
    Ok(trace)
}

fn crop_or_keep(j: &JacobiWindow, window: &RangeInclusive<i64>) -> JacobiWindow {
    let lo = (*window.start()).max(j.first());
    let hi = (*window.end()).min(j.last());
    j.crop(lo, hi).unwrap_or_else(|_| j.clone())
}

/// Branch choice per tower step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum BranchPolicy {
    /// The same vector at every step.
    Fixed { delta: BranchVector },
    /// `ε_m ∈ {−1, +1}` selects `δ₋` or `δ₊` at step `m` (cycled if shorter
    /// than the tower).
    Sequence { eps: Vec<i8> },
    /// An explicit vector per step (cycled).
    PerStep { deltas: Vec<BranchVector> },
}

impl BranchPolicy {
    pub fn delta_at(&self, m: usize, t: &HyperbolicPoly) -> BranchVector {
        let len = t.critical_points().len();
        match self {
            BranchPolicy::Fixed { delta } => delta.clone(),
            BranchPolicy::Sequence { eps } => {
                if eps[m % eps.len()] > 0 {
                    BranchVector::plus(len)
                } else {
                    BranchVector::minus(len)
                }
            }
            BranchPolicy::PerStep { deltas } => deltas[m % deltas.len()].clone(),
        }
    }
}

/// Tower approximants `J_m = J(J_0; T_m ∘ … ∘ T_1)`, evaluated through the
/// chain rule as `R_{T_1} ∘ R_{T_2} ∘ … ∘ R_{T_m}(J_0)`.
pub fn iterate_sequence(
    ts: &PolySequence,
    policy: &BranchPolicy,
    j0: &JacobiWindow,
    window: RangeInclusive<i64>,
    opts: &IterateOptions,
) -> Result<IterationTrace> {
    for t in ts.polys() {
        check_hyperbolic(t, opts)?;
    }
    check_window_budget(&window, j0, &ts.degrees(), opts.depth)?;
    let mut trace = IterationTrace::start(crop_or_keep(j0, &window));
    for m in 1..=ts.len() {
        let mut cur = j0.clone();
        for k in (0..m).rev() {
            let t = &ts.polys()[k];
            cur = renormalize(&cur, &policy.delta_at(k, t), t, window.clone())?;
        }
        if trace.push(cur)? {
            break;
        }
    }
    Ok(trace)
}

/// `ρ_J(k)` on the ladder `k = d₁⋯d_l · j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct APProfile {
    pub shifts: Vec<i64>,
    /// Layer `l` of each shift.
    pub layers: Vec<usize>,
    pub distances: Vec<f64>,
    /// `max_j ρ_J(d₁⋯d_l · j)` per layer.
    pub layer_max: Vec<f64>,
    /// `max_l (layer_max[l] / 2ξ)^{1/l}`.
    pub kappa_envelope: f64,
    /// `exp` of the least-squares slope of `log layer_max` against `l`.
    pub kappa_fit: f64,
    /// The envelope is geometric: the fitted ratio is clearly below one.
    pub geometric: bool,
    /// Largest violation of `ρ(k + m) ≤ ρ(k) + ρ(m)` over tested pairs (≤ 0 if none).
    pub subadditivity_slack: f64,
}

/// Envelope fits with `kappa_fit` above this are not considered geometric.
pub const GEOMETRIC_FIT_MAX: f64 = 0.8;

/// Almost-periodicity profile of `j` along the degree ladder.
pub fn ap_profile(
    j: &JacobiWindow,
    degrees: &[usize],
    l_max: usize,
    j_max: usize,
    xi: f64,
) -> Result<APProfile> {
    let len = j.len() as i64;
    let mut shifts = Vec::new();
    let mut layers = Vec::new();
    let mut distances = Vec::new();
    let mut layer_max = Vec::new();
    let mut period: i64 = 1;
    for l in 0..=l_max {
        if l > 0 {
            period *= degrees[(l - 1) % degrees.len()] as i64;
        }
        let mut worst = 0.0f64;
        for jj in 1..=j_max as i64 {
            let k = period * jj;
            if 2 * k >= len {
                break;
            }
            let r = shift_distance(j, k)?;
            shifts.push(k);
            layers.push(l);
            distances.push(r);
            worst = worst.max(r);
        }
        if 2 * period >= len {
            break;
        }
        layer_max.push(worst);
    }
    let kappa_envelope = layer_max
        .iter()
        .enumerate()
        .skip(1)
        .map(|(l, &r)| (r / (2.0 * xi)).max(0.0).powf(1.0 / l as f64))
        .fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> =
        layer_max.iter().enumerate().filter(|(_, r)| **r > 1e-300).map(|(l, r)| (l as f64, r.ln())).collect();
    let kappa_fit = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxy / sxx).exp()
    } else {
        0.0
    };
    let mut slack = f64::NEG_INFINITY;
    for a in 0..shifts.len().min(12) {
        for b in a..shifts.len().min(12) {
            let k = shifts[a] + shifts[b];
            if 2 * k < len {
                let v = shift_distance(j, k)? - distances[a] - distances[b];
                slack = slack.max(v);
            }
        }
    }
    Ok(APProfile {
        shifts,
        layers,
        distances,
        layer_max,
        kappa_envelope,
        kappa_fit,
        geometric: kappa_fit < GEOMETRIC_FIT_MAX,
        subadditivity_slack: slack.max(0.0),
    })
}

/// `opnorm_bound(J − S^{−k} J S^k)` on the common stored range.
pub fn shift_distance(j: &JacobiWindow, k: i64) -> Result<f64> {
    let s = j.shift(k);
    let lo = j.first().max(s.first()) + 1;
    let hi = j.last().min(s.last());
    if lo > hi {
        return Err(Error::DisjointWindows);
    }
    Ok(j.entrywise_distance_on(&s, lo, hi)?.opnorm_bound)
}

/// Per-layer decay of the gluing entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitReport {
    pub kappa: f64,
    /// `max p_{s d^l}` over the window, per layer `l`.
    pub layer_max: Vec<f64>,
    /// `2ξκ^l`.
    pub layer_bound: Vec<f64>,
    pub p0: f64,
    /// `2ξκ^n` for the last iterate `n`.
    pub p0_bound: f64,
    pub pass: bool,
}

/// Checks `p_{s d^l} ≤ 2ξκ^l` for `l ≤ n` and `p₀ ≤ 2ξκ^n` on the last iterate.
pub fn split_check(trace: &IterationTrace, d: usize, xi: f64, kappa: f64) -> Result<SplitReport> {
    let n = trace.iterates.len() - 1;
    let j = trace.last();
    let mut layer_max = Vec::new();
    let mut layer_bound = Vec::new();
    let mut stride: i64 = 1;
    for l in 0..=n {
        let mut worst = 0.0f64;
        for k in j.range() {
            if k.rem_euclid(stride) == 0 && k != j.first() {
                worst = worst.max(j.p_at(k).unwrap());
            }
        }
        layer_max.push(worst);
        layer_bound.push(2.0 * xi * kappa.powi(l as i32));
        stride *= d as i64;
        if stride > j.len() as i64 {
            break;
        }
    }
    let p0 = j.p_at(0).ok_or(Error::WindowExhausted { index: 0, reason: "p₀".into() })?;
    let p0_bound = 2.0 * xi * kappa.powi(n as i32);
    let pass = p0 <= p0_bound && layer_max.iter().zip(&layer_bound).all(|(a, b)| a <= b);
    Ok(SplitReport { kappa, layer_max, layer_bound, p0, p0_bound, pass })
}

/// Residues `α_l = k mod d₁⋯d_{l+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InverseLimitAddress {
    pub degrees: Vec<usize>,
    pub residues: Vec<i64>,
}

impl InverseLimitAddress {
    /// Compatibility `α_l mod d₁⋯d_l = α_{l−1}`.
    pub fn is_consistent(&self) -> bool {
        let mut m: i64 = 1;
        for l in 0..self.residues.len() {
            let next = m * self.degrees[l] as i64;
            if self.residues[l] < 0 || self.residues[l] >= next {
                return false;
            }
            if l > 0 && self.residues[l].rem_euclid(m) != self.residues[l - 1] {
                return false;
            }
            m = next;
        }
        true
    }

    /// `κ^l` with `l` the first differing layer, `0` if all recorded layers agree.
    pub fn distance(&self, other: &InverseLimitAddress, kappa: f64) -> f64 {
        self.residues
            .iter()
            .zip(&other.residues)
            .position(|(a, b)| a != b)
            .map(|l| kappa.powi(l as i32))
            .unwrap_or(0.0)
    }
}

pub fn group_address(k: i64, degrees: &[usize]) -> InverseLimitAddress {
    let mut m: i64 = 1;
    let residues = degrees
        .iter()
        .map(|&d| {
            m *= d as i64;
            k.rem_euclid(m)
        })
        .collect();
    InverseLimitAddress { degrees: degrees.to_vec(), residues }
}

/// Smallest `C` with `ρ_J(k) ≤ C · dist_𝕀(k, 0)` over the profile's shifts.
pub fn metric_constant(profile: &APProfile, degrees: &[usize], kappa: f64) -> f64 {
    let zero = group_address(0, degrees);
    profile
        .shifts
        .iter()
        .zip(&profile.distances)
        .filter_map(|(&k, &r)| {
            let dist = group_address(k, degrees).distance(&zero, kappa);
            (dist > 0.0).then_some(r / dist)
        })
        .fold(0.0, f64::max)
}

/// Eigenvalues of the periodic closure of `j` on sites `start .. start+len`
/// (the wrap-around entry is `p_{start+len}`), for `j` periodic with a
/// period dividing `len`.
pub fn periodic_closure_eigenvalues(j: &JacobiWindow, start: i64, len: usize) -> Result<Vec<f64>> {
    let (diag, off) = j.section(start, start + len as i64 - 1)?;
    let mut m = tridiagonal_dense(&diag, &off);
    let wrap = j
        .p_at(start + len as i64)
        .ok_or(Error::WindowExhausted { index: start + len as i64, reason: "wrap".into() })?;
    m[(0, len - 1)] += wrap;
    m[(len - 1, 0)] += wrap;
    Ok(symmetric_eigenvalues(m))
}

/// Largest distance from `eigs` to the union of `intervals`.
pub fn distance_to_union(eigs: &[f64], intervals: &[(f64, f64)]) -> f64 {
    eigs.iter()
        .map(|&x| {
            intervals
                .iter()
                .map(|&(a, b)| {
                    if x < a {
                        a - x
                    } else if x > b {
                        x - b
                    } else {
                        0.0
                    }
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn addresses() {
        let a = group_address(0, &[2, 2, 2]);
        assert_eq!(a.residues, vec![0, 0, 0]);
        let a = group_address(6, &[2, 2, 2, 2]);
        assert_eq!(a.residues, vec![0, 2, 6, 6]);
        assert!(a.is_consistent());
        let b = group_address(6 + 8, &[2, 2, 2, 2]);
        assert_eq!(a.residues[..3], b.residues[..3]);
        assert!((a.distance(&b, 0.5) - 0.125).abs() < 1e-15);
        let mixed = group_address(-5, &[2, 3, 2]);
        assert!(mixed.is_consistent());
        let bad = InverseLimitAddress { degrees: vec![2, 2], residues: vec![1, 2] };
        assert!(!bad.is_consistent());
    }

    #[test]
    fn periodic_profile_vanishes() {
        let j = JacobiWindow::periodic(vec![0.3, 0.6, 0.4, 0.5], vec![0.0; 4], -100, 100).unwrap();
        let prof = ap_profile(&j, &[2], 4, 3, 1.0).unwrap();
        for (&k, &r) in prof.shifts.iter().zip(&prof.distances) {
            if k % 4 == 0 {
                assert_eq!(r, 0.0);
            }
        }
    }

    #[test]
    fn budget_refuses_small_window() {
        let j = JacobiWindow::constant(0.5, 0.0, -10, 10).unwrap();
        assert!(check_window_budget(&(-20..=20), &j, &[2], 24).is_err());
        assert!(check_window_budget(&(-200..=200), &j, &[2], 24).is_ok());
        let mut t = j.clone();
        t.set_tails(TailModel::truncate(), TailModel::truncate()).unwrap();
        assert!(check_window_budget(&(-200..=200), &t, &[2], 24).is_err());
    }
}
