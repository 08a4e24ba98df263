//! Real polynomials with real Julia sets.
//!
//! A [`HyperbolicPoly`] keeps its factors (innermost first) so that compositions
//! are always evaluated factor by factor; the expanded coefficient vector is
//! kept alongside for interpolation and display.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{complex_roots, horner, newton_polish, real_roots};

/// Imaginary-part tolerance for roots that are known to be real.
pub const REAL_ROOT_TOL: f64 = 1e-10;
/// Maximal degree of an expanded composition.
pub const DEFAULT_DEGREE_CAP: usize = 64;
/// Sufficient-hyperbolicity threshold `A`.
pub const DEFAULT_HYPERBOLICITY_THRESHOLD: f64 = 10.0;
/// Upper bound on the number of backward-orbit samples.
pub const MAX_SAMPLES: usize = 1 << 24;

/// Dense real polynomial, coefficients in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Result<Self> {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPolynomial("coefficients must be finite".into()));
        }
        Ok(Poly { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[self.degree()]
    }

    pub fn eval(&self, x: f64) -> f64 {
        horner(&self.coeffs, x)
    }

    /// Value, first and second derivative.
    pub fn eval_derivs(&self, x: f64) -> (f64, f64, f64) {
        let mut v = 0.0;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for &c in self.coeffs.iter().rev() {
            d2 = d2 * x + 2.0 * d1;
            d1 = d1 * x + v;
            v = v * x + c;
        }
        (v, d1, d2)
    }

    pub fn derivative(&self) -> Poly {
        if self.degree() == 0 {
            return Poly { coeffs: vec![0.0] };
        }
        Poly { coeffs: self.coeffs[1..].iter().enumerate().map(|(k, c)| c * (k + 1) as f64).collect() }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|k| self.coeffs.get(k).unwrap_or(&0.0) + other.coeffs.get(k).unwrap_or(&0.0))
            .collect();
        Poly::new(coeffs).unwrap_or(Poly { coeffs: vec![0.0] })
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly { coeffs: out }
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    /// `self ∘ inner` by Horner's rule on polynomials.
    pub fn compose(&self, inner: &Poly) -> Poly {
        let mut acc = Poly { coeffs: vec![self.leading()] };
        for &c in self.coeffs.iter().rev().skip(1) {
            acc = acc.mul(inner).add(&Poly { coeffs: vec![c] });
        }
        acc
    }

    /// `self(a x + b)`.
    pub fn affine_argument(&self, a: f64, b: f64) -> Poly {
        self.compose(&Poly { coeffs: vec![b, a] })
    }

    /// Quotient of synthetic division by `(x - c)`; the remainder is dropped.
    pub fn deflate(&self, c: f64) -> Poly {
        let n = self.degree();
        if n == 0 {
            return Poly { coeffs: vec![0.0] };
        }
        let mut q = vec![0.0; n];
        let mut carry = 0.0;
        for k in (1..=n).rev() {
            carry = carry * c + self.coeffs[k];
            q[k - 1] = carry;
        }
        Poly { coeffs: q }
    }

    /// Chebyshev polynomial of the first kind of degree `n`.
    pub fn chebyshev(n: usize) -> Poly {
        let mut prev = Poly { coeffs: vec![1.0] };
        if n == 0 {
            return prev;
        }
        let mut cur = Poly { coeffs: vec![0.0, 1.0] };
        for _ in 1..n {
            let next = cur.mul(&Poly { coeffs: vec![0.0, 2.0] }).add(&prev.scale(-1.0));
            prev = cur;
            cur = next;
        }
        cur
    }

    /// Real solutions of `self(y) = x`, sorted ascending.
    pub fn solve(&self, x: f64) -> Result<Vec<f64>> {
        let mut c = self.coeffs.clone();
        c[0] -= x;
        real_roots(&c, REAL_ROOT_TOL).map_err(|imag| Error::ComplexPreimage { x, imag })
    }
}

/// Coordinate frame of a [`HyperbolicPoly`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Invariant interval `[-1, 1]`.
    UnitInterval,
    /// Leading coefficient one, invariant interval `[-ξ, ξ]`.
    Monic,
    /// Any other frame with a symmetric invariant interval `[-ξ, ξ]`.
    Scaled,
    /// Invariant interval not centred at the origin.
    General,
}

/// A real polynomial of degree at least two whose critical points are real
/// and simple and whose critical values avoid its invariant interval.
#[derive(Debug, Clone)]
pub struct HyperbolicPoly {
    factors: Vec<Poly>,
    expanded: Poly,
    normalization: Normalization,
    interval: (f64, f64),
    critical_points: Vec<f64>,
    critical_values: Vec<f64>,
}

impl HyperbolicPoly {
    /// Validates a polynomial given by ascending coefficients.
    pub fn from_coeffs(coeffs: Vec<f64>) -> Result<Self> {
        let p = Poly::new(coeffs)?;
        if p.degree() < 2 {
            return Err(Error::InvalidPolynomial("degree must be at least 2".into()));
        }
        if p.leading() <= 0.0 {
            return Err(Error::InvalidPolynomial("leading coefficient must be positive".into()));
        }
        let (points, values) = critical_of_single(&p)?;
        let interval = invariant_interval(&p)?;
        Self::assemble(vec![p.clone()], p, interval, points, values)
    }

    /// `ρ (z² − 1) + 1` in the unit-interval frame.
    pub fn quadratic(rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidPolynomial(format!("rho must be positive, got {rho}")));
        }
        Self::from_coeffs(vec![1.0 - rho, 0.0, rho])
    }

    /// `ε⁻ⁿ 𝒯ₙ(ε z)` in its own (scaled) frame.
    pub fn scaled_chebyshev(n: usize, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidPolynomial(format!("eps must be positive, got {eps}")));
        }
        let t = Poly::chebyshev(n).affine_argument(eps, 0.0).scale(eps.powi(-(n as i32)));
        Self::from_coeffs(t.coeffs)
    }

    fn assemble(
        factors: Vec<Poly>,
        expanded: Poly,
        interval: (f64, f64),
        critical_points: Vec<f64>,
        critical_values: Vec<f64>,
    ) -> Result<Self> {
        let (lo, hi) = interval;
        for (&c, &v) in critical_points.iter().zip(&critical_values) {
            let (_, _, d2) = eval_factored_derivs(&factors, c);
            let ok = if d2 < 0.0 { v > hi } else { v < lo };
            if !ok {
                return Err(Error::NotExpanding { value: v, lo, hi });
            }
        }
        let half = 0.5 * (hi - lo);
        let symmetric = (hi + lo).abs() <= 1e-9 * half.max(1.0);
        let normalization = if !symmetric {
            Normalization::General
        } else if (hi - 1.0).abs() <= 1e-12 {
            Normalization::UnitInterval
        } else if (expanded.leading() - 1.0).abs() <= 1e-14 {
            Normalization::Monic
        } else {
            Normalization::Scaled
        };
        let interval = if symmetric { (-half, half) } else { interval };
        Ok(HyperbolicPoly { factors, expanded, normalization, interval, critical_points, critical_values })
    }

    pub fn degree(&self) -> usize {
        self.expanded.degree()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Half-width of the invariant interval.
    pub fn xi(&self) -> f64 {
        0.5 * (self.interval.1 - self.interval.0)
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    /// Subleading datum `q` of `T(z) = a_d (z^d − q d z^{d−1} + …)`.
    pub fn q(&self) -> f64 {
        let d = self.degree();
        let c = self.expanded.coeffs();
        -c[d - 1] / (d as f64 * c[d])
    }

    pub fn expanded(&self) -> &Poly {
        &self.expanded
    }

    pub fn factors(&self) -> &[Poly] {
        &self.factors
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.factors.iter().fold(z, |y, f| f.eval(y))
    }

    /// `(T(z), T′(z), T″(z))` through the chain rule over the factors.
    pub fn eval_derivs(&self, z: f64) -> (f64, f64, f64) {
        eval_factored_derivs(&self.factors, z)
    }

    pub fn derivative_poly(&self) -> Poly {
        self.expanded.derivative()
    }

    /// Sorted critical points and the critical values at them.
    pub fn critical_data(&self) -> (&[f64], &[f64]) {
        (&self.critical_points, &self.critical_values)
    }

    pub fn critical_points(&self) -> &[f64] {
        &self.critical_points
    }

    pub fn critical_values(&self) -> &[f64] {
        &self.critical_values
    }

    /// `min_c |T(c)| / ξ − 1`, the distance of the critical values from the
    /// invariant interval measured in units of the half-width.
    pub fn hyperbolicity_gap(&self) -> f64 {
        let xi = self.xi();
        let centre = 0.5 * (self.interval.0 + self.interval.1);
        self.critical_values.iter().map(|v| (v - centre).abs() / xi - 1.0).fold(f64::INFINITY, f64::min)
    }

    pub fn is_sufficiently_hyperbolic(&self, threshold: f64) -> bool {
        self.hyperbolicity_gap() >= threshold
    }

    /// Ratios `|T(c)| / ξ` for all critical points.
    pub fn critical_ratios(&self) -> Vec<f64> {
        let xi = self.xi();
        self.critical_values.iter().map(|v| v.abs() / xi).collect()
    }

    /// Lipschitz factor for block off-diagonals:
    /// `max_c (|T(c)|/ξ + 1) / (|T(c)|/ξ − 1)²`.
    pub fn kappa_bound(&self) -> f64 {
        self.critical_ratios().into_iter().map(|r| (r + 1.0) / ((r - 1.0) * (r - 1.0))).fold(0.0, f64::max)
    }

    /// `max_c 1 / (|T(c)|/ξ − 1)`, the decay factor of the gluing entries.
    pub fn glue_decay_bound(&self) -> f64 {
        self.critical_ratios().into_iter().map(|r| 1.0 / (r - 1.0)).fold(0.0, f64::max)
    }

    /// Lipschitz factor for the gluing entries: `glue_decay_bound · (1 + ϰ/2)`.
    pub fn glue_kappa_bound(&self) -> f64 {
        self.glue_decay_bound() * (1.0 + 0.5 * self.kappa_bound())
    }

    /// Conjugates a symmetric frame to the monic one: `M(w) = λ T(w/λ)` with
    /// `λ = a_d^{1/(d−1)}`.
    pub fn to_monic(&self) -> Result<HyperbolicPoly> {
        self.require_symmetric()?;
        let lambda = self.monic_scale();
        self.rescaled(lambda)
    }

    /// Scale `λ` with `to_monic() = λ T(·/λ)`.
    pub fn monic_scale(&self) -> f64 {
        self.expanded.leading().powf(1.0 / (self.degree() as f64 - 1.0))
    }

    /// Conjugates a symmetric frame to the unit-interval frame
    /// `T_u(u) = T(ξ u)/ξ`; inverse of [`HyperbolicPoly::to_monic`] on
    /// unit-interval input. Non-symmetric frames are mapped affinely.
    pub fn to_unit_interval(&self) -> Result<HyperbolicPoly> {
        if self.normalization == Normalization::UnitInterval {
            return Ok(self.clone());
        }
        let (lo, hi) = self.interval;
        let m = 0.5 * (hi - lo);
        let c = 0.5 * (hi + lo);
        if self.normalization != Normalization::General {
            return self.rescaled(1.0 / m);
        }
        // T_u(u) = (T(m u + c) − c) / m, applied to the innermost and outermost factors.
        let mut factors = self.factors.clone();
        let first = factors[0].affine_argument(m, c);
        factors[0] = first;
        let last = factors.len() - 1;
        let outer = factors[last].add(&Poly { coeffs: vec![-c] }).scale(1.0 / m);
        factors[last] = outer;
        let expanded = self.expanded.affine_argument(m, c).add(&Poly { coeffs: vec![-c] }).scale(1.0 / m);
        let points = self.critical_points.iter().map(|x| (x - c) / m).collect();
        let values = self.critical_values.iter().map(|v| (v - c) / m).collect();
        Self::assemble(factors, expanded, (-1.0, 1.0), points, values)
    }

    /// Alias of [`HyperbolicPoly::to_unit_interval`] for monic input.
    pub fn from_monic(&self) -> Result<HyperbolicPoly> {
        self.to_unit_interval()
    }

    /// `λ T(w/λ)`: the conjugate by the dilation `z ↦ λ z`.
    pub fn rescaled(&self, lambda: f64) -> Result<HyperbolicPoly> {
        self.require_symmetric()?;
        let n = self.factors.len();
        let factors: Vec<Poly> = self
            .factors
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let mut g = f.clone();
                if k == 0 {
                    g = g.affine_argument(1.0 / lambda, 0.0);
                }
                if k + 1 == n {
                    g = g.scale(lambda);
                }
                g
            })
            .collect();
        let expanded = self.expanded.affine_argument(1.0 / lambda, 0.0).scale(lambda);
        let (lo, hi) = self.interval;
        let points = self.critical_points.iter().map(|x| x * lambda).collect();
        let values = self.critical_values.iter().map(|v| v * lambda).collect();
        Self::assemble(factors, expanded, (lo * lambda, hi * lambda), points, values)
    }

    fn require_symmetric(&self) -> Result<()> {
        if self.normalization == Normalization::General {
            return Err(Error::InvalidPolynomial("operation requires a symmetric invariant interval".into()));
        }
        Ok(())
    }

    /// `outer ∘ inner` for two unit-interval polynomials.
    pub fn compose(outer: &HyperbolicPoly, inner: &HyperbolicPoly) -> Result<HyperbolicPoly> {
        Self::compose_with_cap(outer, inner, DEFAULT_DEGREE_CAP)
    }

    pub fn compose_with_cap(
        outer: &HyperbolicPoly,
        inner: &HyperbolicPoly,
        cap: usize,
    ) -> Result<HyperbolicPoly> {
        for t in [outer, inner] {
            if t.normalization != Normalization::UnitInterval {
                return Err(Error::InvalidPolynomial("composition requires unit-interval factors".into()));
            }
        }
        let degree = outer.degree() * inner.degree();
        if degree > cap {
            return Err(Error::DegreeOverflow { degree, cap });
        }
        let mut factors = inner.factors.clone();
        factors.extend(outer.factors.iter().cloned());
        let expanded = outer.expanded.compose(&inner.expanded);
        // Critical points of outer ∘ inner: inner⁻¹(crit outer) ∪ crit inner.
        let mut points: Vec<f64> = inner.critical_points.clone();
        for &c in &outer.critical_points {
            points.extend(inner.preimages(c)?);
        }
        points.sort_by(|a, b| a.total_cmp(b));
        check_simple(&points)?;
        let values = points.iter().map(|&c| eval_factored(&factors, c)).collect();
        Self::assemble(factors, expanded, (-1.0, 1.0), points, values)
    }

    /// All `d` real solutions of `T(y) = x`, sorted ascending, computed
    /// factor by factor from the outermost inwards.
    pub fn preimages(&self, x: f64) -> Result<Vec<f64>> {
        let mut level = vec![x];
        for f in self.factors.iter().rev() {
            let mut next = Vec::with_capacity(level.len() * f.degree());
            for &y in &level {
                next.extend(f.solve(y)?);
            }
            level = next;
        }
        if self.factors.len() > 1 {
            // polish against the full composition
            for y in level.iter_mut() {
                for _ in 0..2 {
                    let (v, d, _) = self.eval_derivs(*y);
                    if d != 0.0 {
                        *y -= (v - x) / d;
                    }
                }
            }
        }
        level.sort_by(|a, b| a.total_cmp(b));
        Ok(level)
    }

    /// Right endpoint of the invariant interval; a repelling fixed point on
    /// the Julia set.
    pub fn julia_seed(&self) -> f64 {
        self.interval.1
    }

    /// Full backward orbit of depth `depth` from [`HyperbolicPoly::julia_seed`].
    pub fn julia_samples(&self, depth: usize) -> Result<Vec<f64>> {
        backward_orbit(|x| self.preimages(x), self.degree(), self.julia_seed(), depth)
    }

    /// Endpoints of the `d^n` intervals of `(T^n)⁻¹(interval)`, as sorted
    /// `(lo, hi)` pairs.
    pub fn preimage_intervals(&self, n: usize) -> Result<Vec<(f64, f64)>> {
        let (lo, hi) = self.interval;
        let mut ends = vec![lo, hi];
        for _ in 0..n {
            let mut next = Vec::with_capacity(ends.len() * self.degree());
            for &e in &ends {
                next.extend(self.preimages(e)?);
            }
            ends = next;
        }
        ends.sort_by(|a, b| a.total_cmp(b));
        Ok(ends.chunks(2).map(|c| (c[0], c[1])).collect())
    }
}

/// Backward orbit of `seed` through `depth` layers of preimages.
pub fn backward_orbit<F>(preimages: F, degree: usize, seed: f64, depth: usize) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let total = (degree as f64).powi(depth as i32);
    if total > MAX_SAMPLES as f64 {
        return Err(Error::SampleBudget(total as usize));
    }
    let mut level = vec![seed];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(level.len() * degree);
        for &x in &level {
            next.extend(preimages(x)?);
        }
        level = next;
    }
    Ok(level)
}

fn eval_factored(factors: &[Poly], z: f64) -> f64 {
    factors.iter().fold(z, |y, f| f.eval(y))
}

fn eval_factored_derivs(factors: &[Poly], z: f64) -> (f64, f64, f64) {
    let mut v = z;
    let mut d1 = 1.0;
    let mut d2 = 0.0;
    for f in factors {
        let (g, g1, g2) = f.eval_derivs(v);
        d2 = g2 * d1 * d1 + g1 * d2;
        d1 *= g1;
        v = g;
    }
    (v, d1, d2)
}

fn check_simple(points: &[f64]) -> Result<()> {
    let scale = points.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    for w in points.windows(2) {
        let gap = w[1] - w[0];
        if gap <= 1e-9 * scale {
            return Err(Error::DegenerateCritical { gap });
        }
    }
    Ok(())
}

fn critical_of_single(p: &Poly) -> Result<(Vec<f64>, Vec<f64>)> {
    let dp = p.derivative();
    let points = real_roots(dp.coeffs(), REAL_ROOT_TOL).map_err(|imag| Error::NonRealCritical { imag })?;
    check_simple(&points)?;
    let values = points.iter().map(|&c| p.eval(c)).collect();
    Ok((points, values))
}

/// Convex hull `[α, β]` of the Julia set: `β` is the largest real fixed point
/// and `α` the smallest real point among the fixed points and `T⁻¹(β)`.
fn invariant_interval(p: &Poly) -> Result<(f64, f64)> {
    let mut fixed = p.coeffs().to_vec();
    fixed[1] -= 1.0;
    let reals = |c: &[f64]| -> Vec<f64> {
        complex_roots(c)
            .into_iter()
            .filter(|r| r.im.abs() <= 1e-8 * r.norm().max(1.0))
            .map(|r| newton_polish(c, r.re, 3))
            .collect()
    };
    let fixed_points = reals(&fixed);
    let beta = fixed_points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !beta.is_finite() {
        return Err(Error::InvalidPolynomial("no real fixed point".into()));
    }
    let mut shifted = p.coeffs().to_vec();
    shifted[0] -= beta;
    let alpha = reals(&shifted).into_iter().chain(fixed_points).fold(f64::INFINITY, f64::min);
    if !(alpha < beta) {
        return Err(Error::InvalidPolynomial("degenerate invariant interval".into()));
    }
    Ok((alpha, beta))
}

/// Polynomial description used in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PolySpec {
    Quadratic { rho: f64 },
    Chebyshev { n: usize, eps: f64 },
    Coeffs { c: Vec<f64> },
    Compose { outer: Box<PolySpec>, inner: Box<PolySpec> },
}

impl PolySpec {
    /// Builds the polynomial in the unit-interval frame.
    pub fn build(&self) -> Result<HyperbolicPoly> {
        match self {
            PolySpec::Quadratic { rho } => HyperbolicPoly::quadratic(*rho),
            PolySpec::Chebyshev { n, eps } => HyperbolicPoly::scaled_chebyshev(*n, *eps)?.to_unit_interval(),
            PolySpec::Coeffs { c } => HyperbolicPoly::from_coeffs(c.clone())?.to_unit_interval(),
            PolySpec::Compose { outer, inner } => HyperbolicPoly::compose(&outer.build()?, &inner.build()?),
        }
    }
}

/// Ordered list of unit-interval polynomials `T_1, T_2, …` of a tower.
#[derive(Debug, Clone)]
pub struct PolySequence {
    polys: Vec<HyperbolicPoly>,
}

impl PolySequence {
    pub fn new(polys: Vec<HyperbolicPoly>) -> Result<Self> {
        if polys.is_empty() {
            return Err(Error::InvalidPolynomial("empty polynomial sequence".into()));
        }
        let polys = polys.into_iter().map(|p| p.to_unit_interval()).collect::<Result<Vec<_>>>()?;
        Ok(PolySequence { polys })
    }

    pub fn polys(&self) -> &[HyperbolicPoly] {
        &self.polys
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.polys.iter().map(|p| p.degree()).collect()
    }

    /// Partial products `d_1, d_1 d_2, …`.
    pub fn composed_degrees(&self) -> Vec<usize> {
        self.polys
            .iter()
            .scan(1usize, |acc, p| {
                *acc *= p.degree();
                Some(*acc)
            })
            .collect()
    }

    /// `T_n ∘ … ∘ T_1` for the first `n` polynomials.
    pub fn composition(&self, n: usize) -> Result<HyperbolicPoly> {
        let mut acc = self.polys[0].clone();
        for p in &self.polys[1..n] {
            acc = HyperbolicPoly::compose(p, &acc)?;
        }
        Ok(acc)
    }
}
