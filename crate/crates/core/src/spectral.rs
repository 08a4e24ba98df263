//! Small dense and banded linear-algebra kernels shared by the modules:
//! polynomial roots through companion matrices, the Lanczos/Stieltjes
//! procedure on discrete measures, tridiagonal solves and eigenvalues.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Evaluates `c[0] + c[1] x + ... + c[n] x^n` by Horner's rule.
pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Value and first derivative in one Horner pass.
pub fn horner_with_derivative(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut value = 0.0;
    let mut deriv = 0.0;
    for &c in coeffs.iter().rev() {
        deriv = deriv * x + value;
        value = value * x + c;
    }
    (value, deriv)
}

/// All complex roots of a polynomial (ascending coefficients, nonzero leading
/// coefficient) as eigenvalues of its companion matrix.
pub fn complex_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    if n == 1 {
        return vec![Complex64::new(-coeffs[0] / lead, 0.0)];
    }
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        companion[(i, n - 1)] = -coeffs[i] / lead;
    }
    companion.complex_eigenvalues().iter().copied().collect()
}

/// Real roots of a polynomial whose roots are all real and simple.
///
/// Roots come from the companion matrix and are polished by two Newton steps.
/// Fails with the largest imaginary part found when it exceeds
/// `imag_tol * max(1, |root|)`.
pub fn real_roots(coeffs: &[f64], imag_tol: f64) -> std::result::Result<Vec<f64>, f64> {
    let mut worst = 0.0f64;
    let mut roots = Vec::with_capacity(coeffs.len() - 1);
    for r in complex_roots(coeffs) {
        let rel = r.im.abs() / r.norm().max(1.0);
        if rel > imag_tol {
            worst = worst.max(r.im.abs());
        }
        roots.push(newton_polish(coeffs, r.re, 2));
    }
    if worst > 0.0 {
        return Err(worst);
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    Ok(roots)
}

pub fn newton_polish(coeffs: &[f64], mut x: f64, steps: usize) -> f64 {
    for _ in 0..steps {
        let (v, d) = horner_with_derivative(coeffs, x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = x - v / d;
        if !next.is_finite() {
            break;
        }
        x = next;
    }
    x
}

/// Jacobi coefficients of a discrete measure by the Lanczos (Stieltjes)
/// procedure with full reorthogonalization ("twice is enough").
///
/// Returns `(diag, off)` with `diag = [q_0, .., q_{n-1}]` and
/// `off = [p_1, .., p_{n-1}]`. The measure must have at least `n` distinct
/// atoms; weights are normalized internally.
pub fn lanczos(points: &[f64], weights: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let len = points.len();
    if n == 0 || len < n {
        return Err(Error::DegenerateMeasure(format!("{len} atoms cannot support {n} Lanczos steps")));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateMeasure("total mass is not positive".into()));
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    basis.push(weights.iter().map(|w| (w / total).sqrt()).collect());
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n {
        let v = &basis[k];
        let mut u: Vec<f64> = points.iter().zip(v).map(|(x, vi)| x * vi).collect();
        diag.push(dot(&u, v));
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&u, b);
                u.iter_mut().zip(b).for_each(|(ui, bi)| *ui -= c * bi);
            }
        }
        if k + 1 < n {
            let norm = dot(&u, &u).sqrt();
            if !(norm > 1e-300) {
                return Err(Error::DegenerateMeasure(format!(
                    "Krylov space exhausted after {} steps",
                    k + 1
                )));
            }
            off.push(norm);
            u.iter_mut().for_each(|ui| *ui /= norm);
            basis.push(u);
        }
    }
    Ok((diag, off))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = rhs` for the symmetric tridiagonal `A` with diagonal `diag`
/// and couplings `off[i]` between rows `i` and `i + 1` (Thomas algorithm, no
/// pivoting: intended for definite shifted matrices).
pub fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    c[0] = if n > 1 { off[0] / denom } else { 0.0 };
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - off[i - 1] * c[i - 1];
        if i + 1 < n {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Dense symmetric tridiagonal matrix from its diagonals.
pub fn tridiagonal_dense(diag: &[f64], off: &[f64]) -> DMatrix<f64> {
    let n = diag.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag[i];
        if i + 1 < n {
            m[(i, i + 1)] = off[i];
            m[(i + 1, i)] = off[i];
        }
    }
    m
}

/// Sorted eigenvalues of a symmetric tridiagonal matrix.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    symmetric_eigenvalues(tridiagonal_dense(diag, off))
}

pub fn symmetric_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Largest singular value of a dense matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.iter().fold(0.0f64, |a, &b| a.max(b))
}

/// Square band matrix stored by rows: `rows[i][j - i + half]` holds `A[i][j]`.
#[derive(Debug, Clone)]
pub struct Banded {
    n: usize,
    half: usize,
    rows: Vec<Vec<f64>>,
}

impl Banded {
    pub fn identity(n: usize, scale: f64) -> Self {
        Banded { n, half: 0, rows: vec![vec![scale]; n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let shift = j as i64 - i as i64;
        if shift.unsigned_abs() as usize > self.half {
            0.0
        } else {
            self.rows[i][(shift + self.half as i64) as usize]
        }
    }

    /// `self * J + shift * I` for the symmetric tridiagonal `J` given by
    /// `diag` and `off`.
    pub fn mul_tridiagonal_add(&self, diag: &[f64], off: &[f64], shift: f64) -> Banded {
        let half = self.half + 1;
        let n = self.n;
        let mut rows = vec![vec![0.0; 2 * half + 1]; n];
        for (i, row) in rows.iter_mut().enumerate() {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            for j in lo..=hi {
                // (A J)_{ij} = A_{i,j-1} J_{j-1,j} + A_{ij} J_{jj} + A_{i,j+1} J_{j+1,j}
                let mut v = self.get(i, j) * diag[j];
                if j > 0 {
                    v += self.get(i, j - 1) * off[j - 1];
                }
                if j + 1 < n {
                    v += self.get(i, j + 1) * off[j];
                }
                if i == j {
                    v += shift;
                }
                row[j + half - i] = v;
            }
        }
        Banded { n, half, rows }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

/// Evaluates the matrix polynomial `sum_k c[k] J^k` by Horner's rule on band
/// storage.
pub fn matrix_polynomial(coeffs: &[f64], diag: &[f64], off: &[f64]) -> Banded {
    let n = diag.len();
    let deg = coeffs.len() - 1;
    let mut acc = Banded::identity(n, coeffs[deg]);
    for k in (0..deg).rev() {
        acc = acc.mul_tridiagonal_add(diag, off, coeffs[k]);
    }
    acc
}

/// Eigenvalues of a general real square matrix (used for small companion
/// matrices only).
pub fn dense_complex_eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    m.complex_eigenvalues().iter().copied().collect()
}

pub fn dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
