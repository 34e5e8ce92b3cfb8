//! Minimal dense complex matrix support.
//!
//! Every matrix this crate inverts is tiny (at most `(N+1) x (N+1)` with
//! N <= 6), and the large `K x K` projector is only ever multiplied, so a
//! small row-major container with a partially pivoted LU solve covers all
//! needs without pulling in a full linear-algebra stack.

use crate::C64;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot {pivot:.3e} at step {step})")]
    Singular { pivot: f64, step: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = CMat::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == Complex64::ZERO {
                    continue;
                }
                for c in 0..other.cols {
                    out[(r, c)] += a * other[(k, c)];
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "inner dimensions must agree");
        let mut out = vec![C64::new(0.0, 0.0); self.rows];
        for r in 0..self.rows {
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..self.cols {
                acc += self[(r, c)] * v[c];
            }
            out[r] = acc;
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMat::from_fn(self.rows, self.cols, |r, c| self[(r, c)] - other[(r, c)])
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute column sum (induced 1-norm).
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self[(r, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Solve `self * X = rhs` by LU with partial pivoting.
    pub fn solve(&self, rhs: &CMat) -> Result<CMat, LinalgError> {
        if self.rows != self.cols {
            return Err(LinalgError::Dimension(format!(
                "square matrix required, got {}x{}",
                self.rows, self.cols
            )));
        }
        if rhs.rows != self.rows {
            return Err(LinalgError::Dimension(format!(
                "rhs has {} rows, expected {}",
                rhs.rows, self.rows
            )));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut x = rhs.clone();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            // Partial pivot on the largest remaining magnitude in column k.
            let (pivot_row, pivot_mag) = (k..n)
                .map(|r| (r, a[(r, k)].norm()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap();
            if pivot_mag <= scale * 1e-300 {
                return Err(LinalgError::Singular { pivot: pivot_mag, step: k });
            }
            if pivot_row != k {
                for c in 0..n {
                    a.data.swap(pivot_row * n + c, k * n + c);
                }
                for c in 0..x.cols {
                    x.data.swap(pivot_row * x.cols + c, k * x.cols + c);
                }
            }
            let pivot = a[(k, k)];
            for r in k + 1..n {
                let factor = a[(r, k)] / pivot;
                if factor == Complex64::ZERO {
                    continue;
                }
                a[(r, k)] = Complex64::ZERO;
                for c in k + 1..n {
                    let v = a[(k, c)];
                    a[(r, c)] -= factor * v;
                }
                for c in 0..x.cols {
                    let v = x[(k, c)];
                    x[(r, c)] -= factor * v;
                }
            }
        }
        // Back substitution.
        for c in 0..x.cols {
            for r in (0..n).rev() {
                let mut acc = x[(r, c)];
                for k in r + 1..n {
                    acc -= a[(r, k)] * x[(k, c)];
                }
                x[(r, c)] = acc / a[(r, r)];
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<CMat, LinalgError> {
        self.solve(&CMat::identity(self.rows))
    }

    /// 1-norm condition estimate via the explicit inverse.
    ///
    /// Only valid for the small matrices this crate works with; returns
    /// `f64::INFINITY` when the matrix does not invert.
    pub fn cond_one(&self) -> f64 {
        match self.inverse() {
            Ok(inv) => self.norm_one() * inv.norm_one(),
            Err(_) => f64::INFINITY,
        }
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn solve_recovers_known_solution() {
        let a = CMat::from_fn(3, 3, c64_seed);
        let x_true = CMat::from_fn(3, 2, |r, col| c(1.0 + r as f64, col as f64 - 0.5));
        let b = a.mul(&x_true);
        let x = a.solve(&b).unwrap();
        assert!(x.sub(&x_true).max_abs() < 1e-12);
    }

    fn c64_seed(r: usize, c: usize) -> C64 {
        // Deterministic, well-conditioned test matrix.
        let v = (r * 3 + c) as f64;
        C64::new((v * 0.7).sin() + if r == c { 3.0 } else { 0.0 }, (v * 1.3).cos())
    }

    #[test]
    fn inverse_times_self_is_identity() {
        let a = CMat::from_fn(5, 5, c64_seed);
        let inv = a.inverse().unwrap();
        let eye = a.mul(&inv);
        assert!(eye.sub(&CMat::identity(5)).max_abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut a = CMat::zeros(2, 2);
        a[(0, 0)] = c(1.0, 0.0);
        a[(0, 1)] = c(2.0, 0.0);
        a[(1, 0)] = c(2.0, 0.0);
        a[(1, 1)] = c(4.0, 0.0);
        assert!(a.solve(&CMat::identity(2)).is_err());
    }

    #[test]
    fn cond_of_identity_is_one() {
        assert!((CMat::identity(4).cond_one() - 1.0).abs() < 1e-12);
    }
}
