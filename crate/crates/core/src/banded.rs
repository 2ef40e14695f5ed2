//! Banded matrices with partial-pivoting LU, plus block elimination for
//! systems bordered by one extra row and column.
//!
//! Storage follows the LAPACK `gbtrf` layout: entry (i, j) of an n×n matrix
//! with `kl` sub- and `ku` super-diagonals lives at row `kl + ku + i − j` of
//! column `j`, leaving `kl` extra rows for fill-in produced by pivoting.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ldab,
            data: vec![0.0; ldab * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) + j * self.ldab
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    /// Panics if (i, j) lies outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += value;
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = value;
    }

    /// y = A·x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (j, &xj) in x.iter().enumerate().take(self.n) {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for (i, yi) in y.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *yi += self.data[self.idx(i, j)] * xj;
            }
        }
        y
    }

    /// Largest absolute entry; used to scale singularity tests.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Adds `value` to every diagonal entry.
    pub fn shift_diagonal(&mut self, value: f64) {
        for i in 0..self.n {
            self.add(i, i, value);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    /// Partial-pivoting LU factorization. A zero pivot is an error.
    pub fn lu(mut self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let kv = self.kl + self.ku;
        let mut pivots = vec![0usize; n];
        let mut swaps = 0usize;
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // pivot search in column j, rows j..=j+km
            let mut jp = 0;
            let mut best = self.data[kv + j * self.ldab].abs();
            for i in 1..=km {
                let a = self.data[kv + i + j * self.ldab].abs();
                if a > best {
                    best = a;
                    jp = i;
                }
            }
            pivots[j] = j + jp;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular(j));
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                swaps += 1;
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let b = self.idx(j + jp, c);
                    self.data.swap(a, b);
                }
            }
            let piv = self.data[kv + j * self.ldab];
            for i in 1..=km {
                self.data[kv + i + j * self.ldab] /= piv;
            }
            for c in (j + 1)..=ju {
                let ujc = self.data[self.idx(j, c)];
                if ujc == 0.0 {
                    continue;
                }
                for i in 1..=km {
                    let l = self.data[kv + i + j * self.ldab];
                    let k = self.idx(j + i, c);
                    self.data[k] -= l * ujc;
                }
            }
        }
        Ok(BandLu {
            factors: self,
            pivots,
            swaps,
        })
    }
}

/// LU factors of a [`BandMatrix`].
#[derive(Debug, Clone)]
pub struct BandLu {
    factors: BandMatrix,
    pivots: Vec<usize>,
    swaps: usize,
}

impl BandLu {
    pub fn dim(&self) -> usize {
        self.factors.n
    }

    /// Solves A·x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let a = &self.factors;
        let n = a.n;
        let kv = a.kl + a.ku;
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                b.swap(p, j);
            }
            let lm = a.kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                for i in 1..=lm {
                    b[j + i] -= a.data[kv + i + j * a.ldab] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= a.data[kv + j * a.ldab];
            let bj = b[j];
            let lo = j.saturating_sub(kv);
            for i in lo..j {
                b[i] -= a.data[kv + i - j + j * a.ldab] * bj;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Sign and log-magnitude of det(A).
    pub fn log_det(&self) -> (f64, f64) {
        let a = &self.factors;
        let kv = a.kl + a.ku;
        let mut sign = if self.swaps % 2 == 0 { 1.0 } else { -1.0 };
        let mut log = 0.0;
        for j in 0..a.n {
            let d = a.data[kv + j * a.ldab];
            if d < 0.0 {
                sign = -sign;
            }
            log += d.abs().ln();
        }
        (sign, log)
    }

    /// Smallest |U_jj| relative to the largest; a cheap conditioning hint.
    pub fn pivot_ratio(&self) -> f64 {
        let a = &self.factors;
        let kv = a.kl + a.ku;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for j in 0..a.n {
            let d = a.data[kv + j * a.ldab].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if hi == 0.0 {
            0.0
        } else {
            lo / hi
        }
    }
}

/// Solves the bordered system
///
/// ```text
/// [ A   b ] [x]   [f]
/// [ cᵀ  d ] [y] = [g]
/// ```
///
/// by block elimination through the LU factors of A, followed by one step
/// of iterative refinement against the full bordered operator.
pub fn solve_bordered(
    a: &BandMatrix,
    lu: &BandLu,
    b: &[f64],
    c: &[f64],
    d: f64,
    f: &[f64],
    g: f64,
) -> Result<(Vec<f64>, f64)> {
    let w = lu.solve(b);
    let once = |f: &[f64], g: f64| -> Result<(Vec<f64>, f64)> {
        let x1 = lu.solve(f);
        let denom = d - dot(c, &w);
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Singular(a.dim()));
        }
        let y = (g - dot(c, &x1)) / denom;
        let x: Vec<f64> = x1.iter().zip(&w).map(|(p, q)| p - y * q).collect();
        Ok((x, y))
    };
    let (mut x, mut y) = once(f, g)?;
    // refinement: r = rhs − M·(x, y)
    let ax = a.matvec(&x);
    let rf: Vec<f64> = f
        .iter()
        .zip(&ax)
        .zip(b)
        .map(|((fi, axi), bi)| fi - axi - bi * y)
        .collect();
    let rg = g - dot(c, &x) - d * y;
    let (dx, dy) = once(&rf, rg)?;
    x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
    y += dy;
    if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok((x, y))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_of(a: &BandMatrix) -> Vec<Vec<f64>> {
        (0..a.dim())
            .map(|i| (0..a.dim()).map(|j| a.get(i, j)).collect())
            .collect()
    }

    fn dense_det(mut m: Vec<Vec<f64>>) -> f64 {
        let n = m.len();
        let mut det = 1.0;
        for c in 0..n {
            let p = (c..n)
                .max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap())
                .unwrap();
            if p != c {
                m.swap(p, c);
                det = -det;
            }
            det *= m[c][c];
            for r in c + 1..n {
                let f = m[r][c] / m[c][c];
                for k in c..n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
        det
    }

    fn random_band(n: usize, kl: usize, ku: usize, seed: u64) -> BandMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                a.set(i, j, rng.random_range(-1.0..1.0));
            }
        }
        a
    }

    #[test]
    fn solve_matches_residual() {
        for (kl, ku, seed) in [(1, 1, 1u64), (2, 3, 2), (3, 0, 3), (0, 2, 4)] {
            let n = 23;
            let a = random_band(n, kl, ku, seed);
            let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let b = a.matvec(&x_true);
            let x = a.clone().lu().unwrap().solve(&b);
            let err = x
                .iter()
                .zip(&x_true)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-9, "kl={kl} ku={ku} err={err}");
        }
    }

    #[test]
    fn determinant_matches_dense() {
        let a = random_band(12, 2, 3, 9);
        let (s, l) = a.clone().lu().unwrap().log_det();
        let d = dense_det(dense_of(&a));
        assert!((s * l.exp() - d).abs() <= 1e-10 * d.abs().max(1.0));
    }

    #[test]
    fn zero_pivot_is_reported() {
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.set(0, 0, 1.0);
        a.set(1, 1, 1.0);
        assert!(matches!(a.lu(), Err(Error::Singular(2))));
    }

    #[test]
    fn bordered_matches_dense_solution() {
        let n = 15;
        let a = random_band(n, 2, 3, 11);
        let lu = a.clone().lu().unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let c: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let d = 0.3;
        let x_true: Vec<f64> = (0..n).map(|i| i as f64 * 0.1 - 0.5).collect();
        let y_true = 1.7;
        let mut f = a.matvec(&x_true);
        f.iter_mut().zip(&b).for_each(|(fi, bi)| *fi += bi * y_true);
        let g = dot(&c, &x_true) + d * y_true;
        let (x, y) = solve_bordered(&a, &lu, &b, &c, d, &f, g).unwrap();
        assert!((y - y_true).abs() < 1e-10);
        for (p, q) in x.iter().zip(&x_true) {
            assert!((p - q).abs() < 1e-10);
        }
    }
}
