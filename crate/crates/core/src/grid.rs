use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Uniform node-centred grid x_i = i·h, i = 0..=N, on [0, L].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_cells: usize,
    length: f64,
    spacing: f64,
}

impl Grid {
    pub fn new(length: f64, n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::Domain("grid needs at least two cells".into()));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "L",
                value: length,
                reason: "must be positive",
            });
        }
        Ok(Self {
            n_cells,
            length,
            spacing: length / n_cells as f64,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.length
        } else {
            i as f64 * self.spacing
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(|i| self.x(i))
    }

    /// Control-volume width of node i: h inside, h/2 at the two ends. These
    /// are also the trapezoid quadrature weights.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n_cells {
            0.5 * self.spacing
        } else {
            self.spacing
        }
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().enumerate().map(|(i, &y)| self.weight(i) * y).sum()
    }

    /// Weighted inner product ∫ f g dx by the trapezoid rule.
    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter()
            .zip(g)
            .enumerate()
            .map(|(i, (&a, &b))| self.weight(i) * a * b)
            .sum()
    }
}

/// Nodal values of (u, v).
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl StateField {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                found: v.len(),
            });
        }
        Ok(Self { u, v })
    }

    pub fn constant(n_nodes: usize, u: f64, v: f64) -> Self {
        Self {
            u: vec![u; n_nodes],
            v: vec![v; n_nodes],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        let n = grid.n_nodes();
        for len in [self.u.len(), self.v.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        Ok(())
    }

    /// (u(L − x), v(L − x)).
    pub fn reflected(&self) -> Self {
        let mut u = self.u.clone();
        let mut v = self.v.clone();
        u.reverse();
        v.reverse();
        Self { u, v }
    }

    /// Interleaved unknown vector [u0, v0, u1, v1, ...].
    pub fn to_interleaved(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(2 * self.len());
        for (a, b) in self.u.iter().zip(&self.v) {
            z.push(*a);
            z.push(*b);
        }
        z
    }

    pub fn from_interleaved(z: &[f64]) -> Self {
        let n = z.len() / 2;
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for pair in z.chunks_exact(2) {
            u.push(pair[0]);
            v.push(pair[1]);
        }
        Self { u, v }
    }

    /// self + a·other
    pub fn axpy(&self, a: f64, other: &StateField) -> Self {
        Self {
            u: self
                .u
                .iter()
                .zip(&other.u)
                .map(|(x, y)| x + a * y)
                .collect(),
            v: self
                .v
                .iter()
                .zip(&other.v)
                .map(|(x, y)| x + a * y)
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &StateField) -> f64 {
        self.u
            .iter()
            .zip(&other.u)
            .chain(self.v.iter().zip(&other.v))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// ∫ (u₁u₂ + v₁v₂) dx.
    pub fn dot(&self, other: &StateField, grid: &Grid) -> f64 {
        grid.dot(&self.u, &other.u) + grid.dot(&self.v, &other.v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_times_cells_is_length() {
        for n in [2usize, 7, 200, 1024] {
            let g = Grid::new(core::f64::consts::PI, n).unwrap();
            let rel = (g.spacing() * n as f64 - g.length()).abs() / g.length();
            assert!(rel <= 1e-14);
            assert_eq!(g.x(n), g.length());
        }
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let g = Grid::new(2.0, 10).unwrap();
        let f: Vec<f64> = g.nodes().map(|x| 3.0 * x + 1.0).collect();
        assert!((g.integrate(&f) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn interleave_roundtrip() {
        let s = StateField::new(alloc::vec![1.0, 2.0, 3.0], alloc::vec![4.0, 5.0, 6.0]).unwrap();
        assert_eq!(
            s.to_interleaved(),
            alloc::vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]
        );
        assert_eq!(StateField::from_interleaved(&s.to_interleaved()), s);
        assert_eq!(s.reflected().u, alloc::vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn rejects_tiny_grid() {
        assert!(Grid::new(1.0, 1).is_err());
        assert!(Grid::new(0.0, 10).is_err());
    }
}
