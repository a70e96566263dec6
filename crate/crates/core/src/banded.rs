//! Banded matrices and their LU factorization without pivoting.
//!
//! Step matrices of the monotone scheme are M-matrices with strictly dominant
//! rows, so Gaussian elimination in natural order is stable and fill-in stays
//! inside the band.

use crate::error::{Error, Result};

/// Square matrix with `lower` sub- and `upper` super-diagonals, stored row-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Self { n, lower, upper, data: vec![0.0; n * (lower + upper + 1)] }
    }

    pub fn identity(n: usize, lower: usize, upper: usize) -> Self {
        let mut m = Self::zeros(n, lower, upper);
        for i in 0..n {
            m.add(i, i, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    fn width(&self) -> usize {
        self.lower + self.upper + 1
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.lower >= i && j <= i + self.upper
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.lower - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i < self.n && j < self.n && self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            0.0
        }
    }

    /// Adds `v` to entry `(i, j)`; panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band ({}, {})", self.lower, self.upper);
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// Column range of row `i` inside the band.
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.lower)..(i + self.upper + 1).min(self.n)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row_range(i).map(|j| self.data[self.slot(i, j)] * x[j]).sum()).collect()
    }

    /// Exact transpose: entries are moved, never recomputed.
    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n, self.upper, self.lower);
        for i in 0..self.n {
            for j in self.row_range(i) {
                let s = t.slot(j, i);
                t.data[s] = self.data[self.slot(i, j)];
            }
        }
        t
    }

    pub fn factor(&self) -> Result<BandLu> {
        let mut lu = self.clone();
        let n = self.n;
        for k in 0..n {
            let pivot = lu.data[lu.slot(k, k)];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::SingularMatrix { row: k });
            }
            let imax = (k + self.lower).min(n - 1);
            let jmax = (k + self.upper).min(n - 1);
            for i in k + 1..=imax {
                let sik = lu.slot(i, k);
                let m = lu.data[sik] / pivot;
                lu.data[sik] = m;
                if m != 0.0 {
                    for j in k + 1..=jmax {
                        let skj = lu.slot(k, j);
                        let sij = lu.slot(i, j);
                        lu.data[sij] -= m * lu.data[skj];
                    }
                }
            }
        }
        Ok(BandLu { lu })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.factor()?.solve(rhs))
    }
}

/// In-place LU factors sharing the band layout of the source matrix.
#[derive(Clone, Debug)]
pub struct BandLu {
    lu: BandMatrix,
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = &self.lu;
        let n = m.n;
        let mut x = rhs.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for j in i.saturating_sub(m.lower)..i {
                s -= m.data[m.slot(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..(i + m.upper + 1).min(n) {
                s -= m.data[m.slot(i, j)] * x[j];
            }
            x[i] = s / m.data[m.slot(i, i)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiagonal(n: usize) -> BandMatrix {
        let mut a = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.add(i, i, 4.0 + i as f64 * 0.1);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.add(i, i + 1, -1.5);
            }
        }
        a
    }

    #[test]
    fn solves_tridiagonal_system() {
        let a = tridiagonal(12);
        let x: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let b = a.mul_vec(&x);
        let y = a.solve(&b).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn solves_wide_band_system() {
        // 5-point Laplacian plus identity on a 6x6 lattice
        let (nx, ny) = (6, 6);
        let n = nx * ny;
        let mut a = BandMatrix::zeros(n, ny, ny);
        for ix in 0..nx {
            for iy in 0..ny {
                let i = ix * ny + iy;
                a.add(i, i, 5.0);
                if ix > 0 {
                    a.add(i, i - ny, -1.0);
                }
                if ix + 1 < nx {
                    a.add(i, i + ny, -1.0);
                }
                if iy > 0 {
                    a.add(i, i - 1, -1.0);
                }
                if iy + 1 < ny {
                    a.add(i, i + 1, -1.0);
                }
            }
        }
        let x: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
        let y = a.solve(&a.mul_vec(&x)).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_moves_entries_exactly() {
        let a = tridiagonal(7);
        let t = a.transpose();
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(a.get(i, j).to_bits(), t.get(j, i).to_bits());
            }
        }
        assert_eq!(t.transpose(), a);
    }

    #[test]
    fn zero_pivot_is_reported() {
        let a = BandMatrix::zeros(3, 1, 1);
        assert!(matches!(a.factor(), Err(Error::SingularMatrix { row: 0 })));
    }
}
