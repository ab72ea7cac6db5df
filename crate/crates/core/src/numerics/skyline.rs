//! Envelope (skyline) Cholesky factorization.
//!
//! Row `i` of the factor is stored from the first nonzero column of row `i`
//! of the input through the diagonal; fill never leaves that envelope. For
//! grids numbered ring by ring the envelope width is one ring, which keeps
//! the banded factorization cheap even with a periodic wrap.

use super::cg::Preconditioner;
use super::sparse::CsrMatrix;
use crate::error::{GapError, Result};

#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    /// Factors `a = L Lᵗ`. Fails with [`GapError::Setup`] when a pivot is
    /// not positive.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let first: Vec<usize> = (0..n)
            .map(|i| a.row(i).map(|(j, _)| j).next().unwrap_or(i).min(i))
            .collect();
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; start[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[start[i] + j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let si = start[i];
            let (done, row) = data.split_at_mut(si);
            let row = &mut row[..i - fi + 1];
            for j in fi..i {
                let fj = first[j];
                let sj = start[j];
                let k0 = fi.max(fj);
                let lj = &done[sj + k0 - fj..sj + j - fj];
                let acc = row[j - fi] - dot_fixed(&row[k0 - fi..j - fi], lj);
                row[j - fi] = acc / done[sj + j - fj];
            }
            let d = row[i - fi] - dot_fixed(&row[..i - fi], &row[..i - fi]);
            if !(d > 0.0) {
                return Err(GapError::Setup(format!(
                    "matrix is not positive definite (pivot {d:.3e} at row {i})"
                )));
            }
            row[i - fi] = d.sqrt();
        }
        Ok(SkylineCholesky { first, start, data })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        assert_eq!(x.len(), n, "rhs length mismatch");
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            let mut acc = x[i];
            for k in fi..i {
                acc -= self.data[si + k - fi] * x[k];
            }
            x[i] = acc / self.data[si + i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let si = self.start[i];
            let xi = x[i] / self.data[si + i - fi];
            x[i] = xi;
            for k in fi..i {
                x[k] -= self.data[si + k - fi] * xi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves for several right-hand sides at once, streaming the factor a
    /// single time. Each column sees the same operation order as
    /// [`solve_in_place`](Self::solve_in_place), so results agree bitwise.
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.dim();
        let p = rhs.len();
        if p == 0 {
            return Vec::new();
        }
        // interleaved layout: x[k * p + c]
        let mut x = vec![0.0; n * p];
        for (c, col) in rhs.iter().enumerate() {
            assert_eq!(col.len(), n, "rhs length mismatch");
            for (k, v) in col.iter().enumerate() {
                x[k * p + c] = *v;
            }
        }
        let mut acc = vec![0.0; p];
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            acc.copy_from_slice(&x[i * p..(i + 1) * p]);
            for (k, l) in (fi..i).zip(row) {
                let xk = &x[k * p..(k + 1) * p];
                for (a, v) in acc.iter_mut().zip(xk) {
                    *a -= l * v;
                }
            }
            let d = row[i - fi];
            for (dst, a) in x[i * p..(i + 1) * p].iter_mut().zip(&acc) {
                *dst = a / d;
            }
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let d = row[i - fi];
            let (head, tail) = x.split_at_mut(i * p);
            let xi = &mut tail[..p];
            xi.iter_mut().for_each(|v| *v /= d);
            for (k, l) in (fi..i).zip(row) {
                for (dst, v) in head[k * p..(k + 1) * p].iter_mut().zip(xi.iter()) {
                    *dst -= l * v;
                }
            }
        }
        (0..p)
            .map(|c| (0..n).map(|k| x[k * p + c]).collect())
            .collect()
    }
}

/// Dot product with four interleaved accumulators in a fixed order.
fn dot_fixed(a: &[f64], b: &[f64]) -> f64 {
    let mut s = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            s[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

impl Preconditioner for SkylineCholesky {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        self.solve_in_place(z);
    }
}
