//! Compressed-row symmetric matrices and their assembly.
//!
//! Assembly goes through [`SymmetricBuilder`], which only accepts symmetric
//! contributions (a diagonal entry or a mirrored off-diagonal pair). Duplicate
//! entries are summed in insertion order, so `(i, j)` and `(j, i)` are
//! bitwise identical after compression.

use crate::error::{GapError, Result};

/// Row-compressed sparse matrix with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![1.0; dim])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        CsrMatrix {
            dim: diag.len(),
            row_ptr: (0..=diag.len()).collect(),
            cols: (0..diag.len()).collect(),
            vals: diag.to_vec(),
        }
    }

    /// Builds from a dense row-major square matrix, keeping exact zeros out.
    pub fn from_dense(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(GapError::usage(format!(
                "dense data has {} entries, expected {}",
                data.len(),
                dim * dim
            )));
        }
        let mut b = SymmetricBuilder::new(dim);
        for i in 0..dim {
            for j in 0..=i {
                let (a, c) = (data[i * dim + j], data[j * dim + i]);
                if a != c {
                    return Err(GapError::usage(format!(
                        "dense matrix not symmetric at ({i}, {j})"
                    )));
                }
                if a != 0.0 {
                    if i == j {
                        b.add_diag(i, a);
                    } else {
                        b.add_pair(i, j, a);
                    }
                }
            }
        }
        Ok(b.build())
    }

    /// Zero matrix on a given pattern; columns of each row must be sorted
    /// and unique.
    pub fn from_pattern(row_ptr: Vec<usize>, cols: Vec<usize>) -> Result<Self> {
        let dim = row_ptr.len().saturating_sub(1);
        let ok = row_ptr.first() == Some(&0)
            && row_ptr.windows(2).all(|w| w[0] <= w[1])
            && row_ptr[dim] == cols.len()
            && (0..dim).all(|i| {
                let c = &cols[row_ptr[i]..row_ptr[i + 1]];
                c.windows(2).all(|w| w[0] < w[1]) && c.iter().all(|&j| j < dim)
            });
        if !ok {
            return Err(GapError::usage("malformed sparsity pattern"));
        }
        let vals = vec![0.0; cols.len()];
        Ok(CsrMatrix {
            dim,
            row_ptr,
            cols,
            vals,
        })
    }

    /// Adds `v` to the stored entry `(i, j)`; panics if it is not in the pattern.
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        let k = self.cols[s..e]
            .binary_search(&j)
            .unwrap_or_else(|_| panic!("entry ({i}, {j}) outside the pattern"));
        self.vals[s + k] += v;
    }

    /// Replaces row and column `i` by the unit vector scaled by `diag`,
    /// returning the removed column so the caller can move it to the rhs.
    pub fn isolate(&mut self, i: usize, diag: f64) -> Vec<(usize, f64)> {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        let mut removed = Vec::with_capacity(e - s);
        for k in s..e {
            let j = self.cols[k];
            if j == i {
                self.vals[k] = diag;
                continue;
            }
            removed.push((j, self.vals[k]));
            self.vals[k] = 0.0;
            let (sj, ej) = (self.row_ptr[j], self.row_ptr[j + 1]);
            if let Ok(kk) = self.cols[sj..ej].binary_search(&i) {
                self.vals[sj + kk] = 0.0;
            }
        }
        removed
    }

    /// Entries of row `i` as `(column, value)` pairs in ascending column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[s..e]
            .iter()
            .copied()
            .zip(self.vals[s..e].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[s..e].binary_search(&j) {
            Ok(k) => self.vals[s + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`, accumulated row by row in column order.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = 0.0;
            for k in s..e {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// Quadratic form `xᵗ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    /// `self + c * other` on the union sparsity pattern.
    pub fn add_scaled(&self, c: f64, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.dim != other.dim {
            return Err(GapError::usage("matrix dimensions differ"));
        }
        let mut row_ptr = Vec::with_capacity(self.dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..self.dim {
            let mut a = self.row(i).peekable();
            let mut b = other.row(i).peekable();
            loop {
                match (a.peek().copied(), b.peek().copied()) {
                    (Some((ja, va)), Some((jb, vb))) => {
                        if ja == jb {
                            cols.push(ja);
                            vals.push(va + c * vb);
                            a.next();
                            b.next();
                        } else if ja < jb {
                            cols.push(ja);
                            vals.push(va);
                            a.next();
                        } else {
                            cols.push(jb);
                            vals.push(c * vb);
                            b.next();
                        }
                    }
                    (Some((ja, va)), None) => {
                        cols.push(ja);
                        vals.push(va);
                        a.next();
                    }
                    (None, Some((jb, vb))) => {
                        cols.push(jb);
                        vals.push(c * vb);
                        b.next();
                    }
                    (None, None) => break,
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(CsrMatrix {
            dim: self.dim,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn scaled(&self, c: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    /// Row-major dense copy (test and small-problem use only).
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                out[i * self.dim + j] = v;
            }
        }
        out
    }
}

/// Collects symmetric contributions and compresses them into a [`CsrMatrix`].
#[derive(Debug, Clone)]
pub struct SymmetricBuilder {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SymmetricBuilder {
    pub fn new(dim: usize) -> Self {
        SymmetricBuilder {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, cap: usize) -> Self {
        SymmetricBuilder {
            dim,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn add_diag(&mut self, i: usize, v: f64) {
        assert!(i < self.dim, "row {i} out of range");
        self.entries.push((i, i, v));
    }

    /// Adds `v` at `(i, j)` and `(j, i)`.
    pub fn add_pair(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.dim && j < self.dim, "entry ({i}, {j}) out of range");
        if i == j {
            self.entries.push((i, i, v));
        } else {
            self.entries.push((i, j, v));
            self.entries.push((j, i, v));
        }
    }

    /// Adds the two-point coupling `v (x_i - x_j)^2` to the quadratic form.
    pub fn add_edge(&mut self, i: usize, j: usize, v: f64) {
        self.add_diag(i, v);
        self.add_diag(j, v);
        self.add_pair(i, j, -v);
    }

    pub fn build(mut self) -> CsrMatrix {
        // stable sort keeps insertion order among duplicates
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &self.entries {
            if last == Some((i, j)) {
                *vals.last_mut().expect("nonempty") += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            dim: self.dim,
            row_ptr,
            cols,
            vals,
        }
    }
}

/// Definiteness tag carried by a [`SparseSystem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    /// Symmetric positive definite.
    Spd,
    /// Symmetric positive semidefinite.
    Spsd,
}

/// A symmetric sparse matrix together with its definiteness class.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub definiteness: Definiteness,
}

impl SparseSystem {
    /// Wraps a matrix, checking exact symmetry and, for SPD, a positive diagonal.
    pub fn new(matrix: CsrMatrix, definiteness: Definiteness) -> Result<Self> {
        if !matrix.is_symmetric() {
            return Err(GapError::usage("sparse system is not symmetric"));
        }
        if definiteness == Definiteness::Spd {
            if let Some(i) = (0..matrix.dim()).find(|&i| matrix.get(i, i) <= 0.0) {
                return Err(GapError::Setup(format!(
                    "SPD system has nonpositive diagonal at row {i}"
                )));
            }
        }
        Ok(SparseSystem {
            matrix,
            definiteness,
        })
    }

    pub fn spd(matrix: CsrMatrix) -> Result<Self> {
        Self::new(matrix, Definiteness::Spd)
    }

    pub fn spsd(matrix: CsrMatrix) -> Result<Self> {
        Self::new(matrix, Definiteness::Spsd)
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
