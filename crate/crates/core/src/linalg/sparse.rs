use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Square matrix in compressed row storage.
///
/// Column indices are strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, T)> = triplets.to_vec();
        for &(r, c, _) in &sorted {
            if r >= dim || c >= dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: r.max(c) + 1,
                });
            }
        }
        sorted.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(sorted.len());
        let mut vals: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *vals.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            dim,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn from_dense(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.len();
        let mut triplets = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: row.len(),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                if v != T::zero() || r == c {
                    triplets.push((r, c, v));
                }
            }
        }
        Self::from_triplets(dim, &triplets)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            cols: (0..dim).collect(),
            vals: vec![T::one(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(column, value)` pairs of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim).map(|r| self.get(r, r)).collect()
    }

    pub fn row_sum(&self, r: usize) -> T {
        self.row(r).map(|(_, v)| v).sum()
    }

    /// `max_r Σ_c |a_rc|`.
    pub fn inf_norm(&self) -> T {
        (0..self.dim).fold(T::zero(), |acc, r| acc.max(self.row(r).map(|(_, v)| v.abs()).sum()))
    }

    /// Largest `|r - c|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.dim)
            .flat_map(|r| self.row(r).map(move |(c, _)| r.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }

    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        let mut y = vec![T::zero(); self.dim];
        self.mul_vec_into(x, &mut y)?;
        Ok(y)
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) -> Result<()> {
        if x.len() != self.dim || y.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: if x.len() != self.dim { x.len() } else { y.len() },
            });
        }
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
        Ok(())
    }

    /// Exact structural transpose.
    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.dim + 1];
        for &c in &self.cols {
            counts[c + 1] += 1;
        }
        for c in 0..self.dim {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; self.nnz()];
        let mut vals = vec![T::zero(); self.nnz()];
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                cols[next[c]] = r;
                vals[next[c]] = self.vals[k];
                next[c] += 1;
            }
        }
        Self {
            dim: self.dim,
            row_ptr: counts,
            cols,
            vals,
        }
    }

    /// `A + s I`.
    pub fn shifted(&self, s: T) -> Self {
        let mut triplets: Vec<(usize, usize, T)> = (0..self.dim)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .collect();
        triplets.extend((0..self.dim).map(|r| (r, r, s)));
        Self::from_triplets(self.dim, &triplets).expect("indices come from a valid matrix")
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.dim]; self.dim];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        out
    }

    pub(crate) fn raw(&self) -> (&[usize], &[usize], &[T]) {
        (&self.row_ptr, &self.cols, &self.vals)
    }
}
