use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::scalar::Scalar;

/// LU factors of a banded matrix, computed without pivoting.
///
/// Nonsingular M-matrices admit this factorization with positive pivots, so
/// no row exchanges are needed for anything `assemble` produces.
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    dim: usize,
    band: usize,
    // Row-major storage of columns r-band..=r+band for each row r.
    data: Vec<T>,
}

impl<T: Scalar> BandedLu<T> {
    pub fn factor(matrix: &SparseMatrix<T>) -> Result<Self> {
        let dim = matrix.dim();
        let band = matrix.bandwidth();
        let width = 2 * band + 1;
        let mut data = vec![T::zero(); dim * width];
        for r in 0..dim {
            for (c, v) in matrix.row(r) {
                data[r * width + band + c - r] = v;
            }
        }
        let at = |r: usize, c: usize| r * width + band + c - r;
        for k in 0..dim {
            let pivot = data[at(k, k)];
            if pivot == T::zero() || !pivot.is_finite() {
                return Err(Error::Singular { row: k });
            }
            let last = (k + band).min(dim - 1);
            for r in k + 1..=last {
                let l = data[at(r, k)] / pivot;
                if l == T::zero() {
                    continue;
                }
                data[at(r, k)] = l;
                for c in k + 1..=last {
                    let u = data[at(k, c)];
                    data[at(r, c)] -= l * u;
                }
            }
        }
        Ok(Self { dim, band, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        if rhs.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: rhs.len(),
            });
        }
        let width = 2 * self.band + 1;
        let at = |r: usize, c: usize| r * width + self.band + c - r;
        let mut x = rhs.to_vec();
        for r in 0..self.dim {
            let first = r.saturating_sub(self.band);
            let mut acc = x[r];
            for c in first..r {
                acc -= self.data[at(r, c)] * x[c];
            }
            x[r] = acc;
        }
        for r in (0..self.dim).rev() {
            let last = (r + self.band).min(self.dim - 1);
            let mut acc = x[r];
            for c in r + 1..=last {
                acc -= self.data[at(r, c)] * x[c];
            }
            x[r] = acc / self.data[at(r, r)];
        }
        Ok(x)
    }
}
