use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::scalar::{dot, sup_norm, Scalar};

/// Symmetric Gauss–Seidel preconditioner `M = (D+L) D⁻¹ (D+U)`.
#[derive(Debug, Clone)]
pub struct SymmetricGaussSeidel<T> {
    diag: Vec<T>,
}

impl<T: Scalar> SymmetricGaussSeidel<T> {
    pub fn new(matrix: &SparseMatrix<T>) -> Result<Self> {
        let diag = matrix.diagonal();
        if let Some(row) = diag.iter().position(|d| *d == T::zero()) {
            return Err(Error::Singular { row });
        }
        Ok(Self { diag })
    }

    /// `z = M⁻¹ r`.
    pub fn apply(&self, matrix: &SparseMatrix<T>, r: &[T], z: &mut [T]) {
        let (ptr, cols, vals) = matrix.raw();
        let n = self.diag.len();
        for i in 0..n {
            let mut acc = r[i];
            for k in ptr[i]..ptr[i + 1] {
                if cols[k] < i {
                    acc -= vals[k] * z[cols[k]];
                }
            }
            z[i] = acc / self.diag[i];
        }
        for i in (0..n).rev() {
            let mut acc = T::zero();
            for k in ptr[i]..ptr[i + 1] {
                if cols[k] > i {
                    acc += vals[k] * z[cols[k]];
                }
            }
            z[i] -= acc / self.diag[i];
        }
    }
}

fn residual<T: Scalar>(a: &SparseMatrix<T>, x: &[T], b: &[T], r: &mut [T]) {
    a.mul_vec_into(x, r).expect("dimensions checked by caller");
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = *bi - *ri;
    }
}

/// Right-preconditioned BiCGSTAB. Stops when `‖b − Ax‖∞ ≤ target`; restarts
/// from the true residual on breakdown. Returns the iteration count and the
/// final residual norm.
pub fn bicgstab<T: Scalar>(
    a: &SparseMatrix<T>,
    pre: &SymmetricGaussSeidel<T>,
    b: &[T],
    x: &mut [T],
    target: T,
    max_iter: usize,
) -> Result<(usize, T)> {
    let n = a.dim();
    let mut r = vec![T::zero(); n];
    residual(a, x, b, &mut r);
    let mut res = sup_norm(&r);
    if res <= target {
        return Ok((0, res));
    }
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (T::one(), T::one(), T::one());
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut p_hat = vec![T::zero(); n];
    let mut s = vec![T::zero(); n];
    let mut s_hat = vec![T::zero(); n];
    let mut t = vec![T::zero(); n];
    let tiny = T::min_positive_value().sqrt();

    for iter in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() <= tiny * dot(&r, &r).sqrt() * dot(&r_hat, &r_hat).sqrt() || omega == T::zero() {
            residual(a, x, b, &mut r);
            r_hat.copy_from_slice(&r);
            rho = T::one();
            alpha = T::one();
            omega = T::one();
            v.iter_mut().for_each(|e| *e = T::zero());
            p.iter_mut().for_each(|e| *e = T::zero());
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pre.apply(a, &p, &mut p_hat);
        a.mul_vec_into(&p_hat, &mut v)?;
        let denom = dot(&r_hat, &v);
        if denom == T::zero() {
            omega = T::zero();
            continue;
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if sup_norm(&s) <= target {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            residual(a, x, b, &mut r);
            res = sup_norm(&r);
            if res <= target {
                return Ok((iter, res));
            }
            r_hat.copy_from_slice(&r);
            rho = T::one();
            alpha = T::one();
            omega = T::one();
            continue;
        }
        pre.apply(a, &s, &mut s_hat);
        a.mul_vec_into(&s_hat, &mut t)?;
        let tt = dot(&t, &t);
        omega = if tt > T::zero() { dot(&t, &s) / tt } else { T::zero() };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        res = sup_norm(&r);
        if res <= target {
            residual(a, x, b, &mut r);
            res = sup_norm(&r);
            if res <= target {
                return Ok((iter, res));
            }
        }
        if !res.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence {
        method: "bicgstab",
        iterations: max_iter,
        residual: res.to_f64().unwrap_or(f64::NAN),
    })
}

/// Symmetric Gauss–Seidel used as a stationary iteration.
pub fn sgs_iteration<T: Scalar>(
    a: &SparseMatrix<T>,
    pre: &SymmetricGaussSeidel<T>,
    b: &[T],
    x: &mut [T],
    target: T,
    max_iter: usize,
) -> Result<(usize, T)> {
    let n = a.dim();
    let mut r = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];
    let mut res = T::infinity();
    for iter in 0..=max_iter {
        residual(a, x, b, &mut r);
        res = sup_norm(&r);
        if res <= target {
            return Ok((iter, res));
        }
        if !res.is_finite() {
            break;
        }
        pre.apply(a, &r, &mut z);
        for i in 0..n {
            x[i] += z[i];
        }
    }
    Err(Error::NoConvergence {
        method: "symmetric-gauss-seidel",
        iterations: max_iter,
        residual: res.to_f64().unwrap_or(f64::NAN),
    })
}
