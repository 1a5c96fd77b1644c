//! Sparse linear algebra for the assembled operators: storage, prepared
//! direct/iterative solvers, inverse power iteration and Green columns.

mod banded;
mod krylov;
mod sparse;

pub use banded::BandedLu;
pub use krylov::{bicgstab, sgs_iteration, SymmetricGaussSeidel};
pub use sparse::SparseMatrix;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, lit, sup_norm, to_f64, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Direct,
    Stationary,
    Krylov,
}

/// Outcome metadata of one linear solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final `‖b − Ax‖∞`.
    pub residual: f64,
    /// The residual bound that was enforced.
    pub target: f64,
    pub method: SolveMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Banded LU when the bandwidth is at most [`SolverOptions::band_limit`],
    /// BiCGSTAB otherwise.
    #[default]
    Auto,
    Direct,
    Stationary,
    Krylov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions<T> {
    /// Relative residual tolerance `‖b − Ax‖∞ ≤ tol·‖b‖∞`.
    pub tol: T,
    pub kind: SolverKind,
    pub band_limit: usize,
    /// Iteration cap for iterative methods; 0 selects `max(1000, 4n)`.
    pub max_iter: usize,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: lit(1e-10),
            kind: SolverKind::Auto,
            band_limit: 128,
            max_iter: 0,
        }
    }
}

#[derive(Debug, Clone)]
enum Backend<T> {
    Direct(BandedLu<T>),
    Stationary(SymmetricGaussSeidel<T>),
    Krylov(SymmetricGaussSeidel<T>),
}

/// A factored or preconditioned matrix, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct LinearSolver<T> {
    matrix: SparseMatrix<T>,
    norm: T,
    backend: Backend<T>,
    options: SolverOptions<T>,
}

impl<T: Scalar> LinearSolver<T> {
    pub fn new(matrix: &SparseMatrix<T>, options: SolverOptions<T>) -> Result<Self> {
        let kind = match options.kind {
            SolverKind::Auto if matrix.bandwidth() <= options.band_limit => SolverKind::Direct,
            SolverKind::Auto => SolverKind::Krylov,
            k => k,
        };
        let backend = match kind {
            SolverKind::Direct => Backend::Direct(BandedLu::factor(matrix)?),
            SolverKind::Stationary => Backend::Stationary(SymmetricGaussSeidel::new(matrix)?),
            _ => Backend::Krylov(SymmetricGaussSeidel::new(matrix)?),
        };
        Ok(Self {
            matrix: matrix.clone(),
            norm: matrix.inf_norm(),
            backend,
            options,
        })
    }

    pub fn matrix(&self) -> &SparseMatrix<T> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn method(&self) -> SolveMethod {
        match self.backend {
            Backend::Direct(_) => SolveMethod::Direct,
            Backend::Stationary(_) => SolveMethod::Stationary,
            Backend::Krylov(_) => SolveMethod::Krylov,
        }
    }

    /// Roundoff floor `64 ε ‖A‖∞ ‖x‖∞` below which residuals are not
    /// meaningful in the working precision.
    fn floor(&self, x_norm: T) -> T {
        lit::<T>(64.0) * T::epsilon() * self.norm * x_norm
    }

    pub fn solve(&self, rhs: &[T]) -> Result<(Vec<T>, SolveReport)> {
        self.solve_from(rhs, None)
    }

    /// Solves `A x = rhs`; iterative backends start from `guess` if given.
    pub fn solve_from(&self, rhs: &[T], guess: Option<&[T]>) -> Result<(Vec<T>, SolveReport)> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: rhs.len(),
            });
        }
        if let Some(g) = guess {
            if g.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: g.len(),
                });
            }
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("right-hand side is not finite".into()));
        }
        let b_norm = sup_norm(rhs);
        let target = self.options.tol * b_norm;
        let cap = if self.options.max_iter == 0 {
            (4 * n).max(1000)
        } else {
            self.options.max_iter
        };
        match &self.backend {
            Backend::Direct(lu) => {
                let mut x = lu.solve(rhs)?;
                let mut r = vec![T::zero(); n];
                let mut res = T::zero();
                for step in 0..4 {
                    self.matrix.mul_vec_into(&x, &mut r)?;
                    for (ri, bi) in r.iter_mut().zip(rhs) {
                        *ri = *bi - *ri;
                    }
                    res = sup_norm(&r);
                    let bound = target.max(self.floor(sup_norm(&x)));
                    if res <= bound {
                        return Ok((
                            x,
                            SolveReport {
                                iterations: step,
                                residual: to_f64(res),
                                target: to_f64(bound),
                                method: SolveMethod::Direct,
                            },
                        ));
                    }
                    let dx = lu.solve(&r)?;
                    for (xi, di) in x.iter_mut().zip(dx) {
                        *xi += di;
                    }
                }
                Err(Error::NoConvergence {
                    method: "banded-lu",
                    iterations: 4,
                    residual: to_f64(res),
                })
            }
            Backend::Stationary(pre) | Backend::Krylov(pre) => {
                let mut x = guess.map(<[T]>::to_vec).unwrap_or_else(|| vec![T::zero(); n]);
                if b_norm == T::zero() && guess.is_none() {
                    return Ok((
                        x,
                        SolveReport {
                            iterations: 0,
                            residual: 0.0,
                            target: 0.0,
                            method: self.method(),
                        },
                    ));
                }
                let run = |x: &mut [T], target: T| match &self.backend {
                    Backend::Stationary(_) => sgs_iteration(&self.matrix, pre, rhs, x, target, cap),
                    _ => bicgstab(&self.matrix, pre, rhs, x, target, cap),
                };
                let bound = target.max(self.floor(sup_norm(&x)));
                let outcome = run(&mut x, bound);
                let (iterations, res, bound) = match outcome {
                    Ok((it, res)) => (it, res, bound),
                    Err(e) => {
                        // Accept a stall at the roundoff floor of the computed solution.
                        let loose = target.max(self.floor(sup_norm(&x)));
                        let mut r = self.matrix.mul_vec(&x)?;
                        for (ri, bi) in r.iter_mut().zip(rhs) {
                            *ri = *bi - *ri;
                        }
                        let res = sup_norm(&r);
                        if res <= loose {
                            (cap, res, loose)
                        } else {
                            return Err(e);
                        }
                    }
                };
                Ok((
                    x,
                    SolveReport {
                        iterations,
                        residual: to_f64(res),
                        target: to_f64(bound),
                        method: self.method(),
                    },
                ))
            }
        }
    }
}

/// One-shot solve of `A x = rhs` with default options and tolerance `tol`.
pub fn solve<T: Scalar>(a: &SparseMatrix<T>, rhs: &[T], tol: T) -> Result<(Vec<T>, SolveReport)> {
    let options = SolverOptions {
        tol,
        ..SolverOptions::default()
    };
    LinearSolver::new(a, options)?.solve(rhs)
}

pub fn transpose<T: Scalar>(a: &SparseMatrix<T>) -> SparseMatrix<T> {
    a.transpose()
}

/// Principal eigenpair of an M-matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair<T> {
    pub value: T,
    /// Max-norm 1, positive.
    pub vector: Vec<T>,
    pub iterations: usize,
    pub residual: T,
}

pub const EIGEN_MAX_ITER: usize = 10_000;

/// Inverse power iteration from the all-ones vector.
pub fn smallest_eigenpair<T: Scalar>(a: &SparseMatrix<T>, tol: T) -> Result<Eigenpair<T>> {
    let solver = LinearSolver::new(
        a,
        SolverOptions {
            tol: tol.min(lit(1e-10)),
            ..SolverOptions::default()
        },
    )?;
    smallest_eigenpair_with(&solver, tol, EIGEN_MAX_ITER)
}

/// Inverse power iteration using a prepared solver. Stops once
/// `‖A v − μ v‖∞ ≤ tol·max(1, |μ|)` (plus the roundoff floor), where `μ` is
/// the Rayleigh quotient of the max-normalized iterate.
pub fn smallest_eigenpair_with<T: Scalar>(
    solver: &LinearSolver<T>,
    tol: T,
    max_iter: usize,
) -> Result<Eigenpair<T>> {
    let a = solver.matrix();
    let n = a.dim();
    if n == 0 {
        return Err(Error::Dimension { expected: 1, got: 0 });
    }
    let mut v = vec![T::one(); n];
    let mut w: Vec<T> = Vec::new();
    let mut residual = T::infinity();
    let floor = lit::<T>(64.0) * T::epsilon() * a.inf_norm();
    for iter in 1..=max_iter {
        let (next, _) = solver.solve_from(&v, if w.is_empty() { None } else { Some(&w) })?;
        let scale = sup_norm(&next);
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(Error::Singular { row: 0 });
        }
        // A⁻¹(next/scale) ≈ next once the iteration settles.
        v = next.iter().map(|x| *x / scale).collect();
        w = next;
        let av = a.mul_vec(&v)?;
        let mu = dot(&v, &av) / dot(&v, &v);
        residual = av
            .iter()
            .zip(&v)
            .fold(T::zero(), |acc, (x, y)| acc.max((*x - mu * *y).abs()));
        if residual <= tol * T::one().max(mu.abs()) + floor {
            if v.iter().any(|x| *x < T::zero()) {
                return Err(Error::NotPositive(format!(
                    "eigenvector has negative entries (min {})",
                    v.iter().fold(T::infinity(), |m, x| m.min(*x))
                )));
            }
            return Ok(Eigenpair {
                value: mu,
                vector: v,
                iterations: iter,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        method: "inverse-power",
        iterations: max_iter,
        residual: to_f64(residual),
    })
}

/// Discrete Green function with pole at unknown `j`: solves
/// `A g = e_j / volume`.
pub fn green_column<T: Scalar>(solver: &LinearSolver<T>, j: usize, volume: T) -> Result<Vec<T>> {
    let n = solver.dim();
    if j >= n {
        return Err(Error::Dimension {
            expected: n,
            got: j + 1,
        });
    }
    if !(volume > T::zero()) {
        return Err(Error::Parameter(format!("cell volume must be positive, got {volume}")));
    }
    let mut e = vec![T::zero(); n];
    e[j] = T::one() / volume;
    Ok(solver.solve(&e)?.0)
}
