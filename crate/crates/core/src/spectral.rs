//! The principal spectral hypersurface: the composed positively
//! 1-homogeneous operator `T = T_1 ∘ … ∘ T_m`, its cone eigenvalue `λ_*`,
//! the closed forms `H(Λ)` and `θ_*(σ)`, and the linearized stability
//! eigenvalue `η₁`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::GridFieldVec;
use crate::linalg::{smallest_eigenpair_with, LinearSolver, SolverOptions, SparseMatrix};
use crate::nonlinearity::{signed_power, NonlinearMap, Site, Weight};
use crate::scalar::{lit, sup_dist, sup_norm, to_f64, Scalar};
use crate::system::System;

pub const SPECTRAL_TOL: f64 = 1e-8;
pub const SPECTRAL_MAX_ITER: usize = 10_000;

/// `T_i v = L_i⁻¹(ρ_i |v|^{α_i−1} v)`, composed as `T_1 ∘ … ∘ T_m`.
#[derive(Debug, Clone)]
pub struct ComposedOperator<'a, T> {
    system: &'a System<T>,
    rho: Weight<T>,
    alpha: Vec<T>,
}

impl<'a, T: Scalar> ComposedOperator<'a, T> {
    pub fn new(system: &'a System<T>, rho: Weight<T>, alpha: Vec<T>) -> Result<Self> {
        let m = system.m();
        if alpha.len() != m || rho.components() != m {
            return Err(Error::Dimension {
                expected: m,
                got: alpha.len().min(rho.components()),
            });
        }
        if alpha.iter().any(|a| !(*a > T::zero())) {
            return Err(Error::Parameter("exponents must be positive".into()));
        }
        let prod = alpha.iter().fold(T::one(), |acc, a| acc * *a);
        if (prod - T::one()).abs() > lit(1e-12) {
            return Err(Error::Parameter(format!("exponents must multiply to 1, got {prod}")));
        }
        if let Some(sites) = rho.sites() {
            if sites != system.n() {
                return Err(Error::Dimension {
                    expected: system.n(),
                    got: sites,
                });
            }
        }
        Ok(Self { system, rho, alpha })
    }

    /// The operator built from a map's own `(ρ, α)`.
    pub fn for_map(system: &'a System<T>, map: &NonlinearMap<T>) -> Result<Self> {
        Self::new(system, map.rho().clone(), map.alpha().to_vec())
    }

    pub fn system(&self) -> &System<T> {
        self.system
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    /// `T_i v`.
    pub fn apply_component(&self, i: usize, v: &[T]) -> Result<Vec<T>> {
        let rhs: Vec<T> = v
            .iter()
            .enumerate()
            .map(|(k, x)| self.rho.at(i, k) * signed_power(*x, self.alpha[i]))
            .collect();
        let (mut out, _) = self.system.solver(i).solve(&rhs)?;
        // Stay in the cone: roundoff can only produce tiny negatives here.
        out.iter_mut().for_each(|x| *x = x.max(T::zero()));
        Ok(out)
    }

    /// `T u`, applying `T_m` first.
    pub fn apply(&self, u: &[T]) -> Result<Vec<T>> {
        if u.len() != self.system.n() {
            return Err(Error::Dimension {
                expected: self.system.n(),
                got: u.len(),
            });
        }
        let mut v = u.to_vec();
        for i in (0..self.alpha.len()).rev() {
            v = self.apply_component(i, &v)?;
        }
        Ok(v)
    }

    /// The chain `φ_m = T_m φ, φ_i = T_i φ_{i+1}` with unit parameters.
    pub fn chain(&self, phi: &[T]) -> Result<GridFieldVec<T>> {
        let m = self.alpha.len();
        let mut comps = vec![Vec::new(); m];
        let mut v = phi.to_vec();
        for i in (0..m).rev() {
            v = self.apply_component(i, &v)?;
            comps[i] = v.clone();
        }
        GridFieldVec::from_components(comps)
    }
}

/// Free-function form of [`ComposedOperator::apply`].
pub fn apply_t<T: Scalar>(op: &ComposedOperator<'_, T>, u: &[T]) -> Result<Vec<T>> {
    op.apply(u)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralPair<T> {
    pub lambda_star: T,
    /// Positive, max-norm 1.
    pub phi_star: Vec<T>,
    pub iterations: usize,
    /// `‖T φ − λ_*⁻¹ φ‖∞`.
    pub residual: T,
}

/// Cone power iteration `u ← T u / ‖T u‖∞` from the all-ones field. Stops
/// when successive ratios differ by at most `tol` (relative) and the
/// iterate has settled to `√tol`.
pub fn lambda_star<T: Scalar>(op: &ComposedOperator<'_, T>, tol: T, max_iter: usize) -> Result<SpectralPair<T>> {
    let n = op.system.n();
    let mut u = vec![T::one(); n];
    let mut ratio = T::zero();
    for iter in 1..=max_iter {
        let w = op.apply(&u)?;
        let next_ratio = sup_norm(&w);
        if !(next_ratio > T::zero()) || !next_ratio.is_finite() {
            return Err(Error::NotPositive("T maps the iterate to zero".into()));
        }
        let next: Vec<T> = w.iter().map(|x| *x / next_ratio).collect();
        let change = sup_dist(&next, &u);
        let settled = (next_ratio - ratio).abs() <= tol * next_ratio && change <= tol.sqrt();
        ratio = next_ratio;
        u = next;
        if settled {
            let tu = op.apply(&u)?;
            let residual = tu
                .iter()
                .zip(&u)
                .fold(T::zero(), |acc, (a, b)| acc.max((*a - ratio * *b).abs()));
            if u.iter().any(|x| !(*x > T::zero())) {
                return Err(Error::NotPositive("eigenfunction of T vanishes at an interior node".into()));
            }
            return Ok(SpectralPair {
                lambda_star: T::one() / ratio,
                phi_star: u,
                iterations: iter,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        method: "cone-power",
        iterations: max_iter,
        residual: to_f64(ratio),
    })
}

fn check_positive<T: Scalar>(values: &[T], name: &str) -> Result<()> {
    if values.iter().any(|v| !(*v > T::zero()) || !v.is_finite()) {
        return Err(Error::Parameter(format!("{name} must be positive")));
    }
    Ok(())
}

/// `H(Λ) = λ_1 λ_2^{α_1} λ_3^{α_1 α_2} ⋯ λ_m^{α_1⋯α_{m−1}}`.
pub fn h_of<T: Scalar>(lambda: &[T], alpha: &[T]) -> Result<T> {
    check_positive(lambda, "Λ")?;
    if alpha.len() != lambda.len() {
        return Err(Error::Dimension {
            expected: lambda.len(),
            got: alpha.len(),
        });
    }
    let mut exponent = T::one();
    let mut acc = T::one();
    for (i, l) in lambda.iter().enumerate() {
        acc *= l.powf(exponent);
        exponent *= alpha[i];
    }
    Ok(acc)
}

/// The unique `θ` with `H((θ, θσ)) = λ_*`:
/// `θ_* = (λ_* / Π_i σ_i^{Π_{k≤i} α_k})^{1 / Σ_{i=1}^m Π_{k≤i} α_k}`.
pub fn theta_star<T: Scalar>(sigma: &[T], lambda_star: T, alpha: &[T]) -> Result<T> {
    check_positive(sigma, "σ")?;
    check_positive(&[lambda_star], "λ_*")?;
    if alpha.len() != sigma.len() + 1 {
        return Err(Error::Dimension {
            expected: sigma.len() + 1,
            got: alpha.len(),
        });
    }
    let mut partial = T::one();
    let mut denominator = T::one();
    let mut exponent_sum = T::zero();
    for (i, a) in alpha.iter().enumerate() {
        partial *= *a;
        exponent_sum += partial;
        if i < sigma.len() {
            denominator *= sigma[i].powf(partial);
        }
    }
    Ok((lambda_star / denominator).powf(T::one() / exponent_sum))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityResult<T> {
    pub eta1: T,
    /// Positive, max-norm 1 over all components.
    pub eigenfield: GridFieldVec<T>,
    /// `Λ_i A_ij(x_k, u(x_k))`, indexed `[k][i * m + j]`.
    pub coupling: Vec<Vec<T>>,
    pub shift: T,
    pub iterations: usize,
    pub residual: T,
}

/// Node-major block matrix `blockdiag(L_i) − [λ_i A_ij(x, u(x))]`.
pub fn linearized_matrix<T: Scalar>(
    system: &System<T>,
    lambda: &[T],
    map: &NonlinearMap<T>,
    u: &GridFieldVec<T>,
) -> Result<(SparseMatrix<T>, Vec<Vec<T>>)> {
    let (m, n) = (system.m(), system.n());
    if map.m() != m || lambda.len() != m || u.m() != m || u.len() != n {
        return Err(Error::Dimension {
            expected: m,
            got: map.m(),
        });
    }
    let mut triplets = Vec::new();
    for i in 0..m {
        let a = system.operator(i).matrix();
        for r in 0..n {
            for (c, v) in a.row(r) {
                triplets.push((r * m + i, c * m + i, v));
            }
        }
    }
    let domain = system.domain();
    let mut t = vec![T::zero(); m];
    let mut jac = vec![T::zero(); m * m];
    let mut coupling = Vec::with_capacity(n);
    for k in 0..n {
        u.at_node(k, &mut t);
        map.jacobian_into(Site::of(domain, k), &t, &mut jac)?;
        let frozen: Vec<T> = (0..m * m).map(|e| lambda[e / m] * jac[e]).collect();
        for i in 0..m {
            for j in 0..m {
                let v = frozen[i * m + j];
                if v != T::zero() {
                    triplets.push((k * m + i, k * m + j, -v));
                }
            }
        }
        coupling.push(frozen);
    }
    Ok((SparseMatrix::from_triplets(m * n, &triplets)?, coupling))
}

/// Principal eigenpair of `−𝓛φ − Λ A(x, u) φ = η φ` by inverse iteration on
/// the shifted block matrix.
pub fn stability_eigen<T: Scalar>(
    system: &System<T>,
    lambda: &[T],
    map: &NonlinearMap<T>,
    u: &GridFieldVec<T>,
    tol: T,
) -> Result<StabilityResult<T>> {
    let m = system.m();
    let (matrix, coupling) = linearized_matrix(system, lambda, map, u)?;
    let spread = coupling
        .iter()
        .flat_map(|frozen| (0..m).map(move |i| (0..m).map(|j| frozen[i * m + j].abs()).sum::<T>()))
        .fold(T::zero(), T::max);
    let shift = T::one() + spread;
    let shifted = matrix.shifted(shift);
    let solver = LinearSolver::new(
        &shifted,
        SolverOptions {
            tol: tol.min(lit(1e-10)),
            ..SolverOptions::default()
        },
    )?;
    let pair = smallest_eigenpair_with(&solver, tol, SPECTRAL_MAX_ITER)?;
    if pair.vector.iter().any(|v| !(*v > T::zero())) {
        return Err(Error::NotPositive(
            "principal eigenfield vanishes somewhere; the coupling may be reducible".into(),
        ));
    }
    Ok(StabilityResult {
        eta1: pair.value - shift,
        eigenfield: GridFieldVec::from_interleaved(m, &pair.vector)?,
        coupling,
        shift,
        iterations: pair.iterations,
        residual: pair.residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::DiscreteDomain;
    use approx::assert_relative_eq;

    #[test]
    fn h_examples() {
        assert_eq!(h_of(&[3.0], &[1.0]).unwrap(), 3.0);
        assert_relative_eq!(h_of(&[1.0, 4.0, 9.0], &[2.0, 0.5, 1.0]).unwrap(), 144.0, max_relative = 1e-14);
        assert!(h_of(&[0.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn theta_examples() {
        assert_relative_eq!(theta_star(&[], 7.0, &[1.0]).unwrap(), 7.0);
        assert_relative_eq!(theta_star(&[1.0], 8.0, &[2.0, 0.5]).unwrap(), 2.0, max_relative = 1e-14);
        let alpha = [2.0, 0.25, 2.0];
        let sigma = [0.3, 5.0];
        let th = theta_star(&sigma, 11.0, &alpha).unwrap();
        let h = h_of(&[th, th * sigma[0], th * sigma[1]], &alpha).unwrap();
        assert_relative_eq!(h, 11.0, max_relative = 1e-12);
        assert!(theta_star(&[-1.0], 1.0, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn linear_case_is_dirichlet_eigenvalue() {
        let sys = System::laplacian(DiscreteDomain::interval(65).unwrap(), 1).unwrap();
        let op = ComposedOperator::new(&sys, Weight::ones(1), vec![1.0]).unwrap();
        let pair = lambda_star(&op, 1e-10, SPECTRAL_MAX_ITER).unwrap();
        let h = 1.0 / 64.0;
        let exact_discrete = 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        assert_relative_eq!(pair.lambda_star, exact_discrete, max_relative = 1e-8);
        let scaled = ComposedOperator::new(&sys, Weight::Uniform(vec![2.0]), vec![1.0]).unwrap();
        let half = lambda_star(&scaled, 1e-10, SPECTRAL_MAX_ITER).unwrap();
        assert_relative_eq!(half.lambda_star, pair.lambda_star / 2.0, max_relative = 1e-8);
    }

    #[test]
    fn composed_operator_is_homogeneous() {
        let sys = System::laplacian(DiscreteDomain::interval(33).unwrap(), 2).unwrap();
        let op = ComposedOperator::new(&sys, Weight::ones(2), vec![2.0, 0.5]).unwrap();
        let u: Vec<f64> = (0..31).map(|k| 1.0 + (k as f64 * 0.37).sin().abs()).collect();
        let a = op.apply(&u).unwrap();
        let b = op.apply(&u.iter().map(|x| 2.0 * x).collect::<Vec<_>>()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(2.0 * x, *y, max_relative = 1e-10);
        }
        assert_eq!(op.apply(&vec![0.0; 31]).unwrap(), vec![0.0; 31]);
        assert!(ComposedOperator::new(&sys, Weight::ones(2), vec![2.0, 0.4]).is_err());
    }

    #[test]
    fn stability_at_zero_is_dirichlet_minus_lambda() {
        let sys = System::laplacian(DiscreteDomain::interval(65).unwrap(), 1).unwrap();
        let g = NonlinearMap::gelfand();
        let zero = GridFieldVec::zeros(1, 63);
        let res = stability_eigen(&sys, &[1e-6], &g, &zero, 1e-10).unwrap();
        let h = 1.0 / 64.0;
        let mu1 = 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        assert_relative_eq!(res.eta1, mu1 - 1e-6, max_relative = 1e-8);
        assert!(res.eigenfield.min() > 0.0);
    }
}
