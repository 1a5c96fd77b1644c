//! Quantitative probes: radial growth bounds of extremal profiles, the
//! stability quadratic-form inequality, and the Green-function lower bound
//! `v ≥ C₂ δ ‖h‖_{L¹(δ)}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::GridFieldVec;
use crate::linalg::{LinearSolver, SolverOptions};
use crate::mesh::{DiscreteDomain, DiscreteOperator, DomainKind};
use crate::nonlinearity::{NonlinearMap, Site};
use crate::scalar::{from_usize, lit, Scalar};
use crate::system::System;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundClass {
    /// `u ∈ L∞`, `2 ≤ n ≤ 9`.
    Bounded,
    /// `u(r) ≤ C(1 + |log r|)`, `n = 10`.
    Logarithmic,
    /// `u(r) ≤ C r^{−n/2 + √(n−1) + 2}`, `n ≥ 11`.
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialBoundReport<T> {
    pub dimension: usize,
    pub class: BoundClass,
    /// Smallest `C` with `u(r) ≤ C·g(r)` at every sampled radius.
    pub constant: T,
    /// Power-law exponent for [`BoundClass::Power`].
    pub exponent: Option<T>,
    pub sup: T,
    pub radii: usize,
}

/// Fits the applicable radial bound to a profile, taking the componentwise
/// maximum at each radius and skipping `r = 0`.
pub fn radial_bound_check<T: Scalar>(u: &GridFieldVec<T>, domain: &DiscreteDomain<T>) -> Result<RadialBoundReport<T>> {
    let Some(n) = domain.ball_dimension() else {
        return Err(Error::Geometry("radial bounds need a radial domain".into()));
    };
    if u.len() != domain.n_unknowns() {
        return Err(Error::Dimension {
            expected: domain.n_unknowns(),
            got: u.len(),
        });
    }
    let (class, exponent) = match n {
        0..=9 => (BoundClass::Bounded, None),
        10 => (BoundClass::Logarithmic, None),
        _ => {
            let nf = from_usize::<T>(n);
            let e = -nf / lit(2.0) + (nf - T::one()).sqrt() + lit(2.0);
            (BoundClass::Power, Some(e))
        }
    };
    let mut constant = T::zero();
    let mut sup = T::zero();
    let mut radii = 0;
    let mut t = vec![T::zero(); u.m()];
    for k in 0..u.len() {
        u.at_node(k, &mut t);
        let value = t.iter().fold(T::zero(), |a, b| a.max(*b));
        if !value.is_finite() {
            return Err(Error::NoFiniteConstant(format!("profile is not finite at unknown {k}")));
        }
        sup = sup.max(value);
        let r = domain.unknown_coord(k)[0];
        if r <= T::zero() {
            continue;
        }
        radii += 1;
        let g = match class {
            BoundClass::Bounded => T::one(),
            BoundClass::Logarithmic => T::one() + r.ln().abs(),
            BoundClass::Power => r.powf(exponent.unwrap_or_else(T::zero)),
        };
        constant = constant.max(value / g);
    }
    if !constant.is_finite() {
        return Err(Error::NoFiniteConstant(format!("bound class {class:?} violated")));
    }
    Ok(RadialBoundReport {
        dimension: n,
        class,
        constant: if class == BoundClass::Bounded { sup } else { constant },
        exponent,
        sup,
        radii,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityProbeReport<T> {
    pub trials: usize,
    /// `max (LHS − RHS)` over the trials.
    pub max_excess: T,
    /// Trials with `LHS > RHS + tol`.
    pub violations: usize,
    pub worst_lhs: T,
    pub worst_rhs: T,
}

/// `(Σ_ij ∫ A_ij(x, u) ψ_i ψ_j, Σ_i λ_i⁻¹ ∫ |∇ψ_i|²)` using the cell volumes
/// and the forward-difference energy.
pub fn quadratic_forms<T: Scalar>(
    system: &System<T>,
    lambda: &[T],
    map: &NonlinearMap<T>,
    u: &GridFieldVec<T>,
    psi: &GridFieldVec<T>,
) -> Result<(T, T)> {
    let (m, n) = (system.m(), system.n());
    if lambda.len() != m || u.m() != m || psi.m() != m || u.len() != n || psi.len() != n || map.m() != m {
        return Err(Error::Dimension { expected: m, got: psi.m() });
    }
    let domain = system.domain();
    let volumes = domain.cell_volumes();
    let mut t = vec![T::zero(); m];
    let mut p = vec![T::zero(); m];
    let mut jac = vec![T::zero(); m * m];
    let mut lhs = T::zero();
    for k in 0..n {
        u.at_node(k, &mut t);
        psi.at_node(k, &mut p);
        map.jacobian_into(Site::of(domain, k), &t, &mut jac)?;
        let mut q = T::zero();
        for i in 0..m {
            for j in 0..m {
                q += jac[i * m + j] * p[i] * p[j];
            }
        }
        lhs += volumes[k] * q;
    }
    let mut rhs = T::zero();
    for (i, l) in lambda.iter().enumerate() {
        rhs += domain.dirichlet_energy(psi.component(i))? / *l;
    }
    Ok((lhs, rhs))
}

const PROBE_MODES: usize = 4;

fn random_test_field<T: Scalar>(domain: &DiscreteDomain<T>, m: usize, rng: &mut ChaCha8Rng) -> GridFieldVec<T> {
    let pi = lit::<T>(std::f64::consts::PI);
    let comps = (0..m)
        .map(|_| {
            let mut coef = [[0.0f64; PROBE_MODES]; PROBE_MODES];
            for (p, row) in coef.iter_mut().enumerate() {
                for (q, c) in row.iter_mut().enumerate() {
                    *c = rng.gen_range(-1.0..1.0) / (((p + 1) * (q + 1)).pow(2)) as f64;
                }
            }
            domain.sample(|x| {
                let mut v = T::zero();
                match domain.kind() {
                    DomainKind::Interval => {
                        for (p, row) in coef.iter().enumerate() {
                            v += lit::<T>(row[0]) * (from_usize::<T>(p + 1) * pi * x[0]).sin();
                        }
                    }
                    DomainKind::RadialBall { .. } => {
                        // Even in r, so smooth through the origin.
                        for (p, row) in coef.iter().enumerate() {
                            v += lit::<T>(row[0]) * ((from_usize::<T>(p) + lit(0.5)) * pi * x[0]).cos();
                        }
                    }
                    DomainKind::Rectangle { width, height } => {
                        for (p, row) in coef.iter().enumerate() {
                            for (q, c) in row.iter().enumerate() {
                                v += lit::<T>(*c)
                                    * (from_usize::<T>(p + 1) * pi * x[0] / width).sin()
                                    * (from_usize::<T>(q + 1) * pi * x[1] / height).sin();
                            }
                        }
                    }
                }
                v
            })
        })
        .collect();
    GridFieldVec::from_components(comps).expect("components share one grid")
}

/// Evaluates both sides of the stability inequality for `trials` random
/// sine combinations vanishing on the boundary. Requires a potential map.
pub fn stability_inequality_probe<T: Scalar>(
    system: &System<T>,
    lambda: &[T],
    map: &NonlinearMap<T>,
    u: &GridFieldVec<T>,
    trials: usize,
    seed: u64,
    tol: T,
) -> Result<StabilityProbeReport<T>> {
    if !map.potential() {
        return Err(Error::Parameter("the stability probe needs a potential (symmetric) map".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = StabilityProbeReport {
        trials,
        max_excess: T::neg_infinity(),
        violations: 0,
        worst_lhs: T::zero(),
        worst_rhs: T::zero(),
    };
    for _ in 0..trials {
        let psi = random_test_field(system.domain(), system.m(), &mut rng);
        let (lhs, rhs) = quadratic_forms(system, lambda, map, u, &psi)?;
        if lhs > rhs + tol {
            report.violations += 1;
        }
        if lhs - rhs > report.max_excess {
            report.max_excess = lhs - rhs;
            report.worst_lhs = lhs;
            report.worst_rhs = rhs;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenProbeReport<T> {
    /// `min v(x) / (δ(x) ‖h‖_{L¹(δ)})`; `None` when every trial had `h = 0`.
    pub c2: Option<T>,
    pub trials: usize,
    pub skipped: usize,
    /// Unknown where the minimum was attained.
    pub argmin: Option<usize>,
    pub negative_entries: usize,
}

/// Solves `L v = h` for random nonnegative `h` and records the smallest
/// ratio `v / (δ ‖h‖_{L¹(δ)})` over interior nodes. Entries of `h` are
/// uniform on `[0, 1)`.
pub fn green_lower_bound_probe<T: Scalar>(
    operator: &DiscreteOperator<T>,
    domain: &DiscreteDomain<T>,
    trials: usize,
    seed: u64,
) -> Result<GreenProbeReport<T>> {
    let n = domain.n_unknowns();
    if operator.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            got: operator.dim(),
        });
    }
    let solver = LinearSolver::new(operator.matrix(), SolverOptions::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delta = domain.delta();
    let weights = domain.interior_weights();
    let mut h = vec![T::zero(); n];
    let mut report = GreenProbeReport {
        c2: None,
        trials,
        skipped: 0,
        argmin: None,
        negative_entries: 0,
    };
    for _ in 0..trials {
        h.iter_mut().for_each(|x| *x = lit(rng.gen_range(0.0..1.0)));
        report.c2 = green_ratio(&solver, &h, &delta, &weights, &mut report)?.or(report.c2);
    }
    Ok(report)
}

/// Runs the probe for one right-hand side, folding the result into `report`.
pub(crate) fn green_ratio<T: Scalar>(
    solver: &LinearSolver<T>,
    h: &[T],
    delta: &[T],
    weights: &[T],
    report: &mut GreenProbeReport<T>,
) -> Result<Option<T>> {
    let norm: T = h.iter().zip(delta).zip(weights).map(|((a, d), w)| *a * *d * *w).sum();
    if !(norm > T::zero()) {
        report.skipped += 1;
        return Ok(None);
    }
    let (v, _) = solver.solve(h)?;
    report.negative_entries += v.iter().filter(|x| **x < T::zero()).count();
    let mut best = report.c2;
    for (k, (x, d)) in v.iter().zip(delta).enumerate() {
        let ratio = *x / (*d * norm);
        if best.is_none_or(|b| ratio < b) {
            best = Some(ratio);
            report.argmin = Some(k);
        }
    }
    Ok(best)
}
