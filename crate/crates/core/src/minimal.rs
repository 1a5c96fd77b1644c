//! Minimal positive solutions by monotone iteration
//! `u_1 = 0, u_{k+1,i} = λ_i L_i⁻¹ f_i(x, u_k)`, with divergence detection.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::GridFieldVec;
use crate::mesh::DiscreteDomain;
use crate::nonlinearity::{NonlinearMap, Site};
use crate::scalar::{lit, sup_norm, Scalar};
use crate::system::System;

/// Divergence heuristics and caps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationCaps<T> {
    pub max_iter: usize,
    /// Sup-norm ceiling read as blow-up.
    pub blowup: T,
    /// `W`: consecutive growing iterations before declaring divergence.
    pub growth_window: usize,
    /// `δ_g`: growth means `‖u_{k+1}‖∞ ≥ (1 + δ_g)‖u_k‖∞`.
    pub growth_delta: T,
}

impl<T: Scalar> Default for IterationCaps<T> {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            blowup: lit(1e8),
            growth_window: 25,
            growth_delta: lit(1e-3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimalOptions<T> {
    /// Increment test `‖u_{k+1} − u_k‖∞ ≤ tol (1 + ‖u_k‖∞)`.
    pub tol: T,
    /// Relative residual `‖L_i u_i − λ_i f_i(u)‖∞ / (1 + ‖λ_i f_i(u)‖∞)`.
    pub residual_tol: T,
    /// Slack for the per-step monotonicity assertion, relative to `1 + ‖u‖∞`.
    pub monotone_tol: T,
    pub caps: IterationCaps<T>,
}

impl<T: Scalar> Default for MinimalOptions<T> {
    fn default() -> Self {
        Self {
            tol: lit(1e-10),
            residual_tol: lit(1e-8),
            monotone_tol: lit(1e-8),
            caps: IterationCaps::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    Diverged,
    Saturated,
    IterationCap,
}

impl SolveStatus {
    /// Diverged or saturated: evidence that `Λ` lies above the hypersurface.
    pub fn is_blowup(self) -> bool {
        matches!(self, SolveStatus::Diverged | SolveStatus::Saturated)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimalSolveOutcome<T> {
    pub status: SolveStatus,
    /// The minimal solution, when converged.
    pub solution: Option<GridFieldVec<T>>,
    /// The final iterate, whatever the status.
    pub last: GridFieldVec<T>,
    /// Number of linear solve sweeps performed.
    pub iterations: usize,
    pub sup_history: Vec<T>,
    /// Relative residual per component at the final iterate.
    pub residual: Vec<T>,
    /// Steps at which some node decreased by more than the slack.
    pub monotone_violations: usize,
    pub max_decrease: T,
    pub note: String,
}

impl<T: Scalar> MinimalSolveOutcome<T> {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// `F(x, u(x))` at every unknown, component-major.
pub fn eval_field<T: Scalar>(
    map: &NonlinearMap<T>,
    domain: &DiscreteDomain<T>,
    u: &GridFieldVec<T>,
    out: &mut GridFieldVec<T>,
) -> Result<()> {
    let m = map.m();
    let mut t = vec![T::zero(); m];
    let mut f = vec![T::zero(); m];
    for k in 0..u.len() {
        u.at_node(k, &mut t);
        map.eval_into(Site::of(domain, k), &t, &mut f)?;
        for i in 0..m {
            out.component_mut(i)[k] = f[i];
        }
    }
    Ok(())
}

fn check_inputs<T: Scalar>(system: &System<T>, lambda: &[T], map: &NonlinearMap<T>) -> Result<()> {
    if map.m() != system.m() {
        return Err(Error::Dimension {
            expected: system.m(),
            got: map.m(),
        });
    }
    if lambda.len() != system.m() {
        return Err(Error::Dimension {
            expected: system.m(),
            got: lambda.len(),
        });
    }
    if lambda.iter().any(|l| !(*l > T::zero()) || !l.is_finite()) {
        return Err(Error::Parameter("every λ_i must be positive".into()));
    }
    map.check_sites(system.n())
}

/// Relative residual of `L_i u_i = λ_i f_i` per component.
pub fn residuals<T: Scalar>(
    system: &System<T>,
    lambda: &[T],
    u: &GridFieldVec<T>,
    f: &GridFieldVec<T>,
) -> Result<Vec<T>> {
    (0..system.m())
        .map(|i| {
            let lu = system.operator(i).apply(u.component(i))?;
            let mut worst = T::zero();
            let mut scale = T::zero();
            for (a, b) in lu.iter().zip(f.component(i)) {
                let rhs = lambda[i] * *b;
                worst = worst.max((*a - rhs).abs());
                scale = scale.max(rhs.abs());
            }
            Ok(worst / (T::one() + scale))
        })
        .collect()
}

/// Monotone iteration from zero.
pub fn minimal_solution<T: Scalar>(
    system: &System<T>,
    lambda: &[T],
    map: &NonlinearMap<T>,
    options: &MinimalOptions<T>,
) -> Result<MinimalSolveOutcome<T>> {
    minimal_solution_from(system, lambda, map, options, None)
}

/// Monotone iteration from `start`, which must be a subsolution (for
/// instance the minimal solution at a smaller `Λ`); the limit is still the
/// minimal solution. `None` starts from zero.
pub fn minimal_solution_from<T: Scalar>(
    system: &System<T>,
    lambda: &[T],
    map: &NonlinearMap<T>,
    options: &MinimalOptions<T>,
    start: Option<&GridFieldVec<T>>,
) -> Result<MinimalSolveOutcome<T>> {
    check_inputs(system, lambda, map)?;
    let (m, n) = (system.m(), system.n());
    let domain = system.domain();
    let mut u = match start {
        Some(s) if s.m() == m && s.len() == n => s.clone(),
        Some(s) => {
            return Err(Error::Dimension {
                expected: n,
                got: s.len(),
            })
        }
        None => GridFieldVec::zeros(m, n),
    };
    let mut f = GridFieldVec::zeros(m, n);
    let mut next = GridFieldVec::zeros(m, n);
    let mut f_next = GridFieldVec::zeros(m, n);
    // Solutions of L_i x = f_i from the previous sweep, as Krylov guesses.
    let mut guesses: Vec<Option<Vec<T>>> = vec![None; m];

    let mut outcome = MinimalSolveOutcome {
        status: SolveStatus::IterationCap,
        solution: None,
        last: u.clone(),
        iterations: 0,
        sup_history: vec![u.sup_norm()],
        residual: vec![T::infinity(); m],
        monotone_violations: 0,
        max_decrease: T::zero(),
        note: String::new(),
    };

    if let Err(e) = eval_field(map, domain, &u, &mut f) {
        return match e {
            Error::Saturation(msg) => {
                outcome.status = SolveStatus::Saturated;
                outcome.note = msg;
                Ok(outcome)
            }
            other => Err(other),
        };
    }

    let caps = &options.caps;
    let mut growing = 0usize;
    let mut last_increment = T::zero();
    for iter in 1..=caps.max_iter {
        for i in 0..m {
            let (x, _) = system.solver(i).solve_from(f.component(i), guesses[i].as_deref())?;
            let out = next.component_mut(i);
            for (o, v) in out.iter_mut().zip(&x) {
                *o = lambda[i] * *v;
            }
            guesses[i] = Some(x);
        }
        outcome.iterations = iter;
        let u_norm = u.sup_norm();
        let next_norm = next.sup_norm();
        outcome.sup_history.push(next_norm);

        let slack = options.monotone_tol * (T::one() + u_norm);
        let mut decrease = T::zero();
        for i in 0..m {
            for (a, b) in u.component(i).iter().zip(next.component(i)) {
                decrease = decrease.max(*a - *b);
            }
        }
        if decrease > slack {
            outcome.monotone_violations += 1;
        }
        outcome.max_decrease = outcome.max_decrease.max(decrease);

        if !next_norm.is_finite() {
            outcome.status = SolveStatus::Saturated;
            outcome.note = "iterate is not finite".into();
            outcome.last = next;
            return Ok(outcome);
        }
        if next_norm > caps.blowup {
            outcome.status = SolveStatus::Diverged;
            outcome.note = format!("sup norm {next_norm} exceeded the blow-up ceiling {}", caps.blowup);
            outcome.last = next;
            return Ok(outcome);
        }
        if let Err(e) = eval_field(map, domain, &next, &mut f_next) {
            return match e {
                Error::Saturation(msg) => {
                    outcome.status = SolveStatus::Saturated;
                    outcome.note = msg;
                    outcome.last = next;
                    Ok(outcome)
                }
                other => Err(other),
            };
        }

        let increment = next.sup_dist(&u);
        if increment <= options.tol * (T::one() + u_norm) {
            let res = residuals(system, lambda, &next, &f_next)?;
            let ok = res.iter().all(|r| *r <= options.residual_tol);
            outcome.residual = res;
            if ok {
                outcome.status = SolveStatus::Converged;
                outcome.solution = Some(next.clone());
                outcome.last = next;
                return Ok(outcome);
            }
        }

        // Growth window: steady relative growth with non-shrinking increments.
        if u_norm > T::zero() && next_norm >= (T::one() + caps.growth_delta) * u_norm && increment >= last_increment {
            growing += 1;
        } else {
            growing = 0;
        }
        last_increment = increment;
        if growing >= caps.growth_window {
            outcome.status = SolveStatus::Diverged;
            outcome.note = format!(
                "sup norm grew by at least {} for {} consecutive iterations",
                caps.growth_delta, caps.growth_window
            );
            outcome.last = next;
            return Ok(outcome);
        }

        std::mem::swap(&mut u, &mut next);
        std::mem::swap(&mut f, &mut f_next);
    }
    outcome.residual = residuals(system, lambda, &u, &f)?;
    outcome.note = format!("no verdict after {} iterations", caps.max_iter);
    outcome.last = u;
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotoneComparison {
    /// `u_a ≤ u_b + tol` everywhere.
    pub holds: bool,
    /// `u_a < u_b` at every interior node.
    pub strict: bool,
    /// `max (u_a − u_b)`.
    pub max_excess: f64,
}

/// Compares the minimal solutions at `lambda_a` and `lambda_b`.
pub fn check_monotone_in_lambda<T: Scalar>(
    system: &System<T>,
    map: &NonlinearMap<T>,
    lambda_a: &[T],
    lambda_b: &[T],
    options: &MinimalOptions<T>,
) -> Result<MonotoneComparison> {
    let a = minimal_solution(system, lambda_a, map, options)?;
    let b = minimal_solution(system, lambda_b, map, options)?;
    let (Some(ua), Some(ub)) = (a.solution, b.solution) else {
        return Err(Error::Parameter("both parameter tuples must yield converged solves".into()));
    };
    Ok(compare_fields(&ua, &ub, options.monotone_tol * (T::one() + ub.sup_norm())))
}

pub fn compare_fields<T: Scalar>(a: &GridFieldVec<T>, b: &GridFieldVec<T>, tol: T) -> MonotoneComparison {
    let mut excess = T::neg_infinity();
    for i in 0..a.m() {
        for (x, y) in a.component(i).iter().zip(b.component(i)) {
            excess = excess.max(*x - *y);
        }
    }
    MonotoneComparison {
        holds: a.le(b, tol),
        strict: a.lt(b),
        max_excess: excess.to_f64().unwrap_or(f64::NAN),
    }
}

/// `Σ_i ∫|u_i|` by the trapezoid rule (boundary values are zero).
pub fn l1_norm<T: Scalar>(u: &GridFieldVec<T>, domain: &DiscreteDomain<T>) -> T {
    let w = domain.interior_weights();
    u.components()
        .iter()
        .map(|c| c.iter().zip(&w).map(|(x, wk)| x.abs() * *wk).sum::<T>())
        .sum()
}

/// Trapezoid integral of a field given on all nodes, boundary included.
pub fn integrate_nodal<T: Scalar>(values: &[T], domain: &DiscreteDomain<T>) -> Result<T> {
    let w = domain.trapezoid_weights();
    if values.len() != w.len() {
        return Err(Error::Dimension {
            expected: w.len(),
            got: values.len(),
        });
    }
    Ok(values.iter().zip(&w).map(|(x, wk)| *x * *wk).sum())
}

/// `Λ = (λ, λσ_1, …, λσ_{m−1})`.
pub fn along<T: Scalar>(lambda: T, sigma: &[T]) -> Vec<T> {
    std::iter::once(lambda).chain(sigma.iter().map(|s| lambda * *s)).collect()
}

/// Max-norm of each component's residual, unscaled; for reports.
pub fn absolute_residuals<T: Scalar>(
    system: &System<T>,
    lambda: &[T],
    map: &NonlinearMap<T>,
    u: &GridFieldVec<T>,
) -> Result<Vec<T>> {
    let mut f = GridFieldVec::zeros(u.m(), u.len());
    eval_field(map, system.domain(), u, &mut f)?;
    (0..system.m())
        .map(|i| {
            let lu = system.operator(i).apply(u.component(i))?;
            let diff: Vec<T> = lu.iter().zip(f.component(i)).map(|(a, b)| *a - lambda[i] * *b).collect();
            Ok(sup_norm(&diff))
        })
        .collect()
}
