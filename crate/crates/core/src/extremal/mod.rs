//! The extremal hypersurface `Λ*`: bracketing and bisection of `λ*(σ)` along
//! rays `Λ = (λ, λσ)`, parallel tracing over σ grids, and extremal profiles
//! as monotone limits of minimal solutions.

mod probes;

pub use probes::{
    green_lower_bound_probe, quadratic_forms, radial_bound_check, stability_inequality_probe, BoundClass,
    GreenProbeReport, RadialBoundReport, StabilityProbeReport,
};

use log::{debug, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::GridFieldVec;
use crate::minimal::{along, l1_norm, minimal_solution_from, MinimalOptions, MinimalSolveOutcome, SolveStatus};
use crate::nonlinearity::{lower_envelope, NonlinearMap, SampleSpec};
use crate::scalar::{lit, to_f64, Scalar};
use crate::spectral::{lambda_star, stability_eigen, theta_star, ComposedOperator, SPECTRAL_MAX_ITER, SPECTRAL_TOL};
use crate::system::System;

#[derive(Debug, Clone)]
pub struct ExtremalOptions<T> {
    /// Bisection stops at `λ_hi − λ_lo ≤ tol_lambda·λ_hi`.
    pub tol_lambda: T,
    pub minimal: MinimalOptions<T>,
    /// The near-extremal profile is taken at `min(λ_lo, λ_hi(1 − margin))`.
    pub margin: T,
    pub floor: T,
    pub ceiling: T,
    /// Factor of the geometric bracket searches.
    pub growth: T,
    /// L¹ norms are recorded at `λ_lo(1 − 2^{−k})`, `k = 1..=l1_points`.
    pub l1_points: usize,
    /// Compute `η₁` at the near-extremal profile.
    pub stability: bool,
    pub eigen_tol: T,
    /// Compare the bracket against the spectral bound `C₀θ_*(σ)`.
    pub cross_check: bool,
    pub envelope: SampleSpec,
}

impl<T: Scalar> Default for ExtremalOptions<T> {
    fn default() -> Self {
        Self {
            tol_lambda: lit(1e-4),
            minimal: MinimalOptions::default(),
            margin: lit(1e-3),
            floor: lit(1e-12),
            ceiling: lit(1e12),
            growth: lit(2.0),
            l1_points: 6,
            stability: true,
            eigen_tol: lit(SPECTRAL_TOL),
            cross_check: true,
            envelope: SampleSpec::default(),
        }
    }
}

/// `C₀` and `λ_*` of the composed operator built from the lower envelope;
/// `λ*(σ) ≤ C₀ θ_*(σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralBound<T> {
    pub c0: T,
    pub lambda_star: T,
}

impl<T: Scalar> SpectralBound<T> {
    pub fn compute(system: &System<T>, map: &NonlinearMap<T>, spec: &SampleSpec) -> Result<Self> {
        let envelope = lower_envelope(map, system.domain(), T::one(), spec)?;
        let op = ComposedOperator::new(system, envelope.rho0, map.alpha().to_vec())?;
        let pair = lambda_star(&op, lit(1e-10), SPECTRAL_MAX_ITER)?;
        Ok(Self {
            c0: envelope.c0,
            lambda_star: pair.lambda_star,
        })
    }

    pub fn at(&self, sigma: &[T], alpha: &[T]) -> Result<T> {
        Ok(self.c0 * theta_star(sigma, self.lambda_star, alpha)?)
    }
}

#[derive(Debug, Clone)]
pub struct Bracket<T> {
    pub lo: T,
    pub hi: T,
    /// The minimal solution at `λ_lo`.
    pub lo_solution: GridFieldVec<T>,
    pub hi_status: SolveStatus,
    /// `C₀θ_*(σ)` when the cross-check ran.
    pub spectral_bound: Option<T>,
    pub evaluations: usize,
    pub warnings: Vec<String>,
}

fn check_sigma<T: Scalar>(system: &System<T>, sigma: &[T]) -> Result<()> {
    if sigma.len() + 1 != system.m() {
        return Err(Error::Dimension {
            expected: system.m() - 1,
            got: sigma.len(),
        });
    }
    if sigma.iter().any(|s| !(*s > T::zero()) || !s.is_finite()) {
        return Err(Error::Parameter("σ must be positive".into()));
    }
    Ok(())
}

fn solve_on_ray<T: Scalar>(
    system: &System<T>,
    map: &NonlinearMap<T>,
    sigma: &[T],
    lambda: T,
    options: &MinimalOptions<T>,
    start: Option<&GridFieldVec<T>>,
) -> Result<MinimalSolveOutcome<T>> {
    minimal_solution_from(system, &along(lambda, sigma), map, options, start)
}

/// Geometric searches from `λ = 1` for a converged `λ_lo` and a
/// non-converged `λ_hi`. Iteration-cap outcomes count as not converged.
pub fn bracket_lambda_star<T: Scalar>(
    system: &System<T>,
    map: &NonlinearMap<T>,
    sigma: &[T],
    options: &ExtremalOptions<T>,
) -> Result<Bracket<T>> {
    let bound = if options.cross_check {
        match SpectralBound::compute(system, map, &options.envelope) {
            Ok(b) => Some(b),
            Err(e) => {
                warn!("spectral cross-check unavailable: {e}");
                None
            }
        }
    } else {
        None
    };
    bracket_with_bound(system, map, sigma, options, bound)
}

fn bracket_with_bound<T: Scalar>(
    system: &System<T>,
    map: &NonlinearMap<T>,
    sigma: &[T],
    options: &ExtremalOptions<T>,
    bound: Option<SpectralBound<T>>,
) -> Result<Bracket<T>> {
    check_sigma(system, sigma)?;
    if !(options.growth > T::one()) {
        return Err(Error::Parameter("bracket growth factor must exceed 1".into()));
    }
    let spectral_bound = match bound {
        Some(b) => Some(b.at(sigma, map.alpha())?),
        None => None,
    };
    let mut warnings = Vec::new();
    let mut evaluations = 1;
    let opts = &options.minimal;
    let first = solve_on_ray(system, map, sigma, T::one(), opts, None)?;

    let (lo, hi, lo_solution, hi_status) = if let Some(u) = first.solution {
        // Up-search. The spectral bound, when known, is tried as soon as the
        // geometric step would pass it.
        let mut lo = T::one();
        let mut lo_solution = u;
        loop {
            let mut next = lo * options.growth;
            if let Some(b) = spectral_bound {
                let capped = b * (T::one() + lit(1e-9));
                if lo < capped && next > capped {
                    next = capped;
                }
            }
            if next > options.ceiling {
                return Err(Error::BracketInconsistency(format!(
                    "still converging at λ = {lo} near the ceiling {}",
                    options.ceiling
                )));
            }
            evaluations += 1;
            let out = solve_on_ray(system, map, sigma, next, opts, Some(&lo_solution))?;
            match out.solution {
                Some(u) => {
                    if spectral_bound.is_some_and(|b| next > b) {
                        warnings.push(format!("converged at λ = {next} above the spectral bound"));
                    }
                    lo = next;
                    lo_solution = u;
                }
                None => break (lo, next, lo_solution, out.status),
            }
        }
    } else {
        let mut hi = T::one();
        let mut hi_status = first.status;
        loop {
            let next = hi / options.growth;
            if next < options.floor {
                return Err(Error::NoConvergentLambda {
                    floor: to_f64(options.floor),
                });
            }
            evaluations += 1;
            let out = solve_on_ray(system, map, sigma, next, opts, None)?;
            match out.solution {
                Some(u) => break (next, hi, u, hi_status),
                None => {
                    hi = next;
                    hi_status = out.status;
                }
            }
        }
    };
    if hi_status == SolveStatus::IterationCap {
        warnings.push(format!("iteration cap at λ_hi = {hi}; treated as not converged"));
    }
    if let Some(b) = spectral_bound {
        if lo > b {
            warnings.push(format!("λ_lo = {lo} exceeds the spectral bound {b}"));
        }
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(Bracket {
        lo,
        hi,
        lo_solution,
        hi_status,
        spectral_bound,
        evaluations,
        warnings,
    })
}

/// One point of `Λ*` with its bracket and near-extremal data.
#[derive(Debug, Clone, Serialize)]
pub struct ExtremalSample<T> {
    pub sigma: Vec<T>,
    pub lambda_star_est: T,
    pub lambda_lo: T,
    pub lambda_hi: T,
    pub resolution: usize,
    /// Minimal solution at `lambda_profile`.
    #[serde(skip)]
    pub profile_near_star: GridFieldVec<T>,
    pub lambda_profile: T,
    pub eta1_near_star: Option<T>,
    /// `(λ, ‖u_λ‖_{L¹})` for increasing `λ` up to `lambda_profile`.
    pub l1_history: Vec<(T, T)>,
    pub spectral_bound: Option<T>,
    pub bisection_steps: usize,
    pub iteration_cap_hits: usize,
    pub warnings: Vec<String>,
}

impl<T: Scalar> ExtremalSample<T> {
    /// `ν*(σ) = λ*(σ)σ`.
    pub fn nu_star(&self) -> Vec<T> {
        self.sigma.iter().map(|s| self.lambda_star_est * *s).collect()
    }

    /// The full tuple `(λ*, λ*σ)`.
    pub fn point(&self) -> Vec<T> {
        along(self.lambda_star_est, &self.sigma)
    }
}

/// `λ*(σ)` by bisection between a bracket's ends.
pub fn lambda_star_bisect<T: Scalar>(
    system: &System<T>,
    map: &NonlinearMap<T>,
    sigma: &[T],
    options: &ExtremalOptions<T>,
) -> Result<ExtremalSample<T>> {
    let bracket = bracket_lambda_star(system, map, sigma, options)?;
    bisect_from(system, map, sigma, options, bracket)
}

/// Bisection starting from a known bracket.
pub fn bisect_from<T: Scalar>(
    system: &System<T>,
    map: &NonlinearMap<T>,
    sigma: &[T],
    options: &ExtremalOptions<T>,
    bracket: Bracket<T>,
) -> Result<ExtremalSample<T>> {
    check_sigma(system, sigma)?;
    if !(options.tol_lambda > T::zero()) {
        return Err(Error::Parameter("tol_lambda must be positive".into()));
    }
    let Bracket {
        mut lo,
        mut hi,
        mut lo_solution,
        hi_status,
        spectral_bound,
        mut warnings,
        ..
    } = bracket;
    if !(lo < hi) {
        return Err(Error::BracketInconsistency(format!("λ_lo = {lo} is not below λ_hi = {hi}")));
    }
    let mut steps = 0;
    let mut caps = usize::from(hi_status == SolveStatus::IterationCap);
    while hi - lo > options.tol_lambda * hi {
        let mid = lit::<T>(0.5) * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        steps += 1;
        let out = solve_on_ray(system, map, sigma, mid, &options.minimal, Some(&lo_solution))?;
        debug!("bisection λ = {mid}: {:?} after {} sweeps", out.status, out.iterations);
        match out.solution {
            Some(u) => {
                lo = mid;
                lo_solution = u;
            }
            None => {
                if out.status == SolveStatus::IterationCap {
                    caps += 1;
                    let msg = format!("iteration cap at λ = {mid}; shrinking toward λ_lo");
                    warn!("{msg}");
                    warnings.push(msg);
                }
                hi = mid;
            }
        }
    }

    let lambda_profile = lo.min(hi * (T::one() - options.margin));
    let mut l1_history = Vec::new();
    let mut previous: Option<GridFieldVec<T>> = None;
    let mut schedule: Vec<T> = (1..=options.l1_points)
        .map(|k| lo * (T::one() - lit::<T>(0.5).powi(k as i32)))
        .filter(|l| *l < lambda_profile)
        .collect();
    schedule.push(lambda_profile);
    let mut profile = lo_solution.clone();
    for l in schedule {
        let u = if l == lo {
            lo_solution.clone()
        } else {
            let out = solve_on_ray(system, map, sigma, l, &options.minimal, previous.as_ref())?;
            out.solution.ok_or_else(|| {
                Error::BracketInconsistency(format!("no convergence at λ = {l} below the converged λ_lo = {lo}"))
            })?
        };
        l1_history.push((l, l1_norm(&u, system.domain())));
        previous = Some(u.clone());
        profile = u;
    }

    let eta1_near_star = if options.stability {
        match stability_eigen(system, &along(lambda_profile, sigma), map, &profile, options.eigen_tol) {
            Ok(r) => Some(r.eta1),
            Err(e) => {
                let msg = format!("stability eigenvalue unavailable: {e}");
                warn!("{msg}");
                warnings.push(msg);
                None
            }
        }
    } else {
        None
    };

    Ok(ExtremalSample {
        sigma: sigma.to_vec(),
        lambda_star_est: lit::<T>(0.5) * (lo + hi),
        lambda_lo: lo,
        lambda_hi: hi,
        resolution: system.domain().resolution(),
        profile_near_star: profile,
        lambda_profile,
        eta1_near_star,
        l1_history,
        spectral_bound,
        bisection_steps: steps,
        iteration_cap_hits: caps,
        warnings,
    })
}

/// Per-σ bisection over a grid, in parallel. The spectral cross-check is
/// computed once and shared. Per-sample errors are returned in place.
pub fn trace_hypersurface<T: Scalar>(
    system: &System<T>,
    map: &NonlinearMap<T>,
    sigma_grid: &[Vec<T>],
    options: &ExtremalOptions<T>,
) -> Result<Vec<Result<ExtremalSample<T>>>> {
    if system.m() < 2 {
        return Err(Error::Parameter("trace requires m ≥ 2".into()));
    }
    let bound = if options.cross_check {
        SpectralBound::compute(system, map, &options.envelope)
            .map_err(|e| warn!("spectral cross-check unavailable: {e}"))
            .ok()
    } else {
        None
    };
    Ok(sigma_grid
        .par_iter()
        .map(|sigma| {
            let bracket = bracket_with_bound(system, map, sigma, options, bound)?;
            bisect_from(system, map, sigma, options, bracket)
        })
        .collect())
}

/// `points` logarithmically spaced values in `[lo, hi]`.
pub fn log_spaced<T: Scalar>(lo: T, hi: T, points: usize) -> Result<Vec<T>> {
    if !(lo > T::zero()) || !(hi >= lo) || points == 0 {
        return Err(Error::Parameter("log spacing needs 0 < lo ≤ hi and at least one point".into()));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    let last = T::from(points - 1).unwrap_or_else(T::one);
    Ok((0..points)
        .map(|k| (a + (b - a) * T::from(k).unwrap_or_else(T::zero) / last).exp())
        .collect())
}

/// Tensor grid of log-spaced σ values for an `m`-component system, with
/// `points` values per component over `[lo, hi]`.
pub fn sigma_grid<T: Scalar>(m: usize, points: usize, lo: T, hi: T) -> Result<Vec<Vec<T>>> {
    if m < 2 {
        return Err(Error::Parameter("σ grids need m ≥ 2".into()));
    }
    let axis = log_spaced(lo, hi, points)?;
    let mut grid = vec![Vec::new()];
    for _ in 0..m - 1 {
        grid = grid
            .into_iter()
            .flat_map(|prefix: Vec<T>| {
                axis.iter().map(move |s| {
                    let mut p = prefix.clone();
                    p.push(*s);
                    p
                })
            })
            .collect();
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundedness {
    BoundedSaturating,
    Growing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions<T> {
    /// Number of levels `K`.
    pub levels: usize,
    /// Doublings inspected by the verdict.
    pub window: usize,
    /// Relative sup-norm growth below which the profile saturates.
    pub saturation_tol: T,
}

impl<T: Scalar> Default for ProfileOptions<T> {
    fn default() -> Self {
        Self {
            levels: 20,
            window: 3,
            saturation_tol: lit(0.01),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtremalProfile<T> {
    pub sigma: Vec<T>,
    /// Pointwise supremum of the computed minimal solutions.
    #[serde(skip)]
    pub u_star: GridFieldVec<T>,
    pub lambdas: Vec<T>,
    pub sup_norms: Vec<T>,
    pub l1_norms: Vec<T>,
    pub iterations: Vec<usize>,
    /// `(s_K − s_{K−W}) / s_{K−W}`.
    pub relative_growth: T,
    pub verdict: Boundedness,
    /// Every level dominated the previous one pointwise.
    pub monotone: bool,
    pub warnings: Vec<String>,
}

/// Minimal solutions at `λ_k = λ_lo(1 − 2^{−k})`, `k = 1..=K`, each started
/// from the previous one.
pub fn extremal_profile<T: Scalar>(
    system: &System<T>,
    map: &NonlinearMap<T>,
    sample: &ExtremalSample<T>,
    minimal: &MinimalOptions<T>,
    options: &ProfileOptions<T>,
) -> Result<ExtremalProfile<T>> {
    check_sigma(system, &sample.sigma)?;
    if options.levels < 1 || options.window < 1 || options.window >= options.levels {
        return Err(Error::Parameter("profile needs 1 ≤ window < levels".into()));
    }
    let lo = sample.lambda_lo;
    let mut warnings = Vec::new();
    let finest = lit::<T>(0.5).powi(options.levels as i32);
    if sample.lambda_hi - lo > finest * sample.lambda_hi {
        let msg = format!(
            "bracket width {} exceeds the finest level spacing 2^-{}; late levels cannot resolve the approach",
            (sample.lambda_hi - lo) / sample.lambda_hi,
            options.levels
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    let (m, n) = (system.m(), system.n());
    let mut u_star = GridFieldVec::zeros(m, n);
    let mut previous: Option<GridFieldVec<T>> = None;
    let mut lambdas = Vec::with_capacity(options.levels);
    let mut sup_norms = Vec::with_capacity(options.levels);
    let mut l1_norms = Vec::with_capacity(options.levels);
    let mut iterations = Vec::with_capacity(options.levels);
    let mut monotone = true;
    for k in 1..=options.levels {
        let l = lo * (T::one() - lit::<T>(0.5).powi(k as i32));
        let out = solve_on_ray(system, map, &sample.sigma, l, minimal, previous.as_ref())?;
        let u = out.solution.ok_or_else(|| {
            Error::BracketInconsistency(format!("{:?} at λ = {l} below the converged λ_lo = {lo}", out.status))
        })?;
        if let Some(p) = &previous {
            monotone &= p.le(&u, minimal.monotone_tol * (T::one() + u.sup_norm()));
        }
        u_star = u_star.max_with(&u);
        lambdas.push(l);
        sup_norms.push(u.sup_norm());
        l1_norms.push(l1_norm(&u, system.domain()));
        iterations.push(out.iterations);
        previous = Some(u);
    }
    let last = sup_norms[options.levels - 1];
    let earlier = sup_norms[options.levels - 1 - options.window];
    let relative_growth = if earlier > T::zero() {
        (last - earlier) / earlier
    } else {
        T::infinity()
    };
    let verdict = if relative_growth < options.saturation_tol {
        Boundedness::BoundedSaturating
    } else {
        Boundedness::Growing
    };
    Ok(ExtremalProfile {
        sigma: sample.sigma.clone(),
        u_star,
        lambdas,
        sup_norms,
        l1_norms,
        iterations,
        relative_growth,
        verdict,
        monotone,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::DiscreteDomain;
    use crate::nonlinearity::{MapKind, Weight};

    fn bratu(res: usize) -> System<f64> {
        System::laplacian(DiscreteDomain::interval(res).unwrap(), 1).unwrap()
    }

    #[test]
    fn bracket_contains_bratu_threshold() {
        let sys = bratu(65);
        let b = bracket_lambda_star(&sys, &NonlinearMap::gelfand(), &[], &ExtremalOptions::default()).unwrap();
        assert!(b.lo < 3.5138 && 3.5138 < b.hi, "{} {}", b.lo, b.hi);
        assert!(b.spectral_bound.unwrap() >= b.lo);
    }

    #[test]
    fn bisection_is_sound() {
        let sys = bratu(65);
        let g = NonlinearMap::gelfand();
        let opts = ExtremalOptions::default();
        let s = lambda_star_bisect(&sys, &g, &[], &opts).unwrap();
        assert!(s.lambda_hi - s.lambda_lo <= opts.tol_lambda * s.lambda_hi);
        assert!((s.lambda_star_est - 3.5138).abs() < 5e-3);
        let ok = minimal_solution_from(&sys, &[s.lambda_lo], &g, &opts.minimal, None).unwrap();
        assert!(ok.converged());
        let bad = minimal_solution_from(&sys, &[s.lambda_hi], &g, &opts.minimal, None).unwrap();
        assert!(!bad.converged());
        assert!(s.l1_history.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
        let eta = s.eta1_near_star.unwrap();
        assert!(eta > 0.0 && eta < 1.0, "{eta}");
    }

    #[test]
    fn sigma_grid_shapes() {
        let g = sigma_grid(3, 3, 0.25f64, 4.0).unwrap();
        assert_eq!(g.len(), 9);
        assert!((g[4][0] - 1.0).abs() < 1e-12 && (g[4][1] - 1.0).abs() < 1e-12);
        assert!(sigma_grid::<f64>(1, 3, 1.0, 2.0).is_err());
        assert_eq!(log_spaced(2.0, 8.0, 3).unwrap().len(), 3);
    }

    #[test]
    fn trace_needs_two_components() {
        let sys = bratu(17);
        let err = trace_hypersurface(&sys, &NonlinearMap::gelfand(), &[vec![]], &ExtremalOptions::default());
        assert!(err.is_err());
    }

    #[test]
    fn linear_threshold_is_principal_eigenvalue() {
        let sys = bratu(33);
        let map = NonlinearMap::new(MapKind::Custom {
            components: vec!["1 + t1".into()],
            jacobian: None,
            alpha: vec![1.0],
            rho: Weight::ones(1),
            convex: true,
            potential: false,
        })
        .unwrap();
        let h = 1.0 / 32.0;
        let mu1 = 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        let b = bracket_lambda_star(&sys, &map, &[], &ExtremalOptions::default()).unwrap();
        assert!((b.spectral_bound.unwrap() - mu1).abs() < 1e-8 * mu1);
        assert!(b.hi <= mu1 * (1.0 + 1e-8));
    }
}
