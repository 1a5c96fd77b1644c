//! The five subcommands. Each returns an [`Exit`] or a config-level error.

use anyhow::{bail, Context, Result};
use extremal_core::extremal::{
    extremal_profile, stability_inequality_probe, trace_hypersurface, Boundedness, ExtremalSample,
    StabilityProbeReport,
};
use extremal_core::minimal::{l1_norm, minimal_solution, MinimalSolveOutcome, SolveStatus};
use extremal_core::nonlinearity::{verify_conditions, CheckResult, ConditionReport};
use extremal_core::spectral::{h_of, lambda_star, stability_eigen, theta_star, ComposedOperator};
use log::{info, warn};
use serde::Serialize;

use crate::config::Problem;
use crate::output::Sink;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Config = 1,
    /// Divergence, or a failed condition check.
    Diverged = 2,
    /// Iteration cap or an unconverged eigen solve.
    Ambiguous = 3,
    Partial = 4,
}

impl Exit {
    fn of(status: SolveStatus) -> Self {
        match status {
            SolveStatus::Converged => Exit::Ok,
            SolveStatus::Diverged | SolveStatus::Saturated => Exit::Diverged,
            SolveStatus::IterationCap => Exit::Ambiguous,
        }
    }
}

#[derive(Serialize)]
struct SolveRecord<'a> {
    lambda: &'a [f64],
    status: SolveStatus,
    iterations: usize,
    residual: &'a [f64],
    sup_norm: f64,
    component_sup_norms: Vec<f64>,
    l1_norm: f64,
    monotone_violations: usize,
    note: &'a str,
    profile: Option<String>,
}

fn solve_record<'a>(
    p: &Problem,
    lambda: &'a [f64],
    out: &'a MinimalSolveOutcome<f64>,
    profile: Option<String>,
) -> SolveRecord<'a> {
    let u = out.solution.as_ref().unwrap_or(&out.last);
    SolveRecord {
        lambda,
        status: out.status,
        iterations: out.iterations,
        residual: &out.residual,
        sup_norm: u.sup_norm(),
        component_sup_norms: u.component_sup_norms(),
        l1_norm: l1_norm(u, p.system.domain()),
        monotone_violations: out.monotone_violations,
        note: &out.note,
        profile,
    }
}

pub fn solve(p: &Problem, lambda: Option<&[f64]>) -> Result<Exit> {
    let lambda = p.config.lambda(lambda)?;
    let sink = Sink::new(&p.config.output.dir)?;
    let out = minimal_solution(&p.system, &lambda, &p.map, &p.config.minimal_options())?;
    info!("solve Λ = {lambda:?}: {:?} after {} iterations", out.status, out.iterations);
    let profile = match &out.solution {
        Some(u) => Some(file_name(&sink.field("profile.csv", p.system.domain(), u)?)),
        None => None,
    };
    sink.json("solve.json", &p.config, &solve_record(p, &lambda, &out, profile))?;
    Ok(Exit::of(out.status))
}

#[derive(Serialize)]
struct ProfileRecord {
    file: String,
    lambdas: Vec<f64>,
    sup_norms: Vec<f64>,
    l1_norms: Vec<f64>,
    relative_growth: f64,
    verdict: Boundedness,
    monotone: bool,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct TraceEntry {
    sigma: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sample: Option<ExtremalSample<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    profile: Option<ProfileRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct TraceManifest {
    hypersurface: String,
    columns: Vec<String>,
    samples: Vec<TraceEntry>,
    failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn trace_columns(m: usize) -> Vec<String> {
    let mut cols: Vec<String> = (1..m).map(|i| format!("sigma{i}")).collect();
    cols.extend(["lambda_star", "lambda_lo", "lambda_hi", "eta1", "l1_last"].map(String::from));
    cols
}

/// Writes the hypersurface CSV (successful samples only, grid order) and a
/// manifest with every sample, error notes included.
pub fn trace(p: &Problem, profiles: bool) -> Result<Exit> {
    let m = p.system.m();
    let sink = Sink::new(&p.config.output.dir)?;
    let columns = trace_columns(m);
    let mut manifest = TraceManifest {
        hypersurface: "hypersurface.csv".into(),
        columns: columns.clone(),
        samples: Vec::new(),
        failed: 0,
        error: None,
    };
    let grid = p.config.sigma_grid()?;
    let opts = p.config.extremal_options();
    let results = match trace_hypersurface(&p.system, &p.map, &grid, &opts) {
        Ok(r) => r,
        Err(e) => {
            manifest.error = Some(e.to_string());
            sink.json("manifest.json", &p.config, &manifest)?;
            bail!(e);
        }
    };
    let mut rows = Vec::new();
    for (k, (sigma, res)) in grid.into_iter().zip(results).enumerate() {
        match res {
            Ok(s) => {
                let mut row = s.sigma.clone();
                row.extend([s.lambda_star_est, s.lambda_lo, s.lambda_hi]);
                row.push(s.eta1_near_star.unwrap_or(f64::NAN));
                row.push(s.l1_history.last().map_or(f64::NAN, |h| h.1));
                rows.push(row);
                let profile = if profiles {
                    let prof = extremal_profile(&p.system, &p.map, &s, &opts.minimal, &p.config.profile_options())?;
                    let file = file_name(&sink.field(&format!("profile_{k}.csv"), p.system.domain(), &prof.u_star)?);
                    Some(ProfileRecord {
                        file,
                        lambdas: prof.lambdas,
                        sup_norms: prof.sup_norms,
                        l1_norms: prof.l1_norms,
                        relative_growth: prof.relative_growth,
                        verdict: prof.verdict,
                        monotone: prof.monotone,
                        warnings: prof.warnings,
                    })
                } else {
                    None
                };
                manifest.samples.push(TraceEntry {
                    sigma,
                    sample: Some(s),
                    profile,
                    error: None,
                });
            }
            Err(e) => {
                warn!("σ = {sigma:?}: {e}");
                manifest.failed += 1;
                manifest.samples.push(TraceEntry {
                    sigma,
                    sample: None,
                    profile: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    sink.table("hypersurface.csv", &columns, rows)?;
    let failed = manifest.failed;
    sink.json("manifest.json", &p.config, &manifest)?;
    Ok(if failed == 0 { Exit::Ok } else { Exit::Partial })
}

#[derive(Serialize)]
struct ThetaRecord {
    sigma: Vec<f64>,
    theta_star: f64,
    point: Vec<f64>,
    /// `|H(θ_*, θ_*σ) − λ_*| / λ_*`.
    h_residual: f64,
}

#[derive(Serialize)]
struct SpectralRecord {
    alpha: Vec<f64>,
    lambda_star: f64,
    iterations: usize,
    residual: f64,
    converged: bool,
    eigenfield: String,
    theta: Vec<ThetaRecord>,
}

pub fn spectral(p: &Problem) -> Result<Exit> {
    let sink = Sink::new(&p.config.output.dir)?;
    let op = ComposedOperator::for_map(&p.system, &p.map).context("composed operator")?;
    let params = &p.config.parameters;
    let (pair, converged) = match lambda_star(&op, params.eigen_tol, params.eigen_max_iter) {
        Ok(pair) => (pair, true),
        Err(extremal_core::Error::NoConvergence { .. }) => {
            let record = SpectralRecord {
                alpha: p.map.alpha().to_vec(),
                lambda_star: f64::NAN,
                iterations: params.eigen_max_iter,
                residual: f64::NAN,
                converged: false,
                eigenfield: String::new(),
                theta: Vec::new(),
            };
            sink.json("spectral.json", &p.config, &record)?;
            return Ok(Exit::Ambiguous);
        }
        Err(e) => return Err(e.into()),
    };
    let alpha = p.map.alpha().to_vec();
    let mut theta = Vec::new();
    if p.system.m() >= 2 {
        for sigma in p.config.sigma_grid()? {
            let t = theta_star(&sigma, pair.lambda_star, &alpha)?;
            let mut point = vec![t];
            point.extend(sigma.iter().map(|s| t * s));
            let h = h_of(&point, &alpha)?;
            theta.push(ThetaRecord {
                sigma,
                theta_star: t,
                h_residual: (h - pair.lambda_star).abs() / pair.lambda_star,
                point,
            });
        }
    }
    let chain = op.chain(&pair.phi_star)?;
    let eigenfield = file_name(&sink.field("eigenfield.csv", p.system.domain(), &chain)?);
    let record = SpectralRecord {
        alpha,
        lambda_star: pair.lambda_star,
        iterations: pair.iterations,
        residual: pair.residual,
        converged,
        eigenfield,
        theta,
    };
    sink.json("spectral.json", &p.config, &record)?;
    Ok(Exit::Ok)
}

#[derive(Serialize)]
struct StabilityRecord<'a> {
    solve: SolveRecord<'a>,
    eta1: Option<f64>,
    stable: Option<bool>,
    shift: Option<f64>,
    eigen_iterations: Option<usize>,
    eigen_residual: Option<f64>,
    eigenfield: Option<String>,
    probe: Option<StabilityProbeReport<f64>>,
    irreducibility: CheckResult,
    warnings: Vec<String>,
}

pub fn stability(p: &Problem, lambda: Option<&[f64]>) -> Result<Exit> {
    let lambda = p.config.lambda(lambda)?;
    let sink = Sink::new(&p.config.output.dir)?;
    let params = &p.config.parameters;
    let report = verify_conditions(&p.map, p.system.domain(), &p.config.sample_spec())?;
    let mut warnings = Vec::new();
    if !report.irreducibility.passed {
        warnings.push("condition (D) failed: the coupling matrix is not irreducible".to_string());
    }
    let out = minimal_solution(&p.system, &lambda, &p.map, &p.config.minimal_options())?;
    let mut record = StabilityRecord {
        solve: solve_record(p, &lambda, &out, None),
        eta1: None,
        stable: None,
        shift: None,
        eigen_iterations: None,
        eigen_residual: None,
        eigenfield: None,
        probe: None,
        irreducibility: report.irreducibility.clone(),
        warnings,
    };
    let Some(u) = &out.solution else {
        record.warnings.push(format!("no minimal solution: {:?}", out.status));
        sink.json("stability.json", &p.config, &record)?;
        return Ok(Exit::of(out.status));
    };
    record.solve.profile = Some(file_name(&sink.field("profile.csv", p.system.domain(), u)?));
    let res = stability_eigen(&p.system, &lambda, &p.map, u, params.eigen_tol)?;
    info!("η₁ = {}", res.eta1);
    record.eta1 = Some(res.eta1);
    record.stable = Some(res.eta1 > 0.0);
    record.shift = Some(res.shift);
    record.eigen_iterations = Some(res.iterations);
    record.eigen_residual = Some(res.residual);
    record.eigenfield = Some(file_name(&sink.field("eigenfield.csv", p.system.domain(), &res.eigenfield)?));
    if p.map.potential() {
        record.probe = Some(stability_inequality_probe(
            &p.system,
            &lambda,
            &p.map,
            u,
            params.probe_trials,
            params.seed,
            params.probe_tol,
        )?);
    }
    sink.json("stability.json", &p.config, &record)?;
    Ok(Exit::Ok)
}

#[derive(Serialize)]
struct VerifyRecord<'a> {
    requested: &'a [String],
    passed: bool,
    report: &'a ConditionReport,
}

pub fn verify(p: &Problem) -> Result<Exit> {
    let sink = Sink::new(&p.config.output.dir)?;
    let report = verify_conditions(&p.map, p.system.domain(), &p.config.sample_spec())?;
    let [a, b, c, d] = p.config.conditions()?;
    let passed = (!a || report.positivity.passed)
        && (!b || report.monotonicity.passed)
        && (!c || report.coupling_passed())
        && (!d || report.irreducibility.passed);
    let record = VerifyRecord {
        requested: &p.config.parameters.conditions,
        passed,
        report: &report,
    };
    sink.json("conditions.json", &p.config, &record)?;
    Ok(if passed { Exit::Ok } else { Exit::Diverged })
}

fn file_name(path: &std::path::Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}
