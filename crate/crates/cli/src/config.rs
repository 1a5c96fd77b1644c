//! JSON problem configuration and its resolution into core types.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use extremal_core::extremal::{sigma_grid, ExtremalOptions, ProfileOptions};
use extremal_core::linalg::{SolverKind, SolverOptions};
use extremal_core::mesh::{Coefficient, OperatorSpec};
use extremal_core::minimal::{IterationCaps, MinimalOptions};
use extremal_core::nonlinearity::{Factor, MapKind, SampleSpec, Weight};
use extremal_core::spectral::{SPECTRAL_MAX_ITER, SPECTRAL_TOL};
use extremal_core::system::System;
use extremal_core::{Domain, Map};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub domain: DomainConfig,
    /// Empty means `Δ` for every component; one entry is broadcast.
    #[serde(default)]
    pub operators: Vec<OperatorConfig>,
    pub nonlinearity: NonlinearityConfig,
    #[serde(default)]
    pub parameters: Parameters,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainConfig {
    Interval {
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
    Radial {
        dimension: usize,
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
    Rectangle {
        #[serde(default = "one")]
        width: f64,
        #[serde(default = "one")]
        height: f64,
        #[serde(default = "default_planar_resolution")]
        resolution: usize,
    },
}

fn default_resolution() -> usize {
    129
}

fn default_planar_resolution() -> usize {
    33
}

fn one() -> f64 {
    1.0
}

/// A number or an expression in `x`, `y`, `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientValue {
    Number(f64),
    Expression(String),
}

impl CoefficientValue {
    fn resolve(&self) -> Result<Coefficient<f64>> {
        match self {
            CoefficientValue::Number(v) => Ok(Coefficient::Constant(*v)),
            CoefficientValue::Expression(s) => Ok(Coefficient::parse(s)?),
        }
    }
}

impl Default for CoefficientValue {
    fn default() -> Self {
        CoefficientValue::Number(0.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    /// Per-axis `a_k`; empty means 1.
    #[serde(default)]
    pub diffusion: Vec<CoefficientValue>,
    /// Per-axis `b_k`.
    #[serde(default)]
    pub drift: Vec<CoefficientValue>,
    /// `c`, nonpositive.
    #[serde(default)]
    pub potential: CoefficientValue,
}

impl OperatorConfig {
    fn resolve(&self) -> Result<OperatorSpec<f64>> {
        let mut spec = OperatorSpec::laplacian().with_potential(self.potential.resolve()?);
        if !self.diffusion.is_empty() {
            spec = spec.with_diffusion(self.diffusion.iter().map(|c| c.resolve()).collect::<Result<_>>()?);
        }
        spec = spec.with_drift(self.drift.iter().map(|c| c.resolve()).collect::<Result<_>>()?);
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NonlinearityConfig {
    /// `e^t`.
    Gelfand,
    ExpShift {
        beta: Vec<f64>,
        #[serde(default)]
        rho: Option<Vec<CoefficientValue>>,
    },
    PowerComposite {
        alpha: Vec<f64>,
        beta: Vec<f64>,
        #[serde(default)]
        rho: Option<Vec<CoefficientValue>>,
        /// Defaults to 1 per component.
        #[serde(default)]
        tau: Option<Vec<CoefficientValue>>,
    },
    AffinePower {
        matrix: Vec<Vec<f64>>,
        beta: Vec<f64>,
        #[serde(default)]
        tau: Option<Vec<CoefficientValue>>,
    },
    ProductPotential {
        factors: Vec<Factor<f64>>,
        #[serde(default)]
        rho: Option<Vec<CoefficientValue>>,
    },
    Custom {
        components: Vec<String>,
        #[serde(default)]
        jacobian: Option<Vec<Vec<String>>>,
        alpha: Vec<f64>,
        #[serde(default)]
        rho: Option<Vec<CoefficientValue>>,
        #[serde(default)]
        convex: bool,
        #[serde(default)]
        potential: bool,
    },
}

impl NonlinearityConfig {
    pub fn m(&self) -> usize {
        match self {
            NonlinearityConfig::Gelfand => 1,
            NonlinearityConfig::ExpShift { beta, .. } => beta.len(),
            NonlinearityConfig::PowerComposite { alpha, .. } => alpha.len(),
            NonlinearityConfig::AffinePower { beta, .. } => beta.len(),
            NonlinearityConfig::ProductPotential { factors, .. } => factors.len(),
            NonlinearityConfig::Custom { components, .. } => components.len(),
        }
    }

    fn resolve(&self, domain: &Domain) -> Result<Map> {
        let m = self.m();
        let weight = |w: &Option<Vec<CoefficientValue>>| resolve_weight(w.as_deref(), m, domain);
        let kind = match self {
            NonlinearityConfig::Gelfand => MapKind::ExpShift {
                beta: vec![1.0],
                rho: Weight::ones(1),
            },
            NonlinearityConfig::ExpShift { beta, rho } => MapKind::ExpShift {
                beta: beta.clone(),
                rho: weight(rho)?,
            },
            NonlinearityConfig::PowerComposite { alpha, beta, rho, tau } => MapKind::PowerComposite {
                alpha: alpha.clone(),
                beta: beta.clone(),
                rho: weight(rho)?,
                tau: weight(tau)?,
            },
            NonlinearityConfig::AffinePower { matrix, beta, tau } => MapKind::AffinePower {
                matrix: matrix.clone(),
                beta: beta.clone(),
                tau: weight(tau)?,
            },
            NonlinearityConfig::ProductPotential { factors, rho } => MapKind::ProductPotential {
                factors: factors.clone(),
                rho: weight(rho)?,
            },
            NonlinearityConfig::Custom {
                components,
                jacobian,
                alpha,
                rho,
                convex,
                potential,
            } => MapKind::Custom {
                components: components.clone(),
                jacobian: jacobian.clone(),
                alpha: alpha.clone(),
                rho: weight(rho)?,
                convex: *convex,
                potential: *potential,
            },
        };
        Ok(Map::new(kind)?)
    }
}

/// Constants give a uniform weight; any expression tabulates all components
/// on the unknowns.
fn resolve_weight(values: Option<&[CoefficientValue]>, m: usize, domain: &Domain) -> Result<Weight<f64>> {
    let Some(values) = values else {
        return Ok(Weight::ones(m));
    };
    if values.len() != m {
        bail!("weight has {} entries, expected {m}", values.len());
    }
    if let Some(uniform) = values
        .iter()
        .map(|v| match v {
            CoefficientValue::Number(x) => Some(*x),
            CoefficientValue::Expression(_) => None,
        })
        .collect::<Option<Vec<_>>>()
    {
        return Ok(Weight::Uniform(uniform));
    }
    let mut nodal = Vec::with_capacity(m);
    for v in values {
        let c = v.resolve()?;
        let mut col = Vec::with_capacity(domain.n_unknowns());
        for k in 0..domain.n_unknowns() {
            col.push(c.at(domain.unknown_coord(k))?);
        }
        nodal.push(col);
    }
    Ok(Weight::Nodal(nodal))
}

/// Tolerances, caps and heuristics. Every field has a default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Parameters {
    /// `Λ` for `solve` and `stability` when `--lambda` is absent.
    pub lambda: Option<Vec<f64>>,
    /// Explicit directions `σ ∈ ℝ^{m−1}`; overrides the generated grid.
    pub sigma: Option<Vec<Vec<f64>>>,
    pub sigma_points: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub tol: f64,
    pub residual_tol: f64,
    pub monotone_tol: f64,
    pub max_iter: usize,
    pub blowup: f64,
    pub growth_window: usize,
    pub growth_delta: f64,
    pub tol_lambda: f64,
    pub margin: f64,
    pub floor: f64,
    pub ceiling: f64,
    pub l1_points: usize,
    pub stability: bool,
    pub cross_check: bool,
    pub profile_levels: usize,
    pub saturation_window: usize,
    pub saturation_tol: f64,
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
    pub probe_trials: usize,
    pub probe_tol: f64,
    pub kappas: Vec<f64>,
    /// Conditions whose failure makes `verify` fail, among `A`, `B`, `C`, `D`.
    pub conditions: Vec<String>,
    pub solver: SolverKind,
    pub solver_tol: f64,
    pub band_limit: usize,
    pub seed: u64,
}

impl Default for Parameters {
    fn default() -> Self {
        let minimal = MinimalOptions::<f64>::default();
        let extremal = ExtremalOptions::<f64>::default();
        let profile = ProfileOptions::<f64>::default();
        let solver = SolverOptions::<f64>::default();
        let sample = SampleSpec::default();
        Self {
            lambda: None,
            sigma: None,
            sigma_points: 5,
            sigma_min: 1.0 / 16.0,
            sigma_max: 16.0,
            tol: minimal.tol,
            residual_tol: minimal.residual_tol,
            monotone_tol: minimal.monotone_tol,
            max_iter: minimal.caps.max_iter,
            blowup: minimal.caps.blowup,
            growth_window: minimal.caps.growth_window,
            growth_delta: minimal.caps.growth_delta,
            tol_lambda: extremal.tol_lambda,
            margin: extremal.margin,
            floor: extremal.floor,
            ceiling: extremal.ceiling,
            l1_points: extremal.l1_points,
            stability: extremal.stability,
            cross_check: extremal.cross_check,
            profile_levels: profile.levels,
            saturation_window: profile.window,
            saturation_tol: profile.saturation_tol,
            eigen_tol: SPECTRAL_TOL,
            eigen_max_iter: SPECTRAL_MAX_ITER,
            probe_trials: 200,
            probe_tol: 1e-8,
            kappas: sample.kappas,
            conditions: ["A", "B", "C", "D"].map(String::from).to_vec(),
            solver: solver.kind,
            solver_tol: solver.tol,
            band_limit: solver.band_limit,
            seed: sample.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol_lambda: Option<f64>,
}

/// Parses a config file; errors carry the field path and line/column.
pub fn load(path: &Path) -> Result<ProblemConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse(&text).with_context(|| format!("invalid config {}", path.display()))
}

pub fn parse(text: &str) -> Result<ProblemConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow!("at `{path}`: {}", e.into_inner())
    })
}

impl ProblemConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(dir) = &o.out {
            self.output.dir = dir.clone();
        }
        if let Some(seed) = o.seed {
            self.parameters.seed = seed;
        }
        if let Some(t) = o.tol_lambda {
            self.parameters.tol_lambda = t;
        }
    }

    pub fn m(&self) -> usize {
        self.nonlinearity.m()
    }

    pub fn domain(&self) -> Result<Domain> {
        let d = match self.domain {
            DomainConfig::Interval { resolution } => Domain::interval(resolution),
            DomainConfig::Radial { dimension, resolution } => Domain::radial_ball(dimension, resolution),
            DomainConfig::Rectangle {
                width,
                height,
                resolution,
            } => Domain::rectangle(width, height, resolution),
        };
        d.context("domain")
    }

    pub fn solver_options(&self) -> SolverOptions<f64> {
        let p = &self.parameters;
        SolverOptions {
            tol: p.solver_tol,
            kind: p.solver,
            band_limit: p.band_limit,
            ..SolverOptions::default()
        }
    }

    pub fn minimal_options(&self) -> MinimalOptions<f64> {
        let p = &self.parameters;
        MinimalOptions {
            tol: p.tol,
            residual_tol: p.residual_tol,
            monotone_tol: p.monotone_tol,
            caps: IterationCaps {
                max_iter: p.max_iter,
                blowup: p.blowup,
                growth_window: p.growth_window,
                growth_delta: p.growth_delta,
            },
        }
    }

    pub fn sample_spec(&self) -> SampleSpec {
        SampleSpec {
            kappas: self.parameters.kappas.clone(),
            seed: self.parameters.seed,
            ..SampleSpec::default()
        }
    }

    pub fn extremal_options(&self) -> ExtremalOptions<f64> {
        let p = &self.parameters;
        ExtremalOptions {
            tol_lambda: p.tol_lambda,
            minimal: self.minimal_options(),
            margin: p.margin,
            floor: p.floor,
            ceiling: p.ceiling,
            l1_points: p.l1_points,
            stability: p.stability,
            eigen_tol: p.eigen_tol,
            cross_check: p.cross_check,
            envelope: self.sample_spec(),
            ..ExtremalOptions::default()
        }
    }

    pub fn profile_options(&self) -> ProfileOptions<f64> {
        let p = &self.parameters;
        ProfileOptions {
            levels: p.profile_levels,
            window: p.saturation_window,
            saturation_tol: p.saturation_tol,
        }
    }

    /// Explicit rows must have `m − 1` entries; their sign is checked per
    /// sample so that one bad row fails alone.
    pub fn sigma_grid(&self) -> Result<Vec<Vec<f64>>> {
        let m = self.m();
        let p = &self.parameters;
        match &p.sigma {
            Some(rows) => {
                for (i, r) in rows.iter().enumerate() {
                    if r.len() + 1 != m {
                        bail!("parameters.sigma[{i}] has {} entries, expected {}", r.len(), m.saturating_sub(1));
                    }
                }
                Ok(rows.clone())
            }
            None if m < 2 => Ok(Vec::new()),
            None => Ok(sigma_grid(m, p.sigma_points, p.sigma_min, p.sigma_max)?),
        }
    }

    /// `Λ` from the command line or the config; one value is broadcast.
    pub fn lambda(&self, cli: Option<&[f64]>) -> Result<Vec<f64>> {
        let m = self.m();
        let v = cli
            .map(<[f64]>::to_vec)
            .or_else(|| self.parameters.lambda.clone())
            .ok_or_else(|| anyhow!("no Λ given: pass --lambda or set parameters.lambda"))?;
        let v = match v.len() {
            1 => vec![v[0]; m],
            n if n == m => v,
            n => bail!("Λ has {n} entries, expected 1 or {m}"),
        };
        if v.iter().any(|x| *x <= 0.0 || !x.is_finite()) {
            bail!("Λ entries must be positive");
        }
        Ok(v)
    }

    pub fn conditions(&self) -> Result<[bool; 4]> {
        let mut out = [false; 4];
        for c in &self.parameters.conditions {
            let i = match c.as_str() {
                "A" => 0,
                "B" => 1,
                "C" => 2,
                "D" => 3,
                other => bail!("parameters.conditions: unknown condition `{other}`"),
            };
            out[i] = true;
        }
        Ok(out)
    }
}

/// The validated in-memory problem.
pub struct Problem {
    pub config: ProblemConfig,
    pub system: System<f64>,
    pub map: Map,
}

impl Problem {
    pub fn build(config: ProblemConfig) -> Result<Self> {
        let domain = config.domain()?;
        let m = config.m();
        if m == 0 {
            bail!("nonlinearity has no components");
        }
        let map = config.nonlinearity.resolve(&domain).context("nonlinearity")?;
        let specs = match config.operators.len() {
            0 => vec![OperatorSpec::laplacian(); m],
            1 => vec![config.operators[0].resolve().context("operators[0]")?; m],
            n if n == m => config
                .operators
                .iter()
                .enumerate()
                .map(|(i, o)| o.resolve().with_context(|| format!("operators[{i}]")))
                .collect::<Result<_>>()?,
            n => bail!("operators has {n} entries, expected 0, 1 or {m}"),
        };
        config.conditions()?;
        let system = System::assemble(domain, &specs, config.solver_options()).context("operators")?;
        Ok(Self { config, system, map })
    }
}
