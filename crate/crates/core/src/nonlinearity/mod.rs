//! Vector nonlinearities `F(x, t)`, their Jacobians `A_ij = ∂f_i/∂t_j`, and
//! the structural data `(α, ρ)` entering the superlinear coupling condition.

mod conditions;
mod shift;

pub use conditions::{
    lower_envelope, verify_conditions, CheckResult, ConditionReport, Envelope, KappaResult, SampleSpec, Witness,
};
pub use shift::{signed_power, ShiftEval};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::mesh::DiscreteDomain;
use crate::scalar::{lit, to_f64, Scalar};

/// Where a map is evaluated: an interior unknown and its coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Site<T> {
    pub index: usize,
    pub coord: [T; 2],
}

impl<T: Scalar> Site<T> {
    pub fn of(domain: &DiscreteDomain<T>, unknown: usize) -> Self {
        Self {
            index: unknown,
            coord: domain.unknown_coord(unknown),
        }
    }

    /// A placeholder site for spatially constant maps.
    pub fn anywhere() -> Self {
        Self {
            index: 0,
            coord: [T::zero(); 2],
        }
    }
}

/// A per-component positive weight, constant or tabulated on unknowns.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weight<T> {
    Uniform(Vec<T>),
    /// `[component][unknown]`.
    Nodal(Vec<Vec<T>>),
}

impl<T: Scalar> Weight<T> {
    pub fn ones(m: usize) -> Self {
        Weight::Uniform(vec![T::one(); m])
    }

    #[inline]
    pub fn at(&self, component: usize, site: usize) -> T {
        match self {
            Weight::Uniform(v) => v[component],
            Weight::Nodal(table) => table[component][site],
        }
    }

    pub fn components(&self) -> usize {
        match self {
            Weight::Uniform(v) => v.len(),
            Weight::Nodal(t) => t.len(),
        }
    }

    /// Number of tabulated sites, if nodal.
    pub fn sites(&self) -> Option<usize> {
        match self {
            Weight::Uniform(_) => None,
            Weight::Nodal(t) => t.first().map(Vec::len),
        }
    }

    /// Repeats a single-component weight `m` times.
    pub fn broadcast(self, m: usize) -> Self {
        if self.components() != 1 || m == 1 {
            return self;
        }
        match self {
            Weight::Uniform(v) => Weight::Uniform(vec![v[0]; m]),
            Weight::Nodal(t) => Weight::Nodal(vec![t[0].clone(); m]),
        }
    }

    pub fn map<F: Fn(usize, T) -> T>(&self, f: F) -> Self {
        match self {
            Weight::Uniform(v) => Weight::Uniform(v.iter().enumerate().map(|(i, x)| f(i, *x)).collect()),
            Weight::Nodal(t) => Weight::Nodal(
                t.iter()
                    .enumerate()
                    .map(|(i, row)| row.iter().map(|x| f(i, *x)).collect())
                    .collect(),
            ),
        }
    }

    fn validate(&self, m: usize, name: &str) -> Result<()> {
        if self.components() != m {
            return Err(Error::Parameter(format!(
                "{name} has {} components, expected {m}",
                self.components()
            )));
        }
        let positive = |x: &T| *x > T::zero() && x.is_finite();
        let ok = match self {
            Weight::Uniform(v) => v.iter().all(positive),
            Weight::Nodal(t) => {
                let n = t.first().map(Vec::len).unwrap_or(0);
                if t.iter().any(|row| row.len() != n) {
                    return Err(Error::Parameter(format!("{name} table rows differ in length")));
                }
                t.iter().flatten().all(positive)
            }
        };
        if !ok {
            return Err(Error::Parameter(format!("{name} must be positive")));
        }
        Ok(())
    }
}

/// One factor `f_i` of a product potential `f(t) = Π f_i(t_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Factor<T> {
    /// `e^{β t}`.
    Exp { beta: T },
    /// `(1 + t)^p` with `p > 1`.
    Power { p: T },
}

impl<T: Scalar> Factor<T> {
    /// `(f, f', f'')` at `t`.
    fn eval(&self, t: T) -> Result<(T, T, T)> {
        match *self {
            Factor::Exp { beta } => {
                let e = checked_exp(beta * t)?;
                Ok((e, beta * e, beta * beta * e))
            }
            Factor::Power { p } => {
                let s = T::one() + t.max(T::zero());
                let f = s.powf(p);
                Ok((f, p * s.powf(p - T::one()), p * (p - T::one()) * s.powf(p - lit(2.0))))
            }
        }
    }
}

/// Parameters of the catalogued nonlinearities. Component indices are
/// cyclic: `t_{m+1}` means `t_1`.
#[derive(Debug, Clone, PartialEq)]
pub enum MapKind<T> {
    /// `F_i = ρ_i e^{β_i t_{i+1}}`; with `m = 1, β = 1` this is `e^t`.
    ExpShift { beta: Vec<T>, rho: Weight<T> },
    /// `F_i = (ρ_i t_{i+1}^{β_i} + τ_i)^{α_i}` with `Π α_i β_i > 1`.
    PowerComposite {
        alpha: Vec<T>,
        beta: Vec<T>,
        rho: Weight<T>,
        tau: Weight<T>,
    },
    /// `F_i = (Σ_j M_{i+1,j} t_j + τ_{i+1})^{β_i}` with `M ≥ 0`, positive
    /// diagonal and `Π β > 1`.
    AffinePower {
        matrix: Vec<Vec<T>>,
        beta: Vec<T>,
        tau: Weight<T>,
    },
    /// `F = ρ ∇f` with `f(t) = Π f_i(t_i)`.
    ProductPotential { factors: Vec<Factor<T>>, rho: Weight<T> },
    /// Expressions in `t1..tm` (and `x`, `y`, `r`).
    Custom {
        components: Vec<String>,
        jacobian: Option<Vec<Vec<String>>>,
        alpha: Vec<T>,
        rho: Weight<T>,
        convex: bool,
        potential: bool,
    },
}

impl<T> MapKind<T> {
    pub fn tag(&self) -> &'static str {
        match self {
            MapKind::ExpShift { .. } => "exp-shift",
            MapKind::PowerComposite { .. } => "power-composite",
            MapKind::AffinePower { .. } => "affine-power",
            MapKind::ProductPotential { .. } => "product-potential",
            MapKind::Custom { .. } => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Compiled {
    components: Vec<Expr>,
    jacobian: Option<Vec<Vec<Expr>>>,
}

/// A validated nonlinearity with its coupling data.
///
/// `alpha` and `rho` are the exponent tuple (`Π α = 1`) and weight for which
/// `F(x, t) ≥ κ ρ(x) S_α(t)` is expected at infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearMap<T> {
    m: usize,
    kind: MapKind<T>,
    alpha: Vec<T>,
    rho: Weight<T>,
    convex: bool,
    potential: bool,
    compiled: Option<Compiled>,
}

fn checked_exp<T: Scalar>(arg: T) -> Result<T> {
    if arg > T::exp_ceiling() {
        return Err(Error::Saturation(format!("exp argument {arg} exceeds {}", T::exp_ceiling())));
    }
    Ok(arg.exp())
}

fn positive_tuple<T: Scalar>(v: &[T], m: usize, name: &str) -> Result<()> {
    if v.len() != m {
        return Err(Error::Parameter(format!("{name} has {} entries, expected {m}", v.len())));
    }
    if v.iter().any(|x| !(*x > T::zero()) || !x.is_finite()) {
        return Err(Error::Parameter(format!("{name} entries must be positive")));
    }
    Ok(())
}

fn product<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::one(), |acc, x| acc * *x)
}

/// Rescales `v` so that its entries multiply to one.
fn normalized_tuple<T: Scalar>(v: &[T]) -> Vec<T> {
    let root = product(v).powf(T::one() / lit(v.len() as f64));
    v.iter().map(|x| *x / root).collect()
}

/// Builds a catalogued map after checking its parameter constraints.
pub fn make_example<T: Scalar>(kind: MapKind<T>) -> Result<NonlinearMap<T>> {
    NonlinearMap::new(kind)
}

impl<T: Scalar> NonlinearMap<T> {
    pub fn new(kind: MapKind<T>) -> Result<Self> {
        let (m, alpha, rho, convex, potential, compiled) = match &kind {
            MapKind::ExpShift { beta, rho } => {
                let m = beta.len();
                positive_tuple(beta, m.max(1), "beta")?;
                rho.validate(m, "rho")?;
                (m, vec![T::one(); m], rho.clone(), true, m == 1, None)
            }
            MapKind::PowerComposite { alpha, beta, rho, tau } => {
                let m = alpha.len();
                positive_tuple(alpha, m.max(1), "alpha")?;
                positive_tuple(beta, m, "beta")?;
                rho.validate(m, "rho")?;
                tau.validate(m, "tau")?;
                let ab: Vec<T> = alpha.iter().zip(beta).map(|(a, b)| *a * *b).collect();
                if !(product(&ab) > T::one()) {
                    return Err(Error::Parameter(format!(
                        "power-composite requires prod(alpha*beta) > 1, got {}",
                        product(&ab)
                    )));
                }
                let gamma = normalized_tuple(&ab);
                let weight = rho.map(|i, r| r.powf(alpha[i]));
                let convex = alpha.iter().zip(beta).all(|(a, b)| *a >= T::one() && *b >= T::one());
                (m, gamma, weight, convex, false, None)
            }
            MapKind::AffinePower { matrix, beta, tau } => {
                let m = beta.len();
                positive_tuple(beta, m.max(1), "beta")?;
                tau.validate(m, "tau")?;
                if matrix.len() != m || matrix.iter().any(|row| row.len() != m) {
                    return Err(Error::Parameter(format!("affine-power matrix must be {m}x{m}")));
                }
                for (i, row) in matrix.iter().enumerate() {
                    if row.iter().any(|x| !(*x >= T::zero()) || !x.is_finite()) || !(row[i] > T::zero()) {
                        return Err(Error::Parameter(
                            "affine-power matrix must be nonnegative with positive diagonal".into(),
                        ));
                    }
                }
                if !(product(beta) > T::one()) {
                    return Err(Error::Parameter(format!(
                        "affine-power requires prod(beta) > 1, got {}",
                        product(beta)
                    )));
                }
                let gamma = normalized_tuple(beta);
                let weight = Weight::Uniform((0..m).map(|i| matrix[(i + 1) % m][(i + 1) % m].powf(beta[i])).collect());
                let convex = beta.iter().all(|b| *b >= T::one());
                (m, gamma, weight, convex, false, None)
            }
            MapKind::ProductPotential { factors, rho } => {
                let m = factors.len();
                if m == 0 {
                    return Err(Error::Parameter("product-potential needs at least one factor".into()));
                }
                for f in factors {
                    match *f {
                        Factor::Exp { beta } if !(beta > T::zero()) => {
                            return Err(Error::Parameter("exp factor needs beta > 0".into()))
                        }
                        Factor::Power { p } if !(p > T::one()) => {
                            return Err(Error::Parameter("power factor needs p > 1".into()))
                        }
                        _ => {}
                    }
                }
                if rho.components() != 1 && rho.components() != m {
                    return Err(Error::Parameter("product-potential rho must have 1 or m components".into()));
                }
                if rho.components() == m && m > 1 {
                    let differs = match rho {
                        Weight::Uniform(v) => v.iter().any(|x| *x != v[0]),
                        Weight::Nodal(t) => t.iter().any(|row| row != &t[0]),
                    };
                    if differs {
                        return Err(Error::Parameter("product-potential rho is a single scalar weight".into()));
                    }
                }
                let rho = rho.clone().broadcast(m);
                rho.validate(m, "rho")?;
                let convex = factors.iter().all(|f| matches!(f, Factor::Exp { .. }));
                (m, vec![T::one(); m], rho, convex, true, None)
            }
            MapKind::Custom {
                components,
                jacobian,
                alpha,
                rho,
                convex,
                potential,
            } => {
                let m = components.len();
                if m == 0 {
                    return Err(Error::Parameter("custom map needs at least one component".into()));
                }
                positive_tuple(alpha, m, "alpha")?;
                rho.validate(m, "rho")?;
                let vars = custom_variables(m);
                let parsed = components
                    .iter()
                    .map(|s| Expr::parse(s, &vars))
                    .collect::<Result<Vec<_>>>()?;
                let jac = match jacobian {
                    None => None,
                    Some(rows) => {
                        if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                            return Err(Error::Parameter(format!("custom jacobian must be {m}x{m}")));
                        }
                        Some(
                            rows.iter()
                                .map(|row| row.iter().map(|s| Expr::parse(s, &vars)).collect::<Result<Vec<_>>>())
                                .collect::<Result<Vec<_>>>()?,
                        )
                    }
                };
                let compiled = Compiled {
                    components: parsed,
                    jacobian: jac,
                };
                (m, alpha.clone(), rho.clone(), *convex, *potential, Some(compiled))
            }
        };
        if m == 0 {
            return Err(Error::Parameter("map needs at least one component".into()));
        }
        let drift = (product(&alpha) - T::one()).abs();
        if drift > lit(1e-12) {
            return Err(Error::Parameter(format!(
                "coupling exponents must multiply to 1, got product {}",
                product(&alpha)
            )));
        }
        let map = Self {
            m,
            kind,
            alpha,
            rho,
            convex,
            potential,
            compiled,
        };
        if map.potential && matches!(map.kind, MapKind::Custom { .. }) {
            map.check_symmetry()?;
        }
        Ok(map)
    }

    fn check_symmetry(&self) -> Result<()> {
        let site = Site::anywhere();
        let mut t = vec![T::zero(); self.m];
        for sample in 0..5 {
            for (j, tj) in t.iter_mut().enumerate() {
                *tj = lit::<T>(0.5) * lit::<T>(((sample * 3 + j * 7) % 5) as f64);
            }
            let a = self.jacobian(site, &t)?;
            for i in 0..self.m {
                for j in 0..i {
                    let scale = T::one() + a[i][j].abs().max(a[j][i].abs());
                    if (a[i][j] - a[j][i]).abs() > lit::<T>(1e-5) * scale {
                        return Err(Error::Parameter(format!(
                            "map flagged as potential but A[{i}][{j}] != A[{j}][{i}] at t = {:?}",
                            t.iter().map(|x| to_f64(*x)).collect::<Vec<_>>()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// The scalar Gelfand nonlinearity `e^t`.
    pub fn gelfand() -> Self {
        Self::new(MapKind::ExpShift {
            beta: vec![T::one()],
            rho: Weight::ones(1),
        })
        .expect("valid parameters")
    }

    pub fn exp_shift(beta: Vec<T>) -> Result<Self> {
        let m = beta.len();
        Self::new(MapKind::ExpShift {
            beta,
            rho: Weight::ones(m),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> &MapKind<T> {
        &self.kind
    }

    pub fn tag(&self) -> &'static str {
        self.kind.tag()
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn rho(&self) -> &Weight<T> {
        &self.rho
    }

    pub fn convex(&self) -> bool {
        self.convex
    }

    pub fn potential(&self) -> bool {
        self.potential
    }

    pub fn shift(&self) -> ShiftEval<T> {
        ShiftEval::new(self.alpha.clone()).expect("validated exponents")
    }

    /// Checks that tabulated weights cover `n` unknowns.
    pub fn check_sites(&self, n: usize) -> Result<()> {
        let weights: Vec<&Weight<T>> = match &self.kind {
            MapKind::ExpShift { rho, .. } | MapKind::ProductPotential { rho, .. } | MapKind::Custom { rho, .. } => {
                vec![rho]
            }
            MapKind::PowerComposite { rho, tau, .. } => vec![rho, tau],
            MapKind::AffinePower { tau, .. } => vec![tau],
        };
        for w in weights.into_iter().chain(std::iter::once(&self.rho)) {
            if let Some(sites) = w.sites() {
                if sites != n {
                    return Err(Error::Dimension { expected: n, got: sites });
                }
            }
        }
        Ok(())
    }

    fn custom_values(&self, site: Site<T>, t: &[T]) -> Vec<T> {
        let r = (site.coord[0] * site.coord[0] + site.coord[1] * site.coord[1]).sqrt();
        let mut values = t.to_vec();
        values.extend([site.coord[0], site.coord[1], r]);
        values
    }

    /// `F(x, t)` into `out`.
    pub fn eval_into(&self, site: Site<T>, t: &[T], out: &mut [T]) -> Result<()> {
        let m = self.m;
        if t.len() != m || out.len() != m {
            return Err(Error::Dimension { expected: m, got: t.len() });
        }
        let s = site.index;
        match &self.kind {
            MapKind::ExpShift { beta, rho } => {
                for i in 0..m {
                    out[i] = rho.at(i, s) * checked_exp(beta[i] * t[(i + 1) % m])?;
                }
            }
            MapKind::PowerComposite { alpha, beta, rho, tau } => {
                for i in 0..m {
                    let x = t[(i + 1) % m].max(T::zero());
                    out[i] = (rho.at(i, s) * x.powf(beta[i]) + tau.at(i, s)).powf(alpha[i]);
                }
            }
            MapKind::AffinePower { matrix, beta, tau } => {
                for i in 0..m {
                    let row = (i + 1) % m;
                    let z = affine(&matrix[row], t) + tau.at(row, s);
                    out[i] = z.powf(beta[i]);
                }
            }
            MapKind::ProductPotential { factors, rho } => {
                let vals = factors
                    .iter()
                    .zip(t)
                    .map(|(f, x)| f.eval(*x))
                    .collect::<Result<Vec<_>>>()?;
                for i in 0..m {
                    let mut acc = rho.at(i.min(rho.components() - 1), s) * vals[i].1;
                    for (k, v) in vals.iter().enumerate() {
                        if k != i {
                            acc *= v.0;
                        }
                    }
                    out[i] = acc;
                }
            }
            MapKind::Custom { .. } => {
                let compiled = self.compiled.as_ref().expect("custom maps are compiled");
                let values = self.custom_values(site, t);
                for (o, e) in out.iter_mut().zip(&compiled.components) {
                    *o = e.eval(&values)?;
                }
            }
        }
        if let Some(bad) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::Saturation(format!("component {} of F is not finite", bad + 1)));
        }
        Ok(())
    }

    pub fn eval(&self, site: Site<T>, t: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.m];
        self.eval_into(site, t, &mut out)?;
        Ok(out)
    }

    /// `A(x, t)` row-major into `out` (length `m²`).
    pub fn jacobian_into(&self, site: Site<T>, t: &[T], out: &mut [T]) -> Result<()> {
        let m = self.m;
        if t.len() != m || out.len() != m * m {
            return Err(Error::Dimension { expected: m, got: t.len() });
        }
        out.iter_mut().for_each(|v| *v = T::zero());
        let s = site.index;
        match &self.kind {
            MapKind::ExpShift { beta, rho } => {
                for i in 0..m {
                    let j = (i + 1) % m;
                    out[i * m + j] += rho.at(i, s) * beta[i] * checked_exp(beta[i] * t[j])?;
                }
            }
            MapKind::PowerComposite { alpha, beta, rho, tau } => {
                for i in 0..m {
                    let j = (i + 1) % m;
                    let x = t[j].max(T::zero());
                    let r = rho.at(i, s);
                    let base = r * x.powf(beta[i]) + tau.at(i, s);
                    let inner = if x == T::zero() {
                        if beta[i] < T::one() {
                            return Err(Error::Saturation("derivative of t^beta unbounded at t = 0".into()));
                        } else if beta[i] == T::one() {
                            r
                        } else {
                            T::zero()
                        }
                    } else {
                        r * beta[i] * x.powf(beta[i] - T::one())
                    };
                    out[i * m + j] += alpha[i] * base.powf(alpha[i] - T::one()) * inner;
                }
            }
            MapKind::AffinePower { matrix, beta, tau } => {
                for i in 0..m {
                    let row = (i + 1) % m;
                    let z = affine(&matrix[row], t) + tau.at(row, s);
                    let d = beta[i] * z.powf(beta[i] - T::one());
                    for j in 0..m {
                        out[i * m + j] = d * matrix[row][j];
                    }
                }
            }
            MapKind::ProductPotential { factors, rho } => {
                let vals = factors
                    .iter()
                    .zip(t)
                    .map(|(f, x)| f.eval(*x))
                    .collect::<Result<Vec<_>>>()?;
                for i in 0..m {
                    for j in 0..m {
                        let mut acc = rho.at(i.min(rho.components() - 1), s);
                        for (k, v) in vals.iter().enumerate() {
                            acc *= if i == j && k == i {
                                v.2
                            } else if k == i || k == j {
                                v.1
                            } else {
                                v.0
                            };
                        }
                        out[i * m + j] = acc;
                    }
                }
            }
            MapKind::Custom { .. } => {
                let compiled = self.compiled.as_ref().expect("custom maps are compiled");
                match &compiled.jacobian {
                    Some(rows) => {
                        let values = self.custom_values(site, t);
                        for (i, row) in rows.iter().enumerate() {
                            for (j, e) in row.iter().enumerate() {
                                out[i * m + j] = e.eval(&values)?;
                            }
                        }
                    }
                    None => {
                        let fd = self.fd_jacobian(site, t)?;
                        for i in 0..m {
                            out[i * m..(i + 1) * m].copy_from_slice(&fd[i]);
                        }
                    }
                }
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Saturation("Jacobian is not finite".into()));
        }
        Ok(())
    }

    pub fn jacobian(&self, site: Site<T>, t: &[T]) -> Result<Vec<Vec<T>>> {
        let m = self.m;
        let mut flat = vec![T::zero(); m * m];
        self.jacobian_into(site, t, &mut flat)?;
        Ok(flat.chunks(m).map(<[T]>::to_vec).collect())
    }

    /// Central-difference Jacobian of [`NonlinearMap::eval`].
    pub fn fd_jacobian(&self, site: Site<T>, t: &[T]) -> Result<Vec<Vec<T>>> {
        let m = self.m;
        let step0 = T::epsilon().cbrt();
        let mut out = vec![vec![T::zero(); m]; m];
        let mut tp = t.to_vec();
        let mut fp = vec![T::zero(); m];
        let mut fm = vec![T::zero(); m];
        for j in 0..m {
            let h = step0 * (T::one() + t[j].abs());
            tp[j] = t[j] + h;
            self.eval_into(site, &tp, &mut fp)?;
            tp[j] = t[j] - h;
            self.eval_into(site, &tp, &mut fm)?;
            tp[j] = t[j];
            for i in 0..m {
                out[i][j] = (fp[i] - fm[i]) / (h + h);
            }
        }
        Ok(out)
    }
}

fn affine<T: Scalar>(row: &[T], t: &[T]) -> T {
    row.iter().zip(t).map(|(a, x)| *a * x.max(T::zero())).sum()
}

/// Variable names available to custom expressions: `t1..tm, x, y, r`.
pub fn custom_variables(m: usize) -> Vec<String> {
    let mut vars: Vec<String> = (1..=m).map(|i| format!("t{i}")).collect();
    vars.extend(["x", "y", "r"].map(String::from));
    vars
}
