//! Uniform grids and monotone finite-difference discretizations of
//! nondivergence-form elliptic operators
//! `𝓛u = Σ a_k ∂_kk u + Σ b_k ∂_k u + c u` with homogeneous Dirichlet data.
//!
//! Every assembled matrix approximates `-𝓛` on the interior unknowns and is
//! checked for the M-matrix sign pattern, which is what makes the discrete
//! maximum principle (and thus monotone iteration) hold.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::SparseMatrix;
use crate::scalar::{from_usize, lit, to_f64, Scalar};

/// Geometry of a [`DiscreteDomain`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainKind<T> {
    /// The unit interval `(0, 1)`.
    Interval,
    /// The unit ball of `ℝⁿ`, reduced to the radius `r ∈ [0, 1]`.
    RadialBall { dimension: usize },
    /// The rectangle `(0, width) × (0, height)`.
    Rectangle { width: T, height: T },
}

impl<T> DomainKind<T> {
    pub fn axes(&self) -> usize {
        match self {
            DomainKind::Rectangle { .. } => 2,
            _ => 1,
        }
    }
}

/// One grid node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridNode<T> {
    pub coord: [T; 2],
    pub boundary: bool,
    /// Distance to the boundary.
    pub delta: T,
}

/// A uniform grid with its interior/boundary split.
///
/// Grid functions ([`crate::field::GridFieldVec`]) live on the interior
/// nodes only, in the order given by [`DiscreteDomain::unknowns`]; boundary
/// values are the homogeneous Dirichlet datum.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDomain<T> {
    kind: DomainKind<T>,
    resolution: usize,
    spacing: [T; 2],
    nodes: Vec<GridNode<T>>,
    unknowns: Vec<usize>,
    unknown_of: Vec<Option<usize>>,
}

/// Surface measure of the unit sphere `S^{n-1}` (2 for `n = 1`).
pub fn sphere_area<T: Scalar>(n: usize) -> T {
    let two_pi = lit::<T>(2.0 * std::f64::consts::PI);
    match n {
        0 => T::zero(),
        1 => lit(2.0),
        2 => two_pi,
        _ => sphere_area::<T>(n - 2) * two_pi / from_usize(n - 2),
    }
}

impl<T: Scalar> DiscreteDomain<T> {
    pub const MIN_RESOLUTION: usize = 3;

    /// Builds a grid with `resolution` nodes per axis (boundary included).
    pub fn build(kind: DomainKind<T>, resolution: usize) -> Result<Self> {
        if resolution < Self::MIN_RESOLUTION {
            return Err(Error::Resolution {
                got: resolution,
                min: Self::MIN_RESOLUTION,
            });
        }
        let cells = from_usize::<T>(resolution - 1);
        match kind {
            DomainKind::Interval => {
                let h = T::one() / cells;
                let nodes = (0..resolution)
                    .map(|k| {
                        let x = from_usize::<T>(k) * h;
                        let boundary = k == 0 || k + 1 == resolution;
                        let delta = if boundary { T::zero() } else { x.min(T::one() - x) };
                        GridNode {
                            coord: [x, T::zero()],
                            boundary,
                            delta,
                        }
                    })
                    .collect();
                Ok(Self::finish(kind, resolution, [h, T::zero()], nodes))
            }
            DomainKind::RadialBall { dimension } => {
                if dimension == 0 {
                    return Err(Error::Geometry("ball dimension must be at least 1".into()));
                }
                let h = T::one() / cells;
                let nodes = (0..resolution)
                    .map(|k| {
                        let r = from_usize::<T>(k) * h;
                        let boundary = k + 1 == resolution;
                        GridNode {
                            coord: [r, T::zero()],
                            boundary,
                            delta: if boundary { T::zero() } else { T::one() - r },
                        }
                    })
                    .collect();
                Ok(Self::finish(kind, resolution, [h, T::zero()], nodes))
            }
            DomainKind::Rectangle { width, height } => {
                if !(width > T::zero() && height > T::zero()) || !width.is_finite() || !height.is_finite() {
                    return Err(Error::Geometry(format!(
                        "rectangle sides must be positive, got {width} x {height}"
                    )));
                }
                let hx = width / cells;
                let hy = height / cells;
                let mut nodes = Vec::with_capacity(resolution * resolution);
                for j in 0..resolution {
                    for i in 0..resolution {
                        let x = from_usize::<T>(i) * hx;
                        let y = from_usize::<T>(j) * hy;
                        let boundary = i == 0 || j == 0 || i + 1 == resolution || j + 1 == resolution;
                        let delta = if boundary {
                            T::zero()
                        } else {
                            x.min(width - x).min(y).min(height - y)
                        };
                        nodes.push(GridNode {
                            coord: [x, y],
                            boundary,
                            delta,
                        });
                    }
                }
                Ok(Self::finish(kind, resolution, [hx, hy], nodes))
            }
        }
    }

    fn finish(kind: DomainKind<T>, resolution: usize, spacing: [T; 2], nodes: Vec<GridNode<T>>) -> Self {
        let mut unknowns = Vec::new();
        let mut unknown_of = vec![None; nodes.len()];
        for (idx, node) in nodes.iter().enumerate() {
            if !node.boundary {
                unknown_of[idx] = Some(unknowns.len());
                unknowns.push(idx);
            }
        }
        Self {
            kind,
            resolution,
            spacing,
            nodes,
            unknowns,
            unknown_of,
        }
    }

    pub fn interval(resolution: usize) -> Result<Self> {
        Self::build(DomainKind::Interval, resolution)
    }

    pub fn radial_ball(dimension: usize, resolution: usize) -> Result<Self> {
        Self::build(DomainKind::RadialBall { dimension }, resolution)
    }

    pub fn rectangle(width: T, height: T, resolution: usize) -> Result<Self> {
        Self::build(DomainKind::Rectangle { width, height }, resolution)
    }

    pub fn kind(&self) -> DomainKind<T> {
        self.kind
    }

    /// Nodes per axis, boundary included.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn spacing(&self, axis: usize) -> T {
        self.spacing[axis]
    }

    pub fn axes(&self) -> usize {
        self.kind.axes()
    }

    pub fn nodes(&self) -> &[GridNode<T>] {
        &self.nodes
    }

    /// Node indices of the interior unknowns.
    pub fn unknowns(&self) -> &[usize] {
        &self.unknowns
    }

    pub fn n_unknowns(&self) -> usize {
        self.unknowns.len()
    }

    pub fn unknown_of(&self, node: usize) -> Option<usize> {
        self.unknown_of[node]
    }

    /// Boundary node indices.
    pub fn boundary(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.boundary)
            .map(|(i, _)| i)
    }

    pub fn unknown_coord(&self, u: usize) -> [T; 2] {
        self.nodes[self.unknowns[u]].coord
    }

    /// `δ` on the interior unknowns.
    pub fn delta(&self) -> Vec<T> {
        self.unknowns.iter().map(|&i| self.nodes[i].delta).collect()
    }

    /// Radial dimension `n`, if this is a ball.
    pub fn ball_dimension(&self) -> Option<usize> {
        match self.kind {
            DomainKind::RadialBall { dimension } => Some(dimension),
            _ => None,
        }
    }

    /// Trapezoid weights on all nodes; radial grids carry the `ω r^{n-1}`
    /// Jacobian so that sums approximate integrals over the ball.
    pub fn trapezoid_weights(&self) -> Vec<T> {
        let half = lit::<T>(0.5);
        let last = self.resolution - 1;
        let end = |k: usize| if k == 0 || k == last { half } else { T::one() };
        match self.kind {
            DomainKind::Interval => (0..self.resolution)
                .map(|k| end(k) * self.spacing[0])
                .collect(),
            DomainKind::RadialBall { dimension } => {
                let omega = sphere_area::<T>(dimension);
                let h = self.spacing[0];
                (0..self.resolution)
                    .map(|k| {
                        let r = from_usize::<T>(k) * h;
                        omega * r.powi(dimension as i32 - 1) * h * end(k)
                    })
                    .collect()
            }
            DomainKind::Rectangle { .. } => {
                let n = self.resolution;
                let mut w = Vec::with_capacity(n * n);
                for j in 0..n {
                    for i in 0..n {
                        w.push(end(i) * end(j) * self.spacing[0] * self.spacing[1]);
                    }
                }
                w
            }
        }
    }

    /// Trapezoid weights restricted to the unknowns (boundary values are 0).
    pub fn interior_weights(&self) -> Vec<T> {
        let w = self.trapezoid_weights();
        self.unknowns.iter().map(|&i| w[i]).collect()
    }

    /// Finite-volume cell measures of the unknowns. For radial grids these
    /// are the exact shell volumes, which makes the weighted Laplacian
    /// symmetric.
    pub fn cell_volumes(&self) -> Vec<T> {
        match self.kind {
            DomainKind::RadialBall { dimension } => {
                let omega = sphere_area::<T>(dimension);
                let h = self.spacing[0];
                (0..self.unknowns.len())
                    .map(|k| omega * shell_volume(k, h, dimension))
                    .collect()
            }
            DomainKind::Interval => vec![self.spacing[0]; self.unknowns.len()],
            DomainKind::Rectangle { .. } => {
                vec![self.spacing[0] * self.spacing[1]; self.unknowns.len()]
            }
        }
    }

    /// Discrete Dirichlet energy `∫|∇v|²` from forward differences over all
    /// grid edges (boundary values 0). For the Laplacian this equals
    /// `vᵀ W L v` with `W` the cell volumes.
    pub fn dirichlet_energy(&self, v: &[T]) -> Result<T> {
        if v.len() != self.unknowns.len() {
            return Err(Error::Dimension {
                expected: self.unknowns.len(),
                got: v.len(),
            });
        }
        let value = |node: usize| self.unknown_of[node].map(|u| v[u]).unwrap_or_else(T::zero);
        let mut energy = T::zero();
        match self.kind {
            DomainKind::Interval => {
                let h = self.spacing[0];
                for k in 0..self.resolution - 1 {
                    let d = value(k + 1) - value(k);
                    energy += d * d / h;
                }
            }
            DomainKind::RadialBall { dimension } => {
                let h = self.spacing[0];
                let omega = sphere_area::<T>(dimension);
                for k in 0..self.resolution - 1 {
                    let r_mid = (from_usize::<T>(k) + lit(0.5)) * h;
                    let d = value(k + 1) - value(k);
                    energy += omega * r_mid.powi(dimension as i32 - 1) * d * d / h;
                }
            }
            DomainKind::Rectangle { .. } => {
                let n = self.resolution;
                let (hx, hy) = (self.spacing[0], self.spacing[1]);
                for j in 0..n {
                    for i in 0..n {
                        let here = value(j * n + i);
                        if i + 1 < n {
                            let d = value(j * n + i + 1) - here;
                            energy += d * d * hy / hx;
                        }
                        if j + 1 < n {
                            let d = value((j + 1) * n + i) - here;
                            energy += d * d * hx / hy;
                        }
                    }
                }
            }
        }
        Ok(energy)
    }

    /// Samples `f(coord)` on the unknowns.
    pub fn sample<F: Fn([T; 2]) -> T>(&self, f: F) -> Vec<T> {
        self.unknowns.iter().map(|&i| f(self.nodes[i].coord)).collect()
    }

    /// Expands an unknown-indexed vector to all nodes (boundary = 0).
    pub fn to_nodal(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.nodes.len()];
        for (u, &node) in self.unknowns.iter().enumerate() {
            out[node] = v[u];
        }
        out
    }
}

/// `|{ r_{k-1/2} < |x| < r_{k+1/2} }| / ω` with `r_{-1/2} = 0`.
fn shell_volume<T: Scalar>(k: usize, h: T, n: usize) -> T {
    let half = lit::<T>(0.5);
    let outer = (from_usize::<T>(k) + half) * h;
    let inner = if k == 0 {
        T::zero()
    } else {
        (from_usize::<T>(k) - half) * h
    };
    (outer.powi(n as i32) - inner.powi(n as i32)) / from_usize(n)
}

/// A spatial coefficient: constant or an expression in `x`, `y`, `r`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient<T> {
    Constant(T),
    Field(Expr),
}

impl<T: Scalar> Coefficient<T> {
    pub const VARIABLES: [&'static str; 3] = ["x", "y", "r"];

    pub fn parse(source: &str) -> Result<Self> {
        let expr = Expr::parse(source, &Self::VARIABLES)?;
        if expr.is_constant() {
            return Ok(Coefficient::Constant(expr.eval(&[T::zero(); 3])?));
        }
        Ok(Coefficient::Field(expr))
    }

    pub fn at(&self, coord: [T; 2]) -> Result<T> {
        match self {
            Coefficient::Constant(c) => Ok(*c),
            Coefficient::Field(e) => {
                let r = (coord[0] * coord[0] + coord[1] * coord[1]).sqrt();
                e.eval(&[coord[0], coord[1], r])
            }
        }
    }
}

impl<T: Scalar> From<T> for Coefficient<T> {
    fn from(value: T) -> Self {
        Coefficient::Constant(value)
    }
}

/// Uniform ellipticity and coefficient bounds checked at assembly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipticityBounds<T> {
    /// `c₀`: lower bound for every diffusion coefficient.
    pub lower: T,
    /// `C₀`: upper bound for every diffusion coefficient.
    pub upper: T,
    /// `b`: bound for `|b_j|` and `|c|`.
    pub lower_order: T,
}

impl<T: Scalar> Default for EllipticityBounds<T> {
    fn default() -> Self {
        Self {
            lower: lit(1e-3),
            upper: lit(1e3),
            lower_order: lit(1e3),
        }
    }
}

/// Coefficients of one operator `𝓛_i` (diagonal second-order part only).
///
/// On a radial ball the single diffusion coefficient multiplies the radial
/// Laplacian `u'' + ((n-1)/r) u'`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec<T> {
    /// Per-axis `a_k`; a single entry is broadcast to every axis.
    pub diffusion: Vec<Coefficient<T>>,
    /// Per-axis `b_k`; empty means no drift.
    pub drift: Vec<Coefficient<T>>,
    /// Zeroth-order coefficient `c`.
    pub potential: Coefficient<T>,
    pub bounds: EllipticityBounds<T>,
}

impl<T: Scalar> OperatorSpec<T> {
    /// The Laplacian `Δ`.
    pub fn laplacian() -> Self {
        Self {
            diffusion: vec![Coefficient::Constant(T::one())],
            drift: Vec::new(),
            potential: Coefficient::Constant(T::zero()),
            bounds: EllipticityBounds::default(),
        }
    }

    pub fn with_drift(mut self, drift: Vec<Coefficient<T>>) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_potential(mut self, c: Coefficient<T>) -> Self {
        self.potential = c;
        self
    }

    pub fn with_diffusion(mut self, a: Vec<Coefficient<T>>) -> Self {
        self.diffusion = a;
        self
    }

    fn diffusion_at(&self, axis: usize, coord: [T; 2]) -> Result<T> {
        match self.diffusion.len() {
            0 => Ok(T::one()),
            1 => self.diffusion[0].at(coord),
            _ => self
                .diffusion
                .get(axis)
                .ok_or_else(|| Error::Parameter(format!("no diffusion coefficient for axis {axis}")))?
                .at(coord),
        }
    }

    fn drift_at(&self, axis: usize, coord: [T; 2]) -> Result<T> {
        match self.drift.len() {
            0 => Ok(T::zero()),
            1 if axis > 0 => Ok(T::zero()),
            _ => match self.drift.get(axis) {
                Some(b) => b.at(coord),
                None => Ok(T::zero()),
            },
        }
    }
}

/// Which difference formulas were used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StencilRecord {
    pub diffusion: &'static str,
    pub drift: &'static str,
    pub origin: Option<&'static str>,
}

/// An assembled approximation of `-𝓛` on the interior unknowns.
#[derive(Debug, Clone)]
pub struct DiscreteOperator<T> {
    matrix: SparseMatrix<T>,
    stencil: StencilRecord,
    m_matrix_verified: bool,
    potential_nonpositive: bool,
}

impl<T: Scalar> DiscreteOperator<T> {
    pub fn matrix(&self) -> &SparseMatrix<T> {
        &self.matrix
    }

    pub fn stencil(&self) -> &StencilRecord {
        &self.stencil
    }

    pub fn m_matrix_verified(&self) -> bool {
        self.m_matrix_verified
    }

    pub fn potential_nonpositive(&self) -> bool {
        self.potential_nonpositive
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `L v` with homogeneous Dirichlet boundary values.
    pub fn apply(&self, v: &[T]) -> Result<Vec<T>> {
        self.matrix.mul_vec(v)
    }

    /// Wraps an arbitrary matrix after the same M-matrix scan used by
    /// [`assemble`].
    pub fn from_matrix(matrix: SparseMatrix<T>) -> Result<Self> {
        let potential_nonpositive = (0..matrix.dim()).all(|r| matrix.row_sum(r) >= T::zero());
        verify_m_matrix(&matrix, potential_nonpositive)?;
        Ok(Self {
            matrix,
            stencil: StencilRecord {
                diffusion: "external",
                drift: "external",
                origin: None,
            },
            m_matrix_verified: true,
            potential_nonpositive,
        })
    }
}

fn check_bounds<T: Scalar>(
    bounds: &EllipticityBounds<T>,
    node: usize,
    diffusion: &[T],
    drift: &[T],
    c: T,
) -> Result<()> {
    for (axis, &a) in diffusion.iter().enumerate() {
        if !(a >= bounds.lower && a <= bounds.upper) {
            return Err(Error::Ellipticity {
                node,
                detail: format!(
                    "a_{axis} = {a} outside [{}, {}]",
                    bounds.lower, bounds.upper
                ),
            });
        }
    }
    for (axis, &b) in drift.iter().enumerate() {
        if !(b.abs() <= bounds.lower_order) {
            return Err(Error::Ellipticity {
                node,
                detail: format!("|b_{axis}| = {} exceeds {}", b.abs(), bounds.lower_order),
            });
        }
    }
    if !(c.abs() <= bounds.lower_order) {
        return Err(Error::Ellipticity {
            node,
            detail: format!("|c| = {} exceeds {}", c.abs(), bounds.lower_order),
        });
    }
    Ok(())
}

/// Assembles `-𝓛` on `domain`: central differences for diffusion, first
/// order upwinding for drift, finite-volume form for the radial Laplacian
/// (symmetric ghost reflection at `r = 0`).
pub fn assemble<T: Scalar>(spec: &OperatorSpec<T>, domain: &DiscreteDomain<T>) -> Result<DiscreteOperator<T>> {
    let n = domain.n_unknowns();
    let mut triplets: Vec<(usize, usize, T)> = Vec::with_capacity(5 * n);
    let mut potential_nonpositive = true;
    let mut origin = None;

    // Pushes the row for unknown `row`: `offdiag` lists (neighbour node, coefficient ≤ 0).
    let mut emit = |row: usize, diag: T, offdiag: &[(usize, T)]| {
        triplets.push((row, row, diag));
        for &(node, coef) in offdiag {
            if let Some(col) = domain.unknown_of(node) {
                triplets.push((row, col, coef));
            }
        }
    };

    match domain.kind() {
        DomainKind::Interval => {
            let h = domain.spacing(0);
            let h2 = h * h;
            for (row, &node) in domain.unknowns().iter().enumerate() {
                let coord = domain.nodes()[node].coord;
                let a = spec.diffusion_at(0, coord)?;
                let b = spec.drift_at(0, coord)?;
                let c = spec.potential.at(coord)?;
                check_bounds(&spec.bounds, node, &[a], &[b], c)?;
                potential_nonpositive &= c <= T::zero();
                let (mut west, mut east) = (-a / h2, -a / h2);
                if b > T::zero() {
                    east -= b / h;
                } else {
                    west += b / h;
                }
                emit(row, -(west + east) - c, &[(node - 1, west), (node + 1, east)]);
            }
        }
        DomainKind::RadialBall { dimension } => {
            let h = domain.spacing(0);
            let nd = dimension as i32;
            let half = lit::<T>(0.5);
            origin = Some("ghost-reflection");
            for (row, &node) in domain.unknowns().iter().enumerate() {
                let coord = domain.nodes()[node].coord;
                let a = spec.diffusion_at(0, coord)?;
                let b = spec.drift_at(0, coord)?;
                let c = spec.potential.at(coord)?;
                check_bounds(&spec.bounds, node, &[a], &[b], c)?;
                potential_nonpositive &= c <= T::zero();
                let k = from_usize::<T>(row);
                let volume = shell_volume(row, h, dimension);
                let outer = (k + half) * h;
                let mut east = -a * outer.powi(nd - 1) / (h * volume);
                if row == 0 {
                    // u'(0) = 0: no inward flux and no drift at the centre.
                    emit(row, -east - c, &[(node + 1, east)]);
                    continue;
                }
                let inner = (k - half) * h;
                let mut west = -a * inner.powi(nd - 1) / (h * volume);
                if b > T::zero() {
                    east -= b / h;
                } else {
                    west += b / h;
                }
                emit(row, -(west + east) - c, &[(node - 1, west), (node + 1, east)]);
            }
        }
        DomainKind::Rectangle { .. } => {
            let res = domain.resolution();
            for (row, &node) in domain.unknowns().iter().enumerate() {
                let coord = domain.nodes()[node].coord;
                let a = [spec.diffusion_at(0, coord)?, spec.diffusion_at(1, coord)?];
                let b = [spec.drift_at(0, coord)?, spec.drift_at(1, coord)?];
                let c = spec.potential.at(coord)?;
                check_bounds(&spec.bounds, node, &a, &b, c)?;
                potential_nonpositive &= c <= T::zero();
                let mut off = Vec::with_capacity(4);
                let mut diag = -c;
                for axis in 0..2 {
                    let h = domain.spacing(axis);
                    let stride = if axis == 0 { 1 } else { res };
                    let (mut minus, mut plus) = (-a[axis] / (h * h), -a[axis] / (h * h));
                    if b[axis] > T::zero() {
                        plus -= b[axis] / h;
                    } else {
                        minus += b[axis] / h;
                    }
                    diag = diag - minus - plus;
                    off.push((node - stride, minus));
                    off.push((node + stride, plus));
                }
                emit(row, diag, &off);
            }
        }
    }

    let matrix = SparseMatrix::from_triplets(n, &triplets)?;
    verify_m_matrix(&matrix, potential_nonpositive)?;
    let stencil = StencilRecord {
        diffusion: match domain.kind() {
            DomainKind::RadialBall { .. } => "finite-volume-2",
            _ => "central-2",
        },
        drift: "upwind-1",
        origin,
    };
    Ok(DiscreteOperator {
        matrix,
        stencil,
        m_matrix_verified: true,
        potential_nonpositive,
    })
}

/// Scans for the M-matrix sign pattern: positive diagonal, nonpositive
/// off-diagonal entries and, when `c ≤ 0`, nonnegative row sums.
pub fn verify_m_matrix<T: Scalar>(matrix: &SparseMatrix<T>, check_row_sums: bool) -> Result<()> {
    let roundoff = lit::<T>(1e-12);
    for row in 0..matrix.dim() {
        let mut diag = T::zero();
        let mut sum = T::zero();
        for (col, v) in matrix.row(row) {
            sum += v;
            if col == row {
                diag = v;
            } else if v > T::zero() {
                return Err(Error::MMatrix {
                    row,
                    detail: format!("positive off-diagonal entry {v} in column {col}"),
                });
            }
        }
        if !(diag > T::zero()) {
            return Err(Error::MMatrix {
                row,
                detail: format!("nonpositive diagonal {diag}"),
            });
        }
        if check_row_sums && sum < -roundoff * diag {
            return Err(Error::MMatrix {
                row,
                detail: format!("negative row sum {}", to_f64(sum)),
            });
        }
    }
    Ok(())
}
