use crate::error::{Error, Result};
use crate::scalar::{sup_dist, sup_norm, Scalar};

/// An `m`-component grid function on the interior unknowns of a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFieldVec<T> {
    components: Vec<Vec<T>>,
}

impl<T: Scalar> GridFieldVec<T> {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            components: vec![vec![T::zero(); n]; m],
        }
    }

    pub fn filled(m: usize, n: usize, value: T) -> Self {
        Self {
            components: vec![vec![value; n]; m],
        }
    }

    pub fn from_components(components: Vec<Vec<T>>) -> Result<Self> {
        let n = components.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = components.iter().find(|c| c.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                got: bad.len(),
            });
        }
        Ok(Self { components })
    }

    /// Rebuilds a field from node-major interleaved storage
    /// `[u_1(x_0), …, u_m(x_0), u_1(x_1), …]`.
    pub fn from_interleaved(m: usize, data: &[T]) -> Result<Self> {
        if m == 0 || !data.len().is_multiple_of(m) {
            return Err(Error::Dimension {
                expected: m.max(1) * (data.len() / m.max(1)),
                got: data.len(),
            });
        }
        let n = data.len() / m;
        let components = (0..m)
            .map(|i| (0..n).map(|k| data[k * m + i]).collect())
            .collect();
        Ok(Self { components })
    }

    pub fn interleaved(&self) -> Vec<T> {
        let (m, n) = (self.m(), self.len());
        let mut out = Vec::with_capacity(m * n);
        for k in 0..n {
            for c in &self.components {
                out.push(c[k]);
            }
        }
        out
    }

    /// Number of components.
    pub fn m(&self) -> usize {
        self.components.len()
    }

    /// Number of grid unknowns per component.
    pub fn len(&self) -> usize {
        self.components.first().map(Vec::len).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn component(&self, i: usize) -> &[T] {
        &self.components[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut Vec<T> {
        &mut self.components[i]
    }

    pub fn components(&self) -> &[Vec<T>] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Vec<T>> {
        self.components
    }

    /// `t = (u_1(x_k), …, u_m(x_k))`.
    pub fn at_node(&self, k: usize, out: &mut [T]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c[k];
        }
    }

    pub fn sup_norm(&self) -> T {
        self.components
            .iter()
            .fold(T::zero(), |acc, c| acc.max(sup_norm(c)))
    }

    pub fn component_sup_norms(&self) -> Vec<T> {
        self.components.iter().map(|c| sup_norm(c)).collect()
    }

    pub fn sup_dist(&self, other: &Self) -> T {
        self.components
            .iter()
            .zip(&other.components)
            .fold(T::zero(), |acc, (a, b)| acc.max(sup_dist(a, b)))
    }

    pub fn min(&self) -> T {
        self.components
            .iter()
            .flatten()
            .fold(T::infinity(), |acc, v| acc.min(*v))
    }

    /// `self ≤ other + tol` at every node of every component.
    pub fn le(&self, other: &Self, tol: T) -> bool {
        self.components
            .iter()
            .zip(&other.components)
            .all(|(a, b)| a.iter().zip(b).all(|(x, y)| *x <= *y + tol))
    }

    /// `self < other` strictly at every node of every component.
    pub fn lt(&self, other: &Self) -> bool {
        self.components
            .iter()
            .zip(&other.components)
            .all(|(a, b)| a.iter().zip(b).all(|(x, y)| *x < *y))
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| c.iter().map(|v| *v * s).collect())
                .collect(),
        }
    }

    /// Pointwise maximum.
    pub fn max_with(&self, other: &Self) -> Self {
        Self {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x.max(*y)).collect())
                .collect(),
        }
    }
}
