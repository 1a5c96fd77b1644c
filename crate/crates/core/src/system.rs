use crate::error::{Error, Result};
use crate::linalg::{LinearSolver, SolverOptions};
use crate::mesh::{assemble, DiscreteDomain, DiscreteOperator, OperatorSpec};
use crate::scalar::Scalar;

/// The operators `L_1, …, L_m` of a system on one domain, each with a
/// prepared solver.
#[derive(Debug, Clone)]
pub struct System<T> {
    domain: DiscreteDomain<T>,
    operators: Vec<DiscreteOperator<T>>,
    solvers: Vec<LinearSolver<T>>,
}

impl<T: Scalar> System<T> {
    pub fn new(domain: DiscreteDomain<T>, operators: Vec<DiscreteOperator<T>>, options: SolverOptions<T>) -> Result<Self> {
        if operators.is_empty() {
            return Err(Error::Parameter("a system needs at least one operator".into()));
        }
        let n = domain.n_unknowns();
        if let Some(bad) = operators.iter().find(|op| op.dim() != n) {
            return Err(Error::Dimension {
                expected: n,
                got: bad.dim(),
            });
        }
        let solvers = operators
            .iter()
            .map(|op| LinearSolver::new(op.matrix(), options))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            domain,
            operators,
            solvers,
        })
    }

    /// Assembles one operator per spec.
    pub fn assemble(domain: DiscreteDomain<T>, specs: &[OperatorSpec<T>], options: SolverOptions<T>) -> Result<Self> {
        let operators = specs
            .iter()
            .map(|s| assemble(s, &domain))
            .collect::<Result<Vec<_>>>()?;
        Self::new(domain, operators, options)
    }

    /// `m` copies of `-Δ`.
    pub fn laplacian(domain: DiscreteDomain<T>, m: usize) -> Result<Self> {
        let specs = vec![OperatorSpec::laplacian(); m];
        Self::assemble(domain, &specs, SolverOptions::default())
    }

    pub fn domain(&self) -> &DiscreteDomain<T> {
        &self.domain
    }

    pub fn operators(&self) -> &[DiscreteOperator<T>] {
        &self.operators
    }

    pub fn operator(&self, i: usize) -> &DiscreteOperator<T> {
        &self.operators[i]
    }

    pub fn solver(&self, i: usize) -> &LinearSolver<T> {
        &self.solvers[i]
    }

    pub fn m(&self) -> usize {
        self.operators.len()
    }

    /// Unknowns per component.
    pub fn n(&self) -> usize {
        self.domain.n_unknowns()
    }
}
