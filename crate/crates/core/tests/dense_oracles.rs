mod common;

use extremal_core::linalg::{green_column, smallest_eigenpair, LinearSolver, SolverOptions, SparseMatrix};
use extremal_core::mesh::{assemble, Coefficient, OperatorSpec};
use extremal_core::minimal::{minimal_solution, MinimalOptions};
use extremal_core::nonlinearity::Weight;
use extremal_core::spectral::{lambda_star, linearized_matrix, stability_eigen, ComposedOperator};
use extremal_core::system::System;
use extremal_core::{Domain, Map};

fn drift_spec() -> OperatorSpec<f64> {
    OperatorSpec::laplacian()
        .with_drift(vec![Coefficient::parse("3 * x - 1").unwrap(), Coefficient::Constant(2.0)])
        .with_potential(Coefficient::parse("-(1 + y)").unwrap())
}

#[test]
fn principal_eigenvalue_matches_dense_solver() {
    for d in [
        Domain::interval(41).unwrap(),
        Domain::rectangle(1.0, 2.0, 13).unwrap(),
        Domain::radial_ball(3, 41).unwrap(),
    ] {
        let op = assemble(&drift_spec(), &d).unwrap();
        let pair = smallest_eigenpair(op.matrix(), 1e-10).unwrap();
        let dense = common::dense_smallest_eigenvalue(op.matrix());
        assert!((pair.value - dense).abs() < 1e-7 * dense.abs().max(1.0), "{} vs {dense}", pair.value);
        assert!(pair.vector.iter().all(|v| *v > 0.0));
    }
}

#[test]
fn stability_eigenvalue_matches_dense_solver() {
    let sys = System::laplacian(Domain::interval(61).unwrap(), 1).unwrap();
    let g = Map::gelfand();
    let u = minimal_solution(&sys, &[3.0], &g, &MinimalOptions::default()).unwrap().solution.unwrap();
    let res = stability_eigen(&sys, &[3.0], &g, &u, 1e-10).unwrap();
    let (m, _) = linearized_matrix(&sys, &[3.0], &g, &u).unwrap();
    let dense = common::dense_symmetric_smallest(&m);
    assert!((res.eta1 - dense).abs() < 1e-7, "{} vs {dense}", res.eta1);

    let sys2 = System::laplacian(Domain::interval(41).unwrap(), 2).unwrap();
    let pair = Map::exp_shift(vec![1.0, 2.0]).unwrap();
    let lam = [0.8, 0.5];
    let u2 = minimal_solution(&sys2, &lam, &pair, &MinimalOptions::default()).unwrap().solution.unwrap();
    let res2 = stability_eigen(&sys2, &lam, &pair, &u2, 1e-10).unwrap();
    let (m2, _) = linearized_matrix(&sys2, &lam, &pair, &u2).unwrap();
    let dense2 = common::dense_smallest_eigenvalue(&m2);
    assert!((res2.eta1 - dense2).abs() < 1e-7 * dense2.abs().max(1.0), "{} vs {dense2}", res2.eta1);
}

#[test]
fn weighted_linear_eigenvalue_matches_dense_solver() {
    let d = Domain::interval(41).unwrap();
    let rho: Vec<f64> = d.sample(|x| 1.0 + x[0] * x[0]);
    let sys = System::laplacian(d, 1).unwrap();
    let op = ComposedOperator::new(&sys, Weight::Nodal(vec![rho.clone()]), vec![1.0]).unwrap();
    let pair = lambda_star(&op, 1e-12, 10_000).unwrap();
    // ρ⁻¹ L is similar to a symmetric matrix; its spectrum is real.
    let l = sys.operator(0).matrix();
    let mut triplets = Vec::new();
    for (r, w) in rho.iter().enumerate() {
        for (c, v) in l.row(r) {
            triplets.push((r, c, v / w));
        }
    }
    let scaled = SparseMatrix::from_triplets(l.dim(), &triplets).unwrap();
    let dense = common::dense_smallest_eigenvalue(&scaled);
    assert!((pair.lambda_star - dense).abs() < 1e-8 * dense, "{} vs {dense}", pair.lambda_star);
}

#[test]
fn laplacian_green_function_is_symmetric_under_volume_weighting() {
    let d = Domain::radial_ball(4, 25).unwrap();
    let op = assemble(&OperatorSpec::laplacian(), &d).unwrap();
    let solver = LinearSolver::new(op.matrix(), SolverOptions::default()).unwrap();
    let vol = d.cell_volumes();
    let inverse = common::dense(op.matrix()).try_inverse().unwrap();
    for j in [0usize, 5, 17] {
        let g = green_column(&solver, j, vol[j]).unwrap();
        for k in 0..g.len() {
            assert!((g[k] - inverse[(k, j)] / vol[j]).abs() < 1e-10 * g[k].abs().max(1.0));
        }
        let back = green_column(&solver, 3, vol[3]).unwrap();
        assert!((g[3] - back[j]).abs() < 1e-9 * g[3]);
    }
}
