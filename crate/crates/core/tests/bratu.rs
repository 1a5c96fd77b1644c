mod common;

use extremal_core::extremal::{lambda_star_bisect, ExtremalOptions};
use extremal_core::minimal::{minimal_solution, MinimalOptions};
use extremal_core::{Domain, Map};
use extremal_core::system::System;

fn centre(res: usize, lambda: f64) -> f64 {
    let d = Domain::interval(res).unwrap();
    let sys = System::laplacian(d, 1).unwrap();
    let out = minimal_solution(&sys, &[lambda], &Map::gelfand(), &MinimalOptions::default()).unwrap();
    out.solution.unwrap().component(0)[(res - 1) / 2 - 1]
}

#[test]
fn shooting_oracle_matches_closed_form() {
    let shooting = common::bratu_lambda_star();
    let mut best = 0.0f64;
    let mut theta = 4.0;
    while theta < 5.5 {
        best = best.max(common::bratu_closed_form(theta).0);
        theta += 1e-5;
    }
    assert!((shooting - best).abs() < 1e-9, "{shooting} vs {best}");
    assert!((shooting - 3.513830719).abs() < 1e-8);
    let a = common::bratu_minimal_centre(1.0);
    assert!((a - 0.14053921440047).abs() < 1e-10, "{a}");
}

#[test]
fn minimal_centre_converges_at_second_order() {
    let exact = common::bratu_minimal_centre(1.0);
    let coarse = centre(65, 1.0);
    let fine = centre(129, 1.0);
    let e1 = (coarse - exact).abs();
    let e2 = (fine - exact).abs();
    assert!(e2 < 1e-4);
    let order = (e1 / e2).log2();
    assert!((order - 2.0).abs() < 0.1, "observed order {order}");
    assert!((common::richardson(coarse, fine) - exact).abs() < 1e-7);
}

#[test]
fn bisected_threshold_approaches_oracle() {
    let exact = common::bratu_lambda_star();
    let mut errors = Vec::new();
    for res in [33, 65] {
        let sys = System::laplacian(Domain::interval(res).unwrap(), 1).unwrap();
        let opts = ExtremalOptions {
            tol_lambda: 1e-8,
            cross_check: false,
            stability: false,
            ..ExtremalOptions::default()
        };
        let s = lambda_star_bisect(&sys, &Map::gelfand(), &[], &opts).unwrap();
        errors.push((s.lambda_star_est - exact).abs());
    }
    assert!(errors[1] < 2e-3);
    assert!(errors[0] / errors[1] > 3.0, "{errors:?}");
}
