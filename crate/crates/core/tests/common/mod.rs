//! Reference values computed independently of the library: shooting for the
//! Bratu problem, dense eigensolvers, Richardson extrapolation.
#![allow(dead_code)]

use extremal_core::linalg::SparseMatrix;
use nalgebra::DMatrix;

/// `u(1)` for `u'' = −λ e^u`, `u(½) = a`, `u'(½) = 0`, by RK4.
pub fn bratu_endpoint(lambda: f64, a: f64) -> f64 {
    let steps = 4000;
    let h = 0.5 / steps as f64;
    let f = |y: [f64; 2]| [y[1], -lambda * y[0].exp()];
    let mut y = [a, 0.0];
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
        y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    }
    y[0]
}

fn bisect(mut lo: f64, mut hi: f64, tol: f64, positive_at_lo: bool, g: impl Fn(f64) -> f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) == positive_at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The `λ` whose solution has centre value `a`.
pub fn bratu_lambda_of_centre(a: f64) -> f64 {
    bisect(0.0, 20.0, 1e-13, true, |l| bratu_endpoint(l, a))
}

/// `λ* = max_a λ(a)` by golden-section search.
pub fn bratu_lambda_star() -> f64 {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.5, 2.5);
    while b - a > 1e-7 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if bratu_lambda_of_centre(c) > bratu_lambda_of_centre(d) {
            b = d;
        } else {
            a = c;
        }
    }
    bratu_lambda_of_centre(0.5 * (a + b))
}

/// Centre value of the minimal solution at `λ < λ*`.
pub fn bratu_minimal_centre(lambda: f64) -> f64 {
    // λ(a) increases on the minimal branch, which ends near a ≈ 1.1868.
    bisect(0.0, 1.18, 1e-12, false, |a| bratu_lambda_of_centre(a) - lambda)
}

/// `λ(θ) = θ² / (2 cosh²(θ/4))` for `u = −2 ln(cosh((x−½)θ/2) / cosh(θ/4))`.
pub fn bratu_closed_form(theta: f64) -> (f64, f64) {
    let c = (theta / 4.0).cosh();
    (theta * theta / (2.0 * c * c), 2.0 * c.ln())
}

pub fn dense(a: &SparseMatrix<f64>) -> DMatrix<f64> {
    let n = a.dim();
    let mut m = DMatrix::zeros(n, n);
    for r in 0..n {
        for (c, v) in a.row(r) {
            m[(r, c)] = v;
        }
    }
    m
}

/// Smallest real part among the eigenvalues of a dense copy.
pub fn dense_smallest_eigenvalue(a: &SparseMatrix<f64>) -> f64 {
    let m = dense(a);
    m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::INFINITY, f64::min)
}

/// Smallest eigenvalue of a symmetric matrix, by the symmetric solver.
pub fn dense_symmetric_smallest(a: &SparseMatrix<f64>) -> f64 {
    dense(a).symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Richardson extrapolation of a second-order quantity from grids `h` and
/// `h/2`.
pub fn richardson(coarse: f64, fine: f64) -> f64 {
    fine + (fine - coarse) / 3.0
}
