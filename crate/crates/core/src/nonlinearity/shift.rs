use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The cyclic power map
/// `S_γ(a) = (|a_2|^{γ_1−1} a_2, …, |a_m|^{γ_{m−1}−1} a_m, |a_1|^{γ_m−1} a_1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftEval<T> {
    gamma: Vec<T>,
}

/// `|a|^{γ−1} a`, taken as 0 at `a = 0`.
#[inline]
pub fn signed_power<T: Scalar>(a: T, gamma: T) -> T {
    if a == T::zero() {
        T::zero()
    } else {
        a.abs().powf(gamma - T::one()) * a
    }
}

impl<T: Scalar> ShiftEval<T> {
    pub fn new(gamma: Vec<T>) -> Result<Self> {
        if gamma.is_empty() || gamma.iter().any(|g| !(*g > T::zero()) || !g.is_finite()) {
            return Err(Error::Parameter("shift exponents must be positive".into()));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> &[T] {
        &self.gamma
    }

    pub fn m(&self) -> usize {
        self.gamma.len()
    }

    pub fn apply_into(&self, a: &[T], out: &mut [T]) {
        let m = self.gamma.len();
        for i in 0..m {
            out[i] = signed_power(a[(i + 1) % m], self.gamma[i]);
        }
    }

    pub fn apply(&self, a: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.gamma.len()];
        self.apply_into(a, &mut out);
        out
    }

    /// `α̂_i = Π_{k=i}^m α_k`, the scaling under which
    /// `S_α(s^{α̂} v) = s^{α̂} S_α(v)` when `Π α = 1`.
    pub fn hat(&self) -> Vec<T> {
        let mut out = vec![T::one(); self.gamma.len()];
        let mut acc = T::one();
        for i in (0..self.gamma.len()).rev() {
            acc *= self.gamma[i];
            out[i] = acc;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cyclic_order() {
        let s = ShiftEval::new(vec![2.0, 0.5]).unwrap();
        assert_eq!(s.apply(&[3.0, -2.0]), vec![-4.0, 3.0f64.sqrt()]);
        assert_eq!(s.apply(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(s.hat(), vec![1.0, 0.5]);
    }

    #[test]
    fn homogeneous_under_hat_scaling() {
        let s = ShiftEval::new(vec![2.0, 0.25, 2.0]).unwrap();
        let hat = s.hat();
        let v = [0.7, 1.9, 0.2];
        for scale in [0.1f64, 1.0, 3.7, 10.0] {
            let scaled: Vec<f64> = v.iter().zip(&hat).map(|(x, h)| scale.powf(*h) * x).collect();
            let lhs = s.apply(&scaled);
            let rhs = s.apply(&v);
            for i in 0..3 {
                assert_relative_eq!(lhs[i], scale.powf(hat[i]) * rhs[i], max_relative = 1e-12);
            }
        }
    }
}
