//! Dense univariate polynomials with exact derivatives.
//!
//! Coefficients are stored by ascending power, trailing zeros trimmed, so the
//! leading coefficient of a nonzero polynomial is always nonzero. All
//! potentials in this crate (self-action and pair terms) are represented this
//! way; derivatives are exact coefficient operations, never finite
//! differences.

use serde::{Deserialize, Serialize};

/// Dense polynomial `c0 + c1 x + ... + cm x^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Build from ascending-power coefficients; trailing zeros are trimmed.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// `x^k` scaled by `c`.
    pub fn monomial(c: f64, k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading_coefficient(&self) -> f64 {
        *self.coeffs.last().unwrap_or(&0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coeffs.first().copied().unwrap_or(0.0)
    }

    /// Horner evaluation.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Exact derivative polynomial.
    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::zero();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * k as f64)
            .collect();
        Polynomial::new(coeffs)
    }

    /// Evaluate the `order`-th derivative (order 0, 1 or 2) at `x`.
    ///
    /// Derivative coefficients are formed on the fly; hot paths should cache
    /// [`Polynomial::derivative`] results instead.
    pub fn eval_order(&self, x: f64, order: u8) -> f64 {
        match order {
            0 => self.eval(x),
            1 => self.derivative().eval(x),
            2 => self.derivative().derivative().eval(x),
            _ => panic!("derivative order {order} not supported (0, 1, 2)"),
        }
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|&a| a * c).collect())
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = vec![0.0; n];
        for (i, &c) in self.coeffs.iter().enumerate() {
            coeffs[i] += c;
        }
        for (i, &c) in other.coeffs.iter().enumerate() {
            coeffs[i] += c;
        }
        Polynomial::new(coeffs)
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        if self.is_zero() || other.is_zero() {
            return Polynomial::zero();
        }
        let mut coeffs = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Polynomial::new(coeffs)
    }

    pub fn pow(&self, n: u32) -> Polynomial {
        let mut acc = Polynomial::constant(1.0);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// A polynomial is even when all odd-power coefficients vanish.
    pub fn is_even(&self) -> bool {
        self.coeffs.iter().skip(1).step_by(2).all(|&c| c == 0.0)
    }

    pub fn all_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trims_trailing_zeros() {
        let p = Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.coeffs(), &[1.0, 2.0]);
        assert_eq!(p.degree(), Some(1));
        assert!(Polynomial::new(vec![0.0, 0.0]).is_zero());
    }

    #[test]
    fn horner_matches_naive() {
        let p = Polynomial::new(vec![2.0, -1.0, 0.5, 3.0]);
        for &x in &[-2.5, 0.0, 0.3, 4.0] {
            let naive = 2.0 - x + 0.5 * x * x + 3.0 * x * x * x;
            assert!((p.eval(x) - naive).abs() <= 1e-12 * naive.abs().max(1.0));
        }
    }

    #[test]
    fn derivative_coefficients() {
        let p = Polynomial::new(vec![1.0, 0.0, 3.0, 0.0, 3.0, 0.0, 1.0]); // (1+x^2)^3
        let d2 = p.derivative().derivative();
        // F'' = 6(1+x^2)(1+5x^2) = 6 + 36 x^2 + 30 x^4
        assert_eq!(d2.coeffs(), &[6.0, 0.0, 36.0, 0.0, 30.0]);
    }

    #[test]
    fn product_and_power() {
        let base = Polynomial::new(vec![1.0, 0.0, 1.0]); // 1 + x^2
        let cubed = base.pow(3);
        assert_eq!(cubed.coeffs(), &[1.0, 0.0, 3.0, 0.0, 3.0, 0.0, 1.0]);
        assert_eq!(cubed.eval(1.0), 8.0);
    }

    #[test]
    fn evenness() {
        assert!(Polynomial::new(vec![0.0, 0.0, 1.0]).is_even());
        assert!(!Polynomial::new(vec![0.0, 1.0, 1.0]).is_even());
        assert!(Polynomial::zero().is_even());
    }

    proptest! {
        // Central finite differences of eval() must reproduce the exact
        // derivative evaluation to high relative accuracy on a probe grid.
        #[test]
        fn derivative_matches_finite_differences(
            coeffs in proptest::collection::vec(-3.0f64..3.0, 1..7),
            x in -8.0f64..8.0,
        ) {
            let p = Polynomial::new(coeffs);
            let d = p.derivative();
            let h = 1e-5 * (1.0 + x.abs());
            let fd = (p.eval(x + h) - p.eval(x - h)) / (2.0 * h);
            let exact = d.eval(x);
            let scale = exact.abs().max(p.eval(x).abs()).max(1.0);
            prop_assert!((fd - exact).abs() <= 1e-6 * scale);
        }
    }
}
