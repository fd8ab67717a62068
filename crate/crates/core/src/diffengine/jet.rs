//! Truncated univariate Taylor jets.
//!
//! A [`Jet`] of order `K` carries `coeffs[k] = f⁽ᵏ⁾(s) / k!` for a quantity
//! `f` along one seed direction `s`. Arithmetic on jets is truncated Taylor
//! arithmetic, so pushing a lifted input through a computation yields all
//! directional derivatives up to order `K` at once.
//!
//! The coefficient type is generic over [`JetScalar`], which lets the same
//! code run on plain `f64` and on tape variables ([`super::Var`]) when
//! parameter gradients of jet coefficients are needed.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Highest supported derivative order.
pub const MAX_ORDER: usize = 3;

const FACTORIAL: [f64; MAX_ORDER + 1] = [1.0, 1.0, 2.0, 6.0];

/// Scalar types usable as jet coefficients.
pub trait JetScalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn value(&self) -> f64;
    /// Multiply by a constant.
    fn scale(self, c: f64) -> Self;
    /// Add a constant.
    fn shift(self, c: f64) -> Self;
    fn tanh(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
}

impl JetScalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn scale(self, c: f64) -> Self {
        self * c
    }
    #[inline]
    fn shift(self, c: f64) -> Self {
        self + c
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
}

#[derive(Clone, Copy, PartialEq)]
pub struct Jet<T = f64> {
    coeffs: [T; MAX_ORDER + 1],
    order: usize,
}

impl<T: fmt::Debug> fmt::Debug for Jet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.coeffs[..=self.order]).finish()
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::config(format!(
            "jet order {order} outside 0..={MAX_ORDER}"
        )));
    }
    Ok(())
}

impl Jet<f64> {
    /// Lift an input variable: `value + seed·s`.
    pub fn lift(value: f64, seed: f64, order: usize) -> Result<Self> {
        check_order(order)?;
        if !value.is_finite() || !seed.is_finite() {
            return Err(Error::NonFinite(format!(
                "jet lift of value {value} with seed {seed}"
            )));
        }
        let mut coeffs = [0.0; MAX_ORDER + 1];
        coeffs[0] = value;
        if order >= 1 {
            coeffs[1] = seed;
        }
        Ok(Jet { coeffs, order })
    }

    /// Promote plain coefficients into any scalar type (as constants).
    pub fn cast<T: JetScalar>(&self) -> Jet<T> {
        let mut coeffs = [T::from_f64(0.0); MAX_ORDER + 1];
        for k in 0..=self.order {
            coeffs[k] = T::from_f64(self.coeffs[k]);
        }
        Jet {
            coeffs,
            order: self.order,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs().iter().all(|c| c.is_finite())
    }
}

impl<T: JetScalar> Jet<T> {
    /// A passive constant of the given order.
    pub fn constant(value: T, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} > {MAX_ORDER}");
        let mut coeffs = [T::from_f64(0.0); MAX_ORDER + 1];
        coeffs[0] = value;
        Jet { coeffs, order }
    }

    pub fn from_coeffs(coeffs: &[T]) -> Self {
        assert!(
            !coeffs.is_empty() && coeffs.len() <= MAX_ORDER + 1,
            "jet needs 1..={} coefficients, got {}",
            MAX_ORDER + 1,
            coeffs.len()
        );
        let mut c = [T::from_f64(0.0); MAX_ORDER + 1];
        c[..coeffs.len()].copy_from_slice(coeffs);
        Jet {
            coeffs: c,
            order: coeffs.len() - 1,
        }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn coeffs(&self) -> &[T] {
        &self.coeffs[..=self.order]
    }

    #[inline]
    pub fn coeff(&self, k: usize) -> T {
        assert!(k <= self.order, "coefficient {k} of an order-{} jet", self.order);
        self.coeffs[k]
    }

    #[inline]
    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    /// The `k`-th derivative along the seed direction, `coeffs[k]·k!`.
    #[inline]
    pub fn derivative(&self, k: usize) -> T {
        self.coeff(k).scale(FACTORIAL[k])
    }

    fn same_order(&self, other: &Self) {
        assert_eq!(
            self.order, other.order,
            "jet order mismatch ({} vs {})",
            self.order, other.order
        );
    }

    fn zip(self, other: Self, f: impl Fn(T, T) -> T) -> Self {
        self.same_order(&other);
        let mut out = self;
        for k in 0..=self.order {
            out.coeffs[k] = f(self.coeffs[k], other.coeffs[k]);
        }
        out
    }

    fn map(self, f: impl Fn(T) -> T) -> Self {
        let mut out = self;
        for k in 0..=self.order {
            out.coeffs[k] = f(self.coeffs[k]);
        }
        out
    }

    pub fn scale(self, c: f64) -> Self {
        self.map(|a| a.scale(c))
    }

    /// Division by a nonzero constant.
    pub fn div_const(self, c: f64) -> Self {
        assert!(c != 0.0, "jet division by zero");
        self.scale(1.0 / c)
    }

    /// Add a constant to the value coefficient.
    pub fn shift(mut self, c: f64) -> Self {
        self.coeffs[0] = self.coeffs[0].shift(c);
        self
    }

    /// Truncated Cauchy product.
    fn convolve(&self, other: &Self) -> Self {
        self.same_order(other);
        let mut out = *self;
        for k in 0..=self.order {
            let mut acc = self.coeffs[0] * other.coeffs[k];
            for j in 1..=k {
                acc = acc + self.coeffs[j] * other.coeffs[k - j];
            }
            out.coeffs[k] = acc;
        }
        out
    }

    pub fn powi(self, n: u32) -> Self {
        let mut acc = Jet::constant(T::from_f64(1.0), self.order);
        for _ in 0..n {
            acc = acc.convolve(&self);
        }
        acc
    }

    /// `tanh` through the recurrence driven by `y' = (1 − y²)·a'`.
    pub fn tanh(self) -> Self {
        let k_max = self.order;
        let a = &self.coeffs;
        let mut y = self.coeffs;
        let mut w = self.coeffs;
        y[0] = a[0].tanh();
        w[0] = (y[0] * y[0]).scale(-1.0).shift(1.0);
        for k in 1..=k_max {
            let mut acc = a[1] * w[k - 1];
            for j in 2..=k {
                acc = acc + (a[j] * w[k - j]).scale(j as f64);
            }
            y[k] = acc.scale(1.0 / k as f64);
            let mut sq = y[0] * y[k];
            for i in 1..=k {
                sq = sq + y[i] * y[k - i];
            }
            w[k] = -sq;
        }
        Jet {
            coeffs: y,
            order: k_max,
        }
    }

    /// Joint `(sin a, cos a)` recurrence.
    pub fn sin_cos(self) -> (Self, Self) {
        let a = &self.coeffs;
        let mut s = self.coeffs;
        let mut c = self.coeffs;
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for k in 1..=self.order {
            let mut ds = a[1] * c[k - 1];
            let mut dc = a[1] * s[k - 1];
            for j in 2..=k {
                ds = ds + (a[j] * c[k - j]).scale(j as f64);
                dc = dc + (a[j] * s[k - j]).scale(j as f64);
            }
            s[k] = ds.scale(1.0 / k as f64);
            c[k] = dc.scale(-1.0 / k as f64);
        }
        (
            Jet {
                coeffs: s,
                order: self.order,
            },
            Jet {
                coeffs: c,
                order: self.order,
            },
        )
    }

    pub fn sin(self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(self) -> Self {
        self.sin_cos().1
    }

    /// Drop the jet to a lower order.
    pub fn truncate(mut self, order: usize) -> Self {
        assert!(order <= self.order);
        for k in order + 1..=self.order {
            self.coeffs[k] = T::from_f64(0.0);
        }
        self.order = order;
        self
    }
}

impl<T: JetScalar> Add for Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: Self) -> Self {
        self.zip(rhs, |a, b| a + b)
    }
}

impl<T: JetScalar> Sub for Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: Self) -> Self {
        self.zip(rhs, |a, b| a - b)
    }
}

impl<T: JetScalar> Mul for Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: Self) -> Self {
        self.convolve(&rhs)
    }
}

impl<T: JetScalar> Neg for Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Self {
        self.map(|a| -a)
    }
}

/// Which arithmetic operation [`jet_arithmetic`] applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetOp {
    Add,
    Sub,
    Mul,
}

/// Checked binary jet arithmetic; mismatched orders are reported rather
/// than panicking.
pub fn jet_arithmetic<T: JetScalar>(a: Jet<T>, b: Jet<T>, op: JetOp) -> Result<Jet<T>> {
    if a.order() != b.order() {
        return Err(Error::contract(format!(
            "jet order mismatch ({} vs {})",
            a.order(),
            b.order()
        )));
    }
    Ok(match op {
        JetOp::Add => a + b,
        JetOp::Sub => a - b,
        JetOp::Mul => a * b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lift_examples() {
        assert_eq!(Jet::lift(2.0, 1.0, 2).unwrap().coeffs(), &[2.0, 1.0, 0.0]);
        assert_eq!(Jet::lift(0.0, 0.0, 3).unwrap().coeffs(), &[0.0; 4]);
        assert_eq!(Jet::lift(5.0, 2.0, 1).unwrap().coeffs(), &[5.0, 2.0]);
        assert!(matches!(Jet::lift(1.0, 1.0, 4), Err(Error::Config(_))));
    }

    #[test]
    fn arithmetic_examples() {
        let a = Jet::from_coeffs(&[1.0, 1.0, 0.0]);
        let b = Jet::from_coeffs(&[2.0, 3.0, 0.0]);
        assert_eq!((a * b).coeffs(), &[2.0, 5.0, 3.0]);

        let zero = Jet::constant(0.0, 2);
        assert_eq!((a + zero).coeffs(), a.coeffs());

        // (1 + 2s + s²)(1 − s) = 1 + s − s² − s³, truncated at s².
        let p = Jet::from_coeffs(&[1.0, 2.0, 1.0]);
        let q = Jet::from_coeffs(&[1.0, -1.0, 0.0]);
        assert_eq!((p * q).coeffs(), &[1.0, 1.0, -1.0]);
    }

    #[test]
    fn order_mismatch_is_a_contract_error() {
        let a = Jet::from_coeffs(&[1.0, 1.0]);
        let b = Jet::from_coeffs(&[1.0, 1.0, 1.0]);
        assert!(matches!(
            jet_arithmetic(a, b, JetOp::Mul),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    #[should_panic(expected = "order mismatch")]
    fn operator_order_mismatch_panics() {
        let _ = Jet::from_coeffs(&[1.0]) + Jet::from_coeffs(&[1.0, 2.0]);
    }

    #[test]
    fn tanh_examples() {
        let t = Jet::lift(0.0, 1.0, 3).unwrap().tanh();
        assert_abs_diff_eq!(t.coeff(0), 0.0);
        assert_abs_diff_eq!(t.coeff(1), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.coeff(2), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.coeff(3), -1.0 / 3.0, epsilon = 1e-15);

        let c = Jet::lift(0.7, 0.0, 2).unwrap().tanh();
        assert_eq!(c.coeffs(), &[0.7f64.tanh(), 0.0, 0.0]);

        // Central differences of tanh at 0.5 with step 1e-5.
        let h = 1e-5;
        let f = |x: f64| x.tanh();
        let d1 = (f(0.5 + h) - f(0.5 - h)) / (2.0 * h);
        let d2 = (f(0.5 + h) - 2.0 * f(0.5) + f(0.5 - h)) / (h * h);
        let j = Jet::lift(0.5, 1.0, 2).unwrap().tanh();
        let y = 0.5f64.tanh();
        assert_abs_diff_eq!(j.coeff(1), 1.0 - y * y, epsilon = 1e-15);
        assert_abs_diff_eq!(j.coeff(2), -y * (1.0 - y * y), epsilon = 1e-15);
        assert_abs_diff_eq!(j.derivative(1), d1, epsilon = 1e-9);
        assert_abs_diff_eq!(j.derivative(2), d2, epsilon = 1e-5);
    }

    #[test]
    fn sin_cos_maclaurin() {
        let (s, c) = Jet::lift(0.0, 1.0, 3).unwrap().sin_cos();
        assert_eq!(s.coeffs(), &[0.0, 1.0, 0.0, -1.0 / 6.0]);
        assert_eq!(c.coeffs(), &[1.0, 0.0, -0.5, 0.0]);
    }

    #[test]
    fn powi_matches_repeated_product() {
        let a = Jet::from_coeffs(&[0.3, -1.2, 0.4, 2.0]);
        let cube = a.powi(3);
        let prod = a * a * a;
        for k in 0..4 {
            assert_abs_diff_eq!(cube.coeff(k), prod.coeff(k), epsilon = 1e-15);
        }
        assert_eq!(a.powi(0).coeffs(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn derivative_scales_by_factorial() {
        let a = Jet::from_coeffs(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(a.derivative(2), 6.0);
        assert_eq!(a.derivative(3), 24.0);
    }
}
