//! Second-order forward-mode jets.
//!
//! A [`Jet2`] carries a value, its gradient and its (symmetric) Hessian with
//! respect to `n` seed variables. Constants have `n = 0` and broadcast against
//! jets of any width, so the same formula can mix seeded coordinates and plain
//! parameters.
//!
//! The [`Scalar`] trait abstracts over `f64` and `Jet2` so that immersion and
//! metric formulas are written once and evaluated either pointwise or with
//! exact first and second derivatives.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Smallest magnitude accepted for a divisor.
const POLE_GUARD: f64 = 1e-300;
/// `tan` is refused where `|cos x|` falls below this.
const TAN_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("{func} is undefined at {value}")]
    Domain { func: &'static str, value: f64 },
    #[error("division by a jet with zero value")]
    DivisionByZero,
}

#[derive(Clone, PartialEq)]
pub struct Jet2 {
    value: f64,
    grad: Vec<f64>,
    /// Upper triangle, row-major: (0,0), (0,1), .., (0,n-1), (1,1), ..
    hess: Vec<f64>,
}

#[inline]
fn tri_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * n - i + 1) / 2 + (j - i)
}

/// Number of packed Hessian entries for `n` variables.
#[inline]
pub fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

impl Jet2 {
    pub fn constant(value: f64) -> Self {
        Jet2 { value, grad: Vec::new(), hess: Vec::new() }
    }

    /// The `index`-th coordinate function among `n`, evaluated at `value`.
    pub fn variable(value: f64, index: usize, n: usize) -> Self {
        assert!(index < n, "seed index {index} out of range for {n} variables");
        let mut grad = vec![0.0; n];
        grad[index] = 1.0;
        Jet2 { value, grad, hess: vec![0.0; packed_len(n)] }
    }

    /// Seeds every coordinate of `point` as an independent variable.
    pub fn seeds(point: &[f64]) -> Vec<Jet2> {
        let n = point.len();
        point.iter().enumerate().map(|(i, &x)| Jet2::variable(x, i, n)).collect()
    }

    /// Builds a jet from explicit derivative data. `hess` is the full
    /// symmetric matrix in row-major order.
    pub fn from_parts(value: f64, grad: Vec<f64>, hess_full: &[f64]) -> Self {
        let n = grad.len();
        assert_eq!(hess_full.len(), n * n, "Hessian must be n x n");
        let mut hess = vec![0.0; packed_len(n)];
        for i in 0..n {
            for j in i..n {
                hess[tri_index(n, i, j)] = hess_full[i * n + j];
            }
        }
        Jet2 { value, grad, hess }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Number of seed variables; zero for constants.
    pub fn width(&self) -> usize {
        self.grad.len()
    }

    pub fn is_constant(&self) -> bool {
        self.grad.is_empty()
    }

    /// Partial derivative along variable `i`. Constants report zero.
    pub fn d(&self, i: usize) -> f64 {
        self.grad.get(i).copied().unwrap_or(0.0)
    }

    /// Second partial along variables `i`, `j`. Constants report zero.
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        let n = self.width();
        if i >= n || j >= n {
            return 0.0;
        }
        self.hess[tri_index(n, i, j)]
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    /// Gradient padded with zeros to `n` entries.
    pub fn grad_padded(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.d(i)).collect()
    }

    /// Full symmetric Hessian, row-major, padded to `n` variables.
    pub fn hessian_padded(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.d2(i, j);
            }
        }
        out
    }

    fn widths(a: &Jet2, b: &Jet2) -> usize {
        match (a.width(), b.width()) {
            (0, m) => m,
            (n, 0) => n,
            (n, m) if n == m => n,
            (n, m) => panic!("jets of incompatible widths {n} and {m}"),
        }
    }

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.value`.
    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Jet2 {
        let n = self.width();
        let grad: Vec<f64> = self.grad.iter().map(|g| f1 * g).collect();
        let mut hess = vec![0.0; packed_len(n)];
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                hess[k] = f1 * self.hess[k] + f2 * self.grad[i] * self.grad[j];
                k += 1;
            }
        }
        Jet2 { value: f0, grad, hess }
    }

    pub fn sin(&self) -> Jet2 {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Jet2 {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn sinh(&self) -> Jet2 {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.chain(s, c, s)
    }

    pub fn cosh(&self) -> Jet2 {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.chain(c, s, c)
    }

    pub fn exp(&self) -> Jet2 {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn tan(&self) -> Result<Jet2, JetError> {
        if self.value.cos().abs() < TAN_GUARD || !self.value.is_finite() {
            return Err(JetError::Domain { func: "tan", value: self.value });
        }
        let t = self.value.tan();
        let sec2 = 1.0 + t * t;
        Ok(self.chain(t, sec2, 2.0 * t * sec2))
    }

    pub fn coth(&self) -> Result<Jet2, JetError> {
        if self.value.abs() < POLE_GUARD || !self.value.is_finite() {
            return Err(JetError::Domain { func: "coth", value: self.value });
        }
        let c = 1.0 / self.value.tanh();
        let d1 = 1.0 - c * c;
        Ok(self.chain(c, d1, -2.0 * c * d1))
    }

    pub fn sqrt(&self) -> Result<Jet2, JetError> {
        if !(self.value > 0.0) || !self.value.is_finite() {
            return Err(JetError::Domain { func: "sqrt", value: self.value });
        }
        let r = self.value.sqrt();
        let d1 = 0.5 / r;
        Ok(self.chain(r, d1, -0.5 * d1 / self.value))
    }

    pub fn ln(&self) -> Result<Jet2, JetError> {
        if !(self.value > 0.0) || !self.value.is_finite() {
            return Err(JetError::Domain { func: "ln", value: self.value });
        }
        let inv = 1.0 / self.value;
        Ok(self.chain(self.value.ln(), inv, -inv * inv))
    }

    pub fn recip(&self) -> Result<Jet2, JetError> {
        if self.value.abs() < POLE_GUARD {
            return Err(JetError::DivisionByZero);
        }
        let inv = 1.0 / self.value;
        Ok(self.chain(inv, -inv * inv, 2.0 * inv * inv * inv))
    }

    pub fn checked_div(&self, rhs: &Jet2) -> Result<Jet2, JetError> {
        Ok(self * &rhs.recip()?)
    }

    pub fn powi(&self, k: i32) -> Jet2 {
        let x = self.value;
        let f0 = x.powi(k);
        let f1 = if k == 0 { 0.0 } else { k as f64 * x.powi(k - 1) };
        let f2 = if k == 0 || k == 1 { 0.0 } else { (k * (k - 1)) as f64 * x.powi(k - 2) };
        self.chain(f0, f1, f2)
    }

    pub fn scale(&self, c: f64) -> Jet2 {
        Jet2 {
            value: self.value * c,
            grad: self.grad.iter().map(|g| g * c).collect(),
            hess: self.hess.iter().map(|h| h * c).collect(),
        }
    }
}

impl fmt::Debug for Jet2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet2")
            .field("value", &self.value)
            .field("grad", &self.grad)
            .field("hess", &self.hess)
            .finish()
    }
}

fn zip_with(a: &[f64], b: &[f64], n: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    (0..n)
        .map(|i| f(a.get(i).copied().unwrap_or(0.0), b.get(i).copied().unwrap_or(0.0)))
        .collect()
}

impl<'a> Add<&'a Jet2> for &'a Jet2 {
    type Output = Jet2;
    fn add(self, rhs: &Jet2) -> Jet2 {
        let n = Jet2::widths(self, rhs);
        Jet2 {
            value: self.value + rhs.value,
            grad: zip_with(&self.grad, &rhs.grad, n, |x, y| x + y),
            hess: zip_with(&self.hess, &rhs.hess, packed_len(n), |x, y| x + y),
        }
    }
}

impl<'a> Sub<&'a Jet2> for &'a Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: &Jet2) -> Jet2 {
        let n = Jet2::widths(self, rhs);
        Jet2 {
            value: self.value - rhs.value,
            grad: zip_with(&self.grad, &rhs.grad, n, |x, y| x - y),
            hess: zip_with(&self.hess, &rhs.hess, packed_len(n), |x, y| x - y),
        }
    }
}

impl<'a> Mul<&'a Jet2> for &'a Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: &Jet2) -> Jet2 {
        if self.is_constant() {
            return rhs.scale(self.value);
        }
        if rhs.is_constant() {
            return self.scale(rhs.value);
        }
        let n = Jet2::widths(self, rhs);
        let (a, b) = (self.value, rhs.value);
        let grad = (0..n).map(|i| a * rhs.grad[i] + b * self.grad[i]).collect();
        let mut hess = vec![0.0; packed_len(n)];
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                hess[k] = a * rhs.hess[k]
                    + b * self.hess[k]
                    + self.grad[i] * rhs.grad[j]
                    + self.grad[j] * rhs.grad[i];
                k += 1;
            }
        }
        Jet2 { value: a * b, grad, hess }
    }
}

impl Neg for &Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

macro_rules! owned_ops {
    ($($tr:ident :: $m:ident),*) => {$(
        impl $tr<Jet2> for Jet2 {
            type Output = Jet2;
            fn $m(self, rhs: Jet2) -> Jet2 { (&self).$m(&rhs) }
        }
        impl<'a> $tr<&'a Jet2> for Jet2 {
            type Output = Jet2;
            fn $m(self, rhs: &Jet2) -> Jet2 { (&self).$m(rhs) }
        }
        impl $tr<f64> for Jet2 {
            type Output = Jet2;
            fn $m(self, rhs: f64) -> Jet2 { (&self).$m(&Jet2::constant(rhs)) }
        }
    )*};
}
owned_ops!(Add::add, Sub::sub, Mul::mul);

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

/// Arithmetic shared by `f64` and [`Jet2`].
pub trait Scalar:
    Clone
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn from_f64(c: f64) -> Self;
    fn val(&self) -> f64;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sinh(&self) -> Self;
    fn cosh(&self) -> Self;
    fn try_tan(&self) -> Result<Self, JetError>;
    fn try_coth(&self) -> Result<Self, JetError>;
    fn try_sqrt(&self) -> Result<Self, JetError>;
    fn try_ln(&self) -> Result<Self, JetError>;
    fn try_recip(&self) -> Result<Self, JetError>;

    fn try_div(&self, rhs: &Self) -> Result<Self, JetError> {
        Ok(self.clone() * rhs.try_recip()?)
    }

    fn square(&self) -> Self {
        self.clone() * self.clone()
    }
}

impl Scalar for f64 {
    fn from_f64(c: f64) -> Self {
        c
    }
    fn val(&self) -> f64 {
        *self
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn sinh(&self) -> Self {
        f64::sinh(*self)
    }
    fn cosh(&self) -> Self {
        f64::cosh(*self)
    }
    fn try_tan(&self) -> Result<Self, JetError> {
        Jet2::constant(*self).tan().map(|j| j.value)
    }
    fn try_coth(&self) -> Result<Self, JetError> {
        Jet2::constant(*self).coth().map(|j| j.value)
    }
    fn try_sqrt(&self) -> Result<Self, JetError> {
        Jet2::constant(*self).sqrt().map(|j| j.value)
    }
    fn try_ln(&self) -> Result<Self, JetError> {
        Jet2::constant(*self).ln().map(|j| j.value)
    }
    fn try_recip(&self) -> Result<Self, JetError> {
        Jet2::constant(*self).recip().map(|j| j.value)
    }
}

impl Scalar for Jet2 {
    fn from_f64(c: f64) -> Self {
        Jet2::constant(c)
    }
    fn val(&self) -> f64 {
        self.value
    }
    fn sin(&self) -> Self {
        Jet2::sin(self)
    }
    fn cos(&self) -> Self {
        Jet2::cos(self)
    }
    fn sinh(&self) -> Self {
        Jet2::sinh(self)
    }
    fn cosh(&self) -> Self {
        Jet2::cosh(self)
    }
    fn try_tan(&self) -> Result<Self, JetError> {
        self.tan()
    }
    fn try_coth(&self) -> Result<Self, JetError> {
        self.coth()
    }
    fn try_sqrt(&self) -> Result<Self, JetError> {
        self.sqrt()
    }
    fn try_ln(&self) -> Result<Self, JetError> {
        self.ln()
    }
    fn try_recip(&self) -> Result<Self, JetError> {
        self.recip()
    }
}

/// Sum of an iterator of scalars; zero for an empty iterator.
pub fn sum<S: Scalar>(items: impl IntoIterator<Item = S>) -> S {
    items.into_iter().fold(S::from_f64(0.0), |acc, x| acc + x)
}

/// Product of an iterator of scalars; one for an empty iterator.
pub fn product<S: Scalar>(items: impl IntoIterator<Item = S>) -> S {
    items.into_iter().fold(S::from_f64(1.0), |acc, x| acc * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn tri_index_is_dense() {
        for n in 1..6 {
            let mut k = 0;
            for i in 0..n {
                for j in i..n {
                    assert_eq!(tri_index(n, i, j), k);
                    assert_eq!(tri_index(n, j, i), k);
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn reciprocal_at_two() {
        let s = Jet2::variable(2.0, 0, 1);
        let r = s.recip().unwrap();
        assert_eq!(r.value(), 0.5);
        assert_eq!(r.d(0), -0.25);
        assert_eq!(r.d2(0, 0), 0.25);
    }

    #[test]
    fn sqrt_of_indefinite_square() {
        let z = Jet2::seeds(&[2.0, 1.0]);
        let q = &z[0] * &z[0] - &z[1] * &z[1];
        let f = q.sqrt().unwrap();
        let r3 = 3f64.sqrt();
        assert!(close(f.value(), r3, 1e-15));
        assert!(close(f.d(0), 2.0 / r3, 1e-15));
        assert!(close(f.d(1), -1.0 / r3, 1e-15));
        // d²f/ds² = -t²/f³
        assert!(close(f.d2(0, 0), -1.0 / (3.0 * r3), 1e-14));
        assert!(close(f.d2(0, 1), 2.0 / (3.0 * r3), 1e-14));
    }

    #[test]
    fn constants_broadcast() {
        let x = Jet2::variable(1.5, 1, 3);
        let y = x.clone() * 2.0 + 1.0;
        assert_eq!(y.value(), 4.0);
        assert_eq!(y.grad(), &[0.0, 2.0, 0.0]);
        let c = Jet2::constant(3.0) * Jet2::constant(2.0);
        assert!(c.is_constant());
        assert_eq!(c.d(5), 0.0);
    }

    #[test]
    fn domain_errors() {
        assert!(Jet2::constant(-1.0).sqrt().is_err());
        assert!(Jet2::constant(0.0).ln().is_err());
        assert!(Jet2::constant(0.0).recip().is_err());
        assert!(Jet2::constant(0.0).coth().is_err());
        assert!(Jet2::constant(std::f64::consts::FRAC_PI_2).tan().is_err());
        assert!(matches!(
            Jet2::constant(0.0).checked_div(&Jet2::constant(0.0)),
            Err(JetError::DivisionByZero)
        ));
    }

    #[test]
    #[should_panic]
    fn width_mismatch_panics() {
        let _ = Jet2::variable(1.0, 0, 2) + Jet2::variable(1.0, 0, 3);
    }
}
