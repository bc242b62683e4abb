//! Para-complex numbers `x + j y` with `j² = 1`, vectors over them, and the
//! real identification with the neutral space `E^{2m}_m`.
//!
//! The algebra has zero divisors on the null cone `x = ±y`, so no general
//! division is offered.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParaError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("real vector of odd length {0} cannot be split into x and y halves")]
    OddLength(usize),
}

#[derive(Clone, Copy, PartialEq, Default)]
pub struct ParaComplex {
    pub re: f64,
    pub jm: f64,
}

pub const J: ParaComplex = ParaComplex { re: 0.0, jm: 1.0 };
pub const ONE: ParaComplex = ParaComplex { re: 1.0, jm: 0.0 };

impl ParaComplex {
    pub const fn new(re: f64, jm: f64) -> Self {
        ParaComplex { re, jm }
    }

    pub const fn real(re: f64) -> Self {
        ParaComplex { re, jm: 0.0 }
    }

    pub fn conj(self) -> Self {
        ParaComplex { re: self.re, jm: -self.jm }
    }

    /// `z z̄ = x² - y²`, which is multiplicative and vanishes on the null cone.
    pub fn norm_form(self) -> f64 {
        self.re * self.re - self.jm * self.jm
    }

    pub fn is_zero_divisor(self, tol: f64) -> bool {
        self.norm_form().abs() <= tol
    }

    pub fn scale(self, c: f64) -> Self {
        ParaComplex { re: self.re * c, jm: self.jm * c }
    }
}

impl fmt::Debug for ParaComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:+}j", self.re, self.jm)
    }
}

impl Add for ParaComplex {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        ParaComplex::new(self.re + o.re, self.jm + o.jm)
    }
}

impl Sub for ParaComplex {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        ParaComplex::new(self.re - o.re, self.jm - o.jm)
    }
}

impl Mul for ParaComplex {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        ParaComplex::new(self.re * o.re + self.jm * o.jm, self.re * o.jm + self.jm * o.re)
    }
}

impl Mul<f64> for ParaComplex {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        self.scale(c)
    }
}

impl Neg for ParaComplex {
    type Output = Self;
    fn neg(self) -> Self {
        ParaComplex::new(-self.re, -self.jm)
    }
}

/// A vector in `𝔻^m`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParaVector(pub Vec<ParaComplex>);

impl ParaVector {
    pub fn new(entries: Vec<ParaComplex>) -> Self {
        ParaVector(entries)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn conj(&self) -> Self {
        ParaVector(self.0.iter().map(|z| z.conj()).collect())
    }

    pub fn mul_j(&self) -> Self {
        ParaVector(self.0.iter().map(|&z| J * z).collect())
    }

    /// The real vector `(x_1, .., x_m, y_1, .., y_m)`.
    pub fn identify(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.0.iter().map(|z| z.re).collect();
        out.extend(self.0.iter().map(|z| z.jm));
        out
    }

    /// Inverse of [`ParaVector::identify`].
    pub fn from_real(v: &[f64]) -> Result<Self, ParaError> {
        if v.len() % 2 != 0 {
            return Err(ParaError::OddLength(v.len()));
        }
        let m = v.len() / 2;
        Ok(ParaVector((0..m).map(|i| ParaComplex::new(v[i], v[m + i])).collect()))
    }

    /// Para-complex bilinear form `Σ u_k w_k` (no conjugation).
    pub fn bilinear(&self, other: &ParaVector) -> Result<ParaComplex, ParaError> {
        check_len(self.len(), other.len())?;
        Ok(self.0.iter().zip(&other.0).fold(ParaComplex::default(), |acc, (&a, &b)| acc + a * b))
    }
}

fn check_len(left: usize, right: usize) -> Result<(), ParaError> {
    if left != right {
        Err(ParaError::LengthMismatch { left, right })
    } else {
        Ok(())
    }
}

/// Neutral inner product of two real vectors in `E^{2m}_m`: the first half of
/// the coordinates is time-like, the second half space-like.
pub fn pseudo_dot(u: &[f64], v: &[f64]) -> Result<f64, ParaError> {
    check_len(u.len(), v.len())?;
    if u.len() % 2 != 0 {
        return Err(ParaError::OddLength(u.len()));
    }
    let m = u.len() / 2;
    Ok(u.iter()
        .zip(v)
        .enumerate()
        .map(|(k, (a, b))| if k < m { -a * b } else { a * b })
        .sum())
}

/// Neutral inner product of para-complex vectors through their real images.
pub fn para_dot(u: &ParaVector, v: &ParaVector) -> Result<f64, ParaError> {
    check_len(u.len(), v.len())?;
    pseudo_dot(&u.identify(), &v.identify())
}
