use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex scalar used for every state entry.
pub type C64 = Complex64;

/// State of one trajectory: spectral coefficients of an SPDE, or a small
/// vector for SDE test problems (stored with zero imaginary parts).
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(Vec<C64>);

impl StateVector {
    pub fn new(entries: Vec<C64>) -> Self {
        Self(entries)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![C64::new(0.0, 0.0); n])
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self(values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.0.iter()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.re).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Returns `Err(NonFinite)` naming `context` if any entry is NaN or infinite.
    pub fn ensure_finite(self, context: &str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite(context.to_string()))
        }
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.len() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                found: self.len(),
            })
        }
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &StateVector) {
        for (a, b) in self.0.iter_mut().zip(&x.0) {
            *a += b * alpha;
        }
    }

    /// `self += diag ⊙ x`
    pub fn add_diag(&mut self, diag: &[C64], x: &StateVector) {
        for ((a, d), b) in self.0.iter_mut().zip(diag).zip(&x.0) {
            *a += d * b;
        }
    }

    /// `self += alpha * (diag ⊙ x)`
    pub fn add_diag_scaled(&mut self, diag: &[C64], alpha: f64, x: &StateVector) {
        for ((a, d), b) in self.0.iter_mut().zip(diag).zip(&x.0) {
            *a += d * b * alpha;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.0 {
            *a *= alpha;
        }
    }

    /// Entrywise product with a diagonal operator.
    pub fn diag_mul(diag: &[C64], x: &StateVector) -> StateVector {
        StateVector(diag.iter().zip(&x.0).map(|(d, v)| d * v).collect())
    }

    pub fn sub(&self, other: &StateVector) -> StateVector {
        StateVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for StateVector {
    type Output = C64;

    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for StateVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.0[i]
    }
}

impl From<Vec<C64>> for StateVector {
    fn from(v: Vec<C64>) -> Self {
        Self(v)
    }
}

impl FromIterator<C64> for StateVector {
    fn from_iter<I: IntoIterator<Item = C64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}
