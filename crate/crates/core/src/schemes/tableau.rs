use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TOL: f64 = 1e-12;

/// Explicit Runge-Kutta coefficients `(A, b, c)` with `c = A·1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ButcherTableau {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl ButcherTableau {
    /// Builds an explicit tableau; `c` is recovered from `c = A·1`.
    ///
    /// `a` must be square and strictly lower triangular and `b` must sum to one.
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let s = b.len();
        if s == 0 || a.len() != s || a.iter().any(|row| row.len() != s) {
            return Err(Error::InvalidConfig("tableau must be s×s with s weights".into()));
        }
        for (i, row) in a.iter().enumerate() {
            if row[i..].iter().any(|&x| x != 0.0) {
                return Err(Error::InvalidConfig(
                    "tableau must be explicit (strictly lower triangular)".into(),
                ));
            }
        }
        let sum: f64 = b.iter().sum();
        if (sum - 1.0).abs() > TOL {
            return Err(Error::InvalidConfig(format!("weights sum to {sum}, not 1")));
        }
        let c = a.iter().map(|row| row.iter().sum()).collect();
        Ok(Self { a, b, c })
    }

    /// Like [`ButcherTableau::new`] but checks supplied nodes against `A·1`.
    pub fn with_nodes(a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let t = Self::new(a, b)?;
        if c.len() != t.c.len() || c.iter().zip(&t.c).any(|(x, y)| (x - y).abs() > TOL) {
            return Err(Error::InvalidConfig("nodes violate c = A·1".into()));
        }
        Ok(t)
    }

    fn from_rows(rows: &[&[f64]], b: &[f64]) -> Self {
        let s = b.len();
        let a = rows
            .iter()
            .map(|r| {
                let mut row = r.to_vec();
                row.resize(s, 0.0);
                row
            })
            .collect();
        Self::new(a, b.to_vec()).expect("built-in tableau is valid")
    }

    /// Heun's method (the Butcher form of SSP22).
    pub fn heun() -> Self {
        Self::from_rows(&[&[], &[1.0]], &[0.5, 0.5])
    }

    /// Three-stage third-order SSP method (Shu-Osher).
    pub fn ssp33() -> Self {
        Self::from_rows(&[&[], &[1.0], &[0.25, 0.25]], &[1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0])
    }

    /// Kutta's third-order method, the zero-operator limit of SETDRK3.
    pub fn kutta3() -> Self {
        Self::from_rows(&[&[], &[0.5], &[-1.0, 2.0]], &[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0])
    }

    /// Classical fourth-order Runge-Kutta.
    pub fn rk4() -> Self {
        Self::from_rows(
            &[&[], &[0.5], &[0.0, 0.5], &[0.0, 0.0, 1.0]],
            &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
        )
    }

    /// The zero-operator limit of eSSPIFSRK⁺(3,3).
    pub fn esspif33() -> Self {
        Self::from_rows(
            &[&[], &[2.0 / 3.0], &[2.0 / 9.0, 4.0 / 9.0]],
            &[0.25, 3.0 / 16.0, 9.0 / 16.0],
        )
    }

    /// Forward Euler.
    pub fn euler() -> Self {
        Self::from_rows(&[&[]], &[1.0])
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// Classical order from the order conditions up to four.
    pub fn order(&self) -> u32 {
        let s = self.stages();
        let (a, b, c) = (&self.a, &self.b, &self.c);
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
        let ac: Vec<f64> = (0..s).map(|i| dot(&a[i], c)).collect();
        let c2: Vec<f64> = c.iter().map(|x| x * x).collect();
        let ac2: Vec<f64> = (0..s).map(|i| dot(&a[i], &c2)).collect();
        let aac: Vec<f64> = (0..s).map(|i| dot(&a[i], &ac)).collect();
        let close = |x: f64, y: f64| (x - y).abs() < 1e-10;

        if !close(b.iter().sum(), 1.0) {
            return 0;
        }
        if !close(dot(b, c), 0.5) {
            return 1;
        }
        if !close(dot(b, &c2), 1.0 / 3.0) || !close(dot(b, &ac), 1.0 / 6.0) {
            return 2;
        }
        let c3: Vec<f64> = c.iter().map(|x| x * x * x).collect();
        let bc: Vec<f64> = b.iter().zip(c).map(|(p, q)| p * q).collect();
        if !close(dot(b, &c3), 0.25)
            || !close(dot(&bc, &ac), 0.125)
            || !close(dot(b, &ac2), 1.0 / 12.0)
            || !close(dot(b, &aac), 1.0 / 24.0)
        {
            return 3;
        }
        4
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_orders() {
        assert_eq!(ButcherTableau::euler().order(), 1);
        assert_eq!(ButcherTableau::heun().order(), 2);
        assert_eq!(ButcherTableau::ssp33().order(), 3);
        assert_eq!(ButcherTableau::kutta3().order(), 3);
        assert_eq!(ButcherTableau::esspif33().order(), 3);
        assert_eq!(ButcherTableau::rk4().order(), 4);
    }

    #[test]
    fn nodes_from_consistency() {
        assert_eq!(ButcherTableau::rk4().c(), &[0.0, 0.5, 0.5, 1.0]);
        assert_eq!(ButcherTableau::ssp33().c(), &[0.0, 1.0, 0.5]);
        assert!(ButcherTableau::with_nodes(vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![0.5, 0.5], vec![0.0, 0.5]).is_err());
    }

    #[test]
    fn rejects_implicit_and_inconsistent() {
        assert!(ButcherTableau::new(vec![vec![0.5]], vec![1.0]).is_err());
        assert!(ButcherTableau::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![0.5, 0.6]).is_err());
        assert!(ButcherTableau::new(vec![vec![0.0]], vec![0.5, 0.5]).is_err());
    }
}
