//! Coefficient functions of the exponential schemes, evaluated on a diagonal
//! operator by trapezoidal quadrature of the Cauchy integral around each
//! scaled eigenvalue.
//!
//! For an entire function `f` and a circle of radius `r` centred at `z0`,
//! `f(z0) = (1/n) Σ_k f(z0 + r e^{iθ_k})` up to an error that decays
//! factorially in `n`. The nodes stay at distance ~`r` from the origin, so the
//! cancellation in `(e^z - 1)/z`-type expressions near `z = 0` never occurs.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde_core::operator_hash;
use crate::state::C64;

/// Quadrature circle used for every eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourConfig {
    pub n_points: usize,
    pub radius: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self {
            n_points: 64,
            radius: 1.0,
        }
    }
}

impl ContourConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 16 {
            return Err(Error::InvalidConfig(format!(
                "contour needs at least 16 nodes, got {}",
                self.n_points
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "contour radius must be positive, got {}",
                self.radius
            )));
        }
        Ok(())
    }

    /// Unit-circle nodes `e^{iθ_k}`, `θ_k = π(2k+1)/n`; the set is closed
    /// under conjugation and avoids the real axis.
    fn nodes(&self) -> Vec<C64> {
        let n = self.n_points as f64;
        (0..self.n_points)
            .map(|k| C64::from_polar(self.radius, PI * (2 * k + 1) as f64 / n))
            .collect()
    }
}

/// A rational-exponential function of `z` with (at most) a removable
/// singularity at the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhiFunction {
    /// `e^{c z}`
    Exp(f64),
    /// `(e^{c z} - 1) / z`
    ExpM1(f64),
    /// `(e^z - 1 - z) / z²`
    Phi2,
    /// `(-4 - z + e^z (4 - 3z + z²)) / z³`
    Etd3Start,
    /// `(2 + z + e^z (z - 2)) / z³`
    Etd3Mid,
    /// `(-4 - 3z - z² + e^z (4 - z)) / z³`
    Etd3End,
}

impl PhiFunction {
    /// Direct closed-form evaluation; inaccurate near `z = 0` (and undefined
    /// at it) for everything but `Exp`.
    pub fn eval_direct(self, z: C64) -> C64 {
        let one = C64::new(1.0, 0.0);
        match self {
            PhiFunction::Exp(c) => (z * c).exp(),
            PhiFunction::ExpM1(c) => ((z * c).exp() - one) / z,
            PhiFunction::Phi2 => (z.exp() - one - z) / (z * z),
            PhiFunction::Etd3Start => {
                (-4.0 - z + z.exp() * (4.0 - 3.0 * z + z * z)) / (z * z * z)
            }
            PhiFunction::Etd3Mid => (2.0 + z + z.exp() * (z - 2.0)) / (z * z * z),
            PhiFunction::Etd3End => {
                (-4.0 - 3.0 * z - z * z + z.exp() * (4.0 - z)) / (z * z * z)
            }
        }
    }
}

/// Evaluates `f(dt·λ)` for every eigenvalue by contour quadrature.
pub fn contour_phi_eval(
    f: PhiFunction,
    eigenvalues: &[C64],
    dt: f64,
    cfg: &ContourConfig,
) -> Result<Vec<C64>> {
    cfg.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidConfig(format!("time step must be positive, got {dt}")));
    }
    let nodes = cfg.nodes();
    let inv_n = 1.0 / nodes.len() as f64;
    eigenvalues
        .iter()
        .map(|&lambda| {
            let z0 = lambda * dt;
            let sum: C64 = nodes.iter().map(|&w| f.eval_direct(z0 + w)).sum();
            let v = sum * inv_n;
            if v.re.is_finite() && v.im.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(format!("contour evaluation of {f:?} at z = {z0}")))
            }
        })
        .collect()
}

/// Exponential Runge-Kutta variants with precomputed coefficient tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EtdScheme {
    Setdrk2,
    Setdrk3,
    Setdrk4,
}

impl EtdScheme {
    /// Coefficient names, scale factors (in units of `dt`) and functions.
    fn table(self) -> &'static [(&'static str, f64, PhiFunction)] {
        match self {
            EtdScheme::Setdrk2 => &[
                ("A1", 1.0, PhiFunction::ExpM1(1.0)),
                ("A2", 1.0, PhiFunction::Phi2),
            ],
            EtdScheme::Setdrk3 => &[
                ("B1", 1.0, PhiFunction::ExpM1(0.5)),
                ("B2", 1.0, PhiFunction::ExpM1(1.0)),
                ("B3", 1.0, PhiFunction::Etd3Start),
                ("B4", 4.0, PhiFunction::Etd3Mid),
                ("B5", 1.0, PhiFunction::Etd3End),
            ],
            EtdScheme::Setdrk4 => &[
                ("E0", 1.0, PhiFunction::ExpM1(0.5)),
                ("E1", 1.0, PhiFunction::Etd3Start),
                ("E2", 2.0, PhiFunction::Etd3Mid),
                ("E3", 1.0, PhiFunction::Etd3End),
            ],
        }
    }

    pub fn coefficient_names(self) -> Vec<&'static str> {
        self.table().iter().map(|(n, _, _)| *n).collect()
    }
}

/// Propagators and named coefficient arrays for one (scheme, dt, operator).
#[derive(Clone, Debug)]
pub struct EtdCoefficientSet {
    scheme: EtdScheme,
    dt: f64,
    operator_hash: u64,
    contour: ContourConfig,
    exp_half: Vec<C64>,
    exp_full: Vec<C64>,
    coefficients: Vec<(&'static str, Vec<C64>)>,
}

/// Builds every propagator and coefficient of `scheme` before stepping.
///
/// Propagators use the direct exponential; the coefficient functions go
/// through [`contour_phi_eval`]. Each coefficient is `dt · s · f(dt·λ)`.
pub fn etd_coefficient_set(
    scheme: EtdScheme,
    eigenvalues: &[C64],
    dt: f64,
    cfg: &ContourConfig,
) -> Result<EtdCoefficientSet> {
    cfg.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidConfig(format!("time step must be positive, got {dt}")));
    }
    let exp_half: Vec<C64> = eigenvalues.iter().map(|&l| (l * (0.5 * dt)).exp()).collect();
    let exp_full: Vec<C64> = eigenvalues.iter().map(|&l| (l * dt).exp()).collect();
    if exp_full.iter().chain(&exp_half).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite("propagator overflow".into()));
    }
    let coefficients = scheme
        .table()
        .iter()
        .map(|&(name, scale, f)| {
            let vals = contour_phi_eval(f, eigenvalues, dt, cfg)?
                .into_iter()
                .map(|v| v * (scale * dt))
                .collect();
            Ok((name, vals))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EtdCoefficientSet {
        scheme,
        dt,
        operator_hash: operator_hash(eigenvalues),
        contour: *cfg,
        exp_half,
        exp_full,
        coefficients,
    })
}

impl EtdCoefficientSet {
    pub fn scheme(&self) -> EtdScheme {
        self.scheme
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn operator_hash(&self) -> u64 {
        self.operator_hash
    }

    pub fn contour(&self) -> ContourConfig {
        self.contour
    }

    pub fn len(&self) -> usize {
        self.exp_full.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exp_full.is_empty()
    }

    /// `e^{L dt / 2}`
    pub fn exp_half(&self) -> &[C64] {
        &self.exp_half
    }

    /// `e^{L dt}`
    pub fn exp_full(&self) -> &[C64] {
        &self.exp_full
    }

    pub fn coefficient(&self, name: &str) -> Option<&[C64]> {
        self.coefficients
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// All named coefficient arrays in table order.
    pub fn coefficients(&self) -> impl Iterator<Item = (&'static str, &[C64])> {
        self.coefficients.iter().map(|(n, v)| (*n, v.as_slice()))
    }

    pub(crate) fn slot(&self, i: usize) -> &[C64] {
        &self.coefficients[i].1
    }
}

type CacheKey = (EtdScheme, u64, u64, usize, u64);

/// Coefficient sets keyed by (scheme, dt, operator hash, contour).
#[derive(Default)]
pub struct CoefficientCache {
    sets: Mutex<HashMap<CacheKey, Arc<EtdCoefficientSet>>>,
}

impl CoefficientCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(
        &self,
        scheme: EtdScheme,
        eigenvalues: &[C64],
        dt: f64,
        cfg: &ContourConfig,
    ) -> Result<Arc<EtdCoefficientSet>> {
        let key = (
            scheme,
            dt.to_bits(),
            operator_hash(eigenvalues),
            cfg.n_points,
            cfg.radius.to_bits(),
        );
        if let Some(set) = self.sets.lock().unwrap().get(&key) {
            return Ok(Arc::clone(set));
        }
        let set = Arc::new(etd_coefficient_set(scheme, eigenvalues, dt, cfg)?);
        self.sets.lock().unwrap().insert(key, Arc::clone(&set));
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.sets.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
