//! Exponential integrators for Itô problems. These are not built on the
//! change of variables; each uses the noise increment directly.

use super::{stage, Csetdrk1Form};
use crate::error::Result;
use crate::phi_functions::{contour_phi_eval, ContourConfig, PhiFunction};
use crate::sde_core::SdeProblem;
use crate::state::{StateVector, C64};

/// `e^{hL}`, `A1 = (e^{hL} - 1)/L` and the SETDM01 standard deviation
/// `sqrt((e^{2hL} - 1)/(2L))` for one step size.
#[derive(Clone, Debug)]
pub(crate) struct ItoCoefficients {
    pub(crate) exp: Vec<C64>,
    pub(crate) a1: Vec<C64>,
    pub(crate) sigma: Vec<C64>,
}

impl ItoCoefficients {
    pub(crate) fn new(linear: &[C64], h: f64, cfg: &ContourConfig) -> Result<Self> {
        let exp = linear.iter().map(|&l| (l * h).exp()).collect();
        let a1 = contour_phi_eval(PhiFunction::ExpM1(1.0), linear, h, cfg)?
            .into_iter()
            .map(|v| v * h)
            .collect();
        let sigma = contour_phi_eval(PhiFunction::ExpM1(2.0), linear, h, cfg)?
            .into_iter()
            .map(|v| (v * (0.5 * h)).sqrt())
            .collect();
        Ok(Self { exp, a1, sigma })
    }
}

fn noise_sum(problem: &SdeProblem, t: f64, u: &StateVector, weights: &[f64]) -> Result<StateVector> {
    let mut out = StateVector::zeros(u.len());
    for (m, &w) in weights.iter().enumerate() {
        out.axpy(w, &stage(problem.diffusion(m, t, u), 1)?);
    }
    Ok(out)
}

/// `u+ = e^{hL}(u + h N + Σ g_m ΔW_m)`
pub(crate) fn sifem_step(
    problem: &SdeProblem,
    co: &ItoCoefficients,
    t: f64,
    u: &StateVector,
    h: f64,
    dw: &[f64],
) -> Result<StateVector> {
    let mut v = u.clone();
    v.axpy(h, &stage(crate::sde_core::SplitField::nonlinear(problem, t, u), 1)?);
    v.axpy(1.0, &noise_sum(problem, t, u, dw)?);
    StateVector::diag_mul(&co.exp, &v).ensure_finite("SIFEM update")
}

/// `u+ = e^{hL} u + A1 N + e^{hL} Σ g_m ΔW_m`
pub(crate) fn setdm10_step(
    problem: &SdeProblem,
    co: &ItoCoefficients,
    t: f64,
    u: &StateVector,
    dw: &[f64],
) -> Result<StateVector> {
    let n0 = stage(crate::sde_core::SplitField::nonlinear(problem, t, u), 1)?;
    let mut out = StateVector::diag_mul(&co.exp, u);
    out.add_diag(&co.a1, &n0);
    out.add_diag(&co.exp, &noise_sum(problem, t, u, dw)?);
    out.ensure_finite("SETDM10 update")
}

/// `u+ = e^{hL} u + A1 N + sqrt((e^{2hL}-1)/(2L)) Σ g_m z_m`, `z_m ~ N(0,1)`.
pub(crate) fn setdm01_step(
    problem: &SdeProblem,
    co: &ItoCoefficients,
    t: f64,
    u: &StateVector,
    z: &[f64],
) -> Result<StateVector> {
    let n0 = stage(crate::sde_core::SplitField::nonlinear(problem, t, u), 1)?;
    let mut out = StateVector::diag_mul(&co.exp, u);
    out.add_diag(&co.a1, &n0);
    out.add_diag(&co.sigma, &noise_sum(problem, t, u, z)?);
    out.ensure_finite("SETDM01 update")
}

/// Exponential Euler applied to `N + Σ g_m ΔW_m / h`.
pub(crate) fn csetdrk1_step(
    problem: &SdeProblem,
    co: &ItoCoefficients,
    form: Csetdrk1Form,
    t: f64,
    u: &StateVector,
    h: f64,
    dw: &[f64],
) -> Result<StateVector> {
    let n0 = stage(crate::sde_core::SplitField::nonlinear(problem, t, u), 1)?;
    let g = noise_sum(problem, t, u, dw)?;
    let mut out = StateVector::diag_mul(&co.exp, u);
    match form {
        Csetdrk1Form::Separate => {
            out.add_diag(&co.a1, &n0);
            out.add_diag_scaled(&co.a1, 1.0 / h, &g);
        }
        Csetdrk1Form::Factored => {
            let mut rhs = n0;
            rhs.axpy(1.0 / h, &g);
            out.add_diag(&co.a1, &rhs);
        }
    }
    out.ensure_finite("CSETDRK1 update")
}
