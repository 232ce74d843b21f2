//! Finite-difference Lie brackets `[F, G](u) = DG(u)[F(u)] - DF(u)[G(u)]`
//! and the commutativity classes they decide.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde_core::SdeProblem;
use crate::state::{StateVector, C64};

/// Default relative finite-difference step.
pub const DEFAULT_EPS: f64 = 1e-5;
/// Default relative threshold below which a bracket counts as zero.
pub const DEFAULT_TOL: f64 = 1e-3;

/// `DΦ(u)[v] ≈ (Φ(u + ε v̂) - Φ(u - ε v̂)) ‖v‖ / (2ε)` with `v̂ = v/‖v‖`.
pub fn directional_derivative<P>(phi: P, u: &StateVector, v: &StateVector, eps: f64) -> Result<StateVector>
where
    P: Fn(&StateVector) -> Result<StateVector>,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!("finite-difference step must be positive, got {eps}")));
    }
    let nv = v.norm();
    if nv < 1e-14 {
        return Err(Error::DegenerateDirection(nv));
    }
    let mut plus = u.clone();
    plus.axpy(eps / nv, v);
    let mut minus = u.clone();
    minus.axpy(-eps / nv, v);
    let mut d = phi(&plus)?.sub(&phi(&minus)?);
    d.scale(nv / (2.0 * eps));
    d.ensure_finite("directional derivative")
}

/// `[F, G](u)` by central differences with absolute step `eps`. A term whose
/// direction vanishes contributes zero.
pub fn lie_bracket<F, G>(f: F, g: G, u: &StateVector, eps: f64) -> Result<StateVector>
where
    F: Fn(&StateVector) -> Result<StateVector>,
    G: Fn(&StateVector) -> Result<StateVector>,
{
    let fu = f(u)?;
    let gu = g(u)?;
    let zero_if_degenerate = |r: Result<StateVector>| match r {
        Err(Error::DegenerateDirection(_)) => Ok(StateVector::zeros(u.len())),
        other => other,
    };
    let dg_f = zero_if_degenerate(directional_derivative(&g, u, &fu, eps))?;
    let df_g = zero_if_degenerate(directional_derivative(&f, u, &gu, eps))?;
    Ok(dg_f.sub(&df_g))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    NonCommutative,
    Commutative,
    DriftCommutative,
}

/// Largest bracket norms over the probe states, each relative to
/// `‖F(u)‖ ‖G(u)‖ / ‖u‖`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutativityReport {
    pub drift_brackets: Vec<f64>,
    pub noise_brackets: Vec<Vec<f64>>,
    pub tolerance: f64,
    pub eps: f64,
    pub probe_states: usize,
    pub classification: Classification,
}

impl CommutativityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn relative_bracket<F, G>(f: F, g: G, u: &StateVector, eps: f64) -> Result<f64>
where
    F: Fn(&StateVector) -> Result<StateVector>,
    G: Fn(&StateVector) -> Result<StateVector>,
{
    let nu = u.norm();
    let scale = f(u)?.norm() * g(u)?.norm() / nu;
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(lie_bracket(f, g, u, eps)?.norm() / scale)
}

/// Brackets of the full drift with each diffusion and of every diffusion
/// pair, maximized over `probes`. `eps` and `tol` are relative (to the probe
/// norm and the field scale respectively).
pub fn commutativity_report(
    problem: &SdeProblem,
    probes: &[StateVector],
    eps: f64,
    tol: f64,
) -> Result<CommutativityReport> {
    if probes.is_empty() {
        return Err(Error::InsufficientData("at least one probe state is required".into()));
    }
    let m = problem.channels();
    let mut drift = vec![0.0; m];
    let mut noise = vec![vec![0.0; m]; m];
    let f = |u: &StateVector| problem.drift(0.0, u);
    for u in probes {
        u.check_len(problem.dimension())?;
        let h = eps * u.norm().max(f64::MIN_POSITIVE);
        for i in 0..m {
            let gi = |v: &StateVector| problem.diffusion(i, 0.0, v);
            drift[i] = f64::max(drift[i], relative_bracket(f, gi, u, h)?);
            for j in (i + 1)..m {
                let gj = |v: &StateVector| problem.diffusion(j, 0.0, v);
                let b = relative_bracket(gi, gj, u, h)?;
                noise[i][j] = f64::max(noise[i][j], b);
                noise[j][i] = noise[i][j];
            }
        }
    }
    let noise_commutes = noise.iter().flatten().all(|&b| b < tol);
    let drift_commutes = drift.iter().all(|&b| b < tol);
    let classification = match (noise_commutes, drift_commutes) {
        (true, true) => Classification::DriftCommutative,
        (true, false) => Classification::Commutative,
        _ => Classification::NonCommutative,
    };
    Ok(CommutativityReport {
        drift_brackets: drift,
        noise_brackets: noise,
        tolerance: tol,
        eps,
        probe_states: probes.len(),
        classification,
    })
}

/// `u0` plus `count` perturbations of it by random combinations of the
/// lowest retained modes, each of size about 10% of `‖u0‖`.
pub fn smooth_probes(u0: &StateVector, count: usize, seed: u64) -> Vec<StateVector> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = u0.len();
    let modes = 4.min(n / 4);
    let mut out = vec![u0.clone()];
    for _ in 0..count {
        let mut p = StateVector::zeros(n);
        for j in 1..=modes {
            let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / j as f64;
            p[j] = z;
            p[n - j] = z.conj();
        }
        let s = 0.1 * u0.norm() / p.norm().max(f64::MIN_POSITIVE);
        let mut u = u0.clone();
        u.axpy(s, &p);
        out.push(u);
    }
    out
}
