//! Explicit Runge-Kutta maps on the full field `L u + N`.

use super::{stage, ButcherTableau};
use crate::error::Result;
use crate::sde_core::SplitField;
use crate::state::StateVector;

pub(crate) fn tableau_step<F: SplitField + ?Sized>(
    f: &F,
    tab: &ButcherTableau,
    t: f64,
    u: &StateVector,
    h: f64,
) -> Result<StateVector> {
    let s = tab.stages();
    let mut k: Vec<StateVector> = Vec::with_capacity(s);
    for i in 0..s {
        let mut ui = u.clone();
        for (j, kj) in k.iter().enumerate() {
            let aij = tab.a(i, j);
            if aij != 0.0 {
                ui.axpy(h * aij, kj);
            }
        }
        k.push(stage(f.full(t + tab.c()[i] * h, &ui), i + 1)?);
    }
    let mut out = u.clone();
    for (bi, ki) in tab.b().iter().zip(&k) {
        out.axpy(h * bi, ki);
    }
    out.ensure_finite("SRK update")
}

/// Shu-Osher form: `u1 = u + hF(u)`, `u+ = u/2 + (u1 + hF(u1))/2`.
pub(crate) fn ssp22_step<F: SplitField + ?Sized>(
    f: &F,
    t: f64,
    u: &StateVector,
    h: f64,
) -> Result<StateVector> {
    let mut u1 = u.clone();
    u1.axpy(h, &stage(f.full(t, u), 1)?);
    let f1 = stage(f.full(t + h, &u1), 2)?;
    let mut out = u.clone();
    out.scale(0.5);
    u1.axpy(h, &f1);
    out.axpy(0.5, &u1);
    out.ensure_finite("SSP22 update")
}

/// Shu-Osher SSP(3,3) with the convex weights 1/3, 2/3 on the last stage.
pub(crate) fn ssp33_step<F: SplitField + ?Sized>(
    f: &F,
    t: f64,
    u: &StateVector,
    h: f64,
) -> Result<StateVector> {
    let mut u1 = u.clone();
    u1.axpy(h, &stage(f.full(t, u), 1)?);

    let f1 = stage(f.full(t + h, &u1), 2)?;
    let mut u2 = u.clone();
    u2.scale(0.75);
    u1.axpy(h, &f1);
    u2.axpy(0.25, &u1);

    let f2 = stage(f.full(t + 0.5 * h, &u2), 3)?;
    let mut out = u.clone();
    out.scale(1.0 / 3.0);
    u2.axpy(h, &f2);
    out.axpy(2.0 / 3.0, &u2);
    out.ensure_finite("SSP33 update")
}

/// Classical RK4 with weights (1/6, 1/3, 1/3, 1/6) over stages 1-4.
pub(crate) fn rk4_step<F: SplitField + ?Sized>(
    f: &F,
    t: f64,
    u: &StateVector,
    h: f64,
) -> Result<StateVector> {
    let k1 = stage(f.full(t, u), 1)?;
    let mut u2 = u.clone();
    u2.axpy(0.5 * h, &k1);
    let k2 = stage(f.full(t + 0.5 * h, &u2), 2)?;
    let mut u3 = u.clone();
    u3.axpy(0.5 * h, &k2);
    let k3 = stage(f.full(t + 0.5 * h, &u3), 3)?;
    let mut u4 = u.clone();
    u4.axpy(h, &k3);
    let k4 = stage(f.full(t + h, &u4), 4)?;

    let mut out = u.clone();
    out.axpy(h / 6.0, &k1);
    out.axpy(h / 3.0, &k2);
    out.axpy(h / 3.0, &k3);
    out.axpy(h / 6.0, &k4);
    out.ensure_finite("SRK4 update")
}
