//! Exponential time differencing Runge-Kutta maps (Cox-Matthews family).

use super::stage;
use crate::error::Result;
use crate::phi_functions::EtdCoefficientSet;
use crate::sde_core::SplitField;
use crate::state::StateVector;

fn exp_times(diag: &[crate::state::C64], u: &StateVector) -> StateVector {
    StateVector::diag_mul(diag, u)
}

/// `k1 = e^{hL}u + A1 N0`, `u+ = k1 + A2 (N(k1) - N0)`.
pub(crate) fn setdrk2_step<F: SplitField + ?Sized>(
    f: &F,
    co: &EtdCoefficientSet,
    t: f64,
    u: &StateVector,
    h: f64,
) -> Result<StateVector> {
    let (a1, a2) = (co.slot(0), co.slot(1));
    let n0 = stage(f.nonlinear(t, u), 1)?;
    let mut k1 = exp_times(co.exp_full(), u);
    k1.add_diag(a1, &n0);
    let n1 = stage(f.nonlinear(t + h, &k1), 2)?;
    let mut out = k1;
    out.add_diag(a2, &n1.sub(&n0));
    out.ensure_finite("SETDRK2 update")
}

pub(crate) fn setdrk3_step<F: SplitField + ?Sized>(
    f: &F,
    co: &EtdCoefficientSet,
    t: f64,
    u: &StateVector,
    h: f64,
) -> Result<StateVector> {
    let (b1, b2, b3, b4, b5) = (co.slot(0), co.slot(1), co.slot(2), co.slot(3), co.slot(4));
    let eu = exp_times(co.exp_full(), u);

    let n0 = stage(f.nonlinear(t, u), 1)?;
    let mut k1 = exp_times(co.exp_half(), u);
    k1.add_diag(b1, &n0);

    let n1 = stage(f.nonlinear(t + 0.5 * h, &k1), 2)?;
    let mut k2 = eu.clone();
    let mut rhs = n1.clone();
    rhs.scale(2.0);
    rhs.axpy(-1.0, &n0);
    k2.add_diag(b2, &rhs);

    let n2 = stage(f.nonlinear(t + h, &k2), 3)?;
    let mut out = eu;
    out.add_diag(b3, &n0);
    out.add_diag(b4, &n1);
    out.add_diag(b5, &n2);
    out.ensure_finite("SETDRK3 update")
}

pub(crate) fn setdrk4_step<F: SplitField + ?Sized>(
    f: &F,
    co: &EtdCoefficientSet,
    t: f64,
    u: &StateVector,
    h: f64,
) -> Result<StateVector> {
    let (e0, e1, e2, e3) = (co.slot(0), co.slot(1), co.slot(2), co.slot(3));
    let half = co.exp_half();
    let ehu = exp_times(half, u);

    let n0 = stage(f.nonlinear(t, u), 1)?;
    let mut a = ehu.clone();
    a.add_diag(e0, &n0);

    let na = stage(f.nonlinear(t + 0.5 * h, &a), 2)?;
    let mut b = ehu;
    b.add_diag(e0, &na);

    let nb = stage(f.nonlinear(t + 0.5 * h, &b), 3)?;
    let mut c = exp_times(half, &a);
    let mut rhs = nb.clone();
    rhs.scale(2.0);
    rhs.axpy(-1.0, &n0);
    c.add_diag(e0, &rhs);

    let nc = stage(f.nonlinear(t + h, &c), 4)?;
    let mut out = exp_times(co.exp_full(), u);
    out.add_diag(e1, &n0);
    let mut mid = na;
    mid.axpy(1.0, &nb);
    out.add_diag(e2, &mid);
    out.add_diag(e3, &nc);
    out.ensure_finite("SETDRK4 update")
}
