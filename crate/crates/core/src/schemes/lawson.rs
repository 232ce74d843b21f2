//! Integrating-factor (Lawson) Runge-Kutta maps. Only the nonlinear part of
//! the field is evaluated; the linear part enters through `e^{c h L}`.

use super::{stage, ButcherTableau, Esspifsrk22Form};
use crate::error::Result;
use crate::sde_core::SplitField;
use crate::state::{StateVector, C64};

/// `e^{c h L}` for the handful of exponents a scheme needs.
#[derive(Clone, Debug)]
pub(crate) struct Propagators {
    entries: Vec<(f64, Vec<C64>)>,
}

impl Propagators {
    pub(crate) fn new(linear: &[C64], h: f64, exponents: &[f64]) -> Self {
        let mut entries: Vec<(f64, Vec<C64>)> = Vec::new();
        for &c in exponents {
            if entries.iter().any(|(e, _)| (e - c).abs() < 1e-14) {
                continue;
            }
            let exp = linear.iter().map(|&l| (l * (c * h)).exp()).collect();
            entries.push((c, exp));
        }
        Self { entries }
    }

    pub(crate) fn get(&self, c: f64) -> &[C64] {
        self.entries
            .iter()
            .find(|(e, _)| (e - c).abs() < 1e-14)
            .map(|(_, v)| v.as_slice())
            .expect("propagator exponent was precomputed")
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .flat_map(|(_, v)| v)
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Exponents needed by the generic Lawson map of `tab`.
    pub(crate) fn exponents_for(tab: &ButcherTableau) -> Vec<f64> {
        let c = tab.c();
        let mut out = vec![1.0];
        for i in 0..c.len() {
            out.push(c[i]);
            out.push(1.0 - c[i]);
            for j in 0..i {
                out.push(c[i] - c[j]);
            }
        }
        out
    }
}

fn scaled(diag: &[C64], x: &StateVector) -> StateVector {
    StateVector::diag_mul(diag, x)
}

/// `u_i = e^{c_i hL} u + h Σ_j a_ij e^{(c_i-c_j) hL} N_j`,
/// `u+ = e^{hL} u + h Σ_i b_i e^{(1-c_i) hL} N_i`.
pub(crate) fn generic_step<F: SplitField + ?Sized>(
    f: &F,
    tab: &ButcherTableau,
    props: &Propagators,
    t: f64,
    u: &StateVector,
    h: f64,
) -> Result<StateVector> {
    let c = tab.c();
    let s = tab.stages();
    let mut n: Vec<StateVector> = Vec::with_capacity(s);
    for i in 0..s {
        let mut ui = scaled(props.get(c[i]), u);
        for (j, nj) in n.iter().enumerate() {
            let aij = tab.a(i, j);
            if aij != 0.0 {
                ui.add_diag_scaled(props.get(c[i] - c[j]), h * aij, nj);
            }
        }
        n.push(stage(f.nonlinear(t + c[i] * h, &ui), i + 1)?);
    }
    let mut out = scaled(props.get(1.0), u);
    for i in 0..s {
        out.add_diag_scaled(props.get(1.0 - c[i]), h * tab.b()[i], &n[i]);
    }
    out.ensure_finite("SIFRK update")
}

pub(crate) const IFSRK4_EXPONENTS: [f64; 2] = [1.0, 0.5];

pub(crate) fn ifsrk4_step<F: SplitField + ?Sized>(
    f: &F,
    props: &Propagators,
    t: f64,
    u: &StateVector,
    h: f64,
) -> Result<StateVector> {
    let e = props.get(1.0);
    let eh = props.get(0.5);
    let eu = scaled(e, u);
    let ehu = scaled(eh, u);

    let n1 = stage(f.nonlinear(t, u), 1)?;
    let mut u2 = ehu.clone();
    u2.add_diag_scaled(eh, 0.5 * h, &n1);

    let n2 = stage(f.nonlinear(t + 0.5 * h, &u2), 2)?;
    let mut u3 = ehu;
    u3.axpy(0.5 * h, &n2);

    let n3 = stage(f.nonlinear(t + 0.5 * h, &u3), 3)?;
    let mut u4 = eu.clone();
    u4.add_diag_scaled(eh, h, &n3);

    let n4 = stage(f.nonlinear(t + h, &u4), 4)?;
    let mut out = eu;
    out.add_diag_scaled(e, h / 6.0, &n1);
    out.add_diag_scaled(eh, h / 3.0, &n2);
    out.add_diag_scaled(eh, h / 3.0, &n3);
    out.axpy(h / 6.0, &n4);
    out.ensure_finite("IFSRK4 update")
}

pub(crate) const ESSPIF22_EXPONENTS: [f64; 1] = [1.0];

pub(crate) fn esspif22_step<F: SplitField + ?Sized>(
    f: &F,
    props: &Propagators,
    form: Esspifsrk22Form,
    t: f64,
    u: &StateVector,
    h: f64,
) -> Result<StateVector> {
    let e = props.get(1.0);
    let n0 = stage(f.nonlinear(t, u), 1)?;
    let mut v = u.clone();
    v.axpy(h, &n0);
    let k1 = scaled(e, &v);

    let n1 = stage(f.nonlinear(t + h, &k1), 2)?;
    let mut w = k1;
    w.axpy(h, &n1);
    let mut out = scaled(e, u);
    out.scale(0.5);
    match form {
        Esspifsrk22Form::Source => out.axpy(0.5, &w),
        Esspifsrk22Form::Printed => out.add_diag_scaled(e, 0.5, &w),
    }
    out.ensure_finite("eSSPIFSRK22 update")
}

pub(crate) const ESSPIF33_EXPONENTS: [f64; 3] = [1.0, 2.0 / 3.0, 1.0 / 3.0];

pub(crate) fn esspif33_step<F: SplitField + ?Sized>(
    f: &F,
    props: &Propagators,
    t: f64,
    u: &StateVector,
    h: f64,
) -> Result<StateVector> {
    let e = props.get(1.0);
    let e23 = props.get(2.0 / 3.0);
    let e13 = props.get(1.0 / 3.0);
    let third = 4.0 / 3.0 * h;

    let n0 = stage(f.nonlinear(t, u), 1)?;
    let mut euler0 = u.clone();
    euler0.axpy(third, &n0);

    // k1 = ½ e^{⅔hL} u + ½ e^{⅔hL} (u + 4/3 h N(u))
    let mut k1 = scaled(e23, u);
    k1.scale(0.5);
    k1.add_diag_scaled(e23, 0.5, &euler0);

    let n1 = stage(f.nonlinear(t + 2.0 / 3.0 * h, &k1), 2)?;
    let mut k2 = scaled(e23, u);
    k2.scale(2.0 / 3.0);
    let mut w1 = k1;
    w1.axpy(third, &n1);
    k2.axpy(1.0 / 3.0, &w1);

    let n2 = stage(f.nonlinear(t + 2.0 / 3.0 * h, &k2), 3)?;
    let mut w2 = k2;
    w2.axpy(third, &n2);

    let mut out = scaled(e, u);
    out.scale(59.0 / 128.0);
    out.add_diag_scaled(e, 15.0 / 128.0, &euler0);
    out.add_diag_scaled(e13, 27.0 / 64.0, &w2);
    out.ensure_finite("eSSPIFSRK33 update")
}
