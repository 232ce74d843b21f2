//! One-step maps and path integration.
//!
//! Every Stratonovich scheme here is a deterministic one-step map applied to
//! the frozen field `L u + N + Σ_m g_m dW_m/dt` of [`crate::sde_core::ModifiedField`].
//! The Itô schemes in [`SchemeId::is_ito`] use the increments directly.

mod etd;
mod ito;
mod lawson;
mod srk;
mod tableau;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use tableau::ButcherTableau;

use crate::error::{Error, Result};
use crate::noise::BrownianPaths;
use crate::phi_functions::{
    etd_coefficient_set, CoefficientCache, ContourConfig, EtdCoefficientSet, EtdScheme,
};
use crate::sde_core::{Calculus, Increment, SdeProblem, SplitField};
use crate::state::{StateVector, C64};

use ito::ItoCoefficients;
use lawson::Propagators;

/// Which of the two printed arrangements of the eSSPIFSRK(2,2) update is used.
///
/// `Source` is `u+ = ½ e^{hL} u + ½ (k + h N(k))` with `k = e^{hL}(u + h N(u))`.
/// `Printed` applies a second `e^{hL}` to the bracket.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Esspifsrk22Form {
    Source,
    Printed,
}

/// The two algebraically equal arrangements of CSETDRK1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Csetdrk1Form {
    Separate,
    Factored,
}

/// Every supported one-step map.
#[derive(Clone, Debug, PartialEq)]
pub enum SchemeId {
    Ssp22,
    Ssp33,
    Srk4,
    Srk(ButcherTableau),
    Sifrk(ButcherTableau),
    Ifsrk4,
    Esspifsrk22(Esspifsrk22Form),
    Esspifsrk33,
    Setdrk2,
    Setdrk3,
    Setdrk4,
    Sifem,
    Setdm10,
    Setdm01,
    Csetdrk1(Csetdrk1Form),
}

const BUILTIN_TABLEAUX: [&str; 6] = ["euler", "heun", "kutta3", "ssp33", "rk4", "esspif33"];

fn builtin_tableau(name: &str) -> Option<ButcherTableau> {
    Some(match name {
        "euler" => ButcherTableau::euler(),
        "heun" => ButcherTableau::heun(),
        "kutta3" => ButcherTableau::kutta3(),
        "ssp33" => ButcherTableau::ssp33(),
        "rk4" => ButcherTableau::rk4(),
        "esspif33" => ButcherTableau::esspif33(),
        _ => return None,
    })
}

fn tableau_name(tab: &ButcherTableau) -> Option<&'static str> {
    BUILTIN_TABLEAUX
        .iter()
        .copied()
        .find(|n| builtin_tableau(n).as_ref() == Some(tab))
}

impl SchemeId {
    /// Registry of named schemes, as accepted by [`SchemeId::from_str`].
    pub fn all_named() -> Vec<SchemeId> {
        vec![
            SchemeId::Ssp22,
            SchemeId::Ssp33,
            SchemeId::Srk4,
            SchemeId::Ifsrk4,
            SchemeId::Esspifsrk22(Esspifsrk22Form::Source),
            SchemeId::Esspifsrk33,
            SchemeId::Setdrk2,
            SchemeId::Setdrk3,
            SchemeId::Setdrk4,
            SchemeId::Sifem,
            SchemeId::Setdm10,
            SchemeId::Setdm01,
            SchemeId::Csetdrk1(Csetdrk1Form::Separate),
        ]
    }

    /// Lower-snake-case name. Tableau schemes built from a built-in tableau
    /// are named `srk_<tableau>` / `sifrk_<tableau>`, custom ones `srk` / `sifrk`.
    pub fn name(&self) -> String {
        match self {
            SchemeId::Ssp22 => "ssp22".into(),
            SchemeId::Ssp33 => "ssp33".into(),
            SchemeId::Srk4 => "srk4".into(),
            SchemeId::Srk(t) => tableau_name(t).map_or("srk".into(), |n| format!("srk_{n}")),
            SchemeId::Sifrk(t) => tableau_name(t).map_or("sifrk".into(), |n| format!("sifrk_{n}")),
            SchemeId::Ifsrk4 => "ifsrk4".into(),
            SchemeId::Esspifsrk22(Esspifsrk22Form::Source) => "esspifsrk22".into(),
            SchemeId::Esspifsrk22(Esspifsrk22Form::Printed) => "esspifsrk22_printed".into(),
            SchemeId::Esspifsrk33 => "esspifsrk33".into(),
            SchemeId::Setdrk2 => "setdrk2".into(),
            SchemeId::Setdrk3 => "setdrk3".into(),
            SchemeId::Setdrk4 => "setdrk4".into(),
            SchemeId::Sifem => "sifem".into(),
            SchemeId::Setdm10 => "setdm10".into(),
            SchemeId::Setdm01 => "setdm01".into(),
            SchemeId::Csetdrk1(Csetdrk1Form::Separate) => "csetdrk1".into(),
            SchemeId::Csetdrk1(Csetdrk1Form::Factored) => "csetdrk1_factored".into(),
        }
    }

    pub fn is_ito(&self) -> bool {
        matches!(
            self,
            SchemeId::Sifem | SchemeId::Setdm10 | SchemeId::Setdm01 | SchemeId::Csetdrk1(_)
        )
    }

    pub fn calculus(&self) -> Calculus {
        if self.is_ito() {
            Calculus::Ito
        } else {
            Calculus::Stratonovich
        }
    }

    /// Whether the scheme treats a diagonal linear part exactly.
    pub fn needs_linear_part(&self) -> bool {
        !matches!(
            self,
            SchemeId::Ssp22 | SchemeId::Ssp33 | SchemeId::Srk4 | SchemeId::Srk(_)
        )
    }

    fn etd(&self) -> Option<EtdScheme> {
        match self {
            SchemeId::Setdrk2 => Some(EtdScheme::Setdrk2),
            SchemeId::Setdrk3 => Some(EtdScheme::Setdrk3),
            SchemeId::Setdrk4 => Some(EtdScheme::Setdrk4),
            _ => None,
        }
    }

    /// Classical order of the underlying deterministic map.
    pub fn deterministic_order(&self) -> u32 {
        match self {
            SchemeId::Ssp22 | SchemeId::Esspifsrk22(_) | SchemeId::Setdrk2 => 2,
            SchemeId::Ssp33 | SchemeId::Esspifsrk33 | SchemeId::Setdrk3 => 3,
            SchemeId::Srk4 | SchemeId::Ifsrk4 | SchemeId::Setdrk4 => 4,
            SchemeId::Srk(t) | SchemeId::Sifrk(t) => t.order(),
            SchemeId::Sifem | SchemeId::Setdm10 | SchemeId::Setdm01 | SchemeId::Csetdrk1(_) => 1,
        }
    }

    /// Order quadruple of a Stratonovich scheme with deterministic order ≥ 2.
    pub fn order_profile(&self) -> Option<OrderProfile> {
        if self.is_ito() {
            return None;
        }
        OrderProfile::from_deterministic(self.deterministic_order())
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let id = match s.as_str() {
            "ssp22" => SchemeId::Ssp22,
            "ssp33" => SchemeId::Ssp33,
            "srk4" => SchemeId::Srk4,
            "ifsrk4" => SchemeId::Ifsrk4,
            "esspifsrk22" => SchemeId::Esspifsrk22(Esspifsrk22Form::Source),
            "esspifsrk22_printed" => SchemeId::Esspifsrk22(Esspifsrk22Form::Printed),
            "esspifsrk33" => SchemeId::Esspifsrk33,
            "setdrk2" => SchemeId::Setdrk2,
            "setdrk3" => SchemeId::Setdrk3,
            "setdrk4" => SchemeId::Setdrk4,
            "sifem" => SchemeId::Sifem,
            "setdm10" => SchemeId::Setdm10,
            "setdm01" => SchemeId::Setdm01,
            "csetdrk1" => SchemeId::Csetdrk1(Csetdrk1Form::Separate),
            "csetdrk1_factored" => SchemeId::Csetdrk1(Csetdrk1Form::Factored),
            other => {
                let tab = |rest: &str| builtin_tableau(rest);
                if let Some(t) = other.strip_prefix("srk_").and_then(tab) {
                    SchemeId::Srk(t)
                } else if let Some(t) = other.strip_prefix("sifrk_").and_then(tab) {
                    SchemeId::Sifrk(t)
                } else {
                    return Err(Error::UnknownScheme(s));
                }
            }
        };
        Ok(id)
    }
}

impl Serialize for SchemeId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for SchemeId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Strong orders `(P_d, P_dc, P_c, P_s)`: deterministic, drift-commutative,
/// commutative and general noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderProfile {
    pub p_d: f64,
    pub p_dc: f64,
    pub p_c: f64,
    pub p_s: f64,
}

impl OrderProfile {
    pub fn from_deterministic(p: u32) -> Option<Self> {
        (p >= 2).then(|| Self {
            p_d: p as f64,
            p_dc: (p / 2) as f64,
            p_c: 1.0,
            p_s: 0.5,
        })
    }
}

/// Maps a non-finite result to a stage-indexed error.
pub(crate) fn stage(r: Result<StateVector>, idx: usize) -> Result<StateVector> {
    match r {
        Err(Error::NonFinite(_)) => Err(Error::StageNonFinite { stage: idx }),
        other => other,
    }
}

#[derive(Clone, Debug)]
enum Precomputed {
    None,
    Lawson(Propagators),
    Etd(Arc<EtdCoefficientSet>),
    Ito(ItoCoefficients),
}

/// A scheme bound to a problem and a step size with everything that can be
/// computed ahead of time (propagators, ETD coefficients) already built.
#[derive(Clone, Debug)]
pub struct Integrator {
    scheme: SchemeId,
    dt: f64,
    operator_hash: u64,
    pre: Precomputed,
}

fn check_calculus(problem: &SdeProblem, scheme: &SchemeId) -> Result<()> {
    if problem.calculus() != scheme.calculus() {
        return Err(Error::CalculusMismatch {
            scheme: scheme.name(),
            calculus: problem.calculus().name(),
        });
    }
    Ok(())
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("time step must be positive, got {dt}")))
    }
}

fn same_dt(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

impl Integrator {
    /// Prepares `scheme` for `problem` at step `dt`. ETD coefficient sets are
    /// taken from `cache` when given.
    pub fn new(
        problem: &SdeProblem,
        scheme: SchemeId,
        dt: f64,
        contour: &ContourConfig,
        cache: Option<&CoefficientCache>,
    ) -> Result<Self> {
        check_dt(dt)?;
        check_calculus(problem, &scheme)?;
        let linear = problem.linear_part();
        if scheme.needs_linear_part() && linear.is_none() {
            return Err(Error::MissingLinearPart);
        }
        let lin = linear.unwrap_or(&[]);
        let pre = match &scheme {
            SchemeId::Ssp22 | SchemeId::Ssp33 | SchemeId::Srk4 | SchemeId::Srk(_) => {
                Precomputed::None
            }
            SchemeId::Sifrk(tab) => {
                Precomputed::Lawson(Propagators::new(lin, dt, &Propagators::exponents_for(tab)))
            }
            SchemeId::Ifsrk4 => {
                Precomputed::Lawson(Propagators::new(lin, dt, &lawson::IFSRK4_EXPONENTS))
            }
            SchemeId::Esspifsrk22(_) => {
                Precomputed::Lawson(Propagators::new(lin, dt, &lawson::ESSPIF22_EXPONENTS))
            }
            SchemeId::Esspifsrk33 => {
                Precomputed::Lawson(Propagators::new(lin, dt, &lawson::ESSPIF33_EXPONENTS))
            }
            SchemeId::Setdrk2 | SchemeId::Setdrk3 | SchemeId::Setdrk4 => {
                let etd = scheme.etd().expect("etd scheme");
                let set = match cache {
                    Some(c) => c.get_or_compute(etd, lin, dt, contour)?,
                    None => Arc::new(etd_coefficient_set(etd, lin, dt, contour)?),
                };
                Precomputed::Etd(set)
            }
            SchemeId::Sifem | SchemeId::Setdm10 | SchemeId::Setdm01 | SchemeId::Csetdrk1(_) => {
                Precomputed::Ito(ItoCoefficients::new(lin, dt, contour)?)
            }
        };
        if let Precomputed::Lawson(p) = &pre {
            if !p.is_finite() {
                return Err(Error::NonFinite("propagator overflow".into()));
            }
        }
        Ok(Self {
            scheme,
            dt,
            operator_hash: problem.operator_hash(),
            pre,
        })
    }

    pub fn scheme(&self) -> &SchemeId {
        &self.scheme
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// The ETD coefficient set in use, if any.
    pub fn coefficients(&self) -> Option<&EtdCoefficientSet> {
        match &self.pre {
            Precomputed::Etd(set) => Some(set),
            _ => None,
        }
    }

    fn validate(&self, problem: &SdeProblem, u: &StateVector, inc: &Increment) -> Result<()> {
        check_calculus(problem, &self.scheme)?;
        u.check_len(problem.dimension())?;
        if inc.dw().len() != problem.channels() {
            return Err(Error::DimensionMismatch {
                expected: problem.channels(),
                found: inc.dw().len(),
            });
        }
        if !same_dt(inc.dt(), self.dt) {
            return Err(Error::CoefficientMismatch(format!(
                "integrator built for dt = {}, step requested with dt = {}",
                self.dt,
                inc.dt()
            )));
        }
        if problem.operator_hash() != self.operator_hash {
            return Err(Error::CoefficientMismatch(
                "linear operator differs from the one the integrator was built for".into(),
            ));
        }
        Ok(())
    }

    /// One step from `(t, u)` with increment `inc`. Itô schemes that need a
    /// standard normal sample use `ΔW/√dt`.
    pub fn step(
        &self,
        problem: &SdeProblem,
        t: f64,
        u: &StateVector,
        inc: &Increment,
    ) -> Result<StateVector> {
        self.validate(problem, u, inc)?;
        if self.scheme.is_ito() {
            let sq = inc.dt().sqrt();
            let z: Vec<f64> = inc.dw().iter().map(|w| w / sq).collect();
            return self.ito(problem, t, u, inc, &z);
        }
        if problem.channels() == 0 {
            self.deterministic(problem, t, u)
        } else {
            self.deterministic(&problem.modified(inc)?, t, u)
        }
    }

    /// One Itô step with an explicit auxiliary normal sample for SETDM01.
    pub fn step_ito(
        &self,
        problem: &SdeProblem,
        t: f64,
        u: &StateVector,
        inc: &Increment,
        z: &[f64],
    ) -> Result<StateVector> {
        self.validate(problem, u, inc)?;
        if !self.scheme.is_ito() {
            return Err(Error::CalculusMismatch {
                scheme: self.scheme.name(),
                calculus: Calculus::Ito.name(),
            });
        }
        self.ito(problem, t, u, inc, z)
    }

    /// The underlying deterministic map applied to an arbitrary split field.
    pub fn step_deterministic<F: SplitField + ?Sized>(
        &self,
        field: &F,
        t: f64,
        u: &StateVector,
    ) -> Result<StateVector> {
        if self.scheme.is_ito() {
            return Err(Error::CalculusMismatch {
                scheme: self.scheme.name(),
                calculus: Calculus::Stratonovich.name(),
            });
        }
        u.check_len(field.dim())?;
        self.deterministic(field, t, u)
    }

    fn deterministic<F: SplitField + ?Sized>(
        &self,
        f: &F,
        t: f64,
        u: &StateVector,
    ) -> Result<StateVector> {
        let h = self.dt;
        match (&self.scheme, &self.pre) {
            (SchemeId::Ssp22, _) => srk::ssp22_step(f, t, u, h),
            (SchemeId::Ssp33, _) => srk::ssp33_step(f, t, u, h),
            (SchemeId::Srk4, _) => srk::rk4_step(f, t, u, h),
            (SchemeId::Srk(tab), _) => srk::tableau_step(f, tab, t, u, h),
            (SchemeId::Sifrk(tab), Precomputed::Lawson(p)) => {
                lawson::generic_step(f, tab, p, t, u, h)
            }
            (SchemeId::Ifsrk4, Precomputed::Lawson(p)) => lawson::ifsrk4_step(f, p, t, u, h),
            (SchemeId::Esspifsrk22(form), Precomputed::Lawson(p)) => {
                lawson::esspif22_step(f, p, *form, t, u, h)
            }
            (SchemeId::Esspifsrk33, Precomputed::Lawson(p)) => {
                lawson::esspif33_step(f, p, t, u, h)
            }
            (SchemeId::Setdrk2, Precomputed::Etd(c)) => etd::setdrk2_step(f, c, t, u, h),
            (SchemeId::Setdrk3, Precomputed::Etd(c)) => etd::setdrk3_step(f, c, t, u, h),
            (SchemeId::Setdrk4, Precomputed::Etd(c)) => etd::setdrk4_step(f, c, t, u, h),
            _ => unreachable!("precomputed data matches the scheme"),
        }
    }

    fn ito(
        &self,
        problem: &SdeProblem,
        t: f64,
        u: &StateVector,
        inc: &Increment,
        z: &[f64],
    ) -> Result<StateVector> {
        let Precomputed::Ito(co) = &self.pre else {
            unreachable!("Itô scheme has Itô coefficients")
        };
        let (h, dw) = (self.dt, inc.dw());
        match &self.scheme {
            SchemeId::Sifem => ito::sifem_step(problem, co, t, u, h, dw),
            SchemeId::Setdm10 => ito::setdm10_step(problem, co, t, u, dw),
            SchemeId::Setdm01 => {
                if z.len() != problem.channels() {
                    return Err(Error::DimensionMismatch {
                        expected: problem.channels(),
                        found: z.len(),
                    });
                }
                ito::setdm01_step(problem, co, t, u, z)
            }
            SchemeId::Csetdrk1(form) => ito::csetdrk1_step(problem, co, *form, t, u, h, dw),
            _ => unreachable!(),
        }
    }
}

/// One SRK step with an arbitrary explicit tableau.
pub fn step_srk(
    problem: &SdeProblem,
    tableau: &ButcherTableau,
    t: f64,
    u: &StateVector,
    inc: &Increment,
) -> Result<StateVector> {
    check_calculus(problem, &SchemeId::Ssp22)?;
    u.check_len(problem.dimension())?;
    srk::tableau_step(&problem.modified(inc)?, tableau, t, u, inc.dt())
}

fn one_shot(
    problem: &SdeProblem,
    scheme: SchemeId,
    t: f64,
    u: &StateVector,
    inc: &Increment,
) -> Result<StateVector> {
    Integrator::new(problem, scheme, inc.dt(), &ContourConfig::default(), None)?
        .step(problem, t, u, inc)
}

/// One step of an integrating-factor scheme; propagators are built per call.
pub fn step_sifrk(
    problem: &SdeProblem,
    scheme: &SchemeId,
    t: f64,
    u: &StateVector,
    inc: &Increment,
) -> Result<StateVector> {
    match scheme {
        SchemeId::Sifrk(_) | SchemeId::Ifsrk4 | SchemeId::Esspifsrk22(_) | SchemeId::Esspifsrk33 => {
            one_shot(problem, scheme.clone(), t, u, inc)
        }
        other => Err(Error::InvalidConfig(format!("{other} is not an SIFRK scheme"))),
    }
}

/// One SETDRK step with a precomputed coefficient set.
pub fn step_setdrk(
    problem: &SdeProblem,
    coeffs: &EtdCoefficientSet,
    t: f64,
    u: &StateVector,
    inc: &Increment,
) -> Result<StateVector> {
    check_calculus(problem, &SchemeId::Setdrk2)?;
    if problem.linear_part().is_none() {
        return Err(Error::MissingLinearPart);
    }
    if !same_dt(coeffs.dt(), inc.dt()) {
        return Err(Error::CoefficientMismatch(format!(
            "coefficients built for dt = {}, step requested with dt = {}",
            coeffs.dt(),
            inc.dt()
        )));
    }
    if coeffs.operator_hash() != problem.operator_hash() {
        return Err(Error::CoefficientMismatch(
            "coefficients were built for a different linear operator".into(),
        ));
    }
    u.check_len(problem.dimension())?;
    let f = problem.modified(inc)?;
    let h = inc.dt();
    match coeffs.scheme() {
        EtdScheme::Setdrk2 => etd::setdrk2_step(&f, coeffs, t, u, h),
        EtdScheme::Setdrk3 => etd::setdrk3_step(&f, coeffs, t, u, h),
        EtdScheme::Setdrk4 => etd::setdrk4_step(&f, coeffs, t, u, h),
    }
}

/// One Itô step; `z` is the auxiliary standard normal used by SETDM01.
pub fn step_ito(
    problem: &SdeProblem,
    scheme: &SchemeId,
    t: f64,
    u: &StateVector,
    inc: &Increment,
    z: &[f64],
) -> Result<StateVector> {
    if !scheme.is_ito() {
        return Err(Error::CalculusMismatch {
            scheme: scheme.name(),
            calculus: Calculus::Ito.name(),
        });
    }
    Integrator::new(problem, scheme.clone(), inc.dt(), &ContourConfig::default(), None)?
        .step_ito(problem, t, u, inc, z)
}

/// Final state of a path plus optional snapshots `(t, u)`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub final_state: StateVector,
    pub snapshots: Vec<(f64, StateVector)>,
    pub steps: usize,
}

/// Applies `n_steps` steps driven by consecutive increments of `paths`.
///
/// With `snapshot_every = Some(k)` the initial state and every `k`-th state
/// are recorded. A failing step is reported as `BlowUp { step }` (one-based).
pub fn integrate_path(
    problem: &SdeProblem,
    integrator: &Integrator,
    u0: &StateVector,
    t0: f64,
    paths: &BrownianPaths,
    n_steps: usize,
    snapshot_every: Option<usize>,
) -> Result<Trajectory> {
    u0.check_len(problem.dimension())?;
    if paths.channels() != problem.channels() {
        return Err(Error::DimensionMismatch {
            expected: problem.channels(),
            found: paths.channels(),
        });
    }
    if n_steps > paths.n_steps() {
        return Err(Error::InvalidConfig(format!(
            "{n_steps} steps requested but the path has {}",
            paths.n_steps()
        )));
    }
    if n_steps > 0 && !same_dt(paths.dt(), integrator.dt()) {
        return Err(Error::InvalidConfig(format!(
            "path step {} does not match integrator step {}",
            paths.dt(),
            integrator.dt()
        )));
    }
    if snapshot_every == Some(0) {
        return Err(Error::InvalidConfig("snapshot interval must be positive".into()));
    }
    let h = integrator.dt();
    let mut u = u0.clone();
    let mut snapshots = Vec::new();
    if snapshot_every.is_some() {
        snapshots.push((t0, u.clone()));
    }
    for n in 0..n_steps {
        let t = t0 + n as f64 * h;
        let inc = Increment::new(h, paths.step(n))?;
        u = match integrator.step(problem, t, &u, &inc) {
            Ok(v) => v,
            Err(Error::NonFinite(_)) | Err(Error::StageNonFinite { .. }) => {
                return Err(Error::BlowUp { step: n + 1 })
            }
            Err(e) => return Err(e),
        };
        if let Some(k) = snapshot_every {
            if (n + 1) % k == 0 {
                snapshots.push((t0 + (n + 1) as f64 * h, u.clone()));
            }
        }
    }
    Ok(Trajectory {
        final_state: u,
        snapshots,
        steps: n_steps,
    })
}

/// Picks the eSSPIFSRK(2,2) arrangement that is second order on the split
/// linear test problem `u' = λu + μu`.
///
/// The local error of an order-2 map is `O(h³)`, so halving `h` must shrink
/// it by about 8.
pub fn calibrate_esspifsrk22_form() -> Esspifsrk22Form {
    let lambda = C64::new(-0.7, 1.3);
    let mu = C64::new(0.4, -0.2);
    let local_error = |form: Esspifsrk22Form, h: f64| -> f64 {
        let problem = SdeProblem::new(1, crate::sde_core::field(move |_, u| {
            StateVector::new(vec![u[0] * mu])
        }))
        .and_then(|p| p.with_linear_part(vec![lambda]))
        .expect("scalar problem");
        let integ = Integrator::new(
            &problem,
            SchemeId::Esspifsrk22(form),
            h,
            &ContourConfig::default(),
            None,
        )
        .expect("integrator");
        let u0 = StateVector::new(vec![C64::new(1.0, 0.0)]);
        let out = integ.step_deterministic(&problem, 0.0, &u0).expect("finite step");
        (out[0] - ((lambda + mu) * h).exp()).norm()
    };
    let passes = |form| {
        let ratio = local_error(form, 0.02) / local_error(form, 0.01);
        (ratio - 8.0).abs() < 1.0
    };
    if passes(Esspifsrk22Form::Source) || !passes(Esspifsrk22Form::Printed) {
        Esspifsrk22Form::Source
    } else {
        Esspifsrk22Form::Printed
    }
}
