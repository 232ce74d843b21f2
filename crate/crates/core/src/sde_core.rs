//! SDE problem description and the change of variables that turns a
//! deterministic one-step map into a Stratonovich integrator.
//!
//! A problem is `du = (L u + N(t,u)) dt + Σ_m g_m(t,u) ∘ dW^m` with an optional
//! diagonal `L`. Over one step of size `dt` with Brownian increments `dW`, every
//! Stratonovich scheme in this crate is the deterministic scheme applied to the
//! frozen vector field `L u + N + Σ_m g_m dW_m / dt` (see [`ModifiedField`]).

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::state::{StateVector, C64};

/// A vector field evaluation `(t, u) -> F(t, u)`.
pub type Field = Arc<dyn Fn(f64, &StateVector) -> StateVector + Send + Sync>;

/// Wraps a closure as a [`Field`].
pub fn field<F>(f: F) -> Field
where
    F: Fn(f64, &StateVector) -> StateVector + Send + Sync + 'static,
{
    Arc::new(f)
}

/// Which stochastic calculus the problem is posed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Calculus {
    Stratonovich,
    Ito,
}

impl Calculus {
    pub fn name(self) -> &'static str {
        match self {
            Calculus::Stratonovich => "Stratonovich",
            Calculus::Ito => "Itô",
        }
    }
}

/// A deterministic vector field split as `L u + N(t, u)` with diagonal `L`.
///
/// The deterministic one-step maps in [`crate::schemes`] are written against
/// this trait only.
pub trait SplitField {
    fn dim(&self) -> usize;

    /// Diagonal of the linear part, if the field is split.
    fn linear(&self) -> Option<&[C64]>;

    /// The nonlinear remainder `N(t, u)` (the whole field when unsplit).
    fn nonlinear(&self, t: f64, u: &StateVector) -> Result<StateVector>;

    /// The full field `L u + N(t, u)`.
    fn full(&self, t: f64, u: &StateVector) -> Result<StateVector> {
        let mut out = self.nonlinear(t, u)?;
        if let Some(l) = self.linear() {
            out.add_diag(l, u);
        }
        Ok(out)
    }
}

/// A single time step: `dt` and one Brownian increment per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Increment {
    dt: f64,
    dw: Vec<f64>,
}

impl Increment {
    pub fn new(dt: f64, dw: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("time step must be positive, got {dt}")));
        }
        Ok(Self { dt, dw })
    }

    /// A noiseless step with `channels` zero increments.
    pub fn deterministic(dt: f64, channels: usize) -> Result<Self> {
        Self::new(dt, vec![0.0; channels])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dw(&self) -> &[f64] {
        &self.dw
    }

    /// `dW_m / dt`, computed once per step and shared by all stages.
    pub fn rates(&self) -> Vec<f64> {
        self.dw.iter().map(|w| w / self.dt).collect()
    }
}

/// Drift, diffusions and optional diagonal linear part of an SDE.
#[derive(Clone)]
pub struct SdeProblem {
    dimension: usize,
    linear: Option<Vec<C64>>,
    linear_hash: u64,
    nonlinear: Field,
    diffusions: Vec<Field>,
    calculus: Calculus,
}

impl fmt::Debug for SdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeProblem")
            .field("dimension", &self.dimension)
            .field("split", &self.linear.is_some())
            .field("channels", &self.diffusions.len())
            .field("calculus", &self.calculus)
            .finish()
    }
}

impl SdeProblem {
    /// An unsplit Stratonovich problem with drift `f` and no noise.
    pub fn new(dimension: usize, drift: Field) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        Ok(Self {
            dimension,
            linear: None,
            linear_hash: operator_hash(&[]),
            nonlinear: drift,
            diffusions: Vec::new(),
            calculus: Calculus::Stratonovich,
        })
    }

    /// Declares a diagonal linear part. The drift given to [`SdeProblem::new`]
    /// is then the nonlinear remainder `N`, and the full drift is `L u + N`.
    pub fn with_linear_part(mut self, diag: Vec<C64>) -> Result<Self> {
        if diag.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: diag.len(),
            });
        }
        self.linear_hash = operator_hash(&diag);
        self.linear = Some(diag);
        Ok(self)
    }

    pub fn with_diffusion(mut self, g: Field) -> Self {
        self.diffusions.push(g);
        self
    }

    pub fn with_diffusions(mut self, gs: impl IntoIterator<Item = Field>) -> Self {
        self.diffusions.extend(gs);
        self
    }

    pub fn with_calculus(mut self, calculus: Calculus) -> Self {
        self.calculus = calculus;
        self
    }

    /// Same drift and linear part with every diffusion removed.
    pub fn without_noise(&self) -> Self {
        let mut p = self.clone();
        p.diffusions.clear();
        p
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn channels(&self) -> usize {
        self.diffusions.len()
    }

    pub fn calculus(&self) -> Calculus {
        self.calculus
    }

    pub fn linear_part(&self) -> Option<&[C64]> {
        self.linear.as_deref()
    }

    /// Hash of the linear diagonal, used to match precomputed coefficients.
    pub fn operator_hash(&self) -> u64 {
        self.linear_hash
    }

    pub fn nonlinear_field(&self) -> &Field {
        &self.nonlinear
    }

    pub fn diffusion_fields(&self) -> &[Field] {
        &self.diffusions
    }

    /// Evaluates `g_m(t, u)` (zero-based channel index).
    pub fn diffusion(&self, m: usize, t: f64, u: &StateVector) -> Result<StateVector> {
        let g = self.diffusions.get(m).ok_or(Error::IndexOutOfRange {
            index: m,
            channels: self.diffusions.len(),
        })?;
        g(t, u).ensure_finite("diffusion")
    }

    /// The full drift `f(t, u)`.
    pub fn drift(&self, t: f64, u: &StateVector) -> Result<StateVector> {
        self.full(t, u)
    }

    /// Freezes the noise of one step into the drift.
    pub fn modified(&self, inc: &Increment) -> Result<ModifiedField<'_>> {
        if inc.dw().len() != self.channels() {
            return Err(Error::DimensionMismatch {
                expected: self.channels(),
                found: inc.dw().len(),
            });
        }
        Ok(ModifiedField {
            problem: self,
            rates: inc.rates(),
        })
    }
}

impl SplitField for SdeProblem {
    fn dim(&self) -> usize {
        self.dimension
    }

    fn linear(&self) -> Option<&[C64]> {
        self.linear.as_deref()
    }

    fn nonlinear(&self, t: f64, u: &StateVector) -> Result<StateVector> {
        (self.nonlinear)(t, u).ensure_finite("drift")
    }
}

/// The deterministic field `L u + N + Σ_m g_m r_m` with `r_m = dW_m / dt`
/// held fixed over one step.
pub struct ModifiedField<'a> {
    problem: &'a SdeProblem,
    rates: Vec<f64>,
}

impl ModifiedField<'_> {
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }
}

impl SplitField for ModifiedField<'_> {
    fn dim(&self) -> usize {
        self.problem.dimension
    }

    fn linear(&self) -> Option<&[C64]> {
        self.problem.linear_part()
    }

    fn nonlinear(&self, t: f64, u: &StateVector) -> Result<StateVector> {
        let mut out = (self.problem.nonlinear)(t, u);
        for (g, &r) in self.problem.diffusions.iter().zip(&self.rates) {
            out.axpy(r, &g(t, u));
        }
        out.ensure_finite("modified drift")
    }
}

/// `f(t,u) + Σ_m g_m(t,u) dW_m / dt`.
pub fn modified_drift(
    problem: &SdeProblem,
    t: f64,
    u: &StateVector,
    inc: &Increment,
) -> Result<StateVector> {
    u.check_len(problem.dimension())?;
    if !u.is_finite() {
        return Err(Error::NonFinite("input state".into()));
    }
    problem.modified(inc)?.full(t, u)
}

pub(crate) fn operator_hash(diag: &[C64]) -> u64 {
    let mut h = DefaultHasher::new();
    diag.len().hash(&mut h);
    for z in diag {
        z.re.to_bits().hash(&mut h);
        z.im.to_bits().hash(&mut h);
    }
    h.finish()
}
