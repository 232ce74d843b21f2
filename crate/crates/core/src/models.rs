//! Pseudo-spectral 1D models of the form
//!
//! `du + (c1/2 (u²)_x + c0 u_x + c2 u_xx + c3 u_xxx + c4 u_xxxx) dt + Σ_m (ξ_m u)_x ∘ dW^m = 0`
//!
//! on a periodic interval. States hold normalized Fourier coefficients
//! `û_j = (1/n) Σ_i u(x_i) e^{-2πi ij/n}` so that `u(x_i) = Σ_j û_j e^{ik_j (x_i - x_min)}`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde_core::{field, SdeProblem};
use crate::state::{StateVector, C64};

/// Periodic grid with its discrete Fourier transform.
#[derive(Clone)]
pub struct SpectralGrid1D {
    n_x: usize,
    x_min: f64,
    length: f64,
    wavenumbers: Vec<f64>,
    mask: Vec<bool>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid1D")
            .field("n_x", &self.n_x)
            .field("x_min", &self.x_min)
            .field("length", &self.length)
            .finish()
    }
}

impl SpectralGrid1D {
    /// `n_x` must be a power of two (at least 4).
    pub fn new(n_x: usize, x_min: f64, length: f64) -> Result<Self> {
        if n_x < 4 || !n_x.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "grid size must be a power of two >= 4, got {n_x}"
            )));
        }
        if !(length > 0.0 && length.is_finite() && x_min.is_finite()) {
            return Err(Error::InvalidConfig(format!("invalid domain length {length}")));
        }
        let scale = 2.0 * PI / length;
        let half = n_x / 2;
        let wavenumbers = (0..n_x)
            .map(|j| match j {
                j if j < half => j as f64 * scale,
                j if j == half => 0.0,
                j => (j as f64 - n_x as f64) * scale,
            })
            .collect();
        let mask = (0..n_x)
            .map(|j| {
                let m = if j <= half { j } else { n_x - j };
                j != half && 3 * m < n_x
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            n_x,
            x_min,
            length,
            wavenumbers,
            mask,
            forward: planner.plan_fft_forward(n_x),
            inverse: planner.plan_fft_inverse(n_x),
        })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n_x as f64
    }

    /// Collocation points `x_i = x_min + i·dx`.
    pub fn points(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.x_min + i as f64 * self.dx()).collect()
    }

    /// Wavenumbers `2π j / L` in FFT order; the Nyquist entry is zero.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// `true` for modes kept by the 2/3 rule.
    pub fn dealias_mask(&self) -> &[bool] {
        &self.mask
    }

    /// Zeroes the modes removed by the 2/3 rule.
    pub fn dealias(&self, u: &mut StateVector) {
        for (z, &keep) in u.as_mut_slice().iter_mut().zip(&self.mask) {
            if !keep {
                *z = C64::new(0.0, 0.0);
            }
        }
    }

    /// Largest retained `|k|`.
    pub fn max_retained_wavenumber(&self) -> f64 {
        self.wavenumbers
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|(k, _)| k.abs())
            .fold(0.0, f64::max)
    }

    fn transform(&self, plan: &Arc<dyn Fft<f64>>, buf: &mut [C64]) {
        let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(buf, &mut scratch);
    }

    /// Normalized coefficients of real point values.
    pub fn to_spectral(&self, values: &[f64]) -> Result<StateVector> {
        if values.len() != self.n_x {
            return Err(Error::DimensionMismatch {
                expected: self.n_x,
                found: values.len(),
            });
        }
        let mut buf: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.transform(&self.forward, &mut buf);
        let inv = 1.0 / self.n_x as f64;
        Ok(buf.into_iter().map(|z| z * inv).collect())
    }

    /// Point values; imaginary round-off is discarded.
    pub fn to_physical(&self, u: &StateVector) -> Vec<f64> {
        let mut buf = u.as_slice().to_vec();
        self.transform(&self.inverse, &mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Transforms real point values, then multiplies by `scale·(ik)` and
    /// applies the 2/3 rule.
    fn derivative_of(&self, values: Vec<f64>, scale: f64) -> StateVector {
        let mut buf: Vec<C64> = values.into_iter().map(|v| C64::new(v, 0.0)).collect();
        self.transform(&self.forward, &mut buf);
        let s = scale / self.n_x as f64;
        for ((z, &k), &keep) in buf.iter_mut().zip(&self.wavenumbers).zip(&self.mask) {
            *z = if keep { *z * C64::new(0.0, k * s) } else { C64::new(0.0, 0.0) };
        }
        StateVector::new(buf)
    }

    /// Relative L2 distance of two states, computed on the coefficients.
    pub fn relative_l2(&self, u: &StateVector, reference: &StateVector) -> f64 {
        u.sub(reference).norm() / reference.norm()
    }
}

/// `c0..c4` of the model equation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpdeCoefficients {
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub c1: f64,
    #[serde(default)]
    pub c2: f64,
    #[serde(default)]
    pub c3: f64,
    #[serde(default)]
    pub c4: f64,
}

impl SpdeCoefficients {
    /// `u_t + u u_x + u_xxx = 0`
    pub fn kdv() -> Self {
        Self { c0: 0.0, c1: 1.0, c2: 0.0, c3: 1.0, c4: 0.0 }
    }

    /// `u_t = u_xx`
    pub fn heat() -> Self {
        Self { c0: 0.0, c1: 0.0, c2: -1.0, c3: 0.0, c4: 0.0 }
    }

    /// `u_t + u u_x + u_xx + u_xxxx = 0`
    pub fn kuramoto_sivashinsky() -> Self {
        Self { c0: 0.0, c1: 1.0, c2: 1.0, c3: 0.0, c4: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.c0, self.c1, self.c2, self.c3, self.c4];
        if all.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("non-finite model coefficient".into()));
        }
        if all.iter().all(|&c| c == 0.0) {
            return Err(Error::InvalidConfig("all model coefficients are zero".into()));
        }
        Ok(())
    }
}

/// Noise fields `ξ_m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseBasisSpec {
    /// `ξ_m(x) = sin(2πxm)/(100m)`, `m = 1..M`
    SineDecay { m: usize },
    /// Disjoint smooth bumps of width `L/(M+1)` centred at `x_min + j·w`.
    SmoothBump { m: usize },
    /// A single constant field `ξ ≡ a`.
    ConstantAdvection { a: f64 },
    /// No noise.
    None,
}

impl NoiseBasisSpec {
    pub fn channels(&self) -> usize {
        match *self {
            NoiseBasisSpec::SineDecay { m } | NoiseBasisSpec::SmoothBump { m } => m,
            NoiseBasisSpec::ConstantAdvection { .. } => 1,
            NoiseBasisSpec::None => 0,
        }
    }

    /// Point values of every `ξ_m` on the grid.
    pub fn tabulate(&self, grid: &SpectralGrid1D) -> Vec<Vec<f64>> {
        let xs = grid.points();
        match *self {
            NoiseBasisSpec::SineDecay { m } => (1..=m)
                .map(|j| {
                    let jf = j as f64;
                    xs.iter().map(|x| (2.0 * PI * x * jf).sin() / (100.0 * jf)).collect()
                })
                .collect(),
            NoiseBasisSpec::SmoothBump { m } => {
                let w = grid.length() / (m as f64 + 1.0);
                (1..=m)
                    .map(|j| {
                        let c = grid.x_min() + j as f64 * w;
                        xs.iter().map(|&x| smooth_bump((x - c) * 2.0 / w)).collect()
                    })
                    .collect()
            }
            NoiseBasisSpec::ConstantAdvection { a } => vec![vec![a; xs.len()]],
            NoiseBasisSpec::None => Vec::new(),
        }
    }
}

/// `exp(-1/(1-s²))` for `|s| < 1`, zero outside.
fn smooth_bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// Initial conditions used by the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `exp(-50 (x - 0.5)²)`
    Gaussian,
    /// `3β sech²(√β x / 2)`
    Soliton { beta: f64 },
}

/// Per-mode linear symbol `L(k) = -c0 ik + c2 k² + c3 ik³ - c4 k⁴`.
///
/// With this sign the KdV soliton travels towards `+x`.
pub fn linear_symbol(coeffs: &SpdeCoefficients, grid: &SpectralGrid1D) -> Vec<C64> {
    grid.wavenumbers()
        .iter()
        .map(|&k| {
            C64::new(coeffs.c2 * k * k - coeffs.c4 * k.powi(4), -coeffs.c0 * k + coeffs.c3 * k.powi(3))
        })
        .collect()
}

/// `N(u) = -(ik c1/2) (u²)^`, dealiased.
pub fn nonlinear_flux(u_hat: &StateVector, grid: &SpectralGrid1D, c1: f64) -> Result<StateVector> {
    u_hat.check_len(grid.n_x())?;
    if c1 == 0.0 {
        return Ok(StateVector::zeros(grid.n_x()));
    }
    let u = grid.to_physical(u_hat);
    let sq = u.into_iter().map(|v| v * v).collect();
    grid.derivative_of(sq, -0.5 * c1).ensure_finite("nonlinear flux")
}

/// `g(u) = -ik (ξ u)^`, dealiased.
pub fn diffusion_field(u_hat: &StateVector, grid: &SpectralGrid1D, xi: &[f64]) -> Result<StateVector> {
    u_hat.check_len(grid.n_x())?;
    if xi.len() != grid.n_x() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_x(),
            found: xi.len(),
        });
    }
    let u = grid.to_physical(u_hat);
    let prod = u.into_iter().zip(xi).map(|(v, x)| v * x).collect();
    grid.derivative_of(prod, -1.0).ensure_finite("diffusion field")
}

/// `g(u) = -a ik û`: the constant-field case, without transforms.
fn constant_advection(u_hat: &StateVector, grid: &SpectralGrid1D, a: f64) -> StateVector {
    u_hat
        .iter()
        .zip(grid.wavenumbers())
        .zip(grid.dealias_mask())
        .map(|((z, &k), &keep)| if keep { z * C64::new(0.0, -a * k) } else { C64::new(0.0, 0.0) })
        .collect()
}

/// `3β sech²(√β/2 (x - βt - aW))`, wrapped periodically onto the grid domain.
pub fn travelling_wave_solution(
    x: &[f64],
    t: f64,
    beta: f64,
    a: f64,
    w_t: f64,
    grid: &SpectralGrid1D,
) -> Vec<f64> {
    let len = grid.length();
    let centre = grid.x_min() + 0.5 * len;
    let shift = beta * t + a * w_t;
    x.iter()
        .map(|&xi| {
            let s = xi - shift;
            let s = s - len * ((s - centre) / len).round();
            let sech = 1.0 / (0.5 * beta.sqrt() * s).cosh();
            3.0 * beta * sech * sech
        })
        .collect()
}

/// Assembles `du = (L u + N(u)) dt + Σ_m g_m(u) ∘ dW^m`.
pub fn build_problem(
    grid: &SpectralGrid1D,
    coeffs: &SpdeCoefficients,
    basis: &NoiseBasisSpec,
) -> Result<SdeProblem> {
    coeffs.validate()?;
    let g = Arc::new(grid.clone());
    let c1 = coeffs.c1;
    let gn = Arc::clone(&g);
    let drift = field(move |_, u| match nonlinear_flux(u, &gn, c1) {
        Ok(v) => v,
        Err(_) => StateVector::new(vec![C64::new(f64::NAN, 0.0); u.len()]),
    });
    let mut problem = SdeProblem::new(grid.n_x(), drift)?.with_linear_part(linear_symbol(coeffs, grid))?;
    match *basis {
        NoiseBasisSpec::ConstantAdvection { a } => {
            let gc = Arc::clone(&g);
            problem = problem.with_diffusion(field(move |_, u| constant_advection(u, &gc, a)));
        }
        _ => {
            for xi in basis.tabulate(grid) {
                let gm = Arc::clone(&g);
                problem = problem.with_diffusion(field(move |_, u| match diffusion_field(u, &gm, &xi) {
                    Ok(v) => v,
                    Err(_) => StateVector::new(vec![C64::new(f64::NAN, 0.0); u.len()]),
                }));
            }
        }
    }
    Ok(problem)
}

/// Grid, coefficients, noise and initial condition of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_x: usize,
    pub x_min: f64,
    pub length: f64,
    pub coefficients: SpdeCoefficients,
    pub noise: NoiseBasisSpec,
    pub initial: InitialCondition,
}

impl ModelConfig {
    /// KdV on `[0, 1)` with the Gaussian initial condition.
    pub fn kdv_unit(n_x: usize, noise: NoiseBasisSpec) -> Self {
        Self {
            n_x,
            x_min: 0.0,
            length: 1.0,
            coefficients: SpdeCoefficients::kdv(),
            noise,
            initial: InitialCondition::Gaussian,
        }
    }

    /// KdV soliton on `[-5, 5)` under constant advection noise `a`.
    pub fn kdv_travelling_wave(n_x: usize, beta: f64, a: f64) -> Self {
        let noise = if a == 0.0 {
            NoiseBasisSpec::None
        } else {
            NoiseBasisSpec::ConstantAdvection { a }
        };
        Self {
            n_x,
            x_min: -5.0,
            length: 10.0,
            coefficients: SpdeCoefficients::kdv(),
            noise,
            initial: InitialCondition::Soliton { beta },
        }
    }

    pub fn grid(&self) -> Result<SpectralGrid1D> {
        SpectralGrid1D::new(self.n_x, self.x_min, self.length)
    }

    /// Builds the grid, problem and dealiased initial state.
    pub fn build(&self) -> Result<SpectralSpde> {
        let grid = self.grid()?;
        let problem = build_problem(&grid, &self.coefficients, &self.noise)?;
        let u0 = initial_state(&grid, &self.initial)?;
        Ok(SpectralSpde {
            config: self.clone(),
            grid,
            problem,
            u0,
        })
    }
}

/// Spectrum of the initial condition with the 2/3 rule applied, so the
/// discarded modes start (and stay) exactly zero.
pub fn initial_state(grid: &SpectralGrid1D, ic: &InitialCondition) -> Result<StateVector> {
    let xs = grid.points();
    let values: Vec<f64> = match *ic {
        InitialCondition::Gaussian => xs.iter().map(|x| (-50.0 * (x - 0.5) * (x - 0.5)).exp()).collect(),
        InitialCondition::Soliton { beta } => {
            if !(beta > 0.0) {
                return Err(Error::InvalidConfig(format!("soliton needs beta > 0, got {beta}")));
            }
            travelling_wave_solution(&xs, 0.0, beta, 0.0, 0.0, grid)
        }
    };
    let mut u = grid.to_spectral(&values)?;
    grid.dealias(&mut u);
    Ok(u)
}

/// A fully assembled spectral SPDE.
#[derive(Clone, Debug)]
pub struct SpectralSpde {
    pub config: ModelConfig,
    pub grid: SpectralGrid1D,
    pub problem: SdeProblem,
    pub u0: StateVector,
}

impl SpectralSpde {
    /// Analytic travelling wave at time `t` for Brownian value `w_t`, as a
    /// dealiased spectrum. `None` unless the model is a KdV soliton under
    /// constant (or no) advection noise.
    pub fn analytic_state(&self, t: f64, w_t: f64) -> Option<Result<StateVector>> {
        let beta = match self.config.initial {
            InitialCondition::Soliton { beta } => beta,
            _ => return None,
        };
        if self.config.coefficients != SpdeCoefficients::kdv() {
            return None;
        }
        let a = match self.config.noise {
            NoiseBasisSpec::ConstantAdvection { a } => a,
            NoiseBasisSpec::None => 0.0,
            _ => return None,
        };
        let values = travelling_wave_solution(&self.grid.points(), t, beta, a, w_t, &self.grid);
        Some(self.grid.to_spectral(&values).map(|mut u| {
            self.grid.dealias(&mut u);
            u
        }))
    }
}

/// Writes snapshots as CSV rows `t,x,u`.
pub fn write_snapshots_csv<W: Write>(
    mut w: W,
    grid: &SpectralGrid1D,
    snapshots: &[(f64, StateVector)],
) -> Result<()> {
    writeln!(w, "t,x,u")?;
    let xs = grid.points();
    for (t, u) in snapshots {
        for (x, v) in xs.iter().zip(grid.to_physical(u)) {
            writeln!(w, "{t:.17e},{x:.17e},{v:.17e}")?;
        }
    }
    Ok(())
}

const SNAP_MAGIC: &[u8; 4] = b"SNAP";

/// Binary snapshots: per slice, `SNAP`, `n_x` (u64), `t` (f64) and `n_x`
/// point values (f64), all little-endian.
pub fn write_snapshots_binary<W: Write>(
    mut w: W,
    grid: &SpectralGrid1D,
    snapshots: &[(f64, StateVector)],
) -> Result<()> {
    for (t, u) in snapshots {
        w.write_all(SNAP_MAGIC)?;
        w.write_all(&(grid.n_x() as u64).to_le_bytes())?;
        w.write_all(&t.to_le_bytes())?;
        for v in grid.to_physical(u) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads slices written by [`write_snapshots_binary`].
pub fn read_snapshots_binary<R: Read>(mut r: R) -> Result<Vec<(f64, Vec<f64>)>> {
    let mut out = Vec::new();
    loop {
        let mut magic = [0u8; 4];
        match r.read_exact(&mut magic) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        if &magic != SNAP_MAGIC {
            return Err(Error::InvalidConfig("bad snapshot magic".into()));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let t = f64::from_le_bytes(b8);
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8)?;
            vals.push(f64::from_le_bytes(b8));
        }
        out.push((t, vals));
    }
    Ok(out)
}
