//! Strong-convergence and efficiency experiments on coupled Brownian paths.
//!
//! Each ensemble member draws one fine path; every tested step size sees the
//! same path, coarsened. Errors are measured at `t_max` (or over the coarsest
//! time grid) against the analytic travelling wave or a fine reference
//! computed on the same path.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelConfig, SpectralSpde};
use crate::noise::{coarsen_paths, generate_paths, BrownianPaths};
use crate::phi_functions::{CoefficientCache, ContourConfig};
use crate::schemes::{calibrate_esspifsrk22_form, integrate_path, Integrator, SchemeId};
use crate::state::StateVector;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "STOCHETD_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    /// The pathwise travelling wave (KdV soliton models only).
    Analytic,
    /// `scheme` at `dt_finest / refinement_factor` on the same path.
    FineNumerical {
        scheme: SchemeId,
        refinement_factor: usize,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    /// Relative L2 error at `t_max`.
    #[default]
    FinalTime,
    /// Relative L2 error over space and the coarsest time grid.
    SpaceTime,
}

fn default_ensemble() -> usize {
    16
}

fn default_repeats() -> usize {
    5
}

/// Everything needed to run one sweep. Step sizes are `dt_base / 2^i` for
/// `i` in `levels`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub model: ModelConfig,
    pub schemes: Vec<SchemeId>,
    pub dt_base: f64,
    pub levels: Vec<u32>,
    pub t_max: f64,
    #[serde(default = "default_ensemble")]
    pub ensemble_size: usize,
    #[serde(default)]
    pub seed: u64,
    pub reference: Reference,
    #[serde(default)]
    pub error_metric: ErrorMetric,
    #[serde(default)]
    pub contour: ContourConfig,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Tested step sizes, coarsest first.
    pub fn dts(&self) -> Vec<f64> {
        let mut lv = self.levels.clone();
        lv.sort_unstable();
        lv.dedup();
        lv.into_iter().map(|i| self.dt_base / 2f64.powi(i as i32)).collect()
    }

    fn refinement(&self) -> usize {
        match &self.reference {
            Reference::Analytic => 1,
            Reference::FineNumerical { refinement_factor, .. } => *refinement_factor,
        }
    }

    /// Fine step shared by every member's Brownian path.
    pub fn dt_fine(&self) -> f64 {
        let finest = self.dts().last().copied().unwrap_or(self.dt_base);
        finest / self.refinement() as f64
    }

    fn steps_for(&self, dt: f64) -> Result<usize> {
        let n = (self.t_max / dt).round();
        if (n * dt - self.t_max).abs() > 1e-9 * self.t_max.max(dt) {
            return Err(Error::InvalidConfig(format!(
                "t_max = {} is not a multiple of dt = {dt}",
                self.t_max
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("no schemes listed".into()));
        }
        if self.levels.is_empty() {
            return Err(Error::InvalidConfig("no step-size levels listed".into()));
        }
        if self.levels.iter().any(|&i| i > 40) {
            return Err(Error::InvalidConfig("level index above 40".into()));
        }
        if !(self.dt_base > 0.0 && self.dt_base.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt_base must be positive, got {}", self.dt_base)));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidConfig(format!("t_max must be non-negative, got {}", self.t_max)));
        }
        if self.ensemble_size == 0 {
            return Err(Error::InvalidConfig("ensemble_size must be positive".into()));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be positive".into()));
        }
        if let Reference::FineNumerical { scheme, refinement_factor } = &self.reference {
            if *refinement_factor < 2 || !refinement_factor.is_power_of_two() {
                return Err(Error::InvalidConfig(
                    "reference refinement must be a power of two >= 2".into(),
                ));
            }
            if scheme.is_ito() {
                return Err(Error::InvalidConfig("reference scheme must be Stratonovich".into()));
            }
        }
        self.contour.validate()?;
        self.model.coefficients.validate()?;
        for dt in self.dts() {
            self.steps_for(dt)?;
        }
        self.steps_for(self.dt_fine())?;
        Ok(())
    }
}

/// One `(scheme, dt)` cell of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub scheme: String,
    pub dt: f64,
    /// RMS over successful members of the relative L2 error.
    pub rms_error: f64,
    /// `sqrt(Σ‖u - u_ref‖²) / sqrt(Σ‖u_ref‖²)` over successful members.
    pub rel_error: f64,
    pub n_success: usize,
    pub n_blowup: usize,
    /// Mean wall time of one sweep over the ensemble; zero unless timed.
    pub cpu_seconds: f64,
    /// Time spent building propagators and coefficients (not in `cpu_seconds`).
    pub setup_seconds: f64,
}

impl ConvergenceRecord {
    /// More than half of the members blew up.
    pub fn failed(&self) -> bool {
        2 * self.n_blowup > self.n_success + self.n_blowup || self.n_success == 0
    }
}

/// Least-squares line through `(log2 dt, log2 error)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub scheme: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub levels_used: Vec<f64>,
}

/// Which records of a scheme enter a fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LevelWindow {
    All,
    /// The `n` smallest step sizes.
    Finest(usize),
    /// The `n` largest step sizes that did not fail.
    Coarsest(usize),
    /// Step sizes in `[lo, hi]`.
    Range(f64, f64),
}

/// Pairwise summation, order-independent up to rounding of the tree shape.
fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(Error::InvalidConfig(format!("{THREADS_ENV} must be positive")));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

/// Per-member outcome of one cell.
#[derive(Clone, Copy, Debug)]
struct CellSample {
    err_sq: f64,
    ref_sq: f64,
    seconds: f64,
}

struct Prepared {
    spde: SpectralSpde,
    dts: Vec<f64>,
    steps: Vec<usize>,
    n_fine: usize,
    dt_fine: f64,
    sample_dt: f64,
    integrators: Vec<Vec<Integrator>>,
    setup: Vec<Vec<f64>>,
    reference: Option<Integrator>,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let spde = cfg.model.build()?;
    if cfg.reference == Reference::Analytic && spde.analytic_state(0.0, 0.0).is_none() {
        return Err(Error::InvalidConfig(
            "analytic reference needs a KdV soliton under constant advection noise".into(),
        ));
    }
    let dts = cfg.dts();
    let steps = dts.iter().map(|&dt| cfg.steps_for(dt)).collect::<Result<Vec<_>>>()?;
    let dt_fine = cfg.dt_fine();
    let n_fine = cfg.steps_for(dt_fine)?;
    let cache = CoefficientCache::new();
    let mut integrators = Vec::new();
    let mut setup = Vec::new();
    for s in &cfg.schemes {
        let mut row = Vec::new();
        let mut times = Vec::new();
        for &dt in &dts {
            let t0 = Instant::now();
            row.push(Integrator::new(&spde.problem, s.clone(), dt, &cfg.contour, Some(&cache))?);
            times.push(t0.elapsed().as_secs_f64());
        }
        integrators.push(row);
        setup.push(times);
    }
    let reference = match &cfg.reference {
        Reference::Analytic => None,
        Reference::FineNumerical { scheme, .. } => Some(Integrator::new(
            &spde.problem,
            scheme.clone(),
            dt_fine,
            &cfg.contour,
            Some(&cache),
        )?),
    };
    Ok(Prepared {
        spde,
        sample_dt: dts[0],
        dts,
        steps,
        n_fine,
        dt_fine,
        integrators,
        setup,
        reference,
    })
}

/// States on the sampling grid `k · sample_dt`, `k = 1..`, or just the final
/// state for the final-time metric.
fn observed(traj_final: StateVector, snaps: Vec<(f64, StateVector)>, metric: ErrorMetric) -> Vec<StateVector> {
    match metric {
        ErrorMetric::FinalTime => vec![traj_final],
        ErrorMetric::SpaceTime => snaps.into_iter().skip(1).map(|(_, u)| u).collect(),
    }
}

fn reference_states(cfg: &ExperimentConfig, p: &Prepared, fine: &BrownianPaths) -> Result<Vec<StateVector>> {
    let every = (p.sample_dt / p.dt_fine).round() as usize;
    match &p.reference {
        Some(integ) => {
            let snap = (cfg.error_metric == ErrorMetric::SpaceTime).then_some(every);
            let tr = integrate_path(&p.spde.problem, integ, &p.spde.u0, 0.0, fine, p.n_fine, snap)?;
            Ok(observed(tr.final_state, tr.snapshots, cfg.error_metric))
        }
        None => {
            let w: Vec<f64> = if fine.channels() == 0 {
                vec![0.0; p.n_fine + 1]
            } else {
                let mut acc = vec![0.0];
                let mut s = 0.0;
                for dw in fine.channel(0) {
                    s += dw;
                    acc.push(s);
                }
                acc
            };
            let times: Vec<usize> = match cfg.error_metric {
                ErrorMetric::FinalTime => vec![p.n_fine],
                ErrorMetric::SpaceTime => (1..=p.n_fine / every).map(|k| k * every).collect(),
            };
            times
                .into_iter()
                .map(|n| {
                    p.spde
                        .analytic_state(n as f64 * p.dt_fine, w[n])
                        .expect("checked in prepare")
                })
                .collect()
        }
    }
}

fn sq_norm_sum(states: &[StateVector]) -> f64 {
    pairwise_sum(&states.iter().map(|u| u.norm().powi(2)).collect::<Vec<_>>())
}

/// Runs every cell for one member. `None` marks a blow-up.
fn run_member(
    cfg: &ExperimentConfig,
    p: &Prepared,
    member: usize,
    repeats: usize,
) -> Result<Vec<Vec<Option<CellSample>>>> {
    let problem = &p.spde.problem;
    let n_cells = p.dts.len();
    if p.n_fine == 0 {
        let sample = CellSample { err_sq: 0.0, ref_sq: p.spde.u0.norm().powi(2), seconds: 0.0 };
        return Ok(vec![vec![Some(sample); n_cells]; cfg.schemes.len()]);
    }
    let fine = generate_paths(cfg.seed, member as u64, problem.channels(), p.n_fine, p.dt_fine)?;
    let refs = match reference_states(cfg, p, &fine) {
        Ok(r) => r,
        Err(Error::BlowUp { .. }) => return Ok(vec![vec![None; n_cells]; cfg.schemes.len()]),
        Err(e) => return Err(e),
    };
    let ref_sq = sq_norm_sum(&refs);
    let coarse = p
        .dts
        .iter()
        .map(|&dt| coarsen_paths(&fine, (dt / p.dt_fine).round() as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(cfg.schemes.len());
    for row in &p.integrators {
        let mut cells = Vec::with_capacity(n_cells);
        for (l, integ) in row.iter().enumerate() {
            let every = (p.sample_dt / p.dts[l]).round() as usize;
            let snap = (cfg.error_metric == ErrorMetric::SpaceTime).then_some(every);
            let mut result = None;
            let mut seconds = 0.0;
            for _ in 0..repeats {
                let t0 = Instant::now();
                let r = integrate_path(problem, integ, &p.spde.u0, 0.0, &coarse[l], p.steps[l], snap);
                seconds += t0.elapsed().as_secs_f64();
                match r {
                    Ok(tr) => result = Some(tr),
                    Err(Error::BlowUp { .. }) => {
                        result = None;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            cells.push(result.map(|tr| {
                let got = observed(tr.final_state, tr.snapshots, cfg.error_metric);
                let diffs: Vec<StateVector> = got.iter().zip(&refs).map(|(a, b)| a.sub(b)).collect();
                CellSample {
                    err_sq: sq_norm_sum(&diffs),
                    ref_sq,
                    seconds: seconds / repeats as f64,
                }
            }));
        }
        out.push(cells);
    }
    Ok(out)
}

fn sweep(cfg: &ExperimentConfig, repeats: usize, timed: bool) -> Result<Vec<ConvergenceRecord>> {
    let p = prepare(cfg)?;
    let pool = thread_pool()?;
    let members: Vec<Result<Vec<Vec<Option<CellSample>>>>> = pool.install(|| {
        use rayon::prelude::*;
        (0..cfg.ensemble_size)
            .into_par_iter()
            .map(|m| run_member(cfg, &p, m, repeats))
            .collect()
    });
    let members = members.into_iter().collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for (s, scheme) in cfg.schemes.iter().enumerate() {
        for (l, &dt) in p.dts.iter().enumerate() {
            let ok: Vec<CellSample> = members.iter().filter_map(|m| m[s][l]).collect();
            let n_success = ok.len();
            let rel_sq: Vec<f64> = ok
                .iter()
                .map(|c| if c.ref_sq > 0.0 { c.err_sq / c.ref_sq } else { 0.0 })
                .collect();
            let (rms_error, rel_error) = if n_success == 0 {
                (f64::NAN, f64::NAN)
            } else {
                let num = pairwise_sum(&ok.iter().map(|c| c.err_sq).collect::<Vec<_>>());
                let den = pairwise_sum(&ok.iter().map(|c| c.ref_sq).collect::<Vec<_>>());
                (
                    (pairwise_sum(&rel_sq) / n_success as f64).sqrt(),
                    if den > 0.0 { (num / den).sqrt() } else { 0.0 },
                )
            };
            let cpu_seconds = if timed {
                pairwise_sum(&ok.iter().map(|c| c.seconds).collect::<Vec<_>>())
            } else {
                0.0
            };
            records.push(ConvergenceRecord {
                scheme: scheme.name(),
                dt,
                rms_error,
                rel_error,
                n_success,
                n_blowup: cfg.ensemble_size - n_success,
                cpu_seconds,
                setup_seconds: if timed { p.setup[s][l] } else { 0.0 },
            });
        }
    }
    records.sort_by(|a, b| a.scheme.cmp(&b.scheme).then(b.dt.total_cmp(&a.dt)));
    Ok(records)
}

/// Errors of every `(scheme, dt)` cell; `cpu_seconds` is left at zero so the
/// output is reproducible byte for byte.
pub fn run_strong_convergence(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRecord>> {
    sweep(cfg, 1, false)
}

/// Like [`run_strong_convergence`] but repeats each integration `repeats`
/// times and records the mean sweep time. Setup cost is reported separately.
pub fn run_efficiency(cfg: &ExperimentConfig, repeats: usize) -> Result<Vec<ConvergenceRecord>> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be positive".into()));
    }
    sweep(cfg, repeats, true)
}

/// OLS slope of `log2(rms_error)` against `log2(dt)` for one scheme. Failed
/// cells and non-positive errors are skipped.
pub fn fit_order(records: &[ConvergenceRecord], scheme: &str, window: LevelWindow) -> Result<SlopeFit> {
    let mut pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.scheme == scheme && !r.failed() && r.rms_error.is_finite() && r.rms_error > 0.0)
        .map(|r| (r.dt, r.rms_error))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let pts: Vec<(f64, f64)> = match window {
        LevelWindow::All => pts,
        LevelWindow::Finest(n) => pts.into_iter().take(n).collect(),
        LevelWindow::Coarsest(n) => {
            let k = pts.len().saturating_sub(n);
            pts.into_iter().skip(k).collect()
        }
        LevelWindow::Range(lo, hi) => pts
            .into_iter()
            .filter(|(dt, _)| *dt >= lo * (1.0 - 1e-12) && *dt <= hi * (1.0 + 1e-12))
            .collect(),
    };
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{scheme}: {} usable levels, need at least 3",
            pts.len()
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.log2()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.log2()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(SlopeFit {
        scheme: scheme.to_string(),
        slope,
        intercept,
        r_squared,
        levels_used: pts.iter().map(|p| p.0).collect(),
    })
}

pub const CSV_HEADER: &str = "scheme,dt,rms_error,rel_error,n_success,n_blowup,cpu_seconds";

/// Records as CSV with 17 significant digits.
pub fn records_to_csv(records: &[ConvergenceRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{},{},{:.16e}\n",
            r.scheme, r.dt, r.rms_error, r.rel_error, r.n_success, r.n_blowup, r.cpu_seconds
        ));
    }
    s
}

/// Parses the output of [`records_to_csv`]; setup times are not stored.
pub fn records_from_csv(text: &str) -> Result<Vec<ConvergenceRecord>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(Error::InvalidConfig("unexpected CSV header".into()));
    }
    let bad = |l: &str| Error::InvalidConfig(format!("malformed CSV row `{l}`"));
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 7 {
                return Err(bad(l));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(l));
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad(l));
            Ok(ConvergenceRecord {
                scheme: f[0].to_string(),
                dt: num(f[1])?,
                rms_error: num(f[2])?,
                rel_error: num(f[3])?,
                n_success: int(f[4])?,
                n_blowup: int(f[5])?,
                cpu_seconds: num(f[6])?,
                setup_seconds: 0.0,
            })
        })
        .collect()
}

/// Modelling choices in force, echoed into every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignFlags {
    pub esspifsrk22_form: crate::schemes::Esspifsrk22Form,
    pub setdrk2_a2_sign: String,
    pub ssp33_final_weights: String,
    pub srk4_weights: String,
    pub setdrk4_e2_stage_field: String,
    pub contour_points: usize,
    pub contour_radius: f64,
    pub contour_for_all_eigenvalues: bool,
    pub reference_shares_paths: bool,
    pub initial_condition_dealiased: bool,
    pub nyquist_mode_zeroed: bool,
    pub blowup_failure_fraction: f64,
}

impl DesignFlags {
    pub fn current(contour: &ContourConfig) -> Self {
        Self {
            esspifsrk22_form: calibrate_esspifsrk22_form(),
            setdrk2_a2_sign: "(e^z - 1 - z)/z^2".into(),
            ssp33_final_weights: "1/3, 2/3".into(),
            srk4_weights: "1/6, 1/3, 1/3, 1/6".into(),
            setdrk4_e2_stage_field: "noise-modified at a_n and b_n".into(),
            contour_points: contour.n_points,
            contour_radius: contour.radius,
            contour_for_all_eigenvalues: true,
            reference_shares_paths: true,
            initial_condition_dealiased: true,
            nyquist_mode_zeroed: true,
            blowup_failure_fraction: 0.5,
        }
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: Option<&'a ExperimentConfig>,
    seed: Option<u64>,
    fits: &'a [SlopeFit],
    setup_seconds: Vec<(String, f64, f64)>,
    design: DesignFlags,
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir` and returns their paths.
pub fn emit_report(
    records: &[ConvergenceRecord],
    fits: &[SlopeFit],
    cfg: Option<&ExperimentConfig>,
    dir: &Path,
    stem: &str,
) -> Result<(PathBuf, PathBuf)> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no records to report".into()));
    }
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    fs::write(&csv_path, records_to_csv(records))?;
    let contour = cfg.map(|c| c.contour).unwrap_or_default();
    let sidecar = Sidecar {
        config: cfg,
        seed: cfg.map(|c| c.seed),
        fits,
        setup_seconds: records.iter().map(|r| (r.scheme.clone(), r.dt, r.setup_seconds)).collect(),
        design: DesignFlags::current(&contour),
    };
    let mut f = fs::File::create(&json_path)?;
    serde_json::to_writer_pretty(&mut f, &sidecar)?;
    f.write_all(b"\n")?;
    Ok((csv_path, json_path))
}

/// Fits every scheme in `records` over `window`, skipping schemes with too
/// few usable levels.
pub fn fit_all(records: &[ConvergenceRecord], window: LevelWindow) -> Vec<SlopeFit> {
    let mut names: Vec<&str> = records.iter().map(|r| r.scheme.as_str()).collect();
    names.dedup();
    names
        .into_iter()
        .filter_map(|s| fit_order(records, s, window).ok())
        .collect()
}

/// Every cell failed.
pub fn universal_blowup(records: &[ConvergenceRecord]) -> bool {
    !records.is_empty() && records.iter().all(ConvergenceRecord::failed)
}
