use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use stochetd::harness::{fit_all, universal_blowup};
use stochetd::models::{write_snapshots_binary, write_snapshots_csv};
use stochetd::{
    emit_report, etd_coefficient_set, generate_paths, integrate_path, linear_symbol, run_efficiency,
    run_strong_convergence, ContourConfig, ConvergenceRecord, Error, EtdScheme, ExperimentConfig, Integrator,
    LevelWindow, SchemeId, SlopeFit, SpdeCoefficients, SpectralGrid1D,
};

#[derive(Parser)]
#[command(name = "stochetd", version, about = "Strong-convergence experiments for convenient Stratonovich schemes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error sweep over the configured step sizes; writes convergence.csv/.json.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fit only the N finest levels (default: all).
        #[arg(long)]
        finest: Option<usize>,
    },
    /// Timed sweep; writes efficiency.csv/.json.
    Efficiency {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// One trajectory of the first configured scheme at the finest step,
    /// written as `snapshots` equally spaced slices (plus the initial one).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        snapshots: usize,
        #[arg(long)]
        out: PathBuf,
        /// Override the scheme.
        #[arg(long)]
        scheme: Option<String>,
        /// Ensemble member whose Brownian path is used.
        #[arg(long, default_value_t = 0)]
        member: u64,
    },
    /// Tabulates the exponential coefficients of a scheme for a model symbol.
    PhiCheck {
        #[arg(long)]
        scheme: String,
        #[arg(long, value_enum, default_value_t = ModelKind::Kdv)]
        model: ModelKind,
        #[arg(long)]
        nx: usize,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
        /// Domain length (default 10 for KdV, 32π for KS, 2π for heat).
        #[arg(long)]
        length: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Kdv,
    Ks,
    Heat,
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

fn config_error(e: impl std::fmt::Display) -> Failure {
    Failure { code: 2, message: e.to_string() }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_)
            | Error::UnknownScheme(_)
            | Error::Json(_)
            | Error::CalculusMismatch { .. }
            | Error::MissingLinearPart
            | Error::InvalidFactor { .. } => 2,
            Error::BlowUp { .. } => 3,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    let cfg = ExperimentConfig::load(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    cfg.validate().map_err(config_error)?;
    Ok(cfg)
}

fn print_fits(fits: &[SlopeFit]) {
    for f in fits {
        println!("{:<20} slope {:>7.3}  r² {:.4}  ({} levels)", f.scheme, f.slope, f.r_squared, f.levels_used.len());
    }
}

fn report(
    records: &[ConvergenceRecord],
    cfg: &ExperimentConfig,
    window: LevelWindow,
    out: &Path,
    stem: &str,
) -> Result<(), Failure> {
    let fits = fit_all(records, window);
    let (csv, json) = emit_report(records, &fits, Some(cfg), out, stem)?;
    print_fits(&fits);
    println!("wrote {} and {}", csv.display(), json.display());
    if universal_blowup(records) {
        return Err(Failure { code: 3, message: "every cell blew up".into() });
    }
    Ok(())
}

fn simulate(config: &Path, snapshots: usize, out: &Path, scheme: Option<String>, member: u64) -> Result<(), Failure> {
    let cfg = load(config)?;
    let scheme = match scheme {
        Some(s) => s.parse::<SchemeId>()?,
        None => cfg.schemes[0].clone(),
    };
    let dt = *cfg.dts().last().expect("validated");
    let n_steps = (cfg.t_max / dt).round() as usize;
    if snapshots == 0 || n_steps % snapshots != 0 {
        return Err(config_error(format!("{snapshots} snapshots do not divide {n_steps} steps")));
    }
    let spde = cfg.model.build()?;
    let integ = Integrator::new(&spde.problem, scheme.clone(), dt, &cfg.contour, None)?;
    let paths = generate_paths(cfg.seed, member, spde.problem.channels(), n_steps.max(1), dt)?;
    let traj = integrate_path(&spde.problem, &integ, &spde.u0, 0.0, &paths, n_steps, Some(n_steps / snapshots))?;
    std::fs::create_dir_all(out).map_err(Error::from)?;
    let csv = out.join("snapshots.csv");
    let bin = out.join("snapshots.snap");
    write_snapshots_csv(BufWriter::new(File::create(&csv).map_err(Error::from)?), &spde.grid, &traj.snapshots)?;
    write_snapshots_binary(BufWriter::new(File::create(&bin).map_err(Error::from)?), &spde.grid, &traj.snapshots)?;
    println!("{scheme}: {n_steps} steps of {dt:e}, {} slices", traj.snapshots.len());
    println!("wrote {} and {}", csv.display(), bin.display());
    Ok(())
}

fn phi_check(scheme: &str, model: ModelKind, nx: usize, dt: f64, out: &Path, length: Option<f64>) -> Result<(), Failure> {
    let etd = match scheme.parse::<SchemeId>()? {
        SchemeId::Setdrk2 => EtdScheme::Setdrk2,
        SchemeId::Setdrk3 => EtdScheme::Setdrk3,
        SchemeId::Setdrk4 => EtdScheme::Setdrk4,
        other => return Err(config_error(format!("{other} has no exponential coefficient table"))),
    };
    let (coefficients, default_length) = match model {
        ModelKind::Kdv => (SpdeCoefficients::kdv(), 10.0),
        ModelKind::Ks => (SpdeCoefficients::kuramoto_sivashinsky(), 32.0 * std::f64::consts::PI),
        ModelKind::Heat => (SpdeCoefficients::heat(), 2.0 * std::f64::consts::PI),
    };
    let grid = SpectralGrid1D::new(nx, 0.0, length.unwrap_or(default_length))?;
    let eig = linear_symbol(&coefficients, &grid);
    let set = etd_coefficient_set(etd, &eig, dt, &ContourConfig::default())?;
    let mut w = BufWriter::new(File::create(out).map_err(Error::from)?);
    let io = |e: std::io::Error| Failure::from(Error::from(e));
    writeln!(w, "k,eigenvalue_re,eigenvalue_im,coeff_name,value_re,value_im").map_err(io)?;
    for (name, values) in set.coefficients() {
        for ((k, l), v) in grid.wavenumbers().iter().zip(&eig).zip(values) {
            writeln!(w, "{k:.16e},{:.16e},{:.16e},{name},{:.16e},{:.16e}", l.re, l.im, v.re, v.im).map_err(io)?;
        }
    }
    w.flush().map_err(io)?;
    println!("wrote {} ({} coefficients × {nx} modes)", out.display(), etd.coefficient_names().len());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Convergence { config, out, finest } => {
            let cfg = load(&config)?;
            let records = run_strong_convergence(&cfg)?;
            let window = finest.map_or(LevelWindow::All, LevelWindow::Finest);
            report(&records, &cfg, window, &out, "convergence")
        }
        Command::Efficiency { config, repeats, out } => {
            let cfg = load(&config)?;
            let records = run_efficiency(&cfg, repeats)?;
            report(&records, &cfg, LevelWindow::All, &out, "efficiency")
        }
        Command::Simulate { config, snapshots, out, scheme, member } => simulate(&config, snapshots, &out, scheme, member),
        Command::PhiCheck { scheme, model, nx, dt, out, length } => phi_check(&scheme, model, nx, dt, &out, length),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
