//! `duoscale` command-line interface: plain-text config in, plot-ready CSV out.

// `!(x <= y)`-style guards reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use duoscale::asymptotics::FirstOrderParams;
use duoscale::config::{parse_timeseries_csv, RunConfig};
use duoscale::error::Error;
use duoscale::integrate::{
    expansion_verify, integrate_rk4, integrate_theta, Method, TimeSeries, VerifyMode,
};
use duoscale::response::{backbone_detuning, frf_trace, Branch, BranchSeed};
use duoscale::spectral::{peak_detect, spectrum_scan};

#[derive(Parser)]
#[command(
    name = "duoscale",
    about = "Double-scale asymptotics of spring-mass chains with a local strong cubic nonlinearity",
    long_about = "Analyses a chain of masses with one strongly nonlinear spring: modal \
decomposition, frequency-response and backbone curves from the slow-flow equations, full \
time-domain integration, spectral analysis, and verification of the asymptotic expansion.\n\n\
Configuration is an INI-style file with [system], [integrator], [initial] and [analysis] \
sections; keys not set fall back to the defaults below. Output is RFC-4180 CSV with \
17-significant-digit floats.\n\n\
Defaults: mass=1, stiffness=1, c=1, d=1, p=1, lambda=0 | method=theta, theta=0.5, dt=0.01 | \
u0=v0=0 | sigma range [-1,3] x 201, amplitude range [0,2] x 201, epsilons 0.1,0.05,0.025, \
gamma=1, spectral grid [0.1,3] x 401, component=1, min_prominence=10, transient_fraction=0.1, \
stride=1.\n\n\
The environment variable DUOSCALE_THREADS caps the worker pool used for spectral scans.\n\
Exit codes: 0 success, 2 configuration error, 3 numerical failure."
)]
struct Cli {
    /// Path to the INI-style run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output CSV path (default: standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed end for the frequency-response continuation.
    #[arg(long, global = true, value_enum, default_value_t = SeedArg::Lower)]
    seed_branch: SeedArg,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeedArg {
    Lower,
    Upper,
}

impl From<SeedArg> for BranchSeed {
    fn from(s: SeedArg) -> BranchSeed {
        match s {
            SeedArg::Lower => BranchSeed::Lower,
            SeedArg::Upper => BranchSeed::Upper,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Modal frequencies and shapes of the linear chain.
    Modes,
    /// Integrate the full nonlinear equations.
    Simulate,
    /// Stationary frequency-response curve with stability and branches.
    Frf,
    /// Free-vibration backbone curve over an amplitude grid.
    Backbone,
    /// Almost-periodic Fourier spectrum of a trajectory.
    Spectrum {
        /// Analyse this CSV trajectory instead of simulating from the config.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Expansion-boundedness verification over an epsilon ladder.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(csv) => {
            if let Some(path) = &cli.out {
                if let Err(e) = std::fs::write(path, csv) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(3);
                }
            } else {
                print!("{csv}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::parse(&text)
}

fn run(cli: &Cli) -> Result<String, Error> {
    match &cli.command {
        Command::Modes => cmd_modes(&load_config(cli)?),
        Command::Simulate => cmd_simulate(&load_config(cli)?),
        Command::Frf => cmd_frf(&load_config(cli)?, cli.seed_branch.into()),
        Command::Backbone => cmd_backbone(&load_config(cli)?),
        Command::Spectrum { input } => match input {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                let series = parse_timeseries_csv(&text)?;
                // spectral parameters still come from the config when given
                let cfg = if cli.config.is_some() {
                    Some(load_config(cli)?)
                } else {
                    None
                };
                cmd_spectrum_series(&series, cfg.as_ref())
            }
            None => {
                let cfg = load_config(cli)?;
                let series = simulate(&cfg)?;
                cmd_spectrum_series(&series, Some(&cfg))
            }
        },
        Command::Verify => cmd_verify(&load_config(cli)?),
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn cmd_modes(cfg: &RunConfig) -> Result<String, Error> {
    let system = cfg.build_system()?;
    let basis = system.basis();
    let n = system.n;
    let mut out = String::from("k,omega");
    for j in 1..=n {
        let _ = write!(out, ",phi_{j}");
    }
    out.push_str(",delta_p_phi\n");
    for k in 0..n {
        let _ = write!(out, "{},{}", k + 1, num(basis.frequencies[k]));
        for j in 0..n {
            let _ = write!(out, ",{}", num(basis.modes[(j, k)]));
        }
        let _ = writeln!(out, ",{}", num(basis.gaps[k]));
    }
    Ok(out)
}

fn simulate(cfg: &RunConfig) -> Result<TimeSeries, Error> {
    let system = cfg.build_system()?;
    let icfg = cfg.integrator_config()?;
    let (u0, v0) = cfg.initial_state(&system)?;
    match icfg.method {
        Method::Theta => integrate_theta(&system, &u0, &v0, &icfg),
        Method::Rk4 => integrate_rk4(&system, &u0, &v0, &icfg),
    }
}

fn cmd_simulate(cfg: &RunConfig) -> Result<String, Error> {
    let series = simulate(cfg)?;
    let n = series.dim;
    let mut out = String::from("t");
    for j in 1..=n {
        let _ = write!(out, ",u_{j}");
    }
    for j in 1..=n {
        let _ = write!(out, ",v_{j}");
    }
    out.push('\n');
    let stride = cfg.analysis.stride;
    for i in (0..series.len()).step_by(stride) {
        let _ = write!(out, "{}", num(series.time(i)));
        for &u in series.displacement(i) {
            let _ = write!(out, ",{}", num(u));
        }
        for &v in series.velocity(i) {
            let _ = write!(out, ",{}", num(v));
        }
        out.push('\n');
    }
    Ok(out)
}

fn cmd_frf(cfg: &RunConfig, seed: BranchSeed) -> Result<String, Error> {
    let system = cfg.build_system()?;
    if !system.is_forced() {
        return Err(Error::Config("frf needs nonzero forcing".into()));
    }
    let params = FirstOrderParams::from_system(&system)?;
    let a = &cfg.analysis;
    let curve = frf_trace(&params, a.sigma_min, a.sigma_max, a.n_sigma, seed)?;
    let mut out = String::from("sigma,a,beta,det_J,stable,branch,sigma_backbone\n");
    for (pt, branch) in &curve.points {
        let branch = match branch {
            Branch::Main => "main",
            Branch::FoldBack => "fold_back",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            num(pt.sigma),
            num(pt.a),
            num(pt.beta),
            num(pt.det),
            pt.stable,
            branch,
            num(backbone_detuning(&params, pt.a)),
        );
    }
    Ok(out)
}

fn cmd_backbone(cfg: &RunConfig) -> Result<String, Error> {
    let system = cfg.build_system()?;
    let params = FirstOrderParams::from_system(&system)?;
    let a = &cfg.analysis;
    if !(a.a_min <= a.a_max) || a.n_a < 2 {
        return Err(Error::Config("need a_min <= a_max and n_a >= 2".into()));
    }
    let mut out = String::from("a,nu_epsilon\n");
    for i in 0..a.n_a {
        let amp = a.a_min + (a.a_max - a.a_min) * i as f64 / (a.n_a - 1) as f64;
        let nu = duoscale::asymptotics::backbone_frequency(&params, amp);
        let _ = writeln!(out, "{},{}", num(amp), num(nu));
    }
    Ok(out)
}

fn cmd_spectrum_series(series: &TimeSeries, cfg: Option<&RunConfig>) -> Result<String, Error> {
    let (lmin, lmax, ngrid, component, transient, prominence) = match cfg {
        Some(c) => (
            c.analysis.lambda_min,
            c.analysis.lambda_max,
            c.analysis.n_lambda,
            c.analysis.component - 1,
            c.analysis.transient_fraction,
            c.analysis.min_prominence,
        ),
        None => (0.1, 3.0, 401, 0, 0.1, 10.0),
    };
    let spectrum = spectrum_scan(series, component, lmin, lmax, ngrid, transient)?;
    let peaks = peak_detect(&spectrum, prominence)?;
    let mut out = String::from("lambda,re_alpha,im_alpha,abs_alpha\n");
    for (i, &lambda) in spectrum.frequencies.iter().enumerate() {
        let c = spectrum.coefficients[i];
        let _ = writeln!(
            out,
            "{},{},{},{}",
            num(lambda),
            num(c.re),
            num(c.im),
            num(c.norm())
        );
    }
    for p in &peaks {
        let _ = writeln!(
            out,
            "# peak: lambda={} magnitude={} prominence={}",
            num(p.frequency),
            num(p.magnitude),
            num(p.prominence)
        );
    }
    Ok(out)
}

fn cmd_verify(cfg: &RunConfig) -> Result<String, Error> {
    let system = cfg.build_system()?;
    if system.n != 1 {
        return Err(Error::Config("verify expects a 1-DOF system".into()));
    }
    let a = &cfg.analysis;
    let eps = system.spring.epsilon;
    let a0 = match (cfg.initial.a0, &cfg.initial.u0) {
        (Some(a0), _) => a0,
        (None, Some(u0)) => u0[0] / eps,
        (None, None) => return Err(Error::Config("verify needs a0 (or u0) in [initial]".into())),
    };
    let mode = if system.is_forced() {
        VerifyMode::Forced {
            a0,
            beta0: cfg.initial.beta0.unwrap_or(0.0),
            figure_convention: a.figure_convention,
        }
    } else {
        VerifyMode::Free { a0 }
    };
    let report = expansion_verify(&system, &a.epsilons, a.gamma, mode, cfg.integrator.dt)?;
    let mut out = String::from("epsilon,horizon,sup_remainder,ratio\n");
    for i in 0..report.epsilons.len() {
        let ratio = if i == 0 {
            String::new()
        } else {
            num(report.growth_ratios[i - 1])
        };
        let _ = writeln!(
            out,
            "{},{},{},{}",
            num(report.epsilons[i]),
            num(report.horizons[i]),
            num(report.sup_remainders[i]),
            ratio
        );
    }
    let _ = writeln!(out, "# verdict: {}", report.verdict());
    eprintln!(
        "expansion verdict: {} (max growth ratio {:.3})",
        report.verdict(),
        report
            .growth_ratios
            .iter()
            .fold(f64::NEG_INFINITY, |m, &r| m.max(r))
    );
    Ok(out)
}
