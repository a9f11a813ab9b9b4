//! `mbolab`: simulation, gauge and normal-form checks, and estimate campaigns from one binary.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mbolab::estimates::{Curve, EstimateError};
use mbolab::gauge::GaugeError;
use mbolab::normal_form::{EvalMode, NormalFormError};
use mbolab::solver::SolverError;
use mbolab::Sigma;

use config::{Datum, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Invariant(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::BadConfig(_) | SolverError::Io(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<GaugeError> for CliError {
    fn from(e: GaugeError) -> Self {
        match e {
            GaugeError::NotReal | GaugeError::InconsistentPair { .. } => CliError::Invariant(e.to_string()),
            GaugeError::Degenerate(_) => CliError::Config(e.to_string()),
            GaugeError::Spectral(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<NormalFormError> for CliError {
    fn from(e: NormalFormError) -> Self {
        match e {
            NormalFormError::Gauge(g) => g.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<EstimateError> for CliError {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::Gauge(g) => g.into(),
            EstimateError::Spectral(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "mbolab", version, about = "Spectral laboratory for the periodic modified Benjamin-Ono equation")]
struct Cli {
    /// Run configuration (TOML, or JSON with a .json extension); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for reports named <subcommand>-<hash>.{json,csv} [default: .]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads [default: available parallelism]
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for every random draw [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the effective configuration and exit (`--dump-config=json` for the JSON mirror).
    #[arg(long, global = true, num_args = 0..=1, require_equals = true, default_missing_value = "toml")]
    dump_config: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Default)]
struct SolverFlags {
    /// Frequency window N [default: 64]
    #[arg(long)]
    n_max: Option<usize>,
    /// Time step [default: 1e-4]
    #[arg(long)]
    dt: Option<f64>,
    /// Nonlinearity sign, 1 or -1 [default: -1]
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<i64>,
    /// Two-mode datum a cos x + b cos 2x: amplitude a [default: 0.5]
    #[arg(long)]
    a: Option<f64>,
    /// Two-mode datum amplitude b [default: 0.25]
    #[arg(long)]
    b: Option<f64>,
    /// Use the seeded colored datum with this band instead of the two-mode datum
    #[arg(long)]
    colored_band: Option<usize>,
    /// Sobolev index s [default: 0.6]
    #[arg(long)]
    s: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate mBO' and write the trajectory (JSONL), conservation report and observables.
    Simulate {
        #[command(flatten)]
        solver: SolverFlags,
        /// Final time [default: 1]
        #[arg(long = "T", alias = "t-final")]
        t_final: Option<f64>,
        /// Store every k-th step [default: 10]
        #[arg(long)]
        sample_every: Option<usize>,
        /// Trajectory path [default: <out-dir>/simulate-<hash>.jsonl]
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Central-difference residual of the v equation and of the weight derivatives along a trajectory.
    GaugeCheck {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Sobolev index s; residuals are measured in H^{s-1} [default: 0.6]
        #[arg(long)]
        s: Option<f64>,
        /// Sample points checked [default: 20]
        #[arg(long)]
        points: Option<usize>,
        /// CSV report path
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Normal-form families after J reductions and the telescoping residual.
    NfExpand {
        #[arg(long)]
        traj: Option<PathBuf>,
        /// Generation 1, 2 or 3 (3 needs --mode mc) [default: 1]
        #[arg(long = "J")]
        j: Option<usize>,
        /// Resonance threshold M [default: 64]
        #[arg(long = "M")]
        m: Option<f64>,
        /// [default: 2^-10]
        #[arg(long)]
        eta: Option<f64>,
        /// exact or mc [default: exact]
        #[arg(long)]
        mode: Option<String>,
        /// Monte-Carlo samples per mode and batch [default: 20000]
        #[arg(long)]
        samples: Option<usize>,
        /// Lattice window [default: 12]
        #[arg(long)]
        n_lattice: Option<usize>,
        /// Upper limit of the time window [default: 0.0128]
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Worst LHS/RHS ratios of the quintic estimates over random inputs.
    VerifyEstimates {
        /// Estimate tag or `all` [default: all]
        #[arg(long)]
        id: Option<String>,
        /// [default: 0.6]
        #[arg(long)]
        s: Option<f64>,
        /// [default: (s - 1/2)/4]
        #[arg(long)]
        delta: Option<f64>,
        /// [default: 2^-10]
        #[arg(long)]
        eta: Option<f64>,
        /// Comma-separated lattice sizes [default: 16,32,64]
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// [default: 200]
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Lattice-point counts on the ellipse / hyperbola and the counting-fact scans.
    CountLemma {
        /// ellipse or hyperbola [default: hyperbola]
        #[arg(long)]
        curve: Option<String>,
        /// Largest radius, R = 2^1..rmax [default: 4096]
        #[arg(long)]
        rmax: Option<i64>,
        /// Large-mu probes, hyperbola only [default: 1000]
        #[arg(long)]
        probes: Option<usize>,
        /// Also scan both counting facts up to R = 2^k [default: off]
        #[arg(long)]
        fact_k_max: Option<u32>,
        /// Also run the exhaustive emptiness scan to this bound [default: off]
        #[arg(long)]
        emptiness_bound: Option<i64>,
        #[arg(long)]
        eta: Option<f64>,
        /// CSV report path
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Divergence of the dt and dt/2 schemes from one datum.
    TwinProbe {
        #[command(flatten)]
        solver: SolverFlags,
        /// Horizon [default: 0.5]
        #[arg(long = "T", alias = "horizon")]
        horizon: Option<f64>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_solver(cfg: &mut RunConfig, f: SolverFlags) -> Result<(), CliError> {
    set(&mut cfg.n_max, f.n_max);
    set(&mut cfg.dt, f.dt);
    set(&mut cfg.s, f.s);
    if let Some(sg) = f.sigma {
        cfg.sigma = Sigma::try_from(sg).map_err(CliError::Config)?;
    }
    if let Some(band) = f.colored_band {
        let amp = f.a.unwrap_or(0.5);
        cfg.datum = Datum::Colored {
            amp,
            band,
            seed: cfg.seed,
        };
    } else if f.a.is_some() || f.b.is_some() {
        let (a0, b0) = match cfg.datum {
            Datum::TwoMode { a, b } => (a, b),
            _ => (0.5, 0.25),
        };
        cfg.datum = Datum::TwoMode {
            a: f.a.unwrap_or(a0),
            b: f.b.unwrap_or(b0),
        };
    }
    Ok(())
}

/// Effective configuration, the subcommand name and an explicit report path.
fn resolve(cli: Cli) -> Result<(RunConfig, &'static str, Option<PathBuf>, Option<String>), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    if cli.out_dir.is_some() {
        cfg.output.dir = cli.out_dir;
    }
    let (sub, report) = match cli.cmd {
        Cmd::Simulate {
            solver,
            t_final,
            sample_every,
            output,
            report,
        } => {
            apply_solver(&mut cfg, solver)?;
            set(&mut cfg.t_final, t_final);
            set(&mut cfg.sample_every, sample_every);
            if output.is_some() {
                cfg.output.trajectory = output;
            }
            ("simulate", report)
        }
        Cmd::GaugeCheck { input, s, points, report } => {
            if input.is_some() {
                cfg.output.input = input;
            }
            set(&mut cfg.s, s);
            set(&mut cfg.gauge.points, points);
            ("gauge-check", report)
        }
        Cmd::NfExpand {
            traj,
            j,
            m,
            eta,
            mode,
            samples,
            n_lattice,
            t_end,
            s,
            report,
        } => {
            if traj.is_some() {
                cfg.output.input = traj;
            }
            set(&mut cfg.nf.j, j);
            set(&mut cfg.m, m);
            set(&mut cfg.eta, eta);
            set(&mut cfg.nf.samples, samples);
            set(&mut cfg.nf.n_lattice, n_lattice);
            set(&mut cfg.nf.t_end, t_end);
            set(&mut cfg.s, s);
            if let Some(md) = mode {
                cfg.nf.mode = match md.as_str() {
                    "exact" => EvalMode::Exact,
                    "mc" | "monte_carlo" => EvalMode::MonteCarlo,
                    other => return Err(CliError::Config(format!("unknown mode {other}"))),
                };
            }
            ("nf-expand", report)
        }
        Cmd::VerifyEstimates {
            id,
            s,
            delta,
            eta,
            sizes,
            trials,
            report,
        } => {
            set(&mut cfg.estimates.id, id);
            set(&mut cfg.s, s);
            if delta.is_some() {
                cfg.delta = delta;
            }
            set(&mut cfg.eta, eta);
            set(&mut cfg.estimates.sizes, sizes);
            set(&mut cfg.estimates.trials, trials);
            ("verify-estimates", report)
        }
        Cmd::CountLemma {
            curve,
            rmax,
            probes,
            fact_k_max,
            emptiness_bound,
            eta,
            report,
        } => {
            if let Some(c) = curve {
                cfg.counting.curve = c.parse::<Curve>().map_err(|e| CliError::Config(e.to_string()))?;
            }
            set(&mut cfg.counting.rmax, rmax);
            set(&mut cfg.counting.probes, probes);
            set(&mut cfg.counting.fact_k_max, fact_k_max);
            set(&mut cfg.counting.emptiness_bound, emptiness_bound);
            set(&mut cfg.eta, eta);
            ("count-lemma", report)
        }
        Cmd::TwinProbe { solver, horizon, report } => {
            apply_solver(&mut cfg, solver)?;
            set(&mut cfg.twin.horizon, horizon);
            ("twin-probe", report)
        }
    };
    Ok((cfg, sub, report, cli.dump_config))
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let (cfg, sub, report, dump) = resolve(cli)?;
    match dump.as_deref() {
        Some("toml") => {
            print!("{}", cfg.to_toml());
            return Ok(());
        }
        Some("json") => {
            println!("{}", cfg.to_json());
            return Ok(());
        }
        Some(other) => return Err(CliError::Config(format!("unknown config format {other}"))),
        None => {}
    }
    cfg.validate(sub)?;
    let report = report.as_deref();
    match sub {
        "simulate" => commands::simulate(&cfg, report),
        "gauge-check" => commands::gauge_check(&cfg, report),
        "nf-expand" => commands::nf_expand(&cfg, report),
        "verify-estimates" => commands::verify_estimates(&cfg, report),
        "count-lemma" => commands::count_lemma(&cfg, report),
        "twin-probe" => commands::twin(&cfg, report),
        _ => unreachable!("resolve returns known subcommands"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mbolab: {e}");
            ExitCode::from(e.code())
        }
    }
}
