use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use exflow::evolution::{Scheme, Symmetry};
use exflow::kernel_analysis::ProbeFunction;
use exflow::runner::{run, Command, ExperimentConfig, EXIT_USAGE};

const EXIT_CODES: &str = "\
Exit codes:
  0   success; for check-hypothesis, the hypothesis holds by an analytic criterion
  1   inconclusive hypothesis check, failed closed-form or bound check, or runtime error
  2   check-hypothesis refuted by a witness field with ratio >= 1
  64  malformed configuration or command line

Environment:
  EXFLOW_WORKERS  number of worker threads (default: all cores)";

#[derive(Parser, Debug)]
#[command(name = "exflow", version, about = "Energy-stability experiments for exterior planar flows", after_help = EXIT_CODES)]
struct Cli {
    /// TOML configuration; command-line flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory receiving the CSV tables and the summary.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Print the primary CSV table on stdout and the summary on stderr.
    #[arg(long, global = true)]
    csv: bool,

    #[command(flatten)]
    knobs: Knobs,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Criteria and a randomized search for the stability quotient of a Hamel flow.
    CheckHypothesis,
    /// Ratio scan over the rotating counterexample family, with closed-form checks.
    CounterexampleScan,
    /// Galerkin run of the perturbation equations with energy bookkeeping.
    Simulate,
    /// The averaging functional on a probe function.
    KernelDemo,
    /// Hardy quotients of random compactly supported fields.
    HardyTest,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::CheckHypothesis => Command::CheckHypothesis,
            Cmd::CounterexampleScan => Command::CounterexampleScan,
            Cmd::Simulate => Command::Simulate,
            Cmd::KernelDemo => Command::KernelDemo,
            Cmd::HardyTest => Command::HardyTest,
        }
    }
}

#[derive(Args, Debug, Default)]
struct Knobs {
    /// Flux of the background flow.
    #[arg(long, global = true, allow_hyphen_values = true)]
    phi: Option<f64>,
    /// Circulation of the background flow.
    #[arg(long, global = true, allow_hyphen_values = true)]
    mu: Option<f64>,
    /// Amplitude of the power-law swirl.
    #[arg(long, global = true, allow_hyphen_values = true)]
    amp: Option<f64>,
    /// Seed of the random streams
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Outer truncation radius of the Galerkin basis
    #[arg(long, global = true)]
    r_max: Option<f64>,
    /// Highest angular order of the Galerkin basis
    #[arg(long, global = true)]
    n_modes_theta: Option<u32>,
    /// Radial polynomials per angular block
    #[arg(long, global = true)]
    n_modes_radial: Option<usize>,
    /// Time step
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Time horizon.
    #[arg(long = "T", global = true)]
    horizon: Option<f64>,
    /// implicit_midpoint or imex_cn_ab2.
    #[arg(long, global = true)]
    scheme: Option<Scheme>,
    /// none or central.
    #[arg(long, global = true)]
    symmetry: Option<Symmetry>,
    /// Comma-separated counterexample angles.
    #[arg(long, global = true, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Circulation of the counterexample family
    #[arg(long, global = true, allow_hyphen_values = true)]
    scan_mu: Option<f64>,
    /// Relative tolerance of the closed-form checks.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Random trial fields in the hypothesis search
    #[arg(long, global = true)]
    n_random: Option<usize>,
    /// Gradient-ascent steps per trial field
    #[arg(long, global = true)]
    ascent_steps: Option<usize>,
    /// Number of random fields for hardy-test
    #[arg(long, global = true)]
    n_fields: Option<usize>,
    /// step, reciprocal or exponential.
    #[arg(long, global = true)]
    probe: Option<String>,
    /// Comma-separated evaluation times for kernel-demo.
    #[arg(long, global = true, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    /// Also assemble the Duhamel decay chain (simulate).
    #[arg(long, global = true)]
    certificate: bool,
}

fn parse_probe(s: &str) -> anyhow::Result<ProbeFunction> {
    Ok(match s {
        "step" => ProbeFunction::Indicator { a: 0.0, b: 1.0 },
        "reciprocal" => ProbeFunction::PowerDecay { p: 1.0 },
        "exponential" => ProbeFunction::Exponential { amplitude: 1.0, rate: 1.0 },
        other => bail!("unknown probe {other:?} (expected step, reciprocal or exponential)"),
    })
}

fn build_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    let k = &cli.knobs;
    macro_rules! set {
        ($($field:ident => $target:ident),* $(,)?) => {
            $(if let Some(v) = k.$field.clone() { cfg.$target = v; })*
        };
    }
    set!(
        phi => phi, mu => mu, amp => amp, seed => seed, r_max => r_max,
        n_modes_theta => n_modes_theta, n_modes_radial => n_modes_radial, dt => dt,
        horizon => horizon, scheme => scheme, symmetry => symmetry, alphas => alphas,
        scan_mu => scan_mu, tolerance => tolerance, n_random => n_random,
        ascent_steps => ascent_steps, n_fields => n_fields, t_grid => t_grid,
    );
    if let Some(p) = &k.probe {
        cfg.probe = parse_probe(p)?;
    }
    cfg.certificate |= k.certificate;
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }
    let command = Command::from(cli.command);
    if let Some(c) = cfg.command {
        if c != command {
            bail!("config names command {c} but {command} was requested");
        }
    }
    cfg.command = Some(command);
    Ok(cfg)
}

fn set_workers() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("EXFLOW_WORKERS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).with_context(|| format!("EXFLOW_WORKERS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE as u8) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = match set_workers().and_then(|_| build_config(&cli)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("exflow: {e:#}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let command = cfg.command.expect("set by build_config");
    let output = match run(command, &cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("exflow: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(dir) = &cfg.output {
        if let Err(e) = output.write_to(dir) {
            eprintln!("exflow: {command}: writing {}: {e}", dir.display());
            return ExitCode::from(1);
        }
    }
    let mut stdout = std::io::stdout().lock();
    let written = if cli.csv {
        eprint!("{}", output.summary);
        match output.tables.first() {
            Some((_, t)) => stdout.write_all(t.render().as_bytes()),
            None => Ok(()),
        }
    } else {
        stdout.write_all(output.summary.as_bytes())
    };
    if written.is_err() {
        return ExitCode::from(1);
    }
    ExitCode::from(output.exit_code as u8)
}
