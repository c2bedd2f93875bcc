use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use skyhaul::commands::{self, SchemeChoice, DEFAULT_SWEEP_DBM};
use skyhaul_core::{Scheme, ScpConfig};

/// Max-min throughput optimization for UAV base stations with wireless backhaul.
#[derive(Parser)]
#[command(name = "skyhaul", version)]
struct Cli {
    /// Log solver progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write one solution file per scheme.
    Solve {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = SchemeArg::Alternating)]
        scheme: SchemeArg,
        /// Directory for the solution files.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Run all schemes over a list of transmit powers and write CSV.
    Sweep {
        scenario: PathBuf,
        /// Powers in dBm applied to every UAV and the gateway.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SWEEP_DBM.to_vec())]
        sweep_dbm: Vec<f64>,
        /// CSV output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write wall_ms as 0 so the CSV is byte-for-byte reproducible.
        #[arg(long)]
        fixed_timing: bool,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Re-verify a solution file against its scenario.
    Check { solution: PathBuf, scenario: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum SchemeArg {
    Alternating,
    ResourceOnly,
    PlacementOnly,
    All,
}

impl From<SchemeArg> for SchemeChoice {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Alternating => SchemeChoice::One(Scheme::Alternating),
            SchemeArg::ResourceOnly => SchemeChoice::One(Scheme::ResourceOnly),
            SchemeArg::PlacementOnly => SchemeChoice::One(Scheme::PlacementOnly),
            SchemeArg::All => SchemeChoice::All,
        }
    }
}

#[derive(Args)]
struct Tuning {
    /// Cap on alternating rounds.
    #[arg(long)]
    max_rounds: Option<usize>,
    /// Relative change in common throughput that counts as converged.
    #[arg(long)]
    tol: Option<f64>,
    /// Per-UAV step limit for placement updates, in meters, or `off`.
    #[arg(long, value_parser = parse_radius)]
    trust_radius_m: Option<Radius>,
    /// Plain alternating SCP: no trust region and no step safeguard.
    #[arg(long = "paper-faithful")]
    unguarded: bool,
}

#[derive(Clone, Copy)]
struct Radius(Option<f64>);

fn parse_radius(s: &str) -> Result<Radius, String> {
    if s.eq_ignore_ascii_case("off") || s.eq_ignore_ascii_case("none") {
        return Ok(Radius(None));
    }
    match s.parse::<f64>() {
        Ok(r) if r > 0.0 && r.is_finite() => Ok(Radius(Some(r))),
        _ => Err(format!("expected a positive distance in meters or `off`, got `{s}`")),
    }
}

impl Tuning {
    fn config(&self) -> ScpConfig {
        let mut c = if self.unguarded {
            ScpConfig::unguarded()
        } else {
            ScpConfig::default()
        };
        if let Some(r) = self.max_rounds {
            c.max_alt_rounds = r;
        }
        if let Some(t) = self.tol {
            c.rel_tol_eta = t;
        }
        if let Some(Radius(r)) = self.trust_radius_m {
            c.trust_radius_m = r;
        }
        c
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let mut out = io::stdout().lock();
    let mut err = io::stderr().lock();
    let code = match cli.command {
        Command::Solve {
            scenario,
            scheme,
            out: dir,
            tuning,
        } => commands::cmd_solve(&scenario, scheme.into(), &dir, &tuning.config(), &mut out, &mut err),
        Command::Sweep {
            scenario,
            sweep_dbm,
            out: csv,
            fixed_timing,
            tuning,
        } => commands::cmd_sweep(
            &scenario,
            &sweep_dbm,
            &tuning.config(),
            csv.as_deref(),
            fixed_timing,
            &mut out,
            &mut err,
        ),
        Command::Check { solution, scenario } => commands::cmd_check(&solution, &scenario, &mut out, &mut err),
    };
    ExitCode::from(code as u8)
}
