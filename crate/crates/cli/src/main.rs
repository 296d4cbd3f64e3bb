mod commands;
mod config;
mod output;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;
use output::Outputs;

/// Lévy-driven Volterra processes: simulation, condition checks, kernel
/// rates and fractional integrals.
///
/// After the subcommand, `--config=FILE` loads a flat `key = value` file and
/// every schema key (see `volterra schema`) can be set with `--key=value`.
/// Output goes to `--out=DIR`, else `$VOLTERRA_OUT`, else `./volterra-out`.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq, Debug)]
enum Command {
    /// Sample one driver path with its Volterra and perturbed Volterra paths
    Simulate,
    /// Semimartingale, (D_p) and (C_p) checks for the Gamma kernel
    CheckConditions,
    /// Fit the epsilon-rate of the kernel distance ∫|g^ε - g|^p
    KernelRates,
    /// Integral convergence experiment over the epsilon grid
    Integrate,
    /// Monte Carlo E|Y^ε(T) - Y(T)|^p over the epsilon grid
    Convergence,
    /// Data behind the three example figures
    ReproduceFigures,
    /// Print the documented configuration schema
    Schema,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::CheckConditions => "check-conditions",
            Command::KernelRates => "kernel-rates",
            Command::Integrate => "integrate",
            Command::Convergence => "convergence",
            Command::ReproduceFigures => "reproduce-figures",
            Command::Schema => "schema",
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Schema(String),
    Conditions(Vec<String>),
    Io(std::io::Error),
    Core(volterra::Error),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Schema(m) => write!(f, "schema error: {m}"),
            Failure::Conditions(c) => write!(f, "condition check failed: {}", c.join("; ")),
            Failure::Io(e) => write!(f, "i/o error: {e}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<volterra::Error> for Failure {
    fn from(e: volterra::Error) -> Self {
        match e {
            volterra::Error::Config(m) => Failure::Schema(m),
            volterra::Error::ConditionFailed(m) => Failure::Conditions(vec![m]),
            volterra::Error::Io(e) => Failure::Io(e),
            other => Failure::Core(other),
        }
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(_) => 1,
            Failure::Schema(_) => 2,
            Failure::Conditions(_) => 3,
            Failure::Io(_) => 4,
        }
    }
}

/// Everything up to the subcommand goes to clap; the rest are config
/// arguments.
fn split_args(argv: &[String]) -> (&[String], &[String]) {
    let at = argv
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map_or(argv.len(), |i| i + 2);
    argv.split_at(at.min(argv.len()))
}

fn load_config(command: Command, rest: &[String]) -> Result<Config, Failure> {
    let mut base = Config::defaults();
    if command == Command::ReproduceFigures {
        base.set("kernel.epsilon", "1e-10")?;
    }
    let mut overrides = Vec::new();
    let mut file = None;
    let mut it = rest.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            file = Some(
                it.next()
                    .ok_or_else(|| Failure::Schema("--config needs a path".into()))?
                    .clone(),
            );
        } else if let Some(p) = a.strip_prefix("--config=") {
            file = Some(p.to_string());
        } else {
            overrides.push(a.clone());
        }
    }
    let mut cfg = match file {
        Some(path) => Config::parse_over(base, &std::fs::read_to_string(path)?)?,
        None => base,
    };
    cfg.apply_overrides(&overrides)?;
    Ok(cfg)
}

fn run(command: Command, rest: &[String]) -> Result<(), Failure> {
    if command == Command::Schema || rest.iter().any(|a| a == "--help" || a == "-h") {
        print!("{}", config::schema_text());
        return Ok(());
    }
    let cfg = load_config(command, rest)?;
    if let Some(t) = cfg.threads()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Schema(format!("cannot set thread count: {e}")))?;
    }
    let mut out = Outputs::create(&cfg)?;
    let result = match command {
        Command::Simulate => commands::simulate(&cfg, &mut out),
        Command::CheckConditions => commands::check_conditions(&cfg, &mut out),
        Command::KernelRates => commands::kernel_rates(&cfg, &mut out),
        Command::Integrate => commands::integrate(&cfg, &mut out),
        Command::Convergence => commands::convergence(&cfg, &mut out),
        Command::ReproduceFigures => commands::reproduce_figures(&cfg, &mut out),
        Command::Schema => unreachable!("handled above"),
    };
    out.write_manifest(command.name(), &cfg)?;
    result
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let (head, rest) = split_args(&argv);
    let cli = match Cli::try_parse_from(head) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command, rest) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
