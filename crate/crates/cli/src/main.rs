use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use fput2d_cli::config::keys_help;
use fput2d_cli::{configure_threads, execute, CliError, Command, Config};

#[derive(Parser)]
#[command(name = "fput2d", version, about = "2D FPUT lattice and NLS envelope laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Print carrier coefficients as JSON.
    Coeffs(RunArgs),
    /// Run one coupled lattice/envelope simulation at `eps`.
    Simulate(RunArgs),
    /// Run every `eps` of `eps_list` and fit the error order.
    Sweep(RunArgs),
    /// Residual norms of the approximation over `eps_list`.
    Residual(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, args) = match cli.command {
        Sub::Coeffs(a) => (Command::Coeffs, a),
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Sweep(a) => (Command::Sweep, a),
        Sub::Residual(a) => (Command::Residual, a),
    };
    let mut cfg = Config::load(args.config.as_deref(), &args.set)?;
    if args.out.is_some() {
        cfg.out = args.out;
    }
    configure_threads()?;
    execute(command, &cfg)
}

fn main() -> ExitCode {
    let help = keys_help();
    let mut cmd = Cli::command().after_help(help.clone());
    for name in ["coeffs", "simulate", "sweep", "residual"] {
        cmd = cmd.mut_subcommand(name, |s| s.after_help(help.clone()));
    }
    let cli = match cmd.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are config errors; help and version are not errors.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fput2d: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
