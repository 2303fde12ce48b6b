use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rcdlab_cli::config::Format;
use rcdlab_cli::{oracle, presets, report, CliError};

#[derive(Parser)]
#[command(name = "rcdlab", version, about = "Heat-semigroup inequality checks on finite model spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep from a configuration file or a built-in preset.
    Run {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Worker threads (defaults to RCDLAB_THREADS, then the config, then all cores).
        #[arg(long, env = "RCDLAB_THREADS")]
        threads: Option<usize>,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Report path; standard output when absent.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Evaluate a closed-form OU formula.
    Oracle {
        #[arg(long)]
        query: String,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        args: Vec<f64>,
    },
    /// List the built-in presets.
    Presets,
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Presets => {
            for (name, about) in presets::PRESETS {
                println!("{name}\t{about}");
            }
            Ok(0)
        }
        Command::Oracle { query, args } => {
            println!("{}", oracle::run_query(&query, &args)?);
            Ok(0)
        }
        Command::Run { config, preset, threads, seed, output, format } => {
            let mut cfg = match (config, preset) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
                    rcdlab_cli::parse_config(&text)?
                }
                (None, Some(name)) => presets::preset(&name).ok_or_else(|| {
                    let names: Vec<&str> = presets::PRESETS.iter().map(|(n, _)| *n).collect();
                    let hint = rcdlab_cli::config::suggest(&name, &names)
                        .map(|s| format!("; did you mean '{s}'?"))
                        .unwrap_or_default();
                    CliError::Usage(format!("unknown preset '{name}'{hint}"))
                })?,
                (None, None) => unreachable!("clap requires one source"),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let threads = threads
                .or(cfg.threads)
                .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
            let out_cfg = cfg.output.clone();
            let format = format.or(out_cfg.as_ref().map(|o| o.format)).unwrap_or_default();
            let path = output.or_else(|| out_cfg.and_then(|o| o.path).map(PathBuf::from));

            let outcome = rcdlab_cli::run_suite(&cfg, threads)?;
            let text = match format {
                Format::Csv => report::to_csv(&outcome.rows).map_err(|e| CliError::Io(e.to_string()))?,
                Format::Json => report::to_json(&outcome.config_hash, &outcome.rows),
            };
            match path {
                Some(p) => std::fs::write(&p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display())))?,
                None => print!("{text}"),
            }
            eprintln!("{}", outcome.summary());
            Ok(outcome.exit_code())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("rcdlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
