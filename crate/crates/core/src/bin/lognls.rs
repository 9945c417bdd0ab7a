use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lognls::config::{RunConfig, OUTPUT_ROOT_ENV};
use lognls::runner::{list_scenarios, run_config};

/// Semiclassical logarithmic Schrodinger experiments.
#[derive(Parser)]
#[command(name = "lognls", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Directory relative output paths are resolved against.
        #[arg(long, env = OUTPUT_ROOT_ENV)]
        output_root: Option<PathBuf>,
    },
    /// List scenarios and the keys they need.
    List,
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List => {
            print!("{}", list_scenarios());
            return ExitCode::SUCCESS;
        }
        Command::Validate { config } => RunConfig::load(&config).and_then(|c| c.validate()).map(|()| {
            println!("{}: ok", config.display());
        }),
        Command::Run { config, output_root } => RunConfig::load(&config)
            .and_then(|c| run_config(&c, output_root.as_deref()))
            .map(|outcome| {
                for f in &outcome.files {
                    println!("wrote {}", f.display());
                }
                for fit in &outcome.summary.fits {
                    println!(
                        "fit {}: slope {:.4}, R^2 {:.4}, {} points",
                        fit.name, fit.fit.slope, fit.fit.r_squared, fit.fit.points
                    );
                }
                for c in &outcome.summary.checks {
                    let verdict = if c.pass { "PASS" } else { "FAIL" };
                    println!("{verdict} {}: {:e} ({})", c.name, c.value, c.tolerance);
                }
                for n in &outcome.summary.notes {
                    println!("note: {n}");
                }
            }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
