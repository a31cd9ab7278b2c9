use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geotherm_cli::{load_config, run_experiment, Overrides};

#[derive(Parser)]
#[command(
    name = "geotherm",
    version,
    about = "Run geothermal flow verification and Monte Carlo experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
        /// Worker threads for sample-parallel work (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Check a config file and print its resolved form.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
}

#[derive(Args)]
struct Flags {
    /// Base seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use T = 0.5, dt = 0.001 where the config leaves them unset.
    #[arg(long)]
    full: bool,
}

impl Flags {
    fn overrides(self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out,
            full: self.full,
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Validate { config, flags } => {
            let cfg = match load_config(&config, &flags.overrides()) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let v = cfg.violations();
            if v.is_empty() {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&cfg).expect("config serializes")
                );
                ExitCode::SUCCESS
            } else {
                eprintln!("{} violation(s) in {}:", v.len(), config.display());
                for item in v {
                    eprintln!("  - {item}");
                }
                ExitCode::FAILURE
            }
        }
        Command::Run {
            config,
            flags,
            jobs,
        } => {
            let result =
                load_config(&config, &flags.overrides()).and_then(|cfg| run_experiment(&cfg, jobs));
            match result {
                Ok(out) => {
                    print!("{}", out.summary);
                    for f in out.files {
                        eprintln!("wrote {}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
