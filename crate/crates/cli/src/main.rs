use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use horseshoe::periodic::census;
use horseshoe::report::{emit_plot_data, run, summary_table, RunConfig, RunError};
use horseshoe::Suite;

#[derive(Parser)]
#[command(
    name = "horseshoe",
    version,
    about = "Verification lab for a horseshoe with an internal tangency"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and write the certificate and CSV files.
    Verify {
        /// TOML run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Suite to run (repeatable); all suites when absent.
        #[arg(long = "suite", value_name = "NAME", value_parser = parse_suite)]
        suites: Vec<Suite>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run even if the map constants violate their invariants.
        #[arg(long)]
        allow_invalid_params: bool,
    },
    /// Count realized periodic orbits by period.
    Census {
        #[arg(long)]
        max_period: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write plot datasets.
    PlotData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse()
}

fn load(path: Option<PathBuf>) -> Result<RunConfig, RunError> {
    Ok(match path {
        Some(p) => RunConfig::load(&p)?,
        None => RunConfig::default(),
    })
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Verify {
            config,
            suites,
            seed,
            out,
            allow_invalid_params,
        } => {
            let mut cfg = match load(config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            if !suites.is_empty() {
                cfg.suites = suites;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            cfg.allow_invalid_params |= allow_invalid_params;
            match run(&cfg) {
                Ok(out) => {
                    print!("{}", summary_table(&out.certificate));
                    println!(
                        "wrote {} files to {}",
                        out.files.len(),
                        cfg.out_dir.display()
                    );
                    ExitCode::from(out.exit_code() as u8)
                }
                Err(e) => fail(e),
            }
        }
        Command::Census { max_period, config } => {
            let cfg = match load(config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let map = match cfg.validated() {
                Ok(m) => m,
                Err(e) => return fail(e.into()),
            };
            if max_period == 0 {
                eprintln!("error: --max-period must be at least 1");
                return ExitCode::from(2);
            }
            let c = census(&map, max_period).expect("period is at least 1");
            println!("{:>6} {:>8}", "period", "orbits");
            for (k, n) in c.count_by_period().iter().enumerate() {
                println!("{:>6} {:>8}", k + 1, n);
            }
            println!(
                "total {} orbits from {} words; max residual {:e}",
                c.orbits.len(),
                c.words_tried,
                c.max_residual()
            );
            ExitCode::SUCCESS
        }
        Command::PlotData { out, config } => {
            let mut cfg = match load(config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            cfg.out_dir = out;
            match emit_plot_data(&cfg) {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
