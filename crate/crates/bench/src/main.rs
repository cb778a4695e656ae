use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use mis_bench::commands::{self, Overrides};
use mis_bench::{exit_code, load_scenario, load_sweep, Method};

#[derive(Parser)]
#[command(name = "mis-bench", version, about = "Movable intelligent surface sensing benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario (or sweep) file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides run.output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<Method>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            workers: self.workers,
            method: self.method,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and write reports.
    Run(Common),
    /// Sweep one variable and write min-SINR curves.
    Sweep(Common),
    /// Write normalized beam-gain grids.
    BeamMap {
        #[command(flatten)]
        common: Common,
        /// Reuse the design stored in a prior report instead of solving.
        #[arg(long)]
        design: Option<PathBuf>,
        /// One-based pattern index; defaults to every scheduled pattern.
        #[arg(long)]
        pattern: Option<usize>,
    },
    /// Compare analytic gradients with finite differences.
    Gradcheck(Common),
    /// Exhaustive quantized search on a tiny instance.
    Oracle(Common),
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(c) => {
            let ov = c.overrides();
            let mut cfg = load_scenario(&c.config)?;
            ov.apply(&mut cfg)?;
            let dir = ov.output_dir(&cfg);
            for r in commands::run(&cfg, &dir)? {
                println!("{}: min SINR {:.3} dB", r.method, r.min_sinr_db);
            }
        }
        Command::Sweep(c) => {
            let ov = c.overrides();
            let mut spec = load_sweep(&c.config)?;
            ov.apply(&mut spec.base)?;
            let dir = ov.output_dir(&spec.base);
            let res = commands::sweep(&spec, &dir)?;
            for (name, rows) in [("ralm", &res.ralm), ("closed-form", &res.closed_form)] {
                for r in rows {
                    println!("{name}: {} -> {:.3} dB (seed {})", r.swept_value, r.min_sinr_db, r.seed);
                }
            }
        }
        Command::BeamMap { common, design, pattern } => {
            let ov = common.overrides();
            let mut cfg = load_scenario(&common.config)?;
            ov.apply(&mut cfg)?;
            let dir = ov.output_dir(&cfg);
            for path in commands::beam_map_cmd(&cfg, &dir, design.as_deref(), pattern)? {
                println!("{}", path.display());
            }
        }
        Command::Gradcheck(c) => {
            let ov = c.overrides();
            let mut cfg = load_scenario(&c.config)?;
            ov.apply(&mut cfg)?;
            let r = commands::gradcheck(&cfg, &ov.output_dir(&cfg))?;
            println!("max relative error {:.3e} (tolerance {:.1e})", r.max_relative_error, r.tolerance);
            if !r.pass {
                bail!("gradient check failed");
            }
        }
        Command::Oracle(c) => {
            let ov = c.overrides();
            let mut cfg = load_scenario(&c.config)?;
            ov.apply(&mut cfg)?;
            let r = commands::oracle(&cfg, &ov.output_dir(&cfg))?;
            println!(
                "oracle {:.3} dB, solver {:.3} dB, gap {:+.3} dB",
                r.oracle_min_sinr_db, r.ralm_min_sinr_db, r.gap_db
            );
            if !r.pass {
                bail!("solver falls more than {} dB below the oracle", r.allowed_gap_db);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
