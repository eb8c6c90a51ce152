use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use gqk_core::harness::{
    evolve_command, multiplier_command, run_config, EvolveConfig, MultiplierConfig, SuiteConfig,
};

#[derive(Parser)]
#[command(name = "gqk", version, about = "Galilean quantum kinematics verification engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a check suite and write the JSON report.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = all cores).
        #[arg(long, env = "GQK_THREADS", default_value_t = 0)]
        threads: usize,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evolve a packet and write the observable series as CSV.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_series: PathBuf,
        #[arg(long, requires = "snapshot_dir")]
        snapshot_every: Option<usize>,
        #[arg(long, requires = "snapshot_every")]
        snapshot_dir: Option<PathBuf>,
    },
    /// Sample multipliers σ(g1, g2) and write them as JSON.
    Multiplier {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Verify {
            config,
            out,
            threads,
            seed,
        } => {
            let mut cfg = SuiteConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = run_config(&cfg, threads)?;
            std::fs::write(&out, report.to_json())
                .with_context(|| format!("writing {}", out.display()))?;
            for c in &report.checks {
                let residual = c.residual.map_or("-".to_string(), |r| format!("{r:.3e}"));
                let status = if c.pass { "pass" } else { "FAIL" };
                eprintln!("{status} {:<14} residual {residual} tol {:.0e}", c.id, c.tolerance);
                if let Some(e) = &c.error {
                    eprintln!("     error: {e}");
                }
            }
            eprintln!(
                "{} of {} checks passed",
                report.checks.iter().filter(|c| c.pass).count(),
                report.checks.len()
            );
            Ok(report.overall_pass)
        }
        Command::Evolve {
            config,
            out_series,
            snapshot_every,
            snapshot_dir,
        } => {
            let cfg = EvolveConfig::load(&config)?;
            let file = File::create(&out_series)
                .with_context(|| format!("creating {}", out_series.display()))?;
            let mut w = BufWriter::new(file);
            let snaps = snapshot_every.zip(snapshot_dir.as_deref());
            evolve_command(&cfg, &mut w, snaps)?;
            w.flush()?;
            Ok(true)
        }
        Command::Multiplier { config, out } => {
            let cfg = MultiplierConfig::load(&config)?;
            let table = multiplier_command(&cfg)?;
            std::fs::write(&out, serde_json::to_string_pretty(&table)?)
                .with_context(|| format!("writing {}", out.display()))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
