use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ensemblekit::config::load_config;
use ensemblekit::files::read_structured;
use ensemblekit::run::{run, run_grids, RunOptions};
use ensemblekit::synthetic::{generate_synthetic, SyntheticSpec};

#[derive(Parser)]
#[command(
    name = "ensemblekit",
    version,
    about = "Train and compare ensemble classifiers on opcode corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every experiment of a config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate every cell of the config's parameter grids.
    Grid {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic corpus described by a spec file.
    Generate {
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "corpus")]
        out: PathBuf,
    },
}

fn options(c: Common) -> RunOptions {
    RunOptions {
        seed: c.seed,
        out: c.out,
        jobs: c.jobs.filter(|&j| j > 0),
    }
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Run { config, common } => load_config(&config).and_then(|(cfg, base)| {
            let summary = run(&cfg, &base, &options(common))?;
            print!("{}", summary.report);
            eprintln!("wrote {} files to {}", summary.files.len(), summary.out_dir.display());
            Ok(())
        }),
        Command::Grid { config, common } => load_config(&config).and_then(|(cfg, base)| {
            let (out, outcomes) = run_grids(&cfg, &base, &options(common))?;
            for (name, o) in &outcomes {
                let best = o
                    .best_row()
                    .map(|r| {
                        r.params
                            .iter()
                            .map(|(k, v)| format!("{k}={v}"))
                            .collect::<Vec<_>>()
                            .join(" ")
                    })
                    .unwrap_or_else(|| "none".into());
                println!(
                    "{name}: {} cells, {} evaluated, {} infeasible, best: {best}",
                    o.size,
                    o.rows.len(),
                    o.infeasible.len()
                );
            }
            eprintln!("wrote grid results to {}", out.display());
            Ok(())
        }),
        Command::Generate { spec, seed, out } => read_structured::<SyntheticSpec>(&spec).and_then(|s| {
            let specs = s.family_specs(seed)?;
            let m = generate_synthetic(&specs, seed, &out)?;
            let n: usize = m.families.iter().map(|f| f.count).sum();
            eprintln!(
                "wrote {n} samples in {} families to {}",
                m.families.len(),
                out.display()
            );
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
