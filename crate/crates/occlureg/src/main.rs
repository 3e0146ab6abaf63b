use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use occlureg::bench::{format_table, parse_sizes, run_bench};
use occlureg::commands::{evaluate, register, render, summary, write_result, RegisterArgs};
use occlureg::config::{ExperimentConfig, Method};
use occlureg::io::write_bytes;
use occlureg::{Error, Result};

#[derive(Parser)]
#[command(name = "occlureg", version, about = "Point cloud registration under occlusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the configured scenes to depth, mask, sidecar and source files.
    Render {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Register a source cloud to the masked points of a depth map.
    Register {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        /// Bare intrinsics or a rendered sidecar (which also gives the
        /// object scale and the true pose).
        #[arg(long)]
        intrinsics: PathBuf,
        #[arg(long, value_enum, default_value = "ot")]
        method: Method,
        #[arg(long)]
        out: PathBuf,
        /// Experiment config supplying pipeline and descriptor settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Include the correspondence list in the output.
        #[arg(long)]
        correspondences: bool,
        /// Polish ot/softmax estimates with ICP (not the one-shot method).
        #[arg(long)]
        refine_icp: bool,
    },
    /// Run the evaluation protocol and write the report.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record wall-clock times (makes the report nondeterministic).
        #[arg(long)]
        timings: bool,
    },
    /// Time the transport pipeline over point counts.
    Bench {
        #[arg(long, default_value = "512,1024,2048")]
        sizes: String,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the rows as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Render { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let written = render(&cfg, &out)?;
            println!("rendered {} scenes into {}", written.len(), out.display());
        }
        Command::Register {
            source,
            depth,
            mask,
            intrinsics,
            method,
            out,
            config,
            seed,
            correspondences,
            refine_icp,
        } => {
            let args = RegisterArgs {
                source: &source,
                depth: &depth,
                mask: &mask,
                intrinsics: &intrinsics,
                method,
                config: config.as_deref(),
                seed,
                refine_icp,
            };
            let result = register(&args)?;
            write_result(&result, correspondences, &out)?;
            match result.rotation_error {
                Some(e) => println!("{}: rotation error {:.3} deg", result.method, e.to_degrees()),
                None => println!("{}: wrote {}", result.method, out.display()),
            }
        }
        Command::Evaluate { config, out, timings } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.timings |= timings;
            let out = out
                .or_else(|| cfg.output_dir.clone())
                .ok_or_else(|| Error::Config("no --out and no output_dir in the config".into()))?;
            let (report, records) = evaluate(&cfg, &out)?;
            println!("{} trials, config {}", records.len(), &cfg.hash()[..12]);
            print!("{}", summary(&report));
        }
        Command::Bench { sizes, reps, seed, out } => {
            let rows = run_bench(&parse_sizes(&sizes)?, reps, seed)?;
            print!("{}", format_table(&rows));
            if let Some(out) = out {
                write_bytes(&out, occlureg::io::to_json_pretty(&rows)?.as_bytes())?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
