use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tripreg::Vec3;
use tripreg_cli::{
    cmd_bench, cmd_fixture, cmd_register, cmd_synth, parse_vec3, BenchArgs, CliError, RegisterArgs, SynthArgs,
};

#[derive(Parser)]
#[command(name = "tripreg", version, about = "Global point cloud registration by triplet voting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the transform taking DST onto SRC.
    Register {
        src: PathBuf,
        dst: PathBuf,
        /// Config file of `key = value` lines.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override one config key, e.g. `--set knn_k=10`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Where to write the 4x4 transform.
        #[arg(long)]
        out: PathBuf,
        /// Directory for vote and histogram dumps.
        #[arg(long)]
        dump_votes: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Register every adjacent pair of a ring dataset and write a report.
    Bench {
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Report path; stage timings go to `<out>.timings.tsv`.
        #[arg(long)]
        out: PathBuf,
        /// Score the ground truth itself instead of registering.
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Render ring partial views of a model.
    Synth {
        model: PathBuf,
        #[arg(long, default_value_t = 18)]
        views: usize,
        /// Rotation between views, in degrees.
        #[arg(long, default_value_t = 20.0)]
        step: f64,
        /// Camera position as `x,y,z`; defaults to ten bounding radii along +z.
        #[arg(long, value_parser = parse_vec3)]
        camera: Option<Vec3>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic model (sphere, sphere-union, cube-bumps).
    Fixture {
        kind: String,
        #[arg(long, default_value_t = 55_000)]
        points: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Register { src, dst, config, overrides, out, dump_votes, threads } => {
            let outcome = cmd_register(&RegisterArgs { src, dst, config, overrides, out: out.clone(), dump_votes, threads })?;
            println!("wrote {} ({})", out.display(), outcome.summary);
        }
        Command::Bench { dataset, config, overrides, out, dry_run, threads } => {
            let report = cmd_bench(&BenchArgs { dataset, config, overrides, out: out.clone(), dry_run, threads })?;
            let ok = report.rows.iter().filter(|r| r.rmse.is_some()).count();
            print!("wrote {} ({ok}/{} pairs registered", out.display(), report.rows.len());
            match report.rmse_medd_summary() {
                Some(s) => println!(", median RMSE {:.3} medD)", s.median),
                None => println!(")"),
            }
        }
        Command::Synth { model, views, step, camera, out } => {
            let ds = cmd_synth(&SynthArgs { model, views, step_deg: step, camera, out: out.clone() })?;
            let sizes: Vec<usize> = ds.views.iter().map(|v| v.len()).collect();
            println!("wrote {} views to {} (points per view {:?})", ds.len(), out.display(), sizes);
        }
        Command::Fixture { kind, points, seed, out } => {
            cmd_fixture(&kind, points, seed, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
