//! tropdyn: batch front-end for the tropical state-dynamics toolkit.
//!
//! Usage: tropdyn <kind> --config file.json --out dir [--seed n] [--jobs n]
//!        [--gnuplot] [--validate]
//!
//! Exit codes: 0 all bounds passed; 1 parse/precondition/crash;
//! 2 at least one verified bound failed.

mod artifacts;
mod scenario;

use artifacts::ArtifactSink;
use clap::Parser;
use scenario::{Ctx, Kind, RunError};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

#[derive(Parser)]
#[command(name = "tropdyn", version, about)]
struct Args {
    /// Scenario kind; must match the "kind" field of each config.
    #[arg(value_enum)]
    kind: Kind,
    /// Scenario config file(s); each runs into its own subdirectory when
    /// more than one is given.
    #[arg(long, required = true)]
    config: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Seed override for scenarios that draw random numbers.
    #[arg(long)]
    seed: Option<u64>,
    /// Run up to N scenarios concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Emit companion gnuplot scripts next to CSV artifacts.
    #[arg(long)]
    gnuplot: bool,
    /// Dry-run: print diagnostics without computing.
    #[arg(long)]
    validate: bool,
}

fn verbosity() -> u8 {
    match std::env::var("TROPDYN_LOG").as_deref() {
        Ok("debug") => 2,
        Ok("quiet") => 0,
        _ => 1,
    }
}

fn kind_name(kind: Kind) -> &'static str {
    match kind {
        Kind::Eval => "eval",
        Kind::Orbit => "orbit",
        Kind::Compare => "compare",
        Kind::Recurse => "recurse",
        Kind::Pde => "pde",
        Kind::Refine => "refine",
    }
}

fn run_one(args: &Args, config: &Path, out_dir: PathBuf) -> Result<bool, RunError> {
    let s = scenario::load_scenario(config)?;
    if s.kind != kind_name(args.kind) {
        return Err(RunError::Fail(format!(
            "config kind {:?} does not match the {} subcommand",
            s.kind,
            kind_name(args.kind)
        )));
    }
    let base_dir = config
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from("."));
    let out_dir = s.out.as_ref().map(PathBuf::from).unwrap_or(out_dir);
    let ctx = Ctx { scenario: &s, base_dir, seed: args.seed };
    if args.validate {
        let diags = scenario::validate(&ctx);
        if diags.is_empty() {
            if verbosity() > 0 {
                eprintln!("{}: runnable", config.display());
            }
            return Ok(true);
        }
        for d in &diags {
            eprintln!("{}: {d}", config.display());
        }
        return Err(RunError::Fail(format!("{} diagnostics", diags.len())));
    }
    let mut sink = ArtifactSink::new(&out_dir, args.gnuplot)?;
    let passed = scenario::run_scenario(&ctx, &mut sink)?;
    sink.finish()?;
    if verbosity() > 0 {
        eprintln!(
            "{}: {} (artifacts in {})",
            config.display(),
            if passed { "pass" } else { "BOUND FAILED" },
            out_dir.display()
        );
    }
    Ok(passed)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let multi = args.config.len() > 1;
    let results: Mutex<Vec<Result<bool, RunError>>> = Mutex::new(Vec::new());
    let jobs = args.jobs.max(1);
    let queue: Mutex<Vec<(PathBuf, PathBuf)>> = Mutex::new(
        args.config
            .iter()
            .map(|c| {
                let sub = if multi {
                    let stem = c.file_stem().map(|s| s.to_string_lossy().to_string());
                    args.out.join(stem.unwrap_or_else(|| "scenario".into()))
                } else {
                    args.out.clone()
                };
                (c.clone(), sub)
            })
            .rev()
            .collect(),
    );
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(args.config.len()) {
            scope.spawn(|| loop {
                let next = queue.lock().unwrap().pop();
                match next {
                    None => break,
                    Some((config, out)) => {
                        let r = run_one(&args, &config, out);
                        if let Err(e) = &r {
                            eprintln!("{}: {e}", config.display());
                        }
                        results.lock().unwrap().push(r);
                    }
                }
            });
        }
    });
    let results = results.into_inner().unwrap();
    if results.iter().any(|r| r.is_err()) {
        return ExitCode::from(1);
    }
    if results.iter().any(|r| matches!(r, Ok(false))) {
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
