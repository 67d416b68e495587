//! Batch entry point: parse a config file, run the requested study or
//! check, write deterministic CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 invalid study
//! (excessive censoring, failed inequality or failed check suite).

use clap::Parser;
use empmin_cli::{config, runner};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "empmin", version, about = "Empirical minimization laboratory")]
struct Args {
    /// Path to the run configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Worker threads for replicated studies (default: all cores).
    /// Results are bitwise independent of this setting.
    #[arg(long)]
    jobs: Option<usize>,

    /// Directory prefixed to relative output paths.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    let mut config = match config::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };

    // EMPMIN_SEED overrides the configured master seed; the summary records
    // the source either way.
    let mut seed_from_env = false;
    if let Ok(v) = std::env::var("EMPMIN_SEED") {
        match v.trim().parse::<u64>() {
            Ok(seed) => {
                config.study.master_seed = seed;
                seed_from_env = true;
            }
            Err(_) => {
                eprintln!("error: EMPMIN_SEED must be a 64-bit unsigned integer, got '{v}'");
                return ExitCode::from(1);
            }
        }
    }

    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be >= 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(1);
        }
    }

    let output = match runner::execute(&config, seed_from_env) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    // Single writer, after aggregation; on any failure remove partials.
    let resolve = |p: &str| -> PathBuf {
        let path = Path::new(p);
        match (&args.out_dir, path.is_absolute()) {
            (Some(dir), false) => dir.join(path),
            _ => path.to_path_buf(),
        }
    };
    let mut written: Vec<PathBuf> = Vec::new();
    let mut write = |path: PathBuf, content: &str| -> Result<(), String> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)
                    .map_err(|e| format!("cannot create {}: {e}", parent.display()))?;
            }
        }
        std::fs::write(&path, content)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        written.push(path);
        Ok(())
    };

    let result = (|| -> Result<(), String> {
        if let (Some(csv), Some(path)) = (&output.csv, &config.output.csv) {
            write(resolve(path), csv)?;
        }
        write(resolve(&config.output.json), &output.json)?;
        Ok(())
    })();

    if let Err(e) = result {
        for p in &written {
            let _ = std::fs::remove_file(p);
        }
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }

    if output.valid {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
