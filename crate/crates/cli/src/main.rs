use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ibmsim_cli::run::{config_error_record, EXIT_IO, EXIT_MODEL};
use ibmsim_cli::{parse_config, run};
use serde_json::json;

/// Run an ibmsim experiment described by a config file.
#[derive(Debug, Parser)]
#[command(name = "ibmsim", version)]
struct Args {
    /// Experiment config (key = value lines with [section] headers).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; a -vK suffix is added if it exists.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "IBMSIM_THREADS")]
    threads: Option<usize>,
}

fn fail(code: i32, record: serde_json::Value) -> ExitCode {
    eprintln!("{record}");
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(k) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            return fail(EXIT_IO, json!({"error": "ThreadPool", "message": e.to_string()}));
        }
    }
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            let msg = format!("{}: {e}", args.config.display());
            return fail(EXIT_MODEL, json!({"error": "ValidationError", "field": "config", "message": msg}));
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_MODEL, config_error_record(&e)),
    };
    if let Some(s) = args.seed {
        cfg = cfg.with_seed(s);
    }
    match run(&cfg, args.out.as_deref()) {
        Ok(outcome) => {
            if let Some(err) = &outcome.error {
                eprintln!("{err}");
            }
            println!("{}", outcome.dir.display());
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => fail(EXIT_IO, json!({"error": "Io", "message": e.to_string()})),
    }
}
