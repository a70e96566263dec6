use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use driftlab_cli::run::{builtin_suite, combined_exit_code, list_experiments, load_suite, run_single, run_suite};
use driftlab_cli::RunConfig;

/// Runs drift-diffusion experiments described by JSON configurations.
#[derive(Parser, Debug)]
#[command(name = "driftlab", version)]
struct Args {
    /// Run configuration (with --suite: a JSON array of configurations).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run several experiments concurrently; without --config, the built-in suite.
    #[arg(long)]
    suite: bool,
    /// List experiments and exit.
    #[arg(long)]
    list: bool,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return exit(3);
        }
    };
    if args.list {
        print!("{}", list_experiments());
        return ExitCode::SUCCESS;
    }
    let base_dir = |p: &Path| p.parent().map(Path::to_path_buf).unwrap_or_default();
    let outcomes = if args.suite {
        let (configs, base) = match &args.config {
            Some(path) => match load_suite(path) {
                Ok(c) => (c, base_dir(path)),
                Err(e) => {
                    eprintln!("{e}");
                    return exit(e.exit_code());
                }
            },
            None => (builtin_suite(), PathBuf::new()),
        };
        let out = args.out.clone().unwrap_or_else(|| PathBuf::from("driftlab-out"));
        match run_suite(&configs, &base, &out) {
            Ok(o) => o,
            Err(e) => {
                eprintln!("{e}");
                return exit(e.exit_code());
            }
        }
    } else {
        let Some(path) = &args.config else {
            eprintln!("either --config <path>, --suite or --list is required");
            return exit(3);
        };
        let cfg = match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{e}");
                return exit(e.exit_code());
            }
        };
        let out = args
            .out
            .clone()
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("driftlab-out").join(&cfg.experiment));
        match run_single(&cfg, &base_dir(path), &out) {
            Ok(o) => vec![o],
            Err(e) => {
                eprintln!("{e}");
                return exit(e.exit_code());
            }
        }
    };
    for o in &outcomes {
        if o.exit_code >= 3 {
            eprintln!("{}", o.summary);
        } else if !args.quiet {
            println!("{}", o.summary);
        }
    }
    exit(combined_exit_code(&outcomes))
}
