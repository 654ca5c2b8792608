use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use qwgame::cli::{run_recipe, ExperimentConfig, Overrides, Recipe};

/// Run a quantum-walk game experiment and write its data files.
///
/// Every flag can also be set through the environment (`QWG_CONFIG`,
/// `QWG_RECIPE`, `QWG_SEED`, `QWG_OUT`, `QWG_WORKERS`, `QWG_GRID`); flags win
/// over the environment, which wins over the config file.
///
/// Exit codes: 0 success, 1 configuration error, 2 runtime failure,
/// 3 race or tug-of-war found no stationary point.
#[derive(Debug, Parser)]
#[command(name = "qwgame", version)]
struct Args {
    /// Config file (TOML, or JSON with a .json extension).
    #[arg(long, env = "QWG_CONFIG")]
    config: Option<PathBuf>,

    /// race, tug_of_war, rendezvous, perturbation, learning or calibrate.
    #[arg(long, env = "QWG_RECIPE", value_parser = parse_recipe)]
    recipe: Option<Recipe>,

    #[arg(long, env = "QWG_SEED")]
    seed: Option<u64>,

    /// Output directory; must not exist or be empty.
    #[arg(long, env = "QWG_OUT")]
    out: PathBuf,

    #[arg(long, env = "QWG_WORKERS")]
    workers: Option<usize>,

    /// Strategy grid points per axis.
    #[arg(long, env = "QWG_GRID")]
    grid: Option<usize>,

    /// Validate and print the resolved config without running.
    #[arg(long)]
    dry_run: bool,
}

fn parse_recipe(s: &str) -> Result<Recipe, String> {
    s.parse().map_err(|e: qwgame::Error| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let overrides = Overrides { recipe: args.recipe, seed: args.seed, grid: args.grid, workers: args.workers };
    let config = match ExperimentConfig::load(args.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if args.dry_run {
        return match config.validate() {
            Ok(warnings) => {
                for w in warnings {
                    eprintln!("warning: {w}");
                }
                println!("{}", serde_json::to_string_pretty(&config).expect("config serializes"));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        };
    }
    match run_recipe(&config, &args.out) {
        Ok(summary) => {
            println!("{}", summary.out_dir.display());
            if summary.found_stationary == Some(false) {
                eprintln!("no stationary point found");
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
