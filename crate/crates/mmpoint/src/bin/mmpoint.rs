//! Config-driven radar pipeline runner.
//!
//! Exit codes: 0 success, 2 config/usage error, 3 stage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mmpoint::array::ArrayLayout;
use mmpoint::pipeline::{self, Product, Truth};
use mmpoint::Error;

#[derive(Parser)]
#[command(name = "mmpoint", version, about = "4D mmWave radar point cloud toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulate -> image -> detect -> cluster pipeline from a config file.
    Run {
        /// Run configuration (TOML).
        config: PathBuf,
        /// Override the config's noise seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the product list (comma-separated: rdm,ram,cloud,clusters,metrics).
        #[arg(long)]
        products: Option<String>,
    },
    /// Compare a predicted segmentation mask against a truth mask on a
    /// range-azimuth product's grid; prints an IoU report as JSON.
    EvalMasks {
        /// Range-azimuth product (PGM with .meta.json sidecar).
        ram: PathBuf,
        /// Predicted mask (PGM with sidecar, values in [0, 1]).
        predicted: PathBuf,
        /// Ground-truth mask (PGM with sidecar).
        truth: PathBuf,
    },
    /// Print the broadside angular resolution of an antenna layout as JSON.
    Afm {
        /// Layout file (TOML); "default" for the shipped 12x16 layout.
        layout: String,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;

fn config_exit(e: &Error) -> u8 {
    match e {
        Error::Schema(_) | Error::Validation(_) => EXIT_CONFIG,
        _ => EXIT_STAGE,
    }
}

fn run() -> Result<(), (u8, String)> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            products,
        } => {
            let mut cfg = pipeline::load_run_config(&config)
                .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            if let Some(list) = products {
                cfg.products = list
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.trim().parse::<Product>())
                    .collect::<mmpoint::Result<_>>()
                    .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
            }
            cfg.validate().map_err(|e| (EXIT_CONFIG, e.to_string()))?;
            let manifest =
                pipeline::run_pipeline(&cfg).map_err(|e| (EXIT_STAGE, e.to_string()))?;
            println!(
                "wrote {} product file(s) to {}",
                manifest.outputs.len(),
                cfg.out_dir.display()
            );
            Ok(())
        }
        Command::EvalMasks { ram, predicted, truth } => {
            let report = pipeline::evaluate_masks(&ram, &predicted, &Truth::MaskPath(truth))
                .map_err(|e| (config_exit(&e), e.to_string()))?;
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(())
        }
        Command::Afm { layout } => {
            let layout = if layout == "default" {
                ArrayLayout::default_12x16()
            } else {
                let text = std::fs::read_to_string(&layout)
                    .map_err(|e| (EXIT_CONFIG, format!("{layout}: {e}")))?;
                ArrayLayout::from_toml(&text).map_err(|e| (EXIT_CONFIG, e.to_string()))?
            };
            let report =
                pipeline::afm_report(&layout).map_err(|e| (EXIT_STAGE, e.to_string()))?;
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
