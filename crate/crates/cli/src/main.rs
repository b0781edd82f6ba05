use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bohm_core::pattern::{frobenius_distance, read_dump, read_dump_csv, Normalization, PatternGrid};
use bohm_core::render::{render, ColorScale, RenderOptions};
use bohm_cli::{run, validate, ExperimentConfig, RunError};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bohm", version, about = "Bohmian trajectories of an entangled qubit pair")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Norm {
    UnitMass,
    UnitFrobenius,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Linear,
    Log,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config or a previous run manifest.
    Run {
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check a config and print diagnostics.
    Validate { config: PathBuf },
    /// Render a pattern dump to PNG.
    Render {
        dump: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "log")]
        scale: Scale,
        #[arg(long, default_value_t = 1)]
        pixels_per_cell: u32,
    },
    /// Frobenius distance between two pattern dumps.
    Distance {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value = "unit-frobenius")]
        normalization: Norm,
    },
}

fn load_dump(path: &Path) -> Result<PatternGrid, String> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let reader = BufReader::new(file);
    let res = if path.extension().is_some_and(|e| e == "csv") {
        read_dump_csv(reader)
    } else {
        read_dump(reader)
    };
    res.map(|(g, _)| g)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn load_config(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    ExperimentConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let diags = validate(&cfg);
            for d in &diags {
                println!("{d}");
            }
            if bohm_cli::validate::has_errors(&diags) {
                ExitCode::from(1)
            } else {
                println!("ok: {}", cfg.experiment);
                ExitCode::SUCCESS
            }
        }
        Command::Run { config, output_dir, workers } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            if workers.is_some() {
                cfg.workers = workers;
            }
            match run(&cfg) {
                Ok(m) => {
                    for w in &m.warnings {
                        eprintln!("{w}");
                    }
                    println!(
                        "{}: {} artifacts in {} ({:.1} s, {} aborted trajectories)",
                        m.experiment,
                        m.artifacts.len(),
                        cfg.output_dir.display(),
                        m.wall_time_seconds,
                        m.aborted_trajectories
                    );
                    ExitCode::SUCCESS
                }
                Err(RunError::Invalid(diags)) => {
                    for d in diags {
                        eprintln!("{d}");
                    }
                    ExitCode::from(1)
                }
                Err(e) => {
                    eprintln!("error: {e} (partial results in {})", cfg.output_dir.display());
                    ExitCode::from(2)
                }
            }
        }
        Command::Render { dump, output, scale, pixels_per_cell } => {
            let grid = match load_dump(&dump) {
                Ok(g) => g,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let out = output.unwrap_or_else(|| dump.with_extension("png"));
            let opts = RenderOptions {
                scale: match scale {
                    Scale::Linear => ColorScale::Linear,
                    Scale::Log => ColorScale::Log,
                },
                pixels_per_cell,
                ..RenderOptions::default()
            };
            let note = dump.display().to_string();
            match render(&grid, &out, &opts, Some(&note)) {
                Ok(()) => {
                    println!("{}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Distance { a, b, normalization } => {
            let (ga, gb) = match (load_dump(&a), load_dump(&b)) {
                (Ok(x), Ok(y)) => (x, y),
                (Err(e), _) | (_, Err(e)) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let norm = match normalization {
                Norm::UnitMass => Normalization::UnitMass,
                Norm::UnitFrobenius => Normalization::UnitFrobenius,
            };
            match frobenius_distance(&ga, &gb, norm) {
                Ok(d) => {
                    println!("{}", d.value);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
