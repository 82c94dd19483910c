use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use porous_fv::io::run::{generate_field, run_case, write_histogram, CsvTable};
use porous_fv::io::{field_metrics, load_case, read_vtk, spatial_pdf, BinSpacing, CaseConfig};
use porous_fv::{Error, Result};

#[derive(Parser)]
#[command(
    name = "porous-fv",
    version,
    about = "Darcy flow and transport in heterogeneous porous media"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the case's permeability field and write it as VTK.
    Genfield {
        /// Case file or built-in template name.
        case: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// Run a full simulation.
    Run {
        /// Case file or built-in template name.
        case: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
        #[arg(long)]
        write_interval: Option<f64>,
    },
    /// Histogram of a cell field from a VTK file.
    Pdf {
        file: PathBuf,
        #[arg(long, default_value = "c")]
        field: String,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long, value_enum, default_value = "linear")]
        spacing: Spacing,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// Mean, variance, extrema and integral of cell fields in a VTK file.
    Metrics {
        file: PathBuf,
        /// Fields to report; all fields when omitted.
        #[arg(long)]
        field: Vec<String>,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Spacing {
    Linear,
    Log,
}

fn load(case: &str, seed: Option<u64>) -> Result<CaseConfig> {
    let mut cfg = load_case(case)?;
    if let Some(seed) = seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "field".into())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::config(format!("cannot create {}: {e}", dir.display())))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Genfield {
            case,
            seed,
            output_dir,
        } => {
            let cfg = load(&case, seed)?;
            let path = generate_field(&cfg, &output_dir)?;
            println!("{}", path.display());
        }
        Command::Run {
            case,
            seed,
            output_dir,
            write_interval,
        } => {
            let mut cfg = load(&case, seed)?;
            if write_interval.is_some() {
                cfg.time.write_interval = write_interval;
            }
            let summary = run_case(&cfg, &output_dir)?;
            for (name, value) in &summary.diagnostics {
                println!("{name} = {value:.6e}");
            }
            if let Some(dual) = &summary.dual {
                println!("outer iterations = {}", dual.iterations);
            }
            info!(
                "wrote {} files to {}",
                summary.files.len(),
                output_dir.display()
            );
        }
        Command::Pdf {
            file,
            field,
            bins,
            spacing,
            output_dir,
        } => {
            let data = read_vtk(&file)?;
            let mesh = data.mesh()?;
            let values = data.field(&field)?;
            let spacing = match spacing {
                Spacing::Linear => BinSpacing::Linear,
                Spacing::Log => BinSpacing::Log,
            };
            let hist = spatial_pdf(&mesh, &values, bins, spacing)?;
            create_dir(&output_dir)?;
            let path = write_histogram(
                output_dir.join(format!("{}_pdf_{field}.csv", stem(&file))),
                &hist,
            )?;
            println!("{}", path.display());
        }
        Command::Metrics {
            file,
            field,
            output_dir,
        } => {
            let data = read_vtk(&file)?;
            let mesh = data.mesh()?;
            let names = if field.is_empty() {
                data.field_names()
            } else {
                field
            };
            create_dir(&output_dir)?;
            let mut table = CsvTable::create(
                output_dir.join(format!("{}_metrics.csv", stem(&file))),
                &["field", "mean", "variance", "min", "max", "integral"],
            )?;
            for name in &names {
                let m = field_metrics(&mesh, &data.field(name)?)?;
                println!(
                    "{name}: mean {:.6e} variance {:.6e} min {:.6e} max {:.6e} integral {:.6e}",
                    m.mean, m.variance, m.min, m.max, m.integral
                );
                table.row(Some(name), &[m.mean, m.variance, m.min, m.max, m.integral])?;
            }
            println!("{}", table.finish()?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
