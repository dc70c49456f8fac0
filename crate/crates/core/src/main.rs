//! Command-line front end: single runs, convergence studies and entropy
//! traces driven by JSON configurations.

use clap::{Parser, Subcommand};
use spsg::config::{QuadratureKind, RunConfig};
use spsg::runner;
use spsg::study;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "spsg",
    version,
    about = "Structure-preserving stochastic Galerkin solver for Fokker-Planck equations with background interactions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write snapshots, a diagnostics time
    /// series and a metadata record.
    Run {
        config: PathBuf,
        /// Output directory (defaults to `out/`).
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Configuration overrides as key.path=value entries.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Estimate convergence orders across a ladder of grids.
    Converge {
        config: PathBuf,
        /// Comma-separated grid sizes, roughly doubling (e.g. 21,41,81).
        #[arg(long, value_delimiter = ',', default_value = "21,41,81")]
        grids: Vec<usize>,
        /// Comma-separated observation times (e.g. 1,5,10).
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        times: Vec<f64>,
        /// Quadrature rules to study (2, 4, 6, G); defaults to all.
        #[arg(long, value_delimiter = ',')]
        quads: Option<Vec<String>>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Run and emit the relative-entropy trace with its production term and
    /// the semi-discrete identity check.
    Entropy {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run {
            config,
            out,
            overrides,
        } => {
            let resolved = load(&config, &overrides)?;
            let result = runner::run(&resolved, Some(&out), &[]).map_err(|e| e.to_string())?;
            println!(
                "run finished: {} steps, dt = {}, mass drift = {:.3e}",
                result.n_steps, result.dt, result.mass_drift
            );
            println!(
                "positivity bounds: explicit {} semi-implicit {}",
                result.explicit_bound, result.semiimplicit_bound
            );
            if let Some(p) = &result.series_file {
                println!("series: {}", p.display());
            }
            if let Some(p) = &result.metadata_file {
                println!("metadata: {}", p.display());
            }
            Ok(())
        }
        Command::Converge {
            config,
            grids,
            times,
            quads,
            out,
            overrides,
        } => {
            let resolved = load(&config, &overrides)?;
            let quads = match quads {
                None => QuadratureKind::all().to_vec(),
                Some(labels) => labels
                    .iter()
                    .map(|l| {
                        QuadratureKind::from_label(l)
                            .ok_or_else(|| format!("unknown quadrature '{l}' (use 2, 4, 6 or G)"))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            };
            let result = study::convergence_study(&resolved, &grids, &times, &quads, Some(&out))
                .map_err(|e| e.to_string())?;
            println!("quad  time      order(mean)  order(variance)");
            for row in &result.rows {
                println!(
                    "{:<4}  {:<8}  {:<11.4}  {:.4}",
                    row.quadrature, row.time, row.order_mean, row.order_variance
                );
            }
            if let Some(p) = &result.table_file {
                println!("rates table: {}", p.display());
            }
            Ok(())
        }
        Command::Entropy {
            config,
            out,
            overrides,
        } => {
            let resolved = load(&config, &overrides)?;
            let result = runner::entropy_trace(&resolved, &out).map_err(|e| e.to_string())?;
            let last = result.series.last().expect("runs record at least one row");
            for (k, h) in result.tracked_h.iter().enumerate() {
                println!(
                    "projection {h}: final H = {} (valid: {})",
                    last.entropy[k].value, last.entropy[k].valid
                );
            }
            Ok(())
        }
    }
}

fn load(path: &std::path::Path, overrides: &[String]) -> Result<spsg::config::Resolved, String> {
    let raw = RunConfig::from_file_with_overrides(path, overrides).map_err(|e| e.to_string())?;
    raw.resolve().map_err(|e| e.to_string())
}
