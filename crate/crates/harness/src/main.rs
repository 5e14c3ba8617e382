//! `perihom` — effective conductivity of random media by periodization.
//!
//! Subcommands: `run` (ensemble sweep from a config file), `tensor` (one-shot
//! tensor as JSON), `weyl` (decomposition report of a stored field),
//! `selftest` (built-in invariant suite). Exit codes: 0 success, 1 compute
//! failure, 2 usage or configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use perihom::config::{parse_a_matrix, parse_medium_file, ExperimentConfig, HarnessError};
use perihom::{init_threads, run_experiment};
use perihom_core::homogenize::{
    sigma_dual_discrete, sigma_nonsym, sigma_primal_continuous, sigma_primal_discrete,
};
use perihom_core::lattice::{read_field, FieldPayload, TorusGrid};
use perihom_core::media::{sample_conductances, sample_matrix_field, MatrixKind, Seed};
use perihom_core::solvers::SolveOptions;
use perihom_core::weyl::decompose;

#[derive(Parser)]
#[command(name = "perihom", version, about = "Effective conductivity of random media by periodization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) the ensemble sweep described by a config file.
    Run {
        /// Path to the experiment configuration.
        config: PathBuf,
    },
    /// Compute one tensor for a medium file and grid side, print JSON.
    Tensor {
        /// Path to a medium file ([medium] section with a `d` key).
        medium: PathBuf,
        /// Torus side N.
        n: usize,
        /// Dual tensor (the matrix of ᵗl σ⁻¹ l) instead of the primal.
        #[arg(long, conflicts_with_all = ["nonsym", "continuous"])]
        dual: bool,
        /// Non-symmetric flow tensor (skew medium sample plus constant `a`).
        #[arg(long, conflicts_with_all = ["dual", "continuous"])]
        nonsym: bool,
        /// Conforming-cell discretization of the continuous operator.
        #[arg(long, conflicts_with_all = ["dual", "nonsym"])]
        continuous: bool,
        /// Master seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Realization index.
        #[arg(long, default_value_t = 0)]
        realization: u64,
        /// Solver relative residual.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Decomposition report for a stored vector field (PHOM container).
    Weyl {
        /// Path to the binary field file.
        field_file: PathBuf,
    },
    /// Run the built-in invariant suite; exit 0 when every check passes.
    Selftest,
}

#[derive(serde::Serialize)]
struct WeylReport {
    d: usize,
    n: usize,
    mean: Vec<f64>,
    norm_total: f64,
    norm_potential: f64,
    norm_solenoidal: f64,
    parseval_residual: f64,
    orthogonality_residual: f64,
    reconstruction_residual: f64,
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HarnessError::Config(_) | HarnessError::DigestMismatch { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Run { config } => {
            let config = ExperimentConfig::from_file(&config)?;
            let (record, stats) = run_experiment(&config)?;
            eprintln!(
                "run complete: {} computed, {} resumed, {} failed; outputs in {}",
                stats.computed,
                stats.skipped,
                stats.failed,
                config.output_dir.display()
            );
            for s in &record.per_n {
                eprintln!(
                    "  N={:>4}: ok {}, failed {}, mean_11 {:.6}, std_11 {:.3e}",
                    s.n, s.ok, s.failed, s.mean[0], s.std[0]
                );
            }
            match &record.rate {
                Ok(fit) => eprintln!("  rate: {} slope {:.3} (residual {:.2e})", fit.target, fit.slope, fit.residual),
                Err(msg) => eprintln!("  rate: not fitted ({msg})"),
            }
            Ok(if stats.failed > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::Tensor { medium, n, dual, nonsym, continuous, seed, realization, tol } => {
            let text = std::fs::read_to_string(&medium)?;
            let (spec, d) = parse_medium_file(&text)?;
            let grid = TorusGrid::new(d, n)?;
            let opts = SolveOptions { tol, max_iter: 50 * n };
            let seed = Seed::realization(seed, realization);
            let tensor = if dual {
                let xi = sample_conductances(&spec, seed, grid)?;
                sigma_dual_discrete(&xi, opts)?
            } else if nonsym {
                let a = parse_a_matrix(&text, d)?;
                let e = sample_matrix_field(&spec, seed, grid, MatrixKind::Skew)?;
                sigma_nonsym(&a, &e, opts)?.0
            } else if continuous {
                let a = sample_matrix_field(&spec, seed, grid, MatrixKind::Symmetric)?;
                sigma_primal_continuous(&a, opts)?.0
            } else {
                let xi = sample_conductances(&spec, seed, grid)?;
                sigma_primal_discrete(&xi, opts)?.0
            };
            let mut tensor = tensor;
            tensor.seed = Some((seed.master, seed.realization));
            println!("{}", tensor.to_json());
            Ok(ExitCode::SUCCESS)
        }
        Command::Weyl { field_file } => {
            let mut file = std::fs::File::open(&field_file)?;
            let payload = read_field(&mut file)
                .map_err(|e| HarnessError::Compute(format!("{}: {e}", field_file.display())))?;
            let FieldPayload::Vector(v) = payload else {
                return Err(HarnessError::Config(perihom_core::config::ConfigError::Invalid(
                    "weyl needs a vector-kind field (tag 1)".into(),
                )));
            };
            let split = decompose(&v);
            let vn = v.norm();
            let ip = split.potential.inner(&split.solenoidal).unwrap();
            let mut rec = split.reconstruct();
            rec.axpy(-1.0, &v);
            let report = WeylReport {
                d: v.grid().d(),
                n: v.grid().n(),
                mean: split.mean.clone(),
                norm_total: vn,
                norm_potential: split.potential.norm(),
                norm_solenoidal: split.solenoidal.norm(),
                parseval_residual: (split.parseval_norm() - vn).abs(),
                orthogonality_residual: ip.abs(),
                reconstruction_residual: rec.norm(),
            };
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest => {
            let failures = perihom::selftest::run(std::io::stdout())?;
            Ok(if failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}
