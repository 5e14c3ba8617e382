//! Experiment engine behind the `perihom` CLI: configuration parsing,
//! ensemble sweeps over `(N, realization)` with deterministic ordered output
//! and idempotent resume, convergence statistics, and the self-test suite.

pub mod config;
pub mod experiment;
pub mod selftest;

pub use config::{CaseTag, ExperimentConfig, HarnessError};
pub use experiment::{fit_rate, run_experiment, ConvergenceRecord, RateFit, RunStats};

/// Apply the `PERIHOM_THREADS` override to the global worker pool. Call once
/// at process start; later calls are no-ops.
pub fn init_threads() {
    #[cfg(feature = "parallel")]
    {
        if let Ok(raw) = std::env::var("PERIHOM_THREADS") {
            if let Ok(n) = raw.trim().parse::<usize>() {
                if n >= 1 {
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    }
}
