//! Parallel restarts for the structured fit.
//!
//! Restarts are independent, so they run on a rayon pool and the winner is
//! chosen with the same rule as the sequential library routine; the model
//! is therefore identical whatever the thread count.

use hpds_core::tensor::AlmostSymTensor;
use hpds_core::transform::{fit_single, select_best, FitOptions, TransformModel};
use rayon::prelude::*;

use crate::error::CliError;

/// Caps the number of worker threads when set to a positive integer.
pub const THREADS_ENV: &str = "ODECO_HPDS_THREADS";

/// Thread cap from the environment, `None` when unset.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Input(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

pub fn fit_parallel(a: &AlmostSymTensor, opts: &FitOptions) -> Result<TransformModel, CliError> {
    if a.order() < 3 {
        return Err(CliError::Refused(format!(
            "the structured fit needs order k >= 3, got k = {}",
            a.order()
        )));
    }
    let run = || -> Vec<_> {
        (0..opts.restarts.max(1))
            .into_par_iter()
            .map(|i| fit_single(a, opts.restart_seed(i), opts.max_iter, opts.stop_tol))
            .collect()
    };
    let fits = match thread_cap()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Numerical(format!("cannot start worker threads: {e}")))?
            .install(run),
        None => run(),
    };
    Ok(select_best(fits, opts.stop_tol)?)
}
