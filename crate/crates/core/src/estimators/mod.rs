//! Disorder-replica estimators of limit quantities.
//!
//! Every estimator draws replica `r` from `(seed, r)` through the
//! counter-based generator, runs replicas in parallel and reduces results
//! in replica order, so outputs do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{sample_disorder, DisorderLaw, DisorderSample};
use crate::error::{Error, Result};
use crate::kernel::{KernelKind, KernelSpec, ReturnKernel};
use crate::partition::ModelParams;

mod correlations;
mod free_energy;
mod paths;
pub mod stats;

pub use correlations::*;
pub use free_energy::*;
pub use paths::*;

/// Everything that defines a replica population except the length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub params: ModelParams,
    pub kernel: KernelKind,
    /// Only read for the power-law kernel.
    pub alpha: f64,
    pub omega_law: DisorderLaw,
    pub omega_tilde_law: DisorderLaw,
    pub replicas: usize,
    pub seed: u64,
}

impl Ensemble {
    pub fn new(params: ModelParams, replicas: usize, seed: u64) -> Self {
        Ensemble {
            params,
            kernel: KernelKind::Srw,
            alpha: 1.5,
            omega_law: DisorderLaw::Gaussian,
            omega_tilde_law: DisorderLaw::Gaussian,
            replicas,
            seed,
        }
    }

    pub fn with_laws(mut self, omega: DisorderLaw, omega_tilde: DisorderLaw) -> Self {
        self.omega_law = omega;
        self.omega_tilde_law = omega_tilde;
        self
    }

    pub fn with_kernel(mut self, kind: KernelKind, alpha: f64) -> Self {
        self.kernel = kind;
        self.alpha = alpha;
        self
    }

    pub fn with_params(mut self, params: ModelParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_replicas(mut self, replicas: usize) -> Self {
        self.replicas = replicas;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.replicas < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 replicas, got {}",
                self.replicas
            )));
        }
        self.kernel_spec(1).validate()
    }

    pub fn kernel_spec(&self, n: usize) -> KernelSpec {
        KernelSpec {
            kind: self.kernel,
            alpha: self.alpha,
            n_max: n,
        }
    }

    /// Kernel tabulated up to gap `n`.
    pub fn kernel_for(&self, n: usize) -> Result<ReturnKernel> {
        self.kernel_spec(n.max(1)).build()
    }

    pub fn sample(&self, n: usize, replica: u64) -> DisorderSample {
        sample_disorder(
            self.omega_law,
            self.omega_tilde_law,
            n,
            self.params.h,
            self.seed,
            replica,
        )
    }
}

/// Map replicas `0..count` in parallel, collected in replica order.
pub(crate) fn par_replicas<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..count as u64).into_par_iter().map(f).collect()
}

pub(crate) fn check_ladder(ladder: &[usize]) -> Result<()> {
    if ladder.is_empty() || ladder[0] == 0 || ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!(
            "length ladder must be non-empty, positive and strictly increasing: {ladder:?}"
        )));
    }
    Ok(())
}

pub(crate) fn finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Numerical(format!("{what} is not finite: {x}")))
    }
}
