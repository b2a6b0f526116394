//! Dense-matrix capacity limits.

use crate::error::{Error, Result};

/// Environment variable overriding the default qubit budget.
pub const BUDGET_ENV: &str = "BERRYLAB_MAX_QUBITS";

/// Default maximum number of qubits (dimension 16384) for any dense operator.
pub const DEFAULT_MAX_QUBITS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseBudget {
    pub max_qubits: usize,
}

impl Default for DenseBudget {
    fn default() -> Self {
        Self {
            max_qubits: DEFAULT_MAX_QUBITS,
        }
    }
}

impl DenseBudget {
    pub fn new(max_qubits: usize) -> Self {
        Self { max_qubits }
    }

    /// Reads [`BUDGET_ENV`], falling back to the default when unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var(BUDGET_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .map(Self::new)
                .map_err(|_| Error::Config(format!("{BUDGET_ENV}={v:?} is not a qubit count"))),
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn check(&self, qubits: usize) -> Result<()> {
        if qubits > self.max_qubits {
            Err(Error::Capacity {
                qubits,
                limit: self.max_qubits,
            })
        } else {
            Ok(())
        }
    }
}

static GLOBAL: std::sync::OnceLock<DenseBudget> = std::sync::OnceLock::new();

impl DenseBudget {
    /// Process-wide budget, read from the environment on first use.
    /// An unparsable override falls back to the default.
    pub fn current() -> DenseBudget {
        *GLOBAL.get_or_init(|| Self::from_env().unwrap_or_default())
    }
}
