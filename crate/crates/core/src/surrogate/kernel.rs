use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::instance::BinaryMask;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `exp(-gamma * |u - v|^2)`
    Gaussian { gamma: f64 },
    /// `u . v`
    Linear,
}

impl KernelSpec {
    pub fn gaussian(gamma: f64) -> Result<Self> {
        let k = Self::Gaussian { gamma };
        k.validate()?;
        Ok(k)
    }

    /// Gaussian with `gamma = 1/d'`.
    pub fn default_for(d_prime: usize) -> Self {
        Self::Gaussian {
            gamma: 1.0 / d_prime.max(1) as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Gaussian { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                contract(format!("gaussian gamma must be positive and finite, got {gamma}"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::Linear => "linear",
        }
    }
}

/// Kernel value between two masks of equal length.
pub fn kernel_eval(spec: &KernelSpec, u: &BinaryMask, v: &BinaryMask) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    match *spec {
        KernelSpec::Gaussian { gamma } => (-gamma * f64::from(u.squared_distance(v))).exp(),
        KernelSpec::Linear => f64::from(u.dot(v)),
    }
}
