//! Restricted ℓ2-independence, the continuous-time pinning martingale and
//! the stability / entropic-independence verifiers built on them.

mod checks;
mod family;
mod martingale;

pub use checks::{
    entropic_independence_check, lipschitz_check, quadratic_stability_check, CheckReport,
    EntropicReport, LipschitzReport, THEOREM_TOL,
};
pub use family::{
    mu_family, slice_mu_family, FamilyMember, SliceFamilyMember, DEFAULT_FAMILY_SIZE,
};
pub use martingale::{
    jump_rates, martingale_mean_check, simulate_martingale, JumpEvent, LocalizationTrace,
    MartingaleReport, MARTINGALE_Z_MAX,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::influence::psi_op_norm;
use crate::measure::{CubeMeasure, PinVector};
use crate::sparse::{enumerate_sparse_pins, sample_sparse_pins, SparseFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMode {
    Exact,
    Sampled,
}

/// Largest `‖Ψ(R_u ν)‖_op` over the tested sparse pins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaReport {
    pub alpha: f64,
    pub worst_pin: PinVector,
    pub mode: AlphaMode,
    pub pins_tested: usize,
}

/// Fallback used when exhaustive enumeration exceeds the budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinSampling {
    pub samples: usize,
    pub seed: u64,
}

/// Measures the restricted ℓ2-independence constant of `ν` over
/// `sign(Sparse_c)`. Exhaustive when the pin count fits in `budget`.
pub fn measure_restricted_alpha(
    nu: &CubeMeasure,
    fam: &SparseFamily,
    budget: u128,
    sampling: Option<PinSampling>,
) -> Result<AlphaReport> {
    let mut report = AlphaReport {
        alpha: 0.0,
        worst_pin: PinVector::zeros(nu.n()),
        mode: AlphaMode::Exact,
        pins_tested: 0,
    };
    let visit = |pin: PinVector, report: &mut AlphaReport| -> Result<()> {
        let norm = psi_op_norm(&nu.pin(&pin)?);
        report.pins_tested += 1;
        if norm > report.alpha {
            report.alpha = norm;
            report.worst_pin = pin;
        }
        Ok(())
    };
    match enumerate_sparse_pins(nu, fam, budget) {
        Ok(pins) => {
            for pin in pins {
                visit(pin, &mut report)?;
            }
        }
        Err(Error::BudgetExceeded { required, budget }) => {
            let Some(sampling) = sampling else {
                return Err(Error::BudgetExceeded { required, budget });
            };
            report.mode = AlphaMode::Sampled;
            // the empty pin is always in the family
            visit(PinVector::zeros(nu.n()), &mut report)?;
            for pin in sample_sparse_pins(nu, fam, sampling.samples, sampling.seed) {
                visit(pin, &mut report)?;
            }
        }
        Err(e) => return Err(e),
    }
    Ok(report)
}
