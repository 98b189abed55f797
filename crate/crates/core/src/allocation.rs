//! Target allocation ratios.
//!
//! With two arms the target draws each arm in proportion to its conditional
//! standard deviation; with three or more arms, in proportion to its
//! conditional variance. The branch is keyed on the number of arms in the
//! problem.

use crate::error::{BaiError, Result};
use crate::model::LocationShiftBandit;
use crate::nuisance::NuisanceEstimator;
use crate::stats::compensated_sum;

/// A probability vector over arms with strictly positive entries.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationRatio {
    probs: Vec<f64>,
}

impl AllocationRatio {
    /// Wraps `probs` after checking positivity and normalization to 1e-12.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(BaiError::domain(
                "allocation entries must be positive and finite",
            ));
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(BaiError::domain(format!("allocation sums to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(arms: usize) -> Self {
        Self {
            probs: vec![1.0 / arms as f64; arms],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_arms(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, arm: usize) -> f64 {
        self.probs[arm]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

fn normalize(weights: Vec<f64>) -> Vec<f64> {
    let total = compensated_sum(weights.iter().copied());
    weights.into_iter().map(|w| w / total).collect()
}

/// `w*(a|x)` from the conditional variances at one context.
pub fn target_allocation(variances: &[f64]) -> Result<AllocationRatio> {
    let k = variances.len();
    if k < 2 {
        return Err(BaiError::domain(format!("need at least 2 arms, got {k}")));
    }
    if let Some(v) = variances.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(BaiError::domain(format!(
            "variances must be positive and finite, got {v}"
        )));
    }
    let weights = if k == 2 {
        variances.iter().map(|v| v.sqrt()).collect()
    } else {
        variances.to_vec()
    };
    Ok(AllocationRatio {
        probs: normalize(weights),
    })
}

/// Plug-in allocation: [`target_allocation`] over the estimator's clipped
/// variance predictions at `x`.
pub fn estimated_allocation(
    est: &NuisanceEstimator,
    arms: usize,
    x: &[f64],
) -> Result<AllocationRatio> {
    let variances: Vec<f64> = (0..arms).map(|a| est.predict_variance(a, x)).collect();
    target_allocation(&variances)
}

/// The true target allocation of `model` at context `x`.
pub fn oracle_allocation(model: &LocationShiftBandit, x: &[f64]) -> AllocationRatio {
    let variances: Vec<f64> = (0..model.num_arms())
        .map(|a| model.conditional_variance(a, x))
        .collect();
    target_allocation(&variances).expect("model variances are positive")
}

/// Smallest entry the clipping guarantees: `(1/C_sigma2) / (K * C_sigma2)`.
pub fn allocation_floor(arms: usize, c_sigma2: f64) -> f64 {
    (1.0 / c_sigma2) / (arms as f64 * c_sigma2)
}

/// True iff every entry clears [`allocation_floor`] (with 1e-12 slack).
pub fn allocation_lower_bound_floor(probs: &AllocationRatio, arms: usize, c_sigma2: f64) -> bool {
    let floor = allocation_floor(arms, c_sigma2) - 1e-12;
    probs.probs.iter().all(|&p| p >= floor)
}
