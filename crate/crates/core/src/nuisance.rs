//! Online, clipped estimates of the conditional mean, second moment and
//! variance of each arm's outcome.
//!
//! Each arm keeps every `(context, outcome)` pair it has observed. Queries
//! average the `k` nearest stored outcomes (Euclidean distance on raw
//! contexts); the pooled mode ignores the context and averages everything.

use std::cell::RefCell;
use std::cmp::Ordering;

use crate::error::{check_arm, BaiError, Result};
use crate::model::{Observation, DEFAULT_C_MU, DEFAULT_C_SIGMA2};

/// How many neighbours a query averages over, as a function of the arm's
/// store size `n`. The result is always capped at `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeighborRule {
    Fixed(usize),
    /// `ceil(n^exponent)`.
    PowerLaw {
        exponent: f64,
    },
}

impl NeighborRule {
    pub const DEFAULT: NeighborRule = NeighborRule::PowerLaw {
        exponent: 2.0 / 3.0,
    };

    pub fn neighbors(&self, n: usize) -> usize {
        let k = match *self {
            NeighborRule::Fixed(k) => k,
            NeighborRule::PowerLaw { exponent } => (n as f64).powf(exponent).ceil() as usize,
        };
        k.clamp(1, n.max(1))
    }
}

/// Whether predictions use the context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pooling {
    Contextual(NeighborRule),
    /// Every query sees the arm's full running mean and second moment.
    Pooled,
}

/// Point predictions for one arm at one context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuisancePrediction {
    /// In `[-C_mu, C_mu]`.
    pub mean: f64,
    /// In `[0, C_mu^2 + C_sigma2]`.
    pub second_moment: f64,
    /// `clip(second_moment - mean^2, 1/C_sigma2, C_sigma2)`.
    pub variance: f64,
}

#[derive(Debug, Clone, Default)]
struct ArmStore {
    contexts: Vec<f64>,
    outcomes: Vec<f64>,
    sum: f64,
    sum_sq: f64,
}

impl ArmStore {
    fn len(&self) -> usize {
        self.outcomes.len()
    }
}

#[derive(Debug, Clone)]
pub struct NuisanceEstimator {
    arms: Vec<ArmStore>,
    dim: usize,
    pooling: Pooling,
    c_mu: f64,
    c_sigma2: f64,
    scratch: RefCell<Vec<(f64, u32)>>,
}

impl NuisanceEstimator {
    pub fn new(
        arms: usize,
        dim: usize,
        pooling: Pooling,
        c_mu: f64,
        c_sigma2: f64,
    ) -> Result<Self> {
        if arms == 0 {
            return Err(BaiError::config("estimator needs at least one arm"));
        }
        if !(c_mu.is_finite() && c_mu > 0.0) || !(c_sigma2.is_finite() && c_sigma2 >= 1.0) {
            return Err(BaiError::config("need C_mu > 0 and C_sigma2 >= 1"));
        }
        if let Pooling::Contextual(NeighborRule::Fixed(0)) = pooling {
            return Err(BaiError::config("k_neighbors must be positive"));
        }
        Ok(Self {
            arms: vec![ArmStore::default(); arms],
            dim,
            pooling,
            c_mu,
            c_sigma2,
            scratch: RefCell::new(Vec::new()),
        })
    }

    /// k-NN with `k = ceil(n^(2/3))` and the default bounds.
    pub fn contextual(arms: usize, dim: usize) -> Self {
        Self::new(
            arms,
            dim,
            Pooling::Contextual(NeighborRule::DEFAULT),
            DEFAULT_C_MU,
            DEFAULT_C_SIGMA2,
        )
        .expect("default parameters are valid")
    }

    /// Context-free running moments with the default bounds.
    pub fn pooled(arms: usize, dim: usize) -> Self {
        Self::new(arms, dim, Pooling::Pooled, DEFAULT_C_MU, DEFAULT_C_SIGMA2)
            .expect("default parameters are valid")
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn c_mu(&self) -> f64 {
        self.c_mu
    }

    pub fn c_sigma2(&self) -> f64 {
        self.c_sigma2
    }

    pub fn pooling(&self) -> Pooling {
        self.pooling
    }

    /// Number of stored samples for `arm`.
    pub fn store_size(&self, arm: usize) -> usize {
        self.arms.get(arm).map_or(0, ArmStore::len)
    }

    pub fn update(&mut self, obs: &Observation) -> Result<()> {
        self.update_raw(obs.arm, &obs.context, obs.outcome)
    }

    pub fn update_raw(&mut self, arm: usize, context: &[f64], outcome: f64) -> Result<()> {
        check_arm(arm, self.arms.len())?;
        if context.len() != self.dim {
            return Err(BaiError::domain(format!(
                "context has length {}, estimator expects {}",
                context.len(),
                self.dim
            )));
        }
        let store = &mut self.arms[arm];
        store.contexts.extend_from_slice(context);
        store.outcomes.push(outcome);
        store.sum += outcome;
        store.sum_sq += outcome * outcome;
        Ok(())
    }

    pub fn predict(&self, arm: usize, x: &[f64]) -> NuisancePrediction {
        let (raw_mean, raw_second) = self.raw_moments(arm, x);
        let mean = raw_mean.clamp(-self.c_mu, self.c_mu);
        let second_moment = raw_second.clamp(0.0, self.c_mu * self.c_mu + self.c_sigma2);
        NuisancePrediction {
            mean,
            second_moment,
            variance: self.clip_variance(second_moment - mean * mean),
        }
    }

    pub fn predict_mean(&self, arm: usize, x: &[f64]) -> f64 {
        self.predict(arm, x).mean
    }

    pub fn predict_second_moment(&self, arm: usize, x: &[f64]) -> f64 {
        self.predict(arm, x).second_moment
    }

    pub fn predict_variance(&self, arm: usize, x: &[f64]) -> f64 {
        self.predict(arm, x).variance
    }

    /// `max(min(v, C_sigma2), 1/C_sigma2)`.
    pub fn clip_variance(&self, v: f64) -> f64 {
        let v = if v.is_nan() { 0.0 } else { v };
        v.min(self.c_sigma2).max(1.0 / self.c_sigma2)
    }

    // Unclipped (mean, second moment); (0, 0) for an empty or unknown arm.
    fn raw_moments(&self, arm: usize, x: &[f64]) -> (f64, f64) {
        let Some(store) = self.arms.get(arm) else {
            return (0.0, 0.0);
        };
        let n = store.len();
        if n == 0 {
            return (0.0, 0.0);
        }
        let rule = match self.pooling {
            Pooling::Pooled => return (store.sum / n as f64, store.sum_sq / n as f64),
            Pooling::Contextual(rule) => rule,
        };
        let k = rule.neighbors(n);
        if k >= n {
            return (store.sum / n as f64, store.sum_sq / n as f64);
        }

        let mut scratch = self.scratch.borrow_mut();
        scratch.clear();
        let d = self.dim;
        scratch.extend(store.contexts.chunks_exact(d).enumerate().map(|(i, c)| {
            let dist: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            (dist, i as u32)
        }));
        let by_distance = |a: &(f64, u32), b: &(f64, u32)| -> Ordering {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
        };
        scratch.select_nth_unstable_by(k - 1, by_distance);
        let (mut s, mut s2) = (0.0, 0.0);
        for &(_, i) in &scratch[..k] {
            let y = store.outcomes[i as usize];
            s += y;
            s2 += y * y;
        }
        (s / k as f64, s2 / k as f64)
    }
}
