//! UGapEb: gap-based exploration with confidence radii
//! `beta_a = sqrt(c b^2 (T - K) / (H N_a))`.
//!
//! `b` is the outcome range and `H = sum_a max(gap_a, eps)^-2` is the
//! complexity, plugged in from the current empirical gaps.

use rand::RngCore;

use super::uniform::empirical_means;
use super::{RoundTracker, Selection, Strategy};
use crate::error::{check_arm, BaiError, Result};
use crate::model::Observation;
use crate::stats::argmax_lowest;

pub const DEFAULT_EXPLORATION: f64 = 0.5;
pub const GAP_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct UgapEb {
    arms: usize,
    range: f64,
    exploration: f64,
    rounds: RoundTracker,
    sums: Vec<f64>,
    counts: Vec<usize>,
}

/// Upper and lower confidence bounds, and the gap index `B_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapIndices {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub b: Vec<f64>,
}

impl UgapEb {
    pub fn new(arms: usize, budget: usize, range: f64) -> Result<Self> {
        Self::with_exploration(arms, budget, range, DEFAULT_EXPLORATION)
    }

    pub fn with_exploration(
        arms: usize,
        budget: usize,
        range: f64,
        exploration: f64,
    ) -> Result<Self> {
        if arms < 2 {
            return Err(BaiError::config("need at least 2 arms"));
        }
        if budget < arms {
            return Err(BaiError::config(format!(
                "budget {budget} is smaller than the {arms} arms"
            )));
        }
        if !(range.is_finite() && range > 0.0) || !(exploration.is_finite() && exploration > 0.0) {
            return Err(BaiError::config(
                "range and exploration constant must be positive",
            ));
        }
        Ok(Self {
            arms,
            range,
            exploration,
            rounds: RoundTracker::new(budget),
            sums: vec![0.0; arms],
            counts: vec![0; arms],
        })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Requires every arm to have been pulled at least once.
    pub fn indices(&self) -> GapIndices {
        let k = self.arms;
        let means = empirical_means(&self.sums, &self.counts);
        let complexity: f64 = (0..k)
            .map(|a| {
                let rival = (0..k)
                    .filter(|&j| j != a)
                    .map(|j| means[j])
                    .fold(f64::NEG_INFINITY, f64::max);
                (means[a] - rival).abs().max(GAP_FLOOR).powi(-2)
            })
            .sum();
        let spare = (self.rounds.budget() - k) as f64;
        let radius = |a: usize| {
            (self.exploration * self.range * self.range * spare
                / (complexity * self.counts[a] as f64))
                .sqrt()
        };
        let upper: Vec<f64> = (0..k).map(|a| means[a] + radius(a)).collect();
        let lower: Vec<f64> = (0..k).map(|a| means[a] - radius(a)).collect();
        let b = (0..k)
            .map(|a| {
                let best_other = (0..k)
                    .filter(|&j| j != a)
                    .map(|j| upper[j])
                    .fold(f64::NEG_INFINITY, f64::max);
                best_other - lower[a]
            })
            .collect();
        GapIndices { upper, lower, b }
    }

    fn next_arm(&self, t: usize) -> usize {
        if t <= self.arms {
            return t - 1;
        }
        let idx = self.indices();
        let j = argmin_lowest(&idx.b);
        let u = (0..self.arms)
            .filter(|&a| a != j)
            .fold(None::<usize>, |best, a| match best {
                Some(b) if idx.upper[b] >= idx.upper[a] => Some(b),
                _ => Some(a),
            })
            .expect("at least two arms");
        // The wider radius is the one with fewer pulls.
        match self.counts[j].cmp(&self.counts[u]) {
            std::cmp::Ordering::Less => j,
            std::cmp::Ordering::Greater => u,
            std::cmp::Ordering::Equal => j.min(u),
        }
    }
}

fn argmin_lowest(xs: &[f64]) -> usize {
    let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
    argmax_lowest(&neg)
}

impl Strategy for UgapEb {
    fn name(&self) -> &'static str {
        "ugapeb"
    }

    fn num_arms(&self) -> usize {
        self.arms
    }

    fn budget(&self) -> usize {
        self.rounds.budget()
    }

    fn rounds_observed(&self) -> usize {
        self.rounds.observed()
    }

    fn select_arm(&mut self, t: usize, _x: &[f64], _rng: &mut dyn RngCore) -> Result<Selection> {
        self.rounds.check_select(t)?;
        let sel = Selection {
            arm: self.next_arm(t),
            propensity: 1.0,
        };
        self.rounds.set_pending(t, sel);
        Ok(sel)
    }

    fn observe(&mut self, obs: &Observation) -> Result<()> {
        check_arm(obs.arm, self.arms)?;
        self.rounds.accept(obs)?;
        self.sums[obs.arm] += obs.outcome;
        self.counts[obs.arm] += 1;
        Ok(())
    }

    fn current_recommendation(&self) -> usize {
        if self.counts.contains(&0) {
            return argmax_lowest(&empirical_means(&self.sums, &self.counts));
        }
        argmin_lowest(&self.indices().b)
    }

    fn box_clone(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}
