//! Successive Rejects: `K - 1` phases of round-robin over the surviving
//! arms, dropping the empirically worst arm after each phase.

use std::collections::VecDeque;

use rand::RngCore;

use super::uniform::empirical_means;
use super::{RoundTracker, Selection, Strategy};
use crate::error::{check_arm, BaiError, Result};
use crate::model::Observation;

/// Cumulative per-arm pull counts `n_1, ..., n_{K-1}` at the end of each
/// phase: `n_k = ceil((T - K) / (logbar(K) (K + 1 - k)))` with
/// `logbar(K) = 1/2 + sum_{i=2}^K 1/i`.
pub fn successive_rejects_schedule(arms: usize, budget: usize) -> Vec<usize> {
    let logbar = 0.5 + (2..=arms).map(|i| 1.0 / i as f64).sum::<f64>();
    let spare = budget.saturating_sub(arms) as f64;
    (1..arms)
        .map(|k| {
            let v = spare / (logbar * (arms + 1 - k) as f64);
            // Guard integer-valued quotients against upward rounding noise.
            (v - 1e-9).ceil().max(0.0) as usize
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SuccessiveRejects {
    arms: usize,
    rounds: RoundTracker,
    schedule: Vec<usize>,
    phase: usize,
    active: Vec<usize>,
    rejected: Vec<usize>,
    queue: VecDeque<usize>,
    sums: Vec<f64>,
    counts: Vec<usize>,
}

impl SuccessiveRejects {
    pub fn new(arms: usize, budget: usize) -> Result<Self> {
        if arms < 2 {
            return Err(BaiError::config("need at least 2 arms"));
        }
        if budget < arms {
            return Err(BaiError::config(format!(
                "budget {budget} is smaller than the {arms} arms"
            )));
        }
        let mut s = Self {
            arms,
            rounds: RoundTracker::new(budget),
            schedule: successive_rejects_schedule(arms, budget),
            phase: 0,
            active: (0..arms).collect(),
            rejected: Vec::new(),
            queue: VecDeque::new(),
            sums: vec![0.0; arms],
            counts: vec![0; arms],
        };
        s.start_phase();
        s.advance();
        Ok(s)
    }

    pub fn schedule(&self) -> &[usize] {
        &self.schedule
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Arms in the order they were rejected.
    pub fn rejected(&self) -> &[usize] {
        &self.rejected
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    fn start_phase(&mut self) {
        self.phase += 1;
        let prev = if self.phase == 1 {
            0
        } else {
            self.schedule[self.phase - 2]
        };
        let pulls = self.schedule[self.phase - 1] - prev;
        for _ in 0..pulls {
            self.queue.extend(self.active.iter().copied());
        }
    }

    // Closes finished phases until there is work queued or one arm remains.
    fn advance(&mut self) {
        while self.queue.is_empty() && self.active.len() > 1 {
            self.reject_worst();
            if self.active.len() > 1 {
                self.start_phase();
            }
        }
    }

    fn reject_worst(&mut self) {
        let means = empirical_means(&self.sums, &self.counts);
        let mut worst = 0;
        for i in 1..self.active.len() {
            let (a, w) = (self.active[i], self.active[worst]);
            // Ties reject the higher index.
            if means[a] <= means[w] {
                worst = i;
            }
        }
        let arm = self.active.remove(worst);
        self.rejected.push(arm);
    }
}

impl Strategy for SuccessiveRejects {
    fn name(&self) -> &'static str {
        "successive-rejects"
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
        // Rounds left over after the last phase go to the survivor.
        let arm = self.queue.front().copied().unwrap_or(self.active[0]);
        let sel = Selection {
            arm,
            propensity: 1.0,
        };
        self.rounds.set_pending(t, sel);
        Ok(sel)
    }

    fn observe(&mut self, obs: &Observation) -> Result<()> {
        check_arm(obs.arm, self.arms)?;
        self.rounds.accept(obs)?;
        self.queue.pop_front();
        self.sums[obs.arm] += obs.outcome;
        self.counts[obs.arm] += 1;
        self.advance();
        Ok(())
    }

    fn current_recommendation(&self) -> usize {
        let means = empirical_means(&self.sums, &self.counts);
        let mut best = self.active[0];
        for &a in &self.active[1..] {
            if means[a] > means[best] {
                best = a;
            }
        }
        best
    }

    fn box_clone(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}
