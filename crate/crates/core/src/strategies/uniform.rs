//! Round-robin sampling with an empirical-best recommendation.

use rand::RngCore;

use super::{RoundTracker, Selection, Strategy};
use crate::error::{check_arm, BaiError, Result};
use crate::model::Observation;
use crate::stats::argmax_lowest;

#[derive(Debug, Clone)]
pub struct UniformEba {
    arms: usize,
    rounds: RoundTracker,
    sums: Vec<f64>,
    counts: Vec<usize>,
}

impl UniformEba {
    pub fn new(arms: usize, budget: usize) -> Result<Self> {
        if arms < 2 {
            return Err(BaiError::config("need at least 2 arms"));
        }
        Ok(Self {
            arms,
            rounds: RoundTracker::new(budget),
            sums: vec![0.0; arms],
            counts: vec![0; arms],
        })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Sample means; unpulled arms are negative infinity.
    pub fn means(&self) -> Vec<f64> {
        empirical_means(&self.sums, &self.counts)
    }
}

pub(crate) fn empirical_means(sums: &[f64], counts: &[usize]) -> Vec<f64> {
    sums.iter()
        .zip(counts)
        .map(|(s, &n)| {
            if n == 0 {
                f64::NEG_INFINITY
            } else {
                s / n as f64
            }
        })
        .collect()
}

impl Strategy for UniformEba {
    fn name(&self) -> &'static str {
        "uniform-eba"
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
            arm: (t - 1) % self.arms,
            propensity: 1.0 / self.arms as f64,
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
        argmax_lowest(&self.means())
    }

    fn box_clone(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    #[test]
    fn round_robin_and_recommendation() {
        let mut s = UniformEba::new(3, 7).unwrap();
        let mut rng = from_seed(0);
        let outcomes = [0.0, 5.0, 1.0];
        for t in 1..=7 {
            let sel = s.select_arm(t, &[], &mut rng).unwrap();
            assert_eq!(sel.arm, (t - 1) % 3);
            assert!((sel.propensity - 1.0 / 3.0).abs() < 1e-15);
            s.observe(&Observation::new(
                t,
                vec![],
                sel.arm,
                outcomes[sel.arm],
                sel.propensity,
            ))
            .unwrap();
        }
        assert_eq!(s.counts(), &[3, 2, 2]);
        assert_eq!(s.recommend().unwrap(), 1);
    }

    #[test]
    fn unpulled_arms_rank_last() {
        let mut s = UniformEba::new(3, 3).unwrap();
        let mut rng = from_seed(0);
        let sel = s.select_arm(1, &[], &mut rng).unwrap();
        s.observe(&Observation::new(
            1,
            vec![],
            sel.arm,
            -100.0,
            sel.propensity,
        ))
        .unwrap();
        assert_eq!(s.current_recommendation(), 0);
    }
}
