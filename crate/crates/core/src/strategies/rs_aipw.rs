//! Random sampling with plug-in target allocations, and AIPW recommendation.
//!
//! Rounds `1..=K` draw arm `t` with recorded propensity `1/K` and zero mean
//! predictions. Later rounds estimate the conditional variances from the
//! history, form the target allocation at the current context, and draw by
//! inverse CDF. Every observation contributes one AIPW score per arm,
//! computed from the nuisance state before that observation is stored.

use std::sync::Arc;

use rand::{Rng, RngCore};

use super::{draw_by_cumulative, RoundTracker, Selection, Strategy};
use crate::allocation::{estimated_allocation, oracle_allocation, target_allocation};
use crate::error::{check_arm, BaiError, Result};
use crate::estimators::{aipw_term, NuisanceTraceRow};
use crate::model::{LocationShiftBandit, Observation};
use crate::nuisance::{NeighborRule, NuisanceEstimator, Pooling};
use crate::stats::argmax_lowest;

/// Which propensity enters the inverse weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    /// The probability actually used to draw the arm.
    Aipw,
    /// The allocation re-estimated from rounds before `t` at `x_t`. Differs
    /// from `Aipw` only in the initialization rounds.
    Dr,
}

#[derive(Debug, Clone)]
pub enum NuisanceSource {
    Estimated(NuisanceEstimator),
    /// True conditional means and target allocation from the model; no
    /// initialization phase.
    Oracle(Arc<LocationShiftBandit>),
}

#[derive(Debug, Clone)]
struct Pending {
    means: Vec<f64>,
    propensities: Vec<f64>,
    // Re-estimated allocation for the DR score.
    reestimated: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RsAipw {
    name: &'static str,
    arms: usize,
    score: ScoreKind,
    nuisance: NuisanceSource,
    rounds: RoundTracker,
    pending: Option<Pending>,
    score_sums: Vec<f64>,
    last_scores: Vec<f64>,
    trace: Option<Vec<NuisanceTraceRow>>,
}

impl RsAipw {
    fn with_source(
        name: &'static str,
        arms: usize,
        budget: usize,
        score: ScoreKind,
        nuisance: NuisanceSource,
    ) -> Result<Self> {
        if arms < 2 {
            return Err(BaiError::config("need at least 2 arms"));
        }
        if budget < arms {
            return Err(BaiError::config(format!(
                "budget {budget} is smaller than the {arms} arms"
            )));
        }
        Ok(Self {
            name,
            arms,
            score,
            nuisance,
            rounds: RoundTracker::new(budget),
            pending: None,
            score_sums: vec![0.0; arms],
            last_scores: vec![0.0; arms],
            trace: None,
        })
    }

    /// k-NN nuisances on the context.
    pub fn contextual(
        arms: usize,
        dim: usize,
        budget: usize,
        score: ScoreKind,
        c_mu: f64,
        c_sigma2: f64,
    ) -> Result<Self> {
        let est = NuisanceEstimator::new(
            arms,
            dim,
            Pooling::Contextual(NeighborRule::DEFAULT),
            c_mu,
            c_sigma2,
        )?;
        let name = match score {
            ScoreKind::Aipw => "rs-aipw",
            ScoreKind::Dr => "rs-dr",
        };
        Self::with_source(name, arms, budget, score, NuisanceSource::Estimated(est))
    }

    /// Context-free nuisances: each arm's running mean and second moment.
    pub fn pooled(
        arms: usize,
        dim: usize,
        budget: usize,
        c_mu: f64,
        c_sigma2: f64,
    ) -> Result<Self> {
        let est = NuisanceEstimator::new(arms, dim, Pooling::Pooled, c_mu, c_sigma2)?;
        Self::with_source(
            "rs-aipw-nocontext",
            arms,
            budget,
            ScoreKind::Aipw,
            NuisanceSource::Estimated(est),
        )
    }

    pub fn oracle(model: Arc<LocationShiftBandit>, budget: usize) -> Result<Self> {
        let arms = model.num_arms();
        Self::with_source(
            "rs-aipw-oracle",
            arms,
            budget,
            ScoreKind::Aipw,
            NuisanceSource::Oracle(model),
        )
    }

    pub fn with_estimator(
        estimator: NuisanceEstimator,
        budget: usize,
        score: ScoreKind,
    ) -> Result<Self> {
        let arms = estimator.num_arms();
        Self::with_source(
            "rs-aipw",
            arms,
            budget,
            score,
            NuisanceSource::Estimated(estimator),
        )
    }

    /// Keep a per-round record of the nuisance values used in each score.
    pub fn record_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn trace(&self) -> Option<&[NuisanceTraceRow]> {
        self.trace.as_deref()
    }

    pub fn nuisance(&self) -> &NuisanceSource {
        &self.nuisance
    }

    /// Running AIPW estimates `(1/t) sum phi^a`.
    pub fn estimates(&self) -> Vec<f64> {
        let t = self.rounds.observed().max(1) as f64;
        self.score_sums.iter().map(|s| s / t).collect()
    }

    pub fn score_sums(&self) -> &[f64] {
        &self.score_sums
    }

    /// Allocation the sampling rule would use at `x` in a post-initialization round.
    pub fn allocation_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(match &self.nuisance {
            NuisanceSource::Estimated(est) => estimated_allocation(est, self.arms, x)?.into_vec(),
            NuisanceSource::Oracle(model) => oracle_allocation(model, x).into_vec(),
        })
    }

    fn prepare(&self, t: usize, x: &[f64]) -> Result<Pending> {
        let k = self.arms;
        match &self.nuisance {
            NuisanceSource::Oracle(model) => {
                let w = oracle_allocation(model, x).into_vec();
                Ok(Pending {
                    means: (0..k).map(|a| model.conditional_mean(a, x)).collect(),
                    reestimated: w.clone(),
                    propensities: w,
                })
            }
            NuisanceSource::Estimated(est) if t <= k => Ok(Pending {
                means: vec![0.0; k],
                propensities: vec![1.0 / k as f64; k],
                reestimated: estimated_allocation(est, k, x)?.into_vec(),
            }),
            NuisanceSource::Estimated(est) => {
                let preds: Vec<_> = (0..k).map(|a| est.predict(a, x)).collect();
                let variances: Vec<f64> = preds.iter().map(|p| p.variance).collect();
                let w = target_allocation(&variances)?.into_vec();
                Ok(Pending {
                    means: preds.iter().map(|p| p.mean).collect(),
                    reestimated: w.clone(),
                    propensities: w,
                })
            }
        }
    }
}

impl Strategy for RsAipw {
    fn name(&self) -> &'static str {
        self.name
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

    fn select_arm(&mut self, t: usize, x: &[f64], rng: &mut dyn RngCore) -> Result<Selection> {
        self.rounds.check_select(t)?;
        let pending = self.prepare(t, x)?;
        let deterministic_init =
            t <= self.arms && matches!(self.nuisance, NuisanceSource::Estimated(_));
        let arm = if deterministic_init {
            t - 1
        } else {
            let gamma: f64 = rng.random();
            draw_by_cumulative(&pending.propensities, gamma)
        };
        let sel = Selection {
            arm,
            propensity: pending.propensities[arm],
        };
        self.pending = Some(pending);
        self.rounds.set_pending(t, sel);
        Ok(sel)
    }

    fn observe(&mut self, obs: &Observation) -> Result<()> {
        check_arm(obs.arm, self.arms)?;
        if !(obs.propensity > 0.0 && obs.propensity <= 1.0) {
            return Err(BaiError::domain(format!(
                "propensity {} outside (0, 1]",
                obs.propensity
            )));
        }
        self.rounds.accept(obs)?;
        let pending = self
            .pending
            .take()
            .expect("tracker holds a pending selection");
        let weight = match self.score {
            ScoreKind::Aipw => obs.propensity,
            ScoreKind::Dr => pending.reestimated[obs.arm],
        };
        for a in 0..self.arms {
            let phi = aipw_term(obs.arm == a, obs.outcome, pending.means[a], weight);
            self.last_scores[a] = phi;
            self.score_sums[a] += phi;
        }
        if let Some(trace) = self.trace.as_mut() {
            let mut propensity = match self.score {
                ScoreKind::Aipw => pending.propensities,
                ScoreKind::Dr => pending.reestimated,
            };
            propensity[obs.arm] = weight;
            trace.push(NuisanceTraceRow {
                mean: pending.means,
                propensity,
            });
        }
        // The nuisance update comes last so round t's scores only see rounds < t.
        if let NuisanceSource::Estimated(est) = &mut self.nuisance {
            est.update(obs)?;
        }
        Ok(())
    }

    fn current_recommendation(&self) -> usize {
        argmax_lowest(&self.score_sums)
    }

    fn last_scores(&self) -> Option<&[f64]> {
        (self.rounds.observed() > 0).then_some(self.last_scores.as_slice())
    }

    fn box_clone(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ContextDistribution;
    use crate::rng::from_seed;

    fn rs(arms: usize, budget: usize) -> RsAipw {
        RsAipw::contextual(arms, 1, budget, ScoreKind::Aipw, 20.0, 10.0).unwrap()
    }

    #[test]
    fn initialization_rounds_are_deterministic() {
        let mut s = rs(3, 10);
        let mut rng = from_seed(0);
        for t in 1..=3 {
            let sel = s.select_arm(t, &[0.0], &mut rng).unwrap();
            assert_eq!(sel.arm, t - 1);
            assert!((sel.propensity - 1.0 / 3.0).abs() < 1e-15);
            s.observe(&Observation::new(
                t,
                vec![0.0],
                sel.arm,
                1.0,
                sel.propensity,
            ))
            .unwrap();
        }
    }

    #[test]
    fn scores_use_pre_update_nuisance() {
        let mut s = rs(2, 10).record_trace();
        let mut rng = from_seed(1);
        for t in 1..=2 {
            let sel = s.select_arm(t, &[0.0], &mut rng).unwrap();
            s.observe(&Observation::new(
                t,
                vec![0.0],
                sel.arm,
                2.0,
                sel.propensity,
            ))
            .unwrap();
        }
        // Init rounds: mean predictions are zero, propensity 1/2.
        // Round 1 pulled arm 0 with y = 2: phi0 = 2/0.5 = 4, phi1 = 0.
        // Round 2 pulled arm 1: phi0 = 0, phi1 = 4.
        assert_eq!(s.score_sums(), &[4.0, 4.0]);
        // Round 3: both arms have one sample at y = 2, so mu_hat = 2 everywhere.
        let sel = s.select_arm(3, &[0.0], &mut rng).unwrap();
        s.observe(&Observation::new(
            3,
            vec![0.0],
            sel.arm,
            2.0,
            sel.propensity,
        ))
        .unwrap();
        assert_eq!(s.last_scores().unwrap(), &[2.0, 2.0]);
        assert_eq!(s.trace().unwrap().len(), 3);
        assert_eq!(s.trace().unwrap()[2].mean, vec![2.0, 2.0]);
    }

    #[test]
    fn unselected_arm_scores_its_mean_prediction() {
        let mut est = NuisanceEstimator::contextual(2, 1);
        est.update_raw(0, &[0.0], 1.0).unwrap();
        est.update_raw(1, &[0.0], 0.0).unwrap();
        let mut s = RsAipw::with_estimator(est, 10, ScoreKind::Aipw)
            .unwrap()
            .record_trace();
        let mut rng = from_seed(2);
        for t in 1..=6 {
            let sel = s.select_arm(t, &[0.0], &mut rng).unwrap();
            s.observe(&Observation::new(
                t,
                vec![0.0],
                sel.arm,
                2.0,
                sel.propensity,
            ))
            .unwrap();
            let row = s.trace().unwrap().last().unwrap().clone();
            let scores = s.last_scores().unwrap();
            let other = 1 - sel.arm;
            assert_eq!(scores[other], row.mean[other]);
            let expected = (2.0 - row.mean[sel.arm]) / sel.propensity + row.mean[sel.arm];
            assert!((scores[sel.arm] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn protocol_errors() {
        let mut s = rs(2, 2);
        let mut rng = from_seed(3);
        assert!(s.recommend().is_err());
        assert!(s.select_arm(2, &[0.0], &mut rng).is_err());
        let sel = s.select_arm(1, &[0.0], &mut rng).unwrap();
        assert!(s
            .observe(&Observation::new(
                2,
                vec![0.0],
                sel.arm,
                0.0,
                sel.propensity
            ))
            .is_err());
        s.observe(&Observation::new(
            1,
            vec![0.0],
            sel.arm,
            0.0,
            sel.propensity,
        ))
        .unwrap();
        let sel = s.select_arm(2, &[0.0], &mut rng).unwrap();
        s.observe(&Observation::new(
            2,
            vec![0.0],
            sel.arm,
            0.0,
            sel.propensity,
        ))
        .unwrap();
        assert!(s.select_arm(3, &[0.0], &mut rng).is_err());
        assert_eq!(s.recommend().unwrap(), 0);
        assert!(RsAipw::contextual(3, 1, 2, ScoreKind::Aipw, 20.0, 10.0).is_err());
    }

    #[test]
    fn recommend_ties_go_low() {
        let mut s = rs(2, 2);
        s.score_sums = vec![10.0, 5.0];
        assert_eq!(s.current_recommendation(), 0);
        s.score_sums = vec![5.0, 5.0];
        assert_eq!(s.current_recommendation(), 0);
        s.score_sums = vec![5.0, 6.0];
        assert_eq!(s.current_recommendation(), 1);
    }

    #[test]
    fn dr_matches_aipw_after_initialization() {
        let model = Arc::new(
            LocationShiftBandit::constant(
                &[1.0, 0.5, 0.7],
                &[2.0, 1.0, 0.5],
                ContextDistribution::gaussian(vec![0.0], vec![vec![1.0]]).unwrap(),
            )
            .unwrap(),
        );
        let run = |score| {
            let mut s = RsAipw::contextual(3, 1, 300, score, 20.0, 10.0)
                .unwrap()
                .record_trace();
            let mut env = from_seed(4);
            let mut strat = from_seed(5);
            for t in 1..=300 {
                let x = model.sample_context(&mut env);
                let sel = s.select_arm(t, &x, &mut strat).unwrap();
                let y = model.sample_outcome(sel.arm, &x, &mut env).unwrap();
                s.observe(&Observation::new(t, x, sel.arm, y, sel.propensity))
                    .unwrap();
            }
            s
        };
        let (aipw, dr) = (run(ScoreKind::Aipw), run(ScoreKind::Dr));
        // Same draws, same weights: the empty-store defaults are uniform, so
        // even the initialization rounds agree.
        assert_eq!(aipw.trace().unwrap(), dr.trace().unwrap());
        assert_eq!(aipw.score_sums(), dr.score_sums());
    }
}
