//! Fixed-budget BAI strategies: a sampling rule plus a recommendation rule.
//!
//! A strategy is driven one round at a time: `select_arm(t, x)` picks the
//! arm for round `t` (1-based), the caller draws the outcome and hands it
//! back through `observe`. `select_arm` may be called again for the same
//! round before `observe`, which replaces the pending draw. `recommend`
//! never mutates state.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::RngCore;

use crate::error::{BaiError, Result};
use crate::model::LocationShiftBandit;
pub use crate::model::Observation;

mod rs_aipw;
mod successive_rejects;
mod ugapeb;
mod uniform;

pub use rs_aipw::{NuisanceSource, RsAipw, ScoreKind};
pub use successive_rejects::{successive_rejects_schedule, SuccessiveRejects};
pub use ugapeb::UgapEb;
pub use uniform::UniformEba;

/// The arm drawn for a round and the probability it was drawn with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub arm: usize,
    pub propensity: f64,
}

pub trait Strategy: Send {
    fn name(&self) -> &'static str;

    fn num_arms(&self) -> usize;

    /// The budget T the strategy was configured for.
    fn budget(&self) -> usize;

    /// Number of observations received so far.
    fn rounds_observed(&self) -> usize;

    fn select_arm(&mut self, t: usize, x: &[f64], rng: &mut dyn RngCore) -> Result<Selection>;

    fn observe(&mut self, obs: &Observation) -> Result<()>;

    /// The recommendation the strategy would make if the experiment stopped
    /// now. Used for checkpoint evaluation.
    fn current_recommendation(&self) -> usize;

    /// Final recommendation; only valid once the full budget has been observed.
    fn recommend(&self) -> Result<usize> {
        if self.rounds_observed() != self.budget() {
            return Err(BaiError::protocol(format!(
                "recommend called after {} of {} rounds",
                self.rounds_observed(),
                self.budget()
            )));
        }
        Ok(self.current_recommendation())
    }

    /// Per-arm AIPW scores of the most recent observed round, for strategies
    /// that compute them.
    fn last_scores(&self) -> Option<&[f64]> {
        None
    }

    fn box_clone(&self) -> Box<dyn Strategy>;
}

impl Clone for Box<dyn Strategy> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// Strategy names accepted in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    RsAipw,
    RsDr,
    RsAipwNoContext,
    UniformEba,
    SuccessiveRejects,
    UgapEb,
    /// RS-AIPW with the true conditional means and target allocation.
    /// Only meaningful in simulation; used by the martingale diagnostics.
    RsAipwOracle,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::RsAipw,
        StrategyKind::RsDr,
        StrategyKind::RsAipwNoContext,
        StrategyKind::UniformEba,
        StrategyKind::SuccessiveRejects,
        StrategyKind::UgapEb,
        StrategyKind::RsAipwOracle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::RsAipw => "rs-aipw",
            StrategyKind::RsDr => "rs-dr",
            StrategyKind::RsAipwNoContext => "rs-aipw-nocontext",
            StrategyKind::UniformEba => "uniform-eba",
            StrategyKind::SuccessiveRejects => "successive-rejects",
            StrategyKind::UgapEb => "ugapeb",
            StrategyKind::RsAipwOracle => "rs-aipw-oracle",
        }
    }

    /// Builds a fresh instance for `model` and budget `budget`.
    pub fn build(
        &self,
        model: &Arc<LocationShiftBandit>,
        budget: usize,
    ) -> Result<Box<dyn Strategy>> {
        let k = model.num_arms();
        let d = model.dim();
        let (c_mu, c_sigma2) = (model.c_mu(), model.c_sigma2());
        Ok(match self {
            StrategyKind::RsAipw => Box::new(RsAipw::contextual(
                k,
                d,
                budget,
                ScoreKind::Aipw,
                c_mu,
                c_sigma2,
            )?),
            StrategyKind::RsDr => Box::new(RsAipw::contextual(
                k,
                d,
                budget,
                ScoreKind::Dr,
                c_mu,
                c_sigma2,
            )?),
            StrategyKind::RsAipwNoContext => {
                Box::new(RsAipw::pooled(k, d, budget, c_mu, c_sigma2)?)
            }
            StrategyKind::RsAipwOracle => Box::new(RsAipw::oracle(Arc::clone(model), budget)?),
            StrategyKind::UniformEba => Box::new(UniformEba::new(k, budget)?),
            StrategyKind::SuccessiveRejects => Box::new(SuccessiveRejects::new(k, budget)?),
            StrategyKind::UgapEb => {
                let max_sd = model
                    .arms()
                    .iter()
                    .map(|a| a.marginal_variance.sqrt())
                    .fold(0.0, f64::max);
                Box::new(UgapEb::new(k, budget, 4.0 * max_sd)?)
            }
        })
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = BaiError;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .iter()
            .find(|k| k.name() == s)
            .copied()
            .ok_or_else(|| BaiError::config(format!("unknown strategy `{s}`")))
    }
}

/// Inverse-CDF draw: the first arm whose cumulative probability reaches
/// `gamma`. Falls back to the last arm if rounding leaves the total short.
pub fn draw_by_cumulative(probs: &[f64], gamma: f64) -> usize {
    let mut cum = 0.0;
    for (a, p) in probs.iter().enumerate() {
        cum += p;
        if gamma <= cum {
            return a;
        }
    }
    probs.len() - 1
}

/// Shared round bookkeeping: which round may be selected next and which
/// selection is waiting for its observation.
#[derive(Debug, Clone)]
pub(crate) struct RoundTracker {
    budget: usize,
    observed: usize,
    pending: Option<(usize, Selection)>,
}

impl RoundTracker {
    pub(crate) fn new(budget: usize) -> Self {
        Self {
            budget,
            observed: 0,
            pending: None,
        }
    }

    pub(crate) fn observed(&self) -> usize {
        self.observed
    }

    pub(crate) fn budget(&self) -> usize {
        self.budget
    }

    pub(crate) fn check_select(&self, t: usize) -> Result<()> {
        if t > self.budget {
            return Err(BaiError::protocol(format!(
                "round {t} exceeds budget {}",
                self.budget
            )));
        }
        if t != self.observed + 1 {
            return Err(BaiError::protocol(format!(
                "expected round {}, got {t}",
                self.observed + 1
            )));
        }
        Ok(())
    }

    pub(crate) fn set_pending(&mut self, t: usize, sel: Selection) {
        self.pending = Some((t, sel));
    }

    /// Validates `obs` against the pending selection and advances the round.
    pub(crate) fn accept(&mut self, obs: &Observation) -> Result<Selection> {
        match self.pending {
            Some((t, sel)) if t == obs.round && sel.arm == obs.arm => {
                self.pending = None;
                self.observed += 1;
                Ok(sel)
            }
            Some((t, sel)) => Err(BaiError::protocol(format!(
                "observation for round {} arm {} does not match pending round {t} arm {}",
                obs.round, obs.arm, sel.arm
            ))),
            None => Err(BaiError::protocol(format!(
                "observation for round {} without a pending selection",
                obs.round
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_rule() {
        let w = [0.5, 0.3, 0.2];
        assert_eq!(draw_by_cumulative(&w, 0.0), 0);
        assert_eq!(draw_by_cumulative(&w, 0.5), 0);
        assert_eq!(draw_by_cumulative(&w, 0.65), 1);
        assert_eq!(draw_by_cumulative(&w, 0.95), 2);
        assert_eq!(draw_by_cumulative(&[0.5, 0.4999999], 0.99999999), 1);
    }

    #[test]
    fn names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("thompson".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn tracker_protocol() {
        let mut tr = RoundTracker::new(2);
        assert!(tr.check_select(2).is_err());
        tr.check_select(1).unwrap();
        let sel = Selection {
            arm: 1,
            propensity: 1.0,
        };
        let obs = |round, arm| Observation::new(round, vec![], arm, 0.0, 1.0);
        assert!(tr.accept(&obs(1, 1)).is_err());
        tr.set_pending(1, sel);
        assert!(tr.accept(&obs(1, 0)).is_err());
        assert!(tr.accept(&obs(2, 1)).is_err());
        tr.accept(&obs(1, 1)).unwrap();
        assert_eq!(tr.observed(), 1);
        assert!(tr.check_select(3).is_err());
    }
}
