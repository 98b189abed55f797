use std::sync::Arc;

use crate::error::{BaiError, Result};
use crate::model::{LocationShiftBandit, Observation};
use crate::rng::{stream, ENVIRONMENT_STREAM, STRATEGY_STREAM};
use crate::strategies::StrategyKind;

/// Normalization for the martingale diagnostic of a pair `(a, b)`:
/// `xi_t = (phi^a_t - phi^b_t - gap) / sqrt(T v_star)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleSpec {
    pub a: usize,
    pub b: usize,
    pub gap: f64,
    pub v_star: f64,
}

/// `sum_t xi_t` and `sum_t xi_t^2` over one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleTrace {
    pub sum: f64,
    pub sum_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialPlan {
    pub budget: usize,
    /// Budgets at which the recommendation is recorded; each `<= budget`.
    pub checkpoints: Vec<usize>,
    pub martingale: Option<MartingaleSpec>,
}

impl TrialPlan {
    pub fn new(budget: usize) -> Self {
        Self {
            budget,
            checkpoints: vec![budget],
            martingale: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutput {
    /// Recommendation at each checkpoint, in plan order.
    pub recommendations: Vec<usize>,
    /// Pulls per arm over the whole run.
    pub draw_counts: Vec<usize>,
    /// Pulls per arm over rounds `t > budget / 2`.
    pub late_draw_counts: Vec<usize>,
    /// Present when the plan asks for it and the strategy produces AIPW scores.
    pub martingale: Option<MartingaleTrace>,
}

/// One trial of `strategy` to budget `budget`, recommending at `budget`.
pub fn run_trial(
    model: &Arc<LocationShiftBandit>,
    strategy: &str,
    budget: usize,
    seed: u64,
) -> Result<TrialOutput> {
    let kind: StrategyKind = strategy.parse()?;
    run_trial_with(model, kind, &TrialPlan::new(budget), seed)
}

/// Runs the select/observe loop to `plan.budget`. Contexts and outcomes come
/// from one generator stream and the strategy's draws from another, both
/// keyed by `seed`.
pub fn run_trial_with(
    model: &Arc<LocationShiftBandit>,
    kind: StrategyKind,
    plan: &TrialPlan,
    seed: u64,
) -> Result<TrialOutput> {
    let budget = plan.budget;
    if plan.checkpoints.iter().any(|&c| c == 0 || c > budget)
        || plan.checkpoints.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(BaiError::config(
            "checkpoints must be increasing and within (0, budget]",
        ));
    }
    let mut strategy = kind.build(model, budget)?;
    let k = model.num_arms();
    let mut env = stream(seed, ENVIRONMENT_STREAM);
    let mut own = stream(seed, STRATEGY_STREAM);
    let mut draw_counts = vec![0; k];
    let mut late_draw_counts = vec![0; k];
    let mut recommendations = Vec::with_capacity(plan.checkpoints.len());
    let mut next_checkpoint = plan.checkpoints.iter().peekable();
    let scale = plan.martingale.map(|m| (budget as f64 * m.v_star).sqrt());
    let mut trace = MartingaleTrace {
        sum: 0.0,
        sum_sq: 0.0,
    };
    let mut has_scores = true;

    for t in 1..=budget {
        let x = model.sample_context(&mut env);
        let sel = strategy.select_arm(t, &x, &mut own)?;
        let y = model.sample_outcome(sel.arm, &x, &mut env)?;
        strategy.observe(&Observation::new(t, x, sel.arm, y, sel.propensity))?;
        draw_counts[sel.arm] += 1;
        if 2 * t > budget {
            late_draw_counts[sel.arm] += 1;
        }
        if let (Some(spec), Some(scale)) = (plan.martingale, scale) {
            match strategy.last_scores() {
                Some(phi) => {
                    let xi = (phi[spec.a] - phi[spec.b] - spec.gap) / scale;
                    trace.sum += xi;
                    trace.sum_sq += xi * xi;
                }
                None => has_scores = false,
            }
        }
        if next_checkpoint.peek() == Some(&&t) {
            next_checkpoint.next();
            recommendations.push(strategy.current_recommendation());
        }
    }
    Ok(TrialOutput {
        recommendations,
        draw_counts,
        late_draw_counts,
        martingale: (plan.martingale.is_some() && has_scores).then_some(trace),
    })
}
