//! AIPW, DR and sample-mean estimators over a recorded history, and the
//! asymptotic variance functional of the AIPW difference estimator.

use rand::RngCore;

use crate::allocation::AllocationRatio;
use crate::error::{check_arm, BaiError, Result};
use crate::model::{LocationShiftBandit, Observation};
use crate::stats::{McEstimate, RunningMoments};

/// One AIPW score:
/// `1[pulled] (y - mu_hat) / propensity + mu_hat`.
///
/// Strategies and the post-hoc estimator both go through this function.
#[inline]
pub fn aipw_term(pulled: bool, outcome: f64, mu_hat: f64, propensity: f64) -> f64 {
    if pulled {
        (outcome - mu_hat) / propensity + mu_hat
    } else {
        mu_hat
    }
}

/// Nuisance values in force at one round, computed from strictly earlier
/// rounds: the mean prediction and the sampling probability for every arm.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceTraceRow {
    pub mean: Vec<f64>,
    pub propensity: Vec<f64>,
}

/// Scores `phi^a_t` for every arm at one round.
pub fn aipw_scores(obs: &Observation, row: &NuisanceTraceRow) -> Result<Vec<f64>> {
    let k = row.mean.len();
    if row.propensity.len() != k {
        return Err(BaiError::protocol("trace row has mismatched lengths"));
    }
    check_arm(obs.arm, k)?;
    if let Some(w) = row.propensity.iter().find(|w| !(**w > 0.0)) {
        return Err(BaiError::domain(format!(
            "propensity must be positive, got {w}"
        )));
    }
    Ok((0..k)
        .map(|a| aipw_term(obs.arm == a, obs.outcome, row.mean[a], row.propensity[a]))
        .collect())
}

/// `(1/T) sum_t phi^a_t` for every arm.
pub fn aipw_estimate(history: &[Observation], trace: &[NuisanceTraceRow]) -> Result<Vec<f64>> {
    Ok(estimate_report(history, trace)?.estimates)
}

/// Point estimates with pairwise variance estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub estimates: Vec<f64>,
    /// Symmetric with zero diagonal: the empirical variance of
    /// `phi^a_t - phi^b_t`, an estimate of `V^{a,b}`.
    pub pairwise_variance: Vec<Vec<f64>>,
    pub sample_size: usize,
}

pub fn estimate_report(
    history: &[Observation],
    trace: &[NuisanceTraceRow],
) -> Result<EstimateReport> {
    if history.len() != trace.len() {
        return Err(BaiError::protocol(format!(
            "history has {} rounds, trace has {}",
            history.len(),
            trace.len()
        )));
    }
    let Some(first) = trace.first() else {
        return Err(BaiError::protocol("empty history"));
    };
    let k = first.mean.len();
    let mut scores = Vec::with_capacity(history.len());
    for (obs, row) in history.iter().zip(trace) {
        if row.mean.len() != k {
            return Err(BaiError::protocol(
                "trace rows disagree on the number of arms",
            ));
        }
        scores.push(aipw_scores(obs, row)?);
    }
    let mut means = vec![RunningMoments::new(); k];
    for s in &scores {
        for a in 0..k {
            means[a].push(s[a]);
        }
    }
    let mut pairwise_variance = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in (a + 1)..k {
            let mut d = RunningMoments::new();
            scores.iter().for_each(|s| d.push(s[a] - s[b]));
            let v = d.population_variance();
            pairwise_variance[a][b] = v;
            pairwise_variance[b][a] = v;
        }
    }
    Ok(EstimateReport {
        estimates: means.iter().map(RunningMoments::mean).collect(),
        pairwise_variance,
        sample_size: history.len(),
    })
}

/// Per-arm average outcome; unpulled arms report negative infinity so they
/// rank last.
pub fn sample_mean_estimate(history: &[Observation], arms: usize) -> Vec<f64> {
    let mut sums = vec![0.0; arms];
    let mut counts = vec![0usize; arms];
    for obs in history {
        if obs.arm < arms {
            sums[obs.arm] += obs.outcome;
            counts[obs.arm] += 1;
        }
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &n)| {
            if n == 0 {
                f64::NEG_INFINITY
            } else {
                s / n as f64
            }
        })
        .collect()
}

/// Monte Carlo estimate of
/// `E_x[ sigma_a^2(x)/w(a|x) + sigma_b^2(x)/w(b|x) + (Delta_ab(x) - Delta_ab)^2 ]`
/// over `n_mc` context draws, where `Delta_ab = mu^a - mu^b` uses the
/// model's marginal means.
pub fn variance_functional<W, R>(
    model: &LocationShiftBandit,
    allocation: W,
    a: usize,
    b: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<McEstimate>
where
    W: Fn(&[f64]) -> AllocationRatio,
    R: RngCore + ?Sized,
{
    let k = model.num_arms();
    check_arm(a, k)?;
    check_arm(b, k)?;
    if a == b {
        return Err(BaiError::domain(
            "variance functional needs two distinct arms",
        ));
    }
    if n_mc == 0 {
        return Err(BaiError::domain("n_mc must be positive"));
    }
    let means = model.means();
    let gap = means[a] - means[b];
    let mut acc = RunningMoments::new();
    let mut x = vec![0.0; model.dim()];
    for _ in 0..n_mc {
        model.sample_context_into(rng, &mut x);
        let w = allocation(&x);
        let local_gap = model.conditional_mean(a, &x) - model.conditional_mean(b, &x);
        let value = model.conditional_variance(a, &x) / w.prob(a)
            + model.conditional_variance(b, &x) / w.prob(b)
            + (local_gap - gap).powi(2);
        acc.push(value);
    }
    Ok(acc.estimate())
}
