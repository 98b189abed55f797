use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::trial::{run_trial_with, TrialOutput, TrialPlan};
use crate::allocation::oracle_allocation;
use crate::bounds::{
    absolute_bounds, minimax_lower, rs_aipw_upper, worst_case_gap_from_variance, BoundReport,
    VarianceIntegrals,
};
use crate::error::{BaiError, Result};
use crate::estimators::variance_functional;
use crate::model::LocationShiftBandit;
use crate::rng::{from_seed, trial_seed};
use crate::stats::RunningMoments;
use crate::strategies::StrategyKind;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointStats {
    pub budget: usize,
    pub mean_regret: f64,
    /// `None` with a single trial.
    pub std_err: Option<f64>,
    pub misid_freq: f64,
    /// How often each arm was recommended.
    pub recommend_counts: Vec<usize>,
    /// Bound values on expected regret at this budget, by name.
    pub bounds: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretCurve {
    pub strategy: String,
    pub points: Vec<CheckpointStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub model: LocationShiftBandit,
    pub curves: Vec<RegretCurve>,
    /// Asymptotic leading factors for the base model.
    pub bounds: Vec<BoundReport>,
}

/// Builds the model from `config` and runs every strategy.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let model = Arc::new(config.build_model()?);
    run_experiment_on(config, model)
}

/// [`run_experiment`] on an already-built model.
pub fn run_experiment_on(
    config: &ExperimentConfig,
    model: Arc<LocationShiftBandit>,
) -> Result<ExperimentResult> {
    config.validate_for(&model)?;
    let settings = &config.experiment;
    let kinds = config.strategy_kinds()?;
    let checkpoints = config.checkpoints();
    let seed = settings.master_seed;

    let integrals = VarianceIntegrals::estimate(
        &model,
        settings.n_mc,
        &mut from_seed(trial_seed(seed, "bounds", 0)),
    )?;
    let bounds = vec![minimax_lower(&integrals), rs_aipw_upper(&integrals)];
    let pool = thread_pool(settings.parallel)?;

    let worst_case = if settings.worst_case_mode && !kinds.is_empty() {
        let pair_variances = pair_variances(
            &model,
            settings.n_mc,
            &mut from_seed(trial_seed(seed, "worst-case", 0)),
        )?;
        let models = checkpoints
            .iter()
            .map(|&t| shift_to_worst_case(&model, &pair_variances, t).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Some(models)
    } else {
        None
    };

    let mut curves = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let points = match &worst_case {
            Some(models) => {
                let mut points = Vec::with_capacity(checkpoints.len());
                for (&t, m) in checkpoints.iter().zip(models) {
                    let outputs = run_trials(
                        pool.as_ref(),
                        m,
                        kind,
                        &TrialPlan::new(t),
                        seed,
                        settings.n_trials,
                    )?;
                    points.push(checkpoint_stats(m, &outputs, 0, t, &bounds)?);
                }
                points
            }
            None => {
                let plan = TrialPlan {
                    budget: settings.t_max,
                    checkpoints: checkpoints.clone(),
                    martingale: None,
                };
                let outputs =
                    run_trials(pool.as_ref(), &model, kind, &plan, seed, settings.n_trials)?;
                checkpoints
                    .iter()
                    .enumerate()
                    .map(|(j, &t)| checkpoint_stats(&model, &outputs, j, t, &bounds))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        curves.push(RegretCurve {
            strategy: kind.name().to_string(),
            points,
        });
    }
    Ok(ExperimentResult {
        model: Arc::unwrap_or_clone(model),
        curves,
        bounds,
    })
}

pub(crate) fn thread_pool(parallel: usize) -> Result<Option<ThreadPool>> {
    if parallel == 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map(Some)
        .map_err(|e| BaiError::Io(std::io::Error::other(e)))
}

/// Runs trials `0..n` and returns them in trial order, whatever the pool.
pub(crate) fn run_trials(
    pool: Option<&ThreadPool>,
    model: &Arc<LocationShiftBandit>,
    kind: StrategyKind,
    plan: &TrialPlan,
    master_seed: u64,
    n: usize,
) -> Result<Vec<TrialOutput>> {
    let job = |i: usize| {
        run_trial_with(
            model,
            kind,
            plan,
            trial_seed(master_seed, kind.name(), i as u64),
        )
        .map_err(|e| BaiError::Trial {
            strategy: kind.name().to_string(),
            trial: i,
            source: Box::new(e),
        })
    };
    let results: Vec<Result<TrialOutput>> = match pool {
        Some(p) => p.install(|| (0..n).into_par_iter().map(job).collect()),
        None => (0..n).map(job).collect(),
    };
    results.into_iter().collect()
}

/// Overlays at budget `t`: the bounded-support bounds plus each asymptotic
/// leading factor divided by `sqrt(t)`.
pub fn bound_overlays(
    arms: usize,
    t: usize,
    asymptotic: &[BoundReport],
) -> Result<Vec<(String, f64)>> {
    let mut out: Vec<(String, f64)> = absolute_bounds(arms, t)?
        .into_iter()
        .map(|r| (r.name, r.value))
        .collect();
    out.extend(asymptotic.iter().map(|r| (r.name.clone(), r.at_budget(t))));
    Ok(out)
}

fn checkpoint_stats(
    model: &LocationShiftBandit,
    outputs: &[TrialOutput],
    index: usize,
    t: usize,
    asymptotic: &[BoundReport],
) -> Result<CheckpointStats> {
    let k = model.num_arms();
    let n = outputs.len();
    let mut counts = vec![0usize; k];
    let mut per_trial = RunningMoments::new();
    for out in outputs {
        let rec = out.recommendations[index];
        counts[rec] += 1;
        per_trial.push(model.simple_regret(rec)?);
    }
    let mut mean_regret = 0.0;
    let mut misses = 0;
    for (b, &c) in counts.iter().enumerate() {
        let gap = model.simple_regret(b)?;
        mean_regret += gap * c as f64;
        if gap > 0.0 {
            misses += c;
        }
    }
    Ok(CheckpointStats {
        budget: t,
        mean_regret: mean_regret / n as f64,
        std_err: per_trial.std_err(),
        misid_freq: misses as f64 / n as f64,
        recommend_counts: counts,
        bounds: bound_overlays(k, t, asymptotic)?,
    })
}

// V* for (best, b) under the true target allocation; zero for the best arm.
// Location shifts leave these unchanged.
fn pair_variances<R: RngCore + ?Sized>(
    model: &LocationShiftBandit,
    n_mc: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let best = model.best_arm();
    (0..model.num_arms())
        .map(|b| {
            if b == best {
                Ok(0.0)
            } else {
                variance_functional(
                    model,
                    |x: &[f64]| oracle_allocation(model, x),
                    best,
                    b,
                    n_mc,
                    rng,
                )
                .map(|v| v.value)
            }
        })
        .collect()
}

fn shift_to_worst_case(
    model: &LocationShiftBandit,
    pair_variances: &[f64],
    t: usize,
) -> Result<LocationShiftBandit> {
    let best = model.best_arm();
    let top = model.means()[best];
    let means = pair_variances
        .iter()
        .enumerate()
        .map(|(b, &v)| {
            if b == best {
                Ok(top)
            } else {
                worst_case_gap_from_variance(v, t).map(|g| top - g)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    model.with_marginal_means(&means)
}

/// The model shifted so every suboptimal arm sits exactly at its
/// worst-case gap from the best arm at budget `t`.
pub fn worst_case_model<R: RngCore + ?Sized>(
    model: &LocationShiftBandit,
    t: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<LocationShiftBandit> {
    let vs = pair_variances(model, n_mc, rng)?;
    shift_to_worst_case(model, &vs, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::worst_case_gap;
    use crate::model::ContextDistribution;

    fn config(names: &[&str], trials: usize, parallel: usize) -> ExperimentConfig {
        let names = names
            .iter()
            .map(|n| format!("\"{n}\""))
            .collect::<Vec<_>>()
            .join(", ");
        ExperimentConfig::from_toml(&format!(
            r#"
[model]
kind = "constant"
means = [1.0, 0.7, 0.5]
variances = [1.0, 2.0, 0.5]

[experiment]
t_max = 200
checkpoints = [20, 100, 200]
n_trials = {trials}
parallel = {parallel}
n_mc = 1000
master_seed = 11

[strategies]
names = [{names}]
"#
        ))
        .unwrap()
    }

    #[test]
    fn empty_strategy_list() {
        let r = run_experiment(&config(&[], 3, 1)).unwrap();
        assert!(r.curves.is_empty());
    }

    #[test]
    fn single_trial_has_no_std_err() {
        let r = run_experiment(&config(&["uniform-eba"], 1, 1)).unwrap();
        assert!(r.curves[0].points.iter().all(|p| p.std_err.is_none()));
    }

    #[test]
    fn regret_matches_recommendation_counts() {
        let r = run_experiment(&config(
            &["rs-aipw", "uniform-eba", "successive-rejects"],
            30,
            1,
        ))
        .unwrap();
        let gaps = [0.0, 0.3, 0.5];
        for curve in &r.curves {
            assert_eq!(curve.points.len(), 3);
            for p in &curve.points {
                assert_eq!(p.recommend_counts.iter().sum::<usize>(), 30);
                let expected: f64 = p
                    .recommend_counts
                    .iter()
                    .zip(gaps)
                    .map(|(&c, g)| c as f64 * g)
                    .sum::<f64>()
                    / 30.0;
                assert!((p.mean_regret - expected).abs() < 1e-12);
                assert!((0.0..=0.5).contains(&p.mean_regret));
                assert!((0.0..=1.0).contains(&p.misid_freq));
                assert_eq!(p.bounds.len(), 4);
            }
        }
    }

    #[test]
    fn parallel_matches_serial() {
        let names = ["rs-aipw", "ugapeb"];
        let serial = run_experiment(&config(&names, 16, 1)).unwrap();
        let parallel = run_experiment(&config(&names, 16, 4)).unwrap();
        assert_eq!(serial.curves, parallel.curves);
    }

    #[test]
    fn adding_a_strategy_keeps_existing_curves() {
        let one = run_experiment(&config(&["rs-aipw"], 8, 1)).unwrap();
        let two = run_experiment(&config(&["uniform-eba", "rs-aipw"], 8, 1)).unwrap();
        assert_eq!(one.curves[0], two.curves[1]);
    }

    #[test]
    fn worst_case_shift() {
        let m = LocationShiftBandit::constant(
            &[1.0, 0.2],
            &[4.0, 1.0],
            ContextDistribution::synthetic_default(),
        )
        .unwrap();
        let shifted = worst_case_model(&m, 450, 100, &mut from_seed(0)).unwrap();
        // V* = (2 + 1)^2 = 9, so the gap is sqrt(9 / 900).
        assert!((shifted.means()[1] - 0.9).abs() < 1e-12);
        let g = worst_case_gap(&m, 0, 1, 450, 100, &mut from_seed(0)).unwrap();
        assert!((shifted.means()[0] - shifted.means()[1] - g).abs() < 1e-12);

        let mut cfg = config(&["uniform-eba"], 4, 1);
        cfg.experiment.worst_case_mode = true;
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.curves[0].points.len(), 3);
    }
}
