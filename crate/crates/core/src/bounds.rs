//! Closed-form regret bounds, evaluated for overlay on empirical curves.
//!
//! Asymptotic bounds are leading factors of `sqrt(T) E[regret]` and are
//! tagged [`Scaling::PerSqrtT`]; the bounded-support bounds are absolute at
//! a given budget. Context integrals are Monte Carlo estimates with
//! standard errors.

use rand::RngCore;
use serde::Serialize;

use crate::allocation::oracle_allocation;
use crate::error::{BaiError, Result};
use crate::estimators::variance_functional;
use crate::model::LocationShiftBandit;
use crate::stats::{McEstimate, RunningMoments};

pub const DEFAULT_BOUND_DRAWS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Leading factor: the regret bound at budget T is `value / sqrt(T)`.
    PerSqrtT,
    Absolute,
}

/// What a bound was computed from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundInputs {
    pub arms: usize,
    pub budget: Option<usize>,
    /// The context integral under the square root, if any.
    pub integral: Option<McEstimate>,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub value: f64,
    pub scaling: Scaling,
    pub inputs: BoundInputs,
}

impl BoundReport {
    /// The bound on expected simple regret at budget `t`.
    pub fn at_budget(&self, t: usize) -> f64 {
        match self.scaling {
            Scaling::PerSqrtT => self.value / (t as f64).sqrt(),
            Scaling::Absolute => self.value,
        }
    }
}

fn check_arms(k: usize) -> Result<()> {
    if k < 2 {
        return Err(BaiError::domain(format!("need at least 2 arms, got {k}")));
    }
    Ok(())
}

/// `(1/20) sqrt(K/T)`: minimax lower bound for bounded outcomes.
pub fn bubeck_lower(k: usize, t: usize) -> Result<f64> {
    check_arms(k)?;
    if t < k {
        return Err(BaiError::domain(format!(
            "budget {t} is smaller than the {k} arms"
        )));
    }
    Ok((k as f64 / t as f64).sqrt() / 20.0)
}

/// `2 sqrt(K ln K / (T + K))`: uniform sampling with empirical-best
/// recommendation on bounded outcomes.
pub fn uniform_eba_upper(k: usize, t: usize) -> Result<f64> {
    check_arms(k)?;
    if t == 0 {
        return Err(BaiError::domain("budget must be positive"));
    }
    let kf = k as f64;
    Ok(2.0 * (kf * kf.ln() / (t as f64 + kf)).sqrt())
}

/// Context integrals shared by the asymptotic bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceIntegrals {
    pub arms: usize,
    /// `sum_a E_x[sigma_a^2(x)]`.
    pub sum_expected_variance: McEstimate,
    /// `E_x[(sigma_1(x) + sigma_2(x))^2]`, two-arm models only.
    pub expected_sigma_sum_sq: Option<McEstimate>,
}

impl VarianceIntegrals {
    pub fn estimate<R: RngCore + ?Sized>(
        model: &LocationShiftBandit,
        n_mc: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n_mc == 0 {
            return Err(BaiError::domain("n_mc must be positive"));
        }
        let k = model.num_arms();
        let mut total = RunningMoments::new();
        let mut pair = RunningMoments::new();
        let mut x = vec![0.0; model.dim()];
        for _ in 0..n_mc {
            model.sample_context_into(rng, &mut x);
            total.push((0..k).map(|a| model.conditional_variance(a, &x)).sum());
            if k == 2 {
                let s = model.conditional_variance(0, &x).sqrt()
                    + model.conditional_variance(1, &x).sqrt();
                pair.push(s * s);
            }
        }
        Ok(Self {
            arms: k,
            sum_expected_variance: total.estimate(),
            expected_sigma_sum_sq: (k == 2).then(|| pair.estimate()),
        })
    }
}

fn report(name: &str, constant: f64, integral: McEstimate, arms: usize) -> BoundReport {
    BoundReport {
        name: name.to_string(),
        value: constant * integral.value.sqrt(),
        scaling: Scaling::PerSqrtT,
        inputs: BoundInputs {
            arms,
            budget: None,
            integral: Some(integral),
            constant,
        },
    }
}

/// `(1/12) sqrt(sum_a E[sigma_a^2(x)])`.
pub fn minimax_lower_multi(vi: &VarianceIntegrals) -> BoundReport {
    report(
        "minimax_lower_multi",
        1.0 / 12.0,
        vi.sum_expected_variance,
        vi.arms,
    )
}

/// `(1/12) sqrt(E[(sigma_1(x) + sigma_2(x))^2])`; two arms only.
pub fn minimax_lower_two(vi: &VarianceIntegrals) -> Result<BoundReport> {
    let integral = vi
        .expected_sigma_sum_sq
        .ok_or_else(|| BaiError::domain(format!("two-arm bound needs K = 2, got {}", vi.arms)))?;
    Ok(report("minimax_lower_two", 1.0 / 12.0, integral, 2))
}

/// The lower bound matching the model: the two-arm form when K = 2.
pub fn minimax_lower(vi: &VarianceIntegrals) -> BoundReport {
    minimax_lower_two(vi).unwrap_or_else(|_| minimax_lower_multi(vi))
}

/// Leading factor of the RS-AIPW upper bound: `(1/2.2) sqrt(E[(sigma_1 + sigma_2)^2])`
/// for two arms, `((K-1)/1.6) sqrt(sum_a E[sigma_a^2])` otherwise.
pub fn rs_aipw_upper(vi: &VarianceIntegrals) -> BoundReport {
    match vi.expected_sigma_sum_sq {
        Some(pair) => report("rs_aipw_upper", 1.0 / 2.2, pair, 2),
        None => report(
            "rs_aipw_upper",
            (vi.arms - 1) as f64 / 1.6,
            vi.sum_expected_variance,
            vi.arms,
        ),
    }
}

/// Non-asymptotic form at budget `t` with the Berry-Esseen-type remainder
/// `A T^{-1/4} (log T)^{1 + 1/alpha}`. `A` is not known in closed form, so
/// the caller supplies it; the result is only a formula evaluation.
pub fn rs_aipw_upper_finite(
    vi: &VarianceIntegrals,
    t: usize,
    remainder_constant: f64,
    alpha: f64,
) -> Result<f64> {
    if t < 2 {
        return Err(BaiError::domain("budget must be at least 2"));
    }
    if !(alpha > 0.0) || remainder_constant < 0.0 {
        return Err(BaiError::domain(
            "alpha must be positive and A non-negative",
        ));
    }
    let tf = t as f64;
    let lead = match vi.expected_sigma_sum_sq {
        Some(pair) => (2.0 * pair.value / tf).sqrt() / 2.2,
        None => (vi.arms - 1) as f64 / 2.2 * (4.0 * vi.sum_expected_variance.value / tf).sqrt(),
    };
    Ok(lead + remainder_constant * tf.powf(-0.25) * tf.ln().powf(1.0 + 1.0 / alpha))
}

/// Bounded-support bounds at budget `t`, as absolute reports.
pub fn absolute_bounds(k: usize, t: usize) -> Result<Vec<BoundReport>> {
    let make = |name: &str, value: f64, constant: f64| BoundReport {
        name: name.to_string(),
        value,
        scaling: Scaling::Absolute,
        inputs: BoundInputs {
            arms: k,
            budget: Some(t),
            integral: None,
            constant,
        },
    };
    Ok(vec![
        make("bubeck_lower", bubeck_lower(k, t)?, 1.0 / 20.0),
        make("uniform_eba_upper", uniform_eba_upper(k, t)?, 2.0),
    ])
}

/// `sqrt(V / (2T))`: the gap at which the worst-case regret for a pair
/// with asymptotic variance `V` is attained.
pub fn worst_case_gap_from_variance(v: f64, t: usize) -> Result<f64> {
    if t == 0 {
        return Err(BaiError::domain("budget must be positive"));
    }
    if !(v.is_finite() && v >= 0.0) {
        return Err(BaiError::domain(format!(
            "variance must be finite and non-negative, got {v}"
        )));
    }
    Ok((v / (2.0 * t as f64)).sqrt())
}

/// [`worst_case_gap_from_variance`] with `V` the variance functional of the
/// pair under the true target allocation.
pub fn worst_case_gap<R: RngCore + ?Sized>(
    model: &LocationShiftBandit,
    a: usize,
    b: usize,
    t: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<f64> {
    let v = variance_functional(
        model,
        |x: &[f64]| oracle_allocation(model, x),
        a,
        b,
        n_mc,
        rng,
    )?;
    worst_case_gap_from_variance(v.value, t)
}

/// Context-free versus contextual variance functionals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyGain {
    /// `sqrt(sum_a Var(Y^a))`, total outcome variances.
    pub context_free: f64,
    /// `sqrt(sum_a E_x[sigma_a^2(x)])`.
    pub contextual: f64,
    /// `sum_a Var_x(mu_a(x))`: the squared gap between the two, with its
    /// Monte Carlo error.
    pub mean_variation: McEstimate,
}

impl EfficiencyGain {
    pub fn gain(&self) -> f64 {
        self.context_free - self.contextual
    }
}

/// Compares the two functionals on shared context draws, so that the law of
/// total variance holds exactly draw by draw.
pub fn efficiency_gain<R: RngCore + ?Sized>(
    model: &LocationShiftBandit,
    n_mc: usize,
    rng: &mut R,
) -> Result<EfficiencyGain> {
    if n_mc < 2 {
        return Err(BaiError::domain("n_mc must be at least 2"));
    }
    let k = model.num_arms();
    let mut x = vec![0.0; model.dim()];
    let mut cond_var = RunningMoments::new();
    let mut means: Vec<Vec<f64>> = vec![Vec::with_capacity(n_mc); k];
    for _ in 0..n_mc {
        model.sample_context_into(rng, &mut x);
        cond_var.push((0..k).map(|a| model.conditional_variance(a, &x)).sum());
        for (a, m) in means.iter_mut().enumerate() {
            m.push(model.conditional_mean(a, &x));
        }
    }
    let centers: Vec<f64> = means
        .iter()
        .map(|m| m.iter().sum::<f64>() / n_mc as f64)
        .collect();
    let mut variation = RunningMoments::new();
    for i in 0..n_mc {
        variation.push((0..k).map(|a| (means[a][i] - centers[a]).powi(2)).sum());
    }
    let ev = cond_var.mean();
    let vm = variation.mean();
    Ok(EfficiencyGain {
        context_free: (ev + vm).sqrt(),
        contextual: ev.sqrt(),
        mean_variation: variation.estimate(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_synthetic_model, ContextDistribution};
    use crate::rng::from_seed;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn constant(vars: &[f64]) -> LocationShiftBandit {
        let means: Vec<f64> = (0..vars.len()).map(|i| 1.0 - 0.1 * i as f64).collect();
        let ctx = ContextDistribution::gaussian(vec![0.0], vec![vec![1.0]]).unwrap();
        LocationShiftBandit::constant(&means, vars, ctx).unwrap()
    }

    fn integrals(vars: &[f64]) -> VarianceIntegrals {
        VarianceIntegrals::estimate(&constant(vars), 100, &mut from_seed(0)).unwrap()
    }

    #[test]
    fn bounded_support_bounds() {
        assert!(close(bubeck_lower(4, 400).unwrap(), 0.005, 1e-15));
        assert!(close(bubeck_lower(2, 2).unwrap(), 0.05, 1e-15));
        assert!(bubeck_lower(20, 5).is_err());
        let oracle = 2.0 * (2.0 * std::f64::consts::LN_2 / 100.0).sqrt();
        assert!(close(uniform_eba_upper(2, 98).unwrap(), oracle, 1e-15));
        assert!(close(oracle, 0.2355, 5e-5));
        let mut prev = f64::INFINITY;
        for t in 1..200 {
            let v = uniform_eba_upper(5, t).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn lower_bounds_on_constant_models() {
        assert!(close(
            minimax_lower_multi(&integrals(&[1.0; 4])).value,
            2.0 / 12.0,
            1e-12
        ));
        assert!(close(
            minimax_lower_multi(&integrals(&[1.0, 2.0, 3.0])).value,
            6f64.sqrt() / 12.0,
            1e-12
        ));
        assert!(close(
            minimax_lower_two(&integrals(&[1.0, 1.0])).unwrap().value,
            2.0 / 12.0,
            1e-12
        ));
        let vi = integrals(&[4.0, 1.0]);
        assert!(close(minimax_lower_two(&vi).unwrap().value, 0.25, 1e-12));
        // sqrt(4 + 1) < 2 + 1: the two-arm functional is the larger one.
        assert!(minimax_lower_multi(&vi).value < minimax_lower_two(&vi).unwrap().value);
        assert!(minimax_lower_two(&integrals(&[1.0; 3])).is_err());
    }

    #[test]
    fn upper_bounds_on_constant_models() {
        assert!(close(
            rs_aipw_upper(&integrals(&[1.0, 1.0])).value,
            2.0 / 2.2,
            1e-12
        ));
        assert!(close(
            rs_aipw_upper(&integrals(&[1.0; 3])).value,
            1.25 * 3f64.sqrt(),
            1e-12
        ));
        let r = rs_aipw_upper(&integrals(&[1.0, 1.0]));
        assert_eq!(r.scaling, Scaling::PerSqrtT);
        assert!(close(r.at_budget(100), 0.2 / 2.2, 1e-12));
    }

    #[test]
    fn finite_budget_formula() {
        let vi = integrals(&[1.0, 1.0]);
        let lead = (8.0f64 / 100.0).sqrt() / 2.2;
        assert!(close(
            rs_aipw_upper_finite(&vi, 100, 0.0, 1.0).unwrap(),
            lead,
            1e-12
        ));
        let with_tail = rs_aipw_upper_finite(&vi, 100, 1.0, 1.0).unwrap();
        assert!(close(
            with_tail - lead,
            100f64.powf(-0.25) * 100f64.ln().powi(2),
            1e-12
        ));
        let vi3 = integrals(&[1.0; 3]);
        assert!(close(
            rs_aipw_upper_finite(&vi3, 100, 0.0, 2.0).unwrap(),
            2.0 / 2.2 * 0.12f64.sqrt(),
            1e-12
        ));
    }

    #[test]
    fn gap_formula() {
        assert!(close(
            worst_case_gap_from_variance(9.0, 450).unwrap(),
            0.1,
            1e-15
        ));
        let a = worst_case_gap_from_variance(3.0, 1000).unwrap();
        let b = worst_case_gap_from_variance(3.0, 2000).unwrap();
        assert!(close(a / b, 2f64.sqrt(), 1e-12));
        // Constant (4, 1): V* = (2 + 1)^2 = 9.
        let m = constant(&[4.0, 1.0]);
        let g = worst_case_gap(&m, 0, 1, 450, 1000, &mut from_seed(1)).unwrap();
        assert!(close(g, 0.1, 1e-12));
    }

    #[test]
    fn efficiency_gain_cases() {
        let g = efficiency_gain(&constant(&[2.0, 3.0]), 1000, &mut from_seed(2)).unwrap();
        assert!(close(g.gain(), 0.0, 1e-12));

        let point = ContextDistribution::point(vec![1.0, 1.0]).unwrap();
        let m = make_synthetic_model(3, 2, 1.0, 0.8, &mut from_seed(3)).unwrap();
        let degenerate =
            LocationShiftBandit::new(m.arms().to_vec(), point, m.c_mu(), m.c_sigma2()).unwrap();
        let g = efficiency_gain(&degenerate, 1000, &mut from_seed(4)).unwrap();
        assert!(close(g.gain(), 0.0, 1e-12));

        let g = efficiency_gain(&m, 100_000, &mut from_seed(5)).unwrap();
        assert!(
            g.mean_variation.value > 3.0 * g.mean_variation.std_err,
            "{g:?}"
        );
        assert!(g.context_free > g.contextual);
    }

    #[test]
    fn reports_are_nonnegative() {
        let mut rng = from_seed(6);
        for k in 2..=6 {
            let m = make_synthetic_model(k, 2, 1.0, 0.8, &mut rng).unwrap();
            let vi = VarianceIntegrals::estimate(&m, 2000, &mut rng).unwrap();
            for r in [
                minimax_lower_multi(&vi),
                minimax_lower(&vi),
                rs_aipw_upper(&vi),
            ] {
                assert!(r.value.is_finite() && r.value >= 0.0);
            }
            assert!(minimax_lower(&vi).value <= rs_aipw_upper(&vi).value);
            for r in absolute_bounds(k, 100).unwrap() {
                assert!(r.value > 0.0);
            }
        }
    }
}
