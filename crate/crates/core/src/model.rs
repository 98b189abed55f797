//! Location-shift contextual bandit environments.
//!
//! A model fixes the context distribution and the per-arm conditional
//! variance functions; only the conditional means differ between models of
//! the same class. Outcomes are Gaussian given the context.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_arm, BaiError, Result};
use crate::stats::{argmax_lowest, RunningMoments};

/// Default bound on the conditional means.
pub const DEFAULT_C_MU: f64 = 20.0;
/// Default bound on conditional variances and their reciprocals.
pub const DEFAULT_C_SIGMA2: f64 = 10.0;
/// Context draws used for moment matching and marginal summaries.
pub const DEFAULT_MOMENT_DRAWS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextFamily {
    Gaussian,
    /// Every draw equals the mean vector.
    Point,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ContextDistributionSpec {
    family: ContextFamily,
    mean: Vec<f64>,
    #[serde(default)]
    covariance: Vec<Vec<f64>>,
}

/// Distribution of the context vector, shared by every arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ContextDistributionSpec", into = "ContextDistributionSpec")]
pub struct ContextDistribution {
    family: ContextFamily,
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    // Lower-triangular Cholesky factor, row-major D x D.
    chol: Vec<f64>,
}

impl TryFrom<ContextDistributionSpec> for ContextDistribution {
    type Error = BaiError;

    fn try_from(spec: ContextDistributionSpec) -> Result<Self> {
        match spec.family {
            ContextFamily::Gaussian => Self::gaussian(spec.mean, spec.covariance),
            ContextFamily::Point => Self::point(spec.mean),
        }
    }
}

impl From<ContextDistribution> for ContextDistributionSpec {
    fn from(d: ContextDistribution) -> Self {
        ContextDistributionSpec {
            family: d.family,
            mean: d.mean,
            covariance: d.covariance,
        }
    }
}

impl ContextDistribution {
    /// Multivariate normal. Fails unless the covariance is symmetric and
    /// positive-definite.
    pub fn gaussian(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(BaiError::config("context dimension must be positive"));
        }
        if covariance.len() != d || covariance.iter().any(|row| row.len() != d) {
            return Err(BaiError::config(format!(
                "covariance must be {d}x{d} to match the mean"
            )));
        }
        if mean
            .iter()
            .chain(covariance.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(BaiError::config("context parameters must be finite"));
        }
        for i in 0..d {
            for j in 0..i {
                let (a, b) = (covariance[i][j], covariance[j][i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(BaiError::config("covariance is not symmetric"));
                }
            }
        }
        let chol = cholesky(&covariance)
            .ok_or_else(|| BaiError::config("covariance is not positive-definite"))?;
        Ok(Self {
            family: ContextFamily::Gaussian,
            mean,
            covariance,
            chol,
        })
    }

    /// Degenerate distribution concentrated on a single context.
    pub fn point(at: Vec<f64>) -> Result<Self> {
        let d = at.len();
        if d == 0 {
            return Err(BaiError::config("context dimension must be positive"));
        }
        Ok(Self {
            family: ContextFamily::Point,
            mean: at,
            covariance: vec![vec![0.0; d]; d],
            chol: vec![0.0; d * d],
        })
    }

    /// The 2-d Gaussian used by the synthetic design: mean (1, 1), unit
    /// variances, covariance 0.1.
    pub fn synthetic_default() -> Self {
        Self::gaussian(vec![1.0, 1.0], vec![vec![1.0, 0.1], vec![0.1, 1.0]])
            .expect("fixed covariance is positive-definite")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn family(&self) -> ContextFamily {
        self.family
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &[Vec<f64>] {
        &self.covariance
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }

    /// Writes one draw into `out`, which must have length `dim()`.
    pub fn sample_into<R: RngCore + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.dim();
        debug_assert_eq!(out.len(), d);
        out.copy_from_slice(&self.mean);
        if self.family == ContextFamily::Point {
            return;
        }
        let mut z = [0.0f64; 8];
        let mut z_heap;
        let z: &mut [f64] = if d <= z.len() {
            &mut z[..d]
        } else {
            z_heap = vec![0.0; d];
            &mut z_heap
        };
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        for i in 0..d {
            let row = &self.chol[i * d..i * d + i + 1];
            out[i] += row.iter().zip(z.iter()).map(|(l, zj)| l * zj).sum::<f64>();
        }
    }
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<f64>> {
    let d = a.len();
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let pivot = a[i][i] - s;
                if pivot <= 0.0 || !pivot.is_finite() {
                    return None;
                }
                l[i * d + i] = pivot.sqrt();
            } else {
                l[i * d + j] = (a[i][j] - s) / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// A function of the context: either a constant or the clipped, scaled
/// weighted sum of squares `clamp(sum_i w_i x_i^2 / scale + shift, lower, upper)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConditionalFn {
    Constant {
        value: f64,
    },
    Quadratic {
        weights: Vec<f64>,
        scale: f64,
        #[serde(default)]
        shift: f64,
        lower: f64,
        upper: f64,
    },
}

impl ConditionalFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ConditionalFn::Constant { value } => *value,
            ConditionalFn::Quadratic {
                weights,
                scale,
                shift,
                lower,
                upper,
            } => {
                let g: f64 = weights.iter().zip(x).map(|(w, xi)| w * xi * xi).sum();
                (g / scale + shift).clamp(*lower, *upper)
            }
        }
    }

    /// Range the function can take, used for the boundedness checks.
    fn range(&self) -> (f64, f64) {
        match self {
            ConditionalFn::Constant { value } => (*value, *value),
            ConditionalFn::Quadratic { lower, upper, .. } => (*lower, *upper),
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            ConditionalFn::Constant { .. } => None,
            ConditionalFn::Quadratic { weights, .. } => Some(weights.len()),
        }
    }

    fn shifted(&self, delta: f64) -> Self {
        match self {
            ConditionalFn::Constant { value } => ConditionalFn::Constant {
                value: value + delta,
            },
            ConditionalFn::Quadratic {
                weights,
                scale,
                shift,
                lower,
                upper,
            } => ConditionalFn::Quadratic {
                weights: weights.clone(),
                scale: *scale,
                shift: shift + delta,
                lower: *lower,
                upper: *upper,
            },
        }
    }
}

/// Law-of-total-variance split of an arm's marginal variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecomposition {
    /// E_x[sigma^2(x)].
    pub expected_conditional_variance: f64,
    /// Var_x[mu(x)].
    pub variance_of_conditional_mean: f64,
}

/// One arm: marginal summaries plus the conditional mean and variance
/// functions. Outcomes are `Normal(mean_fn(x), var_fn(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub marginal_mean: f64,
    pub marginal_variance: f64,
    pub decomposition: VarianceDecomposition,
    pub mean_fn: ConditionalFn,
    pub var_fn: ConditionalFn,
}

impl ArmSpec {
    /// Arm whose mean and variance do not depend on the context.
    pub fn constant(mean: f64, variance: f64) -> Self {
        Self {
            marginal_mean: mean,
            marginal_variance: variance,
            decomposition: VarianceDecomposition {
                expected_conditional_variance: variance,
                variance_of_conditional_mean: 0.0,
            },
            mean_fn: ConditionalFn::Constant { value: mean },
            var_fn: ConditionalFn::Constant { value: variance },
        }
    }

    /// Builds an arm from its conditional functions, integrating the
    /// marginal summaries over `contexts`.
    pub fn from_functions(
        mean_fn: ConditionalFn,
        var_fn: ConditionalFn,
        contexts: &[Vec<f64>],
    ) -> Self {
        let mut m = RunningMoments::new();
        let mut v = RunningMoments::new();
        for x in contexts {
            m.push(mean_fn.eval(x));
            v.push(var_fn.eval(x));
        }
        let decomposition = VarianceDecomposition {
            expected_conditional_variance: v.mean(),
            variance_of_conditional_mean: m.population_variance(),
        };
        Self {
            marginal_mean: m.mean(),
            marginal_variance: decomposition.expected_conditional_variance
                + decomposition.variance_of_conditional_mean,
            decomposition,
            mean_fn,
            var_fn,
        }
    }
}

/// A full-data bandit model: K arms over a shared context distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationShiftBandit {
    arms: Vec<ArmSpec>,
    context: ContextDistribution,
    c_mu: f64,
    c_sigma2: f64,
}

impl LocationShiftBandit {
    pub fn new(
        arms: Vec<ArmSpec>,
        context: ContextDistribution,
        c_mu: f64,
        c_sigma2: f64,
    ) -> Result<Self> {
        let model = Self {
            arms,
            context,
            c_mu,
            c_sigma2,
        };
        model.validate()?;
        Ok(model)
    }

    /// Context-free arms with the given means and variances over `context`.
    pub fn constant(
        means: &[f64],
        variances: &[f64],
        context: ContextDistribution,
    ) -> Result<Self> {
        if means.len() != variances.len() {
            return Err(BaiError::config("means and variances differ in length"));
        }
        let arms = means
            .iter()
            .zip(variances)
            .map(|(&m, &v)| ArmSpec::constant(m, v))
            .collect();
        Self::new(arms, context, DEFAULT_C_MU, DEFAULT_C_SIGMA2)
    }

    fn validate(&self) -> Result<()> {
        let k = self.arms.len();
        if k < 2 {
            return Err(BaiError::config(format!("need at least 2 arms, got {k}")));
        }
        if !(self.c_mu.is_finite() && self.c_mu > 0.0) {
            return Err(BaiError::config("C_mu must be positive"));
        }
        if !(self.c_sigma2.is_finite() && self.c_sigma2 >= 1.0) {
            return Err(BaiError::config("C_sigma2 must be at least 1"));
        }
        let (vlo, vhi) = (1.0 / self.c_sigma2, self.c_sigma2);
        let tol = 1e-12;
        for (a, arm) in self.arms.iter().enumerate() {
            for f in [&arm.mean_fn, &arm.var_fn] {
                if let Some(d) = f.dim() {
                    if d != self.context.dim() {
                        return Err(BaiError::config(format!(
                            "arm {a}: function dimension {d} does not match context dimension {}",
                            self.context.dim()
                        )));
                    }
                }
            }
            let (mlo, mhi) = arm.mean_fn.range();
            if !(mlo.is_finite() && mhi.is_finite())
                || mlo < -self.c_mu - tol
                || mhi > self.c_mu + tol
            {
                return Err(BaiError::config(format!(
                    "arm {a}: conditional mean range [{mlo}, {mhi}] exceeds C_mu = {}",
                    self.c_mu
                )));
            }
            let (lo, hi) = arm.var_fn.range();
            if !(lo.is_finite() && hi.is_finite()) || lo < vlo - tol || hi > vhi + tol {
                return Err(BaiError::config(format!(
                    "arm {a}: conditional variance range [{lo}, {hi}] outside [{vlo}, {vhi}]"
                )));
            }
            if let ConditionalFn::Quadratic { scale, .. } = &arm.mean_fn {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(BaiError::config(format!(
                        "arm {a}: mean scale must be positive"
                    )));
                }
            }
            if let ConditionalFn::Quadratic { scale, .. } = &arm.var_fn {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(BaiError::config(format!(
                        "arm {a}: variance scale must be positive"
                    )));
                }
            }
            if !(arm.marginal_mean.is_finite() && arm.marginal_variance > 0.0) {
                return Err(BaiError::config(format!(
                    "arm {a}: invalid marginal summaries"
                )));
            }
        }
        Ok(())
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn dim(&self) -> usize {
        self.context.dim()
    }

    pub fn arms(&self) -> &[ArmSpec] {
        &self.arms
    }

    pub fn arm(&self, a: usize) -> Result<&ArmSpec> {
        check_arm(a, self.arms.len())?;
        Ok(&self.arms[a])
    }

    pub fn context_distribution(&self) -> &ContextDistribution {
        &self.context
    }

    pub fn c_mu(&self) -> f64 {
        self.c_mu
    }

    pub fn c_sigma2(&self) -> f64 {
        self.c_sigma2
    }

    /// Marginal means mu^a.
    pub fn means(&self) -> Vec<f64> {
        self.arms.iter().map(|a| a.marginal_mean).collect()
    }

    pub fn sample_context<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.context.sample(rng)
    }

    pub fn sample_context_into<R: RngCore + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        self.context.sample_into(rng, out)
    }

    /// mu^a(x). Panics on an out-of-range arm; see [`Self::arm`] for a checked lookup.
    pub fn conditional_mean(&self, arm: usize, x: &[f64]) -> f64 {
        self.arms[arm].mean_fn.eval(x)
    }

    /// (sigma^a(x))^2.
    pub fn conditional_variance(&self, arm: usize, x: &[f64]) -> f64 {
        self.arms[arm].var_fn.eval(x)
    }

    /// Draws the potential outcome of `arm` at context `x`.
    pub fn sample_outcome<R: RngCore + ?Sized>(
        &self,
        arm: usize,
        x: &[f64],
        rng: &mut R,
    ) -> Result<f64> {
        check_arm(arm, self.arms.len())?;
        let spec = &self.arms[arm];
        let z: f64 = StandardNormal.sample(rng);
        Ok(spec.mean_fn.eval(x) + spec.var_fn.eval(x).sqrt() * z)
    }

    /// Arm with the highest marginal mean, lowest index on ties.
    pub fn best_arm(&self) -> usize {
        argmax_lowest(&self.means())
    }

    /// Best arm among all arms other than `best_arm()`.
    pub fn runner_up(&self) -> usize {
        let best = self.best_arm();
        let mut means = self.means();
        means[best] = f64::NEG_INFINITY;
        argmax_lowest(&means)
    }

    /// max_a mu^a - mu^recommended.
    pub fn simple_regret(&self, recommended: usize) -> Result<f64> {
        check_arm(recommended, self.arms.len())?;
        let best = self.arms[self.best_arm()].marginal_mean;
        Ok(best - self.arms[recommended].marginal_mean)
    }

    /// Same model with each arm's conditional mean shifted so the marginal
    /// means become `means`. Variances are untouched.
    pub fn with_marginal_means(&self, means: &[f64]) -> Result<Self> {
        if means.len() != self.arms.len() {
            return Err(BaiError::config("wrong number of means"));
        }
        let arms = self
            .arms
            .iter()
            .zip(means)
            .map(|(arm, &m)| {
                let delta = m - arm.marginal_mean;
                ArmSpec {
                    marginal_mean: m,
                    mean_fn: arm.mean_fn.shifted(delta),
                    ..arm.clone()
                }
            })
            .collect();
        Self::new(arms, self.context.clone(), self.c_mu, self.c_sigma2)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| BaiError::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let model: Self = toml::from_str(text).map_err(|e| BaiError::Parse(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }
}

/// One round of the filtration: context, drawn arm, observed outcome, and
/// the probability with which the arm was drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// 1-based round.
    pub round: usize,
    pub context: Vec<f64>,
    pub arm: usize,
    pub outcome: f64,
    pub propensity: f64,
}

impl Observation {
    pub fn new(round: usize, context: Vec<f64>, arm: usize, outcome: f64, propensity: f64) -> Self {
        Self {
            round,
            context,
            arm,
            outcome,
            propensity,
        }
    }
}

/// Parameters of the synthetic quadratic design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDesign {
    pub arms: usize,
    pub dim: usize,
    pub mu_best: f64,
    pub mu_sub: f64,
    /// Per-arm expected conditional variances. Drawn from Uniform[0.1, 5]
    /// when absent.
    pub variances: Option<Vec<f64>>,
    pub c_mu: f64,
    pub c_sigma2: f64,
    pub moment_draws: usize,
}

impl SyntheticDesign {
    pub fn new(arms: usize, mu_best: f64, mu_sub: f64) -> Self {
        Self {
            arms,
            dim: 2,
            mu_best,
            mu_sub,
            variances: None,
            c_mu: DEFAULT_C_MU,
            c_sigma2: DEFAULT_C_SIGMA2,
            moment_draws: DEFAULT_MOMENT_DRAWS,
        }
    }

    pub fn with_variances(mut self, variances: Vec<f64>) -> Self {
        self.variances = Some(variances);
        self
    }

    /// Arm 0 gets `mu_best`, the rest `mu_sub`. Conditional means are
    /// `(t1 x1^2 + t2 x2^2) / c_mu^a` and conditional variances
    /// `(t1 x1^2 + t2 x2^2) / c_sigma^a` with `(t1, t2) ~ U[0,1]^2` shared by
    /// all arms. Each normalizer is solved on a common batch of context draws
    /// so the clipped function averages to its target.
    pub fn build<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<LocationShiftBandit> {
        if self.arms < 2 {
            return Err(BaiError::config(format!(
                "need at least 2 arms, got {}",
                self.arms
            )));
        }
        if self.dim != 2 {
            return Err(BaiError::config(format!(
                "the synthetic design is two-dimensional, got D = {}",
                self.dim
            )));
        }
        if !(self.mu_best > self.mu_sub) {
            return Err(BaiError::config("mu_best must exceed mu_sub"));
        }
        if !(self.mu_sub > 0.0) || self.mu_best >= self.c_mu {
            return Err(BaiError::config("synthetic means must lie in (0, C_mu)"));
        }
        if self.moment_draws < 1000 {
            return Err(BaiError::config("moment_draws must be at least 1000"));
        }
        let (vlo, vhi) = (1.0 / self.c_sigma2, self.c_sigma2);
        let variances = match &self.variances {
            Some(v) => {
                if v.len() != self.arms {
                    return Err(BaiError::config(format!(
                        "{} pinned variances for {} arms",
                        v.len(),
                        self.arms
                    )));
                }
                if v.iter().any(|&s| !(s >= vlo && s <= vhi)) {
                    return Err(BaiError::config(format!(
                        "pinned variances must lie in [{vlo}, {vhi}]"
                    )));
                }
                v.clone()
            }
            None => (0..self.arms)
                .map(|_| rng.random_range(0.1..=5.0))
                .collect(),
        };
        let weights = vec![rng.random::<f64>(), rng.random::<f64>()];

        let context = ContextDistribution::synthetic_default();
        let contexts: Vec<Vec<f64>> = (0..self.moment_draws)
            .map(|_| context.sample(rng))
            .collect();
        let g: Vec<f64> = contexts
            .iter()
            .map(|x| weights.iter().zip(x).map(|(w, xi)| w * xi * xi).sum())
            .collect();

        let mut arms = Vec::with_capacity(self.arms);
        for (a, &variance) in variances.iter().enumerate() {
            let mean = if a == 0 { self.mu_best } else { self.mu_sub };
            let mean_scale = match_scale(&g, mean, -self.c_mu, self.c_mu)
                .map_err(|e| BaiError::config(format!("arm {a} mean: {e}")))?;
            let var_scale = match_scale(&g, variance, vlo, vhi)
                .map_err(|e| BaiError::config(format!("arm {a} variance: {e}")))?;
            let mean_fn = ConditionalFn::Quadratic {
                weights: weights.clone(),
                scale: mean_scale,
                shift: 0.0,
                lower: -self.c_mu,
                upper: self.c_mu,
            };
            let var_fn = ConditionalFn::Quadratic {
                weights: weights.clone(),
                scale: var_scale,
                shift: 0.0,
                lower: vlo,
                upper: vhi,
            };
            let mut arm = ArmSpec::from_functions(mean_fn, var_fn, &contexts);
            // The declared mean is exact; the matched function agrees to MC accuracy.
            arm.marginal_mean = mean;
            arms.push(arm);
        }
        LocationShiftBandit::new(arms, context, self.c_mu, self.c_sigma2)
    }
}

/// The synthetic design with default bounds and pinned dimension `dim`.
pub fn make_synthetic_model<R: RngCore + ?Sized>(
    arms: usize,
    dim: usize,
    mu_best: f64,
    mu_sub: f64,
    rng: &mut R,
) -> Result<LocationShiftBandit> {
    SyntheticDesign {
        dim,
        ..SyntheticDesign::new(arms, mu_best, mu_sub)
    }
    .build(rng)
}

/// Finds `c > 0` with `mean(clamp(g / c, lo, hi)) = target` for `g >= 0`,
/// accepting the result when it lands within 1% of the target.
fn match_scale(g: &[f64], target: f64, lo: f64, hi: f64) -> std::result::Result<f64, String> {
    let avg = |log_c: f64| {
        let c = log_c.exp();
        g.iter().map(|gi| (gi / c).clamp(lo, hi)).sum::<f64>() / g.len() as f64
    };
    let g_mean = g.iter().sum::<f64>() / g.len() as f64;
    if !(g_mean > 0.0) {
        return Err("degenerate design weights".into());
    }
    // avg is non-increasing in c.
    let centre = (g_mean / target).ln();
    let (mut small, mut large) = (centre - 1.0, centre + 1.0);
    let mut steps = 0;
    while avg(small) < target && steps < 60 {
        small -= 2.0;
        steps += 1;
    }
    steps = 0;
    while avg(large) > target && steps < 60 {
        large += 2.0;
        steps += 1;
    }
    for _ in 0..100 {
        let mid = 0.5 * (small + large);
        if avg(mid) > target {
            small = mid;
        } else {
            large = mid;
        }
    }
    let log_c = 0.5 * (small + large);
    let achieved = avg(log_c);
    if (achieved - target).abs() > 0.01 * target.abs() {
        return Err(format!(
            "moment matching reached {achieved}, target {target}"
        ));
    }
    Ok(log_c.exp())
}
