//! Conditional independence and invariance tests.
//!
//! Both tests return a [`TestDecision`]; `dependent` is set iff the p-value is
//! strictly below `alpha`, so independence (or invariance) is accepted
//! whenever `p >= alpha`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestDecision {
    pub p_value: f64,
    pub alpha: f64,
    pub dependent: bool,
}

impl TestDecision {
    pub fn new(p_value: f64, alpha: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestDecision { p_value, alpha, dependent: p_value < alpha }
    }

    /// Independence (or invariance) was not rejected.
    pub fn accepted(&self) -> bool {
        !self.dependent
    }
}

/// Context realization for every sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextVector {
    labels: Vec<u32>,
}

impl ContextVector {
    /// Requires at least two distinct labels.
    pub fn new(labels: Vec<u32>) -> Result<Self> {
        if labels.iter().all(|&l| Some(&l) == labels.first()) {
            return Err(Error::domain("context needs at least two distinct labels"));
        }
        Ok(ContextVector { labels })
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Class sizes keyed by label, in label order.
    pub fn class_sizes(&self) -> BTreeMap<u32, usize> {
        let mut sizes = BTreeMap::new();
        for &l in &self.labels {
            *sizes.entry(l).or_insert(0) += 1;
        }
        sizes
    }

    /// The labels as a numeric column, for correlation tests.
    pub fn as_f64(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| l as f64).collect()
    }
}

/// Partial-correlation test of `x ⫫ y | z` (or marginal when `z` is `None`).
///
/// Uses `t = r sqrt(df / (1 - r^2))` with `df = n - 2 - |z|` and a two-sided
/// Student t p-value. A correlation of exactly ±1 gives `p = 0`.
pub fn parcor_indep_test(x: &[f64], y: &[f64], z: Option<&[f64]>, alpha: f64) -> Result<TestDecision> {
    let cond = usize::from(z.is_some());
    let needed = 4 + cond;
    if x.len() < needed {
        return Err(Error::InsufficientSamples { needed, got: x.len() });
    }
    let r = match z {
        Some(z) => stats::partial_corr(x, y, z)?,
        None => stats::pearson_corr(x, y)?,
    };
    Ok(TestDecision::new(parcor_p_value(r, x.len(), cond)?, alpha))
}

pub(crate) fn parcor_p_value(r: f64, n: usize, cond: usize) -> Result<f64> {
    let df = (n - 2 - cond) as f64;
    if r.abs() >= 1.0 {
        return Ok(0.0);
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    stats::student_t_two_sided(t, df)
}

/// Per-family p-values of the mean-variance test, before taking the minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanVarPValues {
    /// Bonferroni-corrected minimum over contexts of the Welch t-test p-values.
    pub mean: f64,
    /// Bonferroni-corrected minimum over contexts of the F-test p-values.
    pub variance: f64,
}

impl MeanVarPValues {
    pub fn combined(&self) -> f64 {
        self.mean.min(self.variance)
    }
}

/// Residual invariance test of `response` given `candidates` across contexts.
///
/// Residuals come from one pooled OLS fit with intercept (an empty candidate
/// set just centers the response). Each context class is compared with all
/// remaining samples by a Welch t-test on the means and an F-test on the
/// variances. Each family is Bonferroni-corrected over the `m` classes and
/// the final p-value is the smaller of the two.
pub fn mean_var_invariance_test(
    response: &[f64],
    candidates: &Matrix,
    context: &ContextVector,
    alpha: f64,
) -> Result<TestDecision> {
    let p = mean_var_p_values(response, candidates, context)?;
    Ok(TestDecision::new(p.combined(), alpha))
}

pub fn mean_var_p_values(response: &[f64], candidates: &Matrix, context: &ContextVector) -> Result<MeanVarPValues> {
    if context.len() != response.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} context labels for {} samples",
            context.len(),
            response.len()
        )));
    }
    let sizes = context.class_sizes();
    for (&label, &size) in &sizes {
        if size < 2 {
            return Err(Error::InsufficientContext { label, size });
        }
    }
    let fit = stats::ols_fit(candidates, response, true)?;
    let m = sizes.len() as f64;

    let mut min_mean = 1.0f64;
    let mut min_var = 1.0f64;
    let mut inside = Vec::with_capacity(response.len());
    let mut outside = Vec::with_capacity(response.len());
    for &label in sizes.keys() {
        inside.clear();
        outside.clear();
        for (&r, &l) in fit.residuals.iter().zip(context.labels()) {
            if l == label {
                inside.push(r);
            } else {
                outside.push(r);
            }
        }
        if outside.len() < 2 {
            return Err(Error::InsufficientContext { label, size: outside.len() });
        }
        min_mean = min_mean.min(stats::welch_t_test(&inside, &outside)?.p_value);
        min_var = min_var.min(stats::f_var_test(&inside, &outside)?.p_value);
    }
    Ok(MeanVarPValues { mean: (m * min_mean).min(1.0), variance: (m * min_var).min(1.0) })
}
