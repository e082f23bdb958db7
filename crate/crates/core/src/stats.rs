//! Numerical primitives: least squares, correlation, Student t and F
//! distribution functions, and the two-sample tests built on them.
//!
//! Variances use the `n - 1` denominator throughout. Distribution functions go
//! through the regularized incomplete beta function, evaluated by a
//! continued fraction.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Result of an ordinary least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    /// One coefficient per predictor column, in column order.
    pub coefficients: Vec<f64>,
    /// `Some` iff the fit included an intercept.
    pub intercept: Option<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with `n - 1` denominator. Returns 0 for fewer than two values.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

/// Least squares of `response` on the columns of `predictors`.
///
/// With an intercept the columns and the response are centered first, so a
/// constant column shows up as rank deficiency. The solve uses Householder QR
/// with column pivoting; a pivot below `1e-10` of the largest column norm is
/// reported as [`Error::SingularDesign`] instead of being pseudo-inverted.
pub fn ols_fit(predictors: &Matrix, response: &[f64], with_intercept: bool) -> Result<RegressionFit> {
    let n = response.len();
    let k = predictors.ncols();
    if predictors.nrows() != n {
        return Err(Error::DimensionMismatch(format!("{} predictor rows for {n} responses", predictors.nrows())));
    }
    let needed = if with_intercept { k + 2 } else { k + 1 };
    if n < needed {
        return Err(Error::InsufficientSamples { needed, got: n });
    }

    let y_mean = if with_intercept { mean(response) } else { 0.0 };
    let x_means: Vec<f64> = if with_intercept { predictors.columns().map(mean).collect() } else { vec![0.0; k] };

    let yc: Vec<f64> = response.iter().map(|v| v - y_mean).collect();
    let mut cols: Vec<Vec<f64>> =
        predictors.columns().zip(&x_means).map(|(c, m)| c.iter().map(|v| v - m).collect()).collect();

    let coefficients = if k == 0 { Vec::new() } else { qr_solve(&mut cols, yc.clone())? };

    let mut residuals = yc;
    for (j, &b) in coefficients.iter().enumerate() {
        let c = predictors.col(j);
        let m = x_means[j];
        for (r, &v) in residuals.iter_mut().zip(c) {
            *r -= b * (v - m);
        }
    }
    let rss = residuals.iter().map(|r| r * r).sum();
    let intercept = with_intercept.then(|| y_mean - coefficients.iter().zip(&x_means).map(|(b, m)| b * m).sum::<f64>());

    Ok(RegressionFit { coefficients, intercept, residuals, rss })
}

/// Minimizes `|A b - y|` by Householder QR with column pivoting. `cols` is
/// overwritten.
fn qr_solve(cols: &mut [Vec<f64>], mut y: Vec<f64>) -> Result<Vec<f64>> {
    let k = cols.len();
    let norm = |c: &[f64]| c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = cols.iter().map(|c| norm(c)).fold(0.0, f64::max);
    if scale.is_nan() || scale <= 0.0 || !scale.is_finite() {
        return Err(Error::SingularDesign);
    }
    let tol = 1e-10 * scale;
    let mut perm: Vec<usize> = (0..k).collect();
    let mut diag = vec![0.0; k];

    for j in 0..k {
        // Pivot: largest trailing norm.
        let (p, best) =
            (j..k).map(|c| (c, norm(&cols[c][j..]))).fold((j, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= tol {
            return Err(Error::SingularDesign);
        }
        cols.swap(j, p);
        perm.swap(j, p);

        let alpha = if cols[j][j] > 0.0 { -best } else { best };
        let mut v = cols[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        diag[j] = alpha;
        if vnorm2 > 0.0 {
            for c in cols.iter_mut().skip(j + 1) {
                reflect(&v, vnorm2, &mut c[j..]);
            }
            reflect(&v, vnorm2, &mut y[j..]);
        }
        cols[j][j] = alpha;
    }

    // Back substitution on R z = (Q^T y)[..k].
    let mut z = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = y[i];
        for c in i + 1..k {
            s -= cols[c][i] * z[c];
        }
        z[i] = s / diag[i];
    }
    let mut beta = vec![0.0; k];
    for (i, &p) in perm.iter().enumerate() {
        beta[p] = z[i];
    }
    Ok(beta)
}

#[inline]
fn reflect(v: &[f64], vnorm2: f64, c: &mut [f64]) {
    let dot: f64 = v.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
    let f = 2.0 * dot / vnorm2;
    for (ci, vi) in c.iter_mut().zip(v) {
        *ci -= f * vi;
    }
}

/// Pearson correlation coefficient, clamped to `[-1, 1]`.
pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} samples", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: x.len() });
    }
    if is_constant(x) || is_constant(y) {
        return Err(Error::DegenerateVariance);
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let da = a - mx;
        let db = b - my;
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// First-order partial correlation of `x` and `y` given `z`.
pub fn partial_corr(x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
    if x.len() < 4 {
        return Err(Error::InsufficientSamples { needed: 4, got: x.len() });
    }
    if z.len() != x.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} samples", x.len(), z.len())));
    }
    let rxy = pearson_corr(x, y)?;
    let rxz = pearson_corr(x, z)?;
    let ryz = pearson_corr(y, z)?;
    partial_from_pairwise(rxy, rxz, ryz)
}

pub(crate) fn partial_from_pairwise(rxy: f64, rxz: f64, ryz: f64) -> Result<f64> {
    const LIMIT: f64 = 1.0 - 1e-12;
    if rxz.abs() >= LIMIT || ryz.abs() >= LIMIT {
        return Err(Error::DegenerateConditioning);
    }
    let r = (rxy - rxz * ryz) / ((1.0 - rxz * rxz) * (1.0 - ryz * ryz)).sqrt();
    Ok(r.clamp(-1.0, 1.0))
}

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    reg_inc_beta_split(a, b, x, 1.0 - x)
}

/// `I_x(a, b)` with `y = 1 - x` supplied separately, so callers that can form
/// `1 - x` without cancellation keep full precision in both tails.
fn reg_inc_beta_split(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * y.ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        (ln_front.exp() * beta_cf(a, b, x) / a).clamp(0.0, 1.0)
    } else {
        (1.0 - ln_front.exp() * beta_cf(b, a, y) / b).clamp(0.0, 1.0)
    }
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 100_000;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

fn check_df(df: f64) -> Result<()> {
    if df > 0.0 && df.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("degrees of freedom must be positive and finite, got {df}")))
    }
}

/// `(df / (df + t^2), t^2 / (df + t^2))` without cancellation.
fn t_beta_args(t: f64, df: f64) -> (f64, f64) {
    if t == 0.0 {
        return (1.0, 0.0);
    }
    let t2 = t * t;
    if !t2.is_finite() {
        return (0.0, 1.0);
    }
    (df / (df + t2), t2 / (df + t2))
}

/// Student t distribution function.
pub fn student_t_cdf(t: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    if t.is_nan() {
        return Err(Error::domain("t is NaN"));
    }
    let (x, y) = t_beta_args(t, df);
    let tail = 0.5 * reg_inc_beta_split(0.5 * df, 0.5, x, y);
    Ok(if t > 0.0 { 1.0 - tail } else { tail })
}

/// Two-sided tail probability `P(|T| >= |t|)`.
pub fn student_t_two_sided(t: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    if t.is_nan() {
        return Err(Error::domain("t is NaN"));
    }
    let (x, y) = t_beta_args(t, df);
    Ok(reg_inc_beta_split(0.5 * df, 0.5, x, y))
}

fn check_f_args(x: f64, d1: f64, d2: f64) -> Result<()> {
    check_df(d1)?;
    check_df(d2)?;
    if x >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("F argument must be nonnegative, got {x}")))
    }
}

/// F distribution function.
pub fn f_cdf(x: f64, d1: f64, d2: f64) -> Result<f64> {
    check_f_args(x, d1, d2)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let denom = d1 * x + d2;
    Ok(reg_inc_beta_split(0.5 * d1, 0.5 * d2, d1 * x / denom, d2 / denom))
}

/// F survival function `1 - f_cdf(x)`, accurate in the upper tail.
pub fn f_sf(x: f64, d1: f64, d2: f64) -> Result<f64> {
    check_f_args(x, d1, d2)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let denom = d1 * x + d2;
    Ok(reg_inc_beta_split(0.5 * d2, 0.5 * d1, d2 / denom, d1 * x / denom))
}

/// Welch two-sample t-test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub statistic: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    pub p_value: f64,
}

/// Two-sided Welch t-test for equal means.
///
/// When both samples are constant the statistic is undefined; the p-value is
/// then 1 for equal means and 0 otherwise.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(Error::InsufficientSamples { needed: 2, got: s.len() });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let sa = variance(a) / na;
    let sb = variance(b) / nb;
    let se2 = sa + sb;
    if se2 == 0.0 {
        let (statistic, p_value) = if ma == mb { (0.0, 1.0) } else { ((ma - mb).signum() * f64::INFINITY, 0.0) };
        return Ok(WelchTest { statistic, df: na + nb - 2.0, p_value });
    }
    let statistic = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let p_value = student_t_two_sided(statistic, df)?;
    Ok(WelchTest { statistic, df, p_value })
}

/// F-test for equality of two variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceTest {
    /// `var(a) / var(b)`.
    pub statistic: f64,
    pub df1: f64,
    pub df2: f64,
    pub p_value: f64,
}

/// Two-sided F-test: `p = min(1, 2 min(F(r), 1 - F(r)))` with
/// `r = var(a) / var(b)` on `(|a| - 1, |b| - 1)` degrees of freedom.
pub fn f_var_test(a: &[f64], b: &[f64]) -> Result<VarianceTest> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(Error::InsufficientSamples { needed: 2, got: s.len() });
        }
        if is_constant(s) {
            return Err(Error::DegenerateVariance);
        }
    }
    let (va, vb) = (variance(a), variance(b));
    if va == 0.0 || vb == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let (df1, df2) = ((a.len() - 1) as f64, (b.len() - 1) as f64);
    // Evaluate in a canonical orientation so swapping arguments is bit-exact.
    let swap = (vb, df2) > (va, df1);
    let (r, d1, d2) = if swap { (vb / va, df2, df1) } else { (va / vb, df1, df2) };
    let lower = f_cdf(r, d1, d2)?;
    let upper = f_sf(r, d1, d2)?;
    let p_value = (2.0 * lower.min(upper)).min(1.0);
    Ok(VarianceTest { statistic: va / vb, df1, df2, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_has_unit_coefficient() {
        let y = vec![0.3, -1.2, 2.5, 0.9, 4.1];
        let x = Matrix::from_columns(5, std::slice::from_ref(&y)).unwrap();
        let fit = ols_fit(&x, &y, true).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
        assert!(fit.intercept.unwrap().abs() < 1e-12);
    }

    #[test]
    fn intercept_only_centers() {
        let fit = ols_fit(&Matrix::empty(3), &[1.0, 2.0, 3.0], true).unwrap();
        assert_eq!(fit.residuals, vec![-1.0, 0.0, 1.0]);
        assert_eq!(fit.intercept, Some(2.0));
        assert_eq!(fit.rss, 2.0);
    }

    #[test]
    fn collinear_design_is_singular() {
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v + 1.0).collect();
        let x = Matrix::from_columns(5, &[a, b]).unwrap();
        assert_eq!(ols_fit(&x, &[1.0, 0.0, 2.0, 1.0, 3.0], true), Err(Error::SingularDesign));
        let c = Matrix::from_columns(5, &[vec![7.0; 5]]).unwrap();
        assert_eq!(ols_fit(&c, &[1.0, 0.0, 2.0, 1.0, 3.0], true), Err(Error::SingularDesign));
    }

    #[test]
    fn too_few_samples() {
        let x = Matrix::from_columns(3, &[vec![1.0, 2.0, 4.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(ols_fit(&x, &[1.0, 2.0, 3.0], true), Err(Error::InsufficientSamples { needed: 4, got: 3 }));
        assert!(ols_fit(&x, &[1.0, 2.0, 3.0], false).is_ok());
    }

    #[test]
    fn correlation_edge_cases() {
        let x = vec![1.0, 4.0, 2.0, 8.0, 5.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(pearson_corr(&x, &x).unwrap(), 1.0);
        assert_eq!(pearson_corr(&x, &neg).unwrap(), -1.0);
        assert_eq!(pearson_corr(&x, &[2.0; 5]), Err(Error::DegenerateVariance));
        assert!(matches!(pearson_corr(&x[..2], &x[..2]), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn partial_corr_collinear_conditioning() {
        let x = vec![1.0, 4.0, 2.0, 8.0, 5.0];
        let y = vec![0.5, -1.0, 2.0, 0.1, 3.0];
        assert_eq!(partial_corr(&x, &y, &x), Err(Error::DegenerateConditioning));
    }

    #[test]
    fn t_cdf_symmetry() {
        for df in [0.5, 1.0, 3.0, 10.0, 250.0] {
            assert_eq!(student_t_cdf(0.0, df).unwrap(), 0.5);
        }
        let lo = student_t_cdf(-3.0, 5.0).unwrap();
        let hi = student_t_cdf(3.0, 5.0).unwrap();
        assert!((lo + hi - 1.0).abs() < 1e-12);
        assert!(student_t_cdf(1.0, 0.0).is_err());
        assert!(student_t_cdf(1.0, -2.0).is_err());
    }

    #[test]
    fn t_cdf_known_values() {
        // Cauchy: F(1) = 3/4.
        assert!((student_t_cdf(1.0, 1.0).unwrap() - 0.75).abs() < 1e-14);
        // df = 2 has the closed form 1/2 + t / (2 sqrt(2 + t^2)).
        let t: f64 = 1.7;
        let exact = 0.5 + t / (2.0 * (2.0 + t * t).sqrt());
        assert!((student_t_cdf(t, 2.0).unwrap() - exact).abs() < 1e-14);
    }

    #[test]
    fn f_cdf_bounds() {
        assert_eq!(f_cdf(0.0, 3.0, 4.0).unwrap(), 0.0);
        assert!((f_cdf(1.0, 8.0, 8.0).unwrap() - 0.5).abs() < 1e-14);
        assert!(f_cdf(-1.0, 3.0, 4.0).is_err());
        assert!(f_cdf(1.0, 0.0, 4.0).is_err());
        // d1 = d2 = 2: F(x) = x / (1 + x).
        assert!((f_cdf(3.0, 2.0, 2.0).unwrap() - 0.75).abs() < 1e-14);
    }

    #[test]
    fn ln_gamma_factorials() {
        let mut fact = 1.0f64;
        for k in 1..20 {
            fact *= k as f64;
            assert!((ln_gamma(k as f64 + 1.0) - fact.ln()).abs() < 1e-12, "k = {k}");
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn welch_conventions() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(welch_t_test(&a, &a).unwrap().p_value, 1.0);
        assert_eq!(welch_t_test(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap().p_value, 1.0);
        assert_eq!(welch_t_test(&[2.0, 2.0], &[3.0, 3.0]).unwrap().p_value, 0.0);
        assert!(welch_t_test(&[1.0], &a).is_err());
    }

    #[test]
    fn variance_test_conventions() {
        let a = [1.0, 2.0, 4.0, 3.0];
        assert!((f_var_test(&a, &a).unwrap().p_value - 1.0).abs() < 1e-12);
        assert_eq!(f_var_test(&a, &[5.0, 5.0]), Err(Error::DegenerateVariance));
    }
}
