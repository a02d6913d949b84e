//! Pearson correlation, multiple OLS regression with t-based inference, and the
//! Student-t tail probability it relies on.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RANK_TOLERANCE: f64 = 1e-10;

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::validation(format!(
            "pearson: length mismatch {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::validation("pearson: need at least 3 observations"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::degenerate("pearson: zero-variance input"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// ln Γ(z) for z > 0 (Lanczos, g = 7, n = 9).
pub fn ln_gamma(z: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
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
    if z < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * z).sin()).ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// Continued fraction for I_x(a, b) by the modified Lentz method.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const TOL: f64 = 1e-15;
    const MAX_ITERS: usize = 10_000;
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
    for m in 1..=MAX_ITERS {
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
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < TOL {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

/// Two-sided p-value of a Student-t statistic: `I_{df/(df+t²)}(df/2, 1/2)`.
pub fn t_tail_p(t: f64, df: u32) -> f64 {
    assert!(df >= 1, "degrees of freedom must be positive");
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let df = f64::from(df);
    incomplete_beta(df / (df + t * t), df / 2.0, 0.5).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    /// "Intercept" followed by the predictor names.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub t_statistics: Vec<f64>,
    pub p_values: Vec<f64>,
    pub degrees_of_freedom: u32,
    pub r_squared: f64,
}

impl RegressionReport {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }
}

/// OLS of `y` on an intercept plus the named predictor columns.
///
/// Coefficients come from the SVD of the design matrix. A singular value below
/// `1e-10 * σ_max` is reported as rank deficiency instead of being silently dropped.
pub fn ols_regression(predictors: &[(&str, &[f64])], y: &[f64]) -> Result<RegressionReport> {
    let n = y.len();
    let k = predictors.len();
    if predictors.iter().any(|(_, col)| col.len() != n) {
        return Err(Error::validation(
            "regression: predictor and response lengths differ",
        ));
    }
    if n <= k + 1 {
        return Err(Error::validation(format!(
            "regression: need more than {} observations for {k} predictors, got {n}",
            k + 1
        )));
    }
    if y.iter()
        .chain(predictors.iter().flat_map(|(_, c)| c.iter()))
        .any(|v| !v.is_finite())
    {
        return Err(Error::validation("regression: non-finite input"));
    }
    let p = k + 1;
    let x = DMatrix::from_fn(
        n,
        p,
        |i, j| if j == 0 { 1.0 } else { predictors[j - 1].1[i] },
    );
    let yv = DVector::from_column_slice(y);

    let svd = x.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let tol = RANK_TOLERANCE * smax;
    if smax == 0.0 || sv.iter().any(|&s| s <= tol) {
        return Err(Error::validation(
            "regression: design matrix is rank deficient",
        ));
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let uty = u.transpose() * &yv;
    let scaled = DVector::from_fn(p, |i, _| uty[i] / sv[i]);
    let beta = v_t.transpose() * scaled;

    let resid = &yv - &x * &beta;
    let ss_res = resid.norm_squared();
    let ybar = yv.mean();
    let ss_tot: f64 = yv.iter().map(|v| (v - ybar).powi(2)).sum();
    let dof = n - p;
    let sigma2 = ss_res / dof as f64;

    // (XᵀX)⁻¹ = V Σ⁻² Vᵀ
    let v = v_t.transpose();
    let dof = u32::try_from(dof).map_err(|_| Error::validation("regression: too many rows"))?;
    let mut standard_errors = Vec::with_capacity(p);
    let mut t_statistics = Vec::with_capacity(p);
    let mut p_values = Vec::with_capacity(p);
    for j in 0..p {
        let var: f64 = (0..p).map(|i| (v[(j, i)] / sv[i]).powi(2)).sum::<f64>() * sigma2;
        let se = var.sqrt();
        let t = beta[j] / se;
        standard_errors.push(se);
        t_statistics.push(t);
        // 0/0 only arises for an exactly zero coefficient on a perfect fit
        p_values.push(if t.is_nan() { 1.0 } else { t_tail_p(t, dof) });
    }

    let mut names = vec!["Intercept".to_string()];
    names.extend(predictors.iter().map(|(name, _)| name.to_string()));
    Ok(RegressionReport {
        names,
        coefficients: beta.iter().copied().collect(),
        standard_errors,
        t_statistics,
        p_values,
        degrees_of_freedom: dof,
        r_squared: crate::fitting::r_squared(ss_res, ss_tot),
    })
}
