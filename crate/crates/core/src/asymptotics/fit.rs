//! Least-squares growth fits over an ε sweep.

use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub rss: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::Fit(format!("need at least two paired points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum();
    let slope_stderr = if n > 2 { (rss / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        rss,
    })
}

/// Slope of `ln err` against `ln h`: the observed convergence order.
pub fn loglog_slope(h: &[f64], err: &[f64]) -> f64 {
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).map_or(f64::NAN, |f| f.slope)
}

/// Both growth models fitted to one sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    /// `‖·‖ ~ ε^{-p}`.
    pub p: f64,
    pub p_stderr: f64,
    /// Residual sum of squares of the power fit in log space.
    pub power_rss: f64,
    /// RMS of the relative residuals of the power fit.
    pub power_rel_rms: f64,
    /// `‖·‖ ≈ q·log(1/ε) + r`.
    pub q: f64,
    pub log_intercept: f64,
    pub log_rss: f64,
    pub log_rel_rms: f64,
    /// `q` refitted on the leading and trailing two thirds of the sweep.
    pub q_early: f64,
    pub q_late: f64,
}

impl ExponentFit {
    /// Half-width of a ~95% band on `p`.
    pub fn p_band(&self) -> f64 {
        2.0 * self.p_stderr
    }

    pub fn q_is_stable(&self, rel: f64) -> bool {
        self.q.abs() > 0.0 && (self.q_early - self.q_late).abs() <= rel * self.q.abs()
    }
}

/// Fits `values[i]` at `eps[i]` to a power law and to a logarithmic law.
pub fn fit_exponent(eps: &[f64], values: &[f64]) -> Result<ExponentFit> {
    if eps.len() != values.len() {
        return Err(Error::Fit("eps and values differ in length".into()));
    }
    if values.len() < MIN_POINTS {
        return Err(Error::Fit(format!("need at least {MIN_POINTS} sweep points, got {}", values.len())));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Fit(format!("values must be positive and finite, found {v}")));
    }
    if let Some(e) = eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::Fit(format!("eps must be positive, found {e}")));
    }
    let l: Vec<f64> = eps.iter().map(|e| (1.0 / e).ln()).collect();
    let lv: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let pow = linear_fit(&l, &lv)?;
    let lin = linear_fit(&l, values)?;
    let rel_rms = |pred: &dyn Fn(f64) -> f64| {
        let s: f64 = l
            .iter()
            .zip(values)
            .map(|(&x, &v)| {
                let r = (v - pred(x)) / v;
                r * r
            })
            .sum();
        (s / values.len() as f64).sqrt()
    };
    let power_rel_rms = rel_rms(&|x| (pow.intercept + pow.slope * x).exp());
    let log_rel_rms = rel_rms(&|x| lin.intercept + lin.slope * x);
    let n = values.len();
    let k = (2 * n).div_ceil(3);
    let q_early = linear_fit(&l[..k], &values[..k])?.slope;
    let q_late = linear_fit(&l[n - k..], &values[n - k..])?.slope;
    Ok(ExponentFit {
        p: pow.slope,
        p_stderr: pow.slope_stderr,
        power_rss: pow.rss,
        power_rel_rms,
        q: lin.slope,
        log_intercept: lin.intercept,
        log_rss: lin.rss,
        log_rel_rms,
        q_early,
        q_late,
    })
}
