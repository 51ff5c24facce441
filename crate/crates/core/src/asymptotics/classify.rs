//! Finite-sample growth classes.

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use super::fit::{fit_exponent, ExponentFit};
use crate::error::{Error, Result};

/// Thresholds of the classification rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyConfig {
    /// `|p|` below this counts as bounded.
    pub bounded_exponent: f64,
    /// Largest `max/min` ratio across the sweep for a bounded net.
    pub bounded_ratio: f64,
    /// Allowed relative drift of `q` between the early and late windows.
    pub q_stability: f64,
    /// Values all below this are negligible.
    pub negligible_abs: f64,
    /// Decay `ε^m` with `m` at least this is negligible.
    pub negligible_order: f64,
    /// Exponents above this are not treated as moderate.
    pub divergent_exponent: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            bounded_exponent: 0.1,
            bounded_ratio: 2.0,
            q_stability: 0.1,
            negligible_abs: 1e-12,
            negligible_order: 1.0,
            divergent_exponent: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Negligible,
    Bounded,
    LogType,
    Moderate(u32),
    Divergent,
}

impl Classification {
    fn rank(self) -> u64 {
        match self {
            Classification::Negligible => 0,
            Classification::Bounded => 1,
            Classification::LogType => 2,
            Classification::Moderate(n) => 3 + n as u64,
            Classification::Divergent => u64::MAX,
        }
    }

    /// The weaker (faster-growing) of two classes.
    pub fn worst(self, other: Classification) -> Classification {
        if other.rank() > self.rank() {
            other
        } else {
            self
        }
    }

    pub fn is_bounded(self) -> bool {
        matches!(self, Classification::Negligible | Classification::Bounded)
    }

    pub fn is_log_type(self) -> bool {
        self.is_bounded() || self == Classification::LogType
    }

    pub fn is_moderate(self) -> bool {
        self != Classification::Divergent
    }

    pub fn satisfies(self, req: Requirement) -> bool {
        match req {
            Requirement::Bounded => self.is_bounded(),
            Requirement::LogType => self.is_log_type(),
            Requirement::Moderate => self.is_moderate(),
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Negligible => write!(f, "negligible-evidence"),
            Classification::Bounded => write!(f, "O(1)"),
            Classification::LogType => write!(f, "log-type"),
            Classification::Moderate(n) => write!(f, "moderate({n})"),
            Classification::Divergent => write!(f, "divergent-power"),
        }
    }
}

impl Serialize for Classification {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Requirement {
    #[serde(rename = "O(1)")]
    Bounded,
    #[serde(rename = "log-type")]
    LogType,
    #[serde(rename = "moderate")]
    Moderate,
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Requirement::Bounded => "O(1)",
            Requirement::LogType => "log-type",
            Requirement::Moderate => "moderate",
        })
    }
}

/// Applies the rules in order: non-finite, all tiny, decaying, bounded,
/// logarithmic, moderate.
pub fn classify_values(eps: &[f64], values: &[f64], cfg: &ClassifyConfig) -> Result<(Option<ExponentFit>, Classification)> {
    if values.iter().any(|v| !v.is_finite()) {
        return Ok((None, Classification::Divergent));
    }
    if values.iter().all(|v| v.abs() < cfg.negligible_abs) {
        return Ok((None, Classification::Negligible));
    }
    if values.iter().any(|v| *v <= 0.0) {
        return Err(Error::Fit("norm values must be positive unless all are negligible".into()));
    }
    let fit = fit_exponent(eps, values)?;
    let class = if fit.p <= -cfg.negligible_order {
        Classification::Negligible
    } else if fit.p < -cfg.bounded_exponent || (fit.p.abs() <= cfg.bounded_exponent && ratio(values) < cfg.bounded_ratio) {
        Classification::Bounded
    } else if fit.log_rel_rms < fit.power_rel_rms && fit.q > 0.0 && fit.q_is_stable(cfg.q_stability) {
        Classification::LogType
    } else if fit.p > cfg.divergent_exponent {
        Classification::Divergent
    } else {
        Classification::Moderate((fit.p + 0.1).ceil().max(0.0) as u32)
    };
    Ok((Some(fit), class))
}

fn ratio(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// One norm of one net over the sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSeries {
    pub subject: String,
    pub norm_kind: String,
    pub k_id: String,
    pub eps: Vec<f64>,
    /// NaN where the evaluation failed.
    pub values: Vec<f64>,
    pub fit: Option<ExponentFit>,
    /// Half-width of the band on the fitted exponent.
    pub p_band: Option<f64>,
    pub classification: Classification,
    /// ε values at which evaluation or solving failed.
    pub flagged_eps: Vec<f64>,
    pub error: Option<String>,
}

impl SweepSeries {
    /// Classifies `values`; failed entries are `Err` and force a divergent
    /// verdict with the ε flagged.
    pub fn build(
        subject: impl Into<String>,
        norm_kind: impl Into<String>,
        k_id: impl Into<String>,
        eps: &[f64],
        values: Vec<Result<f64>>,
        cfg: &ClassifyConfig,
    ) -> SweepSeries {
        let mut flagged = Vec::new();
        let mut error = None;
        let vals: Vec<f64> = values
            .into_iter()
            .zip(eps)
            .map(|(v, &e)| match v {
                Ok(v) => v,
                Err(err) => {
                    flagged.push(e);
                    error.get_or_insert_with(|| err.to_string());
                    f64::NAN
                }
            })
            .collect();
        let (fit, classification) = if flagged.is_empty() {
            match classify_values(eps, &vals, cfg) {
                Ok(r) => r,
                Err(e) => {
                    error = Some(e.to_string());
                    (None, Classification::Divergent)
                }
            }
        } else {
            (None, Classification::Divergent)
        };
        SweepSeries {
            subject: subject.into(),
            norm_kind: norm_kind.into(),
            k_id: k_id.into(),
            eps: eps.to_vec(),
            values: vals,
            p_band: fit.as_ref().map(ExponentFit::p_band),
            fit,
            classification,
            flagged_eps: flagged,
            error,
        }
    }

    pub fn exponent(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.p)
    }
}
