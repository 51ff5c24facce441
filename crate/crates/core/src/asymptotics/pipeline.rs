//! Metrics with bounded, boundedly invertible discontinuous coefficients:
//! sampling check of the raw metric, mollification and the case A check.

use serde::Serialize;

use super::conditions::{verify_wave_conditions, Case, ConditionReport};
use super::sweep::SweepConfig;
use crate::error::{Error, Result};
use crate::genfunc::expr::pack;
use crate::genfunc::norms::linspace;
use crate::genfunc::{CoefficientNet, Expr, Rescaling};
use crate::linalg::{self, SignatureVerdict, SymMatrix};
use crate::transform::{coefficient_net, Domain, WaveProblem};

/// Largest accepted condition number of the raw spatial block.
pub const MAX_RAW_CONDITION: f64 = 1e12;

/// Raw metric `[[−1, gᵀ], [g, R]]` in the expression language.
#[derive(Debug, Clone)]
pub struct RawMetric {
    pub domain: Domain,
    pub horizon: f64,
    pub g: Vec<Expr>,
    /// Row-major, symmetric.
    pub r: Vec<Vec<Expr>>,
    pub u0: Expr,
    pub u1: Expr,
}

#[derive(Debug, Clone, Serialize)]
pub struct RawMetricCheck {
    pub samples: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

fn not_gt(msg: impl Into<String>) -> Error {
    Error::NotGerochTraschen(msg.into())
}

fn near_breakpoint(x: &[f64], cuts: &[Vec<f64>]) -> bool {
    x.iter().zip(cuts).any(|(v, c)| c.iter().any(|b| (v - b).abs() < 1e-9 * (1.0 + b.abs())))
}

/// Samples the raw spatial block away from its discontinuities: entries
/// finite, `R` symmetric positive definite with bounded condition, and the
/// assembled metric Lorentzian.
pub fn check_raw_metric(raw: &RawMetric) -> Result<RawMetricCheck> {
    let n = raw.domain.dim();
    if raw.g.len() != n || raw.r.len() != n || raw.r.iter().any(|row| row.len() != n) {
        return Err(Error::Shape(format!("raw metric needs g of length {n} and an {n}x{n} block")));
    }
    for i in 0..n {
        for j in 0..i {
            if raw.r[i][j] != raw.r[j][i] {
                return Err(not_gt(format!("spatial block is not symmetric at ({}, {})", i + 1, j + 1)));
            }
        }
    }
    let mut cuts = vec![Vec::new(); n];
    for e in raw.g.iter().chain(raw.r.iter().flatten()) {
        let mut pts = Vec::new();
        e.breakpoints(&mut pts).map_err(not_gt)?;
        for (var, v) in pts {
            if (1..=n).contains(&var) {
                cuts[var - 1].push(v);
            }
        }
    }
    let per_axis = match n {
        1 => 41,
        2 => 13,
        _ => 7,
    };
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|k| linspace(raw.domain.lower[k], raw.domain.upper[k], per_axis))
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let (mut lo, mut hi, mut count) = (f64::INFINITY, 0.0f64, 0);
    for t in [0.0, 0.5 * raw.horizon, raw.horizon] {
        for idx in 0..total {
            let mut rem = idx;
            let mut x = vec![0.0; n];
            for k in (0..n).rev() {
                x[k] = axes[k][rem % per_axis];
                rem /= per_axis;
            }
            if near_breakpoint(&x, &cuts) {
                continue;
            }
            let p = pack(t, &x);
            let g: Vec<f64> = raw.g.iter().map(|e| e.eval(&p)).collect();
            let r = SymMatrix::from_fn(n, |i, j| raw.r[i][j].eval(&p));
            if g.iter().any(|v| !v.is_finite()) || !r.as_matrix().is_finite() {
                return Err(not_gt(format!("non-finite metric entry at t={t}, x={x:?}")));
            }
            let eig = linalg::sym_eig(&r)?;
            let (min, max) = (eig.values[0], eig.values[n - 1]);
            if !(min > 0.0) || max / min > MAX_RAW_CONDITION {
                return Err(not_gt(format!(
                    "spatial block not boundedly invertible at t={t}, x={x:?} (eigenvalues {min:e}..{max:e})"
                )));
            }
            let sig = linalg::lorentzian_check(&linalg::assemble_metric(&g, &r)?)?;
            if sig.verdict != SignatureVerdict::Lorentzian {
                return Err(not_gt(format!("metric is {:?} at t={t}, x={x:?}", sig.verdict)));
            }
            lo = lo.min(min);
            hi = hi.max(max);
            count += 1;
        }
    }
    if count == 0 {
        return Err(not_gt("no sample point away from the discontinuities"));
    }
    Ok(RawMetricCheck {
        samples: count,
        min_eigenvalue: lo,
        max_eigenvalue: hi,
    })
}

/// Mollified wave problem with vanishing lower-order terms.
pub fn metric_problem(raw: &RawMetric, rescaling: Rescaling) -> Result<WaveProblem> {
    let n = raw.domain.dim();
    let (d, t) = (&raw.domain, raw.horizon);
    let net = |name: String, e: &Expr| coefficient_net(&name, e, d, t, rescaling);
    let r_entries = (0..n * n)
        .map(|k| net(format!("R{}{}", k / n + 1, k % n + 1), &raw.r[k / n][k % n]))
        .collect::<Result<Vec<_>>>()?;
    let g_entries = (0..n).map(|i| net(format!("g{}", i + 1), &raw.g[i])).collect::<Result<Vec<_>>>()?;
    let (r, g) = if n == 1 {
        (r_entries.into_iter().next().expect("one entry"), g_entries.into_iter().next().expect("one entry"))
    } else {
        (
            CoefficientNet::from_entries("R", n, n, r_entries)?,
            CoefficientNet::from_entries("g", n, 1, g_entries)?,
        )
    };
    let zero = CoefficientNet::scalar_constant("0", n, 0.0);
    let zero_vec = if n == 1 {
        zero.clone()
    } else {
        CoefficientNet::constant("0", n, crate::linalg::Matrix::zeros(n, 1))
    };
    Ok(WaveProblem {
        domain: raw.domain.clone(),
        horizon: raw.horizon,
        r: r.with_name("R").assume_spd()?,
        g: g.with_name("g"),
        a: zero.clone().with_name("a"),
        b: zero_vec.with_name("b"),
        c: zero.clone().with_name("c"),
        f: zero.with_name("f"),
        u0: net("u0".into(), &raw.u0)?,
        u1: net("u1".into(), &raw.u1)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub rescaling: Rescaling,
    pub raw: RawMetricCheck,
    pub conditions: ConditionReport,
}

/// Checks the raw metric, mollifies it and verifies case A.
pub fn geroch_traschen_pipeline(raw: &RawMetric, rescaling: Rescaling, cfg: &SweepConfig) -> Result<(WaveProblem, PipelineReport)> {
    let check = check_raw_metric(raw)?;
    let p = metric_problem(raw, rescaling)?;
    let conditions = verify_wave_conditions(&p, Case::A, cfg)?;
    Ok((
        p,
        PipelineReport {
            rescaling,
            raw: check,
            conditions,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metric(r: &str, g: &str) -> RawMetric {
        RawMetric {
            domain: Domain::new(vec![-2.0], vec![2.0], 2.0).unwrap(),
            horizon: 1.0,
            g: vec![Expr::parse(g).unwrap()],
            r: vec![vec![Expr::parse(r).unwrap()]],
            u0: Expr::parse("0").unwrap(),
            u1: Expr::parse("0").unwrap(),
        }
    }

    #[test]
    fn step_metric_log_passes() {
        let (_, rep) = geroch_traschen_pipeline(&metric("1 + H(x)", "0"), Rescaling::Log, &SweepConfig::default()).unwrap();
        assert!(rep.conditions.aggregate);
        assert_eq!(rep.raw.min_eigenvalue, 1.0);
        assert_eq!(rep.raw.max_eigenvalue, 2.0);
    }

    #[test]
    fn step_metric_model_fails_ds() {
        let (_, rep) = geroch_traschen_pipeline(&metric("1 + H(x)", "0"), Rescaling::Model, &SweepConfig::default()).unwrap();
        assert!(!rep.conditions.aggregate);
        assert!(!rep.conditions.net_passes("A(i)", "dS"));
    }

    #[test]
    fn constant_metric_passes_with_constant_root() {
        let (p, rep) = geroch_traschen_pipeline(&metric("4", "0"), Rescaling::Model, &SweepConfig::default()).unwrap();
        assert!(rep.conditions.aggregate);
        let s = p.s().unwrap();
        assert_eq!(s.eval_scalar(0.01, 0.0, &[0.3]).unwrap(), 2.0);
    }

    #[test]
    fn rejects_degenerate_metrics() {
        assert!(matches!(check_raw_metric(&metric("x", "0")), Err(Error::NotGerochTraschen(_))));
        assert!(matches!(check_raw_metric(&metric("H(x)", "0")), Err(Error::NotGerochTraschen(_))));
    }
}
