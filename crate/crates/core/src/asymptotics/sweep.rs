//! ε sweeps of coefficient nets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classify::{Classification, ClassifyConfig, SweepSeries};
use crate::error::{Error, Result};
use crate::genfunc::norms::{linspace, trapezoid};
use crate::genfunc::{compute_norm, default_sweep, CoefficientNet, Compact, NormKind, NormRequest, SampleGrid};
use crate::transform::Domain;

/// Refined samples per side of each breakpoint.
const REFINE_STEPS: i32 = 12;
/// Refined sample spacing in units of the mollifier support radius.
const REFINE_FRACTION: f64 = 1.0 / 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Strictly decreasing, at least six values in `(0, 1]`.
    pub eps: Vec<f64>,
    /// Norms for [`classify_net`]; a request without a compact runs on
    /// every box of the compact family.
    pub norms: Vec<NormRequest>,
    /// Nested boxes as fractions of the domain, about its center.
    pub compact_fractions: Vec<f64>,
    /// Distance beyond the domain faces where exterior boundedness is
    /// checked; half the padding when absent.
    pub exterior_margin: Option<f64>,
    /// Uniform samples per axis; a dimension-dependent default when absent.
    pub points_per_axis: Option<usize>,
    /// Time levels for time-dependent nets and mixed norms.
    pub time_levels: usize,
    pub classify: ClassifyConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            eps: default_sweep(),
            norms: vec![NormRequest::sup(None)],
            compact_fractions: vec![0.25, 0.5, 0.75],
            exterior_margin: None,
            points_per_axis: None,
            time_levels: 5,
            classify: ClassifyConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps.len() < super::fit::MIN_POINTS {
            return Err(Error::Config(format!(
                "sweep needs at least {} eps values, got {}",
                super::fit::MIN_POINTS,
                self.eps.len()
            )));
        }
        if self.eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(Error::Config("sweep eps values must lie in (0, 1]".into()));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("sweep eps values must be strictly decreasing".into()));
        }
        if self.compact_fractions.is_empty() || self.compact_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(Error::Config("compact fractions must lie in (0, 1]".into()));
        }
        if self.time_levels < 2 {
            return Err(Error::Config("time_levels must be at least 2".into()));
        }
        Ok(())
    }

    pub fn points(&self, dim: usize) -> usize {
        self.points_per_axis.unwrap_or(match dim {
            1 => 129,
            2 => 33,
            _ => 13,
        })
    }

    /// The compact family with ids `K1, K2, ...`.
    pub fn compacts(&self, domain: &Domain) -> Vec<(String, Compact)> {
        self.compact_fractions
            .iter()
            .enumerate()
            .map(|(i, &f)| (format!("K{}", i + 1), domain.compact(f)))
            .collect()
    }
}

/// All norms of one net.
#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub subject: String,
    pub series: Vec<SweepSeries>,
    /// Weakest class over all series.
    pub classification: Classification,
}

impl SweepReport {
    pub fn new(subject: impl Into<String>, series: Vec<SweepSeries>) -> Self {
        let classification = series
            .iter()
            .map(|s| s.classification)
            .fold(Classification::Negligible, Classification::worst);
        SweepReport {
            subject: subject.into(),
            series,
            classification,
        }
    }
}

/// Spatial axes over `k`: uniform points plus, for order-0 norms, points
/// clustered around the net's breakpoints at the scale of the mollifier.
pub fn sample_axes(net: &CoefficientNet, eps: f64, k: &Compact, points: usize, refine: bool) -> Vec<Vec<f64>> {
    (0..k.lower.len())
        .map(|j| {
            let mut axis = linspace(k.lower[j], k.upper[j], points);
            let scale = net.feature_scale(eps);
            if refine && scale.is_finite() {
                let step = scale * REFINE_FRACTION;
                for &b in net.breakpoints(j) {
                    for i in -REFINE_STEPS..=REFINE_STEPS {
                        let x = b + i as f64 * step;
                        if x >= k.lower[j] && x <= k.upper[j] {
                            axis.push(x);
                        }
                    }
                }
                axis.sort_by(f64::total_cmp);
                axis.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
            }
            axis
        })
        .collect()
}

fn time_axis(net: &CoefficientNet, horizon: f64, levels: usize, mixed: bool) -> Vec<f64> {
    if net.is_time_dependent() || mixed {
        linspace(0.0, horizon, levels)
    } else {
        vec![0.0]
    }
}

/// One norm of `net` at one ε over the box `k`.
pub fn net_norm(net: &CoefficientNet, eps: f64, horizon: f64, k: &Compact, req: &NormRequest, cfg: &SweepConfig) -> Result<f64> {
    let dim = k.lower.len();
    let refine = req.order == 0 && req.kind != NormKind::Sobolev;
    let axes = sample_axes(net, eps, k, cfg.points(dim), refine);
    let mixed = req.kind == NormKind::MixedL1Linf;
    let times = time_axis(net, horizon, cfg.time_levels, mixed);
    let grid = SampleGrid { times, axes };
    if mixed && !net.is_time_dependent() {
        let sup = compute_norm(
            &*net.sample(eps, &SampleGrid::spatial(0.0, grid.axes.clone()))?,
            &NormRequest::sup(None),
        )?;
        return Ok(trapezoid(&grid.times, &vec![sup; grid.times.len()]));
    }
    let field = net.sample(eps, &grid)?;
    compute_norm(
        &field,
        &NormRequest {
            compact: None,
            ..req.clone()
        },
    )
}

/// Sweeps one norm of `net` over ε, in parallel, and classifies it.
pub fn sweep_norm(net: &CoefficientNet, horizon: f64, k_id: &str, k: &Compact, req: &NormRequest, cfg: &SweepConfig) -> SweepSeries {
    let values: Vec<Result<f64>> = cfg
        .eps
        .par_iter()
        .map(|&eps| net_norm(net, eps, horizon, k, req, cfg).map_err(|e| e.at_eps(eps)))
        .collect();
    SweepSeries::build(net.name(), req.kind.label(req.order), k_id, &cfg.eps, values, &cfg.classify)
}

/// Computes every requested norm of `net` per ε and classifies each.
pub fn classify_net(net: &CoefficientNet, domain: &Domain, horizon: f64, cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    if net.dim() != domain.dim() {
        return Err(Error::Shape(format!("net in dimension {} on a {}-dimensional domain", net.dim(), domain.dim())));
    }
    let mut series = Vec::new();
    for req in &cfg.norms {
        let boxes = match &req.compact {
            Some(k) => vec![("K".to_string(), k.clone())],
            None => cfg.compacts(domain),
        };
        for (id, k) in boxes {
            series.push(sweep_norm(net, horizon, &id, &k, req, cfg));
        }
    }
    Ok(SweepReport::new(net.name(), series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfunc::{Expr, PiecewiseExpr, Rescaling, SpaceTimeBox};
    use std::sync::Arc;

    fn domain() -> Domain {
        Domain::new(vec![-1.0], vec![1.0], 1.0).unwrap()
    }

    fn heaviside(r: Rescaling) -> CoefficientNet {
        let d = domain();
        let raw = PiecewiseExpr::from_expr(&Expr::parse("H(x)").unwrap(), 1, SpaceTimeBox::new(1.0, &d.lower, &d.upper)).unwrap();
        CoefficientNet::mollified("H", Arc::new(raw), r, d.padded_lower(), d.padded_upper()).unwrap()
    }

    #[test]
    fn constant_net_is_bounded() {
        let net = CoefficientNet::scalar_constant("c", 1, 2.5);
        let rep = classify_net(&net, &domain(), 1.0, &SweepConfig::default()).unwrap();
        assert_eq!(rep.series.len(), 3);
        assert_eq!(rep.classification, Classification::Bounded);
        assert!(rep.series[0].exponent().unwrap().abs() < 0.02);
    }

    #[test]
    fn heaviside_derivative_scaling() {
        let cfg = SweepConfig::default();
        let model = heaviside(Rescaling::Model).partial(1).unwrap();
        let rep = classify_net(&model, &domain(), 1.0, &cfg).unwrap();
        let p = rep.series[0].exponent().unwrap();
        assert!((p - 1.0).abs() < 0.05, "{p}");
        let log = heaviside(Rescaling::Log).partial(1).unwrap();
        let rep = classify_net(&log, &domain(), 1.0, &cfg).unwrap();
        assert_eq!(rep.classification, Classification::LogType, "{:?}", rep.series[0].fit);
    }

    #[test]
    fn difference_of_equal_nets_is_negligible() {
        let h = heaviside(Rescaling::Model);
        let rep = classify_net(&h.sub(&h).unwrap(), &domain(), 1.0, &SweepConfig::default()).unwrap();
        assert_eq!(rep.classification, Classification::Negligible);
    }

    #[test]
    fn planted_cubic_decay_is_negligible() {
        let rep = classify_net(&CoefficientNet::planted_power(1, 3.0), &domain(), 1.0, &SweepConfig::default()).unwrap();
        assert_eq!(rep.classification, Classification::Negligible);
    }

    #[test]
    fn mixed_norm_of_time_independent_net() {
        let cfg = SweepConfig {
            norms: vec![NormRequest::mixed(None)],
            ..Default::default()
        };
        let rep = classify_net(&CoefficientNet::scalar_constant("c", 1, 3.0), &domain(), 2.0, &cfg).unwrap();
        assert!((rep.series[0].values[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_sweeps() {
        let mut cfg = SweepConfig::default();
        cfg.eps.truncate(5);
        assert!(cfg.validate().is_err());
        let mut cfg = SweepConfig::default();
        cfg.eps.swap(0, 1);
        assert!(cfg.validate().is_err());
    }
}
