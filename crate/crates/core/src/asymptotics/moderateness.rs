//! Growth of solution nets over ε, with a grid-refinement control and a
//! planted-perturbation stability check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classify::{Classification, SweepSeries};
use super::fit::fit_exponent;
use super::sweep::SweepConfig;
use crate::error::{Error, Result};
use crate::genfunc::{compute_norm, CoefficientNet, Expr, NormKind, NormRequest, SampledField};
use crate::solver::{solve_system, GridSolution, GridSpec};
use crate::transform::{wave_to_system, HyperbolicSystem, WaveProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeratenessConfig {
    /// The box `K`, as a fraction of the domain.
    pub compact_fraction: f64,
    /// Derivative orders whose norms are reported.
    pub orders: Vec<usize>,
    /// Largest allowed change of the fitted exponent between `h` and `h/2`.
    pub max_shift: f64,
    /// Power `m` of the planted `ε^m` perturbation.
    pub perturbation_power: f64,
    /// Smallest accepted decay order of the perturbation discrepancy.
    pub min_decay_order: f64,
}

impl Default for ModeratenessConfig {
    fn default() -> Self {
        ModeratenessConfig {
            compact_fraction: 0.75,
            orders: vec![0, 1],
            max_shift: 0.1,
            perturbation_power: 3.0,
            min_decay_order: 2.5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationReport {
    pub power: f64,
    /// `sup_K |w_pert − w|` per ε.
    pub discrepancy: SweepSeries,
    /// Fitted decay exponent of the discrepancy.
    pub decay_order: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeratenessReport {
    pub h: f64,
    /// Norms of `w_ε` on `K` at step `h`, one series per derivative order.
    pub solution: Vec<SweepSeries>,
    /// The order-0 norm at `h/2`.
    pub refined: SweepSeries,
    pub exponent_shift: Option<f64>,
    pub refinement_ok: bool,
    pub perturbation: PerturbationReport,
    /// The solution net is moderate, refinement-stable and
    /// perturbation-stable.
    pub pass: bool,
}

impl ModeratenessReport {
    pub fn sup_series(&self) -> &SweepSeries {
        &self.solution[0]
    }

    pub fn all_series(&self) -> Vec<SweepSeries> {
        let mut out = self.solution.clone();
        out.push(self.refined.clone());
        out.push(self.perturbation.discrepancy.clone());
        out
    }
}

/// `ε^m · exp(−|x|²)`.
fn planted_perturbation(dim: usize, power: f64) -> Result<CoefficientNet> {
    let vars = ["x", "y", "z"];
    let src = format!(
        "exp(-({}))",
        vars[..dim].iter().map(|v| format!("{v}^2")).collect::<Vec<_>>().join(" + ")
    );
    let bump = CoefficientNet::closed_form("phi", Expr::parse(&src)?, dim)?;
    CoefficientNet::planted_power(dim, power).mul(&bump)
}

/// `p` with `u0`, `u1` and `f` shifted by the planted perturbation.
pub fn perturbed(p: &WaveProblem, power: f64) -> Result<WaveProblem> {
    let phi = planted_perturbation(p.dim(), power)?;
    Ok(WaveProblem {
        u0: p.u0.add(&phi)?,
        u1: p.u1.add(&phi)?,
        f: p.f.add(&phi)?,
        ..p.clone()
    })
}

fn norm_of(sol: &GridSolution, req: &NormRequest) -> Result<f64> {
    compute_norm(&sol.to_field()?, req)
}

fn difference(a: &GridSolution, b: &GridSolution) -> Result<SampledField> {
    let fa = a.to_field()?;
    let fb = b.to_field()?;
    if fa.grid != fb.grid {
        return Err(Error::Shape("perturbed and unperturbed solutions on different grids".into()));
    }
    let values = fa.values.iter().zip(&fb.values).map(|(x, y)| x - y).collect();
    SampledField::new(fa.grid, fa.ncomp, values)
}

struct Solves {
    base: Result<GridSolution>,
    fine: Result<GridSolution>,
    pert: Result<GridSolution>,
}

/// Sweeps the system solver over ε and classifies `‖w_ε‖` on `K`.
pub fn solution_moderateness(p: &WaveProblem, grid: &GridSpec, cfg: &SweepConfig, mcfg: &ModeratenessConfig) -> Result<ModeratenessReport> {
    cfg.validate()?;
    let sys = wave_to_system(p)?;
    let sys_pert = wave_to_system(&perturbed(p, mcfg.perturbation_power)?)?;
    let fine_spec = grid.with_h(0.5 * grid.h);
    let solve = |s: &HyperbolicSystem, eps: f64, spec: &GridSpec| solve_system(s, eps, spec);
    let solves: Vec<Solves> = cfg
        .eps
        .par_iter()
        .map(|&eps| Solves {
            base: solve(&sys, eps, grid),
            fine: solve(&sys, eps, &fine_spec),
            pert: solve(&sys_pert, eps, grid),
        })
        .collect();

    let k = p.domain.compact(mcfg.compact_fraction);
    let req = |order: usize| NormRequest {
        kind: NormKind::WInf,
        order,
        compact: Some(k.clone()),
    };
    let series = |label: &str, f: &dyn Fn(&Solves) -> Result<f64>| {
        let values = solves.iter().zip(&cfg.eps).map(|(s, &e)| f(s).map_err(|err| err.at_eps(e))).collect();
        SweepSeries::build("w", label, "K", &cfg.eps, values, &cfg.classify)
    };
    let take = |r: &Result<GridSolution>| -> Result<GridSolution> {
        r.as_ref().cloned().map_err(|e| Error::Spec(e.root().to_string()))
    };

    let solution: Vec<SweepSeries> = mcfg
        .orders
        .iter()
        .map(|&o| series(&format!("W{o}inf"), &|s| norm_of(&take(&s.base)?, &req(o))))
        .collect();
    if solution.is_empty() {
        return Err(Error::Config("moderateness needs at least one derivative order".into()));
    }
    let refined = series("W0inf@h/2", &|s| norm_of(&take(&s.fine)?, &req(0)));
    let discrepancy = series("perturbation", &|s| compute_norm(&difference(&take(&s.pert)?, &take(&s.base)?)?, &req(0)));

    let exponent_shift = match (solution[0].exponent(), refined.exponent()) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        _ => None,
    };
    let refinement_ok = exponent_shift.is_some_and(|d| d < mcfg.max_shift)
        || (solution[0].classification == Classification::Negligible && refined.classification == Classification::Negligible);
    let decay_order = if discrepancy.flagged_eps.is_empty() && discrepancy.values.iter().all(|v| *v > 0.0) {
        fit_exponent(&cfg.eps, &discrepancy.values).ok().map(|f| -f.p)
    } else {
        None
    };
    let pert_ok = decay_order.is_some_and(|d| d >= mcfg.min_decay_order);
    let pass = solution[0].classification.is_moderate() && refinement_ok && pert_ok;
    Ok(ModeratenessReport {
        h: grid.h,
        solution,
        refined,
        exponent_shift,
        refinement_ok,
        perturbation: PerturbationReport {
            power: mcfg.perturbation_power,
            discrepancy,
            decay_order,
            pass: pert_ok,
        },
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::solver::Boundary;
    use crate::transform::{constant_problem, Domain};

    #[test]
    fn smooth_problem_is_bounded_and_stable() {
        let mut p = constant_problem(Domain::new(vec![-1.0], vec![1.0], 0.5).unwrap(), 0.5, Matrix::diag(&[1.0])).unwrap();
        p.u0 = CoefficientNet::closed_form("u0", Expr::parse("exp(-4*x^2)").unwrap(), 1).unwrap();
        let spec = GridSpec {
            h: 0.05,
            boundary: Boundary::ConstantExtension,
            snapshots: 4,
            ..Default::default()
        };
        let rep = solution_moderateness(&p, &spec, &SweepConfig::default(), &ModeratenessConfig::default()).unwrap();
        assert_eq!(rep.sup_series().classification, Classification::Bounded);
        assert!(rep.refinement_ok);
        let d = rep.perturbation.decay_order.unwrap();
        assert!(d >= 2.5 && (d - 3.0).abs() < 0.1, "{d}");
        assert!(rep.pass);
    }
}
