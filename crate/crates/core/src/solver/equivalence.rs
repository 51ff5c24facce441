//! Cross-check of the system solver against the wave solver.

use serde::Serialize;

use super::grid::{GridSpec, Topology};
use super::{eval_points, masked_l2, node_points, solve_system, solve_wave, GridSolution};
use crate::asymptotics::fit::loglog_slope;
use crate::error::{Error, Result};
use crate::transform::{wave_to_system, WaveProblem};

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub eps: f64,
    pub h: Vec<f64>,
    /// `‖u_sys − u_wave‖_{L²}` at the final time.
    pub discrepancy: Vec<f64>,
    /// `(‖z − ∂ₜu‖² + ‖v − S∇u‖²)^{1/2}` from the system solution.
    pub relation_residual: Vec<f64>,
    /// L² error of the wave solver against a known solution.
    pub exact_error: Option<Vec<f64>>,
    pub discrepancy_order: f64,
    pub relation_order: f64,
    pub exact_order: Option<f64>,
}

pub type ExactSolution<'a> = &'a (dyn Fn(f64, &[f64]) -> f64 + Sync);

/// Solves `p` both ways at each `h` and reports the observed orders.
pub fn equivalence_check(p: &WaveProblem, eps: f64, spec: &GridSpec, h: &[f64], exact: Option<ExactSolution>) -> Result<EquivalenceReport> {
    if h.len() < 2 {
        return Err(Error::Config("equivalence check needs at least two grid steps".into()));
    }
    let sys = wave_to_system(p)?;
    let s = p.s()?;
    let mut discrepancy = Vec::new();
    let mut relation = Vec::new();
    let mut exact_err = Vec::new();
    for &hk in h {
        let spec_k = spec.with_h(hk);
        let ws = solve_system(&sys, eps, &spec_k)?;
        let wv = solve_wave(p, eps, &spec_k)?;
        let mask = ws.interior();
        let vol = ws.grid.cell_volume();
        let us = ws.component(0);
        let uw = wv.component(0);
        let d: Vec<f64> = us.iter().zip(&uw).map(|(a, b)| a - b).collect();
        discrepancy.push(masked_l2(&d, &mask, vol));
        relation.push(relation_residual(&ws, &s, &mask)?);
        if let Some(u) = exact {
            let t = wv.final_time();
            let e: Vec<f64> = uw.iter().enumerate().map(|(i, v)| v - u(t, &wv.node_coords(i))).collect();
            exact_err.push(masked_l2(&e, &mask, vol));
        }
    }
    Ok(EquivalenceReport {
        eps,
        h: h.to_vec(),
        discrepancy_order: loglog_slope(h, &discrepancy),
        relation_order: loglog_slope(h, &relation),
        exact_order: exact.map(|_| loglog_slope(h, &exact_err)),
        exact_error: exact.map(|_| exact_err),
        discrepancy,
        relation_residual: relation,
    })
}

fn relation_residual(ws: &GridSolution, s: &crate::genfunc::CoefficientNet, mask: &[bool]) -> Result<f64> {
    let grid = &ws.grid;
    let n = grid.dim();
    let m = ws.ncomp;
    let topo = Topology::new(grid);
    let nodes = node_points(grid);
    let s_vals = eval_points(s, ws.eps, ws.final_time(), &nodes)?;
    let w = &ws.final_snapshot().values;
    let u = ws.component(0);
    let u_t = ws.rate_component(0);
    let vol = grid.cell_volume();
    let mut acc = 0.0;
    for i in 0..nodes.len() {
        if !mask[i] {
            continue;
        }
        let dz = w[i * m + 1] - u_t[i];
        acc += dz * dz;
        let grad: Vec<f64> = (0..n)
            .map(|j| (u[topo.neighbor(i, j, 1)] - u[topo.neighbor(i, j, -1)]) / (2.0 * grid.h[j]))
            .collect();
        for r in 0..n {
            let sg: f64 = (0..n).map(|c| s_vals[i * n * n + r * n + c] * grad[c]).sum();
            let dv = w[i * m + 2 + r] - sg;
            acc += dv * dv;
        }
    }
    Ok((acc * vol).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfunc::{CoefficientNet, Expr};
    use crate::linalg::Matrix;
    use crate::transform::{constant_problem, Domain};

    #[test]
    fn dalembert_orders() {
        let mut p = constant_problem(Domain::new(vec![0.0], vec![1.0], 0.0).unwrap(), 1.0, Matrix::diag(&[1.0])).unwrap();
        p.u0 = CoefficientNet::closed_form("u0", Expr::parse("sin(2*pi*x)").unwrap(), 1).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        let exact = move |t: f64, x: &[f64]| (two_pi * x[0]).sin() * (two_pi * t).cos();
        let rep = equivalence_check(&p, 0.1, &GridSpec::periodic(0.02), &[0.02, 0.01, 0.005], Some(&exact)).unwrap();
        assert!(rep.discrepancy_order >= 1.9, "{rep:?}");
        assert!(rep.relation_order >= 1.9, "{rep:?}");
        assert!(rep.exact_error.as_ref().unwrap()[2] <= 5e-3);
    }
}
