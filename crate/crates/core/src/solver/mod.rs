//! Finite-difference solvers for the first-order system and the wave
//! equation, and the cross-check between them.

pub mod equivalence;
pub mod grid;
pub mod system;
pub mod wave;

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

pub use equivalence::{equivalence_check, EquivalenceReport};
pub use grid::{Boundary, Grid, GridSpec};
pub use system::solve_system;
pub use wave::solve_wave;

use crate::error::{Error, Result};
use crate::genfunc::{CoefficientNet, SampleGrid, SampledField};

/// Growth of `max |w|` over its initial scale that counts as blow-up.
pub const BLOWUP_FACTOR: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    System,
    Wave,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    /// Node-major, `ncomp` values per node.
    pub values: Vec<f64>,
}

/// Discrete solution on a grid, for one ε.
#[derive(Debug, Clone, Serialize)]
pub struct GridSolution {
    pub kind: SolverKind,
    pub eps: f64,
    pub grid: Grid,
    pub ncomp: usize,
    pub labels: Vec<String>,
    pub snapshots: Vec<Snapshot>,
    /// Time derivative of the state at the final time.
    #[serde(skip)]
    pub rate: Vec<f64>,
    /// Max over interior nodes of the centered discrete residual at the
    /// last interior time level.
    pub residual: Option<f64>,
    pub max_abs: f64,
}

impl GridSolution {
    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("solution has snapshots")
    }

    pub fn final_time(&self) -> f64 {
        self.final_snapshot().t
    }

    /// Component `comp` of the final state at every node.
    pub fn component(&self, comp: usize) -> Vec<f64> {
        self.final_snapshot().values.iter().skip(comp).step_by(self.ncomp).copied().collect()
    }

    pub fn rate_component(&self, comp: usize) -> Vec<f64> {
        self.rate.iter().skip(comp).step_by(self.ncomp).copied().collect()
    }

    pub fn node_coords(&self, idx: usize) -> Vec<f64> {
        self.grid.node_coords(idx)
    }

    /// Snapshots as a sampled field over the solve box.
    pub fn to_field(&self) -> Result<SampledField> {
        let grid = SampleGrid {
            times: self.snapshots.iter().map(|s| s.t).collect(),
            axes: (0..self.grid.dim()).map(|k| self.grid.axis(k)).collect(),
        };
        let values = self.snapshots.iter().flat_map(|s| s.values.iter().copied()).collect();
        SampledField::new(grid, self.ncomp, values)
    }

    /// Interior-node mask: away from clamped boundaries by the physical
    /// domain of dependence.
    pub fn interior(&self) -> Vec<bool> {
        let topo = grid::Topology::new(&self.grid);
        let margin = self.grid.boundary_margin();
        (0..topo.num_nodes()).map(|i| topo.is_interior(i, &margin)).collect()
    }
}

/// Discrete L² norm over the masked nodes.
pub fn masked_l2(values: &[f64], mask: &[bool], cell_volume: f64) -> f64 {
    let s: f64 = values.iter().zip(mask).filter(|(_, m)| **m).map(|(v, _)| v * v).sum();
    (s * cell_volume).sqrt()
}

/// Evaluates `net` at `pts`, flattened point-major.
pub(crate) fn eval_points(net: &CoefficientNet, eps: f64, t: f64, pts: &[Vec<f64>]) -> Result<Vec<f64>> {
    let chunks: Vec<Vec<f64>> = pts
        .par_iter()
        .map(|x| net.eval_vec(eps, t, x))
        .collect::<Result<_>>()
        .map_err(|e| e.at_eps(eps))?;
    Ok(chunks.concat())
}

/// A coefficient at a fixed point set; sampled once when it does not
/// depend on time.
pub(crate) struct PointCoeff {
    net: CoefficientNet,
    fixed: Option<Arc<Vec<f64>>>,
}

impl PointCoeff {
    pub fn new(net: &CoefficientNet, eps: f64, pts: &[Vec<f64>]) -> Result<Self> {
        let fixed = if net.is_time_dependent() {
            None
        } else {
            Some(Arc::new(eval_points(net, eps, 0.0, pts)?))
        };
        Ok(PointCoeff { net: net.clone(), fixed })
    }

    pub fn at(&self, eps: f64, t: f64, pts: &[Vec<f64>]) -> Result<Arc<Vec<f64>>> {
        match &self.fixed {
            Some(v) => Ok(v.clone()),
            None => Ok(Arc::new(eval_points(&self.net, eps, t, pts)?)),
        }
    }

    /// Whether the coefficient vanishes identically on the point set.
    pub fn is_zero(&self) -> bool {
        self.fixed.as_ref().is_some_and(|v| v.iter().all(|x| *x == 0.0))
    }
}

pub(crate) fn check_blow_up(state: &[f64], scale: f64, step: usize, t: f64) -> Result<f64> {
    let max_abs = state.iter().fold(0.0f64, |m, v| if v.is_finite() { m.max(v.abs()) } else { f64::INFINITY });
    if !max_abs.is_finite() || max_abs > BLOWUP_FACTOR * scale {
        return Err(Error::BlowUp { step, t, max_abs });
    }
    Ok(max_abs)
}

pub(crate) fn snapshot_stride(steps: usize, snapshots: usize) -> usize {
    if snapshots == 0 {
        steps.max(1)
    } else {
        steps.div_ceil(snapshots).max(1)
    }
}

pub(crate) fn node_points(grid: &Grid) -> Vec<Vec<f64>> {
    (0..grid.num_nodes()).map(|i| grid.node_coords(i)).collect()
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
