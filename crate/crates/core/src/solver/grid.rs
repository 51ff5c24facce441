//! Uniform space-time grids, boundary topology and the CFL bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, SymMatrix};
use crate::transform::Domain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    /// Ghost values copy the nearest boundary node.
    ConstantExtension,
}

impl std::str::FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "constant-extension" | "constant" => Ok(Boundary::ConstantExtension),
            other => Err(Error::Config(format!("unknown boundary '{other}'"))),
        }
    }
}

pub const DEFAULT_CFL: f64 = 0.45;
pub const LAMBDA_SAFETY: f64 = 1.2;
pub const LAMBDA_DIRECTIONS: usize = 16;
pub const DEFAULT_SEED: u64 = 42;

/// User-facing grid request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub h: f64,
    pub cfl: f64,
    pub boundary: Boundary,
    /// Solve box; the domain box when absent.
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    /// Explicit time step instead of the CFL-derived one.
    pub tau: Option<f64>,
    /// Reject an explicit `tau` above the CFL bound instead of running.
    pub strict_cfl: bool,
    /// Number of stored snapshots after the initial one.
    pub snapshots: usize,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            h: 0.01,
            cfl: DEFAULT_CFL,
            boundary: Boundary::ConstantExtension,
            lower: None,
            upper: None,
            tau: None,
            strict_cfl: true,
            snapshots: 10,
            seed: DEFAULT_SEED,
        }
    }
}

impl GridSpec {
    pub fn periodic(h: f64) -> Self {
        GridSpec {
            h,
            boundary: Boundary::Periodic,
            ..Default::default()
        }
    }

    pub fn with_h(&self, h: f64) -> Self {
        GridSpec { h, ..self.clone() }
    }
}

/// Resolved grid for one solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub h: Vec<f64>,
    /// Nodes per axis.
    pub nodes: Vec<usize>,
    pub tau: f64,
    pub steps: usize,
    pub horizon: f64,
    pub boundary: Boundary,
    pub lambda_max: f64,
    /// `τ λ_max / h_min`.
    pub courant: f64,
    pub cfl: f64,
}

impl Grid {
    pub fn build(spec: &GridSpec, domain: &Domain, horizon: f64, lambda_max: impl FnOnce(&Grid) -> Result<f64>) -> Result<Grid> {
        let n = domain.dim();
        let lower = spec.lower.clone().unwrap_or_else(|| domain.lower.clone());
        let upper = spec.upper.clone().unwrap_or_else(|| domain.upper.clone());
        if lower.len() != n || upper.len() != n {
            return Err(Error::Config(format!("solve box must have {n} bounds per side")));
        }
        if !(spec.h > 0.0) {
            return Err(Error::Config("grid step h must be positive".into()));
        }
        if !(spec.cfl > 0.0) {
            return Err(Error::Config("cfl safety must be positive".into()));
        }
        if !(horizon > 0.0) {
            return Err(Error::Config("horizon must be positive".into()));
        }
        let (lo, hi) = (domain.padded_lower(), domain.padded_upper());
        for k in 0..n {
            if !(lower[k] < upper[k]) || lower[k] < lo[k] - 1e-12 || upper[k] > hi[k] + 1e-12 {
                return Err(Error::Config(format!(
                    "solve box [{}, {}] on axis {} must be non-empty and inside the padded domain [{}, {}]",
                    lower[k],
                    upper[k],
                    k + 1,
                    lo[k],
                    hi[k]
                )));
            }
        }
        let mut h = Vec::with_capacity(n);
        let mut nodes = Vec::with_capacity(n);
        for k in 0..n {
            let len = upper[k] - lower[k];
            let cells = (len / spec.h).round().max(2.0) as usize;
            h.push(len / cells as f64);
            nodes.push(match spec.boundary {
                Boundary::Periodic => cells,
                Boundary::ConstantExtension => cells + 1,
            });
        }
        let mut grid = Grid {
            lower,
            upper,
            h,
            nodes,
            tau: 0.0,
            steps: 0,
            horizon,
            boundary: spec.boundary,
            lambda_max: 0.0,
            courant: 0.0,
            cfl: spec.cfl,
        };
        let lambda = lambda_max(&grid)?;
        let h_min = grid.h.iter().copied().fold(f64::INFINITY, f64::min);
        let bound = if lambda > 0.0 { spec.cfl * h_min / lambda } else { spec.cfl * h_min };
        let tau_req = match spec.tau {
            Some(t) if !(t > 0.0) => return Err(Error::Config("tau must be positive".into())),
            Some(t) => {
                if spec.strict_cfl && t > bound * (1.0 + 1e-12) {
                    return Err(Error::Cfl { tau: t, bound });
                }
                t
            }
            None => bound,
        };
        grid.steps = (horizon / tau_req).ceil().max(1.0) as usize;
        grid.tau = horizon / grid.steps as f64;
        grid.lambda_max = lambda;
        grid.courant = grid.tau * lambda / h_min;
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn axis(&self, k: usize) -> Vec<f64> {
        (0..self.nodes[k]).map(|i| self.lower[k] + i as f64 * self.h[k]).collect()
    }

    pub fn node_coords(&self, idx: usize) -> Vec<f64> {
        let n = self.dim();
        let mut x = vec![0.0; n];
        let mut rem = idx;
        for k in (0..n).rev() {
            let i = rem % self.nodes[k];
            rem /= self.nodes[k];
            x[k] = self.lower[k] + i as f64 * self.h[k];
        }
        x
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// Nodes per axis whose domain of dependence reaches the boundary by
    /// the horizon; zero for periodic grids.
    pub fn boundary_margin(&self) -> Vec<usize> {
        match self.boundary {
            Boundary::Periodic => vec![0; self.dim()],
            Boundary::ConstantExtension => self
                .h
                .iter()
                .map(|h| (self.lambda_max * self.horizon / h).ceil() as usize + 2)
                .collect(),
        }
    }
}

/// Unit directions for the spectral-radius estimate.
pub fn directions(n: usize, seed: u64) -> Vec<Vec<f64>> {
    if n == 1 {
        return vec![vec![1.0]];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(LAMBDA_DIRECTIONS + n);
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        out.push(e);
    }
    while out.len() < LAMBDA_DIRECTIONS + n {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.1 && norm <= 1.0 {
            out.push(v.iter().map(|x| x / norm).collect());
        }
    }
    out
}

/// Spectral radius of `Σ ξᵢ Aᵢ` maximized over `dirs`.
pub fn spectral_radius(a: &[Matrix], dirs: &[Vec<f64>]) -> Result<f64> {
    let m = a[0].rows();
    let mut best: f64 = 0.0;
    for xi in dirs {
        let s = SymMatrix::from_fn(m, |r, c| a.iter().zip(xi).map(|(ai, x)| x * ai[(r, c)]).sum());
        let eig = linalg::sym_eig(&s)?;
        best = best.max(eig.values[0].abs()).max(eig.values[m - 1].abs());
    }
    Ok(best)
}

/// Closed-form spectral radius of the wave symbol:
/// `|g·ξ| + √((g·ξ)² + ξᵀRξ)`.
pub fn wave_speed(g: &[f64], r: &Matrix, dirs: &[Vec<f64>]) -> f64 {
    dirs.iter()
        .map(|xi| {
            let gx: f64 = g.iter().zip(xi).map(|(a, b)| a * b).sum();
            let rx = r.mul_vec(xi).map_or(f64::NAN, |v| v.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>());
            gx.abs() + (gx * gx + rx).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Node/cell adjacency of a tensor grid.
#[derive(Debug, Clone)]
pub(crate) struct Topology {
    pub nodes: Vec<usize>,
    pub cells: Vec<usize>,
    pub periodic: bool,
}

impl Topology {
    pub fn new(grid: &Grid) -> Self {
        let periodic = grid.boundary == Boundary::Periodic;
        let cells = grid
            .nodes
            .iter()
            .map(|&n| if periodic { n } else { n + 1 })
            .collect();
        Topology {
            nodes: grid.nodes.clone(),
            cells,
            periodic,
        }
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.iter().product()
    }

    fn unflatten(counts: &[usize], mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; counts.len()];
        for k in (0..counts.len()).rev() {
            out[k] = idx % counts[k];
            idx /= counts[k];
        }
        out
    }

    fn flatten(counts: &[usize], idx: &[usize]) -> usize {
        idx.iter().zip(counts).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Axis index of node `i + off`, wrapped or clamped.
    pub fn shift(&self, axis: usize, i: usize, off: isize) -> usize {
        let n = self.nodes[axis] as isize;
        let j = i as isize + off;
        if self.periodic {
            j.rem_euclid(n) as usize
        } else {
            j.clamp(0, n - 1) as usize
        }
    }

    pub fn node_multi(&self, idx: usize) -> Vec<usize> {
        Self::unflatten(&self.nodes, idx)
    }

    pub fn node_flat(&self, idx: &[usize]) -> usize {
        Self::flatten(&self.nodes, idx)
    }

    /// Flat index of the neighbor of `node` shifted by `off` along `axis`.
    pub fn neighbor(&self, node: usize, axis: usize, off: isize) -> usize {
        let mut m = self.node_multi(node);
        m[axis] = self.shift(axis, m[axis], off);
        self.node_flat(&m)
    }

    /// Corner nodes of each cell, `2^n` per cell, bit `j` of the corner id
    /// selecting the upper node along axis `j`.
    pub fn cell_corners(&self) -> Vec<usize> {
        let n = self.dim();
        let nc = 1usize << n;
        let mut out = Vec::with_capacity(self.num_cells() * nc);
        for c in 0..self.num_cells() {
            let cm = Self::unflatten(&self.cells, c);
            for mask in 0..nc {
                let idx: Vec<usize> = (0..n)
                    .map(|j| {
                        let up = (mask >> j) & 1 == 1;
                        if self.periodic {
                            if up {
                                (cm[j] + 1) % self.nodes[j]
                            } else {
                                cm[j]
                            }
                        } else {
                            let k = cm[j] as isize - 1 + up as isize;
                            k.clamp(0, self.nodes[j] as isize - 1) as usize
                        }
                    })
                    .collect();
                out.push(self.node_flat(&idx));
            }
        }
        out
    }

    /// Cells around each node, `2^n` per node, bit `j` selecting the upper
    /// cell along axis `j`.
    pub fn node_cells(&self) -> Vec<usize> {
        let n = self.dim();
        let nc = 1usize << n;
        let mut out = Vec::with_capacity(self.num_nodes() * nc);
        for v in 0..self.num_nodes() {
            let vm = self.node_multi(v);
            for mask in 0..nc {
                let idx: Vec<usize> = (0..n)
                    .map(|j| {
                        let up = (mask >> j) & 1 == 1;
                        if self.periodic {
                            if up {
                                vm[j]
                            } else {
                                (vm[j] + self.nodes[j] - 1) % self.nodes[j]
                            }
                        } else {
                            vm[j] + up as usize
                        }
                    })
                    .collect();
                out.push(Self::flatten(&self.cells, &idx));
            }
        }
        out
    }

    /// Cell centers, clamped into the solve box.
    pub fn cell_centers(&self, grid: &Grid) -> Vec<Vec<f64>> {
        (0..self.num_cells())
            .map(|c| {
                let cm = Self::unflatten(&self.cells, c);
                (0..self.dim())
                    .map(|j| {
                        let off = if self.periodic { 0.5 } else { -0.5 };
                        let x = grid.lower[j] + (cm[j] as f64 + off) * grid.h[j];
                        x.clamp(grid.lower[j], grid.upper[j])
                    })
                    .collect()
            })
            .collect()
    }

    /// Whether the node lies at least `margin[k]` nodes away from the
    /// boundary along every axis.
    pub fn is_interior(&self, node: usize, margin: &[usize]) -> bool {
        self.node_multi(node)
            .iter()
            .zip(&self.nodes)
            .zip(margin)
            .all(|((&i, &n), &m)| i >= m && i + m < n)
    }
}
