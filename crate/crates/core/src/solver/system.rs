//! Two-step Lax–Wendroff (Richtmyer) scheme for `−∂ₜw + Σ Aᵢ∂ᵢw + Bw = F`.
//!
//! The predictor advances cell averages of the corner nodes by half a
//! step; the corrector advances nodes with centered differences of the
//! half-step cell values. `B` and `F` enter both stages, which keeps the
//! scheme second order with zeroth-order terms.

use rayon::prelude::*;

use super::grid::{self, Grid, GridSpec, Topology, LAMBDA_SAFETY};
use super::{check_blow_up, max_abs, node_points, snapshot_stride, GridSolution, PointCoeff, Snapshot, SolverKind};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::transform::HyperbolicSystem;

struct Coeffs {
    a: Vec<PointCoeff>,
    b: PointCoeff,
    f: PointCoeff,
}

struct Frame {
    a: Vec<std::sync::Arc<Vec<f64>>>,
    b: std::sync::Arc<Vec<f64>>,
    f: std::sync::Arc<Vec<f64>>,
}

impl Coeffs {
    fn new(sys: &HyperbolicSystem, eps: f64, pts: &[Vec<f64>]) -> Result<Self> {
        Ok(Coeffs {
            a: sys.a.iter().map(|n| PointCoeff::new(n, eps, pts)).collect::<Result<_>>()?,
            b: PointCoeff::new(&sys.b, eps, pts)?,
            f: PointCoeff::new(&sys.f, eps, pts)?,
        })
    }

    fn at(&self, eps: f64, t: f64, pts: &[Vec<f64>]) -> Result<Frame> {
        Ok(Frame {
            a: self.a.iter().map(|c| c.at(eps, t, pts)).collect::<Result<_>>()?,
            b: self.b.at(eps, t, pts)?,
            f: self.f.at(eps, t, pts)?,
        })
    }
}

/// `out = Σ_j A_j d_j + B avg − F` at point `p`.
fn rhs(frame: &Frame, p: usize, m: usize, avg: &[f64], d: &[Vec<f64>], out: &mut [f64]) {
    let mm = m * m;
    let b = &frame.b[p * mm..(p + 1) * mm];
    let f = &frame.f[p * m..(p + 1) * m];
    for r in 0..m {
        let mut s = -f[r];
        for c in 0..m {
            s += b[r * m + c] * avg[c];
        }
        for (j, dj) in d.iter().enumerate() {
            let a = &frame.a[j][p * mm..(p + 1) * mm];
            for c in 0..m {
                s += a[r * m + c] * dj[c];
            }
        }
        out[r] = s;
    }
}

/// Average and axis differences over the `2^n` stencil members of one
/// point, bit `j` of the member id marking the upper side of axis `j`.
fn stencil(src: &[f64], members: &[usize], m: usize, h: &[f64], avg: &mut [f64], d: &mut [Vec<f64>]) {
    let n = h.len();
    let count = members.len() as f64;
    avg.iter_mut().for_each(|v| *v = 0.0);
    d.iter_mut().for_each(|dj| dj.iter_mut().for_each(|v| *v = 0.0));
    for (mask, &node) in members.iter().enumerate() {
        let w = &src[node * m..(node + 1) * m];
        for c in 0..m {
            avg[c] += w[c];
        }
        for j in 0..n {
            let sign = if (mask >> j) & 1 == 1 { 1.0 } else { -1.0 };
            for c in 0..m {
                d[j][c] += sign * w[c];
            }
        }
    }
    avg.iter_mut().for_each(|v| *v /= count);
    for j in 0..n {
        let scale = 2.0 / (count * h[j]);
        d[j].iter_mut().for_each(|v| *v *= scale);
    }
}

/// Spectral radius of the symbol at the nodes, with the safety factor.
pub fn system_lambda(frame_a: &[std::sync::Arc<Vec<f64>>], m: usize, n: usize, seed: u64) -> Result<f64> {
    let dirs = grid::directions(n, seed);
    let npts = frame_a[0].len() / (m * m);
    let per_point: Vec<f64> = (0..npts)
        .into_par_iter()
        .map(|p| {
            let mats: Vec<Matrix> = frame_a
                .iter()
                .map(|a| Matrix::from_fn(m, m, |r, c| a[p * m * m + r * m + c]))
                .collect();
            grid::spectral_radius(&mats, &dirs)
        })
        .collect::<Result<_>>()?;
    Ok(LAMBDA_SAFETY * per_point.into_iter().fold(0.0, f64::max))
}

pub fn solve_system(sys: &HyperbolicSystem, eps: f64, spec: &GridSpec) -> Result<GridSolution> {
    let n = sys.domain.dim();
    let m = sys.w0.shape().len();
    if sys.a.len() != n {
        return Err(Error::Shape(format!("{} flux matrices in dimension {n}", sys.a.len())));
    }
    let mut node_coeffs = None;
    let grid = Grid::build(spec, &sys.domain, sys.horizon, |g| {
        let pts = node_points(g);
        let coeffs = Coeffs::new(sys, eps, &pts)?;
        let a0: Vec<_> = coeffs.a.iter().map(|c| c.at(eps, 0.0, &pts)).collect::<Result<_>>()?;
        let lambda = system_lambda(&a0, m, n, spec.seed)?;
        node_coeffs = Some((pts, coeffs));
        Ok(lambda)
    })
    .map_err(|e| e.at_eps(eps))?;
    let (nodes, node_c) = node_coeffs.expect("lambda closure ran");
    let topo = Topology::new(&grid);
    let corners = topo.cell_corners();
    let around = topo.node_cells();
    let cells = topo.cell_centers(&grid);
    let cell_c = Coeffs::new(sys, eps, &cells)?;
    let nc = 1usize << n;
    let tau = grid.tau;
    let h = grid.h.clone();

    let mut w = super::eval_points(&sys.w0, eps, 0.0, &nodes)?;
    let scale = max_abs(&w).max(1.0).max(sys.horizon * max_abs(&node_c.f.at(eps, 0.0, &nodes)?));
    let stride = snapshot_stride(grid.steps, spec.snapshots);
    let mut snapshots = vec![Snapshot { t: 0.0, values: w.clone() }];
    let mut prev: Vec<Vec<f64>> = Vec::new();
    let mut half = vec![0.0; topo.num_cells() * m];
    let mut next = vec![0.0; w.len()];
    let mut peak = max_abs(&w);

    for step in 0..grid.steps {
        let t = step as f64 * tau;
        let fc = cell_c.at(eps, t, &cells)?;
        half.par_chunks_mut(m).enumerate().for_each(|(c, out)| {
            let mut avg = vec![0.0; m];
            let mut d = vec![vec![0.0; m]; n];
            let mut r = vec![0.0; m];
            stencil(&w, &corners[c * nc..(c + 1) * nc], m, &h, &mut avg, &mut d);
            rhs(&fc, c, m, &avg, &d, &mut r);
            for k in 0..m {
                out[k] = avg[k] + 0.5 * tau * r[k];
            }
        });
        let fnode = node_c.at(eps, t + 0.5 * tau, &nodes)?;
        next.par_chunks_mut(m).enumerate().for_each(|(i, out)| {
            let mut avg = vec![0.0; m];
            let mut d = vec![vec![0.0; m]; n];
            let mut r = vec![0.0; m];
            stencil(&half, &around[i * nc..(i + 1) * nc], m, &h, &mut avg, &mut d);
            rhs(&fnode, i, m, &avg, &d, &mut r);
            for k in 0..m {
                out[k] = w[i * m + k] + tau * r[k];
            }
        });
        let t_next = (step + 1) as f64 * tau;
        peak = peak.max(check_blow_up(&next, scale, step + 1, t_next).map_err(|e| e.at_eps(eps))?);
        if prev.len() == 2 {
            prev.remove(0);
        }
        prev.push(std::mem::replace(&mut w, next.clone()));
        if (step + 1) % stride == 0 || step + 1 == grid.steps {
            snapshots.push(Snapshot { t: t_next, values: w.clone() });
        }
    }

    let rate = match prev.as_slice() {
        [a, b] => w.iter().zip(b).zip(a).map(|((x, y), z)| (3.0 * x - 4.0 * y + z) / (2.0 * tau)).collect(),
        [b] => w.iter().zip(b).map(|(x, y)| (x - y) / tau).collect(),
        _ => vec![0.0; w.len()],
    };
    let residual = if prev.len() == 2 {
        let t_mid = (grid.steps - 1) as f64 * tau;
        let frame = node_c.at(eps, t_mid, &nodes)?;
        centered_residual(&grid, &topo, &frame, m, [&prev[0], &prev[1], &w], tau)
    } else {
        None
    };

    Ok(GridSolution {
        kind: SolverKind::System,
        eps,
        grid,
        ncomp: m,
        labels: (0..m).map(|k| format!("w{k}")).collect(),
        snapshots,
        rate,
        residual,
        max_abs: peak,
    })
}

fn centered_residual(grid: &Grid, topo: &Topology, frame: &Frame, m: usize, levels: [&Vec<f64>; 3], tau: f64) -> Option<f64> {
    let n = grid.dim();
    let margin: Vec<usize> = grid.boundary_margin().iter().map(|k| (*k).max(1)).collect();
    let [old, mid, new] = levels;
    let worst = (0..topo.num_nodes())
        .into_par_iter()
        .filter(|&i| topo.is_interior(i, &margin))
        .map(|i| {
            let mut d = vec![vec![0.0; m]; n];
            for (j, dj) in d.iter_mut().enumerate() {
                let (lo, hi) = (topo.neighbor(i, j, -1), topo.neighbor(i, j, 1));
                for c in 0..m {
                    dj[c] = (mid[hi * m + c] - mid[lo * m + c]) / (2.0 * grid.h[j]);
                }
            }
            let mut r = vec![0.0; m];
            rhs(frame, i, m, &mid[i * m..(i + 1) * m], &d, &mut r);
            (0..m)
                .map(|c| (r[c] - (new[i * m + c] - old[i * m + c]) / (2.0 * tau)).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    (worst >= 0.0).then_some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfunc::{CoefficientNet, Expr};
    use crate::solver::Boundary;
    use crate::transform::{constant_problem, wave_to_system, Domain};

    fn closed(src: &str, n: usize) -> CoefficientNet {
        CoefficientNet::closed_form(src, Expr::parse(src).unwrap(), n).unwrap()
    }

    fn dalembert() -> HyperbolicSystem {
        let mut p = constant_problem(Domain::new(vec![0.0], vec![1.0], 0.0).unwrap(), 1.0, Matrix::diag(&[1.0])).unwrap();
        p.u0 = closed("sin(2*pi*x)", 1);
        wave_to_system(&p).unwrap()
    }

    fn exact_error(sol: &GridSolution) -> f64 {
        let u = sol.component(0);
        let t = sol.final_time();
        let diff: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let x = sol.node_coords(i)[0];
                v - (2.0 * std::f64::consts::PI * x).sin() * (2.0 * std::f64::consts::PI * t).cos()
            })
            .collect();
        super::super::masked_l2(&diff, &vec![true; diff.len()], sol.grid.cell_volume())
    }

    #[test]
    fn second_order_on_dalembert() {
        let sys = dalembert();
        let errs: Vec<f64> = [0.02, 0.01, 0.005]
            .iter()
            .map(|&h| exact_error(&solve_system(&sys, 0.1, &GridSpec::periodic(h)).unwrap()))
            .collect();
        let order = crate::asymptotics::fit::loglog_slope(&[0.02, 0.01, 0.005], &errs);
        assert!(order > 1.9, "order {order}, errors {errs:?}");
        assert!(errs[2] < 5e-3);
    }

    #[test]
    fn zero_data_stays_zero() {
        let p = constant_problem(Domain::new(vec![0.0, 0.0], vec![1.0, 1.0], 0.0).unwrap(), 0.5, Matrix::identity(2)).unwrap();
        let sys = wave_to_system(&p).unwrap();
        let sol = solve_system(&sys, 0.1, &GridSpec::periodic(0.1)).unwrap();
        assert!(sol.final_snapshot().values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn damped_ode() {
        let mut p = constant_problem(Domain::new(vec![0.0], vec![1.0], 0.0).unwrap(), 1.0, Matrix::diag(&[1.0])).unwrap();
        p.a = CoefficientNet::scalar_constant("a", 1, -1.0);
        p.u1 = CoefficientNet::scalar_constant("u1", 1, 1.0);
        let sys = wave_to_system(&p).unwrap();
        let sol = solve_system(&sys, 0.1, &GridSpec::periodic(1.0 / 200.0)).unwrap();
        let want = 1.0 - (-1.0f64).exp();
        assert!(sol.component(0).iter().all(|u| (u - want).abs() < 1e-4));
    }

    #[test]
    fn cfl_violation_blows_up() {
        let sys = HyperbolicSystem {
            horizon: 4.0,
            ..dalembert()
        };
        let lambda = LAMBDA_SAFETY;
        let spec = GridSpec {
            tau: Some(3.0 * 0.45 * 0.01 / lambda),
            strict_cfl: false,
            ..GridSpec::periodic(0.01)
        };
        let err = solve_system(&sys, 0.1, &spec).unwrap_err();
        assert!(err.is_blow_up(), "{err}");
    }

    #[test]
    fn steady_state_residual() {
        let mut p = constant_problem(Domain::new(vec![0.0], vec![1.0], 0.0).unwrap(), 0.5, Matrix::diag(&[1.0])).unwrap();
        p.u0 = CoefficientNet::scalar_constant("u0", 1, 1.5);
        p.c = CoefficientNet::scalar_constant("c", 1, 2.0);
        p.f = CoefficientNet::scalar_constant("f", 1, 3.0);
        let sol = solve_system(&wave_to_system(&p).unwrap(), 0.1, &GridSpec::periodic(0.02)).unwrap();
        assert!(sol.residual.unwrap() <= 1e-10);
        assert!(sol.component(0).iter().all(|u| (u - 1.5).abs() < 1e-12));
    }

    #[test]
    fn constant_extension_keeps_constants() {
        let mut p = constant_problem(Domain::new(vec![-1.0], vec![1.0], 0.0).unwrap(), 0.5, Matrix::diag(&[2.0])).unwrap();
        p.u0 = CoefficientNet::scalar_constant("u0", 1, 0.7);
        let spec = GridSpec {
            h: 0.05,
            boundary: Boundary::ConstantExtension,
            ..Default::default()
        };
        let sol = solve_system(&wave_to_system(&p).unwrap(), 0.1, &spec).unwrap();
        assert!(sol.component(0).iter().all(|u| (u - 0.7).abs() < 1e-10));
        assert!(sol.residual.unwrap() < 1e-9);
    }
}
