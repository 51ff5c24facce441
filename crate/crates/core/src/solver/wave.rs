//! Explicit leapfrog scheme for
//! `−∂ₜ²u + 2g·∇∂ₜu + R:∇²u + a∂ₜu + b·∇u + cu = f`.
//!
//! The damping term is centered and solved pointwise; the mixed term uses
//! a centered velocity refined by two fixed-point passes.

use std::sync::Arc;

use rayon::prelude::*;

use super::grid::{self, Grid, GridSpec, Topology, LAMBDA_SAFETY};
use super::{check_blow_up, eval_points, max_abs, node_points, snapshot_stride, GridSolution, PointCoeff, Snapshot, SolverKind};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::transform::WaveProblem;

const MIXED_PASSES: usize = 2;

struct Coeffs {
    r: PointCoeff,
    g: PointCoeff,
    a: PointCoeff,
    b: PointCoeff,
    c: PointCoeff,
    f: PointCoeff,
}

struct Frame {
    r: Arc<Vec<f64>>,
    g: Arc<Vec<f64>>,
    a: Arc<Vec<f64>>,
    b: Arc<Vec<f64>>,
    c: Arc<Vec<f64>>,
    f: Arc<Vec<f64>>,
}

impl Coeffs {
    fn at(&self, eps: f64, t: f64, pts: &[Vec<f64>]) -> Result<Frame> {
        Ok(Frame {
            r: self.r.at(eps, t, pts)?,
            g: self.g.at(eps, t, pts)?,
            a: self.a.at(eps, t, pts)?,
            b: self.b.at(eps, t, pts)?,
            c: self.c.at(eps, t, pts)?,
            f: self.f.at(eps, t, pts)?,
        })
    }
}

/// Neighbor tables: `nb[(i*n + j)*2 + s]` is the node next to `i` along
/// axis `j`, below for `s = 0` and above for `s = 1`.
struct Stencil {
    n: usize,
    h: Vec<f64>,
    nb: Vec<usize>,
}

impl Stencil {
    fn new(topo: &Topology, h: &[f64]) -> Self {
        let n = topo.dim();
        let mut nb = Vec::with_capacity(topo.num_nodes() * n * 2);
        for i in 0..topo.num_nodes() {
            for j in 0..n {
                nb.push(topo.neighbor(i, j, -1));
                nb.push(topo.neighbor(i, j, 1));
            }
        }
        Stencil { n, h: h.to_vec(), nb }
    }

    fn at(&self, i: usize, j: usize, up: bool) -> usize {
        self.nb[(i * self.n + j) * 2 + up as usize]
    }

    fn d1(&self, u: &[f64], i: usize, j: usize) -> f64 {
        (u[self.at(i, j, true)] - u[self.at(i, j, false)]) / (2.0 * self.h[j])
    }

    fn d2(&self, u: &[f64], i: usize, j: usize, k: usize) -> f64 {
        if j == k {
            (u[self.at(i, j, true)] - 2.0 * u[i] + u[self.at(i, j, false)]) / (self.h[j] * self.h[j])
        } else {
            let pp = self.at(self.at(i, j, true), k, true);
            let pm = self.at(self.at(i, j, true), k, false);
            let mp = self.at(self.at(i, j, false), k, true);
            let mm = self.at(self.at(i, j, false), k, false);
            (u[pp] - u[pm] - u[mp] + u[mm]) / (4.0 * self.h[j] * self.h[k])
        }
    }

    /// `R:∇²u + b·∇u + cu − f` at node `i`.
    fn spatial(&self, fr: &Frame, u: &[f64], i: usize) -> f64 {
        let n = self.n;
        let mut s = fr.c[i] * u[i] - fr.f[i];
        for j in 0..n {
            s += fr.b[i * n + j] * self.d1(u, i, j);
            for k in 0..n {
                s += fr.r[i * n * n + j * n + k] * self.d2(u, i, j, k);
            }
        }
        s
    }

    fn mixed(&self, fr: &Frame, v: &[f64], i: usize) -> f64 {
        (0..self.n).map(|j| 2.0 * fr.g[i * self.n + j] * self.d1(v, i, j)).sum()
    }
}

pub fn wave_lambda(r: &[f64], g: &[f64], n: usize, seed: u64) -> f64 {
    let dirs = grid::directions(n, seed);
    let npts = g.len() / n;
    let best = (0..npts)
        .into_par_iter()
        .map(|p| {
            let rm = Matrix::from_fn(n, n, |a, b| r[p * n * n + a * n + b]);
            grid::wave_speed(&g[p * n..(p + 1) * n], &rm, &dirs)
        })
        .reduce(|| 0.0, f64::max);
    LAMBDA_SAFETY * best
}

pub fn solve_wave(p: &WaveProblem, eps: f64, spec: &GridSpec) -> Result<GridSolution> {
    p.check_shapes()?;
    let n = p.dim();
    let mut setup = None;
    let grid = Grid::build(spec, &p.domain, p.horizon, |g| {
        let pts = node_points(g);
        let coeffs = Coeffs {
            r: PointCoeff::new(&p.r, eps, &pts)?,
            g: PointCoeff::new(&p.g, eps, &pts)?,
            a: PointCoeff::new(&p.a, eps, &pts)?,
            b: PointCoeff::new(&p.b, eps, &pts)?,
            c: PointCoeff::new(&p.c, eps, &pts)?,
            f: PointCoeff::new(&p.f, eps, &pts)?,
        };
        let fr = coeffs.at(eps, 0.0, &pts)?;
        let lambda = wave_lambda(&fr.r, &fr.g, n, spec.seed);
        setup = Some((pts, coeffs));
        Ok(lambda)
    })
    .map_err(|e| e.at_eps(eps))?;
    let (nodes, coeffs) = setup.expect("lambda closure ran");
    let topo = Topology::new(&grid);
    let st = Stencil::new(&topo, &grid.h);
    let tau = grid.tau;
    let npts = nodes.len();
    let no_mixed = coeffs.g.is_zero();

    let u0 = eval_points(&p.u0, eps, 0.0, &nodes)?;
    let u1 = eval_points(&p.u1, eps, 0.0, &nodes)?;
    let fr0 = coeffs.at(eps, 0.0, &nodes)?;
    let scale = max_abs(&u0)
        .max(p.horizon * max_abs(&u1))
        .max(p.horizon * p.horizon * max_abs(&fr0.f))
        .max(1.0);
    let pack = |u: &[f64], v: &[f64]| -> Vec<f64> { u.iter().zip(v).flat_map(|(a, b)| [*a, *b]).collect() };

    // Taylor start: u¹ = u⁰ + τu₁ + τ²/2 ∂ₜ²u(0).
    let first: Vec<f64> = (0..npts)
        .into_par_iter()
        .map(|i| {
            let utt = st.mixed(&fr0, &u1, i) + st.spatial(&fr0, &u0, i) + fr0.a[i] * u1[i];
            u0[i] + tau * u1[i] + 0.5 * tau * tau * utt
        })
        .collect();

    let stride = snapshot_stride(grid.steps, spec.snapshots);
    let mut snapshots = vec![Snapshot {
        t: 0.0,
        values: pack(&u0, &u1),
    }];
    let mut peak = max_abs(&u0).max(max_abs(&u1));
    let mut levels: Vec<Vec<f64>> = vec![u0, first];
    peak = peak.max(check_blow_up(&levels[1], scale, 1, tau).map_err(|e| e.at_eps(eps))?);
    if grid.steps == 1 || stride == 1 {
        let v: Vec<f64> = levels[1].iter().zip(&levels[0]).map(|(a, b)| (a - b) / tau).collect();
        snapshots.push(Snapshot {
            t: tau,
            values: pack(&levels[1], &v),
        });
    }

    for step in 1..grid.steps {
        let t = step as f64 * tau;
        let fr = coeffs.at(eps, t, &nodes)?;
        let (old, cur) = (&levels[levels.len() - 2], &levels[levels.len() - 1]);
        let base: Vec<f64> = (0..npts)
            .into_par_iter()
            .map(|i| st.spatial(&fr, cur, i) + (2.0 * cur[i] - old[i]) / (tau * tau) - fr.a[i] * old[i] / (2.0 * tau))
            .collect();
        let denom: Vec<f64> = (0..npts).map(|i| 1.0 / (tau * tau) - fr.a[i] / (2.0 * tau)).collect();
        let mut next: Vec<f64> = (0..npts).map(|i| base[i] / denom[i]).collect();
        if !no_mixed {
            let mut v: Vec<f64> = cur.iter().zip(old).map(|(a, b)| (a - b) / tau).collect();
            for _ in 0..MIXED_PASSES {
                next = (0..npts)
                    .into_par_iter()
                    .map(|i| (base[i] + st.mixed(&fr, &v, i)) / denom[i])
                    .collect();
                v = next.iter().zip(old).map(|(a, b)| (a - b) / (2.0 * tau)).collect();
            }
        }
        let t_next = t + tau;
        peak = peak.max(check_blow_up(&next, scale, step + 1, t_next).map_err(|e| e.at_eps(eps))?);
        if levels.len() == 3 {
            levels.remove(0);
        }
        levels.push(next);
        if (step + 1) % stride == 0 || step + 1 == grid.steps {
            let k = levels.len();
            let v: Vec<f64> = (0..npts)
                .map(|i| (3.0 * levels[k - 1][i] - 4.0 * levels[k - 2][i] + levels[k - 3][i]) / (2.0 * tau))
                .collect();
            snapshots.push(Snapshot {
                t: t_next,
                values: pack(&levels[k - 1], &v),
            });
        }
    }

    let last = snapshots.last().expect("snapshots").values.clone();
    let residual = if levels.len() == 3 {
        let t_mid = (grid.steps - 1) as f64 * tau;
        let fr = coeffs.at(eps, t_mid, &nodes)?;
        let margin: Vec<usize> = grid.boundary_margin().iter().map(|k| (*k).max(1)).collect();
        let [old, mid, new] = [&levels[0], &levels[1], &levels[2]];
        let v: Vec<f64> = new.iter().zip(old.iter()).map(|(a, b)| (a - b) / (2.0 * tau)).collect();
        let worst = (0..npts)
            .into_par_iter()
            .filter(|&i| topo.is_interior(i, &margin))
            .map(|i| {
                let r = -(new[i] - 2.0 * mid[i] + old[i]) / (tau * tau) + st.mixed(&fr, &v, i) + fr.a[i] * v[i] + st.spatial(&fr, mid, i);
                r.abs()
            })
            .reduce(|| f64::NEG_INFINITY, f64::max);
        (worst >= 0.0).then_some(worst)
    } else {
        None
    };
    let rate = {
        let k = levels.len();
        let u_t: Vec<f64> = last.iter().skip(1).step_by(2).copied().collect();
        let u_tt: Vec<f64> = if k == 3 {
            (0..npts)
                .map(|i| (levels[2][i] - 2.0 * levels[1][i] + levels[0][i]) / (tau * tau))
                .collect()
        } else {
            vec![0.0; npts]
        };
        pack(&u_t, &u_tt)
    };

    Ok(GridSolution {
        kind: SolverKind::Wave,
        eps,
        grid,
        ncomp: 2,
        labels: vec!["u".into(), "u_t".into()],
        snapshots,
        rate,
        residual,
        max_abs: peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfunc::{CoefficientNet, Expr};
    use crate::solver::Boundary;
    use crate::transform::{constant_problem, Domain};

    fn closed(src: &str, n: usize) -> CoefficientNet {
        CoefficientNet::closed_form(src, Expr::parse(src).unwrap(), n).unwrap()
    }

    fn dalembert(horizon: f64) -> WaveProblem {
        let mut p = constant_problem(Domain::new(vec![0.0], vec![1.0], 0.0).unwrap(), horizon, Matrix::diag(&[1.0])).unwrap();
        p.u0 = closed("sin(2*pi*x)", 1);
        p
    }

    fn error(sol: &GridSolution) -> f64 {
        let t = sol.final_time();
        let u = sol.component(0);
        let two_pi = 2.0 * std::f64::consts::PI;
        let d: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(i, v)| v - (two_pi * sol.node_coords(i)[0]).sin() * (two_pi * t).cos())
            .collect();
        crate::solver::masked_l2(&d, &vec![true; d.len()], sol.grid.cell_volume())
    }

    #[test]
    fn second_order_on_dalembert() {
        let p = dalembert(1.0);
        let hs = [0.02, 0.01, 0.005];
        let errs: Vec<f64> = hs.iter().map(|&h| error(&solve_wave(&p, 0.1, &GridSpec::periodic(h)).unwrap())).collect();
        let order = crate::asymptotics::fit::loglog_slope(&hs, &errs);
        assert!(order > 1.9, "order {order} {errs:?}");
        assert!(errs[2] < 5e-3);
    }

    #[test]
    fn damped_ode() {
        let mut p = dalembert(1.0);
        p.u0 = CoefficientNet::scalar_constant("u0", 1, 0.0);
        p.u1 = CoefficientNet::scalar_constant("u1", 1, 1.0);
        p.a = CoefficientNet::scalar_constant("a", 1, -1.0);
        let sol = solve_wave(&p, 0.1, &GridSpec::periodic(1.0 / 200.0)).unwrap();
        let want = 1.0 - (-1.0f64).exp();
        assert!(sol.component(0).iter().all(|u| (u - want).abs() < 1e-4));
        assert!(sol.component(1).iter().all(|v| (v - (-1.0f64).exp()).abs() < 1e-4));
    }

    #[test]
    fn harmonic_steady_state() {
        let mut p = constant_problem(Domain::new(vec![-1.0], vec![1.0], 0.0).unwrap(), 0.2, Matrix::diag(&[1.0])).unwrap();
        p.u0 = closed("x", 1);
        p.c = CoefficientNet::scalar_constant("c", 1, 2.0);
        p.f = closed("2*x", 1);
        let spec = GridSpec {
            h: 0.01,
            boundary: Boundary::ConstantExtension,
            ..Default::default()
        };
        let sol = solve_wave(&p, 0.1, &spec).unwrap();
        assert!(sol.residual.unwrap() <= 1e-10, "{:?}", sol.residual);
        let u = sol.component(0);
        let center = u.len() / 2;
        assert!((u[center] - sol.node_coords(center)[0]).abs() < 1e-12);
    }

    #[test]
    fn mixed_term_two_dimensional_runs() {
        let mut p = constant_problem(
            Domain::new(vec![0.0, 0.0], vec![1.0, 1.0], 0.0).unwrap(),
            0.25,
            Matrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 1.5]]).unwrap(),
        )
        .unwrap();
        p.g = CoefficientNet::constant("g", 2, Matrix::from_rows(&[vec![0.1], vec![-0.1]]).unwrap());
        p.u0 = closed("sin(2*pi*x)*cos(2*pi*y)", 2);
        let sol = solve_wave(&p, 0.1, &GridSpec::periodic(0.05)).unwrap();
        assert!(sol.max_abs < 2.0);
    }

    #[test]
    fn cfl_violation_blows_up() {
        let p = dalembert(4.0);
        let spec = GridSpec {
            tau: Some(3.0 * 0.45 * 0.01 / LAMBDA_SAFETY),
            strict_cfl: false,
            ..GridSpec::periodic(0.01)
        };
        assert!(solve_wave(&p, 0.1, &spec).unwrap_err().is_blow_up());
    }
}
