//! Second-order wave equation ⇄ symmetric hyperbolic first-order system.
//!
//! The wave equation
//! `−u_tt + 2Σ gᵢ ∂ᵢu_t + Σ R_ij ∂ᵢ∂ⱼu + a u_t + Σ bᵢ ∂ᵢu + c u = f`
//! becomes `−∂ₜw + Σ Aᵢ ∂ᵢw + B w = F` for `w = (u, u_t, S u′)` with
//! `S = √R`. Components are indexed from zero: `w[0] = u`, `w[1] = z`,
//! `w[2..] = v`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Location, Result};
use crate::genfunc::{CoefficientNet, Compact, Expr, PiecewiseExpr, Rescaling, SampleGrid, Shape, SpaceTimeBox};
use crate::linalg::{self, Matrix, SignatureVerdict, SymMatrix};

/// Spatial box with the padding available to mollifier stencils.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub padding: f64,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, padding: f64) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() || lower.len() > 3 {
            return Err(Error::Config("domain bounds must have equal length 1..=3".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::Config("domain lower bounds must be below upper bounds".into()));
        }
        if !(padding >= 0.0) {
            return Err(Error::Config("padding must be non-negative".into()));
        }
        Ok(Domain { lower, upper, padding })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn padded_lower(&self) -> Vec<f64> {
        self.lower.iter().map(|v| v - self.padding).collect()
    }

    pub fn padded_upper(&self) -> Vec<f64> {
        self.upper.iter().map(|v| v + self.padding).collect()
    }

    /// Box at `frac` of the domain, about its center.
    pub fn compact(&self, frac: f64) -> Compact {
        Compact::shrunk(&self.lower, &self.upper, frac)
    }

    pub fn whole(&self) -> Compact {
        Compact::new(self.lower.clone(), self.upper.clone())
    }
}

/// Coefficients and data of the second-order equation.
#[derive(Debug, Clone)]
pub struct WaveProblem {
    pub domain: Domain,
    pub horizon: f64,
    /// SPD n×n principal part.
    pub r: CoefficientNet,
    /// Mixed-term vector, length n.
    pub g: CoefficientNet,
    pub a: CoefficientNet,
    pub b: CoefficientNet,
    pub c: CoefficientNet,
    pub f: CoefficientNet,
    pub u0: CoefficientNet,
    pub u1: CoefficientNet,
}

/// Coefficients and data of the first-order system.
#[derive(Debug, Clone)]
pub struct HyperbolicSystem {
    pub domain: Domain,
    pub horizon: f64,
    pub a: Vec<CoefficientNet>,
    pub b: CoefficientNet,
    pub f: CoefficientNet,
    pub w0: CoefficientNet,
}

/// Points and ε values on which pointwise hypotheses are checked.
#[derive(Debug, Clone)]
pub struct ValidationSample {
    pub eps: Vec<f64>,
    pub grid: SampleGrid,
}

impl ValidationSample {
    /// A coarse space-time grid over the domain at a large and a small ε.
    pub fn default_for(domain: &Domain, horizon: f64) -> Self {
        let n = domain.dim();
        let per_axis = match n {
            1 => 17,
            2 => 7,
            _ => 4,
        };
        ValidationSample {
            eps: vec![2f64.powi(-4), 2f64.powi(-10)],
            grid: SampleGrid::uniform(
                vec![0.0, 0.5 * horizon, horizon],
                &domain.lower,
                &domain.upper,
                &vec![per_axis; n],
            ),
        }
    }

    fn for_each(&self, mut f: impl FnMut(f64, f64, &[f64]) -> Result<()>) -> Result<()> {
        for &eps in &self.eps {
            for i in 0..self.grid.num_points() {
                let (t, x) = self.grid.point(i);
                f(eps, t, &x)?;
            }
        }
        Ok(())
    }
}

fn sym(m: &Matrix) -> Result<SymMatrix> {
    SymMatrix::from_matrix(m, 1e-12 * m.frobenius().max(1.0))
}

impl WaveProblem {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Shape and consistency checks that do not need sampling.
    pub fn check_shapes(&self) -> Result<()> {
        let n = self.dim();
        let want = [
            (&self.r, if n == 1 { Shape::Scalar } else { Shape::Matrix(n, n) }),
            (&self.g, if n == 1 { Shape::Scalar } else { Shape::Vector(n) }),
            (&self.b, if n == 1 { Shape::Scalar } else { Shape::Vector(n) }),
            (&self.a, Shape::Scalar),
            (&self.c, Shape::Scalar),
            (&self.f, Shape::Scalar),
            (&self.u0, Shape::Scalar),
            (&self.u1, Shape::Scalar),
        ];
        for (net, shape) in want {
            if net.shape() != shape {
                return Err(Error::Shape(format!("'{}' is {}, expected {shape}", net.name(), net.shape())));
            }
            if net.dim() != n {
                return Err(Error::Shape(format!("'{}' lives in dimension {}", net.name(), net.dim())));
            }
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Config("horizon must be positive".into()));
        }
        Ok(())
    }

    /// Pointwise hypotheses: R SPD and the assembled metric Lorentzian.
    pub fn validate(&self, sample: &ValidationSample) -> Result<()> {
        self.check_shapes()?;
        sample.for_each(|eps, t, x| {
            let loc = || Location {
                eps,
                t,
                x: x.to_vec(),
            };
            let r = sym(&self.r.eval(eps, t, x).map_err(|e| e.at_eps(eps))?)?;
            let eig = linalg::sym_eig(&r)?;
            let min = eig.values[0];
            if min <= linalg::spd_floor(&r) {
                return Err(Error::NotSpdAt {
                    location: loc(),
                    min_eigenvalue: min,
                });
            }
            let g = self.g.eval_vec(eps, t, x)?;
            let report = linalg::lorentzian_check(&linalg::assemble_metric(&g, &r)?)?;
            if report.verdict != SignatureVerdict::Lorentzian {
                return Err(Error::NotLorentzian { location: loc() });
            }
            Ok(())
        })
    }

    /// `S = √R`, tagged SPD.
    pub fn s(&self) -> Result<CoefficientNet> {
        Ok(self.r.spd_sqrt()?.with_name("S"))
    }
}

/// `b̃ = Div S + S⁻¹ (b − Div S²)`, the row `B[1, 2..]`.
pub fn b_tilde(b: &CoefficientNet, s: &CoefficientNet) -> Result<CoefficientNet> {
    let s2 = s.matmul(s)?;
    let div_s = s.divergence()?;
    let div_s2 = s2.divergence()?;
    let s_inv = s.clone().assume_spd()?.inverse_spd()?;
    let b = as_column(b)?;
    let rhs = b.sub(&div_s2)?;
    Ok(div_s.add(&s_inv.matmul(&rhs)?)?.with_name("b~"))
}

/// Inverse of [`b_tilde`]: `b = S b̃ − S Div S + Div S²`.
pub fn reconstruct_b(b_tilde: &CoefficientNet, s: &CoefficientNet) -> Result<CoefficientNet> {
    let s2 = s.matmul(s)?;
    let div_s = s.divergence()?;
    let div_s2 = s2.divergence()?;
    let bt = as_column(b_tilde)?;
    Ok(s.matmul(&bt)?.sub(&s.matmul(&div_s)?)?.add(&div_s2)?.with_name("b"))
}

fn as_column(v: &CoefficientNet) -> Result<CoefficientNet> {
    match v.shape() {
        Shape::Scalar | Shape::Vector(_) => Ok(v.clone()),
        Shape::Matrix(1, n) => Ok(v.transpose().with_name(v.name().to_string())).map(|t| {
            debug_assert_eq!(t.shape(), Shape::Vector(n));
            t
        }),
        s => Err(Error::Shape(format!("expected a vector, got {s}"))),
    }
}

/// `Aᵢ`, `B`, `F`, `w0` of the first-order form. Pointwise hypotheses are
/// checked on `sample`.
pub fn wave_to_system_on(p: &WaveProblem, sample: &ValidationSample) -> Result<HyperbolicSystem> {
    p.validate(sample)?;
    let n = p.dim();
    let m = n + 2;
    let s = p.s()?;

    let a: Vec<CoefficientNet> = (0..n)
        .map(|i| {
            let (g, s) = (p.g.clone(), s.clone());
            CoefficientNet::from_fn(format!("A{}", i + 1), Shape::Matrix(m, m), n, true, move |eps, t, x| {
                let gv = g.eval_vec(eps, t, x)?;
                let sv = s.eval(eps, t, x)?;
                Ok(SymMatrix::from_fn(m, |r, c| match (r, c) {
                    (1, 1) => 2.0 * gv[i],
                    (1, c) if c >= 2 => sv[(i, c - 2)],
                    _ => 0.0,
                })
                .into_matrix())
            })
        })
        .collect();
    let a = a
        .into_iter()
        .map(|net| retag(net, p.g.is_time_dependent() || s.is_time_dependent()))
        .collect();

    let bt = b_tilde(&p.b, &s)?;
    let lower = if s.is_time_dependent() {
        let s_inv = s.inverse_spd()?;
        Some(s.time_derivative()?.matmul(&s_inv)?)
    } else {
        None
    };
    let b = {
        let (a_net, c_net, bt) = (p.a.clone(), p.c.clone(), bt.clone());
        let lower = lower.clone();
        let net = CoefficientNet::from_fn("B", Shape::Matrix(m, m), n, true, move |eps, t, x| {
            let mut out = Matrix::zeros(m, m);
            out[(0, 1)] = 1.0;
            out[(1, 0)] = c_net.eval_scalar(eps, t, x)?;
            out[(1, 1)] = a_net.eval_scalar(eps, t, x)?;
            for (j, v) in bt.eval_vec(eps, t, x)?.into_iter().enumerate() {
                out[(1, 2 + j)] = v;
            }
            if let Some(l) = &lower {
                let lm = l.eval(eps, t, x)?;
                for i in 0..n {
                    for j in 0..n {
                        out[(2 + i, 2 + j)] = lm[(i, j)];
                    }
                }
            }
            Ok(out)
        });
        retag(
            net,
            p.a.is_time_dependent()
                || p.c.is_time_dependent()
                || p.b.is_time_dependent()
                || s.is_time_dependent(),
        )
    };

    let f = {
        let f_net = p.f.clone();
        let net = CoefficientNet::from_fn("F", Shape::Vector(m), n, true, move |eps, t, x| {
            let mut out = Matrix::zeros(m, 1);
            out[(1, 0)] = f_net.eval_scalar(eps, t, x)?;
            Ok(out)
        });
        retag(net, p.f.is_time_dependent())
    };

    let w0 = {
        let (u0, u1, s) = (p.u0.clone(), p.u1.clone(), s.clone());
        let domain = p.domain.clone();
        CoefficientNet::from_fn("w0", Shape::Vector(m), n, false, move |eps, _, x| {
            let mut out = Matrix::zeros(m, 1);
            out[(0, 0)] = u0.eval_scalar(eps, 0.0, x)?;
            out[(1, 0)] = u1.eval_scalar(eps, 0.0, x)?;
            let grad = initial_gradient(&u0, eps, x, &domain)?;
            let v = s.eval(eps, 0.0, x)?.mul_vec(&grad)?;
            for (j, vj) in v.into_iter().enumerate() {
                out[(2 + j, 0)] = vj;
            }
            Ok(out)
        })
    };

    Ok(HyperbolicSystem {
        domain: p.domain.clone(),
        horizon: p.horizon,
        a,
        b,
        f,
        w0,
    })
}

pub fn wave_to_system(p: &WaveProblem) -> Result<HyperbolicSystem> {
    wave_to_system_on(p, &ValidationSample::default_for(&p.domain, p.horizon))
}

fn retag(net: CoefficientNet, time_dependent: bool) -> CoefficientNet {
    if time_dependent {
        net
    } else {
        let name = net.name().to_string();
        let shape = net.shape();
        let dim = net.dim();
        CoefficientNet::from_fn(name, shape, dim, false, move |eps, t, x| net.eval(eps, t, x))
    }
}

/// Gradient of `u0` at `t = 0`: central differences, or second-order
/// one-sided ones where the central stencil leaves the padded box.
fn initial_gradient(u0: &CoefficientNet, eps: f64, x: &[f64], domain: &Domain) -> Result<Vec<f64>> {
    let h = u0.fd_step(eps);
    let lo = domain.padded_lower();
    let hi = domain.padded_upper();
    let mut out = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    let at = |xp: &mut Vec<f64>, k: usize, off: f64| -> Result<f64> {
        xp[k] = x[k] + off;
        let v = u0.eval_scalar(eps, 0.0, xp);
        xp[k] = x[k];
        v
    };
    for k in 0..x.len() {
        let central = x[k] - h >= lo[k] && x[k] + h <= hi[k];
        let try_central = if central {
            match (at(&mut xp, k, h), at(&mut xp, k, -h)) {
                (Ok(p), Ok(m)) => Some((p - m) / (2.0 * h)),
                (Err(Error::Domain(_)), _) | (_, Err(Error::Domain(_))) => None,
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        } else {
            None
        };
        out[k] = match try_central {
            Some(v) => v,
            None => {
                let dir = if x[k] + h > hi[k] { -1.0 } else { 1.0 };
                let f0 = at(&mut xp, k, 0.0)?;
                let f1 = at(&mut xp, k, dir * h)?;
                let f2 = at(&mut xp, k, dir * 2.0 * h)?;
                dir * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)
            }
        };
    }
    Ok(out)
}

/// Diagnostics of [`system_to_wave`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReverseReport {
    /// `max |w0[2..] − S u0′|` over the sample.
    pub w0_residual: f64,
    /// `max |B[2.., 2..] − (∂ₜS)S⁻¹|` over the sample.
    pub lower_block_residual: f64,
}

pub const STRUCTURE_TOL: f64 = 1e-10;

/// Reads the wave coefficients back off a system of wave type.
pub fn system_to_wave_on(sys: &HyperbolicSystem, sample: &ValidationSample) -> Result<(WaveProblem, ReverseReport)> {
    let n = sys.domain.dim();
    let m = n + 2;
    if sys.a.len() != n {
        return Err(Error::Structure(format!("{} flux matrices in dimension {n}", sys.a.len())));
    }
    for net in sys.a.iter().chain([&sys.b]) {
        if net.shape() != Shape::Matrix(m, m) {
            return Err(Error::Structure(format!("'{}' is {}, expected {m}x{m}", net.name(), net.shape())));
        }
    }
    for net in [&sys.f, &sys.w0] {
        if net.shape() != Shape::Vector(m) {
            return Err(Error::Structure(format!("'{}' is {}, expected length {m}", net.name(), net.shape())));
        }
    }
    check_structure(sys, sample)?;

    let a_nets = sys.a.clone();
    let s = CoefficientNet::from_fn("S", Shape::from_square(n), n, true, move |eps, t, x| {
        let rows: Vec<Matrix> = a_nets.iter().map(|a| a.eval(eps, t, x)).collect::<Result<_>>()?;
        let s = SymMatrix::from_fn(n, |i, j| rows[i][(1, 2 + j)]);
        Ok(s.into_matrix())
    });
    let s = retag(s, sys.a.iter().any(|a| a.is_time_dependent()));
    sample.for_each(|eps, t, x| {
        linalg::sym_inverse(&sym(&s.eval(eps, t, x)?)?)
            .map_err(|e| Error::Structure(format!("S block not invertible at t={t}, x={x:?}: {e}")))?;
        Ok(())
    })?;

    let entry = |net: &CoefficientNet, i: usize, j: usize, name: &str| -> Result<CoefficientNet> {
        let e = net.entry(i, j)?.with_name(name);
        Ok(retag(e, net.is_time_dependent()))
    };
    let g = if n == 1 {
        entry(&sys.a[0], 1, 1, "g")?.scale(0.5).with_name("g")
    } else {
        let parts: Vec<CoefficientNet> = sys
            .a
            .iter()
            .map(|a| Ok(entry(a, 1, 1, "2g")?.scale(0.5)))
            .collect::<Result<_>>()?;
        CoefficientNet::from_entries("g", n, 1, parts)?
    };
    let a = entry(&sys.b, 1, 1, "a")?;
    let c = entry(&sys.b, 1, 0, "c")?;
    let f = entry(&sys.f, 1, 0, "f")?;
    let bt_parts: Vec<CoefficientNet> = (0..n)
        .map(|j| entry(&sys.b, 1, 2 + j, "b~"))
        .collect::<Result<_>>()?;
    let bt = if n == 1 {
        bt_parts[0].clone()
    } else {
        CoefficientNet::from_entries("b~", n, 1, bt_parts)?
    };
    let b = reconstruct_b(&bt, &s)?;
    let r = s.matmul(&s)?.assume_spd()?.with_name("R");
    let u0 = entry(&sys.w0, 0, 0, "u0")?;
    let u1 = entry(&sys.w0, 1, 0, "u1")?;

    let mut w0_residual: f64 = 0.0;
    let mut lower_block_residual: f64 = 0.0;
    let dts = s.time_derivative()?;
    let s_spd = s.clone().assume_spd()?;
    let s_inv = s_spd.inverse_spd()?;
    for &eps in &sample.eps {
        for i in 0..sample.grid.spatial_len() {
            let (_, x) = sample.grid.point(i);
            let w0 = sys.w0.eval_vec(eps, 0.0, &x)?;
            let grad = initial_gradient(&u0, eps, &x, &sys.domain)?;
            let sv = s.eval(eps, 0.0, &x)?.mul_vec(&grad)?;
            for j in 0..n {
                w0_residual = w0_residual.max((w0[2 + j] - sv[j]).abs());
            }
        }
    }
    sample.for_each(|eps, t, x| {
        let bm = sys.b.eval(eps, t, x)?;
        let want = if s.is_time_dependent() {
            dts.eval(eps, t, x)?.matmul(&s_inv.eval(eps, t, x)?)?
        } else {
            Matrix::zeros(n, n)
        };
        for i in 0..n {
            for j in 0..n {
                lower_block_residual = lower_block_residual.max((bm[(2 + i, 2 + j)] - want[(i, j)]).abs());
            }
        }
        Ok(())
    })?;

    let problem = WaveProblem {
        domain: sys.domain.clone(),
        horizon: sys.horizon,
        r,
        g,
        a,
        b,
        c,
        f,
        u0,
        u1,
    };
    Ok((
        problem,
        ReverseReport {
            w0_residual,
            lower_block_residual,
        },
    ))
}

pub fn system_to_wave(sys: &HyperbolicSystem) -> Result<(WaveProblem, ReverseReport)> {
    system_to_wave_on(sys, &ValidationSample::default_for(&sys.domain, sys.horizon))
}

fn check_structure(sys: &HyperbolicSystem, sample: &ValidationSample) -> Result<()> {
    let n = sys.domain.dim();
    let m = n + 2;
    let tol = |v: &Matrix| STRUCTURE_TOL * v.max_abs().max(1.0);
    let fail = |what: String, t: f64, x: &[f64]| Err(Error::Structure(format!("{what} at t={t}, x={x:?}")));
    sample.for_each(|eps, t, x| {
        let ai: Vec<Matrix> = sys.a.iter().map(|a| a.eval(eps, t, x)).collect::<Result<_>>()?;
        for (i, a) in ai.iter().enumerate() {
            let tl = tol(a);
            if a.asymmetry() > tl {
                return fail(format!("A{} is not symmetric", i + 1), t, x);
            }
            for r in 0..m {
                for c in 0..m {
                    let free = (r == 1 && c >= 1) || (c == 1 && r >= 1);
                    if !free && a[(r, c)].abs() > tl {
                        return fail(format!("A{}[{r},{c}] must vanish", i + 1), t, x);
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if (ai[i][(1, 2 + j)] - ai[j][(1, 2 + i)]).abs() > tol(&ai[i]) {
                    return fail("S block read off the flux matrices is not symmetric".into(), t, x);
                }
            }
        }
        let b = sys.b.eval(eps, t, x)?;
        let tl = tol(&b);
        if (b[(0, 1)] - 1.0).abs() > tl {
            return fail("B[0,1] must be 1 (first equation reads z = u_t)".into(), t, x);
        }
        for c in 0..m {
            if c != 1 && b[(0, c)].abs() > tl {
                return fail(format!("B[0,{c}] must vanish"), t, x);
            }
        }
        for r in 2..m {
            for c in 0..2 {
                if b[(r, c)].abs() > tl {
                    return fail(format!("B[{r},{c}] must vanish"), t, x);
                }
            }
        }
        let f = sys.f.eval_vec(eps, t, x)?;
        for (k, v) in f.iter().enumerate() {
            if k != 1 && v.abs() > STRUCTURE_TOL * f.iter().fold(1.0f64, |a, b| a.max(b.abs())) {
                return fail(format!("F[{k}] must vanish"), t, x);
            }
        }
        Ok(())
    })
}

/// `|Tr(S²u″) − Div(S²u′) + ⟨Div S², u′⟩|` at `x`, every derivative by
/// central differences with step `h`.
pub fn divergence_identity_residual<S, U>(s: S, u: U, x: &[f64], h: f64) -> Result<f64>
where
    S: Fn(&[f64]) -> Result<Matrix>,
    U: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let s2 = |y: &[f64]| -> Result<Matrix> {
        let m = s(y)?;
        m.matmul(&m)
    };
    let shifted = |y: &[f64], k: usize, d: f64| {
        let mut z = y.to_vec();
        z[k] += d;
        z
    };
    let grad = |y: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|k| (u(&shifted(y, k, h)) - u(&shifted(y, k, -h))) / (2.0 * h))
            .collect()
    };
    let u0 = u(x);
    let mut hess = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            hess[(i, j)] = if i == j {
                (u(&shifted(x, i, h)) - 2.0 * u0 + u(&shifted(x, i, -h))) / (h * h)
            } else {
                let pp = u(&shifted(&shifted(x, i, h), j, h));
                let pm = u(&shifted(&shifted(x, i, h), j, -h));
                let mp = u(&shifted(&shifted(x, i, -h), j, h));
                let mm = u(&shifted(&shifted(x, i, -h), j, -h));
                (pp - pm - mp + mm) / (4.0 * h * h)
            };
        }
    }
    let s2x = s2(x)?;
    let trace: f64 = (0..n).map(|i| (0..n).map(|j| s2x[(i, j)] * hess[(j, i)]).sum::<f64>()).sum();
    let mut div_flux = 0.0;
    for i in 0..n {
        let plus = shifted(x, i, h);
        let minus = shifted(x, i, -h);
        let fp = s2(&plus)?.mul_vec(&grad(&plus))?[i];
        let fm = s2(&minus)?.mul_vec(&grad(&minus))?[i];
        div_flux += (fp - fm) / (2.0 * h);
    }
    let div_s2 = linalg::matrix_divergence(|_, y| s2(y), 0.0, x, h)?;
    let g = grad(x);
    let inner: f64 = div_s2.iter().zip(&g).map(|(a, b)| a * b).sum();
    Ok((trace - div_flux + inner).abs())
}

impl Shape {
    /// `Scalar` for order one, otherwise a square matrix.
    pub fn from_square(n: usize) -> Shape {
        if n == 1 {
            Shape::Scalar
        } else {
            Shape::Matrix(n, n)
        }
    }

    /// `Scalar` for length one, otherwise a column vector.
    pub fn from_len(n: usize) -> Shape {
        if n == 1 {
            Shape::Scalar
        } else {
            Shape::Vector(n)
        }
    }
}

/// Scalar net for an expression over `domain`: smooth expressions stay
/// closed-form, anything piecewise is mollified with `rescaling`.
pub fn coefficient_net(name: &str, expr: &Expr, domain: &Domain, horizon: f64, rescaling: Rescaling) -> Result<CoefficientNet> {
    let n = domain.dim();
    if expr.is_smooth() {
        return CoefficientNet::closed_form(name, expr.clone(), n);
    }
    let raw = PiecewiseExpr::from_expr(expr, n, SpaceTimeBox::new(horizon, &domain.lower, &domain.upper))?;
    CoefficientNet::mollified(name, Arc::new(raw), rescaling, domain.padded_lower(), domain.padded_upper())
}

/// Convenience constructor for problems whose coefficients are all
/// closed-form constants except those supplied.
pub fn constant_problem(domain: Domain, horizon: f64, r: Matrix) -> Result<WaveProblem> {
    let n = domain.dim();
    let zero = |name: &str| CoefficientNet::scalar_constant(name, n, 0.0);
    let zero_vec = |name: &str| CoefficientNet::constant(name, n, Matrix::zeros(n, 1));
    Ok(WaveProblem {
        domain,
        horizon,
        r: CoefficientNet::constant("R", n, r).assume_spd()?,
        g: zero_vec("g"),
        a: zero("a"),
        b: zero_vec("b"),
        c: zero("c"),
        f: zero("f"),
        u0: zero("u0"),
        u1: zero("u1"),
    })
}

/// Evaluates every coefficient of two problems on a sample and returns the
/// largest absolute difference per coefficient name.
pub fn coefficient_differences(p: &WaveProblem, q: &WaveProblem, sample: &ValidationSample) -> Result<Vec<(String, f64)>> {
    let pairs: [(&str, &CoefficientNet, &CoefficientNet); 8] = [
        ("R", &p.r, &q.r),
        ("g", &p.g, &q.g),
        ("a", &p.a, &q.a),
        ("b", &p.b, &q.b),
        ("c", &p.c, &q.c),
        ("f", &p.f, &q.f),
        ("u0", &p.u0, &q.u0),
        ("u1", &p.u1, &q.u1),
    ];
    let mut out = Vec::new();
    for (name, x, y) in pairs {
        let mut worst: f64 = 0.0;
        sample.for_each(|eps, t, pt| {
            let t = if name.starts_with('u') { 0.0 } else { t };
            let d = x.eval(eps, t, pt)?.zip_with(&y.eval(eps, t, pt)?, |a, b| (a - b).abs())?;
            worst = worst.max(d.max_abs());
            Ok(())
        })?;
        out.push((name.to_string(), worst));
    }
    Ok(out)
}

/// Shared handle to a problem.
pub type SharedProblem = Arc<WaveProblem>;
