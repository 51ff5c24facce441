//! Compact bump mollifiers and quadrature convolution of piecewise
//! polynomial fields.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::expr::{PiecewiseExpr, MAX_VARS};
use crate::error::{Error, Result};

/// Support radius of the unscaled profile.
pub const PROFILE_RADIUS: f64 = 1.0;
/// Gauss–Legendre nodes per panel.
pub const QUAD_NODES: usize = 32;
/// Tolerated deviation of the discrete kernel mass from one.
pub const MASS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rescaling {
    /// Width `ε·r₀`.
    Model,
    /// Width `r₀ / log(1/ε)`.
    Log,
}

impl std::str::FromStr for Rescaling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model" => Ok(Rescaling::Model),
            "log" => Ok(Rescaling::Log),
            other => Err(Error::Config(format!("unknown mollifier '{other}' (model|log)"))),
        }
    }
}

impl std::fmt::Display for Rescaling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Rescaling::Model => "model",
            Rescaling::Log => "log",
        })
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn gl32() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre(QUAD_NODES))
}

fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// Normalizing constant `C_d` of the profile in dimension `d`, by a
/// composite radial quadrature.
pub fn profile_constant(d: usize) -> f64 {
    static CONSTS: OnceLock<[f64; 5]> = OnceLock::new();
    CONSTS.get_or_init(|| {
        let (x, w) = gl32();
        let mut out = [0.0; 5];
        for (dim, slot) in out.iter_mut().enumerate().skip(1) {
            let panels = 64;
            let mut s = 0.0;
            for k in 0..panels {
                let a = k as f64 / panels as f64;
                let b = (k + 1) as f64 / panels as f64;
                for (xi, wi) in x.iter().zip(w) {
                    let r = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                    s += 0.5 * (b - a) * wi * bump(r * r) * r.powi(dim as i32 - 1);
                }
            }
            *slot = 1.0 / (sphere_area(dim) * s);
        }
        out
    })[d]
}

fn sphere_area(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        _ => unreachable!("dimension checked on construction"),
    }
}

/// Panels per axis so that the tensor rule resolves the bump.
fn panels_for(d: usize) -> usize {
    match d {
        1 => 8,
        2 | 3 => 4,
        _ => 2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mollifier {
    pub rescaling: Rescaling,
    /// Number of convolved axes.
    pub dim: usize,
}

impl Mollifier {
    pub fn new(rescaling: Rescaling, dim: usize) -> Result<Self> {
        if !(1..=4).contains(&dim) {
            return Err(Error::Config(format!("mollifier dimension {dim} not in 1..=4")));
        }
        Ok(Mollifier { rescaling, dim })
    }

    pub fn check_eps(eps: f64) -> Result<()> {
        if eps > 0.0 && eps <= 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("eps={eps} outside (0, 1]")))
        }
    }

    pub fn support_radius(&self, eps: f64) -> Result<f64> {
        Self::check_eps(eps)?;
        match self.rescaling {
            Rescaling::Model => Ok(eps * PROFILE_RADIUS),
            Rescaling::Log => {
                let gamma = (1.0 / eps).ln();
                if gamma <= 0.0 {
                    return Err(Error::Config("log rescaling needs eps < 1".into()));
                }
                Ok(PROFILE_RADIUS / gamma)
            }
        }
    }

    /// Kernel value `ψ_ε(y)`.
    pub fn density(&self, eps: f64, y: &[f64]) -> Result<f64> {
        let r = self.support_radius(eps)?;
        let r2: f64 = y.iter().map(|v| v * v).sum::<f64>() / (r * r);
        Ok(profile_constant(self.dim) * bump(r2) / r.powi(self.dim as i32))
    }

    /// Tensor quadrature of `ψ_ε` over its support with the analytic
    /// normalizing constant.
    pub fn mass(&self, eps: f64) -> Result<f64> {
        let r = self.support_radius(eps)?;
        let nodes = panel_nodes(-r, r, panels_for(self.dim));
        let c = profile_constant(self.dim) / r.powi(self.dim as i32);
        let mut total = 0.0;
        let mut idx = vec![0usize; self.dim];
        loop {
            let mut w = c;
            let mut r2 = 0.0;
            for &i in idx.iter() {
                w *= nodes[i].1;
                r2 += nodes[i].0 * nodes[i].0;
            }
            total += w * bump(r2 / (r * r));
            if !advance(&mut idx, nodes.len()) {
                break;
            }
        }
        Ok(total)
    }

    /// `(raw ∗ ψ_ε)(t, x)`. Time is convolved only when the raw field
    /// depends on it. `padded` bounds where the stencil may reach.
    pub fn convolve(
        &self,
        raw: &PiecewiseExpr,
        eps: f64,
        padded_lower: &[f64],
        padded_upper: &[f64],
        t: f64,
        x: &[f64],
    ) -> Result<f64> {
        let r = self.support_radius(eps)?;
        let n = raw.dim();
        let mut axes: Vec<usize> = Vec::with_capacity(MAX_VARS);
        if self.dim == n + 1 {
            axes.push(0);
        }
        axes.extend(1..=n);
        if axes.len() != self.dim {
            return Err(Error::Config(format!(
                "mollifier dimension {} does not match field dimension {n}",
                self.dim
            )));
        }
        for k in 0..n {
            if x[k] - r < padded_lower[k] - 1e-12 || x[k] + r > padded_upper[k] + 1e-12 {
                return Err(Error::Domain(format!(
                    "mollifier support around x{}={} (radius {r:e}) leaves the padded box [{}, {}]",
                    k + 1,
                    x[k],
                    padded_lower[k],
                    padded_upper[k]
                )));
            }
        }
        let mut p = [0.0; MAX_VARS];
        p[0] = t;
        p[1..=n].copy_from_slice(&x[..n]);

        // per-axis sub-intervals split at raw breakpoints
        let mut pieces: Vec<Vec<(f64, f64)>> = Vec::with_capacity(axes.len());
        for &a in &axes {
            let lo = p[a] - r;
            let hi = p[a] + r;
            let mut cuts = vec![lo];
            cuts.extend(raw.breakpoints(a).iter().copied().filter(|&b| b > lo && b < hi));
            cuts.push(hi);
            pieces.push(cuts.windows(2).map(|w| (w[0], w[1])).collect());
        }

        if pieces.iter().all(|v| v.len() == 1) && raw.poly_at(&p).degree() <= 1 {
            return Ok(raw.eval_packed(&p));
        }

        let panels = panels_for(self.dim);
        let inv_r2 = 1.0 / (r * r);
        let mut num = 0.0;
        let mut den = 0.0;
        let mut cell = vec![0usize; axes.len()];
        let ncells: Vec<usize> = pieces.iter().map(Vec::len).collect();
        loop {
            let mut mid = p;
            for (j, &a) in axes.iter().enumerate() {
                let (lo, hi) = pieces[j][cell[j]];
                mid[a] = 0.5 * (lo + hi);
            }
            let poly = raw.poly_at(&mid);
            // panels are split proportionally to the piece length
            let nodes: Vec<Vec<(f64, f64)>> = axes
                .iter()
                .enumerate()
                .map(|(j, _)| {
                    let (lo, hi) = pieces[j][cell[j]];
                    let k = ((panels as f64 * (hi - lo) / (2.0 * r)).ceil() as usize).max(1);
                    panel_nodes(lo, hi, k)
                })
                .collect();
            let lens: Vec<usize> = nodes.iter().map(Vec::len).collect();
            let mut idx = vec![0usize; axes.len()];
            loop {
                let mut q = p;
                let mut w = 1.0;
                let mut d2 = 0.0;
                for (j, &a) in axes.iter().enumerate() {
                    let (qa, wa) = nodes[j][idx[j]];
                    q[a] = qa;
                    w *= wa;
                    d2 += (qa - p[a]) * (qa - p[a]);
                }
                let k = w * bump(d2 * inv_r2);
                if k > 0.0 {
                    num += k * poly.eval(&raw.clamp(&q));
                    den += k;
                }
                if !advance_mixed(&mut idx, &lens) {
                    break;
                }
            }
            if !advance_mixed(&mut cell, &ncells) {
                break;
            }
        }
        if den <= 0.0 {
            return Err(Error::Config("mollifier quadrature has zero mass".into()));
        }
        Ok(num / den)
    }
}

fn panel_nodes(lo: f64, hi: f64, panels: usize) -> Vec<(f64, f64)> {
    let (x, w) = gl32();
    let mut out = Vec::with_capacity(panels * QUAD_NODES);
    let step = (hi - lo) / panels as f64;
    for k in 0..panels {
        let a = lo + k as f64 * step;
        let b = if k + 1 == panels { hi } else { a + step };
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (xi, wi) in x.iter().zip(w) {
            out.push((mid + half * xi, half * wi));
        }
    }
    out
}

fn advance(idx: &mut [usize], len: usize) -> bool {
    for i in idx.iter_mut().rev() {
        *i += 1;
        if *i < len {
            return true;
        }
        *i = 0;
    }
    false
}

fn advance_mixed(idx: &mut [usize], lens: &[usize]) -> bool {
    for (i, &len) in idx.iter_mut().zip(lens).rev() {
        *i += 1;
        if *i < len {
            return true;
        }
        *i = 0;
    }
    false
}

/// Default geometric sweep `2⁻⁴ … 2⁻¹⁴`.
pub fn default_sweep() -> Vec<f64> {
    (4..=14).map(|k| 2f64.powi(-k)).collect()
}
