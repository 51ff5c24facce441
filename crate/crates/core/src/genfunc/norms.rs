//! Sampled fields and the discrete norm scales.

use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tensor grid of sample points: time levels times spatial axes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    pub times: Vec<f64>,
    pub axes: Vec<Vec<f64>>,
}

impl SampleGrid {
    /// Spatial grid at a single time level.
    pub fn spatial(t: f64, axes: Vec<Vec<f64>>) -> Self {
        SampleGrid { times: vec![t], axes }
    }

    /// `counts[k]` equispaced points on `[lower[k], upper[k]]` per axis.
    pub fn uniform(times: Vec<f64>, lower: &[f64], upper: &[f64], counts: &[usize]) -> Self {
        let axes = lower
            .iter()
            .zip(upper)
            .zip(counts)
            .map(|((&lo, &hi), &n)| linspace(lo, hi, n))
            .collect();
        SampleGrid { times, axes }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn spatial_len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn num_points(&self) -> usize {
        self.times.len() * self.spatial_len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    /// Coordinates of flat point index `idx` (time-major, then row-major
    /// over axes).
    pub fn point(&self, idx: usize) -> (f64, Vec<f64>) {
        let ns = self.spatial_len();
        let t = self.times[idx / ns];
        let mut rem = idx % ns;
        let mut x = vec![0.0; self.dim()];
        for k in (0..self.dim()).rev() {
            let n = self.axes[k].len();
            x[k] = self.axes[k][rem % n];
            rem /= n;
        }
        (t, x)
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.times.len().hash(&mut h);
        for t in &self.times {
            t.to_bits().hash(&mut h);
        }
        for a in &self.axes {
            a.len().hash(&mut h);
            for v in a {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// Field values on a [`SampleGrid`], `ncomp` components per point.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub grid: SampleGrid,
    pub ncomp: usize,
    pub values: Vec<f64>,
}

impl SampledField {
    pub fn new(grid: SampleGrid, ncomp: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_points() * ncomp {
            return Err(Error::Shape(format!(
                "{} values for {} points x {ncomp} components",
                values.len(),
                grid.num_points()
            )));
        }
        Ok(SampledField { grid, ncomp, values })
    }

    pub fn from_fn(grid: SampleGrid, ncomp: usize, f: impl Fn(f64, &[f64]) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(grid.num_points() * ncomp);
        for i in 0..grid.num_points() {
            let (t, x) = grid.point(i);
            values.extend(f(t, &x));
        }
        SampledField { grid, ncomp, values }
    }

    fn slice(&self, it: usize) -> &[f64] {
        let n = self.grid.spatial_len() * self.ncomp;
        &self.values[it * n..(it + 1) * n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `sup_K |∂^α f|`, `|α| ≤ k`.
    WInf,
    /// `(Σ_{|α|≤k} ∫_K |∂^α f|²)^{1/2}`, largest over time levels.
    Sobolev,
    /// `∫₀ᵀ sup_K |f(s,·)| ds`.
    MixedL1Linf,
}

impl NormKind {
    pub fn label(self, order: usize) -> String {
        match self {
            NormKind::WInf if order == 0 => "sup".into(),
            NormKind::WInf => format!("W{order}inf"),
            NormKind::Sobolev => format!("H{order}"),
            NormKind::MixedL1Linf => "L1Linf".into(),
        }
    }
}

/// Axis-aligned compact box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Compact {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Compact {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Compact { lower, upper }
    }

    /// Box scaled about the center of `[lower, upper]` by `frac`.
    pub fn shrunk(lower: &[f64], upper: &[f64], frac: f64) -> Self {
        let (lo, hi) = lower
            .iter()
            .zip(upper)
            .map(|(&l, &u)| {
                let c = 0.5 * (l + u);
                let h = 0.5 * (u - l) * frac;
                (c - h, c + h)
            })
            .unzip();
        Compact { lower: lo, upper: hi }
    }

    pub fn contains(&self, other: &Compact) -> bool {
        self.lower.iter().zip(&other.lower).all(|(a, b)| a <= b)
            && self.upper.iter().zip(&other.upper).all(|(a, b)| a >= b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRequest {
    pub kind: NormKind,
    pub order: usize,
    /// `None` means the whole sampled box.
    pub compact: Option<Compact>,
}

impl NormRequest {
    pub fn sup(compact: Option<Compact>) -> Self {
        NormRequest {
            kind: NormKind::WInf,
            order: 0,
            compact,
        }
    }

    pub fn mixed(compact: Option<Compact>) -> Self {
        NormRequest {
            kind: NormKind::MixedL1Linf,
            order: 0,
            compact,
        }
    }
}

pub const MAX_ORDER: usize = 2;

/// Discrete norm of a sampled field. Derivatives are spatial, by central
/// differences (second-order one-sided at the ends of each axis).
pub fn compute_norm(f: &SampledField, req: &NormRequest) -> Result<f64> {
    if req.order > MAX_ORDER {
        return Err(Error::Norm(format!("derivative order {} exceeds {MAX_ORDER}", req.order)));
    }
    let grid = &f.grid;
    if grid.num_points() == 0 {
        return Err(Error::Norm("empty grid".into()));
    }
    let ranges = compact_ranges(grid, req.compact.as_ref())?;
    if req.order > 0 {
        for (k, a) in grid.axes.iter().enumerate() {
            check_uniform(a).map_err(|m| Error::Norm(format!("axis {}: {m}", k + 1)))?;
        }
    }
    if req.kind == NormKind::MixedL1Linf && grid.times.len() < 2 {
        return Err(Error::Norm("mixed norm needs a space-time field (at least two time levels)".into()));
    }

    let mut per_slice = Vec::with_capacity(grid.times.len());
    for it in 0..grid.times.len() {
        let derivs = derivative_family(f.slice(it), grid, f.ncomp, req.order);
        let v = match req.kind {
            NormKind::WInf | NormKind::MixedL1Linf => derivs
                .iter()
                .map(|d| masked_sup(d, grid, f.ncomp, &ranges))
                .fold(0.0, f64::max),
            NormKind::Sobolev => derivs
                .iter()
                .map(|d| masked_l2_sq(d, grid, f.ncomp, &ranges))
                .sum::<f64>()
                .sqrt(),
        };
        per_slice.push(v);
    }
    Ok(match req.kind {
        NormKind::MixedL1Linf => trapezoid(&grid.times, &per_slice),
        _ => per_slice.into_iter().fold(0.0, f64::max),
    })
}

fn check_uniform(a: &[f64]) -> std::result::Result<f64, String> {
    if a.len() < 3 {
        return Err("derivatives need at least three points".into());
    }
    let h = (a[a.len() - 1] - a[0]) / (a.len() - 1) as f64;
    for w in a.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs() {
            return Err("derivatives need a uniform axis".into());
        }
    }
    Ok(h)
}

fn compact_ranges(grid: &SampleGrid, k: Option<&Compact>) -> Result<Vec<(usize, usize)>> {
    let Some(k) = k else {
        return Ok(grid.axes.iter().map(|a| (0, a.len() - 1)).collect());
    };
    if k.lower.len() != grid.dim() || k.upper.len() != grid.dim() {
        return Err(Error::Norm("compact set dimension differs from the grid".into()));
    }
    let mut out = Vec::with_capacity(grid.dim());
    for (j, a) in grid.axes.iter().enumerate() {
        let (lo, hi) = (k.lower[j], k.upper[j]);
        let span = (a[a.len() - 1] - a[0]).abs().max(1.0);
        let tol = 1e-12 * span;
        if lo > hi || lo < a[0] - tol || hi > a[a.len() - 1] + tol {
            return Err(Error::Norm(format!(
                "compact [{lo}, {hi}] on axis {} lies outside the sampled grid [{}, {}]",
                j + 1,
                a[0],
                a[a.len() - 1]
            )));
        }
        let i0 = a.partition_point(|&v| v < lo - tol);
        let i1 = a.partition_point(|&v| v <= hi + tol);
        if i1 <= i0 {
            return Err(Error::Norm(format!("compact on axis {} contains no grid point", j + 1)));
        }
        out.push((i0, i1 - 1));
    }
    Ok(out)
}

/// All spatial derivatives of orders `0..=order` of one time slice.
fn derivative_family(slice: &[f64], grid: &SampleGrid, ncomp: usize, order: usize) -> Vec<Vec<f64>> {
    let mut out = vec![slice.to_vec()];
    if order == 0 {
        return out;
    }
    let shape = grid.shape();
    let firsts: Vec<Vec<f64>> = (0..grid.dim())
        .map(|j| diff_axis(slice, &shape, ncomp, j, grid.axes[j][1] - grid.axes[j][0]))
        .collect();
    if order >= 2 {
        for j in 0..grid.dim() {
            for l in j..grid.dim() {
                let h = grid.axes[l][1] - grid.axes[l][0];
                out.push(diff_axis(&firsts[j], &shape, ncomp, l, h));
            }
        }
    }
    out.extend(firsts);
    out
}

fn diff_axis(v: &[f64], shape: &[usize], ncomp: usize, axis: usize, h: f64) -> Vec<f64> {
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product::<usize>() * ncomp;
    let mut out = vec![0.0; v.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let i = (idx / stride) % n;
        let at = |k: usize| v[idx - i * stride + k * stride];
        *o = if i == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
        } else {
            (at(i + 1) - at(i - 1)) / (2.0 * h)
        };
    }
    out
}

fn for_each_in_ranges(shape: &[usize], ranges: &[(usize, usize)], mut f: impl FnMut(usize, &[usize])) {
    let d = shape.len();
    let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
    loop {
        let mut flat = 0;
        for k in 0..d {
            flat = flat * shape[k] + idx[k];
        }
        f(flat, &idx);
        let mut k = d;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] <= ranges[k].1 {
                break;
            }
            idx[k] = ranges[k].0;
        }
    }
}

fn masked_sup(v: &[f64], grid: &SampleGrid, ncomp: usize, ranges: &[(usize, usize)]) -> f64 {
    let mut m: f64 = 0.0;
    for_each_in_ranges(&grid.shape(), ranges, |flat, _| {
        for c in 0..ncomp {
            let x = v[flat * ncomp + c].abs();
            // NaN must not be swallowed by max
            m = if x.is_nan() { f64::NAN } else { m.max(x) };
        }
    });
    m
}

fn masked_l2_sq(v: &[f64], grid: &SampleGrid, ncomp: usize, ranges: &[(usize, usize)]) -> f64 {
    let weights: Vec<Vec<f64>> = grid
        .axes
        .iter()
        .zip(ranges)
        .map(|(a, &(i0, i1))| trapezoid_weights(&a[i0..=i1]))
        .collect();
    let mut s = 0.0;
    for_each_in_ranges(&grid.shape(), ranges, |flat, idx| {
        let w: f64 = idx
            .iter()
            .zip(ranges)
            .zip(&weights)
            .map(|((&i, r), w)| w[i - r.0])
            .product();
        for c in 0..ncomp {
            let x = v[flat * ncomp + c];
            s += w * x * x;
        }
    });
    s
}

pub fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = 0.5 * (x[i + 1] - x[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    trapezoid_weights(x).iter().zip(y).map(|(w, v)| w * v).sum()
}
