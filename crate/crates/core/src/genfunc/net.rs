//! ε-indexed coefficient fields.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;

use super::expr::{pack, Expr, PiecewiseExpr};
use super::mollifier::{Mollifier, Rescaling};
use super::norms::{SampleGrid, SampledField};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, SymMatrix};

/// Finite-difference step for derivatives of smooth nets.
pub const FD_STEP: f64 = 1e-5;
/// Derivative steps never exceed this fraction of the feature width.
pub const FD_STEPS_PER_WIDTH: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Shape {
    Scalar,
    Vector(usize),
    Matrix(usize, usize),
}

impl Shape {
    pub fn dims(self) -> (usize, usize) {
        match self {
            Shape::Scalar => (1, 1),
            Shape::Vector(n) => (n, 1),
            Shape::Matrix(r, c) => (r, c),
        }
    }

    pub fn len(self) -> usize {
        let (r, c) = self.dims();
        r * c
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    fn from_dims(r: usize, c: usize) -> Shape {
        match (r, c) {
            (1, 1) => Shape::Scalar,
            (n, 1) => Shape::Vector(n),
            (r, c) => Shape::Matrix(r, c),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Scalar => write!(f, "scalar"),
            Shape::Vector(n) => write!(f, "vector[{n}]"),
            Shape::Matrix(r, c) => write!(f, "matrix[{r}x{c}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Mollified,
    ClosedForm,
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetOp {
    Add,
    Sub,
    Mul,
    MatMul,
    InverseSpd,
}

type Evaluator = dyn Fn(f64, f64, &[f64]) -> Result<Matrix> + Send + Sync;
type Cache = Mutex<HashMap<(u64, u64), Arc<SampledField>>>;

/// An ε-indexed family of smooth fields on space-time. Values are
/// matrices; scalars are 1×1 and vectors are columns.
#[derive(Clone)]
pub struct CoefficientNet {
    name: String,
    shape: Shape,
    dim: usize,
    provenance: Provenance,
    spd: bool,
    time_dependent: bool,
    eps_dependent: bool,
    mollifiers: Vec<Mollifier>,
    breakpoints: Vec<Vec<f64>>,
    eval: Arc<Evaluator>,
    cache: Arc<Cache>,
}

impl fmt::Debug for CoefficientNet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientNet")
            .field("name", &self.name)
            .field("shape", &self.shape)
            .field("dim", &self.dim)
            .field("provenance", &self.provenance)
            .field("spd", &self.spd)
            .field("time_dependent", &self.time_dependent)
            .finish()
    }
}

impl CoefficientNet {
    fn build(
        name: impl Into<String>,
        shape: Shape,
        dim: usize,
        provenance: Provenance,
        eval: Arc<Evaluator>,
    ) -> Self {
        CoefficientNet {
            name: name.into(),
            shape,
            dim,
            provenance,
            spd: false,
            time_dependent: true,
            eps_dependent: true,
            mollifiers: Vec::new(),
            breakpoints: vec![Vec::new(); dim],
            eval,
            cache: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    /// Net given by an arbitrary evaluator.
    pub fn from_fn<F>(name: impl Into<String>, shape: Shape, dim: usize, time_dependent: bool, f: F) -> Self
    where
        F: Fn(f64, f64, &[f64]) -> Result<Matrix> + Send + Sync + 'static,
    {
        let mut net = Self::build(name, shape, dim, Provenance::ClosedForm, Arc::new(f));
        net.time_dependent = time_dependent;
        net
    }

    pub fn constant(name: impl Into<String>, dim: usize, value: Matrix) -> Self {
        let shape = Shape::from_dims(value.rows(), value.cols());
        let mut net = Self::build(
            name,
            shape,
            dim,
            Provenance::ClosedForm,
            Arc::new(move |_, _, _| Ok(value.clone())),
        );
        net.time_dependent = false;
        net.eps_dependent = false;
        net
    }

    pub fn scalar_constant(name: impl Into<String>, dim: usize, v: f64) -> Self {
        Self::constant(name, dim, Matrix::diag(&[v]))
    }

    /// The net `ε ↦ ε^m` (constant in space and time).
    pub fn planted_power(dim: usize, m: f64) -> Self {
        let mut net = Self::build(
            format!("eps^{m}"),
            Shape::Scalar,
            dim,
            Provenance::ClosedForm,
            Arc::new(move |eps, _, _| Ok(Matrix::diag(&[eps.powf(m)]))),
        );
        net.time_dependent = false;
        net
    }

    /// ε-independent net from a smooth closed-form expression.
    pub fn closed_form(name: impl Into<String>, expr: Expr, dim: usize) -> Result<Self> {
        if let Some(v) = expr.max_var() {
            if v > dim {
                return Err(Error::Expr {
                    column: 1,
                    message: format!("expression uses a coordinate beyond dimension {dim}"),
                });
            }
        }
        let time_dependent = expr.uses_var(0);
        let mut net = Self::build(
            name,
            Shape::Scalar,
            dim,
            Provenance::ClosedForm,
            Arc::new(move |_, t, x| Ok(Matrix::diag(&[expr.eval(&pack(t, x))]))),
        );
        net.time_dependent = time_dependent;
        net.eps_dependent = false;
        Ok(net)
    }

    /// ε-independent net evaluating a piecewise field directly, without
    /// smoothing.
    pub fn unmollified(name: impl Into<String>, raw: Arc<PiecewiseExpr>) -> Self {
        let dim = raw.dim();
        let time_dependent = raw.is_time_dependent();
        let breakpoints = interior_breakpoints(&raw);
        let mut net = Self::build(
            name,
            Shape::Scalar,
            dim,
            Provenance::ClosedForm,
            Arc::new(move |_, t, x| Ok(Matrix::diag(&[raw.eval(t, x)]))),
        );
        net.time_dependent = time_dependent;
        net.eps_dependent = false;
        net.breakpoints = breakpoints;
        net
    }

    /// `(raw ∗ ψ_ε)`, with the mollifier stencil confined to
    /// `[padded_lower, padded_upper]`. Time is mollified only for
    /// time-dependent raw data.
    pub fn mollified(
        name: impl Into<String>,
        raw: Arc<PiecewiseExpr>,
        rescaling: Rescaling,
        padded_lower: Vec<f64>,
        padded_upper: Vec<f64>,
    ) -> Result<Self> {
        let dim = raw.dim();
        let time_dependent = raw.is_time_dependent();
        let m = Mollifier::new(rescaling, if time_dependent { dim + 1 } else { dim })?;
        let breakpoints = interior_breakpoints(&raw);
        let mut net = Self::build(
            name,
            Shape::Scalar,
            dim,
            Provenance::Mollified,
            Arc::new(move |eps, t, x| {
                let v = m.convolve(&raw, eps, &padded_lower, &padded_upper, t, x)?;
                Ok(Matrix::diag(&[v]))
            }),
        );
        net.time_dependent = time_dependent;
        net.mollifiers = vec![m];
        net.breakpoints = breakpoints;
        Ok(net)
    }

    /// Matrix or vector net assembled from scalar entry nets (row-major).
    pub fn from_entries(name: impl Into<String>, rows: usize, cols: usize, entries: Vec<CoefficientNet>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!("{} entries for a {rows}x{cols} net", entries.len())));
        }
        if let Some(e) = entries.iter().find(|e| e.shape != Shape::Scalar) {
            return Err(Error::Shape(format!("entry '{}' is not scalar", e.name)));
        }
        let dim = entries.first().map_or(0, |e| e.dim);
        let mut net = Self::derived_from(name, Shape::from_dims(rows, cols), dim, &entries.iter().collect::<Vec<_>>(), {
            let entries = entries.clone();
            move |eps, t, x| {
                let mut m = Matrix::zeros(rows, cols);
                for (k, e) in entries.iter().enumerate() {
                    m[(k / cols, k % cols)] = e.eval(eps, t, x)?[(0, 0)];
                }
                Ok(m)
            }
        });
        if entries.iter().all(|e| e.provenance == Provenance::ClosedForm) {
            net.provenance = Provenance::ClosedForm;
        }
        Ok(net)
    }

    fn derived_from<F>(name: impl Into<String>, shape: Shape, dim: usize, parents: &[&CoefficientNet], f: F) -> Self
    where
        F: Fn(f64, f64, &[f64]) -> Result<Matrix> + Send + Sync + 'static,
    {
        let mut net = Self::build(name, shape, dim, Provenance::Derived, Arc::new(f));
        net.time_dependent = parents.iter().any(|p| p.time_dependent);
        net.eps_dependent = parents.iter().any(|p| p.eps_dependent);
        let mut ms: Vec<Mollifier> = parents.iter().flat_map(|p| p.mollifiers.iter().copied()).collect();
        ms.dedup();
        net.mollifiers = ms;
        for k in 0..dim {
            let mut b: Vec<f64> = parents
                .iter()
                .flat_map(|p| p.breakpoints.get(k).into_iter().flatten().copied())
                .collect();
            b.sort_by(f64::total_cmp);
            b.dedup();
            net.breakpoints[k] = b;
        }
        net
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn is_spd(&self) -> bool {
        self.spd
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn is_eps_dependent(&self) -> bool {
        self.eps_dependent
    }

    /// Interior breakpoints of the underlying raw data along spatial axis `k`.
    pub fn breakpoints(&self, k: usize) -> &[f64] {
        &self.breakpoints[k]
    }

    /// Marks a square matrix net as SPD; sampling then checks it.
    pub fn assume_spd(mut self) -> Result<Self> {
        match self.shape {
            Shape::Scalar => {}
            Shape::Matrix(r, c) if r == c => {}
            s => return Err(Error::Shape(format!("{s} net cannot be SPD"))),
        }
        self.spd = true;
        Ok(self)
    }

    /// Smallest mollifier support radius at `eps`, infinite for smooth nets.
    pub fn feature_scale(&self, eps: f64) -> f64 {
        self.mollifiers
            .iter()
            .filter_map(|m| m.support_radius(eps).ok())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn fd_step(&self, eps: f64) -> f64 {
        FD_STEP.min(self.feature_scale(eps) / FD_STEPS_PER_WIDTH)
    }

    pub fn eval(&self, eps: f64, t: f64, x: &[f64]) -> Result<Matrix> {
        let v = (self.eval)(eps, t, x)?;
        if !v.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(v)
    }

    pub fn eval_scalar(&self, eps: f64, t: f64, x: &[f64]) -> Result<f64> {
        Ok(self.eval(eps, t, x)?[(0, 0)])
    }

    pub fn eval_vec(&self, eps: f64, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval(eps, t, x)?.as_slice().to_vec())
    }

    /// Samples on `grid`, cached per `(eps, grid)`. SPD-tagged nets are
    /// checked at every point.
    pub fn sample(&self, eps: f64, grid: &SampleGrid) -> Result<Arc<SampledField>> {
        let key = (eps.to_bits(), grid.fingerprint());
        if let Some(f) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(f.clone());
        }
        let ncomp = self.shape.len();
        let chunks: Vec<Vec<f64>> = (0..grid.num_points())
            .into_par_iter()
            .map(|i| {
                let (t, x) = grid.point(i);
                let v = self.eval(eps, t, &x)?;
                if self.spd && v.rows() > 1 {
                    let s = SymMatrix::from_matrix(&v, 1e-12 * v.frobenius().max(1.0))?;
                    linalg::spd_inverse(&s)?;
                } else if self.spd && v[(0, 0)] <= 0.0 {
                    return Err(Error::NotSpd {
                        min_eigenvalue: v[(0, 0)],
                        floor: 0.0,
                    });
                }
                Ok(v.as_slice().to_vec())
            })
            .collect::<Result<_>>()
            .map_err(|e| e.at_eps(eps))?;
        let field = Arc::new(SampledField::new(grid.clone(), ncomp, chunks.concat())?);
        self.cache
            .lock()
            .expect("cache poisoned")
            .entry(key)
            .or_insert_with(|| field.clone());
        Ok(field)
    }

    // ---- arithmetic -------------------------------------------------------

    fn check_same(&self, other: &CoefficientNet, what: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "{what} of {} '{}' and {} '{}'",
                self.shape, self.name, other.shape, other.name
            )));
        }
        if self.dim != other.dim {
            return Err(Error::Shape(format!("{what} of nets in dimensions {} and {}", self.dim, other.dim)));
        }
        Ok(())
    }

    pub fn add(&self, other: &CoefficientNet) -> Result<CoefficientNet> {
        self.check_same(other, "sum")?;
        let (a, b) = (self.clone(), other.clone());
        Ok(Self::derived_from(
            format!("({} + {})", self.name, other.name),
            self.shape,
            self.dim,
            &[self, other],
            move |eps, t, x| a.eval(eps, t, x)?.zip_with(&b.eval(eps, t, x)?, |p, q| p + q),
        ))
    }

    pub fn sub(&self, other: &CoefficientNet) -> Result<CoefficientNet> {
        self.check_same(other, "difference")?;
        let (a, b) = (self.clone(), other.clone());
        Ok(Self::derived_from(
            format!("({} - {})", self.name, other.name),
            self.shape,
            self.dim,
            &[self, other],
            move |eps, t, x| a.eval(eps, t, x)?.zip_with(&b.eval(eps, t, x)?, |p, q| p - q),
        ))
    }

    /// Scalar times any net, or the entrywise product of equal shapes.
    pub fn mul(&self, other: &CoefficientNet) -> Result<CoefficientNet> {
        if self.dim != other.dim {
            return Err(Error::Shape("product of nets in different dimensions".into()));
        }
        let shape = match (self.shape, other.shape) {
            (Shape::Scalar, s) | (s, Shape::Scalar) => s,
            (s, t) if s == t => s,
            (s, t) => return Err(Error::Shape(format!("entrywise product of {s} and {t}"))),
        };
        let (a, b) = (self.clone(), other.clone());
        Ok(Self::derived_from(
            format!("({} * {})", self.name, other.name),
            shape,
            self.dim,
            &[self, other],
            move |eps, t, x| {
                let p = a.eval(eps, t, x)?;
                let q = b.eval(eps, t, x)?;
                if a.shape == Shape::Scalar {
                    Ok(q.scale(p[(0, 0)]))
                } else if b.shape == Shape::Scalar {
                    Ok(p.scale(q[(0, 0)]))
                } else {
                    p.zip_with(&q, |u, v| u * v)
                }
            },
        ))
    }

    pub fn matmul(&self, other: &CoefficientNet) -> Result<CoefficientNet> {
        let (r, k) = self.shape.dims();
        let (k2, c) = other.shape.dims();
        if k != k2 || self.dim != other.dim {
            return Err(Error::Shape(format!("matrix product of {} and {}", self.shape, other.shape)));
        }
        let (a, b) = (self.clone(), other.clone());
        Ok(Self::derived_from(
            format!("({} . {})", self.name, other.name),
            Shape::from_dims(r, c),
            self.dim,
            &[self, other],
            move |eps, t, x| a.eval(eps, t, x)?.matmul(&b.eval(eps, t, x)?),
        ))
    }

    pub fn scale(&self, s: f64) -> CoefficientNet {
        let a = self.clone();
        let mut net = Self::derived_from(
            format!("{s} * {}", self.name),
            self.shape,
            self.dim,
            &[self],
            move |eps, t, x| Ok(a.eval(eps, t, x)?.scale(s)),
        );
        net.spd = self.spd && s > 0.0;
        net
    }

    pub fn transpose(&self) -> CoefficientNet {
        let (r, c) = self.shape.dims();
        let a = self.clone();
        let mut net = Self::derived_from(
            format!("{}^T", self.name),
            Shape::from_dims(c, r),
            self.dim,
            &[self],
            move |eps, t, x| Ok(a.eval(eps, t, x)?.transpose()),
        );
        net.spd = self.spd;
        net
    }

    /// Inverse of an SPD-tagged net.
    pub fn inverse_spd(&self) -> Result<CoefficientNet> {
        if !self.spd {
            return Err(Error::Config(format!("inverse requested for '{}', which is not tagged SPD", self.name)));
        }
        let a = self.clone();
        let mut net = Self::derived_from(
            format!("inv({})", self.name),
            self.shape,
            self.dim,
            &[self],
            move |eps, t, x| {
                let m = a.eval(eps, t, x)?;
                let s = SymMatrix::from_matrix(&m, 1e-12 * m.frobenius().max(1.0))?;
                Ok(linalg::spd_inverse(&s)?.into_matrix())
            },
        );
        net.spd = true;
        Ok(net)
    }

    /// Pointwise SPD square root of a square matrix net.
    pub fn spd_sqrt(&self) -> Result<CoefficientNet> {
        let (r, c) = self.shape.dims();
        if r != c {
            return Err(Error::Shape(format!("square root of {}", self.shape)));
        }
        let a = self.clone();
        let mut net = Self::derived_from(
            format!("sqrt({})", self.name),
            self.shape,
            self.dim,
            &[self],
            move |eps, t, x| {
                let m = a.eval(eps, t, x)?;
                let s = SymMatrix::from_matrix(&m, 1e-12 * m.frobenius().max(1.0))?;
                Ok(linalg::spd_sqrt(&s)?.into_matrix())
            },
        );
        net.spd = true;
        Ok(net)
    }

    pub fn entry(&self, i: usize, j: usize) -> Result<CoefficientNet> {
        let (r, c) = self.shape.dims();
        if i >= r || j >= c {
            return Err(Error::Shape(format!("entry ({i},{j}) of {}", self.shape)));
        }
        let a = self.clone();
        Ok(Self::derived_from(
            format!("{}[{i},{j}]", self.name),
            Shape::Scalar,
            self.dim,
            &[self],
            move |eps, t, x| Ok(Matrix::diag(&[a.eval(eps, t, x)?[(i, j)]])),
        ))
    }

    // ---- derivatives ------------------------------------------------------

    /// Central-difference partial derivative; axis 0 is time, `k ≥ 1` the
    /// spatial coordinate `x_k`.
    pub fn partial(&self, axis: usize) -> Result<CoefficientNet> {
        if axis > self.dim {
            return Err(Error::Shape(format!("axis {axis} in dimension {}", self.dim)));
        }
        let a = self.clone();
        let mut net = Self::derived_from(
            format!("d{axis}({})", self.name),
            self.shape,
            self.dim,
            &[self],
            move |eps, t, x| {
                let h = a.fd_step(eps);
                if axis == 0 {
                    return linalg::matrix_time_derivative(|t, x| a.eval(eps, t, x), t, x, h);
                }
                let mut xp = x.to_vec();
                xp[axis - 1] = x[axis - 1] + h;
                let plus = a.eval(eps, t, &xp)?;
                xp[axis - 1] = x[axis - 1] - h;
                let minus = a.eval(eps, t, &xp)?;
                plus.zip_with(&minus, |p, m| (p - m) / (2.0 * h))
            },
        );
        if axis == 0 && !self.time_dependent {
            net.time_dependent = false;
        }
        Ok(net)
    }

    pub fn time_derivative(&self) -> Result<CoefficientNet> {
        self.partial(0)
    }

    /// Row divergence of an n×n matrix net.
    pub fn divergence(&self) -> Result<CoefficientNet> {
        let (r, c) = self.shape.dims();
        if c != self.dim {
            return Err(Error::Shape(format!("divergence of {} in dimension {}", self.shape, self.dim)));
        }
        let a = self.clone();
        Ok(Self::derived_from(
            format!("Div({})", self.name),
            Shape::from_dims(r, 1),
            self.dim,
            &[self],
            move |eps, t, x| {
                let h = a.fd_step(eps);
                let d = linalg::matrix_divergence(|t, x| a.eval(eps, t, x), t, x, h)?;
                Ok(Matrix::from_fn(r, 1, |i, _| d[i]))
            },
        ))
    }

    /// All first partials of all entries stacked into one vector; the time
    /// partials are included for time-dependent nets.
    pub fn differential(&self) -> Result<CoefficientNet> {
        let axes: Vec<usize> = if self.time_dependent {
            (0..=self.dim).collect()
        } else {
            (1..=self.dim).collect()
        };
        self.stacked_partials(axes, format!("d({})", self.name))
    }

    /// Spatial first partials of all entries, stacked.
    pub fn spatial_differential(&self) -> Result<CoefficientNet> {
        self.stacked_partials((1..=self.dim).collect(), format!("{}'", self.name))
    }

    fn stacked_partials(&self, axes: Vec<usize>, name: String) -> Result<CoefficientNet> {
        let parts: Vec<CoefficientNet> = axes.iter().map(|&k| self.partial(k)).collect::<Result<_>>()?;
        let len = self.shape.len();
        let total = len * parts.len();
        let mut net = Self::derived_from(
            name,
            Shape::Vector(total),
            self.dim,
            &[self],
            move |eps, t, x| {
                let mut out = Matrix::zeros(total, 1);
                for (k, p) in parts.iter().enumerate() {
                    for (i, v) in p.eval(eps, t, x)?.as_slice().iter().enumerate() {
                        out[(k * len + i, 0)] = *v;
                    }
                }
                Ok(out)
            },
        );
        net.time_dependent = self.time_dependent;
        Ok(net)
    }
}

fn interior_breakpoints(raw: &PiecewiseExpr) -> Vec<Vec<f64>> {
    (1..=raw.dim())
        .map(|k| {
            let b = raw.breakpoints(k);
            if b.len() > 2 {
                b[1..b.len() - 1].to_vec()
            } else {
                Vec::new()
            }
        })
        .collect()
}

/// ε-wise algebra of nets.
pub fn net_arithmetic(a: &CoefficientNet, b: Option<&CoefficientNet>, op: NetOp) -> Result<CoefficientNet> {
    if op == NetOp::InverseSpd {
        return a.inverse_spd();
    }
    let b = b.ok_or_else(|| Error::Config(format!("{op:?} needs two operands")))?;
    match op {
        NetOp::Add => a.add(b),
        NetOp::Sub => a.sub(b),
        NetOp::Mul => a.mul(b),
        _ => a.matmul(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfunc::expr::SpaceTimeBox;

    fn heaviside(rescaling: Rescaling) -> CoefficientNet {
        let raw = PiecewiseExpr::from_expr(&Expr::parse("H(x)").unwrap(), 1, SpaceTimeBox::new(1.0, &[-2.0], &[2.0]))
            .unwrap();
        CoefficientNet::mollified("H", Arc::new(raw), rescaling, vec![-4.0], vec![4.0]).unwrap()
    }

    #[test]
    fn constant_product() {
        let a = CoefficientNet::scalar_constant("a", 1, 2.0);
        let b = CoefficientNet::scalar_constant("b", 1, 3.0);
        let c = net_arithmetic(&a, Some(&b), NetOp::Mul).unwrap();
        assert_eq!(c.eval_scalar(0.1, 0.0, &[0.3]).unwrap(), 6.0);
        assert_eq!(c.provenance(), Provenance::Derived);
    }

    #[test]
    fn spd_inverse_of_diag() {
        let r = CoefficientNet::constant("R", 2, Matrix::diag(&[4.0, 9.0])).assume_spd().unwrap();
        let inv = net_arithmetic(&r, None, NetOp::InverseSpd).unwrap();
        let m = inv.eval(0.5, 0.0, &[0.0, 0.0]).unwrap();
        assert!((m[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((m[(1, 1)] - 1.0 / 9.0).abs() < 1e-15);
        assert!(m[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn inverse_requires_spd_tag() {
        let r = CoefficientNet::constant("R", 2, Matrix::diag(&[4.0, 9.0]));
        assert!(matches!(r.inverse_spd(), Err(Error::Config(_))));
    }

    #[test]
    fn shape_mismatch() {
        let a = CoefficientNet::constant("a", 2, Matrix::diag(&[1.0, 2.0]));
        let v = CoefficientNet::constant("v", 2, Matrix::zeros(2, 1));
        assert!(matches!(a.add(&v), Err(Error::Shape(_))));
        assert!(a.matmul(&v).is_ok());
        assert!(matches!(v.matmul(&a), Err(Error::Shape(_))));
    }

    #[test]
    fn self_difference_vanishes() {
        let h = heaviside(Rescaling::Model);
        let d = h.sub(&h).unwrap();
        for x in [-0.01, 0.0, 0.004] {
            assert_eq!(d.eval_scalar(1.0 / 64.0, 0.0, &[x]).unwrap(), 0.0);
        }
    }

    #[test]
    fn mollified_heaviside_values() {
        let h = heaviside(Rescaling::Model);
        assert_eq!(h.provenance(), Provenance::Mollified);
        assert!(!h.is_time_dependent());
        assert_eq!(h.breakpoints(0), &[0.0]);
        let eps = 1.0 / 32.0;
        assert_eq!(h.eval_scalar(eps, 0.0, &[-2.0 * eps]).unwrap(), 0.0);
        assert_eq!(h.eval_scalar(eps, 0.0, &[2.0 * eps]).unwrap(), 1.0);
        let dh = h.partial(1).unwrap();
        let peak = Mollifier::new(Rescaling::Model, 1).unwrap().density(eps, &[0.0]).unwrap();
        let v = dh.eval_scalar(eps, 0.0, &[0.0]).unwrap();
        assert!((v / peak - 1.0).abs() < 1e-3);
    }

    #[test]
    fn spd_tag_checked_on_sampling() {
        let bad = CoefficientNet::from_fn("bad", Shape::Matrix(2, 2), 1, false, |_, _, x| {
            Ok(Matrix::diag(&[1.0, x[0]]))
        })
        .assume_spd()
        .unwrap();
        let grid = SampleGrid::uniform(vec![0.0], &[-1.0], &[1.0], &[5]);
        assert!(bad.sample(0.5, &grid).is_err());
        let ok_grid = SampleGrid::uniform(vec![0.0], &[0.5], &[1.0], &[5]);
        assert!(bad.sample(0.5, &ok_grid).is_ok());
    }

    #[test]
    fn sample_cache_reused() {
        let h = heaviside(Rescaling::Log);
        let grid = SampleGrid::uniform(vec![0.0], &[-1.0], &[1.0], &[11]);
        let a = h.sample(0.1, &grid).unwrap();
        let b = h.sample(0.1, &grid).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn divergence_of_linear_matrix() {
        let s = CoefficientNet::from_fn("S", Shape::Matrix(2, 2), 2, false, |_, _, x| {
            Ok(Matrix::from_rows(&[vec![x[0], 2.0 * x[1]], vec![x[1], 3.0 * x[0] - x[1]]])?)
        });
        let d = s.divergence().unwrap().eval_vec(0.5, 0.0, &[0.2, 0.7]).unwrap();
        assert!((d[0] - 3.0).abs() < 1e-9);
        assert!((d[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn differential_stacks_partials() {
        let e = Expr::parse("t*x + y^2").unwrap();
        let f = CoefficientNet::closed_form("f", e, 2).unwrap();
        assert!(f.is_time_dependent());
        let d = f.differential().unwrap();
        assert_eq!(d.shape(), Shape::Vector(3));
        let v = d.eval_vec(0.5, 2.0, &[3.0, 1.0]).unwrap();
        for (got, want) in v.iter().zip([3.0, 2.0, 2.0]) {
            assert!((got - want).abs() < 1e-8);
        }
    }

    #[test]
    fn planted_power_net() {
        let p = CoefficientNet::planted_power(1, 3.0);
        assert_eq!(p.eval_scalar(0.5, 0.0, &[0.0]).unwrap(), 0.125);
    }
}
