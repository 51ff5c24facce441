#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use wavesys::genfunc::{CoefficientNet, Expr};
use wavesys::linalg::{self, Matrix, SymMatrix};
use wavesys::transform::{constant_problem, Domain, WaveProblem};

/// Orthogonal matrix from Gram-Schmidt on Gaussian-ish columns.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for c in &cols {
            let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-3 {
            cols.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    Matrix::from_fn(n, n, |i, j| cols[j][i])
}

/// `Q diag(λ) Qᵀ` with eigenvalues log-uniform in `[1, cond]`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, cond: f64) -> SymMatrix {
    let q = random_orthogonal(rng, n);
    let mut lambda: Vec<f64> = (0..n).map(|_| cond.powf(rng.random_range(0.0..1.0))).collect();
    lambda[0] = 1.0;
    if n > 1 {
        lambda[1] = cond;
    }
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    let m = Matrix::from_fn(n, n, |i, j| (0..n).map(|k| q[(i, k)] * lambda[k] * q[(j, k)]).sum::<f64>() * scale);
    SymMatrix::from_matrix(&m.sym_part().unwrap(), 1e-9 * m.frobenius()).unwrap()
}

pub fn rel_sq_error(s: &SymMatrix, r: &SymMatrix) -> f64 {
    let s2 = s.as_matrix().matmul(s.as_matrix()).unwrap();
    let d = s2.zip_with(r.as_matrix(), |a, b| a - b).unwrap();
    d.frobenius() / r.frobenius()
}

pub fn min_eigenvalue(s: &SymMatrix) -> f64 {
    linalg::sym_eig(s).unwrap().values[0]
}

pub fn closed(name: &str, src: &str, n: usize) -> CoefficientNet {
    CoefficientNet::closed_form(name, Expr::parse(src).unwrap(), n).unwrap()
}

/// Polynomial test problems in one and two dimensions.
pub fn polynomial_problems() -> Vec<WaveProblem> {
    let d1 = Domain::new(vec![-1.0], vec![1.0], 0.5).unwrap();
    let d2 = Domain::new(vec![-1.0, -1.0], vec![1.0, 1.0], 0.5).unwrap();
    let mut out = Vec::new();

    let mut p = constant_problem(d1.clone(), 1.0, Matrix::diag(&[1.0])).unwrap();
    p.r = closed("R", "(2 + x^2)^2", 1).assume_spd().unwrap();
    p.b = closed("b", "x - 1", 1);
    p.c = closed("c", "0.5*x^2", 1);
    out.push(p);

    let mut p = constant_problem(d1.clone(), 1.0, Matrix::diag(&[1.0])).unwrap();
    p.r = closed("R", "3 + x + x^2", 1).assume_spd().unwrap();
    p.g = closed("g", "0.2*x", 1);
    p.a = closed("a", "-1 + x", 1);
    p.f = closed("f", "x^3", 1);
    out.push(p);

    let mut p = constant_problem(d1, 1.0, Matrix::diag(&[1.0])).unwrap();
    p.r = closed("R", "(1 + t/2)^2 + x^2", 1).assume_spd().unwrap();
    p.b = closed("b", "2", 1);
    out.push(p);

    let mut p = constant_problem(d2.clone(), 1.0, Matrix::diag(&[1.0, 1.0])).unwrap();
    let entries = vec![
        closed("R11", "2 + x^2", 2),
        closed("R12", "0.3*x*y", 2),
        closed("R21", "0.3*x*y", 2),
        closed("R22", "1.5 + y^2", 2),
    ];
    p.r = CoefficientNet::from_entries("R", 2, 2, entries).unwrap().assume_spd().unwrap();
    p.b = CoefficientNet::from_entries("b", 2, 1, vec![closed("b1", "x + y", 2), closed("b2", "1 - x*y", 2)]).unwrap();
    p.c = closed("c", "x*y", 2);
    out.push(p);

    let mut p = constant_problem(d2, 1.0, Matrix::from_rows(&[vec![2.0, 0.4], vec![0.4, 1.0]]).unwrap()).unwrap();
    p.g = CoefficientNet::from_entries("g", 2, 1, vec![closed("g1", "0.1*x", 2), closed("g2", "0.2", 2)]).unwrap();
    p.a = closed("a", "y^2", 2);
    p.b = CoefficientNet::from_entries("b", 2, 1, vec![closed("b1", "1", 2), closed("b2", "x", 2)]).unwrap();
    out.push(p);
    out
}
