//! Sparse matrices in owner/neighbour (LDU) storage and the two iterative
//! solvers used by the flow solver.

use crate::error::{Error, Result};
use crate::mesh::LduAddressing;

/// Matrix with one diagonal entry per cell and one upper/lower pair per
/// internal face: `upper[f]` is the coefficient in row `owner(f)`, column
/// `neighbour(f)`, and `lower[f]` the transposed position.
#[derive(Debug, Clone, PartialEq)]
pub struct LduMatrix {
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

impl LduMatrix {
    pub fn zeros(n_cells: usize, n_faces: usize) -> Self {
        LduMatrix {
            diag: vec![0.0; n_cells],
            upper: vec![0.0; n_faces],
            lower: vec![0.0; n_faces],
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, ldu: &LduAddressing, x: &[f64], y: &mut [f64]) {
        for i in 0..self.diag.len() {
            y[i] = self.diag[i] * x[i];
        }
        for f in 0..ldu.n_faces() {
            let (l, u) = (ldu.lower[f], ldu.upper[f]);
            y[l] += self.upper[f] * x[u];
            y[u] += self.lower[f] * x[l];
        }
    }

    pub fn residual(&self, ldu: &LduAddressing, x: &[f64], b: &[f64], r: &mut [f64]) {
        self.matvec(ldu, x, r);
        for i in 0..r.len() {
            r[i] = b[i] - r[i];
        }
    }

    /// Sum over the off-diagonal entries of row `i` times `x`.
    fn off_diag_row(&self, ldu: &LduAddressing, i: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for &f in ldu.cell_faces(i) {
            if ldu.lower[f] == i {
                s += self.upper[f] * x[ldu.upper[f]];
            } else {
                s += self.lower[f] * x[ldu.lower[f]];
            }
        }
        s
    }
}

/// Convergence statistics of one linear solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
}

/// How residuals are measured.
#[derive(Debug, Clone, Copy)]
pub enum Criterion<'a> {
    /// `||b - Ax||_2 <= tol * ||b||_2`.
    Relative(f64),
    /// `max_i |r_i| * scale_i <= tol`.
    ScaledMax(f64, &'a [f64]),
}

impl Criterion<'_> {
    fn measure(&self, r: &[f64], b_norm: f64) -> f64 {
        match self {
            Criterion::Relative(_) => norm2(r) / b_norm.max(f64::MIN_POSITIVE),
            Criterion::ScaledMax(_, scale) => r
                .iter()
                .zip(scale.iter())
                .map(|(ri, s)| (ri * s).abs())
                .fold(0.0, f64::max),
        }
    }

    fn tol(&self) -> f64 {
        match self {
            Criterion::Relative(t) | Criterion::ScaledMax(t, _) => *t,
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn failure(system: &'static str, history: Vec<f64>) -> Error {
    Error::SolverFailure {
        system,
        iterations: history.len().saturating_sub(1),
        final_residual: history.last().copied().unwrap_or(f64::NAN),
        residual_history: history,
    }
}

/// Symmetric Gauss-Seidel iteration (forward then backward sweep per
/// iteration) for diagonally dominant systems.
pub fn solve_sgs(
    a: &LduMatrix,
    ldu: &LduAddressing,
    b: &[f64],
    x: &mut [f64],
    criterion: Criterion,
    max_iter: usize,
    system: &'static str,
) -> Result<SolveStats> {
    let n = a.n();
    let b_norm = norm2(b);
    let mut r = vec![0.0; n];
    a.residual(ldu, x, b, &mut r);
    let initial = criterion.measure(&r, b_norm);
    let mut history = vec![initial];
    if b_norm == 0.0 && norm2(&r) == 0.0 || initial <= criterion.tol() {
        return Ok(SolveStats {
            iterations: 0,
            initial_residual: initial,
            final_residual: initial,
        });
    }
    for it in 1..=max_iter {
        for i in 0..n {
            x[i] = (b[i] - a.off_diag_row(ldu, i, x)) / a.diag[i];
        }
        for i in (0..n).rev() {
            x[i] = (b[i] - a.off_diag_row(ldu, i, x)) / a.diag[i];
        }
        a.residual(ldu, x, b, &mut r);
        let res = criterion.measure(&r, b_norm);
        history.push(res);
        if !res.is_finite() {
            return Err(failure(system, history));
        }
        if res <= criterion.tol() {
            return Ok(SolveStats {
                iterations: it,
                initial_residual: initial,
                final_residual: res,
            });
        }
    }
    Err(failure(system, history))
}

/// Diagonal incomplete Cholesky factor: reciprocal of the modified diagonal.
/// Relies on faces being ordered by owner, as the mesh guarantees.
fn dic_factor(a: &LduMatrix, ldu: &LduAddressing) -> Vec<f64> {
    let mut rd = a.diag.clone();
    for f in 0..ldu.n_faces() {
        rd[ldu.upper[f]] -= a.upper[f] * a.upper[f] / rd[ldu.lower[f]];
    }
    rd.iter().map(|d| 1.0 / d).collect()
}

fn dic_apply(a: &LduMatrix, ldu: &LduAddressing, rd: &[f64], r: &[f64], w: &mut [f64]) {
    for i in 0..r.len() {
        w[i] = rd[i] * r[i];
    }
    for f in 0..ldu.n_faces() {
        let (l, u) = (ldu.lower[f], ldu.upper[f]);
        w[u] -= rd[u] * a.upper[f] * w[l];
    }
    for f in (0..ldu.n_faces()).rev() {
        let (l, u) = (ldu.lower[f], ldu.upper[f]);
        w[l] -= rd[l] * a.upper[f] * w[u];
    }
}

/// Conjugate gradients preconditioned with diagonal incomplete Cholesky for
/// symmetric positive definite systems (only `upper` is read).
pub fn solve_pcg(
    a: &LduMatrix,
    ldu: &LduAddressing,
    b: &[f64],
    x: &mut [f64],
    criterion: Criterion,
    max_iter: usize,
    system: &'static str,
) -> Result<SolveStats> {
    let n = a.n();
    let b_norm = norm2(b);
    let mut r = vec![0.0; n];
    a.residual(ldu, x, b, &mut r);
    let initial = criterion.measure(&r, b_norm);
    let mut history = vec![initial];
    if initial <= criterion.tol() || norm2(&r) == 0.0 {
        return Ok(SolveStats {
            iterations: 0,
            initial_residual: initial,
            final_residual: initial,
        });
    }
    let rd = dic_factor(a, ldu);
    if rd.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(failure(system, history));
    }
    let mut z = vec![0.0; n];
    dic_apply(a, ldu, &rd, &r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        a.matvec(ldu, &p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(failure(system, history));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let res = criterion.measure(&r, b_norm);
        history.push(res);
        if !res.is_finite() {
            return Err(failure(system, history));
        }
        if res <= criterion.tol() {
            return Ok(SolveStats {
                iterations: it,
                initial_residual: initial,
                final_residual: res,
            });
        }
        dic_apply(a, ldu, &rd, &r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(failure(system, history))
}
