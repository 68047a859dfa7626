//! Non-intrusive reduced-order model: proper orthogonal decomposition of a
//! snapshot matrix by the method of snapshots, interpolation of the modal
//! coefficients over the parameter and reconstruction at new parameters.
//!
//! Inner products are weighted by an optional positive diagonal `W` (cell
//! volumes or face areas), so the basis is orthonormal in `(a, b) = aᵀWb`.

mod interp;
mod model;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub use interp::{Interpolant, InterpolationKind, RbfKernel};
pub use model::{
    evaluate_rom, models_from_bytes, models_to_bytes, read_models, train, write_models, ErrorTable,
    RomModel, MODEL_MAGIC, MODEL_VERSION,
};

/// Eigenvalues of the Gram matrix below this fraction of the largest are
/// treated as rounding noise.
const GRAM_RANK_TOL: f64 = 1e-13;
/// A snapshot whose residual against the basis falls below this fraction of
/// its norm adds no new direction.
const RESIDUAL_RANK_TOL: f64 = 1e-12;

/// Field snapshots stored as the columns of an `N x N_s` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    field_name: String,
    data: DMatrix<f64>,
    params: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl SnapshotSet {
    pub fn new(
        field_name: &str,
        params: Vec<f64>,
        columns: &[Vec<f64>],
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("snapshot columns have different lengths"));
        }
        let data = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
        Self::from_matrix(field_name, params, data, weights)
    }

    pub fn from_matrix(
        field_name: &str,
        params: Vec<f64>,
        data: DMatrix<f64>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::invalid(
                "a snapshot set needs at least one non-empty snapshot",
            ));
        }
        if params.len() != data.ncols() {
            return Err(Error::invalid(format!(
                "{} parameters for {} snapshots",
                params.len(),
                data.ncols()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) || data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("snapshots and parameters must be finite"));
        }
        let mut sorted = params.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(
                "snapshot parameters must be pairwise distinct",
            ));
        }
        if let Some(w) = &weights {
            if w.len() != data.nrows() {
                return Err(Error::invalid(format!(
                    "{} weights for fields of length {}",
                    w.len(),
                    data.nrows()
                )));
            }
            if w.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
                return Err(Error::invalid("weights must be positive"));
            }
        }
        Ok(SnapshotSet {
            field_name: field_name.to_string(),
            data,
            params,
            weights,
        })
    }

    pub fn field_name(&self) -> &str {
        &self.field_name
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn n_dofs(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.data.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.column(j).iter().copied().collect()
    }
}

/// Truncated POD basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    /// Retained modes as columns (`N x k`).
    pub modes: DMatrix<f64>,
    /// All `min(N, N_s)` singular values, descending.
    pub singular_values: Vec<f64>,
    pub k: usize,
    /// Cumulative energy captured by the first `k` modes.
    pub energy_fraction: f64,
    pub weights: Option<Vec<f64>>,
}

impl PodBasis {
    pub fn n_dofs(&self) -> usize {
        self.modes.nrows()
    }

    /// Modal coefficients `U_kᵀ W s`.
    pub fn project(&self, field: &[f64]) -> Result<Vec<f64>> {
        if field.len() != self.n_dofs() {
            return Err(Error::invalid(format!(
                "field of length {} for a basis of length {}",
                field.len(),
                self.n_dofs()
            )));
        }
        let wf = apply_weights(DVector::from_column_slice(field), self.weights.as_deref());
        Ok((self.modes.transpose() * wf).iter().copied().collect())
    }

    /// `U_k alpha`.
    pub fn reconstruct(&self, coefficients: &[f64]) -> Result<Vec<f64>> {
        if coefficients.len() != self.k {
            return Err(Error::invalid(format!(
                "{} coefficients for {} modes",
                coefficients.len(),
                self.k
            )));
        }
        Ok((&self.modes * DVector::from_column_slice(coefficients))
            .iter()
            .copied()
            .collect())
    }
}

fn apply_weights(mut v: DVector<f64>, weights: Option<&[f64]>) -> DVector<f64> {
    if let Some(w) = weights {
        for (x, wi) in v.iter_mut().zip(w) {
            *x *= wi;
        }
    }
    v
}

fn weighted_dot(a: &[f64], b: &[f64], weights: Option<&[f64]>) -> f64 {
    match weights {
        Some(w) => a.iter().zip(b).zip(w).map(|((x, y), wi)| x * y * wi).sum(),
        None => a.iter().zip(b).map(|(x, y)| x * y).sum(),
    }
}

/// Partial sums of squared singular values normalised by the total.
pub fn cumulative_energy(singular_values: &[f64]) -> Result<Vec<f64>> {
    if singular_values.is_empty() {
        return Err(Error::invalid("no singular values"));
    }
    if singular_values
        .iter()
        .any(|s| !(s.is_finite() && *s >= 0.0))
    {
        return Err(Error::invalid(
            "singular values must be finite and non-negative",
        ));
    }
    if singular_values.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid(
            "singular values must be in descending order",
        ));
    }
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Err(Error::DegenerateInput(
            "all singular values are zero".into(),
        ));
    }
    let mut acc = 0.0;
    let mut out: Vec<f64> = singular_values
        .iter()
        .map(|s| {
            acc += s * s;
            (acc / total).min(1.0)
        })
        .collect();
    *out.last_mut().unwrap() = 1.0;
    Ok(out)
}

/// POD basis of a snapshot set keeping the fewest modes whose cumulative
/// energy reaches `energy_threshold`.
///
/// The Gram matrix `SᵀWS` is diagonalised to obtain the column space of `S`.
/// That space is orthonormalised and the small projected matrix is
/// decomposed once more by a dense SVD, which restores singular values to
/// full precision instead of the square root of the Gram eigenvalues.
pub fn pod_basis(snapshots: &SnapshotSet, energy_threshold: f64) -> Result<PodBasis> {
    if !(energy_threshold > 0.0 && energy_threshold <= 1.0) {
        return Err(Error::invalid(format!(
            "energy threshold must lie in (0, 1], got {energy_threshold}"
        )));
    }
    let s = snapshots.matrix();
    let (n, ns) = s.shape();
    let weights = snapshots.weights();
    if s.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateInput(format!(
            "snapshot matrix for {} is identically zero",
            snapshots.field_name()
        )));
    }

    let ws = match weights {
        Some(w) => DMatrix::from_fn(n, ns, |i, j| w[i] * s[(i, j)]),
        None => s.clone(),
    };
    let gram = s.transpose() * &ws;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..ns).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda_max = eig.eigenvalues[order[0]];
    let rank = order
        .iter()
        .take_while(|&&j| eig.eigenvalues[j] > GRAM_RANK_TOL * lambda_max)
        .count()
        .min(n)
        .max(1);

    // column space from the Gram eigenvectors, orthonormalised twice
    let mut q: Vec<Vec<f64>> = order[..rank]
        .iter()
        .map(|&j| (s * eig.eigenvectors.column(j)).iter().copied().collect())
        .collect();
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(rank);
    for i in 0..q.len() {
        let mut v = std::mem::take(&mut q[i]);
        for _ in 0..2 {
            for u in &kept {
                let c = weighted_dot(u, &v, weights);
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= c * y;
                }
            }
        }
        let norm = weighted_dot(&v, &v, weights).sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
            kept.push(v);
        }
    }
    // snapshot content the Gram eigenvectors resolve only to sqrt(eps)
    let mut cols: Vec<Vec<f64>> = (0..ns).map(|j| snapshots.column(j)).collect();
    cols.sort_by(|a, b| weighted_dot(b, b, weights).total_cmp(&weighted_dot(a, a, weights)));
    for mut v in cols {
        if kept.len() >= n.min(ns) {
            break;
        }
        let norm0 = weighted_dot(&v, &v, weights).sqrt();
        for _ in 0..2 {
            for u in &kept {
                let c = weighted_dot(u, &v, weights);
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= c * y;
                }
            }
        }
        let norm = weighted_dot(&v, &v, weights).sqrt();
        if norm > RESIDUAL_RANK_TOL * norm0 {
            v.iter_mut().for_each(|x| *x /= norm);
            kept.push(v);
        }
    }
    let r = kept.len();
    let qm = DMatrix::from_fn(n, r, |i, j| kept[j][i]);
    let b = qm.transpose() * &ws;
    let svd = b.svd(true, false);
    let ub = svd.u.as_ref().expect("left vectors requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &c| svd.singular_values[c].total_cmp(&svd.singular_values[a]));

    let n_sv = n.min(ns);
    let mut singular_values = vec![0.0; n_sv];
    for (slot, &j) in singular_values.iter_mut().zip(&idx) {
        *slot = svd.singular_values[j];
    }
    let energy = cumulative_energy(&singular_values)?;
    let k = if energy_threshold >= 1.0 {
        r
    } else {
        energy
            .iter()
            .position(|&e| e >= energy_threshold)
            .map_or(r, |i| i + 1)
            .min(r)
    };

    let mut modes = DMatrix::zeros(n, k);
    for (col, &j) in idx.iter().take(k).enumerate() {
        let mut m = &qm * ub.column(j);
        let pivot = m
            .iter()
            .copied()
            .fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        if pivot < 0.0 {
            m.neg_mut();
        }
        modes.set_column(col, &m);
    }
    log::debug!(
        "{}: {} modes of {} retain {:.6} of the energy",
        snapshots.field_name(),
        k,
        n_sv,
        energy[k - 1]
    );
    Ok(PodBasis {
        modes,
        singular_values,
        k,
        energy_fraction: energy[k - 1],
        weights: weights.map(<[f64]>::to_vec),
    })
}
