use std::path::Path;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use super::interp::{Interpolant, InterpolationKind, RbfKernel};
use super::{pod_basis, PodBasis, SnapshotSet};
use crate::error::{Error, Result};
use crate::indicators::l2_rel_error;

pub const MODEL_MAGIC: &[u8; 8] = b"LVADROM\0";
pub const MODEL_VERSION: u32 = 1;

/// Trained POD-interpolation surrogate for one field.
#[derive(Debug, Clone, PartialEq)]
pub struct RomModel {
    field_name: String,
    basis: PodBasis,
    energy_threshold: f64,
    params: Vec<f64>,
    /// Modal coefficients of the training snapshots (`k x N_s`).
    coefficients: DMatrix<f64>,
    kind: InterpolationKind,
    interpolants: Vec<Interpolant>,
    param_box: (f64, f64),
}

/// Builds the basis, projects the snapshots onto it and fits one
/// interpolant per retained mode.
pub fn train(
    snapshots: &SnapshotSet,
    energy_threshold: f64,
    kind: InterpolationKind,
) -> Result<RomModel> {
    if snapshots.n_snapshots() < 2 {
        return Err(Error::invalid(format!(
            "{} interpolation needs at least two snapshots, got {}",
            kind.as_str(),
            snapshots.n_snapshots()
        )));
    }
    let basis = pod_basis(snapshots, energy_threshold)?;
    let ws = match snapshots.weights() {
        Some(w) => DMatrix::from_fn(snapshots.n_dofs(), snapshots.n_snapshots(), |i, j| {
            w[i] * snapshots.matrix()[(i, j)]
        }),
        None => snapshots.matrix().clone(),
    };
    let coefficients = basis.modes.transpose() * ws;
    RomModel::assemble(
        snapshots.field_name().to_string(),
        basis,
        energy_threshold,
        snapshots.params().to_vec(),
        coefficients,
        kind,
    )
}

impl RomModel {
    fn assemble(
        field_name: String,
        basis: PodBasis,
        energy_threshold: f64,
        params: Vec<f64>,
        coefficients: DMatrix<f64>,
        kind: InterpolationKind,
    ) -> Result<Self> {
        let interpolants = (0..basis.k)
            .map(|j| {
                let row: Vec<f64> = coefficients.row(j).iter().copied().collect();
                Interpolant::new(kind, &params, &row)
            })
            .collect::<Result<Vec<_>>>()?;
        let lo = params.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = params.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(RomModel {
            field_name,
            basis,
            energy_threshold,
            params,
            coefficients,
            kind,
            interpolants,
            param_box: (lo, hi),
        })
    }

    pub fn field_name(&self) -> &str {
        &self.field_name
    }

    pub fn basis(&self) -> &PodBasis {
        &self.basis
    }

    pub fn n_modes(&self) -> usize {
        self.basis.k
    }

    pub fn energy_threshold(&self) -> f64 {
        self.energy_threshold
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn interpolation_kind(&self) -> InterpolationKind {
        self.kind
    }

    pub fn param_box(&self) -> (f64, f64) {
        self.param_box
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.basis.weights.as_deref()
    }

    /// Interpolated modal coefficients at `param`.
    pub fn coefficients_at(&self, param: f64, allow_extrapolation: bool) -> Result<Vec<f64>> {
        let (lo, hi) = self.param_box;
        if !param.is_finite() {
            return Err(Error::invalid(format!(
                "parameter must be finite, got {param}"
            )));
        }
        if !allow_extrapolation && (param < lo || param > hi) {
            return Err(Error::ExtrapolationRefused {
                value: param,
                lo,
                hi,
            });
        }
        Ok(self.interpolants.iter().map(|f| f.eval(param)).collect())
    }

    /// Reconstructed field at `param`.
    pub fn predict(&self, param: f64, allow_extrapolation: bool) -> Result<Vec<f64>> {
        let alpha = self.coefficients_at(param, allow_extrapolation)?;
        self.basis.reconstruct(&alpha)
    }

    fn encode(&self, e: &mut Encoder) {
        e.str(&self.field_name);
        let (tag, kernel) = match self.kind {
            InterpolationKind::Linear => (0u8, 0u8),
            InterpolationKind::Rbf(RbfKernel::Gaussian) => (1, 0),
            InterpolationKind::Rbf(RbfKernel::ThinPlate) => (1, 1),
        };
        e.u8(tag);
        e.u8(kernel);
        e.f64(self.energy_threshold);
        e.f64(self.basis.energy_fraction);
        e.u64(self.basis.n_dofs() as u64);
        e.u64(self.basis.k as u64);
        e.f64s(self.basis.modes.as_slice());
        e.f64s(&self.basis.singular_values);
        match &self.basis.weights {
            Some(w) => {
                e.u8(1);
                e.f64s(w);
            }
            None => e.u8(0),
        }
        e.f64s(&self.params);
        e.f64s(self.coefficients.as_slice());
    }

    fn decode(d: &mut Decoder) -> Result<Self> {
        let field_name = d.str()?;
        let kind = match (d.u8()?, d.u8()?) {
            (0, _) => InterpolationKind::Linear,
            (1, 0) => InterpolationKind::Rbf(RbfKernel::Gaussian),
            (1, 1) => InterpolationKind::Rbf(RbfKernel::ThinPlate),
            (t, k) => return Err(d.err(format!("unknown interpolation tag {t}/{k}"))),
        };
        let energy_threshold = d.f64()?;
        let energy_fraction = d.f64()?;
        let n = d.u64()? as usize;
        let k = d.u64()? as usize;
        let modes = d.f64s()?;
        if k == 0 || modes.len() != n.checked_mul(k).unwrap_or(usize::MAX) {
            return Err(d.err(format!(
                "mode block of {} values for {n} x {k}",
                modes.len()
            )));
        }
        let singular_values = d.f64s()?;
        let weights = match d.u8()? {
            0 => None,
            1 => Some(d.f64s()?),
            t => return Err(d.err(format!("bad weight flag {t}"))),
        };
        if weights.as_ref().is_some_and(|w| w.len() != n) {
            return Err(d.err("weight length does not match the field length"));
        }
        let params = d.f64s()?;
        let c = d.f64s()?;
        if c.len() != k * params.len() {
            return Err(d.err("coefficient block does not match the mode and snapshot counts"));
        }
        let basis = PodBasis {
            modes: DMatrix::from_vec(n, k, modes),
            singular_values,
            k,
            energy_fraction,
            weights,
        };
        let coefficients = DMatrix::from_vec(k, params.len(), c);
        RomModel::assemble(
            field_name,
            basis,
            energy_threshold,
            params,
            coefficients,
            kind,
        )
        .map_err(|e| d.err(e.to_string()))
    }
}

struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.f64(x);
        }
    }
    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Decoder<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::corrupt(self.path, format!("{} (offset {})", msg.into(), self.pos))
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err("unexpected end of data"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self, elem: usize) -> Result<usize> {
        let n = self.u64()?;
        if n > ((self.buf.len() - self.pos) / elem) as u64 {
            return Err(self.err(format!("length {n} exceeds the remaining data")));
        }
        Ok(n as usize)
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn str(&mut self) -> Result<String> {
        let n = self.len(1)?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.err("field name is not UTF-8"))
    }
}

/// Serialises models into one file: magic, version, model count, the models
/// and a SHA-256 digest of everything before it.
pub fn models_to_bytes(models: &[RomModel]) -> Vec<u8> {
    let mut e = Encoder { buf: Vec::new() };
    e.buf.extend_from_slice(MODEL_MAGIC);
    e.buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    e.u64(models.len() as u64);
    for m in models {
        m.encode(&mut e);
    }
    let digest = Sha256::digest(&e.buf);
    e.buf.extend_from_slice(&digest);
    e.buf
}

pub fn models_from_bytes(bytes: &[u8], path: &Path) -> Result<Vec<RomModel>> {
    if bytes.len() < MODEL_MAGIC.len() + 4 + 8 + 32 {
        return Err(Error::corrupt(path, "file too short"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::corrupt(path, "checksum mismatch"));
    }
    let mut d = Decoder {
        buf: body,
        pos: 0,
        path,
    };
    if d.take(8)? != MODEL_MAGIC {
        return Err(d.err("not a model file"));
    }
    let version = d.u32()?;
    if version != MODEL_VERSION {
        return Err(d.err(format!("unsupported model version {version}")));
    }
    let n = d.u64()?;
    let models = (0..n)
        .map(|_| RomModel::decode(&mut d))
        .collect::<Result<Vec<_>>>()?;
    if d.pos != body.len() {
        return Err(d.err("trailing bytes after the last model"));
    }
    Ok(models)
}

pub fn write_models(path: &Path, models: &[RomModel]) -> Result<()> {
    std::fs::write(path, models_to_bytes(models)).map_err(|e| Error::io(path, e))
}

pub fn read_models(path: &Path) -> Result<Vec<RomModel>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    models_from_bytes(&bytes, path)
}

/// Relative L² errors of ROM predictions per field and parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub fields: Vec<String>,
    pub params: Vec<f64>,
    /// `errors[i][j]` belongs to `params[i]` and `fields[j]`.
    pub errors: Vec<Vec<f64>>,
}

impl ErrorTable {
    pub fn get(&self, field: &str, param: f64) -> Option<f64> {
        let j = self.fields.iter().position(|f| f == field)?;
        let i = self.params.iter().position(|&p| p == param)?;
        Some(self.errors[i][j])
    }

    /// Largest error of a field over all parameters.
    pub fn max_for(&self, field: &str) -> Option<f64> {
        let j = self.fields.iter().position(|f| f == field)?;
        Some(self.errors.iter().map(|r| r[j]).fold(0.0, f64::max))
    }

    pub fn to_csv(&self, param_name: &str) -> String {
        let mut s = param_name.to_string();
        for f in &self.fields {
            s.push_str(&format!(",E_{f}"));
        }
        s.push('\n');
        for (p, row) in self.params.iter().zip(&self.errors) {
            s.push_str(&format!("{p}"));
            for e in row {
                s.push_str(&format!(",{e:.16e}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Compares ROM predictions against full-order fields supplied by `fom`,
/// which returns `None` when no reference exists for a field/parameter.
pub fn evaluate_rom<F>(models: &[RomModel], fom: F, params: &[f64]) -> Result<ErrorTable>
where
    F: Fn(&str, f64) -> Option<Vec<f64>>,
{
    let mut errors = Vec::with_capacity(params.len());
    for &p in params {
        let mut row = Vec::with_capacity(models.len());
        for m in models {
            let reference = fom(m.field_name(), p).ok_or_else(|| {
                Error::invalid(format!(
                    "no full-order solution for {} at {p}",
                    m.field_name()
                ))
            })?;
            let rom = m.predict(p, false)?;
            let ones;
            let w = match m.weights() {
                Some(w) => w,
                None => {
                    ones = vec![1.0; rom.len()];
                    &ones
                }
            };
            row.push(l2_rel_error(&reference, &rom, w)?);
        }
        errors.push(row);
    }
    Ok(ErrorTable {
        fields: models.iter().map(|m| m.field_name().to_string()).collect(),
        params: params.to_vec(),
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_set() -> SnapshotSet {
        let a = [1.0, 2.0, -1.0, 0.5];
        let b = [0.2, -0.3, 0.7, 1.1];
        let params = vec![3.0, 3.5, 4.0, 4.5, 5.0];
        let cols: Vec<Vec<f64>> = params
            .iter()
            .map(|&t| a.iter().zip(&b).map(|(x, y)| x + t * y).collect())
            .collect();
        SnapshotSet::new("p", params, &cols, Some(vec![1.0, 2.0, 0.5, 1.5])).unwrap()
    }

    #[test]
    fn linear_manifold_is_reproduced_anywhere() {
        let model = train(&linear_set(), 1.0, InterpolationKind::Linear).unwrap();
        assert_eq!(model.n_modes(), 2);
        for t in [3.0, 3.21, 4.77, 5.0] {
            let f = model.predict(t, false).unwrap();
            let exact = [1.0 + 0.2 * t, 2.0 - 0.3 * t, -1.0 + 0.7 * t, 0.5 + 1.1 * t];
            for (x, y) in f.iter().zip(&exact) {
                assert!((x - y).abs() < 1e-10 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn refuses_extrapolation_unless_allowed() {
        let model = train(&linear_set(), 1.0, InterpolationKind::Linear).unwrap();
        assert!(matches!(
            model.predict(10.0, false),
            Err(Error::ExtrapolationRefused { .. })
        ));
        let f = model.predict(10.0, true).unwrap();
        assert!((f[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn single_snapshot_is_rejected() {
        let set = SnapshotSet::new("p", vec![3.0], &[vec![1.0, 2.0]], None).unwrap();
        assert!(matches!(
            train(&set, 0.999, InterpolationKind::Rbf(RbfKernel::ThinPlate)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn bytes_round_trip_and_detect_tampering() {
        let models = vec![
            train(&linear_set(), 1.0, InterpolationKind::Linear).unwrap(),
            train(
                &linear_set(),
                0.9,
                InterpolationKind::Rbf(RbfKernel::Gaussian),
            )
            .unwrap(),
        ];
        let path = Path::new("mem");
        let bytes = models_to_bytes(&models);
        assert_eq!(models_from_bytes(&bytes, path).unwrap(), models);
        let mut bad = bytes.clone();
        bad[20] ^= 1;
        assert!(matches!(
            models_from_bytes(&bad, path),
            Err(Error::Corrupt { .. })
        ));
        assert!(models_from_bytes(&bytes[..bytes.len() - 1], path).is_err());
    }

    #[test]
    fn error_table_needs_references() {
        let model = train(&linear_set(), 1.0, InterpolationKind::Linear).unwrap();
        let set = linear_set();
        let table = evaluate_rom(
            std::slice::from_ref(&model),
            |_, p| {
                set.params()
                    .iter()
                    .position(|&q| q == p)
                    .map(|j| set.column(j))
            },
            &[3.5, 4.5],
        )
        .unwrap();
        assert!(table.max_for("p").unwrap() < 1e-12);
        assert!(table.to_csv("PF").starts_with("PF,E_p\n3.5,"));
        assert!(evaluate_rom(&[model], |_, _| None, &[4.0]).is_err());
    }
}
