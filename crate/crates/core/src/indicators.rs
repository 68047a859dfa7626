//! Hemodynamic and error indicators.

use crate::error::{Error, Result};
use crate::fv::{transient::volume_average, FlowState, FluidProperties};
use crate::mesh::{Mesh, PatchKind, Vec3};

/// Per-face values on one boundary patch.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryField {
    pub patch: String,
    /// Scalar value per face (the magnitude for vector fields).
    pub values: Vec<f64>,
    /// Vector value per face, when the field is a vector.
    pub vectors: Option<Vec<Vec3>>,
    pub areas: Vec<f64>,
}

impl BoundaryField {
    pub fn scalar(patch: impl Into<String>, values: Vec<f64>, areas: Vec<f64>) -> Result<Self> {
        if values.len() != areas.len() {
            return Err(Error::invalid(format!(
                "{} values for {} faces",
                values.len(),
                areas.len()
            )));
        }
        Ok(BoundaryField {
            patch: patch.into(),
            values,
            vectors: None,
            areas,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Area-weighted mean of the scalar values.
    pub fn area_average(&self) -> f64 {
        let a: f64 = self.areas.iter().sum();
        self.values
            .iter()
            .zip(&self.areas)
            .map(|(v, w)| v * w)
            .sum::<f64>()
            / a
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Scalar samples at strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("times must be strictly increasing"));
        }
        Ok(TimeSeries { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn value_at(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&s| s < t);
        if i == 0 {
            return self.values[0];
        }
        if i == self.times.len() {
            return self.values[i - 1];
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let s = (t - t0) / (t1 - t0);
        self.values[i - 1] * (1.0 - s) + self.values[i] * s
    }

    /// The samples in `[t_end - period, t_end]`, with a linearly interpolated
    /// sample added at the window start when it falls between samples.
    pub fn last_window(&self, period: f64) -> Result<TimeSeries> {
        if self.is_empty() {
            return Err(Error::invalid("empty time series"));
        }
        let t_end = *self.times.last().unwrap();
        let span = t_end - self.times[0];
        if !(period > 0.0) || span < period * (1.0 - 1e-9) {
            return Err(Error::invalid(format!(
                "series spans {span} s, shorter than the period {period} s"
            )));
        }
        let t0 = t_end - period;
        let tol = 1e-9 * period;
        let first = self.times.partition_point(|&s| s < t0 - tol);
        let mut times = Vec::with_capacity(self.len() - first + 1);
        let mut values = Vec::with_capacity(times.capacity());
        if (self.times[first] - t0).abs() > tol {
            times.push(t0);
            values.push(self.value_at(t0));
        }
        times.extend_from_slice(&self.times[first..]);
        values.extend_from_slice(&self.values[first..]);
        TimeSeries::new(times, values)
    }

    /// Trapezoidal integral over the whole series.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.times, &self.values)
    }
}

fn trapezoid(t: &[f64], v: &[f64]) -> f64 {
    t.windows(2)
        .zip(v.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Tangential viscous traction on every face of a wall patch, using the
/// one-sided difference between the owner-cell velocity and the wall.
pub fn wall_shear_stress(
    mesh: &Mesh,
    state: &FlowState,
    props: &FluidProperties,
    patch: &str,
) -> Result<BoundaryField> {
    let (_, p) = mesh
        .patch(patch)
        .ok_or_else(|| Error::invalid(format!("no patch named '{patch}'")))?;
    if p.kind != PatchKind::Wall {
        return Err(Error::invalid(format!("patch '{patch}' is not a wall")));
    }
    state.check_sizes(mesh)?;
    let n_int = mesh.n_internal_faces();
    let centroids = mesh.cell_centroids();
    let mut vectors = Vec::with_capacity(p.len);
    let mut areas = Vec::with_capacity(p.len);
    for f in p.faces() {
        let face = mesh.face(f);
        let a = face.area.norm();
        let n = face.area / a;
        let dist = n.dot(&(face.centroid - centroids[face.owner])).abs();
        let du = state.u[face.owner] - state.u_boundary[f - n_int];
        let t = du * (props.mu / dist);
        vectors.push(t - n * t.dot(&n));
        areas.push(a);
    }
    Ok(BoundaryField {
        patch: patch.to_string(),
        values: vectors.iter().map(|v| v.norm()).collect(),
        vectors: Some(vectors),
        areas,
    })
}

/// Trapezoidal time average of the face magnitudes over samples spanning
/// exactly one period.
pub fn tawss(samples: &[(f64, BoundaryField)], period: f64) -> Result<BoundaryField> {
    if samples.len() < 2 {
        return Err(Error::invalid("time averaging needs at least two samples"));
    }
    if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::invalid("sample times must be strictly increasing"));
    }
    let span = samples.last().unwrap().0 - samples[0].0;
    if !(period > 0.0) || (span - period).abs() > 1e-6 * period {
        return Err(Error::invalid(format!(
            "samples span {span} s instead of one period of {period} s"
        )));
    }
    let first = &samples[0].1;
    if samples
        .iter()
        .any(|(_, s)| s.len() != first.len() || s.patch != first.patch)
    {
        return Err(Error::invalid("samples do not share one patch layout"));
    }
    let mut acc = vec![0.0; first.len()];
    for w in samples.windows(2) {
        let h = 0.5 * (w[1].0 - w[0].0);
        for (a, (x, y)) in acc.iter_mut().zip(w[0].1.values.iter().zip(&w[1].1.values)) {
            *a += h * (x.abs() + y.abs());
        }
    }
    acc.iter_mut().for_each(|a| *a /= span);
    BoundaryField::scalar(first.patch.clone(), acc, first.areas.clone())
}

/// Reynolds number `U d / nu` of a flow `q` [m³/s] through a circular
/// section of area `area` [m²].
pub fn reynolds_inlet(q: f64, area: f64, props: &FluidProperties) -> Result<f64> {
    if !(q >= 0.0) || !(area > 0.0) {
        return Err(Error::invalid(format!(
            "need q >= 0 and area > 0, got q={q} area={area}"
        )));
    }
    let d = (4.0 * area / std::f64::consts::PI).sqrt();
    Ok(q / area * d / props.nu())
}

pub fn volume_avg_pressure(mesh: &Mesh, state: &FlowState) -> f64 {
    volume_average(mesh, &state.p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureSummary {
    pub pas: f64,
    pub pad: f64,
    pub pam: f64,
}

/// Maximum, minimum and time mean over the final `period` of the series, or
/// over the whole series when no period is given.
pub fn pas_pad_pam(series: &TimeSeries, period: Option<f64>) -> Result<PressureSummary> {
    if series.is_empty() {
        return Err(Error::invalid("empty time series"));
    }
    let window = match period {
        Some(t) => series.last_window(t)?,
        None => series.clone(),
    };
    let v = window.values();
    let pas = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = v.iter().copied().fold(f64::INFINITY, f64::min);
    let span = window.times().last().unwrap() - window.times()[0];
    let pam = if span > 0.0 {
        window.integral() / span
    } else {
        v[0]
    };
    Ok(PressureSummary {
        pas,
        pad,
        pam: pam.clamp(pad, pas),
    })
}

/// Weighted absolute percentage error of `x` against `x_ref` on a shared
/// time grid.
pub fn wape(x: &TimeSeries, x_ref: &TimeSeries) -> Result<f64> {
    let same_grid = x.len() == x_ref.len()
        && x.times()
            .iter()
            .zip(x_ref.times())
            .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
    if !same_grid {
        return Err(Error::invalid("series are not sampled on the same grid"));
    }
    wape_values(x.values(), x_ref.values())
}

pub fn wape_values(x: &[f64], x_ref: &[f64]) -> Result<f64> {
    if x.len() != x_ref.len() || x.is_empty() {
        return Err(Error::invalid("series lengths differ or are empty"));
    }
    let n = x.len() as f64;
    let mean = x_ref.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::UndefinedMetric("reference mean is zero".into()));
    }
    let sum: f64 = x.iter().zip(x_ref).map(|(a, b)| (a - b).abs()).sum();
    Ok(100.0 / n * sum / mean.abs())
}

/// `100 ||fom - rom|| / ||fom||` in the discrete L² norm with the given
/// per-entry weights (cell volumes or face areas).
pub fn l2_rel_error(fom: &[f64], rom: &[f64], weights: &[f64]) -> Result<f64> {
    if fom.len() != rom.len() || fom.len() != weights.len() {
        return Err(Error::invalid(format!(
            "field lengths differ: {} / {} / {} weights",
            fom.len(),
            rom.len(),
            weights.len()
        )));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for ((a, b), w) in fom.iter().zip(rom).zip(weights) {
        num += w * (a - b) * (a - b);
        den += w * a * a;
    }
    if den == 0.0 {
        return Err(Error::UndefinedMetric(
            "reference field has zero norm".into(),
        ));
    }
    Ok(100.0 * (num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_channel_mesh;
    use std::f64::consts::PI;

    #[test]
    fn wape_hand_values() {
        assert_eq!(wape_values(&[1.0; 4], &[1.0; 4]).unwrap(), 0.0);
        let e = wape_values(&[1.1, 0.9, 1.1, 0.9], &[1.0; 4]).unwrap();
        assert!((e - 10.0).abs() < 1e-9);
        assert!((wape_values(&[6.0; 3], &[3.0; 3]).unwrap() - 100.0).abs() < 1e-12);
        assert!(matches!(
            wape_values(&[1.0, 2.0], &[1.0, -1.0]),
            Err(Error::UndefinedMetric(_))
        ));
        let a = TimeSeries::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let b = TimeSeries::new(vec![0.0, 2.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(wape(&a, &b), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn l2_error_scaling_and_zero_reference() {
        let fom = vec![1.0, -2.0, 3.0];
        let w = vec![0.5, 1.0, 2.0];
        let rom: Vec<f64> = fom.iter().map(|x| 1.01 * x).collect();
        assert!((l2_rel_error(&fom, &rom, &w).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(l2_rel_error(&fom, &fom, &w).unwrap(), 0.0);
        assert!(matches!(
            l2_rel_error(&[0.0; 3], &fom, &w),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn sinusoid_pressures() {
        let t_period = 0.8;
        let times: Vec<f64> = (0..=200).map(|i| i as f64 * t_period / 200.0).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|t| 90.0 + 20.0 * (2.0 * PI * t / t_period).sin())
            .collect();
        let s = pas_pad_pam(&TimeSeries::new(times, values).unwrap(), Some(t_period)).unwrap();
        assert!((s.pas - 110.0).abs() / 110.0 < 5e-3);
        assert!((s.pad - 70.0).abs() / 70.0 < 5e-3);
        assert!((s.pam - 90.0).abs() / 90.0 < 5e-3);
    }

    #[test]
    fn final_window_of_long_series() {
        let times: Vec<f64> = (0..=350).map(|i| i as f64 * 0.01).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|t| if *t < 2.0 { 500.0 } else { 80.0 })
            .collect();
        let s = pas_pad_pam(&TimeSeries::new(times, values).unwrap(), Some(1.0)).unwrap();
        assert_eq!((s.pas, s.pad, s.pam), (80.0, 80.0, 80.0));
        let short = TimeSeries::new(vec![0.0, 0.5], vec![1.0, 1.0]).unwrap();
        assert!(pas_pad_pam(&short, Some(1.0)).is_err());
    }

    #[test]
    fn tawss_of_squared_sine() {
        let period = 0.6;
        let w = 3.0;
        let samples: Vec<(f64, BoundaryField)> = (0..100)
            .map(|i| {
                let t = i as f64 * period / 99.0;
                let v = w * (2.0 * PI * t / period).sin().powi(2);
                (
                    t,
                    BoundaryField::scalar("wall", vec![v, 2.0 * v], vec![1.0, 1.0]).unwrap(),
                )
            })
            .collect();
        let avg = tawss(&samples, period).unwrap();
        assert!((avg.values[0] - w / 2.0).abs() / (w / 2.0) < 5e-3);
        assert!((avg.values[1] - w).abs() / w < 5e-3);
        assert!(tawss(&samples[..1], period).is_err());
        assert!(tawss(&samples[..50], period).is_err());
    }

    #[test]
    fn wss_requires_wall_and_vanishes_at_rest() {
        let mesh = generate_channel_mesh(1.0, 0.2, 5, 3).unwrap();
        let state = FlowState::at_rest(&mesh, 0.0);
        let props = FluidProperties::blood();
        let f = wall_shear_stress(&mesh, &state, &props, "wall").unwrap();
        assert!(f.values.iter().all(|v| v.abs() <= 1e-12));
        assert!(matches!(
            wall_shear_stress(&mesh, &state, &props, "inlet"),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn wss_of_linear_shear() {
        let mesh = generate_channel_mesh(1.0, 0.2, 4, 4).unwrap();
        let mut state = FlowState::at_rest(&mesh, 0.0);
        let g = 5.0;
        for (u, c) in state.u.iter_mut().zip(mesh.cell_centroids()) {
            *u = Vec3::new(g * c.y, 0.0, 0.0);
        }
        let props = FluidProperties::blood();
        let f = wall_shear_stress(&mesh, &state, &props, "wall").unwrap();
        let (_, p) = mesh.patch("wall").unwrap();
        for (k, face) in p.faces().enumerate() {
            if mesh.face(face).centroid.y < 1e-12 {
                assert!((f.values[k] - props.mu * g).abs() < 1e-12);
                assert!(f.vectors.as_ref().unwrap()[k].y.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn reynolds_values() {
        let props = FluidProperties::blood();
        assert_eq!(reynolds_inlet(0.0, 1e-4, &props).unwrap(), 0.0);
        assert!(reynolds_inlet(1e-5, 0.0, &props).is_err());
        let q = 4.1e-3 / 60.0;
        let re = reynolds_inlet(q, 1.3e-4, &props).unwrap();
        let d = (4.0 * 1.3e-4 / PI).sqrt();
        assert!((re - q / 1.3e-4 * d * 1060.0 / 0.004).abs() < 1e-9);
    }

    #[test]
    fn two_cell_weighted_pressure() {
        use crate::mesh::{polygon_cell, MeshBuilder};
        let mut b = MeshBuilder::new(2);
        let wall = b.add_patch("wall", PatchKind::Wall);
        b.set_default_patch(wall);
        let xs = [0.0, 1.0, 4.0];
        let bottom: Vec<usize> = xs
            .iter()
            .map(|&x| b.add_point(Vec3::new(x, 0.0, 0.0)))
            .collect();
        let top: Vec<usize> = xs
            .iter()
            .map(|&x| b.add_point(Vec3::new(x, 1.0, 0.0)))
            .collect();
        for i in 0..2 {
            b.add_cell(polygon_cell(
                vec![bottom[i], bottom[i + 1], top[i + 1], top[i]],
                vec![None; 4],
            ));
        }
        let mesh = b.build().unwrap();
        let mut state = FlowState::at_rest(&mesh, 0.0);
        state.p = vec![4.0, 8.0];
        assert_eq!(mesh.cell_volumes(), &[1.0, 3.0]);
        assert!((volume_avg_pressure(&mesh, &state) - 7.0).abs() < 1e-12);
    }
}
