use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, PatchKind, Vec3};
use crate::windkessel::SiWindkessel;

use super::FlowState;

/// Volumetric inflow rate as a function of time [m³/s].
#[derive(Debug, Clone, PartialEq)]
pub enum Waveform {
    Constant {
        flow: f64,
    },
    /// Synthetic cardiac waveform: a half-sine systole lasting
    /// `systole_fraction * period` on top of a diastolic plateau at
    /// `diastolic_ratio` times the peak, scaled so the period mean equals
    /// `mean_flow`.
    Pulsatile {
        mean_flow: f64,
        period: f64,
        systole_fraction: f64,
        diastolic_ratio: f64,
    },
}

impl Waveform {
    pub fn cardiac(mean_flow: f64, period: f64) -> Self {
        Waveform::Pulsatile {
            mean_flow,
            period,
            systole_fraction: 0.35,
            diastolic_ratio: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Waveform::Constant { flow } if flow.is_finite() && flow >= 0.0 => Ok(()),
            Waveform::Pulsatile {
                mean_flow,
                period,
                systole_fraction,
                diastolic_ratio,
            } if mean_flow >= 0.0
                && period > 0.0
                && systole_fraction > 0.0
                && systole_fraction <= 1.0
                && (0.0..1.0).contains(&diastolic_ratio) =>
            {
                Ok(())
            }
            _ => Err(Error::invalid(format!("invalid inflow waveform {self:?}"))),
        }
    }

    pub fn flow_at(&self, t: f64) -> f64 {
        match *self {
            Waveform::Constant { flow } => flow,
            Waveform::Pulsatile {
                mean_flow,
                period,
                systole_fraction,
                diastolic_ratio,
            } => {
                let ts = systole_fraction * period;
                let peak = mean_flow
                    / (diastolic_ratio + (1.0 - diastolic_ratio) * 2.0 * systole_fraction / PI);
                let base = diastolic_ratio * peak;
                let tau = t.rem_euclid(period);
                if tau < ts {
                    base + (peak - base) * (PI * tau / ts).sin()
                } else {
                    base
                }
            }
        }
    }

    pub fn mean_flow(&self) -> f64 {
        match *self {
            Waveform::Constant { flow } => flow,
            Waveform::Pulsatile { mean_flow, .. } => mean_flow,
        }
    }

    pub fn period(&self) -> Option<f64> {
        match *self {
            Waveform::Constant { .. } => None,
            Waveform::Pulsatile { period, .. } => Some(period),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InflowProfile {
    /// Uniform speed over the patch.
    Plug,
    /// `1 - (r/R)^2` about the patch centroid, `R` the largest vertex radius.
    Parabolic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inflow {
    pub waveform: Waveform,
    pub profile: InflowProfile,
    /// Unit direction of the inflow velocity; defaults to the inward patch normal.
    pub direction: Option<Vec3>,
}

impl Inflow {
    pub fn plug(waveform: Waveform) -> Self {
        Inflow {
            waveform,
            profile: InflowProfile::Plug,
            direction: None,
        }
    }

    pub fn parabolic(waveform: Waveform) -> Self {
        Inflow {
            waveform,
            profile: InflowProfile::Parabolic,
            direction: None,
        }
    }

    pub fn with_direction(mut self, direction: Vec3) -> Self {
        self.direction = Some(direction);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VelocityCondition {
    Inflow(Inflow),
    NoSlip,
    ZeroGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PressureCondition {
    ZeroGradient,
    /// Fixed pressure [Pa].
    FixedValue(f64),
    /// Outlet pressure supplied by a coupled RCR circuit.
    Windkessel(SiWindkessel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchCondition {
    pub patch: String,
    pub velocity: VelocityCondition,
    pub pressure: PressureCondition,
}

impl PatchCondition {
    pub fn new(patch: &str, velocity: VelocityCondition, pressure: PressureCondition) -> Self {
        PatchCondition {
            patch: patch.to_string(),
            velocity,
            pressure,
        }
    }

    pub fn wall(patch: &str) -> Self {
        Self::new(
            patch,
            VelocityCondition::NoSlip,
            PressureCondition::ZeroGradient,
        )
    }

    pub fn inlet(patch: &str, inflow: Inflow) -> Self {
        Self::new(
            patch,
            VelocityCondition::Inflow(inflow),
            PressureCondition::ZeroGradient,
        )
    }

    pub fn outlet(patch: &str, pressure: PressureCondition) -> Self {
        Self::new(patch, VelocityCondition::ZeroGradient, pressure)
    }
}

/// Boundary conditions evaluated at one time, per boundary face
/// (`face - n_internal_faces`): `Some(value)` for fixed values, `None` for
/// zero gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedBoundary {
    pub velocity: Vec<Option<Vec3>>,
    pub pressure: Vec<Option<f64>>,
}

impl ResolvedBoundary {
    pub fn has_pressure_reference(&self) -> bool {
        self.pressure.iter().any(Option::is_some)
    }

    /// Boundary face values implied by a cell state.
    pub fn face_values(&self, mesh: &Mesh, u: &[Vec3], p: &[f64]) -> (Vec<Vec3>, Vec<f64>) {
        let n_int = mesh.n_internal_faces();
        let ub = self
            .velocity
            .iter()
            .enumerate()
            .map(|(i, v)| v.unwrap_or(u[mesh.face(n_int + i).owner]))
            .collect();
        let pb = self
            .pressure
            .iter()
            .enumerate()
            .map(|(i, v)| v.unwrap_or(p[mesh.face(n_int + i).owner]))
            .collect();
        (ub, pb)
    }
}

/// One condition per mesh patch.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditionSet {
    pub conditions: Vec<PatchCondition>,
}

impl BoundaryConditionSet {
    pub fn new(conditions: Vec<PatchCondition>) -> Self {
        BoundaryConditionSet { conditions }
    }

    /// Checks coverage and consistency; returns the condition index of each patch.
    pub fn validate(&self, mesh: &Mesh) -> Result<Vec<usize>> {
        let mut map = Vec::with_capacity(mesh.patches().len());
        for p in mesh.patches() {
            let hits: Vec<usize> = self
                .conditions
                .iter()
                .enumerate()
                .filter(|(_, c)| c.patch == p.name)
                .map(|(i, _)| i)
                .collect();
            match hits.as_slice() {
                [i] => map.push(*i),
                [] => {
                    return Err(Error::invalid(format!(
                        "patch '{}' has no boundary condition",
                        p.name
                    )))
                }
                _ => {
                    return Err(Error::invalid(format!(
                        "patch '{}' has several boundary conditions",
                        p.name
                    )))
                }
            }
        }
        for c in &self.conditions {
            let Some((_, patch)) = mesh.patch(&c.patch) else {
                return Err(Error::invalid(format!(
                    "boundary condition for unknown patch '{}'",
                    c.patch
                )));
            };
            if patch.kind == PatchKind::Wall && c.velocity != VelocityCondition::NoSlip {
                log::warn!(
                    "wall patch '{}' without a no-slip velocity condition",
                    c.patch
                );
            }
            if let VelocityCondition::Inflow(inflow) = &c.velocity {
                inflow.waveform.validate()?;
                if let Some(d) = inflow.direction {
                    if !(d.norm() > 0.0) {
                        return Err(Error::invalid("inflow direction must be non-zero"));
                    }
                }
            }
        }
        let has_reference = self.conditions.iter().any(|c| {
            matches!(
                c.pressure,
                PressureCondition::FixedValue(_) | PressureCondition::Windkessel(_)
            )
        });
        if !has_reference {
            return Err(Error::invalid(
                "no pressure reference: at least one patch needs a fixed or Windkessel pressure",
            ));
        }
        Ok(map)
    }

    pub fn condition(&self, patch: &str) -> Option<&PatchCondition> {
        self.conditions.iter().find(|c| c.patch == patch)
    }

    pub fn windkessels(&self) -> impl Iterator<Item = (&str, &SiWindkessel)> {
        self.conditions.iter().filter_map(|c| match &c.pressure {
            PressureCondition::Windkessel(w) => Some((c.patch.as_str(), w)),
            _ => None,
        })
    }

    /// Advances every coupled outlet using the outgoing flux of `state`.
    pub fn advance_windkessels(&mut self, mesh: &Mesh, state: &FlowState, dt: f64) -> Result<()> {
        for c in &mut self.conditions {
            if let PressureCondition::Windkessel(w) = &mut c.pressure {
                let (idx, _) = mesh
                    .patch(&c.patch)
                    .ok_or_else(|| Error::invalid(format!("unknown patch '{}'", c.patch)))?;
                w.advance(state.patch_flux(mesh, idx), dt)?;
            }
        }
        Ok(())
    }

    /// Total prescribed inflow at time `t` [m³/s].
    pub fn inflow_at(&self, t: f64) -> f64 {
        self.conditions
            .iter()
            .filter_map(|c| match &c.velocity {
                VelocityCondition::Inflow(i) => Some(i.waveform.flow_at(t)),
                _ => None,
            })
            .sum()
    }

    pub fn resolve(&self, mesh: &Mesh, t: f64) -> Result<ResolvedBoundary> {
        let map = self.validate(mesh)?;
        let n_b = mesh.n_boundary_faces();
        let n_int = mesh.n_internal_faces();
        let mut velocity = vec![None; n_b];
        let mut pressure = vec![None; n_b];
        for (pi, patch) in mesh.patches().iter().enumerate() {
            let cond = &self.conditions[map[pi]];
            let p_value = match &cond.pressure {
                PressureCondition::ZeroGradient => None,
                PressureCondition::FixedValue(v) => Some(*v),
                PressureCondition::Windkessel(w) => Some(w.pressure),
            };
            for f in patch.faces() {
                pressure[f - n_int] = p_value;
            }
            match &cond.velocity {
                VelocityCondition::NoSlip => {
                    for f in patch.faces() {
                        velocity[f - n_int] = Some(Vec3::zeros());
                    }
                }
                VelocityCondition::ZeroGradient => {}
                VelocityCondition::Inflow(inflow) => {
                    let values = inflow_face_velocities(mesh, pi, inflow, t)?;
                    for (f, v) in patch.faces().zip(values) {
                        velocity[f - n_int] = Some(v);
                    }
                }
            }
        }
        Ok(ResolvedBoundary { velocity, pressure })
    }
}

/// Face velocities on an inflow patch carrying exactly the waveform's flow rate.
fn inflow_face_velocities(mesh: &Mesh, patch: usize, inflow: &Inflow, t: f64) -> Result<Vec<Vec3>> {
    let faces = mesh.patches()[patch].faces();
    let sum_area: Vec3 = faces.clone().map(|f| mesh.face(f).area).sum();
    let inward = -sum_area.normalize();
    let dir = inflow.direction.map(|d| d.normalize()).unwrap_or(inward);
    let shape: Vec<f64> = match inflow.profile {
        InflowProfile::Plug => vec![1.0; faces.len()],
        InflowProfile::Parabolic => {
            let c = mesh.patch_centroid(patch);
            let n = sum_area.normalize();
            let radial = |x: Vec3| {
                let r = x - c;
                (r - n * r.dot(&n)).norm()
            };
            let r_max = faces
                .clone()
                .flat_map(|f| {
                    mesh.face_vertices(f)
                        .iter()
                        .map(|&v| radial(mesh.points()[v]))
                })
                .fold(0.0, f64::max);
            faces
                .clone()
                .map(|f| (1.0 - (radial(mesh.face(f).centroid) / r_max).powi(2)).max(0.0))
                .collect()
        }
    };
    let carried: f64 = faces
        .clone()
        .zip(&shape)
        .map(|(f, s)| s * dir.dot(&-mesh.face(f).area))
        .sum();
    if !(carried > 0.0) {
        return Err(Error::invalid(format!(
            "inflow direction does not enter the domain through patch '{}'",
            mesh.patches()[patch].name
        )));
    }
    let q = inflow.waveform.flow_at(t);
    Ok(shape.iter().map(|s| dir * (q * s / carried)).collect())
}
