//! TOML case files.
//!
//! ```toml
//! schema_version = 1
//!
//! [units]
//! flow = "l/min"
//! pressure = "mmHg"
//!
//! [mesh]
//! generator = "bifurcation"
//! trunk_length = 0.12
//! trunk_diameter = 0.028
//! branch_diameter = 0.0129
//! branch_angle = 60.0
//! resolution = 3
//!
//! [[boundary]]
//! patch = "inlet"
//! type = "inflow"
//! clinical = "post-1"
//!
//! [[boundary]]
//! patch = "outlet"
//! type = "windkessel"
//! clinical = "post-1"
//!
//! [[boundary]]
//! patch = "wall"
//! type = "wall"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fv::{
    stable_time_step, BoundaryConditionSet, CflPolicy, ConvectionScheme, FluidProperties, Inflow,
    InflowProfile, PatchCondition, PressureCondition, SolverConfig, Waveform,
};
use crate::mesh::{
    file::read_mesh, generate_bend_mesh, generate_bifurcation_mesh, generate_box_mesh,
    generate_channel_mesh, generate_pipe_mesh, BifurcationGeometry, Mesh, PatchKind, Vec3,
};
use crate::units::{lpm_to_m3s, mmhg_to_pa};
use crate::windkessel::{
    cardiac_period, data, estimate_outlet_set, total_compliance, ClinicalRecord, Configuration,
    OutletGeometry, SiWindkessel,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub schema_version: u32,
    #[serde(default)]
    pub units: Units,
    pub mesh: MeshSpec,
    #[serde(default = "FluidProperties::blood")]
    pub fluid: FluidProperties,
    #[serde(rename = "boundary")]
    pub boundaries: Vec<BoundarySpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Units of the flow and pressure values in the boundary table. Lengths are
/// always metres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub flow: FlowUnit,
    pub pressure: PressureUnit,
}

impl Default for Units {
    fn default() -> Self {
        Units {
            flow: FlowUnit::M3PerS,
            pressure: PressureUnit::Pa,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowUnit {
    #[serde(rename = "m3/s")]
    M3PerS,
    #[serde(rename = "l/min")]
    LitrePerMin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PressureUnit {
    Pa,
    #[serde(rename = "mmHg")]
    MmHg,
}

impl Units {
    pub fn flow_si(&self, q: f64) -> f64 {
        match self.flow {
            FlowUnit::M3PerS => q,
            FlowUnit::LitrePerMin => lpm_to_m3s(q),
        }
    }

    pub fn pressure_si(&self, p: f64) -> f64 {
        match self.pressure {
            PressureUnit::Pa => p,
            PressureUnit::MmHg => mmhg_to_pa(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeshSpec {
    File {
        path: PathBuf,
    },
    Channel {
        length: f64,
        height: f64,
        nx: usize,
        ny: usize,
    },
    Box {
        lengths: [f64; 3],
        counts: [usize; 3],
    },
    Pipe {
        length: f64,
        diameter: f64,
        axial_cells: usize,
        radial_cells: usize,
    },
    Bend {
        diameter: f64,
        bend_radius: f64,
        angle: f64,
        axial_cells: usize,
        radial_cells: usize,
    },
    Bifurcation {
        trunk_length: f64,
        trunk_diameter: f64,
        branch_diameter: f64,
        branch_angle: f64,
        resolution: usize,
    },
}

impl MeshSpec {
    /// Builds or loads the mesh; relative file paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<(Mesh, Option<BifurcationGeometry>)> {
        Ok(match self {
            MeshSpec::File { path } => (read_mesh(&base.join(path))?, None),
            MeshSpec::Channel {
                length,
                height,
                nx,
                ny,
            } => (generate_channel_mesh(*length, *height, *nx, *ny)?, None),
            MeshSpec::Box { lengths, counts } => (generate_box_mesh(*lengths, *counts)?, None),
            MeshSpec::Pipe {
                length,
                diameter,
                axial_cells,
                radial_cells,
            } => (
                generate_pipe_mesh(*length, *diameter, *axial_cells, *radial_cells)?,
                None,
            ),
            MeshSpec::Bend {
                diameter,
                bend_radius,
                angle,
                axial_cells,
                radial_cells,
            } => (
                generate_bend_mesh(*diameter, *bend_radius, *angle, *axial_cells, *radial_cells)?,
                None,
            ),
            MeshSpec::Bifurcation {
                trunk_length,
                trunk_diameter,
                branch_diameter,
                branch_angle,
                resolution,
            } => {
                let b = generate_bifurcation_mesh(
                    *trunk_length,
                    *trunk_diameter,
                    *branch_diameter,
                    *branch_angle,
                    *resolution,
                )?;
                (b.mesh, Some(b.geometry))
            }
        })
    }
}

/// Clinical record identifiers: `pre` or `post-1` .. `post-4`.
pub fn clinical_record(id: &str) -> Result<ClinicalRecord> {
    if id == "pre" {
        return Ok(data::pre_surgery());
    }
    id.strip_prefix("post-")
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|n| (1..=4).contains(n))
        .map(|n| data::post_surgery_tests()[n - 1].clone())
        .ok_or_else(|| {
            Error::schema(
                "boundary",
                format!("unknown clinical record '{id}' (use pre or post-1..post-4)"),
            )
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveformKind {
    #[default]
    Constant,
    Cardiac,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundarySpec {
    Inflow {
        patch: String,
        /// Mean flow in the declared flow unit.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        flow: Option<f64>,
        /// Takes the flow (and period, for `pre`) from a clinical record.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        clinical: Option<String>,
        #[serde(default)]
        waveform: WaveformKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<f64>,
        #[serde(default)]
        profile: ProfileKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        direction: Option<[f64; 3]>,
    },
    Pressure {
        patch: String,
        value: f64,
    },
    /// RCR outlet, either with explicit SI coefficients or estimated from a
    /// clinical record over all clinical Windkessel outlets by area.
    Windkessel {
        patch: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rp: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rd: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        clinical: Option<String>,
        /// Initial proximal pressure in the declared pressure unit.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p0: Option<f64>,
    },
    Outflow {
        patch: String,
    },
    Wall {
        patch: String,
    },
}

impl BoundarySpec {
    pub fn patch(&self) -> &str {
        match self {
            BoundarySpec::Inflow { patch, .. }
            | BoundarySpec::Pressure { patch, .. }
            | BoundarySpec::Windkessel { patch, .. }
            | BoundarySpec::Outflow { patch }
            | BoundarySpec::Wall { patch } => patch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    #[default]
    Plug,
    Parabolic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    /// Time step; derived from `cfl_target` and the peak inflow speed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub cfl_target: f64,
    pub t_end: f64,
    pub n_piso_loops: usize,
    pub n_nonorth_correctors: usize,
    pub lin_tol: f64,
    pub scheme: ConvectionScheme,
    pub steady_tol: f64,
    pub steady_window: f64,
    pub stop_when_steady: bool,
    pub cfl_cap: f64,
    pub cfl_policy: CflPolicy,
    pub max_linear_iterations: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSpec {
            dt: None,
            cfl_target: 0.5,
            t_end: d.t_end,
            n_piso_loops: d.n_piso_loops,
            n_nonorth_correctors: d.n_nonorth_correctors,
            lin_tol: d.lin_tol,
            scheme: d.convection_scheme,
            steady_tol: d.steady_detection_tol,
            steady_window: d.steady_window,
            stop_when_steady: d.stop_when_steady,
            cfl_cap: d.cfl_cap,
            cfl_policy: d.cfl_policy,
            max_linear_iterations: d.max_linear_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Steps between VTK field dumps; 0 writes only the final state.
    pub write_interval: usize,
    /// Steps between probe samples.
    pub probe_interval: usize,
    pub probes: Vec<[f64; 3]>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("output"),
            write_interval: 0,
            probe_interval: 1,
            probes: Vec::new(),
        }
    }
}

impl CaseFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let case: CaseFile =
            toml::from_str(text).map_err(|e| Error::schema("case file", e.to_string()))?;
        case.validate()?;
        Ok(case)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Schema { message, .. } => Error::schema(path.display().to_string(), message),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::schema("case file", e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::schema(
                "schema_version",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        self.fluid.validate()?;
        let mut seen = std::collections::HashSet::new();
        for b in &self.boundaries {
            if !seen.insert(b.patch()) {
                return Err(Error::schema(
                    "boundary",
                    format!("patch '{}' listed twice", b.patch()),
                ));
            }
            match b {
                BoundarySpec::Inflow {
                    flow,
                    clinical,
                    waveform,
                    period,
                    ..
                } => {
                    match (flow, clinical) {
                        (Some(_), None) | (None, Some(_)) => {}
                        _ => {
                            return Err(Error::schema(
                                "boundary",
                                format!(
                                    "inflow '{}' needs exactly one of flow or clinical",
                                    b.patch()
                                ),
                            ))
                        }
                    }
                    if let Some(id) = clinical {
                        clinical_record(id)?;
                    }
                    if *waveform == WaveformKind::Cardiac && period.is_none() && clinical.is_none()
                    {
                        return Err(Error::schema(
                            "boundary",
                            format!("cardiac inflow '{}' needs a period", b.patch()),
                        ));
                    }
                }
                BoundarySpec::Windkessel {
                    rp,
                    rd,
                    c,
                    clinical,
                    ..
                } => {
                    let explicit = rp.is_some() && rd.is_some() && c.is_some();
                    let none = rp.is_none() && rd.is_none() && c.is_none();
                    if explicit == clinical.is_some() || !(explicit || none) {
                        return Err(Error::schema(
                            "boundary",
                            format!(
                                "windkessel '{}' needs either rp, rd and c or clinical",
                                b.patch()
                            ),
                        ));
                    }
                    if let Some(id) = clinical {
                        clinical_record(id)?;
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Resolves the mesh, boundary conditions and solver settings. Relative
    /// paths are taken against `base`.
    pub fn prepare(&self, base: &Path) -> Result<PreparedCase> {
        let (mesh, geometry) = self.mesh.build(base)?;
        for b in &self.boundaries {
            if mesh.patch(b.patch()).is_none() {
                return Err(Error::schema(
                    "boundary",
                    format!("patch '{}' does not exist in the mesh", b.patch()),
                ));
            }
        }
        let mut conditions = Vec::new();
        let mut record = None;
        let mut clinical_outlets = Vec::new();
        for b in &self.boundaries {
            let cond = match b {
                BoundarySpec::Inflow {
                    patch,
                    flow,
                    clinical,
                    waveform,
                    period,
                    profile,
                    direction,
                } => {
                    let (mean, default_period) = match clinical {
                        Some(id) => {
                            let rec = clinical_record(id)?;
                            let q = lpm_to_m3s(rec.mean_flow()?);
                            let t = match (rec.sv, rec.co) {
                                (Some(sv), Some(co)) => Some(cardiac_period(sv, co)?),
                                _ => None,
                            };
                            record.get_or_insert(rec);
                            (q, t)
                        }
                        None => (self.units.flow_si(flow.unwrap_or(0.0)), None),
                    };
                    let wave = match waveform {
                        WaveformKind::Constant => Waveform::Constant { flow: mean },
                        WaveformKind::Cardiac => {
                            let t = period.or(default_period).ok_or_else(|| {
                                Error::schema(
                                    "boundary",
                                    format!("cardiac inflow '{patch}' needs a period"),
                                )
                            })?;
                            Waveform::cardiac(mean, t)
                        }
                    };
                    let mut inflow = match profile {
                        ProfileKind::Plug => Inflow::plug(wave),
                        ProfileKind::Parabolic => Inflow::parabolic(wave),
                    };
                    if let Some(d) = direction {
                        inflow = inflow.with_direction(Vec3::from(*d).normalize());
                    } else if let Some(g) = &geometry {
                        inflow = inflow.with_direction(g.inflow_direction());
                    }
                    PatchCondition::inlet(patch, inflow)
                }
                BoundarySpec::Pressure { patch, value } => PatchCondition::outlet(
                    patch,
                    PressureCondition::FixedValue(self.units.pressure_si(*value)),
                ),
                BoundarySpec::Windkessel {
                    patch,
                    rp,
                    rd,
                    c,
                    clinical,
                    p0,
                } => {
                    let p0 = self.units.pressure_si(p0.unwrap_or(0.0));
                    match clinical {
                        Some(id) => {
                            clinical_outlets.push((
                                patch.clone(),
                                clinical_record(id)?,
                                conditions.len(),
                            ));
                            PatchCondition::outlet(patch, PressureCondition::ZeroGradient)
                        }
                        None => PatchCondition::outlet(
                            patch,
                            PressureCondition::Windkessel(SiWindkessel::new(
                                patch,
                                rp.unwrap(),
                                rd.unwrap(),
                                c.unwrap(),
                                p0,
                            )?),
                        ),
                    }
                }
                BoundarySpec::Outflow { patch } => {
                    PatchCondition::outlet(patch, PressureCondition::ZeroGradient)
                }
                BoundarySpec::Wall { patch } => PatchCondition::wall(patch),
            };
            conditions.push(cond);
        }
        if !clinical_outlets.is_empty() {
            let rec = clinical_outlets[0].1.clone();
            if clinical_outlets.iter().any(|o| o.1 != rec) {
                return Err(Error::schema(
                    "boundary",
                    "all clinical windkessel outlets must share one record",
                ));
            }
            let geometry: Vec<OutletGeometry> = clinical_outlets
                .iter()
                .map(|(name, _, _)| {
                    let (id, _) = mesh.patch(name).unwrap();
                    OutletGeometry::new(name, mesh.patch_area(id) * 1e4)
                })
                .collect();
            let pre = data::pre_surgery();
            let c_total = total_compliance(pre.pas.unwrap(), pre.pad.unwrap(), pre.sv.unwrap())?;
            let outlets = estimate_outlet_set(&rec, &geometry, c_total)?;
            for ((_, _, slot), wk) in clinical_outlets.iter().zip(outlets) {
                let patch = conditions[*slot].patch.clone();
                conditions[*slot] =
                    PatchCondition::outlet(&patch, PressureCondition::Windkessel(wk.to_si()));
            }
            record.get_or_insert(rec);
        }
        let s = &self.solver;
        let cfg = SolverConfig {
            dt: s.dt.unwrap_or(1.0),
            t_end: s.t_end,
            n_piso_loops: s.n_piso_loops,
            n_nonorth_correctors: s.n_nonorth_correctors,
            lin_tol: s.lin_tol,
            convection_scheme: s.scheme,
            steady_detection_tol: s.steady_tol,
            steady_window: s.steady_window,
            stop_when_steady: s.stop_when_steady,
            cfl_cap: s.cfl_cap,
            cfl_policy: s.cfl_policy,
            max_linear_iterations: s.max_linear_iterations,
        };
        let mut prepared = PreparedCase {
            mesh,
            geometry,
            props: self.fluid,
            bcs: BoundaryConditionSet::new(conditions),
            cfg,
            output: self.output.clone(),
            record,
            cfl_target: s.cfl_target,
            auto_dt: s.dt.is_none(),
        };
        prepared.bcs.validate(&prepared.mesh)?;
        if s.dt.is_none() {
            prepared.cfg.dt = prepared.auto_time_step(prepared.peak_inflow());
        }
        prepared.cfg.validate()?;
        Ok(prepared)
    }
}

/// A case resolved into solver inputs.
#[derive(Debug, Clone)]
pub struct PreparedCase {
    pub mesh: Mesh,
    pub geometry: Option<BifurcationGeometry>,
    pub props: FluidProperties,
    pub bcs: BoundaryConditionSet,
    pub cfg: SolverConfig,
    pub output: OutputSpec,
    /// Clinical record referenced by the boundary table, if any.
    pub record: Option<ClinicalRecord>,
    pub cfl_target: f64,
    /// True when `cfg.dt` was derived from `cfl_target`.
    pub auto_dt: bool,
}

impl PreparedCase {
    fn inflows(&self) -> impl Iterator<Item = &Inflow> {
        self.bcs
            .conditions
            .iter()
            .filter_map(|c| match &c.velocity {
                crate::fv::VelocityCondition::Inflow(i) => Some(i),
                _ => None,
            })
    }

    /// Largest instantaneous inflow over one period (or the constant flow).
    pub fn peak_inflow(&self) -> f64 {
        self.inflows()
            .map(|i| match i.waveform.period() {
                Some(t) => (0..200)
                    .map(|k| i.waveform.flow_at(t * k as f64 / 200.0))
                    .fold(0.0, f64::max),
                None => i.waveform.mean_flow(),
            })
            .sum()
    }

    /// Time step meeting `cfl_target` for the inflow speed at `flow`,
    /// checked along the inflow direction and the three coordinate axes.
    pub fn auto_time_step(&self, flow: f64) -> f64 {
        let mut candidates = Vec::new();
        for c in &self.bcs.conditions {
            if let crate::fv::VelocityCondition::Inflow(inflow) = &c.velocity {
                let (id, _) = self.mesh.patch(&c.patch).expect("validated patch");
                let factor = if inflow.profile == InflowProfile::Parabolic {
                    2.0
                } else {
                    1.0
                };
                let speed = factor * flow / self.mesh.patch_area(id);
                let dir = inflow
                    .direction
                    .unwrap_or_else(|| -self.mesh.patch_centroid(id).normalize());
                candidates.push(dir * speed);
                candidates.extend([Vec3::x() * speed, Vec3::y() * speed, Vec3::z() * speed]);
            }
        }
        let dt = stable_time_step(&self.mesh, &candidates, self.cfl_target);
        if dt.is_finite() {
            dt
        } else {
            self.cfg.dt
        }
    }

    /// Copy with every inflow replaced by the constant `flow` and every
    /// Windkessel placed at equilibrium for its parallel-resistance share.
    pub fn with_constant_inflow(&self, flow: f64) -> PreparedCase {
        let mut out = self.clone();
        let conductance: f64 = self
            .bcs
            .windkessels()
            .map(|(_, w)| 1.0 / (w.rp + w.rd))
            .sum();
        let conditions = self
            .bcs
            .conditions
            .iter()
            .map(|c| {
                let mut c = c.clone();
                if let crate::fv::VelocityCondition::Inflow(i) = &mut c.velocity {
                    i.waveform = Waveform::Constant { flow };
                }
                if let PressureCondition::Windkessel(w) = &mut c.pressure {
                    w.set_equilibrium(flow / (w.rp + w.rd) / conductance);
                }
                c
            })
            .collect();
        out.bcs = BoundaryConditionSet::new(conditions);
        out
    }

    /// Initial uniform pressure: the mean of the outlet pressures in force at t = 0.
    pub fn initial_pressure(&self) -> f64 {
        let ps: Vec<f64> = self
            .bcs
            .conditions
            .iter()
            .filter_map(|c| match &c.pressure {
                PressureCondition::FixedValue(p) => Some(*p),
                PressureCondition::Windkessel(w) => Some(w.pressure),
                PressureCondition::ZeroGradient => None,
            })
            .collect();
        if ps.is_empty() {
            0.0
        } else {
            ps.iter().sum::<f64>() / ps.len() as f64
        }
    }

    pub fn is_pulsatile(&self) -> bool {
        self.inflows().any(|i| i.waveform.period().is_some())
    }

    pub fn period(&self) -> Option<f64> {
        self.inflows().find_map(|i| i.waveform.period())
    }

    pub fn wall_patches(&self) -> Vec<String> {
        self.mesh
            .patches()
            .iter()
            .filter(|p| p.kind == PatchKind::Wall)
            .map(|p| p.name.clone())
            .collect()
    }

    /// True for post-surgery records.
    pub fn is_post_surgery(&self) -> bool {
        self.record
            .as_ref()
            .is_some_and(|r| r.configuration == Configuration::Post)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PIPE: &str = r#"
schema_version = 1

[units]
flow = "l/min"
pressure = "mmHg"

[mesh]
generator = "pipe"
length = 0.05
diameter = 0.01
axial_cells = 4
radial_cells = 2

[[boundary]]
patch = "inlet"
type = "inflow"
flow = 0.5

[[boundary]]
patch = "outlet"
type = "pressure"
value = 10.0

[[boundary]]
patch = "wall"
type = "wall"

[solver]
t_end = 0.01
"#;

    #[test]
    fn parses_and_prepares() {
        let case = CaseFile::from_toml_str(PIPE).unwrap();
        let p = case.prepare(Path::new(".")).unwrap();
        assert!((p.peak_inflow() - lpm_to_m3s(0.5)).abs() < 1e-15);
        assert!((p.initial_pressure() - mmhg_to_pa(10.0)).abs() < 1e-9);
        assert!(p.cfg.dt > 0.0 && p.cfg.dt < 1.0);
        let again = CaseFile::from_toml_str(&case.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, case);
    }

    #[test]
    fn unknown_keys_are_named() {
        let text = PIPE.replace("t_end = 0.01", "t_end = 0.01\ntimestep = 3");
        let err = CaseFile::from_toml_str(&text).unwrap_err();
        assert!(err.is_usage());
        assert!(err.to_string().contains("timestep"), "{err}");
        let text = PIPE.replace("axial_cells = 4", "axial_cells = 4\nrings = 2");
        assert!(CaseFile::from_toml_str(&text)
            .unwrap_err()
            .to_string()
            .contains("rings"));
    }

    #[test]
    fn rejects_bad_references() {
        let text = PIPE.replace("schema_version = 1", "schema_version = 7");
        assert!(CaseFile::from_toml_str(&text).is_err());
        let text = PIPE.replace("flow = 0.5", "clinical = \"post-9\"");
        assert!(CaseFile::from_toml_str(&text).is_err());
        let text = PIPE.replace("patch = \"wall\"", "patch = \"walls\"");
        let case = CaseFile::from_toml_str(&text).unwrap();
        assert!(case
            .prepare(Path::new("."))
            .unwrap_err()
            .to_string()
            .contains("walls"));
    }

    #[test]
    fn clinical_windkessel_uses_record_resistance() {
        let text = PIPE.replace("flow = 0.5", "clinical = \"post-1\"").replace(
            "type = \"pressure\"\nvalue = 10.0",
            "type = \"windkessel\"\nclinical = \"post-1\"",
        );
        let p = CaseFile::from_toml_str(&text)
            .unwrap()
            .prepare(Path::new("."))
            .unwrap();
        let (_, wk) = p.bcs.windkessels().next().unwrap();
        assert!(((wk.rp + wk.rd) / 1.522e8 - 1.0).abs() < 0.01);
        assert!((wk.c / 9.85e-9 - 1.0).abs() < 0.01);
        assert!(p.is_post_surgery());
        let q = p.peak_inflow();
        let eq = p.with_constant_inflow(q);
        let (_, wk) = eq.bcs.windkessels().next().unwrap();
        assert!((wk.pressure - (wk.rp + wk.rd) * q).abs() < 1e-9 * wk.pressure);
    }
}
