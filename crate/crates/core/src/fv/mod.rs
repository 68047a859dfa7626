//! Collocated finite-volume solver for incompressible Newtonian flow.
//!
//! Pressure is absolute (Pa) and fluxes `phi` are volumetric (m³/s) on every
//! face, positive out of the owner cell. Velocities are cell-centred;
//! boundary-face values of `u` and `p` are kept alongside so that
//! post-processing never needs the boundary conditions again.

pub mod bc;
pub mod operators;
pub mod piso;
pub mod transient;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec3};

pub use bc::{
    BoundaryConditionSet, Inflow, InflowProfile, PatchCondition, PressureCondition,
    ResolvedBoundary, VelocityCondition, Waveform,
};
pub use operators::{convective_term, diffusion_term, gradient_term, ConvectionScheme};
pub use piso::{piso_step, stable_time_step, CflPolicy, SolverConfig, StepReport};
pub use transient::{run_transient, Observer, RunReport, Simulation, StepSummary};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidProperties {
    /// Density [kg/m³].
    pub rho: f64,
    /// Dynamic viscosity [Pa·s].
    pub mu: f64,
}

impl FluidProperties {
    pub fn new(rho: f64, mu: f64) -> Result<Self> {
        let p = FluidProperties { rho, mu };
        p.validate()?;
        Ok(p)
    }

    /// Blood as a Newtonian fluid.
    pub fn blood() -> Self {
        FluidProperties {
            rho: 1060.0,
            mu: 0.004,
        }
    }

    pub fn nu(&self) -> f64 {
        self.mu / self.rho
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0 && self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::invalid(format!(
                "density and viscosity must be positive, got rho={} mu={}",
                self.rho, self.mu
            )));
        }
        Ok(())
    }
}

/// Velocity, pressure and face fluxes at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub u: Vec<Vec3>,
    pub p: Vec<f64>,
    pub phi: Vec<f64>,
    /// Velocity on boundary faces, indexed by `face - n_internal_faces`.
    pub u_boundary: Vec<Vec3>,
    pub p_boundary: Vec<f64>,
    pub time: f64,
}

impl FlowState {
    /// Fluid at rest with uniform pressure `p0`.
    pub fn at_rest(mesh: &Mesh, p0: f64) -> Self {
        FlowState {
            u: vec![Vec3::zeros(); mesh.n_cells()],
            p: vec![p0; mesh.n_cells()],
            phi: vec![0.0; mesh.n_faces()],
            u_boundary: vec![Vec3::zeros(); mesh.n_boundary_faces()],
            p_boundary: vec![p0; mesh.n_boundary_faces()],
            time: 0.0,
        }
    }

    pub fn check_sizes(&self, mesh: &Mesh) -> Result<()> {
        if self.u.len() != mesh.n_cells()
            || self.p.len() != mesh.n_cells()
            || self.phi.len() != mesh.n_faces()
            || self.u_boundary.len() != mesh.n_boundary_faces()
            || self.p_boundary.len() != mesh.n_boundary_faces()
        {
            return Err(Error::invalid("flow state does not match the mesh"));
        }
        Ok(())
    }

    /// Net volumetric flux through a patch, positive outwards.
    pub fn patch_flux(&self, mesh: &Mesh, patch: usize) -> f64 {
        mesh.patches()[patch].faces().map(|f| self.phi[f]).sum()
    }

    /// Largest `|sum of outgoing fluxes| * dt / V` over cells.
    pub fn continuity_error(&self, mesh: &Mesh, dt: f64) -> f64 {
        let mut net = vec![0.0; mesh.n_cells()];
        for (f, face) in mesh.faces().iter().enumerate() {
            net[face.owner] += self.phi[f];
            if let Some(n) = face.neighbour {
                net[n] -= self.phi[f];
            }
        }
        net.iter()
            .zip(mesh.cell_volumes())
            .map(|(s, v)| (s * dt / v).abs())
            .fold(0.0, f64::max)
    }

    pub fn kinetic_energy(&self, mesh: &Mesh, props: &FluidProperties) -> f64 {
        0.5 * props.rho
            * self
                .u
                .iter()
                .zip(mesh.cell_volumes())
                .map(|(u, v)| u.norm_squared() * v)
                .sum::<f64>()
    }
}
