//! Time marching with Windkessel coupling, observers and steady-state detection.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, PatchKind};

use super::bc::BoundaryConditionSet;
use super::piso::{piso_step, SolverConfig};
use super::{FlowState, FluidProperties};

/// Scalar diagnostics of one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSummary {
    pub step: usize,
    pub time: f64,
    pub p_avg: f64,
    pub kinetic_energy: f64,
    /// Net inflow through inlet patches [m³/s].
    pub inflow: f64,
    /// Outflow per outlet patch, in patch order of the mesh [m³/s].
    pub outlet_flows: Vec<f64>,
    /// Area-averaged pressure per outlet patch [Pa].
    pub outlet_pressures: Vec<f64>,
    pub cfl: f64,
    pub continuity_error: f64,
    pub pressure_iterations: usize,
}

/// Callback invoked after every step.
pub trait Observer {
    fn observe(&mut self, mesh: &Mesh, state: &FlowState, summary: &StepSummary) -> Result<()>;
}

impl<F> Observer for F
where
    F: FnMut(&Mesh, &FlowState, &StepSummary) -> Result<()>,
{
    fn observe(&mut self, mesh: &Mesh, state: &FlowState, summary: &StepSummary) -> Result<()> {
        self(mesh, state, summary)
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub summaries: Vec<StepSummary>,
    /// Time at which the steady-state criterion was first met.
    pub steady_at: Option<f64>,
    pub final_state: FlowState,
}

impl RunReport {
    /// Mass imbalance `|Q_in - sum Q_out| / Q_in` at the last step.
    pub fn mass_imbalance(&self) -> Option<f64> {
        let last = self.summaries.last()?;
        let out: f64 = last.outlet_flows.iter().sum();
        (last.inflow > 0.0).then(|| (last.inflow - out).abs() / last.inflow)
    }
}

pub struct Simulation<'m> {
    mesh: &'m Mesh,
    bcs: BoundaryConditionSet,
    props: FluidProperties,
    cfg: SolverConfig,
    state: FlowState,
    step: usize,
    history: Vec<(f64, f64, f64)>,
    steady_at: Option<f64>,
}

pub fn volume_average(mesh: &Mesh, values: &[f64]) -> f64 {
    values
        .iter()
        .zip(mesh.cell_volumes())
        .map(|(p, v)| p * v)
        .sum::<f64>()
        / mesh.total_volume()
}

fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

impl<'m> Simulation<'m> {
    pub fn new(
        mesh: &'m Mesh,
        bcs: BoundaryConditionSet,
        props: FluidProperties,
        cfg: SolverConfig,
        initial: FlowState,
    ) -> Result<Self> {
        cfg.validate()?;
        props.validate()?;
        bcs.validate(mesh)?;
        initial.check_sizes(mesh)?;
        Ok(Simulation {
            mesh,
            bcs,
            props,
            cfg,
            state: initial,
            step: 0,
            history: Vec::new(),
            steady_at: None,
        })
    }

    pub fn state(&self) -> &FlowState {
        &self.state
    }

    pub fn boundary_conditions(&self) -> &BoundaryConditionSet {
        &self.bcs
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn steady_at(&self) -> Option<f64> {
        self.steady_at
    }

    pub fn summarize(&self, cfl: f64, pressure_iterations: usize) -> StepSummary {
        let mesh = self.mesh;
        let s = &self.state;
        let n_int = mesh.n_internal_faces();
        let mut inflow = 0.0;
        let mut outlet_flows = Vec::new();
        let mut outlet_pressures = Vec::new();
        for (i, p) in mesh.patches().iter().enumerate() {
            match p.kind {
                PatchKind::Inlet => inflow -= s.patch_flux(mesh, i),
                PatchKind::Outlet => {
                    outlet_flows.push(s.patch_flux(mesh, i));
                    let (mut pa, mut a) = (0.0, 0.0);
                    for f in p.faces() {
                        let af = mesh.face(f).area.norm();
                        pa += s.p_boundary[f - n_int] * af;
                        a += af;
                    }
                    outlet_pressures.push(pa / a);
                }
                PatchKind::Wall => {}
            }
        }
        StepSummary {
            step: self.step,
            time: s.time,
            p_avg: volume_average(mesh, &s.p),
            kinetic_energy: s.kinetic_energy(mesh, &self.props),
            inflow,
            outlet_flows,
            outlet_pressures,
            cfl,
            continuity_error: s.continuity_error(mesh, self.cfg.dt),
            pressure_iterations,
        }
    }

    /// One coupled step: advance the Windkessel outlets with the current
    /// outflow, then solve the flow with the new outlet pressures.
    pub fn step(&mut self) -> Result<StepSummary> {
        let dt = self.cfg.dt;
        self.bcs.advance_windkessels(self.mesh, &self.state, dt)?;
        let t_next = self.state.time + dt;
        let resolved = self.bcs.resolve(self.mesh, t_next)?;
        let (next, report) = piso_step(self.mesh, &self.state, &resolved, &self.props, &self.cfg)?;
        self.state = next;
        self.step += 1;
        let summary = self.summarize(report.cfl, report.pressure_iterations);
        self.update_steady(&summary);
        Ok(summary)
    }

    fn update_steady(&mut self, s: &StepSummary) {
        self.history.push((s.time, s.p_avg, s.kinetic_energy));
        let tol = self.cfg.steady_detection_tol;
        if tol <= 0.0 || self.steady_at.is_some() {
            return;
        }
        let window = self.cfg.steady_window;
        let t0 = self.history[0].0 - self.cfg.dt;
        if s.time - t0 < window * (1.0 - 1e-9) {
            return;
        }
        let target = s.time - window;
        let idx = self
            .history
            .partition_point(|h| h.0 < target - 1e-9 * self.cfg.dt);
        let (_, p_old, ke_old) = self.history[idx.min(self.history.len() - 1)];
        if relative_change(s.p_avg, p_old) <= tol
            && relative_change(s.kinetic_energy, ke_old) <= tol
        {
            self.steady_at = Some(s.time);
        }
    }

    /// Runs to `t_end` (or until steady, if so configured).
    pub fn run(&mut self, observers: &mut [&mut dyn Observer]) -> Result<RunReport> {
        let n_steps = ((self.cfg.t_end - self.state.time) / self.cfg.dt - 1e-9)
            .ceil()
            .max(0.0) as usize;
        let mut summaries = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            let s = self.step()?;
            for o in observers.iter_mut() {
                o.observe(self.mesh, &self.state, &s).map_err(|e| match e {
                    Error::Observer(_) => e,
                    other => Error::Observer(other.to_string()),
                })?;
            }
            summaries.push(s);
            if self.cfg.stop_when_steady && self.steady_at.is_some() {
                break;
            }
        }
        Ok(RunReport {
            summaries,
            steady_at: self.steady_at,
            final_state: self.state.clone(),
        })
    }

    pub fn into_state(self) -> FlowState {
        self.state
    }
}

/// Convenience wrapper: builds a [`Simulation`] and runs it.
pub fn run_transient(
    mesh: &Mesh,
    bcs: BoundaryConditionSet,
    props: FluidProperties,
    cfg: SolverConfig,
    initial: FlowState,
    observers: &mut [&mut dyn Observer],
) -> Result<RunReport> {
    Simulation::new(mesh, bcs, props, cfg, initial)?.run(observers)
}
