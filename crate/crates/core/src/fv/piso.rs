//! One BDF1/PISO time step.
//!
//! The momentum matrix is assembled once per step with the fluxes of the
//! previous level: implicit Euler in time, implicit upwind convection with a
//! deferred correction towards the selected scheme, and implicit two-point
//! diffusion with an explicit non-orthogonal correction. Each PISO loop
//! forms `HbyA`, interpolates it to the faces with the Rhie-Chow time
//! correction, solves the pressure equation (repeated for non-orthogonal
//! correctors when the mesh needs them) and corrects fluxes and velocities.

use crate::error::{Error, Result};
use crate::linalg::{solve_pcg, solve_sgs, Criterion, LduMatrix};
use crate::mesh::{Mesh, Vec3};

use super::bc::ResolvedBoundary;
use super::operators::{
    convected_value, gauss_gradient_scalar, gauss_gradient_vector, gradient_term, interpolate,
};
use super::{ConvectionScheme, FlowState, FluidProperties};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CflPolicy {
    Warn,
    Fail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub n_piso_loops: usize,
    pub n_nonorth_correctors: usize,
    pub lin_tol: f64,
    pub convection_scheme: ConvectionScheme,
    /// Relative change of the volume-averaged pressure and kinetic energy
    /// over `steady_window` below which the run counts as steady (0 disables).
    pub steady_detection_tol: f64,
    pub steady_window: f64,
    pub stop_when_steady: bool,
    pub cfl_cap: f64,
    pub cfl_policy: CflPolicy,
    pub max_linear_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-3,
            t_end: 1.0,
            n_piso_loops: 2,
            n_nonorth_correctors: 2,
            lin_tol: 1e-6,
            convection_scheme: ConvectionScheme::SecondOrderUpwind,
            steady_detection_tol: 0.0,
            steady_window: 0.1,
            stop_when_steady: false,
            cfl_cap: 0.9,
            cfl_policy: CflPolicy::Warn,
            max_linear_iterations: 2000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::invalid(format!(
                "t_end must be non-negative, got {}",
                self.t_end
            )));
        }
        if self.n_piso_loops < 1 {
            return Err(Error::invalid("n_piso_loops must be at least 1"));
        }
        if !(self.lin_tol > 0.0) {
            return Err(Error::invalid(format!(
                "lin_tol must be positive, got {}",
                self.lin_tol
            )));
        }
        if self.steady_detection_tol < 0.0
            || (self.steady_detection_tol > 0.0 && !(self.steady_window > 0.0))
        {
            return Err(Error::invalid(
                "steady detection needs a non-negative tolerance and a positive window",
            ));
        }
        if !(self.cfl_cap > 0.0) {
            return Err(Error::invalid("cfl_cap must be positive"));
        }
        if self.max_linear_iterations == 0 {
            return Err(Error::invalid("max_linear_iterations must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub cfl: f64,
    pub momentum_iterations: usize,
    pub pressure_iterations: usize,
    pub pressure_solves: usize,
    pub continuity_error: f64,
}

/// Largest cell Courant number `0.5 dt sum_f |phi_f| / V`.
pub fn courant_number(mesh: &Mesh, phi: &[f64], dt: f64) -> f64 {
    let mut s = vec![0.0; mesh.n_cells()];
    for (f, face) in mesh.faces().iter().enumerate() {
        s[face.owner] += phi[f].abs();
        if let Some(n) = face.neighbour {
            s[n] += phi[f].abs();
        }
    }
    s.iter()
        .zip(mesh.cell_volumes())
        .map(|(si, v)| 0.5 * dt * si / v)
        .fold(0.0, f64::max)
}

/// Largest time step keeping the Courant number at `target` for each
/// candidate uniform velocity; the most restrictive cell and candidate win.
pub fn stable_time_step(mesh: &Mesh, velocities: &[Vec3], target: f64) -> f64 {
    let mut dt = f64::INFINITY;
    for v in velocities {
        let phi: Vec<f64> = mesh.faces().iter().map(|f| v.dot(&f.area)).collect();
        let co = courant_number(mesh, &phi, 1.0);
        if co > 0.0 {
            dt = dt.min(target / co);
        }
    }
    dt
}

/// True when some face has a non-orthogonal part worth correcting.
pub fn needs_non_orthogonal_correction(mesh: &Mesh) -> bool {
    (0..mesh.n_faces())
        .any(|f| mesh.non_orthogonal_part(f).norm() > 1e-10 * mesh.face(f).area.norm())
}

fn component(v: &Vec3, c: usize) -> f64 {
    v[c]
}

/// Advances `state` by one step of `cfg.dt` under boundary conditions
/// evaluated at the new time level.
pub fn piso_step(
    mesh: &Mesh,
    state: &FlowState,
    bc: &ResolvedBoundary,
    props: &FluidProperties,
    cfg: &SolverConfig,
) -> Result<(FlowState, StepReport)> {
    cfg.validate()?;
    props.validate()?;
    state.check_sizes(mesh)?;
    let n = mesh.n_cells();
    let n_int = mesh.n_internal_faces();
    let n_b = mesh.n_boundary_faces();
    if bc.velocity.len() != n_b || bc.pressure.len() != n_b {
        return Err(Error::invalid(
            "resolved boundary conditions do not match the mesh",
        ));
    }
    if !bc.has_pressure_reference() {
        return Err(Error::invalid("no pressure reference on any boundary face"));
    }
    let dt = cfg.dt;
    let (rho, mu) = (props.rho, props.mu);
    let ldu = mesh.ldu();
    let vol = mesh.cell_volumes();
    let comps = mesh.dimension();

    let cfl = courant_number(mesh, &state.phi, dt);
    if cfl > cfg.cfl_cap {
        match cfg.cfl_policy {
            CflPolicy::Warn => log::warn!("Courant number {cfl:.3} above cap {:.3}", cfg.cfl_cap),
            CflPolicy::Fail => {
                return Err(Error::CflExceeded {
                    cfl,
                    cap: cfg.cfl_cap,
                })
            }
        }
    }

    let use_nonorth = cfg.n_nonorth_correctors > 0 && needs_non_orthogonal_correction(mesh);
    let (ub_old, pb_old) = bc.face_values(mesh, &state.u, &state.p);
    let grad_u = (cfg.convection_scheme == ConvectionScheme::SecondOrderUpwind || use_nonorth)
        .then(|| gauss_gradient_vector(mesh, &state.u, &ub_old));

    // momentum matrix and pressure-free source
    let mut m = LduMatrix::zeros(n, n_int);
    let mut src = vec![Vec3::zeros(); n];
    for i in 0..n {
        let a = rho * vol[i] / dt;
        m.diag[i] = a;
        src[i] = state.u[i] * a;
    }
    for f in 0..n_int {
        let face = mesh.face(f);
        let (o, nb) = (face.owner, face.neighbour.unwrap());
        let flux = rho * state.phi[f];
        let gamma = mu * mesh.delta_coeff(f);
        m.diag[o] += flux.max(0.0) + gamma;
        m.upper[f] += flux.min(0.0) - gamma;
        m.diag[nb] += (-flux).max(0.0) + gamma;
        m.lower[f] += -flux.max(0.0) - gamma;
        if cfg.convection_scheme != ConvectionScheme::Upwind {
            let ho = convected_value(
                mesh,
                cfg.convection_scheme,
                f,
                flux,
                &state.u,
                grad_u.as_deref(),
            );
            let ud = if flux >= 0.0 { state.u[o] } else { state.u[nb] };
            let corr = (ho - ud) * flux;
            src[o] -= corr;
            src[nb] += corr;
        }
        if use_nonorth {
            let g = grad_u.as_ref().unwrap();
            let c = interpolate(mesh, f, g[o], g[nb]) * mesh.non_orthogonal_part(f) * mu;
            src[o] += c;
            src[nb] -= c;
        }
    }
    for f in n_int..mesh.n_faces() {
        let face = mesh.face(f);
        let o = face.owner;
        match bc.velocity[f - n_int] {
            Some(ub) => {
                let flux = rho * ub.dot(&face.area);
                let gamma = mu * mesh.delta_coeff(f);
                src[o] += ub * (gamma - flux);
                m.diag[o] += gamma;
                if use_nonorth {
                    src[o] += grad_u.as_ref().unwrap()[o] * mesh.non_orthogonal_part(f) * mu;
                }
            }
            None => {
                let flux = rho * state.phi[f];
                m.diag[o] += flux.max(0.0);
                src[o] -= state.u[o] * flux.min(0.0);
            }
        }
    }

    // momentum predictor
    let grad_p = gradient_term(mesh, &state.p, &pb_old);
    let mut u = state.u.clone();
    let mut momentum_iterations = 0;
    let mut b = vec![0.0; n];
    let mut x = vec![0.0; n];
    for c in 0..comps {
        for i in 0..n {
            b[i] = component(&src[i], c) - component(&grad_p[i], c);
            x[i] = component(&state.u[i], c);
        }
        let stats = solve_sgs(
            &m,
            ldu,
            &b,
            &mut x,
            Criterion::Relative(cfg.lin_tol),
            cfg.max_linear_iterations,
            "momentum",
        )?;
        momentum_iterations += stats.iterations;
        for i in 0..n {
            u[i][c] = x[i];
        }
    }

    let rauv: Vec<f64> = (0..n).map(|i| vol[i] / m.diag[i]).collect();
    let ddt_coeff: Vec<f64> = (0..n).map(|i| rho * vol[i] / dt / m.diag[i]).collect();
    let scale: Vec<f64> = vol.iter().map(|v| dt / v).collect();

    // pressure matrix: depends only on the momentum diagonal
    let mut pm = LduMatrix::zeros(n, n_int);
    let mut d_face = vec![0.0; mesh.n_faces()];
    for f in 0..n_int {
        let face = mesh.face(f);
        let (o, nb) = (face.owner, face.neighbour.unwrap());
        let d = interpolate(mesh, f, rauv[o], rauv[nb]) * mesh.delta_coeff(f);
        d_face[f] = d;
        pm.diag[o] += d;
        pm.diag[nb] += d;
        pm.upper[f] = -d;
        pm.lower[f] = -d;
    }
    for f in n_int..mesh.n_faces() {
        if bc.pressure[f - n_int].is_some() {
            let o = mesh.face(f).owner;
            let d = rauv[o] * mesh.delta_coeff(f);
            d_face[f] = d;
            pm.diag[o] += d;
        }
    }

    let mut p = state.p.clone();
    let mut phi = state.phi.clone();
    let mut pressure_iterations = 0;
    let mut pressure_solves = 0;
    let n_solves = if use_nonorth {
        cfg.n_nonorth_correctors + 1
    } else {
        1
    };
    let mut phi_hbya = vec![0.0; mesh.n_faces()];
    let mut nonorth_flux = vec![0.0; n_int];
    let mut rhs = vec![0.0; n];
    for _ in 0..cfg.n_piso_loops {
        // HbyA = (source - off-diagonal part applied to u) / diagonal
        let mut hbya = src.clone();
        for f in 0..n_int {
            let (o, nb) = (ldu.lower[f], ldu.upper[f]);
            hbya[o] -= u[nb] * m.upper[f];
            hbya[nb] -= u[o] * m.lower[f];
        }
        for i in 0..n {
            hbya[i] /= m.diag[i];
        }
        for f in 0..n_int {
            let face = mesh.face(f);
            let (o, nb) = (face.owner, face.neighbour.unwrap());
            let h = interpolate(mesh, f, hbya[o], hbya[nb]).dot(&face.area);
            let u_old = interpolate(mesh, f, state.u[o], state.u[nb]).dot(&face.area);
            let c = interpolate(mesh, f, ddt_coeff[o], ddt_coeff[nb]);
            phi_hbya[f] = h + c * (state.phi[f] - u_old);
        }
        for f in n_int..mesh.n_faces() {
            let face = mesh.face(f);
            phi_hbya[f] = match bc.velocity[f - n_int] {
                Some(ub) => ub.dot(&face.area),
                None => hbya[face.owner].dot(&face.area),
            };
        }

        for _ in 0..n_solves {
            rhs.iter_mut().for_each(|r| *r = 0.0);
            for f in 0..n_int {
                rhs[ldu.lower[f]] -= phi_hbya[f];
                rhs[ldu.upper[f]] += phi_hbya[f];
            }
            for f in n_int..mesh.n_faces() {
                let o = mesh.face(f).owner;
                rhs[o] -= phi_hbya[f];
                if let Some(pb) = bc.pressure[f - n_int] {
                    rhs[o] += d_face[f] * pb;
                }
            }
            if use_nonorth {
                let (_, pb) = bc.face_values(mesh, &u, &p);
                let gp = gauss_gradient_scalar(mesh, &p, &pb);
                for f in 0..n_int {
                    let (o, nb) = (ldu.lower[f], ldu.upper[f]);
                    let k = mesh.non_orthogonal_part(f);
                    let c = interpolate(mesh, f, rauv[o], rauv[nb])
                        * interpolate(mesh, f, gp[o], gp[nb]).dot(&k);
                    nonorth_flux[f] = c;
                    rhs[o] += c;
                    rhs[nb] -= c;
                }
            }
            let stats = solve_pcg(
                &pm,
                ldu,
                &rhs,
                &mut p,
                Criterion::ScaledMax(cfg.lin_tol, &scale),
                cfg.max_linear_iterations,
                "pressure",
            )?;
            pressure_iterations += stats.iterations;
            pressure_solves += 1;
        }

        for f in 0..n_int {
            let (o, nb) = (ldu.lower[f], ldu.upper[f]);
            phi[f] = phi_hbya[f]
                - d_face[f] * (p[nb] - p[o])
                - if use_nonorth { nonorth_flux[f] } else { 0.0 };
        }
        for f in n_int..mesh.n_faces() {
            let o = mesh.face(f).owner;
            phi[f] = match bc.pressure[f - n_int] {
                Some(pb) => phi_hbya[f] - d_face[f] * (pb - p[o]),
                None => phi_hbya[f],
            };
        }
        let (_, pb) = bc.face_values(mesh, &u, &p);
        let gp = gradient_term(mesh, &p, &pb);
        for i in 0..n {
            u[i] = hbya[i] - gp[i] / m.diag[i];
            if comps == 2 {
                u[i].z = 0.0;
            }
        }
    }

    let (u_boundary, p_boundary) = bc.face_values(mesh, &u, &p);
    let next = FlowState {
        u,
        p,
        phi,
        u_boundary,
        p_boundary,
        time: state.time + dt,
    };
    let continuity_error = next.continuity_error(mesh, dt);
    Ok((
        next,
        StepReport {
            cfl,
            momentum_iterations,
            pressure_iterations,
            pressure_solves,
            continuity_error,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fv::bc::{
        BoundaryConditionSet, Inflow, PatchCondition, PressureCondition, Waveform,
    };
    use crate::mesh::generate_channel_mesh;

    fn channel_bcs(q: f64) -> BoundaryConditionSet {
        BoundaryConditionSet::new(vec![
            PatchCondition::inlet("inlet", Inflow::plug(Waveform::Constant { flow: q })),
            PatchCondition::outlet("outlet", PressureCondition::FixedValue(0.0)),
            PatchCondition::wall("wall"),
        ])
    }

    #[test]
    fn fluid_at_rest_stays_at_rest() {
        let mesh = generate_channel_mesh(1.0, 0.2, 10, 4).unwrap();
        let bc = channel_bcs(0.0).resolve(&mesh, 0.0).unwrap();
        let mut state = FlowState::at_rest(&mesh, 0.0);
        let cfg = SolverConfig {
            dt: 0.01,
            ..SolverConfig::default()
        };
        for _ in 0..5 {
            state = piso_step(&mesh, &state, &bc, &FluidProperties::blood(), &cfg)
                .unwrap()
                .0;
        }
        assert!(state.u.iter().all(|u| *u == Vec3::zeros()));
        assert!(state.p.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn step_conserves_mass_and_respects_walls() {
        let mesh = generate_channel_mesh(0.05, 0.01, 20, 6).unwrap();
        let bc = channel_bcs(1e-3).resolve(&mesh, 0.0).unwrap();
        let cfg = SolverConfig {
            dt: 5e-3,
            ..SolverConfig::default()
        };
        let mut state = FlowState::at_rest(&mesh, 0.0);
        for _ in 0..10 {
            let (s, rep) = piso_step(&mesh, &state, &bc, &FluidProperties::blood(), &cfg).unwrap();
            assert!(rep.continuity_error <= cfg.lin_tol * (1.0 + 1e-9));
            state = s;
        }
        let (wall, patch) = mesh.patch("wall").unwrap();
        let _ = wall;
        for f in patch.faces() {
            assert!(state.u_boundary[f - mesh.n_internal_faces()].norm() <= 1e-12);
        }
        let q_out = state.patch_flux(&mesh, mesh.patch("outlet").unwrap().0);
        assert!((q_out / 1e-3 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn cfl_failure_policy() {
        let mesh = generate_channel_mesh(0.05, 0.01, 20, 6).unwrap();
        let bc = channel_bcs(1e-2).resolve(&mesh, 0.0).unwrap();
        let mut state = FlowState::at_rest(&mesh, 0.0);
        let cfg = SolverConfig {
            dt: 5e-2,
            cfl_policy: CflPolicy::Fail,
            ..SolverConfig::default()
        };
        state = piso_step(&mesh, &state, &bc, &FluidProperties::blood(), &cfg)
            .unwrap()
            .0;
        let err = piso_step(&mesh, &state, &bc, &FluidProperties::blood(), &cfg).unwrap_err();
        assert!(matches!(err, Error::CflExceeded { .. }));
    }
}
