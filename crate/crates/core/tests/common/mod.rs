#![allow(dead_code)]

use std::f64::consts::PI;

use lvad_core::fv::{
    stable_time_step, BoundaryConditionSet, FlowState, FluidProperties, Inflow, PatchCondition,
    PressureCondition, Simulation, SolverConfig, Waveform,
};
use lvad_core::indicators::wall_shear_stress;
use lvad_core::mesh::{generate_pipe_mesh, Mesh, Vec3};
use nalgebra::DMatrix;

pub const PIPE_LENGTH: f64 = 0.1;
pub const PIPE_DIAMETER: f64 = 0.02;
pub const PIPE_AXIAL: usize = 20;

/// Mean velocity giving Re = 500 in the reference pipe.
pub fn reference_velocity(props: &FluidProperties) -> f64 {
    500.0 * props.nu() / PIPE_DIAMETER
}

pub fn reference_flow(props: &FluidProperties) -> f64 {
    reference_velocity(props) * PI * PIPE_DIAMETER * PIPE_DIAMETER / 4.0
}

/// Steady developed pipe flow measured against the analytic Poiseuille
/// solution for the same flow rate.
#[derive(Debug, Clone, Copy)]
pub struct PipeResult {
    pub cells: usize,
    pub steps: usize,
    pub steady: bool,
    pub mass_imbalance: f64,
    /// Ratio of the computed to the analytic axial pressure gradient.
    pub gradient_ratio: f64,
    /// Ratio of the near-axis velocity to the analytic profile at the same radius.
    pub axis_ratio: f64,
    /// Mean wall shear stress over the middle section [Pa].
    pub wss: f64,
    pub wss_ratio: f64,
}

pub fn solve_pipe(diameter: f64, q: f64, radial: usize) -> PipeResult {
    let props = FluidProperties::blood();
    let l = PIPE_LENGTH;
    let mesh = generate_pipe_mesh(l, diameter, PIPE_AXIAL, radial).unwrap();
    let bcs = BoundaryConditionSet::new(vec![
        PatchCondition::inlet("inlet", Inflow::parabolic(Waveform::Constant { flow: q })),
        PatchCondition::outlet("outlet", PressureCondition::FixedValue(0.0)),
        PatchCondition::wall("wall"),
    ]);
    let area = PI * diameter * diameter / 4.0;
    let u_mean = q / area;
    let dt = stable_time_step(&mesh, &[Vec3::new(2.0 * u_mean, 0.0, 0.0)], 0.8);
    let cfg = SolverConfig {
        dt,
        t_end: 20.0,
        steady_detection_tol: 1e-6,
        steady_window: 1.0,
        stop_when_steady: true,
        ..SolverConfig::default()
    };
    let mut sim = Simulation::new(&mesh, bcs, props, cfg, FlowState::at_rest(&mesh, 0.0)).unwrap();
    let report = sim.run(&mut []).unwrap();
    let s = &report.final_state;

    let (x1, x2) = (0.3 * l, 0.7 * l);
    let hx = l / PIPE_AXIAL as f64;
    let station_mean = |x: f64| {
        let (mut sum, mut n) = (0.0, 0);
        for (i, c) in mesh.cell_centroids().iter().enumerate() {
            if (c.x - x).abs() < 0.5 * hx {
                sum += s.p[i];
                n += 1;
            }
        }
        sum / n as f64
    };
    let gradient = (station_mean(x1) - station_mean(x2)) / (x2 - x1);
    let exact_gradient = 32.0 * props.mu * u_mean / (diameter * diameter);

    let r_wall = diameter / 2.0;
    let radius = |c: &Vec3| c.y.hypot(c.z);
    let middle: Vec<usize> = (0..mesh.n_cells())
        .filter(|&i| {
            let x = mesh.cell_centroids()[i].x;
            x > x1 && x < x2
        })
        .collect();
    let r_min = middle
        .iter()
        .map(|&i| radius(&mesh.cell_centroids()[i]))
        .fold(f64::INFINITY, f64::min);
    let (mut num, mut den) = (0.0, 0.0);
    for &i in &middle {
        let r = radius(&mesh.cell_centroids()[i]);
        if r < r_min * (1.0 + 1e-6) {
            num += s.u[i].x;
            den += 2.0 * u_mean * (1.0 - (r / r_wall).powi(2));
        }
    }

    let wss = mean_wall_shear(&mesh, s, &props, x1, x2);
    PipeResult {
        cells: mesh.n_cells(),
        steps: report.summaries.len(),
        steady: report.steady_at.is_some(),
        mass_imbalance: report.mass_imbalance().unwrap(),
        gradient_ratio: gradient / exact_gradient,
        axis_ratio: num / den,
        wss,
        wss_ratio: wss / (8.0 * props.mu * u_mean / diameter),
    }
}

/// Area-weighted |WSS| over wall faces with `x1 < x < x2`.
pub fn mean_wall_shear(
    mesh: &Mesh,
    s: &FlowState,
    props: &FluidProperties,
    x1: f64,
    x2: f64,
) -> f64 {
    let w = wall_shear_stress(mesh, s, props, "wall").unwrap();
    let (_, wall) = mesh.patch("wall").unwrap();
    let (mut sum, mut area) = (0.0, 0.0);
    for (k, f) in wall.faces().enumerate() {
        let x = mesh.face(f).centroid.x;
        if x > x1 && x < x2 {
            sum += w.values[k] * w.areas[k];
            area += w.areas[k];
        }
    }
    sum / area
}

/// One-sided Jacobi SVD of a dense matrix: singular values in descending
/// order and the matching left singular vectors as columns.
pub fn jacobi_svd(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let mut u = a.clone();
    let n = u.ncols();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = u.column(p).norm_squared();
                let beta = u.column(q).norm_squared();
                let gamma = u.column(p).dot(&u.column(q));
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt().max(f64::MIN_POSITIVE));
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..u.nrows() {
                    let (x, y) = (u[(i, p)], u[(i, q)]);
                    u[(i, p)] = c * x - s * y;
                    u[(i, q)] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> = (0..n).map(|j| (u.column(j).norm(), j)).collect();
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut vecs = DMatrix::zeros(u.nrows(), n);
    for (k, &(sv, j)) in order.iter().enumerate() {
        if sv > 0.0 {
            vecs.set_column(k, &(u.column(j) / sv));
        }
    }
    (order.into_iter().map(|(s, _)| s).collect(), vecs)
}
