use std::f64::consts::PI;

use lvad_core::fv::{convective_term, diffusion_term, gradient_term, ConvectionScheme};
use lvad_core::linalg::{solve_pcg, Criterion, LduMatrix};
use lvad_core::mesh::{
    generate_bifurcation_mesh, generate_box_mesh, generate_channel_mesh, generate_pipe_mesh,
    generate_skewed_channel_mesh, Mesh, Vec3,
};
use proptest::prelude::*;

fn boundary_centroids(mesh: &Mesh) -> Vec<Vec3> {
    (mesh.n_internal_faces()..mesh.n_faces())
        .map(|f| mesh.face(f).centroid)
        .collect()
}

fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn unit_square(n: usize, skew_deg: f64) -> Mesh {
    if skew_deg == 0.0 {
        generate_channel_mesh(1.0, 1.0, n, n).unwrap()
    } else {
        generate_skewed_channel_mesh(1.0, 1.0, n, n, skew_deg).unwrap()
    }
}

#[test]
fn face_sum_of_square_converges_at_second_order() {
    let errors: Vec<f64> = [8, 16, 32, 64]
        .iter()
        .map(|&n| {
            let mesh = generate_channel_mesh(1.0, 0.1, n, 1).unwrap();
            let p: Vec<f64> = mesh.cell_centroids().iter().map(|c| c.x * c.x).collect();
            let pb: Vec<f64> = boundary_centroids(&mesh)
                .iter()
                .map(|c| c.x * c.x)
                .collect();
            let g = gradient_term(&mesh, &p, &pb);
            g.iter()
                .zip(mesh.cell_centroids())
                .zip(mesh.cell_volumes())
                .map(|((gi, c), v)| (gi.x - 2.0 * c.x * v).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    for order in observed_orders(&errors) {
        assert!(order >= 1.9, "errors {errors:?}");
    }
}

#[test]
fn gradient_converges_at_second_order() {
    let exact = |c: &Vec3| {
        Vec3::new(
            PI * (PI * c.x).cos() * (PI * c.y).sin(),
            PI * (PI * c.x).sin() * (PI * c.y).cos(),
            0.0,
        )
    };
    let field = |c: &Vec3| (PI * c.x).sin() * (PI * c.y).sin();
    for skew in [0.0, 5.0] {
        let errors: Vec<f64> = [8, 16, 32, 64]
            .iter()
            .map(|&n| {
                let mesh = unit_square(n, skew);
                let p: Vec<f64> = mesh.cell_centroids().iter().map(field).collect();
                let pb: Vec<f64> = boundary_centroids(&mesh).iter().map(field).collect();
                let g = gradient_term(&mesh, &p, &pb);
                (0..mesh.n_cells())
                    .map(|i| {
                        let v = mesh.cell_volumes()[i];
                        (g[i] / v - exact(&mesh.cell_centroids()[i])).norm_squared() * v
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        for order in observed_orders(&errors) {
            assert!(order >= 1.7, "skew {skew}: errors {errors:?}");
        }
    }
}

/// Solves `lap u = s` with Dirichlet data by deferred correction around the
/// orthogonal part of the operator and returns the L² error against `u`.
fn poisson_error(mesh: &Mesh, n_corr: usize) -> f64 {
    let exact = |c: &Vec3| (PI * c.x).sin() * (PI * c.y).sin() + c.x;
    let source = |c: &Vec3| -2.0 * PI * PI * (PI * c.x).sin() * (PI * c.y).sin();
    let n = mesh.n_cells();
    let n_int = mesh.n_internal_faces();
    let mut a = LduMatrix::zeros(n, n_int);
    for f in 0..mesh.n_faces() {
        let dc = mesh.delta_coeff(f);
        let face = mesh.face(f);
        a.diag[face.owner] += dc;
        if let Some(nb) = face.neighbour {
            a.diag[nb] += dc;
            a.upper[f] = -dc;
            a.lower[f] = -dc;
        }
    }
    let ub: Vec<Vec3> = boundary_centroids(mesh)
        .iter()
        .map(|c| Vec3::new(exact(c), 0.0, 0.0))
        .collect();
    let sv: Vec<f64> = mesh
        .cell_centroids()
        .iter()
        .zip(mesh.cell_volumes())
        .map(|(c, v)| source(c) * v)
        .collect();
    let mut u = vec![0.0; n];
    let mut au = vec![0.0; n];
    for _ in 0..200 {
        let uv: Vec<Vec3> = u.iter().map(|&x| Vec3::new(x, 0.0, 0.0)).collect();
        let lap = diffusion_term(mesh, &uv, &ub, n_corr);
        a.matvec(mesh.ldu(), &u, &mut au);
        let b: Vec<f64> = (0..n).map(|i| lap[i].x + au[i] - sv[i]).collect();
        let mut next = u.clone();
        solve_pcg(
            &a,
            mesh.ldu(),
            &b,
            &mut next,
            Criterion::Relative(1e-13),
            5000,
            "poisson",
        )
        .unwrap();
        let change = next
            .iter()
            .zip(&u)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        u = next;
        if change < 1e-13 {
            break;
        }
    }
    (0..n)
        .map(|i| (u[i] - exact(&mesh.cell_centroids()[i])).powi(2) * mesh.cell_volumes()[i])
        .sum::<f64>()
        .sqrt()
}

#[test]
fn corrected_diffusion_converges_at_second_order() {
    for skew in [0.0, 5.0, 10.0] {
        let errors: Vec<f64> = [8, 16, 32, 64]
            .iter()
            .map(|&n| poisson_error(&unit_square(n, skew), 2))
            .collect();
        for order in observed_orders(&errors) {
            assert!(order >= 1.7, "skew {skew}: errors {errors:?}");
        }
    }
}

#[test]
fn uncorrected_diffusion_is_inconsistent_on_skewed_mesh() {
    let e0 = poisson_error(&unit_square(32, 10.0), 0);
    let e2 = poisson_error(&unit_square(32, 10.0), 2);
    assert!(e2 < e0, "corrected {e2} vs uncorrected {e0}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn upwind_update_creates_no_new_extrema(
        n in 4usize..40,
        step in 1usize..39,
        left in -5.0f64..5.0,
        right in -5.0f64..5.0,
        courant in 0.05f64..1.0,
    ) {
        let step = step.min(n - 1);
        let h = 1.0 / n as f64;
        let mesh = generate_channel_mesh(1.0, h, n, 1).unwrap();
        let speed = 2.0;
        let phi: Vec<f64> = mesh.faces().iter().map(|f| speed * f.area.x).collect();
        let u: Vec<Vec3> = (0..n).map(|i| Vec3::new(if i < step { left } else { right }, 0.0, 0.0)).collect();
        let ub: Vec<Vec3> = boundary_centroids(&mesh)
            .iter()
            .map(|c| Vec3::new(if c.x < 0.5 { left } else { right }, 0.0, 0.0))
            .collect();
        let conv = convective_term(&mesh, &u, &ub, &phi, ConvectionScheme::Upwind);
        let dt = courant * h / speed;
        let (lo, hi) = (left.min(right), left.max(right));
        for i in 0..n {
            let next = u[i].x - dt / mesh.cell_volumes()[i] * conv[i].x;
            prop_assert!(next >= lo - 1e-12 && next <= hi + 1e-12, "cell {} -> {}", i, next);
        }
    }

    #[test]
    fn box_cells_close(lx in 0.1f64..3.0, ly in 0.1f64..3.0, lz in 0.1f64..3.0,
                       nx in 1usize..6, ny in 1usize..6, nz in 1usize..6) {
        assert_closed(&generate_box_mesh([lx, ly, lz], [nx, ny, nz]).unwrap());
    }

    #[test]
    fn skewed_and_pipe_cells_close(skew in 0.0f64..40.0, n in 2usize..10, radial in 2usize..6) {
        assert_closed(&generate_skewed_channel_mesh(1.5, 0.7, n, n + 1, skew).unwrap());
        assert_closed(&generate_pipe_mesh(0.05, 0.01, 3, radial).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn bifurcation_cells_close(angle in 35.0f64..145.0, branch in 0.006f64..0.014) {
        let b = generate_bifurcation_mesh(0.12, 0.028, branch, angle, 3).unwrap();
        assert_closed(&b.mesh);
    }
}

fn assert_closed(mesh: &Mesh) {
    for c in 0..mesh.n_cells() {
        let closure = mesh.cell_closure(c).norm();
        assert!(
            closure <= 1e-12 * mesh.cell_surface_area(c),
            "cell {c}: {closure}"
        );
        assert!(mesh.cell_volumes()[c] > 0.0);
    }
}
