mod common;

use common::{reference_flow, solve_pipe, PIPE_DIAMETER};
use lvad_core::fv::FluidProperties;

#[test]
fn hagen_poiseuille_on_medium_mesh() {
    let q = reference_flow(&FluidProperties::blood());
    let r = solve_pipe(PIPE_DIAMETER, q, 8);
    assert!(r.steady);
    assert!((r.gradient_ratio - 1.0).abs() < 0.05, "{r:?}");
    assert!((r.axis_ratio - 1.0).abs() < 0.05, "{r:?}");
    assert!((r.wss_ratio - 1.0).abs() < 0.05, "{r:?}");
    assert!(r.mass_imbalance <= 1e-3, "{r:?}");
}

#[test]
fn pipe_errors_shrink_under_refinement() {
    let q = reference_flow(&FluidProperties::blood());
    let coarse = solve_pipe(PIPE_DIAMETER, q, 6);
    let fine = solve_pipe(PIPE_DIAMETER, q, 12);
    assert!((fine.gradient_ratio - 1.0).abs() < (coarse.gradient_ratio - 1.0).abs());
    assert!((fine.axis_ratio - 1.0).abs() < (coarse.axis_ratio - 1.0).abs());
    assert!((fine.wss_ratio - 1.0).abs() < (coarse.wss_ratio - 1.0).abs());
}

#[test]
fn wall_shear_scales_with_inverse_cube_of_diameter() {
    let q = reference_flow(&FluidProperties::blood());
    let (d1, d2) = (0.02f64, 0.016);
    let expected = (d1 / d2).powi(3);
    let ratio = solve_pipe(d2, q, 8).wss / solve_pipe(d1, q, 8).wss;
    assert!(
        (ratio / expected - 1.0).abs() < 0.07,
        "ratio {ratio} vs {expected}"
    );
}
