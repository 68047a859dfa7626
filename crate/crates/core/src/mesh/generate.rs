//! Desk-scale synthetic vessel meshes.

use std::f64::consts::PI;

use super::builder::{polygon_cell, prism_cell};
use super::quality::{mesh_quality, NON_ORTHOGONALITY_CAP_DEG};
use super::{Mesh, MeshBuilder, PatchKind, Vec3};
use crate::error::{Error, Result};

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

fn check_count(name: &str, n: usize, min: usize) -> Result<()> {
    if n >= min {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must be at least {min}, got {n}"
        )))
    }
}

fn enforce_quality_cap(mesh: Mesh) -> Result<Mesh> {
    let q = mesh_quality(&mesh);
    if q.max_non_orthogonality >= NON_ORTHOGONALITY_CAP_DEG {
        return Err(Error::DegenerateInput(format!(
            "mesh non-orthogonality {:.1} deg exceeds the {NON_ORTHOGONALITY_CAP_DEG} deg validity cap",
            q.max_non_orthogonality
        )));
    }
    Ok(mesh)
}

/// Planar 2D channel `[0, length] x [0, height]` of quadrilaterals with unit
/// depth: inlet at `x = 0`, outlet at `x = length`, walls top and bottom.
pub fn generate_channel_mesh(length: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh> {
    generate_skewed_channel_mesh(length, height, nx, ny, 0.0)
}

/// Channel whose vertical grid lines are sheared by `skew_deg`, giving
/// parallelogram cells with that much non-orthogonality on the x-faces.
pub fn generate_skewed_channel_mesh(
    length: f64,
    height: f64,
    nx: usize,
    ny: usize,
    skew_deg: f64,
) -> Result<Mesh> {
    check_positive("length", length)?;
    check_positive("height", height)?;
    check_count("nx", nx, 1)?;
    check_count("ny", ny, 1)?;
    if !(skew_deg.abs() < NON_ORTHOGONALITY_CAP_DEG) {
        return Err(Error::invalid(format!(
            "skew angle {skew_deg} out of range"
        )));
    }
    let shear = skew_deg.to_radians().tan();
    let mut b = MeshBuilder::new(2);
    let inlet = b.add_patch("inlet", PatchKind::Inlet);
    let outlet = b.add_patch("outlet", PatchKind::Outlet);
    let wall = b.add_patch("wall", PatchKind::Wall);
    b.set_default_patch(wall);
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    for j in 0..=ny {
        let y = height * j as f64 / ny as f64;
        for i in 0..=nx {
            let x = length * i as f64 / nx as f64 + y * shear;
            b.add_point(Vec3::new(x, y, 0.0));
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            let verts = vec![idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)];
            // edges: bottom, right, top, left
            let patches = vec![
                None,
                (i + 1 == nx).then_some(outlet),
                None,
                (i == 0).then_some(inlet),
            ];
            b.add_cell(polygon_cell(verts, patches));
        }
    }
    b.build()
}

/// Axis-aligned box `[0,lx] x [0,ly] x [0,lz]` of hexahedra: inlet at
/// `x = 0`, outlet at `x = lx`, walls elsewhere.
pub fn generate_box_mesh(lengths: [f64; 3], counts: [usize; 3]) -> Result<Mesh> {
    for (name, l) in ["lx", "ly", "lz"].iter().zip(lengths) {
        check_positive(name, l)?;
    }
    for (name, n) in ["nx", "ny", "nz"].iter().zip(counts) {
        check_count(name, n, 1)?;
    }
    let nodes: Vec<Vec<f64>> = (0..3)
        .map(|d| {
            (0..=counts[d])
                .map(|i| lengths[d] * i as f64 / counts[d] as f64)
                .collect()
        })
        .collect();
    let mut b = MeshBuilder::new(3);
    let inlet = b.add_patch("inlet", PatchKind::Inlet);
    let outlet = b.add_patch("outlet", PatchKind::Outlet);
    let wall = b.add_patch("wall", PatchKind::Wall);
    b.set_default_patch(wall);
    let grid = StructuredBlock::new(&mut b, &nodes[0], &nodes[1], &nodes[2]);
    grid.add_cells(&mut b, |i, _, _| {
        (
            (i == 0).then_some(inlet),
            (i + 1 == counts[0]).then_some(outlet),
        )
    });
    b.build()
}

/// Tensor-product point block used by the box and bifurcation generators.
struct StructuredBlock {
    n: [usize; 3],
    base: usize,
}

impl StructuredBlock {
    fn new(b: &mut MeshBuilder, xs: &[f64], ys: &[f64], zs: &[f64]) -> Self {
        let base = b.add_point(Vec3::new(xs[0], ys[0], zs[0]));
        for (k, &z) in zs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                for (i, &x) in xs.iter().enumerate() {
                    if i + j + k > 0 {
                        b.add_point(Vec3::new(x, y, z));
                    }
                }
            }
        }
        StructuredBlock {
            n: [xs.len() - 1, ys.len() - 1, zs.len() - 1],
            base,
        }
    }

    fn point(&self, i: usize, j: usize, k: usize) -> usize {
        self.base + (k * (self.n[1] + 1) + j) * (self.n[0] + 1) + i
    }

    /// Adds every hexahedron; `x_patches(i, j, k)` returns the patch of the
    /// x-min and x-max faces of that cell.
    fn add_cells(
        &self,
        b: &mut MeshBuilder,
        x_patches: impl Fn(usize, usize, usize) -> (Option<usize>, Option<usize>),
    ) {
        for k in 0..self.n[2] {
            for j in 0..self.n[1] {
                for i in 0..self.n[0] {
                    let quad = |kk: usize| {
                        [
                            self.point(i, j, kk),
                            self.point(i + 1, j, kk),
                            self.point(i + 1, j + 1, kk),
                            self.point(i, j + 1, kk),
                        ]
                    };
                    let (xmin, xmax) = x_patches(i, j, k);
                    // side order: y-min, x-max, y-max, x-min
                    b.add_cell(prism_cell(
                        &quad(k),
                        &quad(k + 1),
                        None,
                        None,
                        &[None, xmax, None, xmin],
                    ));
                }
            }
        }
    }
}

/// A planar cross-section made of counter-clockwise polygons.
struct Section {
    points: Vec<(f64, f64)>,
    cells: Vec<Vec<usize>>,
}

/// O-grid disc: a square core with slightly bulged sides, meshed by
/// transfinite interpolation, inside a ring of quads on radial rays.
/// `radial_cells` counts cells from the centre to the wall.
fn ogrid_disc(radius: f64, radial_cells: usize) -> Section {
    const BULGE: f64 = 0.3;
    let h = (radial_cells / 2).max(1);
    let n_ring = radial_cells - h;
    let nc = 2 * h;
    let n_perim = 4 * nc;
    let mid = 1.0 - BULGE + BULGE * 2f64.sqrt();
    let s = radius / (n_ring as f64 / h as f64 + mid);

    let angle = |k: usize| -0.75 * PI + 2.0 * PI * k as f64 / n_perim as f64;
    let core_edge = |k: usize| {
        let t = angle(k);
        let r_square = s / t.cos().abs().max(t.sin().abs());
        let r = (1.0 - BULGE) * r_square + BULGE * s * 2f64.sqrt();
        (r * t.cos(), r * t.sin())
    };
    // perimeter index of core boundary node (i, j)
    let perim = |i: usize, j: usize| -> usize {
        if j == 0 {
            i
        } else if i == nc {
            nc + j
        } else if j == nc {
            3 * nc - i
        } else {
            (4 * nc - j) % n_perim
        }
    };

    let mut points = Vec::with_capacity((nc + 1) * (nc + 1) + n_ring * n_perim);
    let corner = [
        core_edge(0),
        core_edge(nc),
        core_edge(2 * nc),
        core_edge(3 * nc),
    ];
    for j in 0..=nc {
        for i in 0..=nc {
            if i == 0 || j == 0 || i == nc || j == nc {
                points.push(core_edge(perim(i, j)));
                continue;
            }
            let (xi, eta) = (i as f64 / nc as f64, j as f64 / nc as f64);
            let b = core_edge(perim(i, 0));
            let t = core_edge(perim(i, nc));
            let l = core_edge(perim(0, j));
            let r = core_edge(perim(nc, j));
            let tfi = |c: fn(&(f64, f64)) -> f64| {
                (1.0 - eta) * c(&b) + eta * c(&t) + (1.0 - xi) * c(&l) + xi * c(&r)
                    - ((1.0 - xi) * (1.0 - eta) * c(&corner[0])
                        + xi * (1.0 - eta) * c(&corner[1])
                        + xi * eta * c(&corner[2])
                        + (1.0 - xi) * eta * c(&corner[3]))
            };
            points.push((tfi(|p| p.0), tfi(|p| p.1)));
        }
    }
    let core = |i: usize, j: usize| j * (nc + 1) + i;
    let mut edge_node = vec![0; n_perim];
    for j in 0..=nc {
        for i in 0..=nc {
            if i == 0 || j == 0 || i == nc || j == nc {
                edge_node[perim(i, j)] = core(i, j);
            }
        }
    }
    let ring_base = points.len();
    for j in 1..=n_ring {
        let f = j as f64 / n_ring as f64;
        for k in 0..n_perim {
            let (x0, y0) = core_edge(k);
            let r0 = x0.hypot(y0);
            let r = r0 + (radius - r0) * f;
            let t = angle(k);
            points.push((r * t.cos(), r * t.sin()));
        }
    }
    let ring = |j: usize, k: usize| {
        let k = k % n_perim;
        if j == 0 {
            edge_node[k]
        } else {
            ring_base + (j - 1) * n_perim + k
        }
    };

    let mut cells = Vec::with_capacity(nc * nc + n_ring * n_perim);
    for j in 0..nc {
        for i in 0..nc {
            cells.push(vec![
                core(i, j),
                core(i + 1, j),
                core(i + 1, j + 1),
                core(i, j + 1),
            ]);
        }
    }
    for j in 0..n_ring {
        for k in 0..n_perim {
            cells.push(vec![
                ring(j, k),
                ring(j + 1, k),
                ring(j + 1, k + 1),
                ring(j, k + 1),
            ]);
        }
    }
    Section { points, cells }
}

/// Cells in one cross-section of [`generate_pipe_mesh`].
pub fn pipe_section_cells(radial_cells: usize) -> usize {
    let h = (radial_cells / 2).max(1);
    let nc = 2 * h;
    nc * nc + (radial_cells - h) * 4 * nc
}

/// Local frame of a cross-section station; the sweep direction is `e1 x e2`.
struct Frame {
    origin: Vec3,
    e1: Vec3,
    e2: Vec3,
}

fn sweep(section: &Section, frames: &[Frame]) -> Result<Mesh> {
    let mut b = MeshBuilder::new(3);
    let inlet = b.add_patch("inlet", PatchKind::Inlet);
    let outlet = b.add_patch("outlet", PatchKind::Outlet);
    let wall = b.add_patch("wall", PatchKind::Wall);
    b.set_default_patch(wall);
    let np = section.points.len();
    for fr in frames {
        for &(x, y) in &section.points {
            b.add_point(fr.origin + fr.e1 * x + fr.e2 * y);
        }
    }
    let last = frames.len() - 2;
    for k in 0..frames.len() - 1 {
        for cell in &section.cells {
            let bottom: Vec<usize> = cell.iter().map(|&v| k * np + v).collect();
            let top: Vec<usize> = cell.iter().map(|&v| (k + 1) * np + v).collect();
            b.add_cell(prism_cell(
                &bottom,
                &top,
                (k == 0).then_some(inlet),
                (k == last).then_some(outlet),
                &[],
            ));
        }
    }
    b.build()
}

/// Straight circular pipe along +x with the inlet at `x = 0`.
///
/// The cross-section is an O-grid with `radial_cells` cells from the axis
/// to the wall; the mesh has `axial_cells * pipe_section_cells(radial_cells)`
/// cells.
pub fn generate_pipe_mesh(
    length: f64,
    diameter: f64,
    axial_cells: usize,
    radial_cells: usize,
) -> Result<Mesh> {
    check_positive("length", length)?;
    check_positive("diameter", diameter)?;
    check_count("axial_cells", axial_cells, 2)?;
    check_count("radial_cells", radial_cells, 2)?;
    let section = ogrid_disc(diameter / 2.0, radial_cells);
    let frames: Vec<Frame> = (0..=axial_cells)
        .map(|k| Frame {
            origin: Vec3::new(length * k as f64 / axial_cells as f64, 0.0, 0.0),
            e1: Vec3::y(),
            e2: Vec3::z(),
        })
        .collect();
    sweep(&section, &frames)
}

/// Circular pipe bent through `angle_deg` in the x-y plane around a
/// centreline of radius `bend_radius`; the inlet sits at the origin facing +x.
pub fn generate_bend_mesh(
    diameter: f64,
    bend_radius: f64,
    angle_deg: f64,
    axial_cells: usize,
    radial_cells: usize,
) -> Result<Mesh> {
    check_positive("diameter", diameter)?;
    check_positive("bend_radius", bend_radius)?;
    check_count("axial_cells", axial_cells, 2)?;
    check_count("radial_cells", radial_cells, 2)?;
    if !(angle_deg > 0.0 && angle_deg < 360.0) {
        return Err(Error::invalid(format!(
            "bend angle {angle_deg} must lie in (0, 360)"
        )));
    }
    if bend_radius <= diameter / 2.0 {
        return Err(Error::invalid(
            "bend radius must exceed the pipe radius (inner wall would self-intersect)",
        ));
    }
    let section = ogrid_disc(diameter / 2.0, radial_cells);
    let total = angle_deg.to_radians();
    let frames: Vec<Frame> = (0..=axial_cells)
        .map(|k| {
            let phi = total * k as f64 / axial_cells as f64;
            let t = Vec3::new(phi.cos(), phi.sin(), 0.0);
            Frame {
                origin: Vec3::new(
                    bend_radius * phi.sin(),
                    bend_radius * (1.0 - phi.cos()),
                    0.0,
                ),
                e1: Vec3::z().cross(&t),
                e2: Vec3::z(),
            }
        })
        .collect();
    enforce_quality_cap(sweep(&section, &frames)?)
}

/// Named resolutions for [`generate_bifurcation_mesh`]: cells across the branch.
pub mod resolution {
    pub const COARSE: usize = 3;
    pub const MEDIUM: usize = 4;
    pub const FINE: usize = 6;
}

/// Geometry summary of a generated bifurcation.
#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationGeometry {
    /// Side of the square trunk cross-section (same area as a circle of the
    /// trunk diameter).
    pub trunk_side: f64,
    pub branch_side: f64,
    pub branch_length: f64,
    /// x-coordinate of the branch footprint centre on the trunk's top wall.
    pub junction_x: f64,
    /// Unit branch axis pointing from the junction out to the inlet.
    pub branch_axis: Vec3,
    pub trunk_axis: Vec3,
}

impl BifurcationGeometry {
    /// Direction of the inflow velocity at the branch inlet.
    pub fn inflow_direction(&self) -> Vec3 {
        -self.branch_axis
    }

    pub fn analytic_volume(&self, trunk_length: f64) -> f64 {
        self.trunk_side.powi(2) * trunk_length + self.branch_side.powi(2) * self.branch_length
    }
}

#[derive(Debug, Clone)]
pub struct BifurcationMesh {
    pub mesh: Mesh,
    pub geometry: BifurcationGeometry,
}

/// Splits `[a, b]` into `n` equal intervals, returning the interior and end nodes.
fn linspace_into(out: &mut Vec<f64>, a: f64, b: f64, n: usize) {
    for i in 1..=n {
        out.push(a + (b - a) * i as f64 / n as f64);
    }
}

fn segments(h: f64, len: f64) -> usize {
    ((len / h).round() as usize).max(1)
}

/// T-junction of square ducts mimicking a cannula grafted onto the aorta.
///
/// The trunk runs along +x with a walled proximal end at `x = 0` and the
/// outlet at `x = trunk_length`. The branch leaves the trunk's top wall at
/// `trunk_length / 3`, inclined by `branch_angle_deg` to the trunk axis and
/// leaning upstream, so the jet it carries points downstream. Cross-sections
/// are squares with the area of the requested circle. Branch cells are
/// parallelepipeds whose non-orthogonality equals `|90 - branch_angle|`.
/// `resolution` is the number of cells across the branch side.
pub fn generate_bifurcation_mesh(
    trunk_length: f64,
    trunk_diameter: f64,
    branch_diameter: f64,
    branch_angle_deg: f64,
    resolution: usize,
) -> Result<BifurcationMesh> {
    check_positive("trunk_length", trunk_length)?;
    check_positive("trunk_diameter", trunk_diameter)?;
    check_positive("branch_diameter", branch_diameter)?;
    check_count("resolution", resolution, 1)?;
    if branch_diameter > trunk_diameter {
        return Err(Error::invalid(format!(
            "branch diameter {branch_diameter} exceeds trunk diameter {trunk_diameter}"
        )));
    }
    if !(branch_angle_deg > 0.0 && branch_angle_deg < 180.0) {
        return Err(Error::invalid(format!(
            "branch angle {branch_angle_deg} must lie strictly between 0 and 180 degrees"
        )));
    }
    let theta = branch_angle_deg.to_radians();
    let s = trunk_diameter * PI.sqrt() / 2.0;
    let bs = branch_diameter * PI.sqrt() / 2.0;
    let branch_length = 2.5 * branch_diameter;
    let xc = trunk_length / 3.0;
    let footprint = bs / theta.sin();
    let (fx0, fx1) = (xc - footprint / 2.0, xc + footprint / 2.0);
    if fx0 <= 0.0 || fx1 >= trunk_length {
        return Err(Error::invalid(
            "branch footprint does not fit on the trunk (geometric self-intersection)",
        ));
    }
    let axis = Vec3::new(-theta.cos(), 0.0, theta.sin());
    let h = bs / resolution as f64;

    let mut xs = vec![0.0];
    let n_up = segments(h, fx0);
    linspace_into(&mut xs, 0.0, fx0, n_up);
    let n_fp = segments(h, footprint).max(resolution);
    linspace_into(&mut xs, fx0, fx1, n_fp);
    linspace_into(&mut xs, fx1, trunk_length, segments(h, trunk_length - fx1));

    let half_gap = (s - bs) / 2.0;
    let n_side = if half_gap <= 1e-12 * s {
        0
    } else {
        segments(h, half_gap)
    };
    let mut ys = vec![-s / 2.0];
    if n_side > 0 {
        linspace_into(&mut ys, -s / 2.0, -bs / 2.0, n_side);
    }
    linspace_into(&mut ys, -bs / 2.0, bs / 2.0, resolution);
    if n_side > 0 {
        linspace_into(&mut ys, bs / 2.0, s / 2.0, n_side);
    }
    let nz = segments(h, s).max(2);
    let mut zs = vec![-s / 2.0];
    linspace_into(&mut zs, -s / 2.0, s / 2.0, nz);

    let mut b = MeshBuilder::new(3);
    let inlet = b.add_patch("inlet", PatchKind::Inlet);
    let outlet = b.add_patch("outlet", PatchKind::Outlet);
    let wall = b.add_patch("wall", PatchKind::Wall);
    b.set_default_patch(wall);

    let nx = xs.len() - 1;
    let trunk = StructuredBlock::new(&mut b, &xs, &ys, &zs);
    trunk.add_cells(&mut b, |i, _, _| (None, (i + 1 == nx).then_some(outlet)));

    let (i0, i1) = (n_up, n_up + n_fp);
    let (j0, j1) = (n_side, n_side + resolution);
    let n_layers = segments(h, branch_length).max(2);
    let ds = branch_length / n_layers as f64;
    let (ni, nj) = (i1 - i0 + 1, j1 - j0 + 1);
    // layer 0 reuses the trunk's top-wall nodes
    let mut layer_ids = vec![vec![0usize; ni * nj]; n_layers + 1];
    for jj in 0..nj {
        for ii in 0..ni {
            layer_ids[0][jj * ni + ii] = trunk.point(i0 + ii, j0 + jj, nz);
        }
    }
    for l in 1..=n_layers {
        for jj in 0..nj {
            for ii in 0..ni {
                let base = Vec3::new(xs[i0 + ii], ys[j0 + jj], s / 2.0);
                layer_ids[l][jj * ni + ii] = b.add_point(base + axis * (ds * l as f64));
            }
        }
    }
    for l in 0..n_layers {
        for jj in 0..nj - 1 {
            for ii in 0..ni - 1 {
                let quad = |layer: &Vec<usize>| {
                    [
                        layer[jj * ni + ii],
                        layer[jj * ni + ii + 1],
                        layer[(jj + 1) * ni + ii + 1],
                        layer[(jj + 1) * ni + ii],
                    ]
                };
                b.add_cell(prism_cell(
                    &quad(&layer_ids[l]),
                    &quad(&layer_ids[l + 1]),
                    None,
                    (l + 1 == n_layers).then_some(inlet),
                    &[],
                ));
            }
        }
    }
    let mesh = enforce_quality_cap(b.build()?)?;
    Ok(BifurcationMesh {
        mesh,
        geometry: BifurcationGeometry {
            trunk_side: s,
            branch_side: bs,
            branch_length,
            junction_x: xc,
            branch_axis: axis,
            trunk_axis: Vec3::x(),
        },
    })
}
