//! Face-addressed unstructured finite-volume meshes.
//!
//! Every discretised term of the flow solver is a sum over faces, so the mesh
//! is stored the way OpenFOAM stores it: a list of faces carrying an owner
//! cell, an optional neighbour cell and an area vector pointing out of the
//! owner. Internal faces come first and satisfy `owner < neighbour`; boundary
//! faces follow, grouped contiguously by patch.
//!
//! Two-dimensional meshes use unit depth: faces are edges whose area vector is
//! the edge normal scaled by the edge length, and cell "volumes" are areas.

mod builder;
pub mod file;
pub mod generate;
pub mod quality;
pub mod vtk;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[cfg(test)]
pub(crate) use builder::polygon_cell;
pub use builder::{CellSpec, FaceSpec, MeshBuilder};
pub use generate::{
    generate_bend_mesh, generate_bifurcation_mesh, generate_box_mesh, generate_channel_mesh,
    generate_pipe_mesh, generate_skewed_channel_mesh, pipe_section_cells, BifurcationGeometry,
    BifurcationMesh,
};
pub use quality::{mesh_quality, QualityReport, NON_ORTHOGONALITY_CAP_DEG};

pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchKind {
    Inlet,
    Outlet,
    Wall,
}

impl PatchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PatchKind::Inlet => "inlet",
            PatchKind::Outlet => "outlet",
            PatchKind::Wall => "wall",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "inlet" => Some(PatchKind::Inlet),
            "outlet" => Some(PatchKind::Outlet),
            "wall" => Some(PatchKind::Wall),
            _ => None,
        }
    }
}

/// A named, contiguous block of boundary faces.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub name: String,
    pub kind: PatchKind,
    pub start: usize,
    pub len: usize,
}

impl Patch {
    pub fn faces(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

/// Cell shape, kept only for visualisation export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellShape {
    Triangle,
    Quad,
    Polygon,
    Tetra,
    Wedge,
    Hexahedron,
    Polyhedron,
}

impl CellShape {
    pub fn as_str(self) -> &'static str {
        match self {
            CellShape::Triangle => "tri",
            CellShape::Quad => "quad",
            CellShape::Polygon => "polygon",
            CellShape::Tetra => "tet",
            CellShape::Wedge => "wedge",
            CellShape::Hexahedron => "hex",
            CellShape::Polyhedron => "polyhedron",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "tri" => CellShape::Triangle,
            "quad" => CellShape::Quad,
            "polygon" => CellShape::Polygon,
            "tet" => CellShape::Tetra,
            "wedge" => CellShape::Wedge,
            "hex" => CellShape::Hexahedron,
            "polyhedron" => CellShape::Polyhedron,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellTopology {
    pub shape: CellShape,
    pub vertices: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub owner: usize,
    pub neighbour: Option<usize>,
    /// Area vector, pointing out of the owner cell.
    pub area: Vec3,
    pub centroid: Vec3,
}

/// Owner/neighbour addressing of the internal faces plus a cell-to-face
/// adjacency table, as needed by the sparse matrix kernels.
#[derive(Debug, Clone)]
pub struct LduAddressing {
    pub n_cells: usize,
    pub lower: Vec<usize>,
    pub upper: Vec<usize>,
    cell_face_offsets: Vec<usize>,
    cell_face_ids: Vec<usize>,
}

impl LduAddressing {
    pub fn new(n_cells: usize, lower: Vec<usize>, upper: Vec<usize>) -> Self {
        let mut counts = vec![0usize; n_cells + 1];
        for (&l, &u) in lower.iter().zip(&upper) {
            counts[l + 1] += 1;
            counts[u + 1] += 1;
        }
        for i in 0..n_cells {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut ids = vec![0usize; counts[n_cells]];
        for (f, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            ids[fill[l]] = f;
            fill[l] += 1;
            ids[fill[u]] = f;
            fill[u] += 1;
        }
        LduAddressing {
            n_cells,
            lower,
            upper,
            cell_face_offsets: counts,
            cell_face_ids: ids,
        }
    }

    pub fn n_faces(&self) -> usize {
        self.lower.len()
    }

    /// Internal faces touching `cell`.
    pub fn cell_faces(&self, cell: usize) -> &[usize] {
        &self.cell_face_ids[self.cell_face_offsets[cell]..self.cell_face_offsets[cell + 1]]
    }
}

/// Unstructured polyhedral (or polygonal, in 2D) finite-volume mesh.
///
/// Immutable once built; every derived geometric quantity is computed in the
/// constructor from points and face vertex loops, so writing the topology to
/// disk and reading it back reproduces the geometry bit for bit.
#[derive(Debug, Clone)]
pub struct Mesh {
    dimension: usize,
    points: Vec<Vec3>,
    face_vertices: Vec<Vec<usize>>,
    faces: Vec<Face>,
    n_internal: usize,
    cells: Vec<CellTopology>,
    cell_centroids: Vec<Vec3>,
    cell_volumes: Vec<f64>,
    patches: Vec<Patch>,
    // derived per-face data
    delta: Vec<Vec3>,
    weights: Vec<f64>,
    ldu: LduAddressing,
    cell_boundary_offsets: Vec<usize>,
    cell_boundary_ids: Vec<usize>,
}

/// Raw topology handed to [`Mesh::from_parts`].
#[derive(Debug, Clone)]
pub struct MeshParts {
    pub dimension: usize,
    pub points: Vec<Vec3>,
    pub cells: Vec<CellTopology>,
    pub face_vertices: Vec<Vec<usize>>,
    pub owners: Vec<usize>,
    /// Neighbours of the first `neighbours.len()` faces, which are internal.
    pub neighbours: Vec<usize>,
    pub patches: Vec<Patch>,
}

const CLOSURE_TOL: f64 = 1e-12;

impl Mesh {
    /// Builds the mesh geometry from its topology and checks every structural
    /// invariant (addressing, patch partition, positive volumes, closed cells).
    pub fn from_parts(parts: MeshParts) -> Result<Mesh> {
        let MeshParts {
            dimension,
            points,
            cells,
            face_vertices,
            owners,
            neighbours,
            patches,
        } = parts;
        if dimension != 2 && dimension != 3 {
            return Err(Error::invalid(format!(
                "dimension must be 2 or 3, got {dimension}"
            )));
        }
        let n_cells = cells.len();
        let n_faces = face_vertices.len();
        let n_internal = neighbours.len();
        if n_cells == 0 {
            return Err(Error::invalid("mesh has no cells"));
        }
        if owners.len() != n_faces || n_internal > n_faces {
            return Err(Error::invalid(
                "owner/neighbour arrays do not match the face list",
            ));
        }
        for (f, verts) in face_vertices.iter().enumerate() {
            let need = if dimension == 2 { 2 } else { 3 };
            if (dimension == 2 && verts.len() != 2) || verts.len() < need {
                return Err(Error::invalid(format!(
                    "face {f} has {} vertices",
                    verts.len()
                )));
            }
            if let Some(&v) = verts.iter().find(|&&v| v >= points.len()) {
                return Err(Error::invalid(format!(
                    "face {f} references missing point {v}"
                )));
            }
        }
        for (f, &o) in owners.iter().enumerate() {
            if o >= n_cells {
                return Err(Error::invalid(format!("face {f} owner {o} out of range")));
            }
        }
        for (f, &n) in neighbours.iter().enumerate() {
            if n >= n_cells || n <= owners[f] {
                return Err(Error::invalid(format!(
                    "internal face {f} must satisfy owner < neighbour < n_cells"
                )));
            }
        }
        // patches must tile the boundary faces exactly
        let mut next = n_internal;
        for p in &patches {
            if p.start != next {
                return Err(Error::invalid(format!(
                    "patch '{}' does not start where the previous one ended",
                    p.name
                )));
            }
            next += p.len;
        }
        if next != n_faces {
            return Err(Error::invalid(
                "patches do not cover every boundary face exactly once",
            ));
        }

        let faces_geom: Vec<(Vec3, Vec3)> = face_vertices
            .iter()
            .map(|verts| face_geometry(dimension, &points, verts))
            .collect();

        // cell reference point: average of its face centroids
        let mut ref_sum = vec![Vec3::zeros(); n_cells];
        let mut ref_count = vec![0usize; n_cells];
        for f in 0..n_faces {
            let c = faces_geom[f].1;
            ref_sum[owners[f]] += c;
            ref_count[owners[f]] += 1;
            if f < n_internal {
                ref_sum[neighbours[f]] += c;
                ref_count[neighbours[f]] += 1;
            }
        }
        let refs: Vec<Vec3> = ref_sum
            .iter()
            .zip(&ref_count)
            .map(|(s, &c)| if c > 0 { s / c as f64 } else { Vec3::zeros() })
            .collect();

        let dim = dimension as f64;
        let apex_frac = dim / (dim + 1.0);
        let mut vol = vec![0.0; n_cells];
        let mut moment = vec![Vec3::zeros(); n_cells];
        let mut closure = vec![Vec3::zeros(); n_cells];
        let mut surface = vec![0.0; n_cells];
        let mut accumulate = |cell: usize, area: Vec3, centroid: Vec3| {
            let pyr = area.dot(&(centroid - refs[cell])) / dim;
            let pc = refs[cell] + (centroid - refs[cell]) * apex_frac;
            vol[cell] += pyr;
            moment[cell] += pc * pyr;
            closure[cell] += area;
            surface[cell] += area.norm();
        };
        for f in 0..n_faces {
            let (a, c) = faces_geom[f];
            accumulate(owners[f], a, c);
            if f < n_internal {
                accumulate(neighbours[f], -a, c);
            }
        }
        for i in 0..n_cells {
            if !(vol[i] > 0.0) {
                return Err(Error::invalid(format!(
                    "cell {i} has non-positive volume {:.3e}",
                    vol[i]
                )));
            }
            if closure[i].norm() > CLOSURE_TOL * surface[i] {
                return Err(Error::invalid(format!(
                    "cell {i} is not closed: |sum of face area vectors| = {:.3e}",
                    closure[i].norm()
                )));
            }
        }
        let cell_centroids: Vec<Vec3> = moment.iter().zip(&vol).map(|(m, &v)| m / v).collect();

        let faces: Vec<Face> = (0..n_faces)
            .map(|f| Face {
                owner: owners[f],
                neighbour: (f < n_internal).then(|| neighbours[f]),
                area: faces_geom[f].0,
                centroid: faces_geom[f].1,
            })
            .collect();

        let mut delta = Vec::with_capacity(n_faces);
        let mut weights = Vec::with_capacity(n_faces);
        for face in &faces {
            let co = cell_centroids[face.owner];
            match face.neighbour {
                Some(n) => {
                    let cn = cell_centroids[n];
                    let d = cn - co;
                    let nhat = face.area.normalize();
                    let denom = nhat.dot(&d);
                    if !(denom > 0.0) {
                        return Err(Error::invalid(format!(
                            "internal face between cells {} and {n} is inverted",
                            face.owner
                        )));
                    }
                    weights.push(nhat.dot(&(cn - face.centroid)) / denom);
                    delta.push(d);
                }
                None => {
                    let d = face.centroid - co;
                    if !(face.area.dot(&d) > 0.0) {
                        return Err(Error::invalid(format!(
                            "boundary face of cell {} points inwards",
                            face.owner
                        )));
                    }
                    weights.push(1.0);
                    delta.push(d);
                }
            }
        }

        let ldu = LduAddressing::new(n_cells, owners[..n_internal].to_vec(), neighbours.clone());

        let mut bcounts = vec![0usize; n_cells + 1];
        for f in n_internal..n_faces {
            bcounts[owners[f] + 1] += 1;
        }
        for i in 0..n_cells {
            bcounts[i + 1] += bcounts[i];
        }
        let mut fill = bcounts.clone();
        let mut bids = vec![0usize; n_faces - n_internal];
        for f in n_internal..n_faces {
            bids[fill[owners[f]]] = f;
            fill[owners[f]] += 1;
        }

        Ok(Mesh {
            dimension,
            points,
            face_vertices,
            faces,
            n_internal,
            cells,
            cell_centroids,
            cell_volumes: vol,
            patches,
            delta,
            weights,
            ldu,
            cell_boundary_offsets: bcounts,
            cell_boundary_ids: bids,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn n_cells(&self) -> usize {
        self.cell_volumes.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_internal_faces(&self) -> usize {
        self.n_internal
    }

    pub fn n_boundary_faces(&self) -> usize {
        self.faces.len() - self.n_internal
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    pub fn face_vertices(&self, f: usize) -> &[usize] {
        &self.face_vertices[f]
    }

    pub fn cells(&self) -> &[CellTopology] {
        &self.cells
    }

    pub fn cell_centroids(&self) -> &[Vec3] {
        &self.cell_centroids
    }

    pub fn cell_volumes(&self) -> &[f64] {
        &self.cell_volumes
    }

    pub fn total_volume(&self) -> f64 {
        self.cell_volumes.iter().sum()
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn patch(&self, name: &str) -> Option<(usize, &Patch)> {
        self.patches
            .iter()
            .enumerate()
            .find(|(_, p)| p.name == name)
    }

    pub fn patch_of_face(&self, f: usize) -> Option<usize> {
        if f < self.n_internal {
            return None;
        }
        self.patches.iter().position(|p| p.faces().contains(&f))
    }

    /// Sum of face-area magnitudes over a patch.
    pub fn patch_area(&self, patch: usize) -> f64 {
        self.patches[patch]
            .faces()
            .map(|f| self.faces[f].area.norm())
            .sum()
    }

    pub fn patch_face_areas(&self, patch: usize) -> Vec<f64> {
        self.patches[patch]
            .faces()
            .map(|f| self.faces[f].area.norm())
            .collect()
    }

    /// Area-weighted centroid of a patch.
    pub fn patch_centroid(&self, patch: usize) -> Vec3 {
        let mut sum = Vec3::zeros();
        let mut area = 0.0;
        for f in self.patches[patch].faces() {
            let a = self.faces[f].area.norm();
            sum += self.faces[f].centroid * a;
            area += a;
        }
        sum / area
    }

    /// Centroid-to-centroid vector for internal faces; owner-centroid to
    /// face-centroid vector for boundary faces.
    pub fn delta(&self, f: usize) -> Vec3 {
        self.delta[f]
    }

    /// Linear interpolation weight of the owner value at face `f`.
    pub fn weight(&self, f: usize) -> f64 {
        self.weights[f]
    }

    /// `|A| / (n·d)`: the orthogonal (over-relaxed) delta coefficient.
    pub fn delta_coeff(&self, f: usize) -> f64 {
        let a = self.faces[f].area;
        a.norm_squared() / a.dot(&self.delta[f])
    }

    /// Non-orthogonal part `k = A - d |A|^2 / (A·d)` of the area vector.
    pub fn non_orthogonal_part(&self, f: usize) -> Vec3 {
        let a = self.faces[f].area;
        let d = self.delta[f];
        a - d * (a.norm_squared() / a.dot(&d))
    }

    pub fn ldu(&self) -> &LduAddressing {
        &self.ldu
    }

    /// Boundary faces owned by `cell`.
    pub fn cell_boundary_faces(&self, cell: usize) -> &[usize] {
        &self.cell_boundary_ids
            [self.cell_boundary_offsets[cell]..self.cell_boundary_offsets[cell + 1]]
    }

    /// Sum of outward face-area vectors of `cell` (zero for a closed cell).
    pub fn cell_closure(&self, cell: usize) -> Vec3 {
        let mut s = Vec3::zeros();
        for &f in self.ldu.cell_faces(cell) {
            let face = &self.faces[f];
            if face.owner == cell {
                s += face.area;
            } else {
                s -= face.area;
            }
        }
        for &f in self.cell_boundary_faces(cell) {
            s += self.faces[f].area;
        }
        s
    }

    pub fn cell_surface_area(&self, cell: usize) -> f64 {
        self.ldu
            .cell_faces(cell)
            .iter()
            .chain(self.cell_boundary_faces(cell))
            .map(|&f| self.faces[f].area.norm())
            .sum()
    }

    /// Vertex ids of a cell gathered from its faces.
    pub fn cell_vertex_set(&self, cell: usize) -> Vec<usize> {
        let mut verts: Vec<usize> = self
            .ldu
            .cell_faces(cell)
            .iter()
            .chain(self.cell_boundary_faces(cell))
            .flat_map(|&f| self.face_vertices[f].iter().copied())
            .collect();
        verts.sort_unstable();
        verts.dedup();
        verts
    }

    /// Largest vertex-to-vertex distance within each cell.
    pub fn cell_diameters(&self) -> Vec<f64> {
        (0..self.n_cells())
            .map(|c| {
                let verts = self.cell_vertex_set(c);
                let mut best = 0.0f64;
                for (i, &a) in verts.iter().enumerate() {
                    for &b in &verts[i + 1..] {
                        best = best.max((self.points[a] - self.points[b]).norm());
                    }
                }
                best
            })
            .collect()
    }

    pub(crate) fn face_vertex_lists(&self) -> &[Vec<usize>] {
        &self.face_vertices
    }
}

/// Area vector and centroid of one face.
fn face_geometry(dimension: usize, points: &[Vec3], verts: &[usize]) -> (Vec3, Vec3) {
    if dimension == 2 {
        let p0 = points[verts[0]];
        let p1 = points[verts[1]];
        let e = p1 - p0;
        return (Vec3::new(e.y, -e.x, 0.0), (p0 + p1) * 0.5);
    }
    if verts.len() == 3 {
        let (a, b, c) = (points[verts[0]], points[verts[1]], points[verts[2]]);
        return ((b - a).cross(&(c - a)) * 0.5, (a + b + c) / 3.0);
    }
    let n = verts.len();
    let x0 = verts.iter().map(|&v| points[v]).sum::<Vec3>() / n as f64;
    let mut sum_a = Vec3::zeros();
    let mut tris = Vec::with_capacity(n);
    for i in 0..n {
        let p = points[verts[i]];
        let q = points[verts[(i + 1) % n]];
        let a = (p - x0).cross(&(q - x0)) * 0.5;
        sum_a += a;
        tris.push((a, (x0 + p + q) / 3.0));
    }
    let nhat = sum_a.normalize();
    let mut wsum = 0.0;
    let mut csum = Vec3::zeros();
    for (a, c) in tris {
        let w = a.dot(&nhat);
        wsum += w;
        csum += c * w;
    }
    (sum_a, csum / wsum)
}
