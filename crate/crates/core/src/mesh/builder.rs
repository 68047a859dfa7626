use std::collections::HashMap;

use super::{face_geometry, CellShape, CellTopology, Mesh, MeshParts, Patch, PatchKind, Vec3};
use crate::error::{Error, Result};

/// One face of a cell as described by a generator. Orientation is fixed up by
/// the builder; `patch` is used only if the face ends up on the boundary.
#[derive(Debug, Clone)]
pub struct FaceSpec {
    pub vertices: Vec<usize>,
    pub patch: Option<usize>,
}

impl FaceSpec {
    pub fn new(vertices: Vec<usize>) -> Self {
        FaceSpec {
            vertices,
            patch: None,
        }
    }

    pub fn on_patch(vertices: Vec<usize>, patch: usize) -> Self {
        FaceSpec {
            vertices,
            patch: Some(patch),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellSpec {
    pub shape: CellShape,
    pub vertices: Vec<usize>,
    pub faces: Vec<FaceSpec>,
}

/// Assembles a face-addressed [`Mesh`] from cell-wise face lists: shared faces
/// are matched by vertex set, oriented out of the lower-numbered cell, sorted
/// into upper-triangular order and grouped by patch.
#[derive(Debug, Clone)]
pub struct MeshBuilder {
    dimension: usize,
    points: Vec<Vec3>,
    cells: Vec<CellSpec>,
    patches: Vec<(String, PatchKind)>,
    default_patch: Option<usize>,
}

struct PendingFace {
    owner: usize,
    neighbour: Option<usize>,
    vertices: Vec<usize>,
    patch: Option<usize>,
}

impl MeshBuilder {
    pub fn new(dimension: usize) -> Self {
        MeshBuilder {
            dimension,
            points: Vec::new(),
            cells: Vec::new(),
            patches: Vec::new(),
            default_patch: None,
        }
    }

    pub fn add_point(&mut self, p: Vec3) -> usize {
        self.points.push(p);
        self.points.len() - 1
    }

    pub fn add_patch(&mut self, name: &str, kind: PatchKind) -> usize {
        self.patches.push((name.to_string(), kind));
        self.patches.len() - 1
    }

    /// Patch receiving boundary faces that carry no explicit patch.
    pub fn set_default_patch(&mut self, patch: usize) {
        self.default_patch = Some(patch);
    }

    pub fn add_cell(&mut self, cell: CellSpec) -> usize {
        self.cells.push(cell);
        self.cells.len() - 1
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn build(self) -> Result<Mesh> {
        let MeshBuilder {
            dimension,
            points,
            cells,
            patches,
            default_patch,
        } = self;

        let mut pending: Vec<PendingFace> = Vec::new();
        let mut lookup: HashMap<Vec<usize>, usize> = HashMap::new();
        for (ci, cell) in cells.iter().enumerate() {
            let centre =
                cell.vertices.iter().map(|&v| points[v]).sum::<Vec3>() / cell.vertices.len() as f64;
            for fs in &cell.faces {
                let mut verts = fs.vertices.clone();
                let (a, c) = face_geometry(dimension, &points, &verts);
                if a.dot(&(c - centre)) < 0.0 {
                    verts.reverse();
                }
                let mut key = verts.clone();
                key.sort_unstable();
                match lookup.get(&key) {
                    None => {
                        lookup.insert(key, pending.len());
                        pending.push(PendingFace {
                            owner: ci,
                            neighbour: None,
                            vertices: verts,
                            patch: fs.patch,
                        });
                    }
                    Some(&idx) => {
                        let pf = &mut pending[idx];
                        if pf.neighbour.is_some() {
                            return Err(Error::invalid(format!(
                                "face {:?} is shared by more than two cells",
                                fs.vertices
                            )));
                        }
                        if pf.owner == ci {
                            return Err(Error::invalid(format!(
                                "cell {ci} lists face {:?} twice",
                                fs.vertices
                            )));
                        }
                        // owner is always the lower index, which was seen first
                        pf.neighbour = Some(ci);
                    }
                }
            }
        }

        let mut internal: Vec<&PendingFace> =
            pending.iter().filter(|f| f.neighbour.is_some()).collect();
        internal.sort_by_key(|f| (f.owner, f.neighbour.unwrap()));

        let mut boundary: Vec<Vec<&PendingFace>> = vec![Vec::new(); patches.len()];
        for f in pending.iter().filter(|f| f.neighbour.is_none()) {
            let p = f.patch.or(default_patch).ok_or_else(|| {
                Error::invalid(format!(
                    "boundary face {:?} of cell {} has no patch",
                    f.vertices, f.owner
                ))
            })?;
            if p >= patches.len() {
                return Err(Error::invalid(format!("patch index {p} out of range")));
            }
            boundary[p].push(f);
        }

        let mut face_vertices = Vec::with_capacity(pending.len());
        let mut owners = Vec::with_capacity(pending.len());
        let mut neighbours = Vec::with_capacity(internal.len());
        for f in &internal {
            face_vertices.push(f.vertices.clone());
            owners.push(f.owner);
            neighbours.push(f.neighbour.unwrap());
        }
        let mut mesh_patches = Vec::with_capacity(patches.len());
        for (p, (name, kind)) in patches.into_iter().enumerate() {
            let start = face_vertices.len();
            boundary[p].sort_by_key(|f| f.owner);
            for f in &boundary[p] {
                face_vertices.push(f.vertices.clone());
                owners.push(f.owner);
            }
            mesh_patches.push(Patch {
                name,
                kind,
                start,
                len: boundary[p].len(),
            });
        }

        let cells = cells
            .into_iter()
            .map(|c| CellTopology {
                shape: c.shape,
                vertices: c.vertices,
            })
            .collect();

        Mesh::from_parts(MeshParts {
            dimension,
            points,
            cells,
            face_vertices,
            owners,
            neighbours,
            patches: mesh_patches,
        })
    }
}

/// Face list of a planar polygon cell (2D): one edge per side.
pub(crate) fn polygon_cell(vertices: Vec<usize>, edge_patches: Vec<Option<usize>>) -> CellSpec {
    let n = vertices.len();
    let faces = (0..n)
        .map(|i| FaceSpec {
            vertices: vec![vertices[i], vertices[(i + 1) % n]],
            patch: edge_patches.get(i).copied().flatten(),
        })
        .collect();
    CellSpec {
        shape: match n {
            3 => CellShape::Triangle,
            4 => CellShape::Quad,
            _ => CellShape::Polygon,
        },
        vertices,
        faces,
    }
}

/// Prism between two copies of a planar polygon (`bottom[i]` below `top[i]`).
/// Triangles give wedges, quadrilaterals give hexahedra.
pub(crate) fn prism_cell(
    bottom: &[usize],
    top: &[usize],
    bottom_patch: Option<usize>,
    top_patch: Option<usize>,
    side_patches: &[Option<usize>],
) -> CellSpec {
    let n = bottom.len();
    let mut faces = Vec::with_capacity(n + 2);
    faces.push(FaceSpec {
        vertices: bottom.to_vec(),
        patch: bottom_patch,
    });
    faces.push(FaceSpec {
        vertices: top.to_vec(),
        patch: top_patch,
    });
    for i in 0..n {
        let j = (i + 1) % n;
        faces.push(FaceSpec {
            vertices: vec![bottom[i], bottom[j], top[j], top[i]],
            patch: side_patches.get(i).copied().flatten(),
        });
    }
    let mut vertices = bottom.to_vec();
    vertices.extend_from_slice(top);
    CellSpec {
        shape: match n {
            3 => CellShape::Wedge,
            4 => CellShape::Hexahedron,
            _ => CellShape::Polyhedron,
        },
        vertices,
        faces,
    }
}
