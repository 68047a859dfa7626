//! VTK legacy ASCII export.

use std::fmt::Write as _;
use std::path::Path;

use super::{CellShape, Mesh, Vec3};
use crate::error::{Error, Result};

/// A named per-cell (or per-face, for patch export) field.
#[derive(Debug, Clone, Copy)]
pub enum VtkField<'a> {
    Scalar(&'a str, &'a [f64]),
    Vector(&'a str, &'a [Vec3]),
}

impl VtkField<'_> {
    fn len(&self) -> usize {
        match self {
            VtkField::Scalar(_, v) => v.len(),
            VtkField::Vector(_, v) => v.len(),
        }
    }

    fn name(&self) -> &str {
        match self {
            VtkField::Scalar(n, _) | VtkField::Vector(n, _) => n,
        }
    }
}

fn vtk_cell_type(shape: CellShape) -> Result<u8> {
    Ok(match shape {
        CellShape::Triangle => 5,
        CellShape::Polygon => 7,
        CellShape::Quad => 9,
        CellShape::Tetra => 10,
        CellShape::Hexahedron => 12,
        CellShape::Wedge => 13,
        CellShape::Polyhedron => {
            return Err(Error::invalid(
                "polyhedral cells cannot be written to legacy VTK",
            ));
        }
    })
}

fn write_points(s: &mut String, points: &[Vec3]) {
    let _ = writeln!(s, "POINTS {} double", points.len());
    for p in points {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
}

fn write_fields(s: &mut String, section: &str, n: usize, fields: &[VtkField]) -> Result<()> {
    if fields.is_empty() {
        return Ok(());
    }
    let _ = writeln!(s, "{section} {n}");
    for field in fields {
        if field.len() != n {
            return Err(Error::invalid(format!(
                "field '{}' has {} values, expected {n}",
                field.name(),
                field.len()
            )));
        }
        if field.name().contains(char::is_whitespace) {
            return Err(Error::invalid(format!(
                "field name '{}' contains whitespace",
                field.name()
            )));
        }
        match field {
            VtkField::Scalar(name, vals) => {
                let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for v in vals.iter() {
                    let _ = writeln!(s, "{v}");
                }
            }
            VtkField::Vector(name, vals) => {
                let _ = writeln!(s, "VECTORS {name} double");
                for v in vals.iter() {
                    let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
                }
            }
        }
    }
    Ok(())
}

/// Whole mesh as an `UNSTRUCTURED_GRID` with cell data.
pub fn unstructured_grid(mesh: &Mesh, title: &str, fields: &[VtkField]) -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID"
    );
    write_points(&mut s, mesh.points());
    let total: usize = mesh.cells().iter().map(|c| c.vertices.len() + 1).sum();
    let _ = writeln!(s, "CELLS {} {}", mesh.n_cells(), total);
    for c in mesh.cells() {
        let _ = write!(s, "{}", c.vertices.len());
        for v in &c.vertices {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.n_cells());
    for c in mesh.cells() {
        let _ = writeln!(s, "{}", vtk_cell_type(c.shape)?);
    }
    write_fields(&mut s, "CELL_DATA", mesh.n_cells(), fields)?;
    Ok(s)
}

/// Faces of one boundary patch as `POLYDATA` with per-face data.
pub fn patch_polydata(
    mesh: &Mesh,
    patch: usize,
    title: &str,
    fields: &[VtkField],
) -> Result<String> {
    let p = mesh
        .patches()
        .get(patch)
        .ok_or_else(|| Error::invalid(format!("patch index {patch} out of range")))?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET POLYDATA"
    );
    write_points(&mut s, mesh.points());
    let keyword = if mesh.dimension() == 2 {
        "LINES"
    } else {
        "POLYGONS"
    };
    let total: usize = p.faces().map(|f| mesh.face_vertices(f).len() + 1).sum();
    let _ = writeln!(s, "{keyword} {} {}", p.len, total);
    for f in p.faces() {
        let verts = mesh.face_vertices(f);
        let _ = write!(s, "{}", verts.len());
        for v in verts {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    write_fields(&mut s, "CELL_DATA", p.len, fields)?;
    Ok(s)
}

pub fn write_unstructured_grid(mesh: &Mesh, path: &Path, fields: &[VtkField]) -> Result<()> {
    let text = unstructured_grid(mesh, "lvad field output", fields)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_patch(mesh: &Mesh, patch: usize, path: &Path, fields: &[VtkField]) -> Result<()> {
    let text = patch_polydata(mesh, patch, "lvad boundary output", fields)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
