//! Plain-text mesh format.
//!
//! ```text
//! lvad-mesh 1
//! dimension <2|3>
//! POINTS <n>
//! <x> <y> <z>                                  one line per point
//! CELLS <n>
//! <shape> <nv> <v0> <v1> ...                   shape: tri quad polygon tet wedge hex polyhedron
//! FACES <n_faces> <n_internal>
//! <owner> <neighbour|-1> <nv> <v0> <v1> ...    internal faces first
//! PATCHES <n>
//! <name> <inlet|outlet|wall> <start> <count>
//! END
//! ```
//!
//! Coordinates are written in shortest round-trip decimal form, so a
//! write/read cycle reproduces the points exactly; all geometry is
//! recomputed from them on load.

use std::fmt::Write as _;
use std::path::Path;

use super::{CellShape, CellTopology, Mesh, MeshParts, Patch, PatchKind, Vec3};
use crate::error::{Error, Result};

pub const MAGIC: &str = "lvad-mesh";
pub const VERSION: u32 = 1;

/// Decomposes a mesh back into the raw topology it was built from.
pub fn to_parts(mesh: &Mesh) -> MeshParts {
    let n_int = mesh.n_internal_faces();
    MeshParts {
        dimension: mesh.dimension(),
        points: mesh.points().to_vec(),
        cells: mesh.cells().to_vec(),
        face_vertices: mesh.face_vertex_lists().to_vec(),
        owners: mesh.faces().iter().map(|f| f.owner).collect(),
        neighbours: mesh.faces()[..n_int]
            .iter()
            .map(|f| f.neighbour.expect("internal face has a neighbour"))
            .collect(),
        patches: mesh.patches().to_vec(),
    }
}

pub fn to_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {VERSION}");
    let _ = writeln!(s, "dimension {}", mesh.dimension());
    let _ = writeln!(s, "POINTS {}", mesh.points().len());
    for p in mesh.points() {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    let _ = writeln!(s, "CELLS {}", mesh.n_cells());
    for c in mesh.cells() {
        let _ = write!(s, "{} {}", c.shape.as_str(), c.vertices.len());
        for v in &c.vertices {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "FACES {} {}", mesh.n_faces(), mesh.n_internal_faces());
    for (f, face) in mesh.faces().iter().enumerate() {
        let nb = face.neighbour.map_or(-1, |n| n as i64);
        let verts = mesh.face_vertices(f);
        let _ = write!(s, "{} {} {}", face.owner, nb, verts.len());
        for v in verts {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "PATCHES {}", mesh.patches().len());
    for p in mesh.patches() {
        let _ = writeln!(s, "{} {} {} {}", p.name, p.kind.as_str(), p.start, p.len);
    }
    s.push_str("END\n");
    s
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    std::fs::write(path, to_string(mesh)).map_err(|e| Error::io(path, e))
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text).map_err(|e| match e {
        Error::Corrupt { message, .. } => Error::corrupt(path, message),
        other => other,
    })
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_tokens(&mut self) -> Result<Vec<&'a str>> {
        for (i, l) in self.inner.by_ref() {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            self.line = i + 1;
            return Ok(l.split_whitespace().collect());
        }
        Err(self.err("unexpected end of file"))
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::corrupt("<mesh>", format!("line {}: {msg}", self.line))
    }

    fn header(&mut self, keyword: &str, n_values: usize) -> Result<Vec<usize>> {
        let t = self.next_tokens()?;
        if t.first() != Some(&keyword) || t.len() != n_values + 1 {
            return Err(self.err(format!("expected '{keyword}' header")));
        }
        t[1..].iter().map(|v| self.num::<usize>(v)).collect()
    }

    fn num<T: std::str::FromStr>(&self, tok: &str) -> Result<T> {
        tok.parse::<T>()
            .map_err(|_| self.err(format!("bad number '{tok}'")))
    }

    fn counted_list(&self, toks: &[&str], at: usize) -> Result<Vec<usize>> {
        let n: usize = self.num(toks.get(at).ok_or_else(|| self.err("missing count"))?)?;
        if toks.len() != at + 1 + n {
            return Err(self.err(format!("expected {n} indices")));
        }
        toks[at + 1..].iter().map(|t| self.num(t)).collect()
    }
}

pub fn from_str(text: &str) -> Result<Mesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let magic = lines.next_tokens()?;
    if magic.len() != 2 || magic[0] != MAGIC {
        return Err(lines.err("not an lvad-mesh file"));
    }
    let version: u32 = lines.num(magic[1])?;
    if version != VERSION {
        return Err(lines.err(format!("unsupported version {version}")));
    }
    let dimension = lines.header("dimension", 1)?[0];

    let n_points = lines.header("POINTS", 1)?[0];
    let mut points = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let t = lines.next_tokens()?;
        if t.len() != 3 {
            return Err(lines.err("point needs three coordinates"));
        }
        points.push(Vec3::new(
            lines.num(t[0])?,
            lines.num(t[1])?,
            lines.num(t[2])?,
        ));
    }

    let n_cells = lines.header("CELLS", 1)?[0];
    let mut cells = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let t = lines.next_tokens()?;
        let shape = t
            .first()
            .and_then(|s| CellShape::parse(s))
            .ok_or_else(|| lines.err("unknown cell shape"))?;
        cells.push(CellTopology {
            shape,
            vertices: lines.counted_list(&t, 1)?,
        });
    }

    let h = lines.header("FACES", 2)?;
    let (n_faces, n_internal) = (h[0], h[1]);
    let mut face_vertices = Vec::with_capacity(n_faces);
    let mut owners = Vec::with_capacity(n_faces);
    let mut neighbours = Vec::with_capacity(n_internal);
    for f in 0..n_faces {
        let t = lines.next_tokens()?;
        if t.len() < 3 {
            return Err(lines.err("truncated face record"));
        }
        owners.push(lines.num::<usize>(t[0])?);
        let nb: i64 = lines.num(t[1])?;
        match (f < n_internal, nb) {
            (true, n) if n >= 0 => neighbours.push(n as usize),
            (false, -1) => {}
            _ => return Err(lines.err("neighbour inconsistent with internal-face count")),
        }
        face_vertices.push(lines.counted_list(&t, 2)?);
    }

    let n_patches = lines.header("PATCHES", 1)?[0];
    let mut patches = Vec::with_capacity(n_patches);
    for _ in 0..n_patches {
        let t = lines.next_tokens()?;
        if t.len() != 4 {
            return Err(lines.err("patch record needs name, kind, start, count"));
        }
        let kind = PatchKind::parse(t[1])
            .ok_or_else(|| lines.err(format!("unknown patch kind '{}'", t[1])))?;
        patches.push(Patch {
            name: t[0].to_string(),
            kind,
            start: lines.num(t[2])?,
            len: lines.num(t[3])?,
        });
    }
    if lines.next_tokens()? != ["END"] {
        return Err(lines.err("expected END"));
    }

    Mesh::from_parts(MeshParts {
        dimension,
        points,
        cells,
        face_vertices,
        owners,
        neighbours,
        patches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_pipe_mesh;

    #[test]
    fn round_trip_is_lossless() {
        let mesh = generate_pipe_mesh(0.1, 0.02, 6, 3).unwrap();
        let back = from_str(&to_string(&mesh)).unwrap();
        assert_eq!(back.points(), mesh.points());
        assert_eq!(back.cell_volumes(), mesh.cell_volumes());
        assert_eq!(back.cell_centroids(), mesh.cell_centroids());
        assert_eq!(back.faces(), mesh.faces());
        assert_eq!(back.patches(), mesh.patches());
    }

    #[test]
    fn rejects_truncated_file() {
        let text = to_string(&generate_pipe_mesh(0.1, 0.02, 2, 2).unwrap());
        let cut = &text[..text.len() / 2];
        assert!(matches!(from_str(cut), Err(Error::Corrupt { .. })));
        assert!(from_str("hello 1\n").is_err());
    }
}
