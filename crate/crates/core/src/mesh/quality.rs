use super::Mesh;

/// Meshes whose worst face non-orthogonality reaches this angle are rejected
/// by the generators.
pub const NON_ORTHOGONALITY_CAP_DEG: f64 = 70.0;

/// Aggregate mesh quality figures.
///
/// Skewness of an internal face is the distance between its centroid and the
/// point where the owner-neighbour centroid line crosses the face plane,
/// divided by the centroid distance `|d|`.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub avg_non_orthogonality: f64,
    pub max_non_orthogonality: f64,
    pub avg_skewness: f64,
    pub max_skewness: f64,
    pub cell_count: usize,
    pub h_min: f64,
    pub h_max: f64,
}

impl std::fmt::Display for QualityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "cells                 {}", self.cell_count)?;
        writeln!(
            f,
            "h_min / h_max [m]     {:.6e} / {:.6e}",
            self.h_min, self.h_max
        )?;
        writeln!(
            f,
            "non-orthogonality     avg {:.3} deg, max {:.3} deg",
            self.avg_non_orthogonality, self.max_non_orthogonality
        )?;
        write!(
            f,
            "skewness              avg {:.4}, max {:.4}",
            self.avg_skewness, self.max_skewness
        )
    }
}

/// Per-face non-orthogonality angle in degrees.
pub fn face_non_orthogonality(mesh: &Mesh, f: usize) -> f64 {
    let a = mesh.face(f).area;
    let d = mesh.delta(f);
    let c = (a.dot(&d) / (a.norm() * d.norm())).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

pub fn face_skewness(mesh: &Mesh, f: usize) -> f64 {
    let face = mesh.face(f);
    let co = mesh.cell_centroids()[face.owner];
    let d = mesh.delta(f);
    let t = face.area.dot(&(face.centroid - co)) / face.area.dot(&d);
    let hit = co + d * t;
    (face.centroid - hit).norm() / d.norm()
}

pub fn mesh_quality(mesh: &Mesh) -> QualityReport {
    let n = mesh.n_internal_faces();
    let (mut sum_no, mut max_no, mut sum_sk, mut max_sk) = (0.0, 0.0f64, 0.0, 0.0f64);
    for f in 0..n {
        let no = face_non_orthogonality(mesh, f);
        let sk = face_skewness(mesh, f);
        sum_no += no;
        sum_sk += sk;
        max_no = max_no.max(no);
        max_sk = max_sk.max(sk);
    }
    let h = mesh.cell_diameters();
    let h_min = h.iter().copied().fold(f64::INFINITY, f64::min);
    let h_max = h.iter().copied().fold(0.0, f64::max);
    let denom = n.max(1) as f64;
    QualityReport {
        avg_non_orthogonality: sum_no / denom,
        max_non_orthogonality: max_no,
        avg_skewness: sum_sk / denom,
        max_skewness: max_sk,
        cell_count: mesh.n_cells(),
        h_min,
        h_max,
    }
}
