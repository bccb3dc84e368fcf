//! Watertight triangle meshes read from OFF files; one node per triangle.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::Vector3;

use super::{GeometrySpec, Surface, SurfaceQuadrature};
use crate::error::{Result, ShellError};

const MIN_TRIANGLE_AREA: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct TriMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

fn mesh_err(path: &Path, reason: impl Into<String>) -> ShellError {
    ShellError::Mesh {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

pub fn read_off(path: &Path) -> Result<TriMesh> {
    let text = std::fs::read_to_string(path)?;
    let mesh = parse_off(&text).map_err(|r| mesh_err(path, r))?;
    mesh.validated().map_err(|r| mesh_err(path, r))
}

pub(crate) fn parse_off(text: &str) -> std::result::Result<TriMesh, String> {
    let mut tokens = text.lines().map(|l| l.split('#').next().unwrap_or("")).flat_map(|l| l.split_whitespace());
    match tokens.next() {
        Some("OFF") => {}
        Some(t) if t.starts_with("OFF") => return Err(format!("unsupported header {t}")),
        _ => return Err("missing OFF header".into()),
    }
    let mut next_num = |what: &str| -> std::result::Result<f64, String> {
        let t = tokens.next().ok_or_else(|| format!("unexpected end of file reading {what}"))?;
        t.parse::<f64>().map_err(|_| format!("bad number {t:?} in {what}"))
    };
    let nv = next_num("vertex count")? as usize;
    let nf = next_num("face count")? as usize;
    let _edges = next_num("edge count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        vertices.push(Vector3::new(next_num("vertex")?, next_num("vertex")?, next_num("vertex")?));
    }
    let mut triangles = Vec::with_capacity(nf);
    for f in 0..nf {
        let k = next_num("face")? as usize;
        if k != 3 {
            return Err(format!("face {f} has {k} vertices, only triangles are supported"));
        }
        let mut t = [0usize; 3];
        for v in &mut t {
            let idx = next_num("face index")?;
            if idx < 0.0 || idx as usize >= nv || idx.fract() != 0.0 {
                return Err(format!("face {f} references vertex {idx}"));
            }
            *v = idx as usize;
        }
        triangles.push(t);
    }
    Ok(TriMesh { vertices, triangles })
}

impl TriMesh {
    pub fn triangle(&self, t: usize) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    fn area_vector(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(t);
        (b - a).cross(&(c - a)) * 0.5
    }

    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Checks degeneracy, closedness and consistent winding, then orients outward.
    pub(crate) fn validated(mut self) -> std::result::Result<Self, String> {
        if self.triangles.is_empty() {
            return Err("mesh has no faces".into());
        }
        for t in 0..self.triangles.len() {
            let area = self.area_vector(t).norm();
            if area < MIN_TRIANGLE_AREA {
                return Err(format!("degenerate triangle {t} (area {area:e})"));
            }
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                *directed.entry((tri[k], tri[(k + 1) % 3])).or_default() += 1;
            }
        }
        for (&(a, b), &count) in &directed {
            let back = directed.get(&(b, a)).copied().unwrap_or(0);
            if back == 0 {
                return Err(format!("boundary edge ({a}, {b}): mesh is not watertight"));
            }
            if count != 1 || back != 1 {
                return Err(format!("edge ({a}, {b}) is non-manifold or inconsistently wound"));
            }
        }
        if self.signed_volume() < 0.0 {
            for tri in &mut self.triangles {
                tri.swap(1, 2);
            }
        }
        Ok(self)
    }

    /// Splits every triangle into four at its edge midpoints.
    pub fn subdivide(&self) -> TriMesh {
        let mut vertices = self.vertices.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vs: &mut Vec<Vector3<f64>>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vs.push((vs[a] + vs[b]) * 0.5);
                vs.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        TriMesh { vertices, triangles }
    }
}

pub(crate) fn build(spec: &GeometrySpec, mesh: TriMesh) -> Result<SurfaceQuadrature> {
    let nt = mesh.triangles.len();
    let mut points = Vec::with_capacity(nt);
    let mut normals = Vec::with_capacity(nt);
    let mut weights = Vec::with_capacity(nt);
    for t in 0..nt {
        let [a, b, c] = mesh.triangle(t);
        let av = mesh.area_vector(t);
        let area = av.norm();
        points.push((a + b + c) / 3.0);
        normals.push(av / area);
        weights.push(area);
    }
    let area: f64 = weights.iter().sum();
    Ok(SurfaceQuadrature {
        points,
        normals,
        weights,
        h: (area / nt as f64).sqrt(),
        patch_id: (0..nt).collect(),
        descriptor: spec.clone(),
        surface: Surface::Mesh(mesh),
    })
}
