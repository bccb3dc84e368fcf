//! Closed-surface quadratures: cubed-sphere charts for star-shaped surfaces,
//! a periodic grid for the torus, and centroid rules on OFF triangle meshes.

mod cubed;
mod mesh;
mod torus;

use std::f64::consts::PI;
use std::path::PathBuf;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShellError};

pub use mesh::{read_off, TriMesh};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Sphere { radius: f64 },
    Ellipsoid { semi_axes: [f64; 3] },
    Torus { major: f64, minor: f64 },
    RoundedCube { edge: f64, rounding: f64 },
    Mesh { path: PathBuf },
}

/// A surface description plus its refinement level. Each level halves `h`.
/// `nodes_per_edge` overrides the level-derived grid size for parametric shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub shape: Shape,
    #[serde(default)]
    pub resolution: u32,
    #[serde(default)]
    pub nodes_per_edge: Option<usize>,
}

impl GeometrySpec {
    pub fn new(shape: Shape, resolution: u32) -> Self {
        Self {
            shape,
            resolution,
            nodes_per_edge: None,
        }
    }

    pub fn with_nodes_per_edge(shape: Shape, n: usize) -> Self {
        Self {
            shape,
            resolution: 0,
            nodes_per_edge: Some(n),
        }
    }

    pub fn sphere(radius: f64, nodes_per_edge: usize) -> Self {
        Self::with_nodes_per_edge(Shape::Sphere { radius }, nodes_per_edge)
    }

    /// Same shape, grid size multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        let mut s = self.clone();
        match s.nodes_per_edge {
            Some(n) => s.nodes_per_edge = Some(n * factor),
            None => s.resolution += factor.max(1).trailing_zeros(),
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ShellError::Geometry(format!("{what} must be positive, got {v}")))
            }
        };
        match &self.shape {
            Shape::Sphere { radius } => pos(*radius, "radius")?,
            Shape::Ellipsoid { semi_axes } => {
                for a in semi_axes {
                    pos(*a, "semi-axis")?;
                }
            }
            Shape::Torus { major, minor } => {
                pos(*major, "major radius")?;
                pos(*minor, "minor radius")?;
                if minor >= major {
                    return Err(ShellError::Geometry("torus needs minor < major".into()));
                }
            }
            Shape::RoundedCube { edge, rounding } => {
                pos(*edge, "edge")?;
                pos(*rounding, "rounding")?;
                if *rounding >= edge / 2.0 {
                    return Err(ShellError::Geometry("rounding must be below edge/2".into()));
                }
            }
            Shape::Mesh { .. } => {}
        }
        if let Some(n) = self.nodes_per_edge {
            if n < 2 {
                return Err(ShellError::Geometry("nodes_per_edge must be at least 2".into()));
            }
        }
        Ok(())
    }

    /// Closed-form area where one is known.
    pub fn analytic_area(&self) -> Option<f64> {
        match self.shape {
            Shape::Sphere { radius } => Some(4.0 * PI * radius * radius),
            Shape::Torus { major, minor } => Some(4.0 * PI * PI * major * minor),
            Shape::RoundedCube { edge, rounding } => {
                let b = edge / 2.0 - rounding;
                Some(24.0 * b * b + 12.0 * PI * b * rounding + 4.0 * PI * rounding * rounding)
            }
            _ => None,
        }
    }

    pub fn is_parametric(&self) -> bool {
        !matches!(self.shape, Shape::Mesh { .. })
    }
}

/// A point on a local chart: position, unit outward normal and the area
/// density with respect to the chart coordinates.
#[derive(Clone, Copy, Debug)]
pub struct ChartPoint {
    pub x: Vector3<f64>,
    pub n: Vector3<f64>,
    pub jac: f64,
}

/// Evaluation of the surface around a node, centred at that node (`uv = 0`).
pub trait LocalChart {
    fn eval(&self, uv: [f64; 2]) -> Option<ChartPoint>;
}

#[derive(Clone, Debug)]
pub(crate) enum Surface {
    Star(cubed::StarSurface),
    Torus(torus::TorusSurface),
    Mesh(TriMesh),
}

/// Nodes, outward unit normals and positive weights on a closed surface.
#[derive(Clone, Debug)]
pub struct SurfaceQuadrature {
    pub points: Vec<Vector3<f64>>,
    pub normals: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
    pub h: f64,
    pub patch_id: Vec<usize>,
    pub descriptor: GeometrySpec,
    pub(crate) surface: Surface,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Approach from the bounded component (against the normal).
    Interior,
    /// Approach from the unbounded component (along the normal).
    Exterior,
}

impl Side {
    /// The sign multiplying `t N` in the offset point.
    pub fn normal_sign(self) -> f64 {
        match self {
            Side::Interior => -1.0,
            Side::Exterior => 1.0,
        }
    }
}

pub fn build_quadrature(spec: &GeometrySpec) -> Result<SurfaceQuadrature> {
    spec.validate()?;
    let q = match &spec.shape {
        Shape::Sphere { .. } | Shape::Ellipsoid { .. } | Shape::RoundedCube { .. } => cubed::build(spec)?,
        Shape::Torus { major, minor } => torus::build(spec, *major, *minor),
        Shape::Mesh { path } => {
            let mut m = read_off(path)?;
            for _ in 0..spec.resolution {
                m = m.subdivide();
            }
            mesh::build(spec, m)?
        }
    };
    Ok(q)
}

impl SurfaceQuadrature {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `sum_i w_i N_i`, which vanishes for a closed surface.
    pub fn flux_of_normal(&self) -> Vector3<f64> {
        self.normals.iter().zip(&self.weights).fold(Vector3::zeros(), |acc, (n, w)| acc + n * *w)
    }

    pub fn centroid(&self) -> Vector3<f64> {
        let total = self.area();
        self.points.iter().zip(&self.weights).fold(Vector3::zeros(), |acc, (x, w)| acc + x * *w) / total
    }

    pub fn has_charts(&self) -> bool {
        !matches!(self.surface, Surface::Mesh(_))
    }

    /// Largest window radius for which node-centred charts stay valid.
    pub fn chart_reach(&self) -> f64 {
        match &self.surface {
            Surface::Star(s) => s.reach(),
            Surface::Torus(t) => t.reach(),
            Surface::Mesh(_) => self.h,
        }
    }

    /// A chart centred at node `i`; `None` for meshes.
    pub fn local_chart(&self, i: usize) -> Option<Box<dyn LocalChart + '_>> {
        match &self.surface {
            Surface::Star(s) => Some(Box::new(s.chart_at(&self.points[i]))),
            Surface::Torus(t) => Some(Box::new(t.chart_at(&self.points[i]))),
            Surface::Mesh(_) => None,
        }
    }

    /// The flat triangle carrying node `i` on a mesh surface.
    pub fn mesh_triangle(&self, i: usize) -> Option<[Vector3<f64>; 3]> {
        match &self.surface {
            Surface::Mesh(m) => Some(m.triangle(self.patch_id[i])),
            _ => None,
        }
    }

    /// Offset points `x_i -+ t N_i` on the requested side.
    pub fn nontangential_offsets(&self, t: f64, side: Side) -> Result<Vec<Vector3<f64>>> {
        nontangential_offsets(self, t, side)
    }
}

/// An orthonormal tangent pair completing `n` to a right-handed frame.
pub fn tangent_frame(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() < 0.6 { Vector3::x() } else { Vector3::y() };
    let t1 = (helper - n * n.dot(&helper)).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

pub fn nontangential_offsets(q: &SurfaceQuadrature, t: f64, side: Side) -> Result<Vec<Vector3<f64>>> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(ShellError::NonPositiveOffset(t));
    }
    let s = side.normal_sign() * t;
    Ok(q.points.iter().zip(&q.normals).map(|(x, n)| x + n * s).collect())
}

/// Weights of the end-corrected midpoint rule on `[0, n]` with unit spacing.
///
/// Each end gets up to four corrected weights, chosen so the rule absorbs the
/// endpoint derivative terms of the midpoint error expansion; the result is
/// fifth order for smooth integrands.
pub(crate) fn corrected_midpoint_weights(n: usize) -> Vec<f64> {
    let k = (n / 2).min(4);
    let mut w = vec![1.0; n];
    if k < 2 {
        return w;
    }
    // sum_j d_j f(j + 1/2) reproduces -(1/24) f'(0) + (7/5760) f'''(0) for polynomials of degree < k
    let rhs = |p: usize| match p {
        1 => -1.0 / 24.0,
        3 => 7.0 / 5760.0 * 6.0,
        _ => 0.0,
    };
    let a = nalgebra::DMatrix::from_fn(k, k, |p, j| (j as f64 + 0.5).powi(p as i32));
    let b = nalgebra::DVector::from_fn(k, |p, _| rhs(p));
    let d = a.lu().solve(&b).expect("Vandermonde system is nonsingular");
    for j in 0..k {
        w[j] += d[j];
        w[n - 1 - j] += d[j];
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrected_rule_is_high_order() {
        let f = |x: f64| (3.0 * x).sin().exp();
        let exact = 2.018_889_845_184_383_5;
        let err = |n: usize| {
            let w = corrected_midpoint_weights(n);
            let h = 1.0 / n as f64;
            let s: f64 = (0..n).map(|k| w[k] * f((k as f64 + 0.5) * h)).sum::<f64>() * h;
            (s - exact).abs()
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e2 < 1e-6, "{e2}");
        assert!(e1 / e2 > 20.0, "{e1} {e2}");
    }

    #[test]
    fn corrected_weights_stay_positive() {
        for n in 2..40 {
            assert!(corrected_midpoint_weights(n).iter().all(|&w| w > 0.5));
        }
    }

    #[test]
    fn offsets_reject_nonpositive() {
        let q = build_quadrature(&GeometrySpec::sphere(1.0, 4)).unwrap();
        assert!(matches!(
            q.nontangential_offsets(0.0, Side::Interior),
            Err(ShellError::NonPositiveOffset(_))
        ));
    }
}
