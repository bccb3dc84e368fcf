//! Star-shaped surfaces `x = r(d) d` sampled on the six equiangular faces of a
//! cubed sphere, with node-centred gnomonic charts for local work.

use std::f64::consts::FRAC_PI_4;

use nalgebra::Vector3;

use super::{corrected_midpoint_weights, tangent_frame, ChartPoint, GeometrySpec, LocalChart, Shape, Surface, SurfaceQuadrature};
use crate::error::{Result, ShellError};

const DEFAULT_EDGE_NODES: usize = 5;
// gnomonic coordinates past this are too close to the chart horizon
const CHART_LIMIT: f64 = 12.0;

#[derive(Clone, Debug)]
pub(crate) enum Radial {
    Sphere(f64),
    Ellipsoid([f64; 3]),
    Rounded { inner: f64, rounding: f64 },
}

impl Radial {
    /// Radius along the unit direction `d` and the outward unit normal there.
    fn at(&self, d: &Vector3<f64>) -> (f64, Vector3<f64>) {
        match *self {
            Radial::Sphere(r) => (r, *d),
            Radial::Ellipsoid(a) => {
                let s: f64 = (0..3).map(|k| (d[k] / a[k]).powi(2)).sum();
                let t = 1.0 / s.sqrt();
                let g = Vector3::new(d.x / (a[0] * a[0]), d.y / (a[1] * a[1]), d.z / (a[2] * a[2]));
                (t, g.normalize())
            }
            Radial::Rounded { inner, rounding } => {
                let t = rounded_radius(d, inner, rounding);
                (t, rounded_gradient(&(d * t), inner))
            }
        }
    }
}

fn rounded_sdf(x: &Vector3<f64>, inner: f64, rounding: f64) -> f64 {
    let q = x.abs().add_scalar(-inner);
    let outside = q.map(|v| v.max(0.0)).norm();
    outside + q.max().min(0.0) - rounding
}

fn rounded_gradient(x: &Vector3<f64>, inner: f64) -> Vector3<f64> {
    let q = x.abs().add_scalar(-inner);
    let v = Vector3::from_fn(|k, _| q[k].max(0.0) * x[k].signum());
    if v.norm() > 0.0 {
        return v.normalize();
    }
    let k = q.imax();
    let mut g = Vector3::zeros();
    g[k] = x[k].signum();
    g
}

/// Distance to the rounded box along `d`, by safeguarded Newton on the signed distance.
fn rounded_radius(d: &Vector3<f64>, inner: f64, rounding: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 3f64.sqrt() * inner + rounding;
    hi *= 1.0 + 1e-9;
    let mut t = 0.5 * (lo + hi);
    for _ in 0..100 {
        let x = d * t;
        let f = rounded_sdf(&x, inner, rounding);
        if f.abs() < 1e-15 * hi {
            break;
        }
        if f < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let slope = rounded_gradient(&x, inner).dot(d);
        let next = t - f / slope;
        t = if slope > 0.0 && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    t
}

#[derive(Clone, Debug)]
pub(crate) struct StarSurface {
    radial: Radial,
    reach: f64,
}

impl StarSurface {
    pub(crate) fn reach(&self) -> f64 {
        self.reach
    }

    fn point_on(&self, p: &Vector3<f64>) -> ChartPoint {
        let pn = p.norm();
        let d = p / pn;
        let (t, n) = self.radial.at(&d);
        // area element t^2/(N.d) dOmega, with dOmega = du dv / |p|^3 when p.d0 = 1
        let jac = t * t / n.dot(&d) / (pn * pn * pn);
        ChartPoint { x: d * t, n, jac }
    }

    pub(crate) fn chart_at(&self, x: &Vector3<f64>) -> StarChart<'_> {
        let d = x.normalize();
        let (e1, e2) = tangent_frame(&d);
        StarChart { surface: self, d, e1, e2 }
    }
}

pub(crate) struct StarChart<'a> {
    surface: &'a StarSurface,
    d: Vector3<f64>,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
}

impl LocalChart for StarChart<'_> {
    fn eval(&self, uv: [f64; 2]) -> Option<ChartPoint> {
        if uv[0].abs() > CHART_LIMIT || uv[1].abs() > CHART_LIMIT {
            return None;
        }
        let p = self.d + self.e1 * uv[0] + self.e2 * uv[1];
        Some(self.surface.point_on(&p))
    }
}

fn face_frame(face: usize) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let axis = face / 2;
    let sign = if face.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut c = Vector3::zeros();
    c[axis] = sign;
    let mut t1 = Vector3::zeros();
    t1[(axis + 1) % 3] = 1.0;
    let mut t2 = Vector3::zeros();
    t2[(axis + 2) % 3] = 1.0;
    (c, t1, t2)
}

pub(crate) fn build(spec: &GeometrySpec) -> Result<SurfaceQuadrature> {
    let (radial, reach) = match spec.shape {
        Shape::Sphere { radius } => (Radial::Sphere(radius), 0.75 * radius),
        Shape::Ellipsoid { semi_axes } => {
            let lo = semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = semi_axes.iter().cloned().fold(0.0, f64::max);
            (Radial::Ellipsoid(semi_axes), 0.75 * lo * lo / hi)
        }
        Shape::RoundedCube { edge, rounding } => (
            Radial::Rounded {
                inner: edge / 2.0 - rounding,
                rounding,
            },
            0.3 * edge,
        ),
        _ => return Err(ShellError::Geometry("not a star-shaped parametric surface".into())),
    };
    let n = spec.nodes_per_edge.unwrap_or(DEFAULT_EDGE_NODES << spec.resolution);
    let surface = StarSurface { radial, reach };
    let step = 2.0 * FRAC_PI_4 / n as f64;
    let w1 = corrected_midpoint_weights(n);

    let total = 6 * n * n;
    let mut points = Vec::with_capacity(total);
    let mut normals = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let mut patch_id = Vec::with_capacity(total);
    for face in 0..6 {
        let (c, t1, t2) = face_frame(face);
        for j in 0..n {
            let b = (-FRAC_PI_4 + (j as f64 + 0.5) * step).tan();
            for i in 0..n {
                let a = (-FRAC_PI_4 + (i as f64 + 0.5) * step).tan();
                let p = c + t1 * a + t2 * b;
                // the node's own face chart, where p.c = 1 as well
                let cp = surface.point_on(&p);
                let sec2 = (1.0 + a * a) * (1.0 + b * b);
                points.push(cp.x);
                normals.push(cp.n);
                weights.push(cp.jac * sec2 * step * step * w1[i] * w1[j]);
                patch_id.push(face);
            }
        }
    }
    let area: f64 = weights.iter().sum();
    let h = (area / total as f64).sqrt();
    Ok(SurfaceQuadrature {
        points,
        normals,
        weights,
        h,
        patch_id,
        descriptor: spec.clone(),
        surface: Surface::Star(surface),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounded_radius_hits_surface() {
        let d = Vector3::new(0.3, -0.5, 0.8).normalize();
        let t = rounded_radius(&d, 0.7, 0.3);
        assert!(rounded_sdf(&(d * t), 0.7, 0.3).abs() < 1e-13);
        let axis = rounded_radius(&Vector3::x(), 0.7, 0.3);
        assert!((axis - 1.0).abs() < 1e-13);
    }

    #[test]
    fn chart_centre_is_node() {
        let q = super::super::build_quadrature(&GeometrySpec::with_nodes_per_edge(Shape::Ellipsoid { semi_axes: [1.0, 1.3, 0.8] }, 4)).unwrap();
        let c = q.local_chart(7).unwrap().eval([0.0, 0.0]).unwrap();
        assert!((c.x - q.points[7]).norm() < 1e-14);
        assert!((c.n - q.normals[7]).norm() < 1e-14);
    }
}
