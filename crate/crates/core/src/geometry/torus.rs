//! Torus of revolution about the z axis, sampled on a periodic angle grid.

use std::f64::consts::PI;

use nalgebra::Vector3;

use super::{ChartPoint, GeometrySpec, LocalChart, Surface, SurfaceQuadrature};

const DEFAULT_TUBE_NODES: usize = 6;

#[derive(Clone, Debug)]
pub(crate) struct TorusSurface {
    major: f64,
    minor: f64,
}

impl TorusSurface {
    pub(crate) fn reach(&self) -> f64 {
        0.8 * self.minor
    }

    fn at(&self, around: f64, tube: f64) -> ChartPoint {
        let (st, ct) = around.sin_cos();
        let (sp, cp) = tube.sin_cos();
        let rho = self.major + self.minor * cp;
        ChartPoint {
            x: Vector3::new(rho * ct, rho * st, self.minor * sp),
            n: Vector3::new(cp * ct, cp * st, sp),
            jac: self.minor * rho,
        }
    }

    pub(crate) fn chart_at(&self, x: &Vector3<f64>) -> TorusChart<'_> {
        let around = x.y.atan2(x.x);
        let tube = x.z.atan2(x.x.hypot(x.y) - self.major);
        let rho = self.major + self.minor * tube.cos();
        TorusChart {
            surface: self,
            around,
            tube,
            su: rho,
            sv: self.minor,
        }
    }
}

/// Angles rescaled to arc length at the centre node.
pub(crate) struct TorusChart<'a> {
    surface: &'a TorusSurface,
    around: f64,
    tube: f64,
    su: f64,
    sv: f64,
}

impl LocalChart for TorusChart<'_> {
    fn eval(&self, uv: [f64; 2]) -> Option<ChartPoint> {
        let a = uv[0] / self.su;
        let b = uv[1] / self.sv;
        if a.abs() > PI || b.abs() > PI {
            return None;
        }
        let mut p = self.surface.at(self.around + a, self.tube + b);
        p.jac /= self.su * self.sv;
        Some(p)
    }
}

pub(crate) fn build(spec: &GeometrySpec, major: f64, minor: f64) -> SurfaceQuadrature {
    let n_tube = spec.nodes_per_edge.unwrap_or(DEFAULT_TUBE_NODES << spec.resolution);
    let n_around = ((n_tube as f64) * major / minor).round().max(3.0) as usize;
    let surface = TorusSurface { major, minor };
    let da = 2.0 * PI / n_around as f64;
    let db = 2.0 * PI / n_tube as f64;
    let total = n_tube * n_around;
    let mut points = Vec::with_capacity(total);
    let mut normals = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for i in 0..n_around {
        for j in 0..n_tube {
            let p = surface.at((i as f64 + 0.5) * da, (j as f64 + 0.5) * db);
            points.push(p.x);
            normals.push(p.n);
            weights.push(p.jac * da * db);
        }
    }
    let area: f64 = weights.iter().sum();
    SurfaceQuadrature {
        points,
        normals,
        weights,
        h: (area / total as f64).sqrt(),
        patch_id: vec![0; total],
        descriptor: spec.clone(),
        surface: Surface::Torus(surface),
    }
}
