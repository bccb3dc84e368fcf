//! Local correction data for singular and nearly singular surface integrals.
//!
//! Around each node the kernel is split with a smooth window of radius `R`.
//! The windowed part is integrated exactly (to quadrature precision) against a
//! small polynomial basis in polar coordinates of a node-centred chart, where
//! pairing the directions `t` and `t + pi` removes the principal-value
//! singularity. The difference to the plain punctured node sum is spread over
//! the nearest nodes by a weighted least-norm fit.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShellError};
use crate::geometry::{tangent_frame, LocalChart, SurfaceQuadrature};

use super::kernel::BlockKernel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NearFieldOptions {
    /// Window radius; defaults to the geometry's chart reach.
    pub window: Option<f64>,
    /// Number of direction pairs in the polar rule.
    pub angles: usize,
    /// Gauss-Legendre nodes along each paired ray.
    pub radial: usize,
    /// Total degree of the local polynomial basis.
    pub degree: usize,
    /// Number of nearest nodes carrying the correction.
    pub stencil: usize,
}

impl Default for NearFieldOptions {
    fn default() -> Self {
        Self {
            window: None,
            angles: 24,
            radial: 16,
            degree: 3,
            stencil: 24,
        }
    }
}

/// Smooth cutoff equal to 1 at 0 and vanishing with all derivatives at 1.
pub(crate) fn window(s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        (2.0 * (-1.0 / s).exp() / (s - 1.0)).exp()
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wt = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wt;
        w[n - 1 - i] = 0.5 * wt;
    }
    if n == 1 {
        return (vec![0.5], vec![1.0]);
    }
    (x, w)
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct PolarPoint {
    pub y: Vector3<f64>,
    pub n: Vector3<f64>,
    pub wt: f64,
}

/// Tangent-plane monomials of bounded degree centred at a node.
#[derive(Clone, Debug)]
pub(crate) struct LocalBasis {
    origin: Vector3<f64>,
    t1: Vector3<f64>,
    t2: Vector3<f64>,
    scale: f64,
    degree: usize,
}

impl LocalBasis {
    pub fn len(&self) -> usize {
        (self.degree + 1) * (self.degree + 2) / 2
    }

    pub fn eval(&self, y: &Vector3<f64>, out: &mut [f64]) {
        let d = (y - self.origin) / self.scale;
        let (u, v) = (d.dot(&self.t1), d.dot(&self.t2));
        let mut k = 0;
        for total in 0..=self.degree {
            for b in 0..=total {
                out[k] = u.powi((total - b) as i32) * v.powi(b as i32);
                k += 1;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct NodeNear {
    pub polar: Vec<PolarPoint>,
    /// Punctured window sum entries `(j, w_j omega_ij)`.
    pub window: Vec<(usize, f64)>,
    pub stencil: Vec<usize>,
    /// Row-major `stencil.len() x basis.len()` map from moment residuals to corrections.
    pub coeff: Vec<f64>,
    pub basis: LocalBasis,
}

/// Precomputed local correction geometry for one quadrature.
#[derive(Clone, Debug)]
pub struct NearField {
    pub radius: f64,
    pub options: NearFieldOptions,
    pub(crate) nodes: Vec<NodeNear>,
    pub(crate) charted: bool,
}

/// Chart radius along direction `dir` at which the surface leaves the ball of radius `r`.
pub(crate) fn chart_exit(chart: &dyn LocalChart, origin: &Vector3<f64>, dir: [f64; 2], r: f64) -> Option<f64> {
    let dist = |rho: f64| chart.eval([rho * dir[0], rho * dir[1]]).map(|p| (p.x - origin).norm());
    let probe = 1e-3 * r;
    let stretch = dist(probe)? / probe;
    let mut lo = 0.0;
    let mut hi = r / stretch;
    loop {
        let d = dist(hi)?;
        if d >= r {
            break;
        }
        lo = hi;
        hi *= 1.5;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if dist(mid)? < r {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

fn ray_points(
    chart: &dyn LocalChart,
    dir: [f64; 2],
    from: f64,
    to: f64,
    gl: &(Vec<f64>, Vec<f64>),
    dt: f64,
    origin: &Vector3<f64>,
    radius: Option<f64>,
    out: &mut Vec<PolarPoint>,
) -> Option<()> {
    let len = to - from;
    for (s, w) in gl.0.iter().zip(&gl.1) {
        let rho = from + s * len;
        let p = chart.eval([rho * dir[0], rho * dir[1]])?;
        let cut = radius.map_or(1.0, |r| window((p.x - origin).norm() / r));
        out.push(PolarPoint {
            y: p.x,
            n: p.n,
            wt: dt * w * len * rho * p.jac * cut,
        });
    }
    Some(())
}

/// Paired polar rule for `int f(y) omega(|y - x0|/R) dS(y)` around a chart centre.
pub(crate) fn windowed_polar(chart: &dyn LocalChart, origin: &Vector3<f64>, radius: f64, angles: usize, radial: usize) -> Option<Vec<PolarPoint>> {
    let gl = gauss_legendre(radial);
    let gl_tail = gauss_legendre(radial.div_ceil(2).max(4));
    let dt = PI / angles as f64;
    let mut pts = Vec::with_capacity(angles * (2 * radial + gl_tail.0.len()));
    for k in 0..angles {
        let t = (k as f64 + 0.5) * dt;
        let (s, c) = t.sin_cos();
        let fwd = [c, s];
        let back = [-c, -s];
        let rf = chart_exit(chart, origin, fwd, radius)?;
        let rb = chart_exit(chart, origin, back, radius)?;
        let common = rf.min(rb);
        ray_points(chart, fwd, 0.0, common, &gl, dt, origin, Some(radius), &mut pts)?;
        ray_points(chart, back, 0.0, common, &gl, dt, origin, Some(radius), &mut pts)?;
        let (dir, far) = if rf > rb { (fwd, rf) } else { (back, rb) };
        if far > common * (1.0 + 1e-12) {
            ray_points(chart, dir, common, far, &gl_tail, dt, origin, Some(radius), &mut pts)?;
        }
    }
    Some(pts)
}

/// Flat triangle seen from an interior point, as a chart in its own plane.
struct TriangleChart {
    origin: Vector3<f64>,
    t1: Vector3<f64>,
    t2: Vector3<f64>,
    n: Vector3<f64>,
}

impl LocalChart for TriangleChart {
    fn eval(&self, uv: [f64; 2]) -> Option<crate::geometry::ChartPoint> {
        Some(crate::geometry::ChartPoint {
            x: self.origin + self.t1 * uv[0] + self.t2 * uv[1],
            n: self.n,
            jac: 1.0,
        })
    }
}

/// Distance from `p` to the triangle boundary along in-plane direction `d`.
fn triangle_exit(tri: &[Vector3<f64>; 3], p: &Vector3<f64>, d: &Vector3<f64>) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..3 {
        let a = tri[k];
        let e = tri[(k + 1) % 3] - a;
        // solve p + s d = a + u e in the triangle plane
        let m = nalgebra::Matrix3x2::from_columns(&[*d, -e]);
        let rhs = a - p;
        if let Some(sol) = (m.transpose() * m).try_inverse().map(|inv| inv * m.transpose() * rhs) {
            let (s, u) = (sol[0], sol[1]);
            if s > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
                best = best.min(s);
            }
        }
    }
    best
}

/// Paired polar rule over a whole flat triangle around an interior point.
pub(crate) fn triangle_polar(tri: &[Vector3<f64>; 3], p: &Vector3<f64>, normal: &Vector3<f64>, angles: usize, radial: usize) -> Vec<PolarPoint> {
    let (t1, t2) = tangent_frame(normal);
    let chart = TriangleChart {
        origin: *p,
        t1,
        t2,
        n: *normal,
    };
    let gl = gauss_legendre(radial);
    let dt = PI / angles as f64;
    let mut pts = Vec::new();
    for k in 0..angles {
        let t = (k as f64 + 0.5) * dt;
        let (s, c) = t.sin_cos();
        let rf = triangle_exit(tri, p, &(t1 * c + t2 * s));
        let rb = triangle_exit(tri, p, &(-(t1 * c + t2 * s)));
        let common = rf.min(rb);
        ray_points(&chart, [c, s], 0.0, common, &gl, dt, p, None, &mut pts);
        ray_points(&chart, [-c, -s], 0.0, common, &gl, dt, p, None, &mut pts);
        let (dir, far) = if rf > rb { ([c, s], rf) } else { ([-c, -s], rb) };
        if far > common * (1.0 + 1e-12) {
            ray_points(&chart, dir, common, far, &gl, dt, p, None, &mut pts);
        }
    }
    pts
}

impl NearField {
    pub fn new(q: &SurfaceQuadrature, options: &NearFieldOptions) -> Result<Self> {
        if options.angles < 2 || options.radial < 2 || options.stencil < 1 {
            return Err(ShellError::InvalidArgument("near-field rule too small".into()));
        }
        let charted = q.has_charts();
        let radius = if charted {
            options.window.unwrap_or_else(|| q.chart_reach())
        } else {
            0.0
        };
        let n = q.len();
        let nodes: Vec<Result<NodeNear>> = (0..n)
            .into_par_iter()
            .map(|i| {
                if charted {
                    Self::charted_node(q, i, radius, options)
                } else {
                    Ok(Self::mesh_node(q, i, options))
                }
            })
            .collect();
        let nodes = nodes.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(Self {
            radius,
            options: options.clone(),
            nodes,
            charted,
        })
    }

    fn charted_node(q: &SurfaceQuadrature, i: usize, radius: f64, o: &NearFieldOptions) -> Result<NodeNear> {
        let x0 = q.points[i];
        let chart = q.local_chart(i).expect("charted surface");
        let polar = windowed_polar(chart.as_ref(), &x0, radius, o.angles, o.radial)
            .ok_or_else(|| ShellError::Geometry(format!("window radius {radius} leaves the chart at node {i}")))?;

        let mut dist: Vec<(f64, usize)> = q.points.iter().enumerate().map(|(j, y)| ((y - x0).norm(), j)).collect();
        let window_sum = dist
            .iter()
            .filter(|&&(r, j)| j != i && r < radius)
            .map(|&(r, j)| (j, q.weights[j] * window(r / radius)))
            .collect();
        let k = o.stencil.min(q.len());
        dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        let mut near: Vec<(f64, usize)> = dist[..k].to_vec();
        near.sort_by(|a, b| a.0.total_cmp(&b.0));
        let stencil: Vec<usize> = near.iter().map(|&(_, j)| j).collect();
        let reach = near.last().map(|&(r, _)| r).unwrap_or(q.h).max(q.h);

        let (t1, t2) = tangent_frame(&q.normals[i]);
        let mut degree = o.degree;
        while (degree + 1) * (degree + 2) / 2 > k && degree > 0 {
            degree -= 1;
        }
        let basis = LocalBasis {
            origin: x0,
            t1,
            t2,
            scale: reach,
            degree,
        };
        let coeff = fit_coefficients(q, &stencil, &basis)?;
        Ok(NodeNear {
            polar,
            window: window_sum,
            stencil,
            coeff,
            basis,
        })
    }

    fn mesh_node(q: &SurfaceQuadrature, i: usize, o: &NearFieldOptions) -> NodeNear {
        let tri = q.mesh_triangle(i).expect("mesh surface");
        let polar = triangle_polar(&tri, &q.points[i], &q.normals[i], 2 * o.angles, o.radial);
        let (t1, t2) = tangent_frame(&q.normals[i]);
        NodeNear {
            polar,
            window: Vec::new(),
            stencil: vec![i],
            coeff: vec![1.0],
            basis: LocalBasis {
                origin: q.points[i],
                t1,
                t2,
                scale: q.h,
                degree: 0,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Average number of polar points per node.
    pub fn polar_size(&self) -> f64 {
        self.nodes.iter().map(|n| n.polar.len()).sum::<usize>() as f64 / self.nodes.len().max(1) as f64
    }

    /// Correction blocks for target `i`, as `(source, row-major d x d block)`.
    pub(crate) fn corrections<K: BlockKernel + ?Sized>(&self, q: &SurfaceQuadrature, kernel: &K, i: usize) -> Vec<(usize, Vec<Complex64>)> {
        let node = &self.nodes[i];
        let x = q.points[i];
        let nx = q.normals[i];
        let residual = moment_residual(q, kernel, node, &x, &nx, &node.polar, false);
        spread(node, &residual, kernel.dim())
    }
}

/// `E_k - B_k`: exact windowed moments minus the node sum over the window.
/// With `include_self` the centre node joins the node sum (off-surface targets).
pub(crate) fn moment_residual<K: BlockKernel + ?Sized>(
    q: &SurfaceQuadrature,
    kernel: &K,
    node: &NodeNear,
    x: &Vector3<f64>,
    nx: &Vector3<f64>,
    polar: &[PolarPoint],
    include_self: bool,
) -> Vec<Complex64> {
    let d = kernel.dim();
    let dd = d * d;
    let nb = node.basis.len();
    let mut acc = vec![Complex64::new(0.0, 0.0); nb * dd];
    let mut kv = vec![Complex64::new(0.0, 0.0); dd];
    let mut phi = [0.0; 36];
    let mut add = |y: &Vector3<f64>, ny: &Vector3<f64>, wt: f64, acc: &mut [Complex64]| {
        kernel.eval(x, nx, y, ny, &mut kv);
        node.basis.eval(y, &mut phi);
        for k in 0..nb {
            let f = phi[k] * wt;
            for (a, v) in acc[k * dd..(k + 1) * dd].iter_mut().zip(&kv) {
                *a += v * f;
            }
        }
    };
    for p in polar {
        add(&p.y, &p.n, p.wt, &mut acc);
    }
    for v in acc.iter_mut() {
        *v = -*v;
    }
    for &(j, ww) in &node.window {
        add(&q.points[j], &q.normals[j], ww, &mut acc);
    }
    if include_self {
        let i = node.stencil[0];
        add(&q.points[i], &q.normals[i], q.weights[i], &mut acc);
    }
    for v in acc.iter_mut() {
        *v = -*v;
    }
    acc
}

pub(crate) fn spread(node: &NodeNear, residual: &[Complex64], d: usize) -> Vec<(usize, Vec<Complex64>)> {
    let dd = d * d;
    let nb = node.basis.len();
    node.stencil
        .iter()
        .enumerate()
        .map(|(s, &j)| {
            let mut block = vec![Complex64::new(0.0, 0.0); dd];
            for k in 0..nb {
                let c = node.coeff[s * nb + k];
                for (b, r) in block.iter_mut().zip(&residual[k * dd..(k + 1) * dd]) {
                    *b += r * c;
                }
            }
            (j, block)
        })
        .collect()
}

fn fit_coefficients(q: &SurfaceQuadrature, stencil: &[usize], basis: &LocalBasis) -> Result<Vec<f64>> {
    let nb = basis.len();
    let ns = stencil.len();
    let mut phi = DMatrix::<f64>::zeros(nb, ns);
    let mut tmp = [0.0; 36];
    for (s, &j) in stencil.iter().enumerate() {
        basis.eval(&q.points[j], &mut tmp);
        for k in 0..nb {
            phi[(k, s)] = tmp[k];
        }
    }
    let w = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(ns, stencil.iter().map(|&j| q.weights[j])));
    let gram = &phi * &w * phi.transpose();
    let inv = gram
        .clone()
        .try_inverse()
        .ok_or_else(|| ShellError::Singular("local moment system".into()))?;
    // c = W Phi^T G^{-1}
    let c = &w * phi.transpose() * inv;
    let mut out = vec![0.0; ns * nb];
    for s in 0..ns {
        for k in 0..nb {
            out[s * nb + k] = c[(s, k)];
        }
    }
    Ok(out)
}

/// Polar rule for a target at height `offset` above (or below) node `i`, with
/// radial panels graded towards the foot point.
pub(crate) fn graded_polar(q: &SurfaceQuadrature, i: usize, radius: f64, offset: f64, angles: usize, radial: usize) -> Option<Vec<PolarPoint>> {
    let chart = q.local_chart(i)?;
    let origin = q.points[i];
    let gl = gauss_legendre(radial);
    let dt = PI / angles as f64;
    let mut pts = Vec::new();
    for k in 0..2 * angles {
        let t = (k as f64 + 0.5) * dt;
        let (s, c) = t.sin_cos();
        let dir = [c, s];
        let far = chart_exit(chart.as_ref(), &origin, dir, radius)?;
        let probe = 1e-3 * radius;
        let stretch = (chart.eval([probe * c, probe * s])?.x - origin).norm() / probe;
        let scale = offset / stretch;
        let mut breaks = vec![0.0];
        let mut b = 0.25 * scale;
        while b < far {
            breaks.push(b);
            b *= 2.0;
        }
        breaks.push(far);
        for w in breaks.windows(2) {
            ray_points(chart.as_ref(), dir, w[0], w[1], &gl, dt, &origin, Some(radius), &mut pts)?;
        }
    }
    Some(pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        for p in 0..12 {
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "{p}");
        }
    }

    #[test]
    fn window_is_a_smooth_cutoff() {
        assert_eq!(window(0.0), 1.0);
        assert_eq!(window(1.0), 0.0);
        assert!(window(0.05) > 1.0 - 1e-6);
        assert!(window(0.98) < 1e-10);
        let mut last = 1.0;
        for k in 1..100 {
            let v = window(k as f64 / 100.0);
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn windowed_polar_recovers_area() {
        // the window integrates to the spherical cap moment of omega
        let q = crate::geometry::build_quadrature(&crate::geometry::GeometrySpec::sphere(1.0, 6)).unwrap();
        let chart = q.local_chart(0).unwrap();
        let r = 0.7;
        let pts = windowed_polar(chart.as_ref(), &q.points[0], r, 24, 24).unwrap();
        let got: f64 = pts.iter().map(|p| p.wt).sum();
        // on the unit sphere dS = 2 pi s ds in chord length s
        let (x, w) = gauss_legendre(64);
        let exact: f64 = x.iter().zip(&w).map(|(x, w)| w * r * 2.0 * PI * (x * r) * window(*x)).sum();
        assert!((got - exact).abs() < 1e-10, "{got} {exact}");
    }

    #[test]
    fn triangle_polar_recovers_area() {
        let tri = [Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.2, 0.9, 0.0)];
        let c = (tri[0] + tri[1] + tri[2]) / 3.0;
        let pts = triangle_polar(&tri, &c, &Vector3::z(), 64, 8);
        let area: f64 = pts.iter().map(|p| p.wt).sum();
        assert!((area - 0.45).abs() < 1e-3, "{area}");
    }
}
