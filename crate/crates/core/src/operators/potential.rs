//! Layer potentials off the surface and their nontangential boundary traces.

use log::warn;
use nalgebra::{Vector3, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assemble::Discretization;
use super::kernel::{BlockKernel, CauchyKernel};
use super::nearfield::{graded_polar, moment_residual, spread};
use super::DensityVector;
use crate::error::{Result, ShellError};
use crate::geometry::{Side, SurfaceQuadrature};
use crate::kernels::{DiracKernel, SpectralParam};

pub type Spinor = Vector4<Complex64>;

fn check_density(q: &SurfaceQuadrature, g: &DensityVector) -> Result<()> {
    if g.dim != 4 {
        return Err(ShellError::Dimension { expected: 4, got: g.dim });
    }
    if g.nodes() != q.len() {
        return Err(ShellError::Dimension {
            expected: q.len(),
            got: g.nodes(),
        });
    }
    Ok(())
}

fn plain_sum(q: &SurfaceQuadrature, kernel: &DiracKernel, g: &DensityVector, x: &Vector3<f64>) -> Spinor {
    plain_sums(q, kernel, std::slice::from_ref(g), x)[0]
}

fn plain_sums(q: &SurfaceQuadrature, kernel: &DiracKernel, gs: &[DensityVector], x: &Vector3<f64>) -> Vec<Spinor> {
    let mut acc = vec![Spinor::zeros(); gs.len()];
    for j in 0..q.len() {
        let m = kernel.eval(&(x - q.points[j])) * Complex64::from(q.weights[j]);
        for (a, g) in acc.iter_mut().zip(gs) {
            *a += m * Spinor::from_column_slice(g.node(j));
        }
    }
    acc
}

/// `Phi^z[g](x) = sum_j phi^z(x - x_j) w_j g_j` at points off the surface.
///
/// Points closer than `0.1 h` to a node are evaluated anyway with a warning;
/// accuracy there is degraded.
pub fn evaluate_layer_potential(q: &SurfaceQuadrature, g: &DensityVector, p: &SpectralParam, pts: &[Vector3<f64>]) -> Result<Vec<Spinor>> {
    check_density(q, g)?;
    let kernel = DiracKernel::new(p);
    let mut close = 0usize;
    for x in pts {
        let d = q.points.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min);
        if d == 0.0 {
            return Err(ShellError::CoincidentPoints);
        }
        if d < 0.1 * q.h {
            close += 1;
        }
    }
    if close > 0 {
        warn!("{close} evaluation points lie within 0.1 h of the surface; layer potential accuracy is degraded");
    }
    Ok(pts.par_iter().map(|x| plain_sum(q, &kernel, g, x)).collect())
}

/// Corrected evaluation of `Phi^z[g]` at `x_i + s t N_i` for small `t`.
pub struct NearEvaluator<'a> {
    disc: &'a Discretization,
    kernel: CauchyKernel,
    angles: usize,
    radial: usize,
}

impl<'a> NearEvaluator<'a> {
    pub fn new(disc: &'a Discretization, p: &SpectralParam) -> Self {
        let o = &disc.near.options;
        Self {
            disc,
            kernel: CauchyKernel(DiracKernel::new(p)),
            angles: o.angles,
            radial: 8,
        }
    }

    pub fn eval(&self, g: &DensityVector, i: usize, t: f64, side: Side) -> Result<Spinor> {
        Ok(self.eval_many(std::slice::from_ref(g), i, t, side)?[0])
    }

    /// Same as [`Self::eval`] for several densities, sharing the kernel work.
    pub fn eval_many(&self, gs: &[DensityVector], i: usize, t: f64, side: Side) -> Result<Vec<Spinor>> {
        let q = &self.disc.quadrature;
        for g in gs {
            check_density(q, g)?;
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(ShellError::NonPositiveOffset(t));
        }
        let x = q.points[i] + q.normals[i] * (side.normal_sign() * t);
        let mut values = plain_sums(q, &self.kernel.0, gs, &x);
        if !self.disc.near.charted {
            return Ok(values);
        }
        let node = &self.disc.near.nodes[i];
        let polar = graded_polar(q, i, self.disc.near.radius, t, self.angles, self.radial)
            .ok_or_else(|| ShellError::Geometry(format!("near-evaluation window leaves the chart at node {i}")))?;
        let residual = moment_residual(q, &self.kernel, node, &x, &q.normals[i], &polar, true);
        for (j, block) in spread(node, &residual, self.kernel.dim()) {
            for (value, g) in values.iter_mut().zip(gs) {
                let gj = g.node(j);
                for r in 0..4 {
                    value[r] += (0..4).map(|c| block[4 * r + c] * gj[c]).sum::<Complex64>();
                }
            }
        }
        Ok(values)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceOptions {
    /// Offsets in units of `h`, decreasing.
    pub levels: Vec<f64>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            levels: vec![2.0, 1.0, 0.5, 0.25],
        }
    }
}

/// Polynomial extrapolation to `t = 0` through the samples `(t_k, v_k)` (Neville).
pub fn extrapolate_to_zero(ts: &[f64], vs: &[Spinor]) -> Spinor {
    let mut p: Vec<Spinor> = vs.to_vec();
    let n = ts.len();
    for level in 1..n {
        for k in 0..n - level {
            let (ta, tb) = (ts[k], ts[k + level]);
            p[k] = (p[k + 1] * Complex64::from(ta) - p[k] * Complex64::from(tb)) / Complex64::from(ta - tb);
        }
    }
    p[0]
}

/// Limit of `Phi^z[g]` along `x_i -+ t N_i`, extrapolated from the configured levels.
pub fn nontangential_trace(disc: &Discretization, g: &DensityVector, p: &SpectralParam, side: Side, options: &TraceOptions) -> Result<DensityVector> {
    Ok(nontangential_traces(disc, std::slice::from_ref(g), p, side, options)?.remove(0))
}

/// [`nontangential_trace`] for several densities at once.
pub fn nontangential_traces(
    disc: &Discretization,
    gs: &[DensityVector],
    p: &SpectralParam,
    side: Side,
    options: &TraceOptions,
) -> Result<Vec<DensityVector>> {
    if options.levels.len() < 2 {
        return Err(ShellError::InvalidArgument("nontangential trace needs at least two offset levels".into()));
    }
    if options.levels.windows(2).any(|w| w[1] >= w[0]) || options.levels.iter().any(|&t| t <= 0.0) {
        return Err(ShellError::InvalidArgument("offset levels must be positive and decreasing".into()));
    }
    let q = &disc.quadrature;
    for g in gs {
        check_density(q, g)?;
    }
    if !q.has_charts() {
        warn!("mesh geometry: nontangential traces use uncorrected sums");
    }
    let ev = NearEvaluator::new(disc, p);
    let ts: Vec<f64> = options.levels.iter().map(|l| l * q.h).collect();
    let per_node: Vec<Result<Vec<Spinor>>> = (0..q.len())
        .into_par_iter()
        .map(|i| {
            let levels = ts.iter().map(|&t| ev.eval_many(gs, i, t, side)).collect::<Result<Vec<_>>>()?;
            Ok((0..gs.len())
                .map(|k| {
                    let vs: Vec<Spinor> = levels.iter().map(|l| l[k]).collect();
                    extrapolate_to_zero(&ts, &vs)
                })
                .collect())
        })
        .collect();
    let mut out: Vec<DensityVector> = gs
        .iter()
        .map(|_| DensityVector {
            values: Vec::with_capacity(4 * q.len()),
            dim: 4,
        })
        .collect();
    for v in per_node {
        for (o, s) in out.iter_mut().zip(v?) {
            o.values.extend(s.iter().copied());
        }
    }
    Ok(out)
}
