//! Resolvent of the shell-coupled operator applied to point sources via the
//! boundary correction `-Phi^z (B^z_+)^{-1} t (H - z)^{-1}`.

use log::warn;
use nalgebra::{Vector3, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShellError};
use crate::gamma::{Coupling, SpinorMatrix};
use crate::kernels::{dirac_fd_residual, DiracKernel, SpectralParam};
use crate::linalg::{largest_singular_value, LuSolver};
use crate::operators::{evaluate_layer_potential, BoundaryOperator, DensityVector, Discretization, MinusForm, Spinor};

/// A point source `delta_{y0} xi` off the surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSource {
    pub location: Vector3<f64>,
    pub spinor: Vector4<Complex64>,
}

impl PointSource {
    pub fn new(location: Vector3<f64>, spinor: Vector4<Complex64>) -> Self {
        Self { location, spinor }
    }

    /// Source with the `k`-th unit spinor.
    pub fn basis(location: Vector3<f64>, k: usize) -> Self {
        let mut s = Vector4::zeros();
        s[k] = Complex64::new(1.0, 0.0);
        Self { location, spinor: s }
    }

    /// Distance to the nearest quadrature node; errors if the source sits on a node.
    pub fn clearance(&self, disc: &Discretization) -> Result<f64> {
        let d = disc
            .quadrature
            .points
            .iter()
            .map(|x| (x - self.location).norm())
            .fold(f64::INFINITY, f64::min);
        if d == 0.0 {
            return Err(ShellError::CoincidentPoints);
        }
        if d < 5.0 * disc.h() {
            warn!("point source is {d:.3e} from the surface, closer than 5h = {:.3e}", 5.0 * disc.h());
        }
        Ok(d)
    }

    /// `phi^z(x - y0) xi`.
    pub fn free_field(&self, p: &SpectralParam, x: &Vector3<f64>) -> Spinor {
        DiracKernel::new(p).eval(&(x - self.location)) * self.spinor
    }
}

/// `(phi^z(x_i - y0) xi)_i`, the trace of the free resolvent applied to the source.
pub fn free_resolvent_trace(src: &PointSource, disc: &Discretization, p: &SpectralParam) -> Result<DensityVector> {
    src.clearance(disc)?;
    let k = DiracKernel::new(p);
    let mut values = Vec::with_capacity(4 * disc.nodes());
    for x in &disc.quadrature.points {
        values.extend((k.eval(&(x - src.location)) * src.spinor).iter().copied());
    }
    Ok(DensityVector { values, dim: 4 })
}

/// The same trace assembled from the other argument order, `phi^{conj z}(y0 - x_i)^* xi`.
pub fn free_resolvent_trace_adjoint(src: &PointSource, disc: &Discretization, p: &SpectralParam) -> Result<DensityVector> {
    src.clearance(disc)?;
    let k = DiracKernel::new(&p.conj());
    let mut values = Vec::with_capacity(4 * disc.nodes());
    for x in &disc.quadrature.points {
        let m: SpinorMatrix = k.eval(&(src.location - x)).adjoint();
        values.extend((m * src.spinor).iter().copied());
    }
    Ok(DensityVector { values, dim: 4 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KreinOptions {
    /// Refuse when `sigma_min(B) <= guard * ||B||`.
    pub guard: f64,
    pub refinement_steps: usize,
}

impl Default for KreinOptions {
    fn default() -> Self {
        Self {
            guard: 1e-3,
            refinement_steps: 3,
        }
    }
}

/// A factorised `B^z_+` with its conditioning.
pub struct KreinSolver<'a> {
    pub disc: &'a Discretization,
    pub coupling: Coupling,
    pub param: SpectralParam,
    pub coupled: BoundaryOperator,
    lu: LuSolver,
    /// `sigma_min / sigma_max` of `B` in the weighted metric.
    pub inverse_condition: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KreinOutput {
    pub points: Vec<Vector3<f64>>,
    pub values: Vec<Spinor>,
    /// The free part `phi^z(x - y0) xi` alone.
    pub free: Vec<Spinor>,
    /// `g = -(B^z_+)^{-1} t (H - z)^{-1}` at the nodes.
    pub density: DensityVector,
    pub solve_residual: f64,
    pub inverse_condition: f64,
}

impl KreinOutput {
    /// `max_x |value - free|`, the size of the boundary correction.
    pub fn correction_norm(&self) -> f64 {
        self.values.iter().zip(&self.free).map(|(v, f)| (v - f).norm()).fold(0.0, f64::max)
    }
}

impl<'a> KreinSolver<'a> {
    pub fn new(disc: &'a Discretization, coupling: Coupling, param: SpectralParam, options: &KreinOptions) -> Result<Self> {
        let coupled = disc.coupled_operators(&coupling, &param, MinusForm::Inverse)?.0;
        let sim = coupled.similarity_form();
        let lu = LuSolver::new(sim.as_ref());
        let top = largest_singular_value(sim.as_ref(), 40, 7);
        let bottom = lu.smallest_singular_value(30, 11);
        let inverse_condition = bottom / top;
        if !(inverse_condition > options.guard) {
            return Err(ShellError::Singular(format!(
                "B^z_+ at z = {} is numerically singular: sigma_min/sigma_max = {inverse_condition:.3e} (guard {:.1e}); z is at or near an eigenvalue",
                param.z(),
                options.guard
            )));
        }
        Ok(Self {
            disc,
            coupling,
            param,
            coupled,
            lu,
            inverse_condition,
        })
    }

    fn sqrt_weights(&self) -> Vec<f64> {
        self.disc.quadrature.weights.iter().map(|w| w.sqrt()).collect()
    }

    /// `(B^z_+)^{-1} f` and the relative residual of the refined solve.
    pub fn solve(&self, f: &DensityVector, steps: usize) -> Result<(DensityVector, f64)> {
        if f.dim != 4 || f.nodes() != self.disc.nodes() {
            return Err(ShellError::Dimension {
                expected: 4 * self.disc.nodes(),
                got: f.values.len(),
            });
        }
        let s = self.sqrt_weights();
        let rhs: Vec<Complex64> = f.values.iter().enumerate().map(|(k, v)| v * s[k / 4]).collect();
        let (x, res) = self.lu.solve(&rhs, steps);
        let values = x.iter().enumerate().map(|(k, v)| v / s[k / 4]).collect();
        Ok((DensityVector { values, dim: 4 }, res))
    }

    /// `(H_shell - z)^{-1} delta_{y0} xi` at the evaluation points.
    pub fn apply(&self, src: &PointSource, points: &[Vector3<f64>], options: &KreinOptions) -> Result<KreinOutput> {
        let trace = free_resolvent_trace(src, self.disc, &self.param)?;
        let (x, solve_residual) = self.solve(&trace, options.refinement_steps)?;
        let density = x.scaled(Complex64::from(-1.0));
        let correction = evaluate_layer_potential(&self.disc.quadrature, &density, &self.param, points)?;
        let free: Vec<Spinor> = points.iter().map(|p| src.free_field(&self.param, p)).collect();
        let values = free.iter().zip(&correction).map(|(f, c)| f + c).collect();
        Ok(KreinOutput {
            points: points.to_vec(),
            values,
            free,
            density,
            solve_residual,
            inverse_condition: self.inverse_condition,
        })
    }

    /// Relative defect of `t u = -B_+ [g]` where `B_+` is taken at `z = 0`,
    /// `g = -(B^z_+)^{-1} trace` and `t u = trace - (B^z_+ - B_+) (B^z_+)^{-1} trace`.
    pub fn boundary_condition_defect(&self, src: &PointSource, options: &KreinOptions) -> Result<f64> {
        let trace = free_resolvent_trace(src, self.disc, &self.param)?;
        let p0 = SpectralParam::gap(0.0, self.param.mass())?;
        let coupled_at_zero = self.disc.coupled_operators(&self.coupling, &p0, MinusForm::Inverse)?.0;
        let (x, _) = self.solve(&trace, options.refinement_steps)?;
        let g = x.scaled(Complex64::from(-1.0));
        let diff = self.coupled.combine(Complex64::from(1.0), &coupled_at_zero, Complex64::from(-1.0))?;
        let tu = trace.sub(&diff.apply(&x)?);
        let rhs = coupled_at_zero.apply(&g)?.scaled(Complex64::from(-1.0));
        let w = &self.disc.quadrature.weights;
        Ok(tu.sub(&rhs).norm(w) / trace.norm(w).max(f64::MIN_POSITIVE))
    }

    /// Kernel `G(x, y)` of `(H_shell - z)^{-1}` as a 4x4 matrix, columns from unit spinors at `y`.
    pub fn green(&self, x: &Vector3<f64>, y: &Vector3<f64>, options: &KreinOptions) -> Result<SpinorMatrix> {
        let mut g = SpinorMatrix::zeros();
        for k in 0..4 {
            let out = self.apply(&PointSource::basis(*y, k), std::slice::from_ref(x), options)?;
            g.set_column(k, &out.values[0]);
        }
        Ok(g)
    }
}

/// Relative finite-difference residual of `(H - z)` applied to the Krein output at `x`.
pub fn krein_pde_residual(solver: &KreinSolver, src: &PointSource, x: &Vector3<f64>, step: f64) -> Result<f64> {
    let q = &solver.disc.quadrature;
    let trace = free_resolvent_trace(src, solver.disc, &solver.param)?;
    let (sol, _) = solver.solve(&trace, 2)?;
    let density = sol.scaled(Complex64::from(-1.0));
    let p = solver.param;
    let field = |y: &Vector3<f64>| -> Spinor {
        let c = evaluate_layer_potential(q, &density, &p, std::slice::from_ref(y))
            .map(|v| v[0])
            .unwrap_or_else(|_| Spinor::zeros());
        src.free_field(&p, y) + c
    };
    let (res, scale) = dirac_fd_residual(field, x, p.z(), p.mass(), step);
    Ok(res.norm() / scale.max(f64::MIN_POSITIVE))
}
