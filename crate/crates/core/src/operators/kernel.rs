//! Matrix-valued surface kernels in the form consumed by the assembler.

use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::kernels::DiracKernel;

const FOUR_PI: f64 = 4.0 * PI;
const I: Complex64 = Complex64::new(0.0, 1.0);

/// A `d x d` kernel `k(x, y)` for target `(x, n_x)` and source `(y, n_y)`.
pub trait BlockKernel: Sync {
    fn dim(&self) -> usize;
    fn label(&self) -> String;
    /// Writes the row-major block into `out` (length `d * d`).
    fn eval(&self, x: &Vector3<f64>, nx: &Vector3<f64>, y: &Vector3<f64>, ny: &Vector3<f64>, out: &mut [Complex64]);
}

/// `phi^z(x - y)`, the Cauchy operator kernel.
pub struct CauchyKernel(pub DiracKernel);

impl BlockKernel for CauchyKernel {
    fn dim(&self) -> usize {
        4
    }

    fn label(&self) -> String {
        "cauchy".into()
    }

    #[inline]
    fn eval(&self, x: &Vector3<f64>, _: &Vector3<f64>, y: &Vector3<f64>, _: &Vector3<f64>, out: &mut [Complex64]) {
        let m = self.0.eval(&(x - y));
        for r in 0..4 {
            for c in 0..4 {
                out[4 * r + c] = m[(r, c)];
            }
        }
    }
}

/// `e^{i w |x - y|} / (4 pi |x - y|)`, scalar.
pub struct SingleLayerKernel(pub DiracKernel);

impl BlockKernel for SingleLayerKernel {
    fn dim(&self) -> usize {
        1
    }

    fn label(&self) -> String {
        "single_layer".into()
    }

    #[inline]
    fn eval(&self, x: &Vector3<f64>, _: &Vector3<f64>, y: &Vector3<f64>, _: &Vector3<f64>, out: &mut [Complex64]) {
        out[0] = self.0.scalar((x - y).norm());
    }
}

/// `i sigma.(x - y) / (4 pi |x - y|^3)`.
pub struct MasslessKernel;

impl BlockKernel for MasslessKernel {
    fn dim(&self) -> usize {
        2
    }

    fn label(&self) -> String {
        "massless".into()
    }

    #[inline]
    fn eval(&self, x: &Vector3<f64>, _: &Vector3<f64>, y: &Vector3<f64>, _: &Vector3<f64>, out: &mut [Complex64]) {
        let d = x - y;
        let r = d.norm();
        let f = 1.0 / (FOUR_PI * r * r * r);
        // i sigma.d = [[i d3, i d1 + d2], [i d1 - d2, -i d3]]
        out[0] = I * (d.z * f);
        out[1] = Complex64::new(d.y * f, d.x * f);
        out[2] = Complex64::new(-d.y * f, d.x * f);
        out[3] = -out[0];
    }
}

/// Harmonic double layer `N(y).(x - y) / (4 pi |x - y|^3)`.
pub struct DoubleLayerKernel;

impl BlockKernel for DoubleLayerKernel {
    fn dim(&self) -> usize {
        1
    }

    fn label(&self) -> String {
        "double_layer".into()
    }

    #[inline]
    fn eval(&self, x: &Vector3<f64>, _: &Vector3<f64>, y: &Vector3<f64>, ny: &Vector3<f64>, out: &mut [Complex64]) {
        let d = x - y;
        let r = d.norm();
        out[0] = Complex64::from(ny.dot(&d) / (FOUR_PI * r * r * r));
    }
}

/// Adjoint double layer `N(x).(y - x) / (4 pi |x - y|^3)`.
pub struct AdjointDoubleLayerKernel;

impl BlockKernel for AdjointDoubleLayerKernel {
    fn dim(&self) -> usize {
        1
    }

    fn label(&self) -> String {
        "adjoint_double_layer".into()
    }

    #[inline]
    fn eval(&self, x: &Vector3<f64>, nx: &Vector3<f64>, y: &Vector3<f64>, _: &Vector3<f64>, out: &mut [Complex64]) {
        let d = y - x;
        let r = d.norm();
        out[0] = Complex64::from(nx.dot(&d) / (FOUR_PI * r * r * r));
    }
}

/// Riesz kernel `(x_k - y_k) / (4 pi |x - y|^3)`.
pub struct RieszKernel(pub usize);

impl BlockKernel for RieszKernel {
    fn dim(&self) -> usize {
        1
    }

    fn label(&self) -> String {
        format!("riesz_{}", self.0 + 1)
    }

    #[inline]
    fn eval(&self, x: &Vector3<f64>, _: &Vector3<f64>, y: &Vector3<f64>, _: &Vector3<f64>, out: &mut [Complex64]) {
        let d = x - y;
        let r = d.norm();
        out[0] = Complex64::from(d[self.0] / (FOUR_PI * r * r * r));
    }
}
