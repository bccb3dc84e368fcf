//! Pointwise kernels of the free Dirac resolvent and the harmonic layer operators.

use std::f64::consts::PI;

use nalgebra::{Vector3, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShellError};
use crate::gamma::{dirac, PauliMatrix, SpinorMatrix};

const I: Complex64 = Complex64::new(0.0, 1.0);
const FOUR_PI: f64 = 4.0 * PI;

/// Spectral parameter `z` off the cut `(-inf,-m] u [m,inf)` together with the mass `m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralParam {
    z: Complex64,
    mass: f64,
}

impl SpectralParam {
    pub fn new(z: Complex64, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(ShellError::InvalidMass(mass));
        }
        if !(z.re.is_finite() && z.im.is_finite()) || (z.im == 0.0 && z.re.abs() >= mass) {
            return Err(ShellError::BranchCut { z, mass });
        }
        Ok(Self { z, mass })
    }

    /// A real energy inside the gap.
    pub fn gap(energy: f64, mass: f64) -> Result<Self> {
        Self::new(Complex64::from(energy), mass)
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn is_gap(&self) -> bool {
        self.z.im == 0.0
    }

    pub fn conj(&self) -> Self {
        Self {
            z: self.z.conj(),
            mass: self.mass,
        }
    }
}

/// The root `w` of `w^2 = z^2 - m^2` with positive imaginary part.
pub fn sqrt_branch(p: &SpectralParam) -> Complex64 {
    if p.is_gap() {
        let a = p.z.re;
        return Complex64::new(0.0, ((p.mass - a) * (p.mass + a)).sqrt());
    }
    let w = (p.z * p.z - p.mass * p.mass).sqrt();
    if w.im < 0.0 {
        -w
    } else {
        w
    }
}

/// Precomputed evaluator for the Dirac fundamental solution and its scalar part.
#[derive(Clone, Copy, Debug)]
pub struct DiracKernel {
    z: Complex64,
    mass: f64,
    w: Complex64,
}

impl DiracKernel {
    pub fn new(p: &SpectralParam) -> Self {
        Self {
            z: p.z,
            mass: p.mass,
            w: sqrt_branch(p),
        }
    }

    pub fn wavenumber(&self) -> Complex64 {
        self.w
    }

    /// `e^{iw r} / (4 pi r)`.
    #[inline]
    pub fn scalar(&self, r: f64) -> Complex64 {
        (I * self.w * r).exp() / (FOUR_PI * r)
    }

    /// Fundamental solution at a nonzero separation `x`.
    #[inline]
    pub fn eval(&self, x: &Vector3<f64>) -> SpinorMatrix {
        let r2 = x.norm_squared();
        let r = r2.sqrt();
        let f = self.scalar(r);
        let g = f * (Complex64::from(1.0) - I * self.w * r) * I / r2;
        let diag_top = f * (self.z + self.mass);
        let diag_bot = f * (self.z - self.mass);
        let s00 = g * x.z;
        let s01 = g * Complex64::new(x.x, -x.y);
        let s10 = g * Complex64::new(x.x, x.y);
        let s11 = -s00;
        let o = Complex64::new(0.0, 0.0);
        SpinorMatrix::new(
            diag_top, o, s00, s01, //
            o, diag_top, s10, s11, //
            s00, s01, diag_bot, o, //
            s10, s11, o, diag_bot,
        )
    }
}

fn nonzero(x: &Vector3<f64>) -> Result<f64> {
    let r = x.norm();
    if r == 0.0 || !r.is_finite() {
        Err(ShellError::CoincidentPoints)
    } else {
        Ok(r)
    }
}

/// `e^{i w |x|}/(4 pi |x|) (z + m beta + (1 - i w |x|) i alpha.x/|x|^2)`.
pub fn fundamental_solution(x: &Vector3<f64>, p: &SpectralParam) -> Result<SpinorMatrix> {
    nonzero(x)?;
    Ok(DiracKernel::new(p).eval(x))
}

/// The scalar single-layer kernel `e^{i w |x|}/(4 pi |x|)`.
pub fn single_layer_kernel(x: &Vector3<f64>, p: &SpectralParam) -> Result<Complex64> {
    let r = nonzero(x)?;
    Ok(DiracKernel::new(p).scalar(r))
}

/// The strongly singular part `i alpha.x / (4 pi |x|^3)` of the fundamental solution.
pub fn principal_part(x: &Vector3<f64>) -> Result<SpinorMatrix> {
    let r = nonzero(x)?;
    Ok(crate::gamma::alpha_dot(x) * (I / (FOUR_PI * r * r * r)))
}

/// `i sigma.x / |x|^3`, without the `1/(4 pi)` carried by the operator W.
pub fn massless_kernel(x: &Vector3<f64>) -> Result<PauliMatrix> {
    let r = nonzero(x)?;
    Ok(crate::gamma::sigma_dot(x) * (I / (r * r * r)))
}

/// `N(y).(x - y) / (4 pi |x - y|^3)`.
pub fn double_layer_kernel(x: &Vector3<f64>, y: &Vector3<f64>, ny: &Vector3<f64>) -> Result<f64> {
    let d = x - y;
    let r = nonzero(&d)?;
    Ok(ny.dot(&d) / (FOUR_PI * r * r * r))
}

/// `(x_k - y_k) / (4 pi |x - y|^3)`.
pub fn riesz_kernel(x: &Vector3<f64>, y: &Vector3<f64>, k: usize) -> Result<f64> {
    if k > 2 {
        return Err(ShellError::InvalidArgument(format!("riesz index {k} out of range")));
    }
    let d = x - y;
    let r = nonzero(&d)?;
    Ok(d[k] / (FOUR_PI * r * r * r))
}

/// `(H - z) u` at `x` by fourth-order central differences with step `step`,
/// where `H = -i alpha.grad + m beta`. Returns the residual and a magnitude
/// scale `max(|alpha.grad u|, |m u|, |z u|)` for relative comparisons.
pub fn dirac_fd_residual(
    u: impl Fn(&Vector3<f64>) -> Vector4<Complex64>,
    x: &Vector3<f64>,
    z: Complex64,
    mass: f64,
    step: f64,
) -> (Vector4<Complex64>, f64) {
    let g = dirac();
    let centre = u(x);
    let mut grad_term = Vector4::zeros();
    for k in 0..3 {
        let mut e = Vector3::zeros();
        e[k] = step;
        let d = (u(&(x - 2.0 * e)) - u(&(x + 2.0 * e)) + (u(&(x + e)) - u(&(x - e))) * Complex64::from(8.0)) / Complex64::from(12.0 * step);
        grad_term += g.alpha[k] * d;
    }
    let grad_term = grad_term * (-I);
    let mass_term = g.beta * centre * Complex64::from(mass);
    let shift = centre * z;
    let scale = grad_term.norm().max(mass_term.norm()).max(shift.norm());
    (grad_term + mass_term - shift, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::max_diff;

    #[test]
    fn branch_in_gap_is_positive_imaginary() {
        let w = sqrt_branch(&SpectralParam::gap(0.5, 1.0).unwrap());
        assert!(w.re == 0.0 && (w.im - 0.75f64.sqrt()).abs() < 1e-15);
        assert_eq!(sqrt_branch(&SpectralParam::gap(0.0, 1.0).unwrap()), I);
    }

    #[test]
    fn branch_off_axis_squares_back() {
        let p = SpectralParam::new(Complex64::new(0.3, 0.4), 1.0).unwrap();
        let w = sqrt_branch(&p);
        assert!(w.im > 0.0);
        assert!((w * w - (p.z() * p.z() - 1.0)).norm() < 1e-14);
    }

    #[test]
    fn cut_is_rejected() {
        assert!(SpectralParam::gap(1.0, 1.0).is_err());
        assert!(SpectralParam::gap(-2.0, 1.0).is_err());
        assert!(SpectralParam::gap(0.0, 0.0).is_err());
    }

    #[test]
    fn scalar_kernel_at_unit_distance() {
        let p = SpectralParam::gap(0.0, 1.0).unwrap();
        let v = single_layer_kernel(&Vector3::x(), &p).unwrap();
        assert!((v.re - (-1.0f64).exp() / FOUR_PI).abs() < 1e-15 && v.im.abs() < 1e-16);
        // the rounded reference 0.0292763 is only good to about 1.4e-6
        assert!((v.re - 0.0292763).abs() < 2e-6);
        assert!((v.re - 0.029_274_915_762_159_58).abs() < 1e-16);
    }

    #[test]
    fn coincident_points_rejected() {
        let p = SpectralParam::gap(0.0, 1.0).unwrap();
        assert!(fundamental_solution(&Vector3::zeros(), &p).is_err());
        assert!(massless_kernel(&Vector3::zeros()).is_err());
    }

    #[test]
    fn fast_path_matches_matrix_formula() {
        let p = SpectralParam::new(Complex64::new(0.2, 0.3), 1.3).unwrap();
        let x = Vector3::new(0.3, -0.7, 0.4);
        let r = x.norm();
        let w = sqrt_branch(&p);
        let g = dirac();
        let expect = (SpinorMatrix::identity() * p.z()
            + g.beta * Complex64::from(p.mass())
            + crate::gamma::alpha_dot(&x) * ((Complex64::from(1.0) - I * w * r) * I / (r * r)))
            * ((I * w * r).exp() / (FOUR_PI * r));
        assert!(max_diff(&fundamental_solution(&x, &p).unwrap(), &expect) < 1e-15);
    }

    #[test]
    fn fd_residual_vanishes_for_columns() {
        let p = SpectralParam::gap(0.4, 1.0).unwrap();
        let x = Vector3::new(0.5, 0.2, -0.3);
        for col in 0..4 {
            let u = |y: &Vector3<f64>| fundamental_solution(y, &p).unwrap().column(col).into_owned();
            let (res, scale) = dirac_fd_residual(u, &x, p.z(), 1.0, 1e-3);
            assert!(res.norm() / scale < 1e-8, "column {col}: {}", res.norm() / scale);
        }
    }
}
