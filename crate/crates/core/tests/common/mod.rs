//! Shared fixtures and the analytic sphere oracle.

#![allow(dead_code)]

use shellspec_core::geometry::{GeometrySpec, Shape};
use shellspec_core::operators::{Discretization, NearFieldOptions};

pub fn sphere(n: usize) -> Discretization {
    Discretization::new(&GeometrySpec::sphere(1.0, n), &NearFieldOptions::default()).expect("sphere discretization")
}

pub fn rounded_cube(n: usize, rounding: f64) -> Discretization {
    let spec = GeometrySpec::with_nodes_per_edge(Shape::RoundedCube { edge: 2.0, rounding }, n);
    Discretization::new(&spec, &NearFieldOptions::default()).expect("cube discretization")
}

/// Modified spherical Bessel function of the first kind by its power series (fine for x <= 2).
pub fn sph_i(l: usize, x: f64) -> f64 {
    let mut lead = 1.0;
    for k in 0..l {
        lead *= x / (2 * k + 3) as f64;
    }
    let y = 0.5 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= y / (k as f64 * (2 * l + 2 * k + 1) as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    lead * sum
}

/// Modified spherical Bessel function of the second kind, `k_0 = pi e^{-x} / (2x)`, upward recurrence.
pub fn sph_k(l: usize, x: f64) -> f64 {
    let k0 = std::f64::consts::FRAC_PI_2 * (-x).exp() / x;
    if l == 0 {
        return k0;
    }
    let mut prev = k0;
    let mut cur = k0 * (1.0 + 1.0 / x);
    for j in 1..l {
        let next = prev + (2 * j + 1) as f64 / x * cur;
        prev = cur;
        cur = next;
    }
    cur
}

fn sph_i_prime(l: usize, x: f64) -> f64 {
    sph_i(l + 1, x) + l as f64 / x * sph_i(l, x)
}

fn sph_k_prime(l: usize, x: f64) -> f64 {
    -sph_k(l + 1, x) + l as f64 / x * sph_k(l, x)
}

/// Transmission determinant for the unit sphere in the spin-orbit sector `k != 0`,
/// scalar/Lorentz shell, mass `m`, energy `a` in the gap.
pub fn sector_determinant(a: f64, scalar: f64, lorentz: f64, k: i32, m: f64) -> f64 {
    let q = (m * m - a * a).sqrt();
    let l = if k < 0 { (-k - 1) as usize } else { k as usize };
    let radial = |f: f64, df: f64| {
        let u = f;
        let v = -(q * df + (1.0 + k as f64) * u) / (a + m);
        (u, v)
    };
    let (ui, vi) = radial(sph_i(l, q), sph_i_prime(l, q));
    let (uo, vo) = radial(sph_k(l, q), sph_k_prime(l, q));
    let p = scalar + lorentz;
    let s = scalar - lorentz;
    let m00 = -vi + p * ui / 2.0;
    let m01 = vo + p * uo / 2.0;
    let m10 = -ui - s * vi / 2.0;
    let m11 = uo - s * vo / 2.0;
    m00 * m11 - m01 * m10
}

/// Gap eigenvalues of the unit-sphere shell from sectors `|k| <= max_k`, sorted.
pub fn sphere_eigenvalues(scalar: f64, lorentz: f64, max_k: i32, m: f64) -> Vec<f64> {
    let grid = 20_000;
    let edge = 0.99999 * m;
    let mut out = Vec::new();
    for k in (-max_k..=max_k).filter(|k| *k != 0) {
        let f = |a: f64| sector_determinant(a, scalar, lorentz, k, m);
        let mut a0 = -edge;
        let mut f0 = f(a0);
        for j in 1..=grid {
            let a1 = -edge + 2.0 * edge * j as f64 / grid as f64;
            let f1 = f(a1);
            if f0 == 0.0 {
                out.push(a0);
            } else if f0.signum() != f1.signum() {
                let (mut lo, mut hi, mut flo) = (a0, a1, f0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let fm = f(mid);
                    if fm.signum() == flo.signum() {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-15 {
                        break;
                    }
                }
                out.push(0.5 * (lo + hi));
            }
            a0 = a1;
            f0 = f1;
        }
    }
    out.sort_by(f64::total_cmp);
    out
}
