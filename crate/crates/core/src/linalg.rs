//! Dense linear-algebra helpers on top of faer: Hermitian spectra, inertia,
//! factorised solves and Krylov norm estimates.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Col, ColRef, Mat, MatRef, Side};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, ShellError};

pub fn hermitian_eigenvalues(m: MatRef<'_, Complex64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| ShellError::Singular(format!("eigenvalue solver: {e:?}")))
}

/// Eigenvalues (ascending) and orthonormal eigenvectors as columns.
pub fn hermitian_eigen(m: MatRef<'_, Complex64>) -> Result<(Vec<f64>, Mat<Complex64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| ShellError::Singular(format!("eigen solver: {e:?}")))?;
    let vals = evd.S().column_vector().iter().map(|v| v.re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Symmetric-indefinite factorisation of a Hermitian matrix, giving inertia and determinant.
pub struct HermitianFactor {
    lblt: faer::linalg::solvers::Lblt<Complex64>,
}

impl HermitianFactor {
    pub fn new(m: MatRef<'_, Complex64>) -> Self {
        Self { lblt: m.lblt(Side::Lower) }
    }

    fn blocks(&self) -> Vec<[f64; 2]> {
        // eigenvalues of each 1x1 or 2x2 pivot block of B
        let d = self.lblt.B_diag().column_vector();
        let s = self.lblt.B_subdiag().column_vector();
        let n = d.nrows();
        let mut out = Vec::with_capacity(n);
        let mut k = 0;
        while k < n {
            if k + 1 < n && s[k] != Complex64::new(0.0, 0.0) {
                let (a, c, b) = (d[k].re, d[k + 1].re, s[k].norm());
                let mean = 0.5 * (a + c);
                let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                out.push([mean - rad, mean + rad]);
                k += 2;
            } else {
                out.push([d[k].re, f64::NAN]);
                k += 1;
            }
        }
        out
    }

    /// Numbers of negative and positive eigenvalues (Sylvester inertia).
    pub fn inertia(&self) -> (usize, usize) {
        let mut neg = 0;
        let mut pos = 0;
        for b in self.blocks() {
            for v in b.into_iter().filter(|v| !v.is_nan()) {
                if v < 0.0 {
                    neg += 1;
                } else {
                    pos += 1;
                }
            }
        }
        (neg, pos)
    }

    /// `(sign, log|det|)`.
    pub fn log_det(&self) -> (f64, f64) {
        let mut sign = 1.0;
        let mut log = 0.0;
        for b in self.blocks() {
            for v in b.into_iter().filter(|v| !v.is_nan()) {
                sign *= v.signum();
                log += v.abs().ln();
            }
        }
        (sign, log)
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let mut x = Col::from_fn(rhs.len(), |i| rhs[i]);
        self.lblt.solve_in_place(x.as_mat_mut());
        x.iter().copied().collect()
    }
}

/// LU factorisation with iterative refinement.
pub struct LuSolver {
    matrix: Mat<Complex64>,
    lu: faer::linalg::solvers::PartialPivLu<Complex64>,
}

impl LuSolver {
    pub fn new(m: MatRef<'_, Complex64>) -> Self {
        Self {
            matrix: m.to_owned(),
            lu: m.partial_piv_lu(),
        }
    }

    fn raw(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let mut x = Col::from_fn(rhs.len(), |i| rhs[i]);
        self.lu.solve_in_place(x.as_mat_mut());
        x.iter().copied().collect()
    }

    /// Solution and final relative residual after up to `steps` refinement sweeps.
    pub fn solve(&self, rhs: &[Complex64], steps: usize) -> (Vec<Complex64>, f64) {
        let mut x = self.raw(rhs);
        let bnorm = rhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let mut res = self.residual(&x, rhs);
        for _ in 0..steps {
            let rn = res.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if rn <= 1e-15 * bnorm {
                break;
            }
            let dx = self.raw(&res);
            for (a, b) in x.iter_mut().zip(&dx) {
                *a += b;
            }
            res = self.residual(&x, rhs);
        }
        let rn = res.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        (x, rn / bnorm)
    }

    fn residual(&self, x: &[Complex64], rhs: &[Complex64]) -> Vec<Complex64> {
        let ax: Col<Complex64> = &self.matrix * ColRef::from_slice(x);
        rhs.iter().zip(ax.iter()).map(|(b, a)| b - a).collect()
    }

    /// Estimate of the smallest singular value by inverse iteration on `A^* A`.
    pub fn smallest_singular_value(&self, iters: usize, seed: u64) -> f64 {
        let n = self.matrix.nrows();
        let mut v = random_unit(n, seed);
        let mut est = f64::INFINITY;
        let adj = self.matrix.adjoint().to_owned();
        let lu_adj = adj.partial_piv_lu();
        for _ in 0..iters {
            // w = A^{-1} A^{-*} v
            let mut y = Col::from_fn(n, |i| v[i]);
            lu_adj.solve_in_place(y.as_mat_mut());
            self.lu.solve_in_place(y.as_mat_mut());
            let norm = y.norm_l2();
            if norm == 0.0 {
                return f64::INFINITY;
            }
            est = (1.0 / norm).sqrt();
            v = y.iter().map(|x| x / norm).collect();
        }
        est
    }

    pub fn inverse(&self) -> Mat<Complex64> {
        self.lu.inverse()
    }
}

pub fn random_unit(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<Complex64> = (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im)
        })
        .collect();
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// Lanczos with full reorthogonalisation for a Hermitian operator given by its action.
/// Returns the Ritz values in ascending order.
pub fn lanczos_ritz(apply: impl Fn(&[Complex64]) -> Vec<Complex64>, n: usize, steps: usize, seed: u64) -> Vec<f64> {
    let steps = steps.min(n);
    let mut basis: Vec<Vec<Complex64>> = vec![random_unit(n, seed)];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for k in 0..steps {
        let mut w = apply(&basis[k]);
        let a: Complex64 = basis[k].iter().zip(&w).map(|(v, x)| v.conj() * x).sum();
        alpha.push(a.re);
        for _ in 0..2 {
            for v in &basis {
                let c: Complex64 = v.iter().zip(&w).map(|(v, x)| v.conj() * x).sum();
                for (x, vv) in w.iter_mut().zip(v) {
                    *x -= vv * c;
                }
            }
        }
        let b = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if k + 1 == steps || b < 1e-13 {
            break;
        }
        beta.push(b);
        basis.push(w.into_iter().map(|x| x / b).collect());
    }
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let mut ev: Vec<f64> = SymmetricEigen::new(t).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Largest singular value of `m` (Euclidean), by Lanczos on `m^* m`.
pub fn largest_singular_value(m: MatRef<'_, Complex64>, steps: usize, seed: u64) -> f64 {
    let n = m.ncols();
    let apply = |v: &[Complex64]| -> Vec<Complex64> {
        let y: Col<Complex64> = m * ColRef::from_slice(v);
        let z: Col<Complex64> = m.adjoint() * &y;
        z.iter().copied().collect()
    };
    lanczos_ritz(apply, n, steps, seed).last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// All singular values, descending.
pub fn singular_values(m: MatRef<'_, Complex64>) -> Result<Vec<f64>> {
    m.singular_values().map_err(|e| ShellError::Singular(format!("svd: {e:?}")))
}

/// Matrices up to this size get a full SVD in [`top_singular_values`].
pub const DENSE_SVD_LIMIT: usize = 2400;

/// The `k` largest singular values, descending. Full SVD for small matrices,
/// otherwise randomized subspace iteration with `power` passes and oversampling 24.
pub fn top_singular_values(m: MatRef<'_, Complex64>, k: usize, power: usize, seed: u64) -> Result<Vec<f64>> {
    let n = m.ncols();
    if n <= DENSE_SVD_LIMIT || k + 24 >= n {
        let mut sv = singular_values(m)?;
        sv.truncate(k);
        return Ok(sv);
    }
    randomized_singular_values(m, k, power, seed)
}

pub fn randomized_singular_values(m: MatRef<'_, Complex64>, k: usize, power: usize, seed: u64) -> Result<Vec<f64>> {
    let n = m.ncols();
    let l = (k + 24).min(n);
    let omega = random_unit(n * l, seed);
    let omega = Mat::from_fn(n, l, |i, j| omega[j * n + i]);
    let mut q = (m * &omega).qr().compute_thin_Q();
    for _ in 0..power {
        let z = (m.adjoint() * &q).qr().compute_thin_Q();
        q = (m * &z).qr().compute_thin_Q();
    }
    let b = q.adjoint() * m;
    let mut sv = singular_values(b.as_ref())?;
    sv.truncate(k);
    Ok(sv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hermitian(n: usize, seed: u64) -> Mat<Complex64> {
        let v = random_unit(n * n, seed);
        let a = Mat::from_fn(n, n, |i, j| v[i * n + j]);
        Mat::from_fn(n, n, |i, j| a[(i, j)] + a[(j, i)].conj())
    }

    #[test]
    fn inertia_matches_eigenvalues() {
        let m = hermitian(40, 3);
        let ev = hermitian_eigenvalues(m.as_ref()).unwrap();
        let neg = ev.iter().filter(|v| **v < 0.0).count();
        let f = HermitianFactor::new(m.as_ref());
        assert_eq!(f.inertia(), (neg, 40 - neg));
        let (sign, log) = f.log_det();
        let expect: f64 = ev.iter().map(|v| v.abs().ln()).sum();
        assert!((log - expect).abs() < 1e-9);
        assert_eq!(sign, if neg % 2 == 0 { 1.0 } else { -1.0 });
    }

    #[test]
    fn lanczos_finds_extremes() {
        let m = hermitian(60, 5);
        let ev = hermitian_eigenvalues(m.as_ref()).unwrap();
        let apply = |v: &[Complex64]| -> Vec<Complex64> {
            let y: Col<Complex64> = &m * ColRef::from_slice(v);
            y.iter().copied().collect()
        };
        let ritz = lanczos_ritz(apply, 60, 60, 1);
        assert!((ritz[0] - ev[0]).abs() < 1e-9);
        assert!((ritz.last().unwrap() - ev.last().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn randomized_top_values_match_full_svd() {
        let n = 300;
        let u = random_unit(n * 3, 4);
        let m = Mat::from_fn(n, n, |i, j| {
            let d = if i == j {
                Complex64::from(1.0 / (1.0 + i as f64).powf(1.5))
            } else {
                Complex64::new(0.0, 0.0)
            };
            d + u[(i * 7 + j * 3) % u.len()] * 1e-6
        });
        let top = randomized_singular_values(m.as_ref(), 20, 4, 1).unwrap();
        let full = singular_values(m.as_ref()).unwrap();
        for (a, b) in top.iter().zip(&full) {
            assert!((a / b - 1.0).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn refined_lu_solves() {
        let m = hermitian(30, 9);
        let lu = LuSolver::new(m.as_ref());
        let b = random_unit(30, 2);
        let (_, res) = lu.solve(&b, 2);
        assert!(res < 1e-13);
        let sv = singular_values(m.as_ref()).unwrap();
        assert!((lu.smallest_singular_value(30, 1) / sv.last().unwrap() - 1.0).abs() < 1e-3);
    }
}
