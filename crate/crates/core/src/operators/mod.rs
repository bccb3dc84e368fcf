//! Dense Nystrom operators on surface densities.
//!
//! Matrices are stored in the plain `kernel * weight` form, node-major with
//! `d` spinor components per node. Adjoints and norms use the weighted inner
//! product `<f, g> = sum_i w_i f_i^* g_i`.

mod assemble;
mod field;
pub mod identities;
pub mod kernel;
pub mod nearfield;
mod potential;

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use faer::{Col, ColRef, Mat};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShellError};
use crate::geometry::SurfaceQuadrature;
use crate::kernels::SpectralParam;

pub use assemble::{assemble, Discretization, MinusForm};
pub use field::BlockDiagonal;
pub use nearfield::{NearField, NearFieldOptions};
pub use potential::{evaluate_layer_potential, extrapolate_to_zero, nontangential_trace, nontangential_traces, NearEvaluator, Spinor, TraceOptions};

/// A spinor (or scalar) value per node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityVector {
    pub values: Vec<Complex64>,
    pub dim: usize,
}

impl DensityVector {
    pub fn zeros(nodes: usize, dim: usize) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); nodes * dim],
            dim,
        }
    }

    pub fn new(values: Vec<Complex64>, dim: usize) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(ShellError::Dimension {
                expected: dim,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(ShellError::InvalidArgument("density has non-finite entries".into()));
        }
        Ok(Self { values, dim })
    }

    pub fn nodes(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn node(&self, i: usize) -> &[Complex64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn inner(&self, other: &Self, weights: &[f64]) -> Complex64 {
        weighted_inner(&self.values, &other.values, weights, self.dim)
    }

    pub fn norm(&self, weights: &[f64]) -> f64 {
        weighted_norm(&self.values, weights, self.dim)
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * s).collect(),
            dim: self.dim,
        }
    }

    pub fn axpy(&self, s: Complex64, other: &Self) -> Self {
        Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b * s).collect(),
            dim: self.dim,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    /// A seeded random polynomial of degree at most 3 in the node coordinates,
    /// with independent complex coefficients per component, normalised to unit
    /// weighted norm. Smooth densities are what the discrete identities resolve.
    pub fn smooth_random(q: &SurfaceQuadrature, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = q.centroid();
        let scale = q.points.iter().map(|x| (x - c).norm()).fold(0.0, f64::max);
        let mut exps = Vec::new();
        for a in 0..=3 {
            for b in 0..=(3 - a) {
                for e in 0..=(3 - a - b) {
                    exps.push([a, b, e]);
                }
            }
        }
        let coeffs: Vec<Complex64> = (0..exps.len() * dim)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im)
            })
            .collect();
        let mut values = Vec::with_capacity(q.len() * dim);
        for x in &q.points {
            let y = (x - c) / scale;
            let mono: Vec<f64> = exps.iter().map(|e| y.x.powi(e[0]) * y.y.powi(e[1]) * y.z.powi(e[2])).collect();
            for k in 0..dim {
                values.push(mono.iter().enumerate().map(|(m, v)| coeffs[m * dim + k] * v).sum());
            }
        }
        let g = Self { values, dim };
        let n = g.norm(&q.weights);
        g.scaled(Complex64::from(1.0 / n))
    }

    /// A seeded random vector with independent Gaussian entries per node.
    pub fn rough_random(nodes: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..nodes * dim)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im)
            })
            .collect();
        Self { values, dim }
    }
}

pub(crate) fn weighted_inner(a: &[Complex64], b: &[Complex64], w: &[f64], dim: usize) -> Complex64 {
    a.iter().zip(b).enumerate().map(|(k, (x, y))| x.conj() * y * w[k / dim]).sum()
}

pub(crate) fn weighted_norm(a: &[Complex64], w: &[f64], dim: usize) -> f64 {
    a.iter().enumerate().map(|(k, x)| x.norm_sqr() * w[k / dim]).sum::<f64>().sqrt()
}

/// A dense operator on densities with `dim` components per node.
#[derive(Clone, Debug)]
pub struct BoundaryOperator {
    pub matrix: Mat<Complex64>,
    pub dim: usize,
    pub label: String,
    pub param: Option<SpectralParam>,
    pub weights: Arc<Vec<f64>>,
}

impl BoundaryOperator {
    pub fn zeros(weights: Arc<Vec<f64>>, dim: usize, label: impl Into<String>) -> Self {
        let n = weights.len() * dim;
        Self {
            matrix: Mat::zeros(n, n),
            dim,
            label: label.into(),
            param: None,
            weights,
        }
    }

    pub fn identity(weights: Arc<Vec<f64>>, dim: usize) -> Self {
        let n = weights.len() * dim;
        Self {
            matrix: Mat::identity(n, n),
            dim,
            label: "identity".into(),
            param: None,
            weights,
        }
    }

    pub fn nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.size() {
            return Err(ShellError::Dimension {
                expected: self.size(),
                got: len,
            });
        }
        Ok(())
    }

    pub fn apply_slice(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(v.len())?;
        let out: Col<Complex64> = &self.matrix * ColRef::from_slice(v);
        Ok(out.iter().copied().collect())
    }

    pub fn apply(&self, g: &DensityVector) -> Result<DensityVector> {
        if g.dim != self.dim {
            return Err(ShellError::Dimension {
                expected: self.dim,
                got: g.dim,
            });
        }
        Ok(DensityVector {
            values: self.apply_slice(&g.values)?,
            dim: self.dim,
        })
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.size() != other.size() {
            return Err(ShellError::Dimension {
                expected: self.size(),
                got: other.size(),
            });
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        self.same_shape(other)?;
        let n = self.size();
        let matrix = Mat::from_fn(n, n, |i, j| self.matrix[(i, j)] * a + other.matrix[(i, j)] * b);
        Ok(Self {
            matrix,
            dim: self.dim,
            label: format!("combination({}, {})", self.label, other.label),
            param: self.param,
            weights: self.weights.clone(),
        })
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        let n = self.size();
        Self {
            matrix: Mat::from_fn(n, n, |i, j| self.matrix[(i, j)] * s),
            ..self.clone()
        }
    }

    /// Adds `s` times the identity in place.
    pub fn add_identity(&mut self, s: Complex64) {
        for k in 0..self.size() {
            self.matrix[(k, k)] += s;
        }
    }

    /// Dense product `self * other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self {
            matrix: &self.matrix * &other.matrix,
            dim: self.dim,
            label: format!("{} * {}", self.label, other.label),
            param: self.param.or(other.param),
            weights: self.weights.clone(),
        })
    }

    /// The adjoint in the weighted inner product, `W^{-1} M^* W`.
    pub fn weighted_adjoint(&self) -> Self {
        let n = self.size();
        let d = self.dim;
        let w = &self.weights;
        let matrix = Mat::from_fn(n, n, |i, j| self.matrix[(j, i)].conj() * (w[j / d] / w[i / d]));
        Self {
            matrix,
            dim: d,
            label: format!("adjoint({})", self.label),
            param: self.param.map(|p| p.conj()),
            weights: w.clone(),
        }
    }

    /// `||D M D^{-1} - (D M D^{-1})^*||_F / ||D M D^{-1}||_F` with `D = W^{1/2}`.
    pub fn adjoint_defect(&self) -> f64 {
        let l = self.similarity_form();
        let n = l.nrows();
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..n {
            for i in 0..n {
                num += (l[(i, j)] - l[(j, i)].conj()).norm_sqr();
                den += l[(i, j)].norm_sqr();
            }
        }
        (num / den.max(f64::MIN_POSITIVE)).sqrt()
    }

    /// `D M D^{-1}` with `D = W^{1/2}`: the matrix in an orthonormal nodal basis.
    pub fn similarity_form(&self) -> Mat<Complex64> {
        let n = self.size();
        let d = self.dim;
        let s: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        Mat::from_fn(n, n, |i, j| self.matrix[(i, j)] * (s[i / d] / s[j / d]))
    }

    /// Hermitian part of the similarity form.
    pub fn hermitian_form(&self) -> Mat<Complex64> {
        let l = self.similarity_form();
        let n = l.nrows();
        Mat::from_fn(n, n, |i, j| (l[(i, j)] + l[(j, i)].conj()) * 0.5)
    }

    pub fn frobenius(&self) -> f64 {
        self.similarity_form().norm_l2()
    }

    /// Kronecker lift of a scalar operator to `dim` identical components.
    pub fn lift(&self, dim: usize) -> Result<Self> {
        if self.dim != 1 {
            return Err(ShellError::Dimension { expected: 1, got: self.dim });
        }
        let n = self.size() * dim;
        let matrix = Mat::from_fn(n, n, |i, j| {
            if i % dim == j % dim {
                self.matrix[(i / dim, j / dim)]
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Ok(Self {
            matrix,
            dim,
            label: self.label.clone(),
            param: self.param,
            weights: self.weights.clone(),
        })
    }

    /// Writes the binary dump: little-endian header `{d: u64, N: u64, z_re, z_im, m: f64}`
    /// followed by the matrix in row-major order as interleaved `(re, im)` f64 pairs.
    pub fn dump(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_dump(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn write_dump(&self, out: &mut impl Write) -> Result<()> {
        let (z, m) = self.param.map_or((Complex64::new(0.0, 0.0), 0.0), |p| (p.z(), p.mass()));
        out.write_all(&(self.dim as u64).to_le_bytes())?;
        out.write_all(&(self.nodes() as u64).to_le_bytes())?;
        for v in [z.re, z.im, m] {
            out.write_all(&v.to_le_bytes())?;
        }
        let n = self.size();
        for i in 0..n {
            for j in 0..n {
                let v = self.matrix[(i, j)];
                out.write_all(&v.re.to_le_bytes())?;
                out.write_all(&v.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_dump(path: &Path) -> Result<(usize, usize, Complex64, f64, Mat<Complex64>)> {
        let bytes = std::fs::read(path)?;
        let bad = || ShellError::InvalidArgument(format!("{} is not an operator dump", path.display()));
        if bytes.len() < 40 {
            return Err(bad());
        }
        let u = |k: usize| u64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
        let f = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
        let (d, nodes) = (u(0) as usize, u(1) as usize);
        let n = d * nodes;
        if bytes.len() != 40 + 16 * n * n {
            return Err(bad());
        }
        let m = Mat::from_fn(n, n, |i, j| Complex64::new(f(5 + 2 * (i * n + j)), f(6 + 2 * (i * n + j))));
        Ok((d, nodes, Complex64::new(f(2), f(3)), f(4), m))
    }
}
