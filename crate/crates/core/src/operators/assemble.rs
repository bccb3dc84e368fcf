//! Dense assembly and the named operators built from it.

use std::sync::Arc;

use faer::Mat;
use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::BlockDiagonal;
use super::kernel::{AdjointDoubleLayerKernel, BlockKernel, CauchyKernel, DoubleLayerKernel, MasslessKernel, RieszKernel, SingleLayerKernel};
use super::nearfield::{NearField, NearFieldOptions};
use super::BoundaryOperator;
use crate::error::{Result, ShellError};
use crate::gamma::{alpha_dot, conjugate_and_sign, dirac, local_matrix, sigma_dot, Coupling, SpinorMatrix};
use crate::geometry::{build_quadrature, GeometrySpec, SurfaceQuadrature};
use crate::kernels::{DiracKernel, SpectralParam};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Nystrom matrix `k(x_i, x_j) w_j` off the diagonal, plus the local
/// corrections when `near` is given. Without `near` the diagonal blocks are zero.
pub fn assemble<K: BlockKernel + ?Sized>(q: &SurfaceQuadrature, kernel: &K, near: Option<&NearField>) -> BoundaryOperator {
    let d = kernel.dim();
    let n = q.len();
    let mut matrix = Mat::<Complex64>::zeros(n * d, n * d);
    matrix.as_mut().par_col_chunks_mut(d).enumerate().for_each(|(j, mut cols)| {
        let y = q.points[j];
        let ny = q.normals[j];
        let wj = q.weights[j];
        let mut block = vec![ZERO; d * d];
        for i in 0..n {
            if i == j {
                continue;
            }
            kernel.eval(&q.points[i], &q.normals[i], &y, &ny, &mut block);
            for r in 0..d {
                for c in 0..d {
                    cols[(i * d + r, c)] = block[r * d + c] * wj;
                }
            }
        }
    });
    if let Some(near) = near {
        let corrections: Vec<Vec<(usize, Vec<Complex64>)>> = (0..n).into_par_iter().map(|i| near.corrections(q, kernel, i)).collect();
        for (i, list) in corrections.into_iter().enumerate() {
            for (j, block) in list {
                for r in 0..d {
                    for c in 0..d {
                        matrix[(i * d + r, j * d + c)] += block[r * d + c];
                    }
                }
            }
        }
    }
    let label = if near.is_some() {
        kernel.label()
    } else {
        format!("{}_kernel_part", kernel.label())
    };
    BoundaryOperator {
        matrix,
        dim: d,
        label,
        param: None,
        weights: Arc::new(q.weights.clone()),
    }
}

/// Which definition of the minus operator to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinusForm {
    /// `A^{-1} - C`.
    Inverse,
    /// `A / sgn - C`, the combined-coupling variant.
    Scaled,
}

/// A quadrature together with its local correction data.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub quadrature: Arc<SurfaceQuadrature>,
    pub near: NearField,
    pub weights: Arc<Vec<f64>>,
}

impl Discretization {
    pub fn new(spec: &GeometrySpec, options: &NearFieldOptions) -> Result<Self> {
        Self::from_quadrature(build_quadrature(spec)?, options)
    }

    pub fn from_quadrature(q: SurfaceQuadrature, options: &NearFieldOptions) -> Result<Self> {
        if !q.has_charts() {
            warn!("mesh geometry: principal values use the flat-panel fallback, accuracy is lower order");
        }
        let near = NearField::new(&q, options)?;
        let weights = Arc::new(q.weights.clone());
        Ok(Self {
            quadrature: Arc::new(q),
            near,
            weights,
        })
    }

    pub fn nodes(&self) -> usize {
        self.quadrature.len()
    }

    pub fn h(&self) -> f64 {
        self.quadrature.h
    }

    pub fn is_mesh(&self) -> bool {
        !self.quadrature.has_charts()
    }

    fn build<K: BlockKernel>(&self, kernel: &K, corrected: bool) -> BoundaryOperator {
        assemble(&self.quadrature, kernel, corrected.then_some(&self.near))
    }

    /// The principal-value Cauchy operator `C^z`.
    pub fn cauchy(&self, p: &SpectralParam) -> BoundaryOperator {
        let mut op = self.build(&CauchyKernel(DiracKernel::new(p)), true);
        op.param = Some(*p);
        op.with_label("C")
    }

    /// Off-diagonal kernel part of `C^z` only.
    pub fn cauchy_kernel_part(&self, p: &SpectralParam) -> BoundaryOperator {
        let mut op = self.build(&CauchyKernel(DiracKernel::new(p)), false);
        op.param = Some(*p);
        op
    }

    /// Scalar single layer `S^z` (one component per node).
    pub fn single_layer(&self, p: &SpectralParam) -> BoundaryOperator {
        let mut op = self.build(&SingleLayerKernel(DiracKernel::new(p)), true);
        op.param = Some(*p);
        op.with_label("S")
    }

    pub fn single_layer_kernel_part(&self, p: &SpectralParam) -> BoundaryOperator {
        let mut op = self.build(&SingleLayerKernel(DiracKernel::new(p)), false);
        op.param = Some(*p);
        op
    }

    /// The massless 2x2 operator `W`.
    pub fn massless(&self) -> BoundaryOperator {
        self.build(&MasslessKernel, true).with_label("W")
    }

    pub fn massless_kernel_part(&self) -> BoundaryOperator {
        self.build(&MasslessKernel, false)
    }

    pub fn double_layer(&self) -> BoundaryOperator {
        self.build(&DoubleLayerKernel, true).with_label("K")
    }

    pub fn adjoint_double_layer(&self) -> BoundaryOperator {
        self.build(&AdjointDoubleLayerKernel, true).with_label("K*")
    }

    pub fn riesz(&self, k: usize) -> Result<BoundaryOperator> {
        if k > 2 {
            return Err(ShellError::InvalidArgument(format!("riesz index {k} out of range")));
        }
        Ok(self.build(&RieszKernel(k), true).with_label(format!("R{}", k + 1)))
    }

    /// `[N_j, R_k]` for scalar densities.
    pub fn normal_riesz_commutator(&self, j: usize, k: usize) -> Result<BoundaryOperator> {
        if j > 2 {
            return Err(ShellError::InvalidArgument(format!("normal index {j} out of range")));
        }
        let r = self.riesz(k)?;
        let nj = self.normal_component(j);
        let left = nj.left_mul(&r);
        let right = nj.right_mul(&r);
        Ok(left
            .combine(Complex64::from(1.0), &right, Complex64::from(-1.0))?
            .with_label(format!("[N{}, R{}]", j + 1, k + 1)))
    }

    pub fn normal_component(&self, j: usize) -> BlockDiagonal {
        let blocks = self.quadrature.normals.iter().map(|n| Complex64::from(n[j])).collect();
        BlockDiagonal {
            dim: 1,
            blocks,
            label: format!("N{}", j + 1),
        }
    }

    /// `alpha . N` at every node.
    pub fn alpha_normal(&self) -> BlockDiagonal {
        let q = &self.quadrature;
        BlockDiagonal::from_spinor_fn(q, "alpha.N", |i| alpha_dot(&q.normals[i]))
    }

    /// `sigma . N` at every node (2x2 blocks).
    pub fn sigma_normal(&self) -> BlockDiagonal {
        let mut blocks = Vec::with_capacity(4 * self.nodes());
        for n in &self.quadrature.normals {
            let s = sigma_dot(n);
            blocks.extend([s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]]);
        }
        BlockDiagonal {
            dim: 2,
            blocks,
            label: "sigma.N".into(),
        }
    }

    pub fn constant_field(&self, m: SpinorMatrix, label: &str) -> BlockDiagonal {
        BlockDiagonal::from_spinor_fn(&self.quadrature, label, |_| m)
    }

    pub fn beta(&self) -> BlockDiagonal {
        self.constant_field(dirac().beta, "beta")
    }

    pub fn gamma5(&self) -> BlockDiagonal {
        self.constant_field(dirac().gamma5, "gamma5")
    }

    /// The coupling matrix `A(N)` at every node; only local families.
    pub fn coupling_field(&self, c: &Coupling) -> Result<BlockDiagonal> {
        let q = &self.quadrature;
        BlockDiagonal::try_from_spinor_fn(q, format!("A[{}]", c.family().name()), |i| local_matrix(c, &q.normals[i]))?.require_hermitian(1e-14)
    }

    /// `A^{-1}` at every node, as `conj(A) / sgn`.
    pub fn inverse_coupling_field(&self, c: &Coupling) -> Result<BlockDiagonal> {
        let conj = conjugate_and_sign(c)?;
        let q = &self.quadrature;
        Ok(BlockDiagonal::from_spinor_fn(q, "A^-1", |i| conj.inverse_at(&q.normals[i])))
    }

    /// `(B_+, B_-)` at spectral parameter `p`.
    ///
    /// Local families: `A^{-1} +- C^z` (or `A/sgn - C^z` for the minus operator
    /// with [`MinusForm::Scaled`]). Cauchy families: `-(4/w)(alpha.N) C^a (alpha.N) +- C^z`
    /// and `-(4/w) C^a +- C^z` with `a` the coupling energy and `w` its weight.
    pub fn coupled_operators(&self, c: &Coupling, p: &SpectralParam, minus: MinusForm) -> Result<(BoundaryOperator, BoundaryOperator)> {
        let cz = self.cauchy(p);
        self.coupled_with(c, &cz, minus)
    }

    /// As [`Self::coupled_operators`] with a precomputed `C^z`.
    pub fn coupled_with(&self, c: &Coupling, cz: &BoundaryOperator, minus: MinusForm) -> Result<(BoundaryOperator, BoundaryOperator)> {
        let one = Complex64::from(1.0);
        match *c {
            Coupling::Cauchy { energy, weight } | Coupling::SandwichedCauchy { energy, weight } => {
                let p = cz
                    .param
                    .ok_or_else(|| ShellError::InvalidArgument("C^z without spectral parameter".into()))?;
                if weight == 0.0 {
                    return Err(ShellError::DegenerateCoupling);
                }
                let pa = SpectralParam::gap(energy, p.mass())
                    .map_err(|_| ShellError::InvalidArgument(format!("Cauchy coupling energy {energy} outside the gap (-{m}, {m})", m = p.mass())))?;
                let ca = if pa == p { cz.clone() } else { self.cauchy(&pa) };
                let base = if matches!(c, Coupling::Cauchy { .. }) {
                    let an = self.alpha_normal();
                    an.left_mul(&an.right_mul(&ca))
                } else {
                    ca
                };
                let s = Complex64::from(-4.0 / weight);
                let plus = base.combine(s, cz, one)?.with_label("B+");
                let minus = base.combine(s, cz, -one)?.with_label("B-");
                Ok((plus, minus))
            }
            _ => {
                let conj = conjugate_and_sign(c)?;
                let q = &self.quadrature;
                let inv = BlockDiagonal::from_spinor_fn(q, "A^-1", |i| conj.inverse_at(&q.normals[i]));
                let mut plus = cz.clone().with_label("B+");
                let mut neg = cz.scaled(-one).with_label("B-");
                let scaled = match minus {
                    MinusForm::Inverse => inv.clone(),
                    MinusForm::Scaled => {
                        let s = conj.sign();
                        BlockDiagonal::try_from_spinor_fn(q, "A/sgn", |i| Ok(local_matrix(c, &q.normals[i])? / Complex64::from(s)))?
                    }
                };
                add_blocks(&mut plus, &inv);
                add_blocks(&mut neg, &scaled);
                Ok((plus, neg))
            }
        }
    }

    /// `1/2 + sign * i (alpha.N) C`, or `1/2 + sign * i C (alpha.N)` when `transposed`.
    pub fn calderon_projector(&self, cz: &BoundaryOperator, sign: f64, transposed: bool) -> BoundaryOperator {
        let an = self.alpha_normal();
        let prod = if transposed { an.right_mul(cz) } else { an.left_mul(cz) };
        let mut p = prod.scaled(Complex64::new(0.0, sign));
        p.add_identity(Complex64::from(0.5));
        let side = if sign > 0.0 { "+" } else { "-" };
        p.with_label(if transposed { format!("P{side}^T") } else { format!("P{side}") })
    }
}

/// Adds a block-diagonal field to an operator in place.
pub(crate) fn add_blocks(op: &mut BoundaryOperator, f: &BlockDiagonal) {
    let d = op.dim;
    for i in 0..op.nodes() {
        let b = f.block(i);
        for r in 0..d {
            for c in 0..d {
                op.matrix[(i * d + r, i * d + c)] += b[r * d + c];
            }
        }
    }
}
