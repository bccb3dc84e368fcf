//! Block-diagonal multiplication operators.

use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;

use super::{BoundaryOperator, DensityVector};
use crate::error::{Result, ShellError};
use crate::gamma::{max_abs, SpinorMatrix};
use crate::geometry::SurfaceQuadrature;

/// One `d x d` block per node, stored row-major.
#[derive(Clone, Debug)]
pub struct BlockDiagonal {
    pub dim: usize,
    pub blocks: Vec<Complex64>,
    pub label: String,
}

impl BlockDiagonal {
    pub fn from_spinor_fn(q: &SurfaceQuadrature, label: impl Into<String>, mut f: impl FnMut(usize) -> SpinorMatrix) -> Self {
        let mut blocks = Vec::with_capacity(16 * q.len());
        for i in 0..q.len() {
            let m = f(i);
            for r in 0..4 {
                for c in 0..4 {
                    blocks.push(m[(r, c)]);
                }
            }
        }
        Self {
            dim: 4,
            blocks,
            label: label.into(),
        }
    }

    pub fn try_from_spinor_fn(q: &SurfaceQuadrature, label: impl Into<String>, mut f: impl FnMut(usize) -> Result<SpinorMatrix>) -> Result<Self> {
        let mut mats = Vec::with_capacity(q.len());
        for i in 0..q.len() {
            mats.push(f(i)?);
        }
        Ok(Self::from_spinor_fn(q, label, |i| mats[i]))
    }

    /// The same field but rejected unless every block is Hermitian.
    pub fn require_hermitian(self, tol: f64) -> Result<Self> {
        let d = self.dim;
        for (i, b) in self.blocks.chunks(d * d).enumerate() {
            for r in 0..d {
                for c in 0..d {
                    if (b[r * d + c] - b[c * d + r].conj()).norm() > tol {
                        return Err(ShellError::InvalidArgument(format!("{} is not Hermitian at node {i}", self.label)));
                    }
                }
            }
        }
        Ok(self)
    }

    pub fn nodes(&self) -> usize {
        self.blocks.len() / (self.dim * self.dim)
    }

    pub fn block(&self, i: usize) -> &[Complex64] {
        let dd = self.dim * self.dim;
        &self.blocks[i * dd..(i + 1) * dd]
    }

    pub fn spinor(&self, i: usize) -> SpinorMatrix {
        assert_eq!(self.dim, 4);
        SpinorMatrix::from_row_slice(self.block(i))
    }

    pub fn apply_slice(&self, v: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
        for i in 0..self.nodes() {
            let b = self.block(i);
            for r in 0..d {
                out[i * d + r] = (0..d).map(|c| b[r * d + c] * v[i * d + c]).sum();
            }
        }
        out
    }

    pub fn apply(&self, g: &DensityVector) -> DensityVector {
        DensityVector {
            values: self.apply_slice(&g.values),
            dim: g.dim,
        }
    }

    pub fn to_operator(&self, weights: Arc<Vec<f64>>) -> BoundaryOperator {
        let d = self.dim;
        let n = self.nodes() * d;
        let mut m = Mat::zeros(n, n);
        for i in 0..self.nodes() {
            let b = self.block(i);
            for r in 0..d {
                for c in 0..d {
                    m[(i * d + r, i * d + c)] = b[r * d + c];
                }
            }
        }
        BoundaryOperator {
            matrix: m,
            dim: d,
            label: self.label.clone(),
            param: None,
            weights,
        }
    }

    /// `F M`, computed block-row by block-row.
    pub fn left_mul(&self, op: &BoundaryOperator) -> BoundaryOperator {
        let d = self.dim;
        let n = op.size();
        let m = Mat::from_fn(n, n, |row, col| {
            let i = row / d;
            let r = row % d;
            let b = self.block(i);
            (0..d).map(|c| b[r * d + c] * op.matrix[(i * d + c, col)]).sum()
        });
        BoundaryOperator {
            matrix: m,
            dim: op.dim,
            label: format!("{} * {}", self.label, op.label),
            param: op.param,
            weights: op.weights.clone(),
        }
    }

    /// `M F`, computed block-column by block-column.
    pub fn right_mul(&self, op: &BoundaryOperator) -> BoundaryOperator {
        let d = self.dim;
        let n = op.size();
        let m = Mat::from_fn(n, n, |row, col| {
            let j = col / d;
            let c = col % d;
            let b = self.block(j);
            (0..d).map(|k| op.matrix[(row, j * d + k)] * b[k * d + c]).sum()
        });
        BoundaryOperator {
            matrix: m,
            dim: op.dim,
            label: format!("{} * {}", op.label, self.label),
            param: op.param,
            weights: op.weights.clone(),
        }
    }

    /// `F M + M F` in one pass.
    pub fn anticommutator(&self, op: &BoundaryOperator) -> BoundaryOperator {
        let d = self.dim;
        let n = op.size();
        let m = Mat::from_fn(n, n, |row, col| {
            let (i, r) = (row / d, row % d);
            let (j, c) = (col / d, col % d);
            let (bi, bj) = (self.block(i), self.block(j));
            (0..d)
                .map(|k| bi[r * d + k] * op.matrix[(i * d + k, col)] + op.matrix[(row, j * d + k)] * bj[k * d + c])
                .sum()
        });
        BoundaryOperator {
            matrix: m,
            dim: d,
            label: format!("{{{}, {}}}", self.label, op.label),
            param: op.param,
            weights: op.weights.clone(),
        }
    }

    /// Blockwise product `self * other`.
    pub fn then(&self, other: &BlockDiagonal) -> BlockDiagonal {
        let d = self.dim;
        let mut blocks = vec![Complex64::new(0.0, 0.0); self.blocks.len()];
        for i in 0..self.nodes() {
            let (a, b) = (self.block(i), other.block(i));
            for r in 0..d {
                for c in 0..d {
                    blocks[i * d * d + r * d + c] = (0..d).map(|k| a[r * d + k] * b[k * d + c]).sum();
                }
            }
        }
        BlockDiagonal {
            dim: d,
            blocks,
            label: format!("{} {}", self.label, other.label),
        }
    }

    /// Largest entrywise deviation of `self^2` from the identity.
    pub fn square_defect(&self) -> f64 {
        let sq = self.then(self);
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..self.nodes() {
            if d == 4 {
                worst = worst.max(max_abs(&(SpinorMatrix::from_row_slice(sq.block(i)) - SpinorMatrix::identity())));
            } else {
                let b = sq.block(i);
                for r in 0..d {
                    for c in 0..d {
                        let e = if r == c { 1.0 } else { 0.0 };
                        worst = worst.max((b[r * d + c] - e).norm());
                    }
                }
            }
        }
        worst
    }
}
