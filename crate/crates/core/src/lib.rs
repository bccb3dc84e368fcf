//! Boundary-integral tools for Dirac operators with surface-supported couplings.

pub mod diagnostics;
pub mod error;
pub mod gamma;
pub mod geometry;
pub mod kernels;
pub mod krein;
pub mod linalg;
pub mod operators;
pub mod spectral;

pub use error::{Result, ShellError};
pub use gamma::{Coupling, Family, SpinorMatrix, UnitNormal};
pub use geometry::{build_quadrature, GeometrySpec, Shape, Side, SurfaceQuadrature};
pub use kernels::{DiracKernel, SpectralParam};
pub use operators::{BoundaryOperator, DensityVector, Discretization};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
