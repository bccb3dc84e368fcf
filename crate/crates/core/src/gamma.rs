//! Dirac matrices, shell couplings and their algebraic classification.

use std::sync::OnceLock;

use nalgebra::{Matrix2, Matrix4, Vector3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShellError};

pub type SpinorMatrix = Matrix4<Complex64>;
pub type PauliMatrix = Matrix2<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance on |n| - 1 accepted by the coupling constructors.
pub const NORMAL_TOL: f64 = 1e-12;

/// Entrywise tolerance for "exact" algebraic checks.
pub const ALGEBRA_TOL: f64 = 1e-13;

pub fn pauli() -> [PauliMatrix; 3] {
    [
        Matrix2::new(ZERO, ONE, ONE, ZERO),
        Matrix2::new(ZERO, -I, I, ZERO),
        Matrix2::new(ONE, ZERO, ZERO, -ONE),
    ]
}

fn blocks(a: &PauliMatrix, b: &PauliMatrix, c: &PauliMatrix, d: &PauliMatrix) -> SpinorMatrix {
    let mut m = SpinorMatrix::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(a);
    m.fixed_view_mut::<2, 2>(0, 2).copy_from(b);
    m.fixed_view_mut::<2, 2>(2, 0).copy_from(c);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(d);
    m
}

#[derive(Clone, Debug)]
pub struct DiracMatrices {
    pub alpha: [SpinorMatrix; 3],
    pub beta: SpinorMatrix,
    pub gamma5: SpinorMatrix,
}

/// The standard (Dirac) representation built from Pauli blocks.
pub fn dirac_matrices() -> DiracMatrices {
    let s = pauli();
    let z = PauliMatrix::zeros();
    let id = PauliMatrix::identity();
    let alpha = [0, 1, 2].map(|k| blocks(&z, &s[k], &s[k], &z));
    DiracMatrices {
        alpha,
        beta: blocks(&id, &z, &z, &(-id)),
        gamma5: blocks(&z, &id, &id, &z),
    }
}

/// Shared instance for code paths that only read the matrices.
pub fn dirac() -> &'static DiracMatrices {
    static CELL: OnceLock<DiracMatrices> = OnceLock::new();
    CELL.get_or_init(dirac_matrices)
}

pub fn sigma_dot(v: &Vector3<f64>) -> PauliMatrix {
    Matrix2::new(
        Complex64::from(v.z),
        Complex64::new(v.x, -v.y),
        Complex64::new(v.x, v.y),
        Complex64::from(-v.z),
    )
}

pub fn alpha_dot(v: &Vector3<f64>) -> SpinorMatrix {
    let s = sigma_dot(v);
    let z = PauliMatrix::zeros();
    blocks(&z, &s, &s, &z)
}

pub fn identity() -> SpinorMatrix {
    SpinorMatrix::identity()
}

pub fn anticommutator(a: &SpinorMatrix, b: &SpinorMatrix) -> SpinorMatrix {
    a * b + b * a
}

pub fn commutator(a: &SpinorMatrix, b: &SpinorMatrix) -> SpinorMatrix {
    a * b - b * a
}

/// Largest entry modulus.
pub fn max_abs<const R: usize, const C: usize>(m: &nalgebra::SMatrix<Complex64, R, C>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry modulus of `a - b`.
pub fn max_diff<const R: usize, const C: usize>(a: &nalgebra::SMatrix<Complex64, R, C>, b: &nalgebra::SMatrix<Complex64, R, C>) -> f64 {
    max_abs(&(a - b))
}

/// A 3-vector checked to be of unit length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitNormal(Vector3<f64>);

impl UnitNormal {
    pub fn new(v: Vector3<f64>) -> Result<Self> {
        let norm = v.norm();
        if (norm - 1.0).abs() > NORMAL_TOL || !norm.is_finite() {
            return Err(ShellError::NonUnitNormal { norm });
        }
        Ok(Self(v))
    }

    pub fn get(&self) -> &Vector3<f64> {
        &self.0
    }
}

/// Local and nonlocal shell couplings. Strengths are dimensionless; the
/// Cauchy families carry the spectral energy at which their operator is frozen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Coupling {
    Electrostatic { strength: f64 },
    Lorentz { strength: f64 },
    Magnetic { strength: f64 },
    Combined { scalar: f64, lorentz: f64, magnetic: f64 },
    ModifiedElectrostatic { strength: f64 },
    ModifiedLorentz { strength: f64 },
    ModifiedMagnetic { strength: f64 },
    AnomalousMagnetic { strength: f64 },
    ModifiedAnomalousMagnetic { strength: f64 },
    Cauchy { energy: f64, weight: f64 },
    SandwichedCauchy { energy: f64, weight: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Electrostatic,
    Lorentz,
    Magnetic,
    Combined,
    ModifiedElectrostatic,
    ModifiedLorentz,
    ModifiedMagnetic,
    AnomalousMagnetic,
    ModifiedAnomalousMagnetic,
    Cauchy,
    SandwichedCauchy,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Electrostatic => "electrostatic",
            Family::Lorentz => "lorentz",
            Family::Magnetic => "magnetic",
            Family::Combined => "combined",
            Family::ModifiedElectrostatic => "modified_electrostatic",
            Family::ModifiedLorentz => "modified_lorentz",
            Family::ModifiedMagnetic => "modified_magnetic",
            Family::AnomalousMagnetic => "anomalous_magnetic",
            Family::ModifiedAnomalousMagnetic => "modified_anomalous_magnetic",
            Family::Cauchy => "cauchy",
            Family::SandwichedCauchy => "sandwiched_cauchy",
        }
    }
}

impl Coupling {
    pub fn family(&self) -> Family {
        match self {
            Coupling::Electrostatic { .. } => Family::Electrostatic,
            Coupling::Lorentz { .. } => Family::Lorentz,
            Coupling::Magnetic { .. } => Family::Magnetic,
            Coupling::Combined { .. } => Family::Combined,
            Coupling::ModifiedElectrostatic { .. } => Family::ModifiedElectrostatic,
            Coupling::ModifiedLorentz { .. } => Family::ModifiedLorentz,
            Coupling::ModifiedMagnetic { .. } => Family::ModifiedMagnetic,
            Coupling::AnomalousMagnetic { .. } => Family::AnomalousMagnetic,
            Coupling::ModifiedAnomalousMagnetic { .. } => Family::ModifiedAnomalousMagnetic,
            Coupling::Cauchy { .. } => Family::Cauchy,
            Coupling::SandwichedCauchy { .. } => Family::SandwichedCauchy,
        }
    }

    pub fn is_local(&self) -> bool {
        !matches!(self, Coupling::Cauchy { .. } | Coupling::SandwichedCauchy { .. })
    }

    /// The single strength of a one-parameter local family.
    pub fn strength(&self) -> Option<f64> {
        match *self {
            Coupling::Electrostatic { strength }
            | Coupling::Lorentz { strength }
            | Coupling::Magnetic { strength }
            | Coupling::ModifiedElectrostatic { strength }
            | Coupling::ModifiedLorentz { strength }
            | Coupling::ModifiedMagnetic { strength }
            | Coupling::AnomalousMagnetic { strength }
            | Coupling::ModifiedAnomalousMagnetic { strength } => Some(strength),
            _ => None,
        }
    }

    fn with_family(family: Family, strength: f64) -> Self {
        match family {
            Family::Electrostatic => Coupling::Electrostatic { strength },
            Family::Lorentz => Coupling::Lorentz { strength },
            Family::Magnetic => Coupling::Magnetic { strength },
            Family::ModifiedElectrostatic => Coupling::ModifiedElectrostatic { strength },
            Family::ModifiedLorentz => Coupling::ModifiedLorentz { strength },
            Family::ModifiedMagnetic => Coupling::ModifiedMagnetic { strength },
            Family::AnomalousMagnetic => Coupling::AnomalousMagnetic { strength },
            Family::ModifiedAnomalousMagnetic => Coupling::ModifiedAnomalousMagnetic { strength },
            _ => unreachable!("with_family is only used for one-parameter families"),
        }
    }

    /// Express a one-parameter scalar/Lorentz/magnetic coupling as a combined one.
    pub fn as_combined(&self) -> Option<(f64, f64, f64)> {
        match *self {
            Coupling::Electrostatic { strength } => Some((strength, 0.0, 0.0)),
            Coupling::Lorentz { strength } => Some((0.0, strength, 0.0)),
            Coupling::Magnetic { strength } => Some((0.0, 0.0, strength)),
            Coupling::Combined { scalar, lorentz, magnetic } => Some((scalar, lorentz, magnetic)),
            _ => None,
        }
    }
}

/// The matrix multiplying the surface delta for a local coupling at normal `n`.
pub fn coupling_matrix(c: &Coupling, n: &Vector3<f64>) -> Result<SpinorMatrix> {
    let n = UnitNormal::new(*n)?;
    local_matrix(c, n.get())
}

pub(crate) fn local_matrix(c: &Coupling, n: &Vector3<f64>) -> Result<SpinorMatrix> {
    let g = dirac();
    let an = alpha_dot(n);
    let m = match *c {
        Coupling::Electrostatic { strength } => identity() * Complex64::from(strength),
        Coupling::Lorentz { strength } => g.beta * Complex64::from(strength),
        Coupling::Magnetic { strength } => an * Complex64::from(strength),
        Coupling::Combined { scalar, lorentz, magnetic } => {
            identity() * Complex64::from(scalar) + g.beta * Complex64::from(lorentz) + an * Complex64::from(magnetic)
        }
        Coupling::ModifiedElectrostatic { strength } => g.gamma5 * Complex64::from(strength),
        Coupling::ModifiedLorentz { strength } => g.gamma5 * g.beta * (I * strength),
        Coupling::ModifiedMagnetic { strength } => g.gamma5 * an * Complex64::from(strength),
        Coupling::AnomalousMagnetic { strength } => g.beta * an * (I * strength),
        Coupling::ModifiedAnomalousMagnetic { strength } => g.gamma5 * g.beta * an * Complex64::from(strength),
        Coupling::Cauchy { .. } => return Err(ShellError::NonLocal("cauchy")),
        Coupling::SandwichedCauchy { .. } => return Err(ShellError::NonLocal("sandwiched_cauchy")),
    };
    Ok(m)
}

/// The conjugate coupling rule and its sign scalar: `A * conj = sign * I`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conjugate {
    coupling: Coupling,
    sign: f64,
}

impl Conjugate {
    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    /// The conjugate matrix at a unit normal.
    pub fn at(&self, n: &Vector3<f64>) -> SpinorMatrix {
        let g = dirac();
        match self.coupling {
            Coupling::Combined { scalar, lorentz, magnetic } => {
                identity() * Complex64::from(scalar) - g.beta * Complex64::from(lorentz) - alpha_dot(n) * Complex64::from(magnetic)
            }
            c => {
                let a = local_matrix(&c, n).expect("conjugate is only built for local couplings");
                if reflects_positive(c.family()) {
                    a
                } else {
                    -a
                }
            }
        }
    }

    /// The inverse coupling matrix, `conj / sign`.
    pub fn inverse_at(&self, n: &Vector3<f64>) -> SpinorMatrix {
        self.at(n) / Complex64::from(self.sign)
    }
}

/// Families whose conjugate equals the coupling itself (positive sign scalar).
fn reflects_positive(f: Family) -> bool {
    matches!(f, Family::Electrostatic | Family::ModifiedElectrostatic)
}

pub fn conjugate_and_sign(c: &Coupling) -> Result<Conjugate> {
    let sign = match *c {
        Coupling::Combined { scalar, lorentz, magnetic } => scalar * scalar - lorentz * lorentz - magnetic * magnetic,
        Coupling::Cauchy { .. } => return Err(ShellError::NonLocal("cauchy")),
        Coupling::SandwichedCauchy { .. } => return Err(ShellError::NonLocal("sandwiched_cauchy")),
        ref other => {
            let s = other.strength().expect("one-parameter family");
            if reflects_positive(other.family()) {
                s * s
            } else {
                -s * s
            }
        }
    };
    if sign == 0.0 {
        return Err(ShellError::DegenerateCoupling);
    }
    Ok(Conjugate { coupling: *c, sign })
}

/// Multiplication by beta, restricted to the eight one-parameter families.
pub fn beta_transform(c: &Coupling) -> Result<Coupling> {
    let s = c.strength().ok_or(ShellError::NoTransform(c.family().name()))?;
    let f = match c.family() {
        Family::Electrostatic => Family::Lorentz,
        Family::Lorentz => Family::Electrostatic,
        Family::Magnetic => Family::AnomalousMagnetic,
        Family::AnomalousMagnetic => Family::Magnetic,
        Family::ModifiedElectrostatic => Family::ModifiedLorentz,
        Family::ModifiedLorentz => Family::ModifiedElectrostatic,
        Family::ModifiedMagnetic => Family::ModifiedAnomalousMagnetic,
        Family::ModifiedAnomalousMagnetic => Family::ModifiedMagnetic,
        other => return Err(ShellError::NoTransform(other.name())),
    };
    Ok(Coupling::with_family(f, s))
}

/// Multiplication by gamma5, restricted to the eight one-parameter families.
pub fn gamma_transform(c: &Coupling) -> Result<Coupling> {
    let s = c.strength().ok_or(ShellError::NoTransform(c.family().name()))?;
    let f = match c.family() {
        Family::Electrostatic => Family::ModifiedElectrostatic,
        Family::ModifiedElectrostatic => Family::Electrostatic,
        Family::Lorentz => Family::ModifiedLorentz,
        Family::ModifiedLorentz => Family::Lorentz,
        Family::Magnetic => Family::ModifiedMagnetic,
        Family::ModifiedMagnetic => Family::Magnetic,
        Family::AnomalousMagnetic => Family::ModifiedAnomalousMagnetic,
        Family::ModifiedAnomalousMagnetic => Family::AnomalousMagnetic,
        other => return Err(ShellError::NoTransform(other.name())),
    };
    Ok(Coupling::with_family(f, s))
}

/// Find the phase p in {1, -1, i, -i} with `after = p * factor * before`.
pub fn transform_phase(before: &SpinorMatrix, after: &SpinorMatrix, factor: &SpinorMatrix) -> Option<Complex64> {
    let raw = factor * before;
    [ONE, -ONE, I, -I]
        .into_iter()
        .find(|p| max_diff(&(raw * *p), after) <= ALGEBRA_TOL * (1.0 + max_abs(after)))
}

/// Sample normals used by the pointwise classification checks.
pub fn sample_normals(count: usize, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vector3::z()];
    while out.len() < count + 1 {
        let v = Vector3::new(
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        );
        let norm: f64 = v.norm();
        if norm > 1e-3 {
            out.push(v / norm);
        }
    }
    out
}

/// Idempotence defect of the pair `1/2 +- i A^{-1} (alpha.n)`, the larger of the two.
pub fn projector_defect(c: &Coupling, n: &Vector3<f64>) -> Result<f64> {
    let conj = conjugate_and_sign(c)?;
    let half = identity() * Complex64::from(0.5);
    let x = conj.inverse_at(n) * alpha_dot(n) * I;
    let defect = [half + x, half - x].iter().map(|p| max_diff(&(p * p), p)).fold(0.0, f64::max);
    Ok(defect)
}

/// Whether the sign scalar is -4 and `conj (alpha.n) = (alpha.n) A` at `n`.
pub fn intertwines(c: &Coupling, n: &Vector3<f64>) -> Result<bool> {
    let conj = conjugate_and_sign(c)?;
    let a = local_matrix(c, n)?;
    let an = alpha_dot(n);
    let lhs = conj.at(n) * an;
    let rhs = an * a;
    let scale = 1.0 + max_abs(&a);
    Ok((conj.sign() + 4.0).abs() <= ALGEBRA_TOL * 4.0 && max_diff(&lhs, &rhs) <= ALGEBRA_TOL * scale)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub critical: bool,
    pub confining: bool,
}

fn near(x: f64, target: f64) -> bool {
    (x - target).abs() <= 1e-12 * (1.0 + target.abs())
}

/// Critical and confining flags of a local coupling at its strengths.
///
/// Confinement is decided by the projector and intertwining checks at the
/// z-axis normal plus eight seeded random normals. Criticality follows the
/// family table: scalar-type and anomalous families are critical at
/// strength +-2, the combined family at sign scalar 4.
pub fn classify(c: &Coupling) -> Result<Classification> {
    if !c.is_local() {
        return Err(ShellError::NonLocal(c.family().name()));
    }
    let normals = sample_normals(8, 42);
    let mut projectors = true;
    let mut intertwined = true;
    for n in &normals {
        projectors &= projector_defect(c, n)? <= ALGEBRA_TOL;
        intertwined &= intertwines(c, n)?;
    }
    let critical = match *c {
        Coupling::Combined { .. } => near(conjugate_and_sign(c)?.sign(), 4.0),
        Coupling::Electrostatic { strength }
        | Coupling::ModifiedElectrostatic { strength }
        | Coupling::AnomalousMagnetic { strength }
        | Coupling::ModifiedAnomalousMagnetic { strength } => near(strength.abs(), 2.0),
        _ => false,
    };
    Ok(Classification {
        critical,
        confining: projectors || intertwined,
    })
}

/// Criticality of the nonlocal Cauchy families: weight -4 for the plain
/// family, +4 for the sandwiched one.
pub fn cauchy_is_critical(c: &Coupling) -> Option<bool> {
    match *c {
        Coupling::Cauchy { weight, .. } => Some(near(weight, -4.0)),
        Coupling::SandwichedCauchy { weight, .. } => Some(near(weight, 4.0)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma5_is_product_of_alphas() {
        let g = dirac_matrices();
        let prod = g.alpha[0] * g.alpha[1] * g.alpha[2] * (-I);
        assert_eq!(prod, g.gamma5);
    }

    #[test]
    fn alphas_anticommute() {
        let g = dirac_matrices();
        for j in 0..3 {
            for k in 0..3 {
                let expect = if j == k {
                    identity() * Complex64::from(2.0)
                } else {
                    SpinorMatrix::zeros()
                };
                assert_eq!(anticommutator(&g.alpha[j], &g.alpha[k]), expect);
            }
            assert_eq!(anticommutator(&g.alpha[j], &g.beta), SpinorMatrix::zeros());
            assert_eq!(commutator(&g.gamma5, &g.alpha[j]), SpinorMatrix::zeros());
        }
        assert_eq!(anticommutator(&g.gamma5, &g.beta), SpinorMatrix::zeros());
        assert_eq!(g.beta * g.beta, identity());
        assert_eq!(g.gamma5 * g.gamma5, identity());
    }

    #[test]
    fn alpha_dot_basis_and_zero() {
        let g = dirac_matrices();
        assert_eq!(alpha_dot(&Vector3::z()), g.alpha[2]);
        assert_eq!(alpha_dot(&Vector3::zeros()), SpinorMatrix::zeros());
    }

    #[test]
    fn lorentz_two_is_two_beta() {
        let m = coupling_matrix(&Coupling::Lorentz { strength: 2.0 }, &Vector3::x()).unwrap();
        assert_eq!(m, dirac().beta * Complex64::from(2.0));
    }

    #[test]
    fn rejects_non_unit_normal() {
        let err = coupling_matrix(&Coupling::Magnetic { strength: 1.0 }, &Vector3::new(0.0, 0.0, 1.1));
        assert!(matches!(err, Err(ShellError::NonUnitNormal { .. })));
    }

    #[test]
    fn sign_values() {
        let s = |c| conjugate_and_sign(&c).map(|x| x.sign());
        assert_eq!(
            s(Coupling::Combined {
                scalar: 2.0,
                lorentz: 0.0,
                magnetic: 0.0
            })
            .unwrap(),
            4.0
        );
        assert_eq!(
            s(Coupling::Combined {
                scalar: 0.0,
                lorentz: 2.0,
                magnetic: 0.0
            })
            .unwrap(),
            -4.0
        );
        assert!(matches!(
            s(Coupling::Combined {
                scalar: 1.0,
                lorentz: 1.0,
                magnetic: 0.0
            }),
            Err(ShellError::DegenerateCoupling)
        ));
    }

    #[test]
    fn classification_table() {
        let lor = classify(&Coupling::Lorentz { strength: 2.0 }).unwrap();
        assert_eq!(
            lor,
            Classification {
                critical: false,
                confining: true
            }
        );
        let anom = classify(&Coupling::AnomalousMagnetic { strength: 2.0 }).unwrap();
        assert_eq!(
            anom,
            Classification {
                critical: true,
                confining: true
            }
        );
        let el = classify(&Coupling::Electrostatic { strength: 1.0 }).unwrap();
        assert_eq!(
            el,
            Classification {
                critical: false,
                confining: false
            }
        );
    }
}
