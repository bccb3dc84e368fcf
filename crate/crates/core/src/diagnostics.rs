//! Report-only numerical diagnostics: singular-value decay of operators that are
//! compact on smooth surfaces, confinement checks for local couplings, and the
//! identities behind the Cauchy-type couplings.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShellError};
use crate::gamma::{conjugate_and_sign, intertwines, projector_defect, Coupling};
use crate::geometry::Side;
use crate::kernels::SpectralParam;
use crate::linalg::{top_singular_values, LuSolver, DENSE_SVD_LIMIT};
use crate::operators::identities::smooth_defect;
use crate::operators::{nontangential_trace, BoundaryOperator, DensityVector, Discretization, MinusForm, TraceOptions};

/// Indices `k` at which `sigma_k / sigma_1` is reported (1-based).
pub const TAIL_INDICES: [usize; 3] = [10, 25, 50];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompactOperator {
    /// `{alpha.N, C^a}` at gap energy `energy`.
    AnticommutatorCauchy {
        energy: f64,
    },
    DoubleLayer,
    AdjointDoubleLayer,
    /// `[N_j, R_k]`, zero-based indices.
    NormalRieszCommutator {
        normal: usize,
        riesz: usize,
    },
    /// `{sigma.N, W}`.
    AnticommutatorMassless,
}

impl CompactOperator {
    pub fn label(&self) -> String {
        match *self {
            CompactOperator::AnticommutatorCauchy { energy } => format!("{{alpha.N, C^{energy}}}"),
            CompactOperator::DoubleLayer => "K".into(),
            CompactOperator::AdjointDoubleLayer => "K*".into(),
            CompactOperator::NormalRieszCommutator { normal, riesz } => format!("[N{}, R{}]", normal + 1, riesz + 1),
            CompactOperator::AnticommutatorMassless => "{sigma.N, W}".into(),
        }
    }

    pub fn build(&self, disc: &Discretization, mass: f64) -> Result<BoundaryOperator> {
        Ok(match *self {
            CompactOperator::AnticommutatorCauchy { energy } => {
                let c = disc.cauchy(&SpectralParam::gap(energy, mass)?);
                disc.alpha_normal().anticommutator(&c)
            }
            CompactOperator::DoubleLayer => disc.double_layer(),
            CompactOperator::AdjointDoubleLayer => disc.adjoint_double_layer(),
            CompactOperator::NormalRieszCommutator { normal, riesz } => disc.normal_riesz_commutator(normal, riesz)?,
            CompactOperator::AnticommutatorMassless => disc.sigma_normal().anticommutator(&disc.massless()),
        })
    }
}

/// Leading singular values of one operator at one resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub label: String,
    pub nodes: usize,
    pub h: f64,
    /// Descending, weighted metric.
    pub singular_values: Vec<f64>,
    /// `(k, sigma_k / sigma_1)` for the indices in [`TAIL_INDICES`] that were computed.
    pub tail_ratios: Vec<(usize, f64)>,
    pub randomized: bool,
}

impl DecayProfile {
    pub fn new(label: String, nodes: usize, h: f64, singular_values: Vec<f64>, randomized: bool) -> Self {
        let top = singular_values.first().copied().unwrap_or(0.0);
        let tail_ratios = TAIL_INDICES
            .iter()
            .filter(|&&k| k <= singular_values.len())
            .map(|&k| (k, if top > 0.0 { singular_values[k - 1] / top } else { 0.0 }))
            .collect();
        Self {
            label,
            nodes,
            h,
            singular_values,
            tail_ratios,
            randomized,
        }
    }

    pub fn tail_ratio(&self, k: usize) -> Option<f64> {
        self.tail_ratios.iter().find(|(j, _)| *j == k).map(|(_, r)| *r)
    }

    /// Largest relative change in `sigma_1..sigma_count` against another profile.
    pub fn leading_change(&self, other: &DecayProfile, count: usize) -> f64 {
        self.singular_values
            .iter()
            .zip(&other.singular_values)
            .take(count)
            .map(|(a, b)| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,sigma,ratio\n");
        let top = self.singular_values.first().copied().unwrap_or(1.0);
        for (k, v) in self.singular_values.iter().enumerate() {
            let _ = writeln!(s, "{},{:.12e},{:.12e}", k + 1, v, v / top);
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileOptions {
    pub mass: f64,
    /// Number of leading singular values kept.
    pub count: usize,
    /// Power passes of the randomized solver (large operators only).
    pub power: usize,
    pub seed: u64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            mass: 1.0,
            count: 60,
            power: 3,
            seed: 42,
        }
    }
}

/// Singular-value profile of `which` in the weighted metric.
pub fn compactness_profile(disc: &Discretization, which: CompactOperator, options: &ProfileOptions) -> Result<DecayProfile> {
    let op = which.build(disc, options.mass)?;
    let sim = op.similarity_form();
    drop(op);
    let sv = top_singular_values(sim.as_ref(), options.count, options.power, options.seed)?;
    Ok(DecayProfile::new(
        which.label(),
        disc.nodes(),
        disc.h(),
        sv,
        sim.nrows() > DENSE_SVD_LIMIT,
    ))
}

/// `K[1]` should be constant on a sphere: mean value and relative spread.
pub fn double_layer_on_constants(disc: &Discretization) -> Result<(f64, f64)> {
    let k = disc.double_layer();
    let one = DensityVector {
        values: vec![Complex64::from(1.0); disc.nodes()],
        dim: 1,
    };
    let v = k.apply(&one)?;
    let area: f64 = disc.quadrature.weights.iter().sum();
    let mean = v.values.iter().zip(&disc.quadrature.weights).map(|(x, w)| x.re * w).sum::<f64>() / area;
    let spread = v.values.iter().map(|x| (x - mean).norm()).fold(0.0, f64::max) / mean.abs().max(f64::MIN_POSITIVE);
    Ok((mean, spread))
}

/// Residuals of the penetrability relation for a combined coupling with sign scalar -4:
/// for `phi = u + Phi[g]` with `t u = -B_+[g]` the traces satisfy
/// `(A/2 +- i alpha.N) phi_+- = -+ (i/2) magnetic g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenetrabilityResidual {
    pub samples: usize,
    /// `[+, -]` with the traces from the discrete jump relation.
    pub algebraic: [f64; 2],
    /// `[+, -]` with extrapolated nontangential traces of `Phi[g]`.
    pub traced: [f64; 2],
    /// `[+, -]` against the right side `-+ i magnetic g` instead.
    pub against_unhalved: [f64; 2],
    /// `|magnetic| / 2`, the relative size of the right side.
    pub right_side: f64,
    pub penetrable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfinementReport {
    pub coupling: Coupling,
    pub sign: f64,
    /// Largest idempotence defect of `1/2 +- i A^{-1}(alpha.N)` over the nodes.
    pub projector_defect: f64,
    pub projectors_exact: bool,
    /// Sign scalar -4 and `conj (alpha.N) = (alpha.N) A` at every node.
    pub intertwines: bool,
    pub penetrability: Option<PenetrabilityResidual>,
    pub confining: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfinementOptions {
    pub mass: f64,
    pub samples: usize,
    pub seed: u64,
    pub trace: TraceOptions,
    /// Algebraic tolerance for the pointwise projector checks.
    pub exact_tol: f64,
}

impl Default for ConfinementOptions {
    fn default() -> Self {
        Self {
            mass: 1.0,
            samples: 16,
            seed: 42,
            trace: TraceOptions::default(),
            exact_tol: 1e-13,
        }
    }
}

pub fn confinement_check(disc: &Discretization, c: &Coupling, options: &ConfinementOptions) -> Result<ConfinementReport> {
    if !c.is_local() {
        return Err(ShellError::NonLocal(c.family().name()));
    }
    let sign = conjugate_and_sign(c)?.sign();
    let mut worst: f64 = 0.0;
    let mut all_intertwine = true;
    for n in &disc.quadrature.normals {
        worst = worst.max(projector_defect(c, n)?);
        all_intertwine &= intertwines(c, n)?;
    }
    let projectors_exact = worst <= options.exact_tol;
    let penetrability = match c.as_combined() {
        Some((_, _, magnetic)) if (sign + 4.0).abs() <= 1e-12 => Some(penetrability_residual(disc, c, magnetic, options)?),
        _ => None,
    };
    let confining = match &penetrability {
        Some(p) => !p.penetrable && (projectors_exact || all_intertwine),
        None => projectors_exact || all_intertwine,
    };
    Ok(ConfinementReport {
        coupling: *c,
        sign,
        projector_defect: worst,
        projectors_exact,
        intertwines: all_intertwine,
        penetrability,
        confining,
    })
}

fn penetrability_residual(disc: &Discretization, c: &Coupling, magnetic: f64, options: &ConfinementOptions) -> Result<PenetrabilityResidual> {
    let q = &disc.quadrature;
    let w = &q.weights;
    let p = SpectralParam::gap(0.0, options.mass)?;
    let cz = disc.cauchy(&p);
    let coupled = disc.coupled_with(c, &cz, MinusForm::Inverse)?.0;
    let a = disc.coupling_field(c)?;
    let an = disc.alpha_normal();
    let half_i = Complex64::new(0.0, 0.5);
    let i = Complex64::new(0.0, 1.0);
    let mut algebraic = [0.0f64; 2];
    let mut traced = [0.0f64; 2];
    let mut unhalved = [0.0f64; 2];
    for k in 0..options.samples.max(1) {
        let g = DensityVector::smooth_random(q, 4, options.seed.wrapping_add(k as u64));
        let gn = g.norm(w);
        let tu = coupled.apply(&g)?.scaled(Complex64::from(-1.0));
        let cg = cz.apply(&g)?;
        let ng = an.apply(&g);
        for (idx, (s, side)) in [(1.0, Side::Interior), (-1.0, Side::Exterior)].into_iter().enumerate() {
            let s = Complex64::from(s);
            // (A/2 + s i alpha.N) phi
            let apply = |phi: &DensityVector| a.apply(phi).scaled(Complex64::from(0.5)).axpy(s * i, &an.apply(phi));
            let target = g.scaled(-s * half_i * magnetic);
            let jump = cg.axpy(-s * half_i, &ng);
            let lhs = apply(&tu.axpy(Complex64::from(1.0), &jump));
            algebraic[idx] = algebraic[idx].max(lhs.sub(&target).norm(w) / gn);
            unhalved[idx] = unhalved[idx].max(lhs.sub(&g.scaled(-s * i * magnetic)).norm(w) / gn);
            let trace = nontangential_trace(disc, &g, &p, side, &options.trace)?;
            let lhs = apply(&tu.axpy(Complex64::from(1.0), &trace));
            traced[idx] = traced[idx].max(lhs.sub(&target).norm(w) / gn);
        }
    }
    let right_side = magnetic.abs() / 2.0;
    let max = |v: &[f64; 2]| v[0].max(v[1]);
    Ok(PenetrabilityResidual {
        samples: options.samples.max(1),
        algebraic,
        traced,
        against_unhalved: unhalved,
        right_side,
        penetrable: right_side > 10.0 * max(&algebraic) && right_side > 2.0 * max(&traced),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyIdentityReport {
    pub energy: f64,
    pub mass: f64,
    /// `B^a_{4,+} = -4 (alpha.N) C^a (alpha.N) (1/4 + (C^a)^2)` on smooth densities.
    pub factorization_defect: f64,
    /// `sigma_min(B^a_{4,+})` in the weighted metric.
    pub sigma_min: f64,
    /// `sigma_min(4 C^a) * sigma_min(1/4 + (C^a)^2)`, the bound implied by the factorization.
    pub sigma_min_bound: f64,
    /// Largest entry of the sandwiched weight-4 operator `-C^0 + C^0` at `a = 0`.
    pub sandwiched_at_zero: f64,
    /// Idempotence defects of `1/2 -+ i (alpha.N) C^a` and `1/2 -+ i C^a (alpha.N)`.
    pub projector_defects: [f64; 4],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CauchyOptions {
    pub samples: usize,
    pub seed: u64,
    pub iterations: usize,
}

impl Default for CauchyOptions {
    fn default() -> Self {
        Self {
            samples: 4,
            seed: 42,
            iterations: 30,
        }
    }
}

pub fn cauchy_coupling_identities(disc: &Discretization, energy: f64, mass: f64, options: &CauchyOptions) -> Result<CauchyIdentityReport> {
    let p = SpectralParam::gap(energy, mass)?;
    let ca = disc.cauchy(&p);
    let an = disc.alpha_normal();
    let coupled = disc.coupled_with(&Coupling::Cauchy { energy, weight: 4.0 }, &ca, MinusForm::Inverse)?.0;
    let (samples, seed) = (options.samples, options.seed);
    let factorization_defect = smooth_defect(disc, 4, samples, seed, |g| {
        let c = |h: &DensityVector| ca.apply(h);
        let inner = g.scaled(Complex64::from(0.25)).axpy(Complex64::from(1.0), &c(&c(g)?)?);
        let rhs = an.apply(&c(&an.apply(&inner))?).scaled(Complex64::from(-4.0));
        Ok(coupled.apply(g)?.sub(&rhs))
    })?;

    let smallest = |op: &BoundaryOperator| LuSolver::new(op.similarity_form().as_ref()).smallest_singular_value(options.iterations, seed);
    let sigma_min = smallest(&coupled);
    drop(coupled);
    let mut shifted = ca.compose(&ca)?;
    shifted.add_identity(Complex64::from(0.25));
    let sigma_min_bound = 4.0 * smallest(&ca) * smallest(&shifted);
    drop(shifted);

    let project = |sign: f64, transposed: bool, g: &DensityVector| -> Result<DensityVector> {
        let x = if transposed { ca.apply(&an.apply(g))? } else { an.apply(&ca.apply(g)?) };
        Ok(g.scaled(Complex64::from(0.5)).axpy(Complex64::new(0.0, sign), &x))
    };
    let mut projector_defects = [0.0; 4];
    for (slot, (sign, transposed)) in [(-1.0, false), (1.0, false), (-1.0, true), (1.0, true)].into_iter().enumerate() {
        projector_defects[slot] = smooth_defect(disc, 4, samples, seed, |g| {
            let pg = project(sign, transposed, g)?;
            Ok(project(sign, transposed, &pg)?.sub(&pg))
        })?;
    }
    drop(ca);

    let p0 = SpectralParam::gap(0.0, mass)?;
    let c0 = disc.cauchy(&p0);
    let degenerate = disc
        .coupled_with(&Coupling::SandwichedCauchy { energy: 0.0, weight: 4.0 }, &c0, MinusForm::Inverse)?
        .0;
    let sandwiched_at_zero = degenerate
        .matrix
        .col_iter()
        .flat_map(|c| c.iter().map(|v| v.norm()).collect::<Vec<_>>())
        .fold(0.0, f64::max);

    Ok(CauchyIdentityReport {
        energy,
        mass,
        factorization_defect,
        sigma_min,
        sigma_min_bound,
        sandwiched_at_zero,
        projector_defects,
    })
}

/// One candidate normalisation `c * (alpha.N) B_- (alpha.N)` for the inverse of `B_+`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseCandidate {
    pub label: String,
    pub prefactor: f64,
    /// Worst relative distance to the direct solve `B_+^{-1} g` over smooth densities.
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagneticInverseReport {
    pub magnetic: f64,
    /// Mean of `<g, P g> / <g, g>` over smooth densities, `P = (m N) B_- (m N) B_+`.
    pub product_scalar: f64,
    /// `1 + magnetic^2 / 4`.
    pub expected_scalar: f64,
    /// Worst `||P g - expected g|| / (expected ||g||)` on smooth densities.
    pub product_defect: f64,
    pub candidates: Vec<InverseCandidate>,
    /// Label of the candidate closest to the dense inverse.
    pub selected: String,
    pub sigma_min: f64,
}

pub fn magnetic_inverse_check(disc: &Discretization, magnetic: f64, p: &SpectralParam, options: &CauchyOptions) -> Result<MagneticInverseReport> {
    if magnetic == 0.0 {
        return Err(ShellError::InvalidArgument("the magnetic strength must be nonzero".into()));
    }
    let c = Coupling::Combined {
        scalar: 0.0,
        lorentz: 0.0,
        magnetic,
    };
    let (plus, minus) = disc.coupled_operators(&c, p, MinusForm::Inverse)?;
    let an = disc.alpha_normal();
    let w = &disc.quadrature.weights;
    let scale = Complex64::from(magnetic);
    let product = |g: &DensityVector| -> Result<DensityVector> {
        let x = an.apply(&plus.apply(g)?).scaled(scale);
        Ok(an.apply(&minus.apply(&x)?).scaled(scale))
    };
    let expected_scalar = 1.0 + magnetic * magnetic / 4.0;
    let mut sum = Complex64::new(0.0, 0.0);
    let count = options.samples.max(1);
    for k in 0..count {
        let g = DensityVector::smooth_random(&disc.quadrature, 4, options.seed.wrapping_add(k as u64));
        sum += g.inner(&product(&g)?, w) / g.inner(&g, w);
    }
    let product_scalar = sum.re / count as f64;
    let product_defect = smooth_defect(disc, 4, options.samples, options.seed, |g| {
        Ok(product(g)?.sub(&g.scaled(Complex64::from(expected_scalar))))
    })? / expected_scalar;

    let lu = LuSolver::new(plus.similarity_form().as_ref());
    let sigma_min = lu.smallest_singular_value(options.iterations, options.seed);
    let sqrt_w: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let solve = |g: &DensityVector| -> DensityVector {
        let rhs: Vec<Complex64> = g.values.iter().enumerate().map(|(k, v)| v * sqrt_w[k / 4]).collect();
        let (x, _) = lu.solve(&rhs, 2);
        DensityVector {
            values: x.iter().enumerate().map(|(k, v)| v / sqrt_w[k / 4]).collect(),
            dim: 4,
        }
    };
    let e2 = magnetic * magnetic;
    let mut candidates = Vec::new();
    for (label, prefactor) in [
        ("4 e^2 / (e + 4)", 4.0 * e2 / (magnetic + 4.0)),
        ("4 e^2 / (e^2 + 4)", 4.0 * e2 / (e2 + 4.0)),
    ] {
        let mut error: f64 = 0.0;
        for k in 0..count {
            let g = DensityVector::smooth_random(&disc.quadrature, 4, options.seed.wrapping_add(k as u64));
            let direct = solve(&g);
            let sandwich = an.apply(&minus.apply(&an.apply(&g))?).scaled(Complex64::from(prefactor));
            let e = if prefactor.is_finite() {
                direct.sub(&sandwich).norm(w) / direct.norm(w)
            } else {
                f64::INFINITY
            };
            error = error.max(e);
        }
        candidates.push(InverseCandidate {
            label: label.into(),
            prefactor,
            error,
        });
    }
    let selected = candidates
        .iter()
        .min_by(|a, b| a.error.total_cmp(&b.error))
        .map(|c| c.label.clone())
        .unwrap_or_default();
    Ok(MagneticInverseReport {
        magnetic,
        product_scalar,
        expected_scalar,
        product_defect,
        candidates,
        selected,
        sigma_min,
    })
}
