//! Gap eigenvalues of shell-coupled Dirac operators from zero crossings of the
//! Hermitian branches of the boundary operator `B^a_+`, eigenfunction
//! reconstruction and the coupling maps between equivalent spectra.

use std::f64::consts::PI;
use std::fmt::Write as _;

use faer::{Col, Mat};
use log::{debug, info};
use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShellError};
use crate::gamma::{alpha_dot, cauchy_is_critical, classify, conjugate_and_sign, Coupling};
use crate::geometry::GeometrySpec;
use crate::kernels::{dirac_fd_residual, SpectralParam};
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues, HermitianFactor};
use crate::operators::{evaluate_layer_potential, BoundaryOperator, DensityVector, Discretization, MinusForm, Spinor};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Space in which the branches of `B^a_+` are computed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Subspace {
    /// All nodal degrees of freedom. Grid-scale modes of the Nystrom Cauchy
    /// matrix fill the band `(-1/2, 1/2)`, so couplings with `|A^{-1}| < 1/2`
    /// pick up spurious crossings here.
    Full,
    /// Restrictions of ambient polynomials of total degree `<= degree`, closed
    /// under multiplication by `alpha.N`.
    Smooth { degree: usize },
}

impl Default for Subspace {
    fn default() -> Self {
        Subspace::Smooth { degree: 4 }
    }
}

/// Orthonormal (weighted metric) basis of smooth spinor densities.
#[derive(Clone, Debug)]
pub struct SmoothBasis {
    pub degree: usize,
    /// `W^{1/2} B`: Euclidean-orthonormal columns.
    scaled: Mat<Complex64>,
    /// `B`: nodal values of the basis densities.
    nodal: Mat<Complex64>,
}

impl SmoothBasis {
    pub fn new(disc: &Discretization, degree: usize) -> Result<Self> {
        let q = &disc.quadrature;
        let n = q.len();
        let centre = q.centroid();
        let radius = q.points.iter().map(|p| (p - centre).norm()).fold(0.0, f64::max);
        let mut exps = Vec::new();
        for i in 0..=degree {
            for j in 0..=degree - i {
                for k in 0..=degree - i - j {
                    exps.push([i as i32, j as i32, k as i32]);
                }
            }
        }
        let mono: Vec<Vec<f64>> = q
            .points
            .iter()
            .map(|p| {
                let x = (p - centre) / radius;
                exps.iter().map(|e| x.x.powi(e[0]) * x.y.powi(e[1]) * x.z.powi(e[2])).collect()
            })
            .collect();
        let an: Vec<_> = q.normals.iter().map(alpha_dot).collect();
        let ncand = 8 * exps.len();
        // column 8e + c: monomial e in spinor slot c; 8e + 4 + c: alpha.N times it
        let cand = Mat::from_fn(4 * n, ncand, |row, col| {
            let (node, r) = (row / 4, row % 4);
            let (e, rest) = (col / 8, col % 8);
            let s = q.weights[node].sqrt() * mono[node][e];
            if rest < 4 {
                if r == rest {
                    Complex64::from(s)
                } else {
                    ZERO
                }
            } else {
                an[node][(r, rest - 4)] * s
            }
        });
        let gram = cand.adjoint() * &cand;
        let (vals, vecs) = hermitian_eigen(gram.as_ref())?;
        let top = vals.last().copied().unwrap_or(0.0);
        let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 1e-11 * top).collect();
        if keep.is_empty() || keep.len() > 4 * n {
            return Err(ShellError::InvalidArgument(format!(
                "smooth basis of degree {degree} is degenerate on {n} nodes"
            )));
        }
        let coeff = Mat::from_fn(ncand, keep.len(), |r, c| vecs[(r, keep[c])] / vals[keep[c]].sqrt());
        let scaled = &cand * &coeff;
        let nodal = Mat::from_fn(4 * n, keep.len(), |r, c| scaled[(r, c)] / q.weights[r / 4].sqrt());
        Ok(Self { degree, scaled, nodal })
    }

    pub fn rank(&self) -> usize {
        self.scaled.ncols()
    }

    /// `B^* W M B`, the Galerkin matrix of `M` on the basis.
    pub fn compress(&self, m: &BoundaryOperator) -> Mat<Complex64> {
        let right = &m.matrix * &self.nodal;
        self.scaled.adjoint() * right
    }

    pub fn density(&self, coeff: &[Complex64]) -> DensityVector {
        let c = Col::from_fn(coeff.len(), |i| coeff[i]);
        let v = &self.nodal * &c;
        DensityVector {
            values: v.iter().copied().collect(),
            dim: 4,
        }
    }
}

/// Refuses couplings whose boundary operator is not Fredholm in the gap.
pub fn check_scannable(c: &Coupling) -> Result<()> {
    if let Some(critical) = cauchy_is_critical(c) {
        if critical {
            return Err(ShellError::CriticalCoupling(format!(
                "{} coupling at critical weight: B_+ is compact there and zero crossings do not isolate eigenvalues",
                c.family().name()
            )));
        }
        return Ok(());
    }
    conjugate_and_sign(c)?;
    if classify(c)?.critical {
        return Err(ShellError::CriticalCoupling(format!(
            "{} coupling at a critical strength: the operator domain loses Sobolev regularity and the scan is not meaningful",
            c.family().name()
        )));
    }
    Ok(())
}

/// `B^a_+` for one coupling on one discretization, as a function of the energy `a`.
pub struct GapProblem<'a> {
    pub disc: &'a Discretization,
    pub coupling: Coupling,
    pub mass: f64,
    basis: Option<SmoothBasis>,
}

impl<'a> GapProblem<'a> {
    pub fn new(disc: &'a Discretization, coupling: Coupling, mass: f64, subspace: Subspace) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(ShellError::InvalidMass(mass));
        }
        check_scannable(&coupling)?;
        let basis = match subspace {
            Subspace::Full => None,
            Subspace::Smooth { degree } => Some(SmoothBasis::new(disc, degree)?),
        };
        Ok(Self { disc, coupling, mass, basis })
    }

    pub fn dim(&self) -> usize {
        self.basis.as_ref().map_or(4 * self.disc.nodes(), SmoothBasis::rank)
    }

    pub fn coupled(&self, a: f64) -> Result<BoundaryOperator> {
        let p = SpectralParam::gap(a, self.mass)?;
        Ok(self.disc.coupled_operators(&self.coupling, &p, MinusForm::Inverse)?.0)
    }

    /// Hermitian part of `B` in the orthonormal working basis.
    pub fn hermitian(&self, coupled: &BoundaryOperator) -> Mat<Complex64> {
        let g = match &self.basis {
            Some(b) => b.compress(coupled),
            None => coupled.similarity_form(),
        };
        Mat::from_fn(g.nrows(), g.ncols(), |i, j| (g[(i, j)] + g[(j, i)].conj()) * 0.5)
    }

    pub fn branch_values(&self, a: f64) -> Result<Vec<f64>> {
        hermitian_eigenvalues(self.hermitian(&self.coupled(a)?).as_ref())
    }

    /// Nodal density for coordinates in the working basis.
    pub fn density(&self, coeff: &[Complex64]) -> DensityVector {
        match &self.basis {
            Some(b) => b.density(coeff),
            None => {
                let w = &self.disc.quadrature.weights;
                let values = coeff.iter().enumerate().map(|(k, c)| c / w[k / 4].sqrt()).collect();
                DensityVector { values, dim: 4 }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanOptions {
    pub samples: usize,
    /// Samples lie in `(-edge m, edge m)`.
    pub edge: f64,
    /// Root tolerance on the branch value, in units of `m`.
    pub tol_root: f64,
    /// Branch values stored per sample around the zero crossing index.
    pub branches: usize,
    pub subspace: Subspace,
    /// Probe local minima of the smallest branch magnitude for paired crossings.
    pub adaptive: bool,
    pub max_iter: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            samples: 64,
            edge: 0.999,
            tol_root: 1e-6,
            branches: 6,
            subspace: Subspace::default(),
            adaptive: true,
            max_iter: 80,
        }
    }
}

impl ScanOptions {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(ShellError::InvalidArgument("a scan needs at least two samples".into()));
        }
        if !(self.edge > 0.0 && self.edge < 1.0) {
            return Err(ShellError::InvalidArgument(format!(
                "gap edge fraction must lie in (0, 1), got {}",
                self.edge
            )));
        }
        if !(self.tol_root > 0.0) {
            return Err(ShellError::InvalidArgument("root tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Chebyshev points of the first kind on `(-edge m, edge m)`, increasing.
pub fn chebyshev_samples(count: usize, edge: f64, mass: f64) -> Vec<f64> {
    (0..count)
        .map(|k| -edge * mass * (PI * (2 * k + 1) as f64 / (2 * count) as f64).cos())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub a: f64,
    pub bracket: [f64; 2],
    pub multiplicity: usize,
    /// `max ||B^a g||_w / ||g||_w` over the near-kernel densities, with the unsymmetrised operator.
    pub residual: f64,
    /// Largest `|branch value|` among the crossing branches at `a`.
    pub branch_value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralScan {
    pub coupling: Coupling,
    pub mass: f64,
    pub geometry: GeometrySpec,
    pub nodes: usize,
    pub subspace_dim: usize,
    pub a_samples: Vec<f64>,
    /// Smallest-magnitude branch value at each sample, with sign.
    pub min_eigs: Vec<f64>,
    pub negative_counts: Vec<usize>,
    /// Branch values around the crossing index at each sample.
    pub branches: Vec<Vec<f64>>,
    pub roots: Vec<Root>,
    pub evaluations: usize,
}

struct Sample {
    a: f64,
    values: Vec<f64>,
}

impl Sample {
    fn negatives(&self) -> usize {
        self.values.partition_point(|v| *v < 0.0)
    }

    fn min_abs(&self) -> f64 {
        let k = self.negatives();
        let below = k.checked_sub(1).map(|i| self.values[i]);
        let above = self.values.get(k).copied();
        match (below, above) {
            (Some(b), Some(c)) => {
                if -b < c {
                    b
                } else {
                    c
                }
            }
            (Some(b), None) => b,
            (None, Some(c)) => c,
            (None, None) => f64::NAN,
        }
    }
}

struct Scanner<'p, 'a> {
    problem: &'p GapProblem<'a>,
    options: &'p ScanOptions,
    evaluations: usize,
}

impl Scanner<'_, '_> {
    fn sample(&mut self, a: f64) -> Result<Sample> {
        self.evaluations += 1;
        Ok(Sample {
            a,
            values: self.problem.branch_values(a)?,
        })
    }

    /// Zero of the `idx`-th sorted branch inside `[lo, hi]` (Illinois false position).
    fn refine(&mut self, idx: usize, lo: &Sample, hi: &Sample) -> Result<(f64, f64)> {
        let tol = self.options.tol_root * self.problem.mass;
        let (mut a0, mut f0) = (lo.a, lo.values[idx]);
        let (mut a1, mut f1) = (hi.a, hi.values[idx]);
        if f0.abs() <= tol {
            return Ok((a0, f0.abs()));
        }
        if f1.abs() <= tol {
            return Ok((a1, f1.abs()));
        }
        if f0.signum() == f1.signum() {
            return Err(ShellError::Singular(format!("branch {idx} does not change sign on [{a0}, {a1}]")));
        }
        let mut side = 0i8;
        for _ in 0..self.options.max_iter {
            let mut a = (a0 * f1 - a1 * f0) / (f1 - f0);
            if !(a > a0.min(a1) && a < a0.max(a1)) {
                a = 0.5 * (a0 + a1);
            }
            let f = self.sample(a)?.values[idx];
            if f.abs() <= tol || (a1 - a0).abs() < 1e-14 * self.problem.mass {
                return Ok((a, f.abs()));
            }
            if f.signum() == f1.signum() {
                a1 = a;
                f1 = f;
                if side == -1 {
                    f0 *= 0.5;
                }
                side = -1;
            } else {
                a0 = a;
                f0 = f;
                if side == 1 {
                    f1 *= 0.5;
                }
                side = 1;
            }
        }
        let (a, f) = if f0.abs() < f1.abs() { (a0, f0) } else { (a1, f1) };
        debug!("branch {idx}: iteration cap reached with |value| {}", f.abs());
        Ok((a, f.abs()))
    }

    /// Golden-section probe for a paired crossing hidden between samples.
    fn probe_minimum(&mut self, lo: f64, hi: f64, count: usize) -> Result<Option<(Sample, Sample)>> {
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut x0, mut x1) = (lo, hi);
        let tol = self.options.tol_root * self.problem.mass;
        let mut c = self.sample(x1 - g * (x1 - x0))?;
        let mut d = self.sample(x0 + g * (x1 - x0))?;
        for _ in 0..40 {
            for s in [&c, &d] {
                if s.negatives() != count || s.min_abs().abs() <= tol {
                    let s = Sample {
                        a: s.a,
                        values: s.values.clone(),
                    };
                    let edge = self.sample(if s.a - lo < hi - s.a { lo } else { hi })?;
                    return Ok(Some(if edge.a < s.a { (edge, s) } else { (s, edge) }));
                }
            }
            if c.min_abs().abs() < d.min_abs().abs() {
                x1 = d.a;
                d = c;
                c = self.sample(x1 - g * (x1 - x0))?;
            } else {
                x0 = c.a;
                c = d;
                d = self.sample(x0 + g * (x1 - x0))?;
            }
            if (x1 - x0).abs() < 1e-9 * self.problem.mass {
                break;
            }
        }
        Ok(None)
    }
}

fn crossing_roots(scanner: &mut Scanner, lo: &Sample, hi: &Sample) -> Result<Vec<(f64, [f64; 2], f64)>> {
    let (nl, nh) = (lo.negatives(), hi.negatives());
    let tol = scanner.options.tol_root * scanner.problem.mass;
    let mut out = Vec::new();
    if nl == nh {
        // touching pair: both samples see the same count but a branch sits on zero
        for s in [lo, hi] {
            if s.min_abs().abs() <= tol {
                out.push((s.a, [lo.a, hi.a], s.min_abs().abs()));
            }
        }
        return Ok(out);
    }
    for idx in nl.min(nh)..nl.max(nh) {
        let (a, v) = scanner.refine(idx, lo, hi)?;
        out.push((a, [lo.a, hi.a], v));
    }
    Ok(out)
}

/// Scans `B^a_+` over the given increasing energies.
pub fn scan_at(problem: &GapProblem, a_samples: &[f64], options: &ScanOptions) -> Result<SpectralScan> {
    options.validate()?;
    let m = problem.mass;
    if a_samples.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ShellError::InvalidArgument("energy samples must be strictly increasing".into()));
    }
    if a_samples.iter().any(|a| a.abs() >= m) {
        return Err(ShellError::InvalidArgument(format!(
            "energy samples must lie strictly inside (-{m}, {m})"
        )));
    }
    let mut scanner = Scanner {
        problem,
        options,
        evaluations: 0,
    };
    let mut samples = Vec::with_capacity(a_samples.len());
    for &a in a_samples {
        samples.push(scanner.sample(a)?);
    }
    let mut found = Vec::new();
    for w in samples.windows(2) {
        found.extend(crossing_roots(&mut scanner, &w[0], &w[1])?);
    }
    if options.adaptive && samples.len() >= 3 {
        for k in 1..samples.len() - 1 {
            let (l, c, r) = (&samples[k - 1], &samples[k], &samples[k + 1]);
            let count = c.negatives();
            let local_min = c.min_abs().abs() < l.min_abs().abs() && c.min_abs().abs() < r.min_abs().abs();
            if !local_min || l.negatives() != count || r.negatives() != count {
                continue;
            }
            if let Some((lo, hi)) = scanner.probe_minimum(l.a, r.a, count)? {
                for root in crossing_roots(&mut scanner, &lo, &hi)? {
                    if !found
                        .iter()
                        .any(|f: &(f64, [f64; 2], f64)| (f.0 - root.0).abs() <= 10.0 * options.tol_root * m)
                    {
                        found.push(root);
                    }
                }
            }
        }
    }
    found.sort_by(|x, y| x.0.total_cmp(&y.0));

    // clusters of numerically coincident crossings form one root
    let cluster = 10.0 * options.tol_root * m;
    let mut groups: Vec<Vec<(f64, [f64; 2], f64)>> = Vec::new();
    for f in found {
        match groups.last_mut() {
            Some(g) if f.0 - g.last().unwrap().0 <= cluster => g.push(f),
            _ => groups.push(vec![f]),
        }
    }
    let mut roots = Vec::with_capacity(groups.len());
    for g in groups {
        let a = g.iter().map(|f| f.0).sum::<f64>() / g.len() as f64;
        let bracket = [
            g.iter().map(|f| f.1[0]).fold(f64::INFINITY, f64::min),
            g.iter().map(|f| f.1[1]).fold(f64::NEG_INFINITY, f64::max),
        ];
        let branch_value = g.iter().map(|f| f.2).fold(0.0, f64::max);
        let (_, residuals) = near_kernel(problem, a, g.len())?;
        let residual = residuals.iter().copied().fold(0.0, f64::max);
        roots.push(Root {
            a,
            bracket,
            multiplicity: g.len(),
            residual,
            branch_value,
        });
    }

    let half = options.branches / 2;
    let branches = samples
        .iter()
        .map(|s| {
            let k = s.negatives();
            let lo = k.saturating_sub(half);
            let hi = (lo + options.branches).min(s.values.len());
            s.values[lo..hi].to_vec()
        })
        .collect();
    let scan = SpectralScan {
        coupling: problem.coupling,
        mass: m,
        geometry: problem.disc.quadrature.descriptor.clone(),
        nodes: problem.disc.nodes(),
        subspace_dim: problem.dim(),
        a_samples: samples.iter().map(|s| s.a).collect(),
        min_eigs: samples.iter().map(Sample::min_abs).collect(),
        negative_counts: samples.iter().map(Sample::negatives).collect(),
        branches,
        roots,
        evaluations: scanner.evaluations,
    };
    info!(
        "scan of {} found {} roots in {} evaluations",
        problem.coupling.family().name(),
        scan.roots.len(),
        scan.evaluations
    );
    Ok(scan)
}

/// Full-gap scan on Chebyshev samples.
pub fn scan(problem: &GapProblem, options: &ScanOptions) -> Result<SpectralScan> {
    options.validate()?;
    scan_at(problem, &chebyshev_samples(options.samples, options.edge, problem.mass), options)
}

/// Densities of the `count` branches nearest zero at `a` and their residuals
/// `||B^a g||_w / ||g||_w` (unit weighted norm).
pub fn near_kernel(problem: &GapProblem, a: f64, count: usize) -> Result<(Vec<DensityVector>, Vec<f64>)> {
    let coupled = problem.coupled(a)?;
    let (vals, vecs) = hermitian_eigen(problem.hermitian(&coupled).as_ref())?;
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| vals[i].abs().total_cmp(&vals[j].abs()));
    let w = &problem.disc.quadrature.weights;
    let mut densities = Vec::new();
    let mut residuals = Vec::new();
    for &k in order.iter().take(count.max(1)) {
        let coeff: Vec<Complex64> = vecs.col(k).iter().copied().collect();
        let g = problem.density(&coeff);
        let g = g.scaled(Complex64::from(1.0 / g.norm(w)));
        residuals.push(coupled.apply(&g)?.norm(w));
        densities.push(g);
    }
    Ok((densities, residuals))
}

impl SpectralScan {
    pub fn root_energies(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.a).collect()
    }

    /// Plot-ready table: `a, negatives, min_eig, branch_0, ...`.
    pub fn to_csv(&self) -> String {
        let width = self.branches.iter().map(Vec::len).max().unwrap_or(0);
        let mut s = String::from("a,negatives,min_eig");
        for k in 0..width {
            let _ = write!(s, ",branch_{k}");
        }
        s.push('\n');
        for (i, a) in self.a_samples.iter().enumerate() {
            let _ = write!(s, "{a:.12e},{},{:.12e}", self.negative_counts[i], self.min_eigs[i]);
            for k in 0..width {
                match self.branches[i].get(k) {
                    Some(v) => {
                        let _ = write!(s, ",{v:.12e}");
                    }
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Brute-force oracle: local minima of `log|det|` of the Hermitian working matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeterminantSweep {
    pub a_samples: Vec<f64>,
    pub log_abs_det: Vec<f64>,
    pub roots: Vec<f64>,
}

/// Minimum depth (natural log units) below the neighbouring grid values for a
/// refined minimum to count as a zero of the determinant.
pub const DETERMINANT_DIP: f64 = 8.0;

pub fn determinant_sweep(problem: &GapProblem, a_samples: &[f64]) -> Result<DeterminantSweep> {
    let logdet = |a: f64| -> Result<f64> { Ok(HermitianFactor::new(problem.hermitian(&problem.coupled(a)?).as_ref()).log_det().1) };
    let values = a_samples.iter().map(|&a| logdet(a)).collect::<Result<Vec<_>>>()?;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut roots = Vec::new();
    for k in 1..a_samples.len().saturating_sub(1) {
        if !(values[k] <= values[k - 1] && values[k] <= values[k + 1]) {
            continue;
        }
        let (mut x0, mut x1) = (a_samples[k - 1], a_samples[k + 1]);
        let mut c = x1 - g * (x1 - x0);
        let mut d = x0 + g * (x1 - x0);
        let (mut fc, mut fd) = (logdet(c)?, logdet(d)?);
        while (x1 - x0) > 1e-11 * problem.mass {
            if fc < fd {
                x1 = d;
                d = c;
                fd = fc;
                c = x1 - g * (x1 - x0);
                fc = logdet(c)?;
            } else {
                x0 = c;
                c = d;
                fc = fd;
                d = x0 + g * (x1 - x0);
                fd = logdet(d)?;
            }
        }
        let (best_a, best) = if fc < fd { (c, fc) } else { (d, fd) };
        if best <= values[k - 1].min(values[k + 1]) - DETERMINANT_DIP {
            roots.push(best_a);
        }
    }
    roots.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    Ok(DeterminantSweep {
        a_samples: a_samples.to_vec(),
        log_abs_det: values,
        roots,
    })
}

/// Largest distance from any point of one set to the nearest point of the
/// other, both ways. Two empty sets agree exactly; one empty set against a
/// nonempty one gives infinity.
pub fn set_distance(x: &[f64], y: &[f64]) -> f64 {
    if x.is_empty() && y.is_empty() {
        return 0.0;
    }
    if x.is_empty() || y.is_empty() {
        return f64::INFINITY;
    }
    let one_way = |p: &[f64], r: &[f64]| {
        p.iter()
            .map(|a| r.iter().map(|b| (a - b).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(x, y).max(one_way(y, x))
}

/// Roots of `problem` located near the given energies by local rescans on
/// `[a - half_width, a + half_width]`.
pub fn rescan_near(problem: &GapProblem, energies: &[f64], half_width: f64, samples: usize, options: &ScanOptions) -> Result<Vec<Root>> {
    let m = problem.mass;
    let lim = options.edge * m;
    let mut roots: Vec<Root> = Vec::new();
    for &a in energies {
        let lo = (a - half_width).max(-lim);
        let hi = (a + half_width).min(lim);
        let grid: Vec<f64> = (0..samples).map(|k| lo + (hi - lo) * k as f64 / (samples - 1) as f64).collect();
        let local = scan_at(
            problem,
            &grid,
            &ScanOptions {
                adaptive: false,
                ..options.clone()
            },
        )?;
        for r in local.roots {
            if !roots.iter().any(|x| (x.a - r.a).abs() <= 10.0 * options.tol_root * m) {
                roots.push(r);
            }
        }
    }
    roots.sort_by(|x, y| x.a.total_cmp(&y.a));
    Ok(roots)
}

/// Eigen-density at a root and the layer-potential eigenfunction it generates.
pub struct EigenDensity<'a> {
    pub a: f64,
    /// Orthonormal basis of the near kernel (one element unless degenerate).
    pub densities: Vec<DensityVector>,
    pub residuals: Vec<f64>,
    disc: &'a Discretization,
    mass: f64,
}

pub fn eigen_density<'a>(problem: &GapProblem<'a>, root: &Root) -> Result<EigenDensity<'a>> {
    let (densities, residuals) = near_kernel(problem, root.a, root.multiplicity)?;
    Ok(EigenDensity {
        a: root.a,
        densities,
        residuals,
        disc: problem.disc,
        mass: problem.mass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenfunctionCheck {
    /// Largest relative finite-difference residual of `(H - a) phi`.
    pub pde_residual: f64,
    /// Fitted exponential decay rate of `r |phi|` along outward rays.
    pub decay_rate: f64,
    /// `sqrt(m^2 - a^2)`.
    pub expected_rate: f64,
}

impl EigenDensity<'_> {
    pub fn param(&self) -> SpectralParam {
        SpectralParam::gap(self.a, self.mass).expect("root inside the gap")
    }

    /// `phi(x) = Phi^a[g](x)` for the `k`-th near-kernel density.
    pub fn eigenfunction(&self, k: usize, pts: &[Vector3<f64>]) -> Result<Vec<Spinor>> {
        evaluate_layer_potential(&self.disc.quadrature, &self.densities[k], &self.param(), pts)
    }

    /// Finite-difference residual at points `>= 5h` off the surface and a decay-rate fit.
    pub fn check(&self, k: usize) -> Result<EigenfunctionCheck> {
        let q = &self.disc.quadrature;
        let p = self.param();
        let h = q.h;
        let centre = q.centroid();
        let dirs = [Vector3::x(), Vector3::y(), Vector3::z(), Vector3::new(1.0, 1.0, 1.0).normalize()];
        let extent = |d: &Vector3<f64>| q.points.iter().map(|x| (x - centre).dot(d)).fold(0.0, f64::max);
        let phi = |x: &Vector3<f64>| -> Spinor {
            evaluate_layer_potential(q, &self.densities[k], &p, std::slice::from_ref(x))
                .map(|v| v[0])
                .unwrap_or_else(|_| Spinor::zeros())
        };
        let mut pde: f64 = 0.0;
        let mut rates = Vec::new();
        for d in &dirs {
            let r0 = extent(d);
            let x = centre + d * (r0 + 5.0 * h.max(0.1 * r0));
            let (res, scale) = dirac_fd_residual(phi, &x, p.z(), self.mass, 1e-3 * r0.max(1.0));
            pde = pde.max(res.norm() / scale.max(f64::MIN_POSITIVE));
            let radii: Vec<f64> = (0..6).map(|j| r0 * (1.5 + 0.5 * j as f64)).collect();
            let pts: Vec<Vector3<f64>> = radii.iter().map(|r| centre + d * *r).collect();
            let vals = evaluate_layer_potential(q, &self.densities[k], &p, &pts)?;
            let ys: Vec<f64> = vals.iter().zip(&radii).map(|(v, r)| (r * v.norm()).ln()).collect();
            rates.push(-least_squares_slope(&radii, &ys));
        }
        let decay_rate = rates.iter().sum::<f64>() / rates.len() as f64;
        Ok(EigenfunctionCheck {
            pde_residual: pde,
            decay_rate,
            expected_rate: (self.mass * self.mass - self.a * self.a).sqrt(),
        })
    }
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Mapped parameters `(-4 s_1/sgn, -4 s_2/sgn, 4 s_3/sgn)` of a combined
/// coupling with sign scalar `sgn = scalar^2 - lorentz^2 - magnetic^2`.
pub fn mapped_coupling(c: &Coupling) -> Result<Coupling> {
    let (scalar, lorentz, magnetic) = c.as_combined().ok_or(ShellError::NoTransform(c.family().name()))?;
    let sgn = conjugate_and_sign(&Coupling::Combined { scalar, lorentz, magnetic })?.sign();
    Ok(Coupling::Combined {
        scalar: -4.0 * scalar / sgn,
        lorentz: -4.0 * lorentz / sgn,
        magnetic: 4.0 * magnetic / sgn,
    })
}

/// `(scalar, lorentz) -> (-4 scalar, -4 lorentz) / (scalar^2 - lorentz^2)`.
pub fn shell_map_em(scalar: f64, lorentz: f64) -> Result<(f64, f64)> {
    let s = scalar * scalar - lorentz * lorentz;
    if s == 0.0 {
        return Err(ShellError::DegenerateCoupling);
    }
    Ok((-4.0 * scalar / s, -4.0 * lorentz / s))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrespondenceReport {
    pub roots: Vec<f64>,
    pub mapped_roots: Vec<f64>,
    /// Set distance between the roots and the mapped roots at the same energy.
    pub same_energy: f64,
    /// Set distance between the roots and the negated mapped roots.
    pub reflected_energy: f64,
    pub tolerance: f64,
    /// `"same"`, `"reflected"`, `"both"` or `"neither"`.
    pub supported: String,
}

pub fn spectral_correspondence(scan: &SpectralScan, mapped: &SpectralScan, tolerance: f64) -> CorrespondenceReport {
    let roots = scan.root_energies();
    let mapped_roots = mapped.root_energies();
    let reflected: Vec<f64> = mapped_roots.iter().map(|a| -a).collect();
    let same_energy = set_distance(&roots, &mapped_roots);
    let reflected_energy = set_distance(&roots, &reflected);
    let supported = match (same_energy <= tolerance, reflected_energy <= tolerance) {
        (true, true) => "both",
        (true, false) => "same",
        (false, true) => "reflected",
        (false, false) => "neither",
    };
    CorrespondenceReport {
        roots,
        mapped_roots,
        same_energy,
        reflected_energy,
        tolerance,
        supported: supported.into(),
    }
}

/// Which sufficient condition for self-adjointness holds with the given norm estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sufficiency {
    /// `0 < |e^2 - l^2| < 1/||C||^2`.
    SmallCoupling,
    /// `l^2 > e^2`.
    LorentzDominated,
    /// `e^2 > l^2` with `e^2 - l^2 < 1/||W||^2` or `e^2 - l^2 > 16 ||W||^2`.
    MasslessBound,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimates {
    pub cauchy: f64,
    pub massless: f64,
}

pub fn sufficiency_classifier(scalar: f64, lorentz: f64, norms: &NormEstimates) -> Sufficiency {
    let s = scalar * scalar - lorentz * lorentz;
    if (s - 4.0).abs() <= 1e-12 * 4.0 {
        return Sufficiency::None;
    }
    if s != 0.0 && s.abs() < 1.0 / (norms.cauchy * norms.cauchy) {
        return Sufficiency::SmallCoupling;
    }
    if lorentz * lorentz > scalar * scalar {
        return Sufficiency::LorentzDominated;
    }
    let w2 = norms.massless * norms.massless;
    if s > 0.0 && (s < 1.0 / w2 || s > 16.0 * w2) {
        return Sufficiency::MasslessBound;
    }
    Sufficiency::None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn em_map_is_an_involution() {
        for (e, l) in [(1.0, 0.0), (0.3, 1.7), (-2.5, 0.4)] {
            let (e1, l1) = shell_map_em(e, l).unwrap();
            let (e2, l2) = shell_map_em(e1, l1).unwrap();
            assert!((e2 - e).abs() < 1e-14 && (l2 - l).abs() < 1e-14);
        }
        assert_eq!(shell_map_em(1.0, 0.0).unwrap(), (-4.0, 0.0));
        assert!(shell_map_em(1.0, 1.0).is_err());
    }

    #[test]
    fn mapped_coupling_of_unit_scalar() {
        let t = mapped_coupling(&Coupling::Combined {
            scalar: 1.0,
            lorentz: 0.0,
            magnetic: 0.0,
        })
        .unwrap();
        assert_eq!(
            t,
            Coupling::Combined {
                scalar: -4.0,
                lorentz: 0.0,
                magnetic: 0.0
            }
        );
    }

    #[test]
    fn classifier_cases() {
        let n = NormEstimates { cauchy: 0.8, massless: 0.5 };
        assert_eq!(sufficiency_classifier(0.0, 1.0, &n), Sufficiency::SmallCoupling);
        assert_eq!(sufficiency_classifier(0.5, 3.0, &n), Sufficiency::LorentzDominated);
        assert_eq!(sufficiency_classifier(2.0, 0.0, &n), Sufficiency::None);
        assert_eq!(sufficiency_classifier(1.5, 0.0, &n), Sufficiency::MasslessBound);
        assert_eq!(sufficiency_classifier(3.0, 0.0, &n), Sufficiency::MasslessBound);
    }

    #[test]
    fn chebyshev_samples_are_interior_and_increasing() {
        let s = chebyshev_samples(64, 0.999, 1.0);
        assert!(s.windows(2).all(|w| w[1] > w[0]));
        assert!(s[0] > -0.999 && s[63] < 0.999);
    }

    #[test]
    fn set_distance_cases() {
        assert_eq!(set_distance(&[], &[]), 0.0);
        assert!(set_distance(&[0.1], &[]).is_infinite());
        assert!((set_distance(&[0.1, 0.5], &[0.12]) - 0.38).abs() < 1e-15);
    }
}
