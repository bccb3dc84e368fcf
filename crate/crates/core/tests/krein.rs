mod common;

use nalgebra::{Vector3, Vector4};
use num_complex::Complex64;
use shellspec_core::krein::{free_resolvent_trace, free_resolvent_trace_adjoint, krein_pde_residual, KreinOptions, KreinSolver, PointSource};
use shellspec_core::spectral::{rescan_near, GapProblem, ScanOptions, Subspace};
use shellspec_core::{Coupling, ShellError, SpectralParam};

fn source() -> PointSource {
    let spinor = Vector4::new(
        Complex64::new(0.6, 0.0),
        Complex64::new(0.0, 0.8),
        Complex64::from(0.0),
        Complex64::from(0.0),
    );
    PointSource::new(Vector3::new(0.0, 0.3, 2.5), spinor)
}

#[test]
fn boundary_condition_and_pde() {
    let disc = common::sphere(6);
    let opts = KreinOptions::default();
    let x = Vector3::new(2.4, -0.5, 0.7);
    for z in [Complex64::new(0.3, 0.0), Complex64::new(0.2, 0.5)] {
        let p = SpectralParam::new(z, 1.0).unwrap();
        let solver = KreinSolver::new(&disc, Coupling::Electrostatic { strength: 1.0 }, p, &opts).unwrap();
        let bc = solver.boundary_condition_defect(&source(), &opts).unwrap();
        assert!(bc <= 1e-8, "z={z}: {bc:.2e}");
        let pde = krein_pde_residual(&solver, &source(), &x, 1e-3).unwrap();
        assert!(pde <= 1e-3, "z={z}: {pde:.2e}");
        let out = solver.apply(&source(), &[x], &opts).unwrap();
        assert!(out.correction_norm() > 0.0 && out.solve_residual < 1e-10);
    }
}

#[test]
fn green_function_symmetry() {
    let disc = common::sphere(5);
    let opts = KreinOptions::default();
    let c = Coupling::Electrostatic { strength: 1.0 };
    let p = SpectralParam::new(Complex64::new(0.2, 0.5), 1.0).unwrap();
    let x = Vector3::new(2.4, -0.5, 0.7);
    let y = Vector3::new(0.0, 0.3, 2.5);
    let g1 = KreinSolver::new(&disc, c, p, &opts).unwrap().green(&x, &y, &opts).unwrap();
    let g2 = KreinSolver::new(&disc, c, p.conj(), &opts).unwrap().green(&y, &x, &opts).unwrap();
    assert!(
        (g1 - g2.adjoint()).norm() <= 1e-2 * g1.norm(),
        "{:.2e}",
        (g1 - g2.adjoint()).norm() / g1.norm()
    );
}

#[test]
fn refuses_at_a_gap_eigenvalue() {
    let disc = common::sphere(6);
    let c = Coupling::Electrostatic { strength: 1.0 };
    let problem = GapProblem::new(
        &disc,
        Coupling::Combined {
            scalar: 1.0,
            lorentz: 0.0,
            magnetic: 0.0,
        },
        1.0,
        Subspace::default(),
    )
    .unwrap();
    let roots = rescan_near(&problem, &[-0.652], 0.01, 3, &ScanOptions::default()).unwrap();
    let root = roots[0].a;
    let err = KreinSolver::new(&disc, c, SpectralParam::gap(root, 1.0).unwrap(), &KreinOptions::default()).err();
    assert!(matches!(err, Some(ShellError::Singular(_))), "{err:?}");
}

#[test]
fn free_traces_agree() {
    let disc = common::sphere(4);
    let p = SpectralParam::new(Complex64::new(0.1, 0.3), 1.0).unwrap();
    let a = free_resolvent_trace(&source(), &disc, &p).unwrap();
    let b = free_resolvent_trace_adjoint(&source(), &disc, &p).unwrap();
    let w = &disc.quadrature.weights;
    assert!(a.sub(&b).norm(w) <= 1e-14 * a.norm(w));
    let on_node = PointSource::basis(disc.quadrature.points[0], 0);
    assert!(matches!(free_resolvent_trace(&on_node, &disc, &p), Err(ShellError::CoincidentPoints)));
}
