mod common;

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use shellspec_core::diagnostics::double_layer_on_constants;
use shellspec_core::geometry::{build_quadrature, GeometrySpec, Shape, Side};
use shellspec_core::operators::identities::{fitted_order, identity_suite, observed_orders, IdentityOptions};
use shellspec_core::operators::{nontangential_trace, BoundaryOperator, DensityVector, Discretization, NearFieldOptions, TraceOptions};
use shellspec_core::{ShellError, SpectralParam};

#[test]
fn identity_suite_passes_on_a_coarse_sphere() {
    let disc = common::sphere(6);
    let report = identity_suite(&disc, &IdentityOptions::default()).unwrap();
    assert!(report.passed(), "{:#?}", report.failures());
    assert!(!report.lower_order_fallback);
    let sq = report.get("cauchy_square[a=0]").unwrap();
    assert!(sq.refining && sq.value > 0.0);
    assert!(report.get("massless_norm").unwrap().value >= 0.49);
}

#[test]
fn quadrature_defects_shrink_under_refinement() {
    let opts = IdentityOptions {
        energies: vec![0.5],
        ..Default::default()
    };
    let reports: Vec<_> = [4, 8].iter().map(|&n| identity_suite(&common::sphere(n), &opts).unwrap()).collect();
    let hs: Vec<f64> = reports.iter().map(|r| r.h).collect();
    for name in ["cauchy_square[a=0.5]", "massless_square", "calderon_idempotence+[a=0.5]"] {
        let e: Vec<f64> = reports.iter().map(|r| r.get(name).unwrap().value).collect();
        let order = observed_orders(&hs, &e)[0];
        assert!(order >= 1.0, "{name}: {e:?} order {order}");
    }
}

#[test]
fn order_fit_of_exact_power_law() {
    let hs = [0.4, 0.2, 0.1];
    let e: Vec<f64> = hs.iter().map(|h| 3.0 * h * h).collect();
    assert!((fitted_order(&hs, &e) - 2.0).abs() < 1e-12);
}

#[test]
fn jump_relations_on_both_sides() {
    let disc = common::sphere(6);
    let p = SpectralParam::gap(0.3, 1.0).unwrap();
    let c = disc.cauchy(&p);
    let an = disc.alpha_normal();
    let w = &disc.quadrature.weights;
    for (sign, side) in [(1.0, Side::Interior), (-1.0, Side::Exterior)] {
        for seed in 0..4 {
            let g = DensityVector::smooth_random(&disc.quadrature, 4, seed);
            let trace = nontangential_trace(&disc, &g, &p, side, &TraceOptions::default()).unwrap();
            let expect = c.apply(&g).unwrap().axpy(Complex64::new(0.0, -0.5 * sign), &an.apply(&g));
            let err = trace.sub(&expect).norm(w) / g.norm(w);
            assert!(err < 5e-2, "{side:?} seed {seed}: {err:.3e}");
        }
    }
    let bad = TraceOptions { levels: vec![1.0, 2.0] };
    let g = DensityVector::smooth_random(&disc.quadrature, 4, 0);
    assert!(nontangential_trace(&disc, &g, &p, Side::Interior, &bad).is_err());
}

#[test]
fn harmonic_single_layer_of_one_is_the_radius() {
    let disc = common::sphere(6);
    // a tiny mass makes S^0 the Laplace single layer
    let s = disc.single_layer(&SpectralParam::gap(0.0, 1e-8).unwrap());
    let one = DensityVector {
        values: vec![Complex64::from(1.0); disc.nodes()],
        dim: 1,
    };
    let v = s.apply(&one).unwrap();
    let err = v.values.iter().map(|x| (x - 1.0).norm()).fold(0.0, f64::max);
    assert!(err < 5e-3, "{err:.3e}");
}

#[test]
fn double_layer_of_one_is_minus_half() {
    let (mean, spread) = double_layer_on_constants(&common::sphere(6)).unwrap();
    assert!((mean + 0.5).abs() < 5e-3 && spread < 1e-2, "{mean} {spread}");
}

#[test]
fn quadrature_integrates_the_area() {
    let rel = |spec: &GeometrySpec| (build_quadrature(spec).unwrap().area() / spec.analytic_area().unwrap() - 1.0).abs();
    assert!(rel(&GeometrySpec::sphere(1.0, 6)) < 1e-3);
    assert!(rel(&GeometrySpec::sphere(1.0, 12)) < 2e-5);
    assert!(rel(&GeometrySpec::new(Shape::Torus { major: 1.0, minor: 0.4 }, 0)) < 1e-12);
    for spec in [
        GeometrySpec::sphere(1.0, 6),
        GeometrySpec::new(Shape::Torus { major: 1.0, minor: 0.4 }, 0),
        GeometrySpec::with_nodes_per_edge(Shape::Ellipsoid { semi_axes: [1.0, 0.8, 0.6] }, 6),
    ] {
        let q = build_quadrature(&spec).unwrap();
        assert!(q.flux_of_normal().norm() < 1e-8 * q.area(), "{:?}", spec.shape);
    }
    assert!((GeometrySpec::sphere(2.0, 4).analytic_area().unwrap() - 16.0 * PI).abs() < 1e-12);
}

#[test]
fn rounded_cube_area_converges() {
    // curvature jumps where faces meet the rounding, so the rule is only low order here
    let shape = Shape::RoundedCube { edge: 2.0, rounding: 0.3 };
    let errors: Vec<f64> = [6, 12, 24]
        .iter()
        .map(|&n| {
            let spec = GeometrySpec::with_nodes_per_edge(shape.clone(), n);
            (build_quadrature(&spec).unwrap().area() / spec.analytic_area().unwrap() - 1.0).abs()
        })
        .collect();
    assert!(errors[0] < 3e-2 && errors[1] < errors[0] && errors[2] < errors[1], "{errors:?}");
}

#[test]
fn invalid_geometry_is_rejected() {
    let bad = GeometrySpec::new(Shape::Torus { major: 0.5, minor: 0.6 }, 0);
    assert!(matches!(build_quadrature(&bad), Err(ShellError::Geometry(_))));
    let missing = GeometrySpec::new(
        Shape::Mesh {
            path: "/nonexistent/shell.off".into(),
        },
        0,
    );
    assert!(build_quadrature(&missing).is_err());
}

fn octahedron(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("octa.off");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "OFF\n6 8 0").unwrap();
    for v in ["1 0 0", "-1 0 0", "0 1 0", "0 -1 0", "0 0 1", "0 0 -1"] {
        writeln!(f, "{v}").unwrap();
    }
    for t in ["0 2 4", "2 1 4", "1 3 4", "3 0 4", "2 0 5", "1 2 5", "3 1 5", "0 3 5"] {
        writeln!(f, "3 {t}").unwrap();
    }
    path
}

#[test]
fn mesh_input_uses_the_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GeometrySpec::new(
        Shape::Mesh {
            path: octahedron(dir.path()),
        },
        2,
    );
    let disc = Discretization::new(&spec, &NearFieldOptions::default()).unwrap();
    assert!(disc.is_mesh());
    assert_eq!(disc.nodes(), 8 * 16);
    let q = &disc.quadrature;
    assert!((q.area() - 4.0 * 3f64.sqrt()).abs() < 1e-12);
    let c = disc.cauchy(&SpectralParam::gap(0.0, 1.0).unwrap());
    assert!(c.matrix.col_iter().all(|col| col.iter().all(|v| v.is_finite())));
}

#[test]
fn open_mesh_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("open.off");
    std::fs::write(&path, "OFF\n4 2 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n3 0 1 3\n").unwrap();
    let spec = GeometrySpec::new(Shape::Mesh { path }, 0);
    assert!(matches!(build_quadrature(&spec), Err(ShellError::Mesh { .. })));
}

#[test]
fn operator_dump_round_trip() {
    let disc = common::sphere(3);
    let p = SpectralParam::new(Complex64::new(0.2, 0.1), 1.0).unwrap();
    let c = disc.cauchy(&p);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.bin");
    c.dump(&path).unwrap();
    let (dim, nodes, z, mass, m) = BoundaryOperator::read_dump(&path).unwrap();
    assert_eq!((dim, nodes, z, mass), (4, disc.nodes(), p.z(), 1.0));
    assert_eq!(m, c.matrix);
    std::fs::write(&path, b"short").unwrap();
    assert!(BoundaryOperator::read_dump(&path).is_err());
}

#[test]
fn dimension_mismatch_is_an_error() {
    let disc = common::sphere(3);
    let c = disc.cauchy(&SpectralParam::gap(0.0, 1.0).unwrap());
    let g = DensityVector::smooth_random(&disc.quadrature, 2, 0);
    assert!(matches!(c.apply(&g), Err(ShellError::Dimension { .. })));
    assert!(disc.massless().lift(2).is_err());
}
