use nalgebra::Vector3;
use num_complex::Complex64;
use proptest::prelude::*;
use shellspec_core::gamma::{conjugate_and_sign, coupling_matrix, dirac, identity, max_abs, max_diff, ALGEBRA_TOL};
use shellspec_core::kernels::{fundamental_solution, single_layer_kernel};
use shellspec_core::operators::{extrapolate_to_zero, Spinor};
use shellspec_core::spectral::{mapped_coupling, set_distance, shell_map_em};
use shellspec_core::{Coupling, SpectralParam};

fn unit_vector() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0..1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(c, phi)| {
        let s = (1.0 - c * c).sqrt();
        Vector3::new(s * phi.cos(), s * phi.sin(), c)
    })
}

fn separation() -> impl Strategy<Value = Vector3<f64>> {
    (unit_vector(), 0.05..3.0f64).prop_map(|(d, r)| d * r)
}

fn off_cut() -> impl Strategy<Value = SpectralParam> {
    (-3.0..3.0f64, 0.05..2.0f64, prop::bool::ANY)
        .prop_map(|(re, im, up)| SpectralParam::new(Complex64::new(re, if up { im } else { -im }), 1.0).unwrap())
}

fn local_coupling() -> impl Strategy<Value = Coupling> {
    (0usize..9, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(k, s, l, m)| match k {
        0 => Coupling::Electrostatic { strength: s },
        1 => Coupling::Lorentz { strength: s },
        2 => Coupling::Magnetic { strength: s },
        3 => Coupling::ModifiedElectrostatic { strength: s },
        4 => Coupling::ModifiedLorentz { strength: s },
        5 => Coupling::ModifiedMagnetic { strength: s },
        6 => Coupling::AnomalousMagnetic { strength: s },
        7 => Coupling::ModifiedAnomalousMagnetic { strength: s },
        _ => Coupling::Combined {
            scalar: s,
            lorentz: l,
            magnetic: m,
        },
    })
}

proptest! {
    #[test]
    fn coupling_matrices_are_hermitian(c in local_coupling(), n in unit_vector()) {
        let a = coupling_matrix(&c, &n).unwrap();
        prop_assert!(max_diff(&a, &a.adjoint()) <= ALGEBRA_TOL * (1.0 + max_abs(&a)));
    }

    #[test]
    fn conjugate_gives_the_sign_scalar(c in local_coupling(), n in unit_vector()) {
        if let Ok(conj) = conjugate_and_sign(&c) {
            let a = coupling_matrix(&c, &n).unwrap();
            let expect = identity() * Complex64::from(conj.sign());
            prop_assert!(max_diff(&(a * conj.at(&n)), &expect) <= 1e-12 * (1.0 + conj.sign().abs()));
        }
    }

    #[test]
    fn coupling_map_is_an_involution(s in -3.0..3.0f64, l in -3.0..3.0f64, m in -3.0..3.0f64) {
        let sgn: f64 = s * s - l * l - m * m;
        prop_assume!(sgn.abs() > 1e-2);
        let c = Coupling::Combined { scalar: s, lorentz: l, magnetic: m };
        let back = mapped_coupling(&mapped_coupling(&c).unwrap()).unwrap();
        let (s2, l2, m2) = back.as_combined().unwrap();
        prop_assert!((s2 - s).abs() + (l2 - l).abs() + (m2 - m).abs() < 1e-9 * (1.0 + s.abs() + l.abs() + m.abs()));
        let (a, b) = shell_map_em(s, l).unwrap_or((0.0, 0.0));
        if (s * s - l * l).abs() > 1e-2 {
            let (a2, b2) = shell_map_em(a, b).unwrap();
            prop_assert!((a2 - s).abs() + (b2 - l).abs() < 1e-9 * (1.0 + s.abs() + l.abs()));
        }
    }

    #[test]
    fn kernel_adjoint_symmetry(x in separation(), p in off_cut()) {
        let lhs = fundamental_solution(&x, &p).unwrap().adjoint();
        let rhs = fundamental_solution(&(-x), &p.conj()).unwrap();
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-14 * max_abs(&lhs).max(1.0));
    }

    #[test]
    fn gamma5_beta_anticommutator_holds(x in separation(), p in off_cut()) {
        let g5b = dirac().gamma5 * dirac().beta;
        let phi = fundamental_solution(&x, &p).unwrap();
        let expect = g5b * (single_layer_kernel(&x, &p).unwrap() * p.z() * 2.0);
        prop_assert!(max_diff(&(g5b * phi + phi * g5b), &expect) <= 1e-13 * max_abs(&phi).max(1.0));
    }

    #[test]
    fn cut_values_are_rejected(a in 1.0..5.0f64, sign in prop::bool::ANY) {
        let a = if sign { a } else { -a };
        prop_assert!(SpectralParam::gap(a, 1.0).is_err());
    }

    #[test]
    fn set_distance_is_symmetric(x in prop::collection::vec(-1.0..1.0f64, 1..6), y in prop::collection::vec(-1.0..1.0f64, 1..6)) {
        prop_assert_eq!(set_distance(&x, &y), set_distance(&y, &x));
        prop_assert_eq!(set_distance(&x, &x), 0.0);
    }

    #[test]
    fn extrapolation_is_exact_on_low_degree(c in prop::collection::vec(-2.0..2.0f64, 4)) {
        let f = |t: f64| Spinor::from_element(Complex64::from(c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t));
        let ts = [0.8, 0.4, 0.2, 0.1];
        let vs: Vec<Spinor> = ts.iter().map(|&t| f(t)).collect();
        prop_assert!((extrapolate_to_zero(&ts, &vs) - f(0.0)).norm() < 1e-12);
    }
}
