use nalgebra::Vector3;
use num_complex::Complex64;
use shellspec_core::gamma::{
    alpha_dot, anticommutator, beta_transform, classify, conjugate_and_sign, coupling_matrix, dirac, gamma_transform, identity, intertwines, max_abs,
    max_diff, pauli, projector_defect, sample_normals, transform_phase, Classification, ALGEBRA_TOL,
};
use shellspec_core::{Coupling, ShellError, SpinorMatrix};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn one_parameter(strength: f64) -> [Coupling; 8] {
    [
        Coupling::Electrostatic { strength },
        Coupling::Lorentz { strength },
        Coupling::Magnetic { strength },
        Coupling::ModifiedElectrostatic { strength },
        Coupling::ModifiedLorentz { strength },
        Coupling::ModifiedMagnetic { strength },
        Coupling::AnomalousMagnetic { strength },
        Coupling::ModifiedAnomalousMagnetic { strength },
    ]
}

#[test]
fn clifford_relations() {
    let g = dirac();
    let two = identity() * Complex64::from(2.0);
    for j in 0..3 {
        for k in 0..3 {
            let expect = if j == k { two } else { SpinorMatrix::zeros() };
            assert!(max_diff(&anticommutator(&g.alpha[j], &g.alpha[k]), &expect) == 0.0);
        }
        assert!(max_abs(&anticommutator(&g.alpha[j], &g.beta)) == 0.0);
        assert!(max_diff(&(g.alpha[j].adjoint()), &g.alpha[j]) == 0.0);
    }
    let g5 = g.alpha[0] * g.alpha[1] * g.alpha[2] * (-I);
    assert!(max_diff(&g5, &g.gamma5) == 0.0);
    let p = pauli();
    assert!(max_diff(&(p[0] * p[1]), &(p[2] * I)) == 0.0);
}

#[test]
fn every_coupling_matrix_is_hermitian() {
    for n in sample_normals(8, 7) {
        for s in [0.3, -1.7, 2.0] {
            for c in one_parameter(s).into_iter().chain([Coupling::Combined {
                scalar: s,
                lorentz: 0.4,
                magnetic: -1.1,
            }]) {
                let a = coupling_matrix(&c, &n).unwrap();
                assert!(max_diff(&a, &a.adjoint()) <= ALGEBRA_TOL, "{c:?}");
            }
        }
    }
}

#[test]
fn conjugate_products_are_scalar() {
    for n in sample_normals(8, 11) {
        for c in one_parameter(1.3).into_iter().chain([Coupling::Combined {
            scalar: 0.7,
            lorentz: -1.9,
            magnetic: 0.6,
        }]) {
            let conj = conjugate_and_sign(&c).unwrap();
            let a = coupling_matrix(&c, &n).unwrap();
            let expect = identity() * Complex64::from(conj.sign());
            assert!(max_diff(&(a * conj.at(&n)), &expect) <= ALGEBRA_TOL * conj.sign().abs(), "{c:?}");
            assert!(max_diff(&(conj.at(&n) * a), &expect) <= ALGEBRA_TOL * conj.sign().abs(), "{c:?}");
        }
    }
}

#[test]
fn modified_lorentz_projectors_only_at_two() {
    for n in sample_normals(8, 3) {
        for s in [2.0, -2.0] {
            assert!(projector_defect(&Coupling::ModifiedLorentz { strength: s }, &n).unwrap() <= ALGEBRA_TOL);
        }
        assert!(projector_defect(&Coupling::ModifiedLorentz { strength: 1.0 }, &n).unwrap() > 0.5);
    }
}

#[test]
fn sign_minus_four_intertwines() {
    for n in sample_normals(8, 5) {
        let lorentz = (4.0f64 + 1.5 * 1.5).sqrt();
        assert!(intertwines(
            &Coupling::Combined {
                scalar: 1.5,
                lorentz,
                magnetic: 0.0
            },
            &n
        )
        .unwrap());
        assert!(intertwines(&Coupling::Lorentz { strength: 2.0 }, &n).unwrap());
        assert!(!intertwines(&Coupling::Lorentz { strength: 1.0 }, &n).unwrap());
    }
}

#[test]
fn transformation_table_with_phases() {
    let g = dirac();
    let pairs = [
        (Coupling::Electrostatic { strength: 1.0 }, Coupling::Lorentz { strength: 1.0 }),
        (Coupling::Magnetic { strength: 1.0 }, Coupling::AnomalousMagnetic { strength: 1.0 }),
        (
            Coupling::ModifiedElectrostatic { strength: 1.0 },
            Coupling::ModifiedLorentz { strength: 1.0 },
        ),
        (
            Coupling::ModifiedMagnetic { strength: 1.0 },
            Coupling::ModifiedAnomalousMagnetic { strength: 1.0 },
        ),
    ];
    for n in sample_normals(4, 9) {
        for (from, to) in pairs {
            assert_eq!(beta_transform(&from).unwrap(), to);
            assert_eq!(beta_transform(&to).unwrap(), from);
            let before = coupling_matrix(&from, &n).unwrap();
            let after = coupling_matrix(&to, &n).unwrap();
            assert!(transform_phase(&before, &after, &g.beta).is_some(), "{from:?} -> {to:?}");
        }
        for c in one_parameter(1.0) {
            let t = gamma_transform(&c).unwrap();
            assert_eq!(gamma_transform(&t).unwrap(), c);
            let before = coupling_matrix(&c, &n).unwrap();
            let after = coupling_matrix(&t, &n).unwrap();
            assert!(transform_phase(&before, &after, &g.gamma5).is_some(), "{c:?} -> {t:?}");
        }
    }
    assert!(matches!(
        beta_transform(&Coupling::Combined {
            scalar: 1.0,
            lorentz: 0.0,
            magnetic: 0.0
        }),
        Err(ShellError::NoTransform(_))
    ));
}

#[test]
fn classification_under_transforms() {
    for s in [0.5, 1.0, 2.0, -2.0, 3.0] {
        for c in one_parameter(s) {
            let before = classify(&c).unwrap();
            assert_eq!(classify(&gamma_transform(&c).unwrap()).unwrap(), before, "{c:?}");
            if s.abs() == 2.0 {
                let flipped = classify(&beta_transform(&c).unwrap()).unwrap();
                assert_eq!(
                    flipped,
                    Classification {
                        critical: !before.critical,
                        confining: !before.confining
                    },
                    "{c:?}"
                );
            }
        }
    }
}

#[test]
fn classification_examples() {
    let lor = Coupling::Combined {
        scalar: 0.0,
        lorentz: 2.0,
        magnetic: 0.0,
    };
    assert_eq!(conjugate_and_sign(&lor).unwrap().sign(), -4.0);
    assert!(classify(&lor).unwrap().confining);
    assert_eq!(
        classify(&Coupling::Electrostatic { strength: 2.0 }).unwrap(),
        Classification {
            critical: true,
            confining: false
        }
    );
    assert!(
        classify(&Coupling::Combined {
            scalar: 2.0,
            lorentz: 0.0,
            magnetic: 0.0
        })
        .unwrap()
        .critical
    );
    assert!(classify(&Coupling::Cauchy { energy: 0.0, weight: 4.0 }).is_err());
}

#[test]
fn alpha_dot_squares_to_norm() {
    let v = Vector3::new(0.3, -1.2, 0.5);
    let a = alpha_dot(&v);
    assert!(max_diff(&(a * a), &(identity() * Complex64::from(v.norm_squared()))) < 1e-15);
}
