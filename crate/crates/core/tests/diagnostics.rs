mod common;

use shellspec_core::diagnostics::{
    cauchy_coupling_identities, compactness_profile, confinement_check, magnetic_inverse_check, CauchyOptions, CompactOperator, ConfinementOptions,
    ProfileOptions,
};
use shellspec_core::{Coupling, ShellError, SpectralParam};

fn combined(scalar: f64, lorentz: f64, magnetic: f64) -> Coupling {
    Coupling::Combined { scalar, lorentz, magnetic }
}

#[test]
fn confinement_cases() {
    let disc = common::sphere(6);
    let opts = ConfinementOptions {
        samples: 4,
        ..Default::default()
    };
    let lorentz = confinement_check(&disc, &combined(0.0, 2.0, 0.0), &opts).unwrap();
    assert!(lorentz.intertwines && lorentz.confining, "{lorentz:?}");
    let pen = lorentz.penetrability.unwrap();
    assert!(!pen.penetrable && pen.right_side == 0.0);

    let mixed = confinement_check(&disc, &combined(1.0, 2.0, 1.0), &opts).unwrap();
    assert_eq!(mixed.sign, -4.0);
    let pen = mixed.penetrability.clone().unwrap();
    assert!(pen.penetrable && !mixed.confining, "{mixed:?}");
    assert!(pen.algebraic[0].max(pen.algebraic[1]) < 1e-12);
    assert!((pen.against_unhalved[0] - 0.5).abs() < 1e-6, "{pen:?}");

    let modified = confinement_check(&disc, &Coupling::ModifiedLorentz { strength: 2.0 }, &opts).unwrap();
    assert!(modified.projectors_exact && modified.confining);

    let plain = confinement_check(&disc, &Coupling::Electrostatic { strength: 1.0 }, &opts).unwrap();
    assert!(!plain.confining && plain.penetrability.is_none());

    let err = confinement_check(&disc, &Coupling::Cauchy { energy: 0.0, weight: 1.0 }, &opts).err();
    assert!(matches!(err, Some(ShellError::NonLocal(_))));
}

#[test]
fn cauchy_coupling_factorization() {
    let disc = common::sphere(5);
    for energy in [0.0, 0.5] {
        let r = cauchy_coupling_identities(&disc, energy, 1.0, &CauchyOptions::default()).unwrap();
        assert!(r.factorization_defect < 5e-2, "{r:?}");
        assert!(r.projector_defects.iter().all(|d| *d < 5e-2), "{r:?}");
        assert!(r.sigma_min >= r.sigma_min_bound * (1.0 - 1e-6), "{r:?}");
        assert_eq!(r.sandwiched_at_zero, 0.0);
    }
}

#[test]
fn magnetic_inverse_normalisation() {
    let disc = common::sphere(6);
    let p = SpectralParam::gap(0.3, 1.0).unwrap();
    let r = magnetic_inverse_check(&disc, 2.0, &p, &CauchyOptions::default()).unwrap();
    assert!((r.product_scalar - 2.0).abs() < 5e-2 * 2.0, "{r:?}");
    assert_eq!(r.selected, "4 e^2 / (e^2 + 4)");
    assert!(magnetic_inverse_check(&disc, 0.0, &p, &CauchyOptions::default()).is_err());
}

#[test]
fn sphere_tail_decays_faster_than_cube() {
    let opts = ProfileOptions::default();
    let which = CompactOperator::AnticommutatorCauchy { energy: 0.0 };
    let s = compactness_profile(&common::sphere(6), which, &opts).unwrap();
    let c = compactness_profile(&common::rounded_cube(6, 0.04), which, &opts).unwrap();
    assert_eq!(s.singular_values.len(), 60);
    assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
    assert!(s.tail_ratio(50).unwrap() < c.tail_ratio(50).unwrap());
    assert!(s.to_csv().lines().count() == 61);
}

#[test]
fn other_compact_operators_build() {
    let disc = common::sphere(4);
    let opts = ProfileOptions {
        count: 12,
        ..Default::default()
    };
    for which in [
        CompactOperator::DoubleLayer,
        CompactOperator::AdjointDoubleLayer,
        CompactOperator::AnticommutatorMassless,
        CompactOperator::NormalRieszCommutator { normal: 0, riesz: 1 },
    ] {
        let p = compactness_profile(&disc, which, &opts).unwrap();
        assert!(p.singular_values[0] > 0.0 && p.singular_values[0].is_finite(), "{}", p.label);
    }
}
