//! End-to-end runs through the public API, starting from JSON specs.

use proptest::prelude::*;
use tvclt::dichotomy::{analyze, Branch};
use tvclt::family::{make_family, FamilySpec, SamplingOptions};
use tvclt::shiftbound::lemma3_bound;
use tvclt::{
    affine, build_certificate, classify, shift_tv, tv_distance, tv_to_matched_normal, Classification,
    MixtureDistribution,
};

fn from_json(text: &str) -> MixtureDistribution {
    make_family(&FamilySpec::from_json(text).unwrap(), SamplingOptions::with_intervals(1024)).unwrap()
}

#[test]
fn every_spec_shape_parses_and_normalizes() {
    let specs = [
        r#"{"family": "uniform", "params": {"lo": -1, "hi": 2}}"#,
        r#"{"family": "triangular", "params": {"a": 0.5}}"#,
        r#"{"family": "gaussian", "params": {"mean": 1, "sd": 2}}"#,
        r#"{"family": "gaussian", "params": {"truncate": 3}}"#,
        r#"{"family": "bernoulli", "params": {"p": 0.3}}"#,
        r#"{"family": "atomic_list", "params": {"atoms": [[0, 0.25], [1, 0.75]]}}"#,
        r#"{"family": "grid", "params": {"origin": 0, "step": 0.5, "values": [0, 1, 1, 0]}}"#,
        r#"{"family": "mixture", "params": {"components": [
            {"weight": 0.5, "spec": {"family": "bernoulli", "params": {"p": 0.5}}},
            {"weight": 0.5, "spec": {"family": "uniform", "params": {"lo": 0, "hi": 1}}}]}}"#,
    ];
    for s in specs {
        let f = from_json(s);
        assert!((f.total_mass() - 1.0).abs() <= 1e-12 + f.error_budget, "{s}");
    }
    assert!(FamilySpec::from_json(r#"{"family": "cauchy", "params": {}}"#).is_err());
    assert!(make_family(
        &FamilySpec::from_json(r#"{"family": "uniform", "params": {"lo": 1, "hi": 0}}"#).unwrap(),
        SamplingOptions::default()
    )
    .is_err());
}

#[test]
fn dichotomy_from_specs() {
    let ns = [2u64, 4, 8, 16, 32, 64];
    let lattice = from_json(r#"{"family": "atomic_list", "params": {"atoms": [[0, 0.2], [1, 0.5], [3, 0.3]]}}"#);
    assert_eq!(classify(&lattice), Classification::Singular);
    assert_eq!(analyze(&lattice, &ns).unwrap().branch, Branch::DegenerateTvOne);

    let spiky = from_json(
        r#"{"family": "mixture", "params": {"components": [
            {"weight": 0.9, "spec": {"family": "bernoulli", "params": {"p": 0.5}}},
            {"weight": 0.1, "spec": {"family": "triangular", "params": {"a": 1}}}]}}"#,
    );
    let fit = analyze(&spiky, &[2, 4, 8, 16, 32, 64, 128]).unwrap();
    assert_eq!(fit.branch, Branch::Converging);
    // The atomic remainder 0.9^n keeps Δ_n above it.
    for (n, d) in fit.n_values.iter().zip(&fit.deltas) {
        assert!(*d >= 0.9f64.powi(*n as i32) * 0.5 - 1e-6);
    }
}

#[test]
fn shift_bound_is_sound_for_a_lopsided_grid_law() {
    // Tall on the left, a long shoulder to the right.
    let values: Vec<f64> = (0..=400)
        .map(|i| {
            let x = i as f64 / 400.0;
            if i == 0 || i == 400 { 0.0 } else { (1.0 - x).powi(2) * 3.0 + 0.3 }
        })
        .collect();
    let f = tvclt::family::grid(0.0, 1.0 / 400.0, values).unwrap();
    let cert = build_certificate(&f).unwrap();
    assert!(cert.theta > 0.0 && cert.theta <= 1.0);
    for n in [16u64, 64] {
        for gamma in [0.05, 0.5] {
            let b = lemma3_bound(&f, n, gamma).unwrap();
            let exact = shift_tv(&f, n, gamma).unwrap();
            assert!(b.total.min(1.0) >= exact.lower(), "n={n} γ={gamma}");
        }
    }
    // Five intervals leave no room for a tent of at least four steps.
    let coarse = from_json(r#"{"family": "grid", "params": {"origin": 0, "step": 0.25, "values": [0, 3, 1, 1, 0.5, 0]}}"#);
    assert!(build_certificate(&coarse).unwrap_err().is_nonconvergence());
}

#[test]
fn delta_is_scale_and_location_free() {
    let u = from_json(r#"{"family": "uniform", "params": {"lo": 0, "hi": 1}}"#);
    let v = affine(&u, -3.0, 7.0).unwrap();
    let (a, b) = (tv_to_matched_normal(&u, 16).unwrap(), tv_to_matched_normal(&v, 16).unwrap());
    assert!((a.value - b.value).abs() <= a.tolerance + b.tolerance + 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spec_json_round_trips(lo in -5.0f64..5.0, width in 0.1f64..4.0, p in 0.01f64..0.99) {
        let spec = FamilySpec::Mixture { components: vec![
            tvclt::family::MixtureComponent { weight: p, spec: FamilySpec::Uniform { lo, hi: lo + width } },
            tvclt::family::MixtureComponent { weight: 1.0 - p, spec: FamilySpec::Bernoulli { p } },
        ]};
        let back = FamilySpec::from_json(&spec.to_json()).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn tv_of_shifted_copies_grows_with_shift(g1 in 0.0f64..0.5, extra in 0.01f64..0.5) {
        let u = from_json(r#"{"family": "triangular", "params": {"a": 1}}"#);
        let d1 = tv_distance(&u, &affine(&u, 1.0, g1).unwrap());
        let d2 = tv_distance(&u, &affine(&u, 1.0, g1 + extra).unwrap());
        prop_assert!(d2.value + d2.tolerance + 1e-9 >= d1.value - d1.tolerance);
    }
}
