use fdlab::drift::{classify, Drift, DriftClass, DriftSpec, Potential, VelocityField};
use fdlab::field::MixedNormSpec;
use fdlab::metrics::delta_holder_exponent;
use fdlab::Grid;

fn inf() -> MixedNormSpec {
    MixedNormSpec::new(f64::INFINITY, f64::INFINITY).unwrap()
}

#[test]
fn bounded_gradient_drift_is_subcritical_in_one_dimension() {
    let g = Grid::new_1d(0.0, 1.0, 64).unwrap();
    let d = Drift::new(DriftSpec::PotentialGradient { potential: Potential::Cosine { amplitude: 0.1, modes: [2, 0] } }, &g).unwrap();
    let r = classify(&d, 0.75, 1.0, inf(), DriftClass::S, 1.0).unwrap();
    assert!(r.member && r.m_admissible, "{r:?}");
    assert!(r.norm.is_finite() && r.norm > 0.0);
    assert!((r.lhs - 0.0).abs() < 1e-12 && (r.rhs - 0.75).abs() < 1e-12);
}

#[test]
fn m_outside_the_range_is_not_a_member() {
    let g = Grid::unit_square(16).unwrap();
    let d = Drift::new(DriftSpec::PotentialGradient { potential: Potential::Cosine { amplitude: 0.1, modes: [1, 1] } }, &g).unwrap();
    let r = classify(&d, 0.3, 1.0, inf(), DriftClass::S, 1.0).unwrap();
    assert!(!r.m_admissible && !r.member);
}

#[test]
fn rotation_belongs_to_the_divergence_free_class() {
    let g = Grid::unit_square(16).unwrap();
    let d = Drift::new(DriftSpec::RigidRotation { omega: 1.0, center: [0.5, 0.5], cutoff: Some([0.3, 0.45]) }, &g).unwrap();
    assert!(d.is_divergence_free());
    let r = classify(&d, 0.75, 2.0, inf(), DriftClass::D, 1.0).unwrap();
    assert!(r.member && r.divergence_free, "{r:?}");
}

#[test]
fn compressible_drift_is_not_in_the_divergence_free_class() {
    let g = Grid::unit_square(16).unwrap();
    let d = Drift::new(DriftSpec::Shear { rate: 1.0, center: 0.5, tapered: true }, &g).unwrap();
    let r = classify(&d, 0.75, 2.0, inf(), DriftClass::D, 1.0).unwrap();
    assert!(!r.divergence_free && !r.member);
    assert!(r.notes.iter().any(|n| n.contains("divergence-free")));
}

#[test]
fn strict_class_excludes_the_critical_case() {
    let g = Grid::unit_square(16).unwrap();
    let d = Drift::new(DriftSpec::StreamFunction { amplitude: 0.2, modes: [1, 1] }, &g).unwrap();
    // d = 2, m = 0.5, q = 1, L^inf in space, L^1 in time: lhs = 2 + q_{m,d} = 1, rhs = 2 + 2(1 + 0.5 - 2) = 1.
    let spec = MixedNormSpec::new(f64::INFINITY, 1.0).unwrap();
    let closed = classify(&d, 0.5, 1.0, spec, DriftClass::D, 1.0).unwrap();
    let strict = classify(&d, 0.5, 1.0, spec, DriftClass::DPlus, 1.0).unwrap();
    assert!(closed.critical && closed.member, "{closed:?}");
    assert!(!strict.member);
}

#[test]
fn delta_exponent_for_bounded_drifts() {
    // m < 1 caps at 1/2; the second branch is (rhs - lhs)/(2 + q_{m,d}).
    let a = delta_holder_exponent(2, 0.75, 2.0, inf());
    let qmd = 2.0 * (0.75 - 1.0) / 2.0;
    let rhs = 2.0 + 2.0 * (2.0 + 0.75 - 2.0) / 2.0;
    let expected = f64::min(0.5, (rhs - 0.0) / (2.0 + qmd));
    assert!((a - expected).abs() < 1e-12 && (a - 0.5).abs() < 1e-12);
    let slow = delta_holder_exponent(2, 2.0, 1.0, inf());
    assert!((slow - 2.0 / (2.0 * (2.0 + 4.0))).abs() < 1e-12, "{slow}");
}

#[test]
fn invalid_class_inputs_are_rejected() {
    let g = Grid::unit_square(8).unwrap();
    let d = Drift::zero(&g);
    assert!(classify(&d, 0.75, 0.5, inf(), DriftClass::S, 1.0).is_err());
    assert!(classify(&d, 0.75, 1.0, inf(), DriftClass::S, 0.0).is_err());
    assert!(DriftClass::parse("nope").is_err());
    assert_eq!(DriftClass::parse("D+").unwrap(), DriftClass::DPlus);
}
