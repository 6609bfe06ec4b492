use std::f64::consts::PI;

use fdlab::drift::{Drift, DriftSpec};
use fdlab::metrics::{w2_1d, DiscreteMeasure};
use fdlab::transport::{flow_map, pushforward, trace, PushforwardOptions};
use fdlab::{DensityField, Grid};
use proptest::prelude::*;

fn rigid(g: &Grid) -> Drift {
    Drift::new(DriftSpec::RigidRotation { omega: 2.0, center: [0.5, 0.5], cutoff: None }, g).unwrap()
}

fn stirring(g: &Grid) -> Drift {
    Drift::new(DriftSpec::RigidRotation { omega: 2.0 * PI, center: [0.5, 0.5], cutoff: Some([0.3, 0.45]) }, g).unwrap()
}

fn bump(g: &Grid) -> DensityField {
    DensityField::from_fn(g.clone(), |p| 0.5 + (-((p[0] - 0.45).powi(2) + (p[1] - 0.55).powi(2)) / 0.02).exp()).unwrap()
}

#[test]
fn zero_drift_leaves_the_source_unchanged() {
    let g = Grid::unit_square(16).unwrap();
    let f = bump(&g);
    let out = pushforward(&f, &Drift::zero(&g), 0.0, 1.0, PushforwardOptions::default()).unwrap();
    assert_eq!(out.field.values(), f.values());
}

#[test]
fn quarter_turn_of_a_rigid_rotation() {
    let g = Grid::unit_square(8).unwrap();
    let d = rigid(&g);
    let map = flow_map(&d, &g, &[[0.8, 0.5]], 0.0, PI / 4.0, 200).unwrap();
    let p = map.points[0];
    assert!((p[0] - 0.5).abs() <= 1e-10 && (p[1] - 0.8).abs() <= 1e-10, "{p:?}");
    assert!(map.log_jacobian[0] == 0.0);
}

proptest! {
    #[test]
    fn backward_then_forward_is_the_identity(x in 0.25f64..0.75, y in 0.25f64..0.75, t in 0.01f64..0.5) {
        let g = Grid::unit_square(8).unwrap();
        let d = stirring(&g);
        // RK4 is not reversible; the round trip closes to its truncation error, about 2e-11 here.
        let (fwd, a) = trace(&d, [x, y], 0.0, t, 256);
        let (back, b) = trace(&d, fwd, t, 0.0, 256);
        prop_assert!((back[0] - x).abs() <= 1e-8 && (back[1] - y).abs() <= 1e-8);
        prop_assert!((a + b).abs() <= 1e-12);
    }
}

#[test]
fn divergence_free_mass_defect_is_second_order() {
    let defect = |n: usize| {
        let g = Grid::unit_square(n).unwrap();
        let f = bump(&g);
        let out = pushforward(&f, &stirring(&g), 0.0, 0.3, PushforwardOptions { rk_steps: 16, renormalize: false }).unwrap();
        out.mass_defect.abs() / f.mass()
    };
    let (coarse, fine) = (defect(32), defect(64));
    assert!(fine <= 0.35 * coarse, "defects {coarse:e} -> {fine:e}");
}

#[test]
fn renormalization_restores_the_source_mass() {
    let g = Grid::unit_square(24).unwrap();
    let f = bump(&g);
    let out = pushforward(&f, &stirring(&g), 0.0, 0.3, PushforwardOptions { rk_steps: 8, renormalize: true }).unwrap();
    assert!((out.field.mass() - f.mass()).abs() <= 1e-13 * f.mass());
    assert!(out.field.min() >= 0.0);
}

#[test]
fn constant_drift_translates_a_bump_in_one_dimension() {
    let n = 400;
    let g = Grid::new_1d(0.0, 1.0, n).unwrap();
    let f = DensityField::from_fn(g.clone(), |p| if (p[0] - 0.3).abs() < 0.1 { (PI * (p[0] - 0.3) / 0.2).cos().powi(2) } else { 0.0 }).unwrap();
    let c = 0.5;
    let d = Drift::new(DriftSpec::Constant { velocity: [c, 0.0] }, &g).unwrap();
    let out = pushforward(&f, &d, 0.0, 0.2, PushforwardOptions { rk_steps: 8, renormalize: true }).unwrap();
    let w = w2_1d(&DiscreteMeasure::from_field(&f).unwrap(), &DiscreteMeasure::from_field(&out.field).unwrap()).unwrap();
    assert!((w - c * 0.2).abs() <= 2.0 / n as f64, "W2 = {w}");
}

#[test]
fn tangential_drift_leaving_the_box_is_reported() {
    let g = Grid::unit_square(8).unwrap();
    let d = Drift::new(DriftSpec::RigidRotation { omega: 1.0, center: [0.0, 0.0], cutoff: None }, &g).unwrap();
    assert!(flow_map(&d, &g, &[[0.9, 0.8]], 0.0, 1.0, 32).is_err());
}
