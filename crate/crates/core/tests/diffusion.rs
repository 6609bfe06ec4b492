use std::f64::consts::PI;

use fdlab::diffusion::{diffusion_energy_identity, entropy_dissipation_report, step_diffusion, DiffusionParams};
use fdlab::{DensityField, Grid};
use proptest::prelude::*;

fn positive_field(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..2.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn step_conserves_mass_and_positivity(values in positive_field(24), m in 0.3f64..2.5, dt in 1e-4f64..1e-2) {
        let g = Grid::new_1d(0.0, 1.0, 24).unwrap();
        let f = DensityField::new(g, values).unwrap();
        let p = DiffusionParams::new(m, 1e-10, dt).unwrap();
        let out = step_diffusion(&f, &p).unwrap();
        prop_assert!((out.field.mass() - f.mass()).abs() <= 1e-10 * f.mass());
        prop_assert!(out.field.min() >= 0.0);
        prop_assert!(out.field.max() <= f.max() * (1.0 + 1e-10));
        prop_assert!(out.field.min() >= f.min() * (1.0 - 1e-10));
    }

    #[test]
    fn energy_identity_and_entropy_inequality_hold(values in positive_field(36), m in 0.3f64..2.5, q in 1.2f64..4.0) {
        let g = Grid::unit_square(6).unwrap();
        let f = DensityField::new(g, values).unwrap();
        let p = DiffusionParams::new(m, 1e-10, 5e-3).unwrap();
        let out = step_diffusion(&f, &p).unwrap().field;
        let r = diffusion_energy_identity(&f, &out, &p, q).unwrap();
        prop_assert!(r.residual >= -1e-9 * (1.0 + r.before), "residual {}", r.residual);
        prop_assert!(entropy_dissipation_report(&f, &out, &p).unwrap().satisfied);
    }
}

#[test]
fn linear_step_damps_a_cosine_mode_by_the_discrete_factor() {
    let n = 64;
    let g = Grid::new_1d(0.0, 1.0, n).unwrap();
    let h = 1.0 / n as f64;
    let f = DensityField::from_fn(g, |p| 1.0 + 0.5 * (PI * p[0]).cos()).unwrap();
    let dt = 1e-3;
    let p = DiffusionParams::new(1.0, 0.0, dt).unwrap();
    let out = step_diffusion(&f, &p).unwrap().field;
    let eigenvalue = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
    let factor = 1.0 / (1.0 + dt * eigenvalue);
    for (k, (a, b)) in out.values().iter().zip(f.values()).enumerate() {
        assert!((a - 1.0 - factor * (b - 1.0)).abs() < 1e-10, "cell {k}");
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(DiffusionParams::new(0.0, 1e-10, 1e-3).is_err());
    assert!(DiffusionParams::new(0.5, 1e-10, 0.0).is_err());
    assert!(DiffusionParams::new(0.5, -1.0, 1e-3).is_err());
}
