use fdlab::metrics::{delta_distance, w2_1d, wp_entropic, wp_exact, DiscreteMeasure, EntropicOptions};
use fdlab::Grid;
use proptest::prelude::*;

fn measure_1d() -> impl Strategy<Value = DiscreteMeasure> {
    (1usize..8).prop_flat_map(|n| (prop::collection::vec(0.0f64..1.0, n), prop::collection::vec(0.05f64..1.0, n))).prop_map(|(xs, w)| {
        let total: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|x| x / total).collect();
        DiscreteMeasure::from_1d(&xs, &w).unwrap()
    })
}

fn uniform_cloud(n: usize) -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((0.0f64..1.0, 0.0f64..1.0).prop_map(|(x, y)| [x, y]), n)
}

fn uniform(points: Vec<[f64; 2]>) -> DiscreteMeasure {
    let n = points.len();
    DiscreteMeasure::new(2, points, vec![1.0 / n as f64; n]).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    permutations(n - 1)
        .into_iter()
        .flat_map(|p| (0..n).map(move |k| {
            let mut q = p.clone();
            q.insert(k, n - 1);
            q
        }))
        .collect()
}

proptest! {
    #[test]
    fn quantile_coupling_matches_the_simplex(a in measure_1d(), b in measure_1d()) {
        let q = w2_1d(&a, &b).unwrap();
        let e = wp_exact(&a, &b, 2.0, 64).unwrap().0;
        prop_assert!((q - e).abs() <= 1e-9, "quantile {q} vs simplex {e}");
    }

    #[test]
    fn simplex_matches_brute_force_over_permutations(x in uniform_cloud(5), y in uniform_cloud(5)) {
        let best = permutations(5)
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| (x[i][0] - y[j][0]).powi(2) + (x[i][1] - y[j][1]).powi(2)).sum::<f64>() / 5.0)
            .fold(f64::INFINITY, f64::min)
            .sqrt();
        let e = wp_exact(&uniform(x), &uniform(y), 2.0, 64).unwrap().0;
        prop_assert!((best - e).abs() <= 1e-10, "brute force {best} vs simplex {e}");
    }

    #[test]
    fn exact_distance_is_a_metric(x in uniform_cloud(6), y in uniform_cloud(6), z in uniform_cloud(6)) {
        let (a, b, c) = (uniform(x), uniform(y), uniform(z));
        let ab = wp_exact(&a, &b, 2.0, 64).unwrap().0;
        let ba = wp_exact(&b, &a, 2.0, 64).unwrap().0;
        let ac = wp_exact(&a, &c, 2.0, 64).unwrap().0;
        let cb = wp_exact(&c, &b, 2.0, 64).unwrap().0;
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!(ab <= ac + cb + 1e-9);
        prop_assert!(wp_exact(&a, &a, 2.0, 64).unwrap().0 <= 1e-12);
    }

    #[test]
    fn delta_is_symmetric_and_bounded_by_mass(x in uniform_cloud(4), y in uniform_cloud(4)) {
        let g = Grid::unit_square(4).unwrap();
        let (a, b) = (uniform(x), uniform(y));
        let ab = delta_distance(&a, &b, &g, 12).unwrap().value;
        let ba = delta_distance(&b, &a, &g, 12).unwrap().value;
        prop_assert!((ab - ba).abs() <= 1e-14);
        prop_assert!(ab <= 2.0);
    }
}

#[test]
fn point_masses_are_at_their_separation() {
    let a = DiscreteMeasure::from_1d(&[0.2], &[1.0]).unwrap();
    let b = DiscreteMeasure::from_1d(&[0.7], &[1.0]).unwrap();
    assert!((w2_1d(&a, &b).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn mass_mismatch_is_rejected() {
    let a = DiscreteMeasure::from_1d(&[0.2], &[1.0]).unwrap();
    let b = DiscreteMeasure::from_1d(&[0.7], &[2.0]).unwrap();
    assert!(w2_1d(&a, &b).is_err());
    assert!(wp_exact(&a, &b, 2.0, 8).is_err());
}

#[test]
fn entropic_estimate_approaches_the_exact_value() {
    let a = uniform(vec![[0.1, 0.2], [0.4, 0.9], [0.8, 0.3]]);
    let b = uniform(vec![[0.2, 0.25], [0.5, 0.7], [0.9, 0.4]]);
    let exact = wp_exact(&a, &b, 2.0, 16).unwrap().0;
    let entropic = wp_entropic(&a, &b, 2.0, EntropicOptions::with_reg(1e-3)).unwrap();
    assert!((entropic - exact).abs() <= 0.05 * exact, "entropic {entropic} vs exact {exact}");
}

#[test]
fn atom_cap_is_enforced() {
    let xs: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
    let a = DiscreteMeasure::from_1d(&xs, &[0.1; 10]).unwrap();
    assert!(wp_exact(&a, &a, 2.0, 4).is_err());
}
