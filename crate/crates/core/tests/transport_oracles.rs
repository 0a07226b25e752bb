mod common;

use common::*;
use fairrisk::transport::network_simplex::solve_transportation;
use fairrisk::transport::{barycentric_project, solve_coupling, CouplingOptions};
use proptest::prelude::*;

fn solve(x: &[Vec<f64>], y: &[Vec<f64>]) -> fairrisk::transport::DiscreteCoupling {
    solve_coupling(x, y, &CouplingOptions::default()).unwrap()
}

#[test]
fn square_instances_match_permutation_search() {
    let mut r = rng(11);
    for n in 2..=7 {
        for d in 1..=3 {
            let x = random_points(&mut r, n, d);
            let y = random_points(&mut r, n, d);
            let c = solve(&x, &y);
            let oracle = brute_force_assignment(&x, &y);
            assert!((c.objective - oracle).abs() <= 1e-9, "n={n} d={d}: {} vs {oracle}", c.objective);
            assert!(c.marginal_error() <= 1e-12);
        }
    }
}

#[test]
fn rectangular_instances_match_min_cost_flow() {
    let mut r = rng(12);
    for (m, n) in [(2, 3), (3, 2), (4, 7), (7, 4), (5, 9), (10, 3), (1, 6), (6, 1)] {
        let x = random_points(&mut r, m, 2);
        let y = random_points(&mut r, n, 2);
        let c = solve(&x, &y);
        let oracle = ssp_transport_objective(&x, &y);
        assert!((c.objective - oracle).abs() <= 1e-9, "{m}x{n}: {} vs {oracle}", c.objective);
        assert!(c.marginal_error() <= 1e-12);
        assert!(c.entries.len() < m + n, "not a basic solution");
    }
}

#[test]
fn one_dimensional_optimum_is_the_sorted_matching() {
    let mut r = rng(13);
    for n in [5, 40, 150] {
        let x = random_points(&mut r, n, 1);
        let y = random_points(&mut r, n, 1);
        let mut xs: Vec<f64> = x.iter().map(|p| p[0]).collect();
        let mut ys: Vec<f64> = y.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        let sorted: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
        let c = solve(&x, &y);
        assert!((c.objective - sorted).abs() <= 1e-9 * (1.0 + sorted));
        // Barycentric images preserve order in one dimension.
        let mut proj = barycentric_project(&c);
        proj.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]));
        assert!(proj.windows(2).all(|w| w[0].1[0] <= w[1].1[0] + 1e-12));
    }
}

#[test]
fn integer_flows_are_exact() {
    let supply = [3, 3];
    let demand = [2, 2, 2];
    let cost = [1.0, 2.0, 3.0, 3.0, 2.0, 1.0];
    let sol = solve_transportation(&supply, &demand, &cost).unwrap();
    let mut rows = [0i64; 2];
    let mut cols = [0i64; 3];
    for &(i, j, f) in &sol.flows {
        rows[i] += f;
        cols[j] += f;
    }
    assert_eq!(rows, supply);
    assert_eq!(cols, demand);
    assert_eq!(sol.total_cost, 8.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn no_feasible_plan_beats_the_solver(
        m in 1usize..8, n in 1usize..8, d in 1usize..4, seed in any::<u64>()
    ) {
        let mut r = rng(seed);
        let x = random_points(&mut r, m, d);
        let y = random_points(&mut r, n, d);
        let c = solve(&x, &y);
        prop_assert!(c.marginal_error() <= 1e-12);
        prop_assert!(c.entries.iter().all(|e| e.2 > 0.0));
        for _ in 0..5 {
            let g = random_feasible_coupling(&mut r, m, n);
            prop_assert!(plan_cost(&g, &x, &y) >= c.objective - 1e-9);
        }
        // The plan's reported objective is its own cost.
        prop_assert!((plan_cost(&c.to_dense(), &x, &y) - c.objective).abs() <= 1e-9);
    }

    #[test]
    fn permuting_inputs_leaves_the_objective_unchanged(n in 2usize..7, seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = random_points(&mut r, n, 2);
        let y = random_points(&mut r, n, 2);
        let mut xr = x.clone();
        xr.reverse();
        let a = solve(&x, &y).objective;
        let b = solve(&xr, &y).objective;
        let swapped = solve(&y, &x).objective;
        prop_assert!((a - b).abs() <= 1e-9);
        prop_assert!((a - swapped).abs() <= 1e-9);
    }
}
