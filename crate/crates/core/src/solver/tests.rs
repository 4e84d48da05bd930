use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fixtures;
use crate::junction::FifoPriority;
use crate::network::PathId;

fn braess_grid() -> TimeGrid {
    TimeGrid::new(0.0, 500.0, 5.0).unwrap()
}

#[test]
fn uniform_initial_profile() {
    let net = fixtures::braess();
    let grid = braess_grid();
    let h = init_departures(&net, &grid, None).unwrap();
    let p1 = net.path_idx(PathId(1)).unwrap();
    assert!((h[[p1, 0]] - 60.0 / (2.0 * 100.0 * 5.0)).abs() < 1e-15);
    assert!(demand_residual(&h, &net, grid.dt_s) < 1e-12);

    let h = init_departures(&net, &grid, Some([0.0, 100.0])).unwrap();
    assert!((h[[p1, 0]] - 0.3).abs() < 1e-15);
    assert_eq!(h[[p1, 20]], 0.0);
    assert!(demand_residual(&h, &net, grid.dt_s) < 1e-12);
}

#[test]
fn empty_window_is_rejected() {
    let net = fixtures::braess();
    assert!(init_departures(&net, &braess_grid(), Some([900.0, 950.0])).is_err());
}

#[test]
fn dual_closed_form() {
    // Two paths, 100 steps of 1 s, zero rates and costs: G(x) = 200 x - 100.
    let grid = TimeGrid::new(0.0, 100.0, 1.0).unwrap();
    let zeros = vec![0.0; 200];
    let v = solve_dual(&zeros, &zeros, 1e-3, 100.0, &grid, 1e-12);
    assert!((v - 0.5).abs() < 1e-10);
    assert_eq!(solve_dual(&zeros, &zeros, 1e-3, 0.0, &grid, 1e-9), 0.0);
}

/// Root of `G` by exhaustive scan over a fine grid of `x`, refined around the sign change.
fn scan_root(h: &[f64], psi: &[f64], alpha: f64, demand: f64, dt: f64) -> f64 {
    let lo = -h.iter().zip(psi).map(|(a, b)| a - alpha * b).fold(f64::NEG_INFINITY, f64::max);
    let hi = lo.abs() + demand / dt + 1.0;
    let (mut a, mut b) = (lo, hi);
    for _ in 0..6 {
        let n = 2000;
        let step = (b - a) / n as f64;
        let mut found = (a, b);
        for i in 0..n {
            let x0 = a + step * i as f64;
            let x1 = x0 + step;
            if dual_residual(h, psi, alpha, x0, demand, dt) <= 0.0 && dual_residual(h, psi, alpha, x1, demand, dt) > 0.0 {
                found = (x0, x1);
                break;
            }
        }
        (a, b) = found;
    }
    0.5 * (a + b)
}

#[test]
fn dual_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let grid = TimeGrid::new(0.0, 10.0, 1.0).unwrap();
    for _ in 0..100 {
        let h: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..2.0)).collect();
        let psi: Vec<f64> = (0..30).map(|_| rng.random_range(10.0..500.0)).collect();
        let alpha = rng.random_range(1e-3..1e-2);
        let q = rng.random_range(1.0..50.0);
        let v = solve_dual(&h, &psi, alpha, q, &grid, 1e-12);
        let g = dual_residual(&h, &psi, alpha, v, q, grid.dt_s);
        assert!(g.abs() <= 1e-9 * q);
        let oracle = scan_root(&h, &psi, alpha, q, grid.dt_s);
        // G has slope at least Δt near the root, so x-error ≤ |G| / Δt.
        assert!((v - oracle).abs() <= 1e-6, "{v} vs {oracle}");
    }
}

#[test]
fn update_with_equal_costs_is_stationary() {
    let net = fixtures::braess();
    let grid = braess_grid();
    let h = init_departures(&net, &grid, None).unwrap();
    let psi = DelayProfile {
        psi: Array2::from_elem(h.dim(), 80.0),
    };
    let next = fixed_point_update(&h, &psi, &net, &grid, &SolverConfig::default());
    let diff: f64 = next.iter().zip(&h).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-9, "{diff}");
}

#[test]
fn update_moves_flow_to_cheaper_cells() {
    let net = fixtures::braess();
    let grid = braess_grid();
    let h = init_departures(&net, &grid, None).unwrap();
    let p1 = net.path_idx(PathId(1)).unwrap();
    let p2 = net.path_idx(PathId(2)).unwrap();
    let mut psi = Array2::from_elem(h.dim(), 100.0);
    psi.row_mut(p2).fill(50.0);
    let next = fixed_point_update(&h, &DelayProfile { psi }, &net, &grid, &SolverConfig::default());
    assert!(next[[p2, 0]] > h[[p2, 0]]);
    assert!(next[[p1, 0]] < h[[p1, 0]]);
    assert!(demand_residual(&next, &net, grid.dt_s) < 1e-6);
}

#[test]
fn bounded_rationality_charges_the_minimum() {
    let net = fixtures::braess();
    let grid = braess_grid();
    let h = init_departures(&net, &grid, None).unwrap();
    let p1 = net.path_idx(PathId(1)).unwrap();
    let mut psi = Array2::from_elem(h.dim(), 100.0);
    psi.row_mut(p1).fill(102.0);
    let psi = DelayProfile { psi };
    let config = SolverConfig {
        br_tolerance: 5.0,
        ..SolverConfig::default()
    };
    let next = fixed_point_update(&h, &psi, &net, &grid, &config);
    assert!(relative_gap(&next, &h, grid.dt_s) < 1e-15);
    let strict = fixed_point_update(&h, &psi, &net, &grid, &SolverConfig::default());
    assert!(relative_gap(&strict, &h, grid.dt_s) > 0.0);
}

#[test]
fn relative_gap_values() {
    let a = Array2::from_shape_vec((1, 2), vec![1.0, 1.0]).unwrap();
    let b = Array2::from_shape_vec((1, 2), vec![2.0, 1.0]).unwrap();
    assert_eq!(relative_gap(&a, &a, 1.0), 0.0);
    assert!((relative_gap(&b, &a, 1.0) - 0.5).abs() < 1e-15);
    let z = Array2::zeros((1, 2));
    assert_eq!(relative_gap(&z, &z, 1.0), 0.0);
    assert_eq!(relative_gap(&a, &z, 1.0), f64::INFINITY);
}

#[test]
fn od_gap_over_used_cells() {
    let net = fixtures::braess();
    let grid = braess_grid();
    let mut h = Array2::zeros((8, grid.n_steps));
    let p1 = net.path_idx(PathId(1)).unwrap();
    let p2 = net.path_idx(PathId(2)).unwrap();
    h[[p1, 3]] = 1.0;
    h[[p2, 7]] = 0.5;
    h[[p2, 8]] = 1e-9;
    let mut psi = Array2::from_elem(h.dim(), 1000.0);
    psi[[p1, 3]] = 90.0;
    psi[[p2, 7]] = 100.0;
    let (gaps, warnings) = od_gap(&h, &DelayProfile { psi }, &net, 1e-6);
    let g = &gaps[0];
    assert_eq!((g.origin.0, g.destination.0), (1, 3));
    assert!((g.gap_s - 10.0).abs() < 1e-12);
    assert_eq!(g.min_cost_s, 90.0);
    assert_eq!(g.used_cells, 2);
    // The other O-D pairs carry demand but no flow here.
    assert_eq!(warnings.len(), 3);
}

#[test]
fn config_validation() {
    assert!(SolverConfig::default().validate().is_ok());
    let bad = SolverConfig {
        alpha: 0.0,
        ..SolverConfig::default()
    };
    assert!(bad.validate().is_err());
    let bad = SolverConfig {
        initial_window: Some([10.0, 5.0]),
        ..SolverConfig::default()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn one_iteration_is_recorded() {
    let net = fixtures::braess();
    let config = SolverConfig {
        max_iters: 1,
        ..SolverConfig::default()
    };
    let report = solve_due(&net, &braess_grid(), &config, &PenaltyParams::default(), &FifoPriority).unwrap();
    assert_eq!(report.iterations_used, 1);
    assert_eq!(report.relative_gap_history.len(), 1);
    assert!(!report.converged);
    assert!(report.warnings.iter().any(|w| w.contains("not converged")));
}

#[test]
fn equilibrium_profile_is_a_fixed_point() {
    // Costs equal on every used cell and higher elsewhere.
    let net = fixtures::braess();
    let grid = braess_grid();
    let mut h = Array2::zeros((8, grid.n_steps));
    let mut psi = Array2::from_elem(h.dim(), 500.0);
    for od in &net.ods {
        let p = od.paths[0];
        for k in 10..30 {
            h[[p, k]] = od.demand_veh / (20.0 * grid.dt_s);
            psi[[p, k]] = 120.0;
        }
    }
    let config = SolverConfig::default();
    let next = fixed_point_update(&h, &DelayProfile { psi }, &net, &grid, &config);
    let norm: f64 = next.iter().zip(&h).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let qmax = net.ods.iter().map(|o| o.demand_veh).fold(0.0, f64::max);
    assert!(norm <= config.bisect_tol * qmax, "{norm}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn update_is_feasible(seed in any::<u64>(), alpha in 1e-4f64..1e-1) {
        let net = fixtures::braess();
        let grid = TimeGrid::new(0.0, 100.0, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = Array2::from_shape_fn((8, grid.n_steps), |_| rng.random_range(0.0..1.0));
        let psi = Array2::from_shape_fn(h.dim(), |_| rng.random_range(20.0..400.0));
        let config = SolverConfig { alpha, ..SolverConfig::default() };
        let next = fixed_point_update(&h, &DelayProfile { psi }, &net, &grid, &config);
        prop_assert!(next.iter().all(|&x| x >= 0.0));
        prop_assert!(demand_residual(&next, &net, grid.dt_s) <= 1e-6);
    }

    #[test]
    fn dual_residual_is_nondecreasing(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..2.0)).collect();
        let psi: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..300.0)).collect();
        let mut xs: Vec<f64> = (0..50).map(|_| rng.random_range(-5.0..5.0)).collect();
        xs.sort_by(f64::total_cmp);
        let g: Vec<f64> = xs.iter().map(|&x| dual_residual(&h, &psi, 0.01, x, 10.0, 1.0)).collect();
        for w in g.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
    }
}
