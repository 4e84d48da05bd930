//! Effective path delay: travel time plus an early/late arrival penalty.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dnl::DnlResult;
use crate::network::Network;

/// Piecewise-linear schedule penalty weights (seconds of cost per second of
/// earliness or lateness).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltyParams {
    pub early_weight: f64,
    pub late_weight: f64,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        PenaltyParams {
            early_weight: 0.5,
            late_weight: 2.0,
        }
    }
}

impl PenaltyParams {
    pub const ZERO: PenaltyParams = PenaltyParams {
        early_weight: 0.0,
        late_weight: 0.0,
    };

    pub fn is_valid(&self) -> bool {
        self.early_weight >= 0.0 && self.late_weight >= 0.0
    }
}

pub fn arrival_penalty(arrival_s: f64, target_s: f64, params: &PenaltyParams) -> f64 {
    params.early_weight * (target_s - arrival_s).max(0.0) + params.late_weight * (arrival_s - target_s).max(0.0)
}

/// Effective delays `Ψ_p(t_k)`, `|P| × N`.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayProfile {
    pub psi: Array2<f64>,
}

/// Computes `Ψ = D + penalty(t + D, T_A)` for every path and departure step.
///
/// Trips that do not finish within the horizon get a sentinel that exceeds the cost
/// of every completed trip: the full horizon length, plus the path's free-flow time,
/// plus the largest penalty attainable inside the horizon.
pub fn effective_delay(dnl: &DnlResult, net: &Network, params: &PenaltyParams) -> DelayProfile {
    let grid = dnl.grid;
    let (n_paths, n_steps) = dnl.travel_time.dim();
    let rows: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let target = net.od_of_path(p).target_arrival_s;
            let worst_penalty = arrival_penalty(grid.t0_s, target, params)
                .max(arrival_penalty(grid.end(), target, params));
            let sentinel = grid.span() + net.path_free_flow_time(p) + worst_penalty;
            (0..n_steps)
                .map(|k| match dnl.travel_time[[p, k]] {
                    Some(d) => d + arrival_penalty(grid.time(k) + d, target, params),
                    None => sentinel,
                })
                .collect()
        })
        .collect();
    let mut psi = Array2::zeros((n_paths, n_steps));
    for (p, row) in rows.into_iter().enumerate() {
        for (k, v) in row.into_iter().enumerate() {
            psi[[p, k]] = v;
        }
    }
    DelayProfile { psi }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnl::run_dnl;
    use crate::fixtures;
    use crate::grid::TimeGrid;
    use crate::junction::FifoPriority;

    #[test]
    fn penalty_values() {
        let p = PenaltyParams { early_weight: 0.5, late_weight: 2.0 };
        assert_eq!(arrival_penalty(100.0, 100.0, &p), 0.0);
        assert!((arrival_penalty(0.0, 100.0, &p) - 50.0).abs() < 1e-12);
        assert!((arrival_penalty(130.0, 100.0, &p) - 60.0).abs() < 1e-12);
    }

    #[test]
    fn penalty_is_convex_and_continuous() {
        let p = PenaltyParams::default();
        let target = 500.0;
        for i in 0..200 {
            let a = i as f64 * 7.3;
            let b = a + 31.0;
            let mid = arrival_penalty(0.5 * (a + b), target, &p);
            let chord = 0.5 * (arrival_penalty(a, target, &p) + arrival_penalty(b, target, &p));
            assert!(mid <= chord + 1e-12);
            let jump = (arrival_penalty(a + 1e-9, target, &p) - arrival_penalty(a, target, &p)).abs();
            assert!(jump < 1e-8);
        }
    }

    fn single_link_run(target: f64, rate: f64) -> (crate::network::Network, DnlResult) {
        let net = fixtures::single_link(300.0, 15.0, 0.5, 100.0, target);
        let grid = TimeGrid::new(0.0, 200.0, 1.0).unwrap();
        let h = fixtures::constant_departures(&net, &grid, rate, 0.0, 200.0);
        let dnl = run_dnl(&net, &h, &grid, &FifoPriority).unwrap();
        (net, dnl)
    }

    #[test]
    fn zero_weights_give_travel_time() {
        let (net, dnl) = single_link_run(50.0, 0.2);
        let d = effective_delay(&dnl, &net, &PenaltyParams::ZERO);
        for k in 0..150 {
            assert_eq!(d.psi[[0, k]], dnl.travel_time[[0, k]].unwrap());
        }
    }

    #[test]
    fn on_time_and_late_departures() {
        // T_A = t0 + L/v.
        let (net, dnl) = single_link_run(20.0, 0.2);
        let params = PenaltyParams { early_weight: 0.5, late_weight: 2.0 };
        let d = effective_delay(&dnl, &net, &params);
        assert!((d.psi[[0, 0]] - 20.0).abs() < 1e-6);
        assert!((d.psi[[0, 60]] - (20.0 + 120.0)).abs() < 1e-6);
    }

    #[test]
    fn psi_dominates_travel_time_and_sentinel_dominates_all() {
        let (net, dnl) = single_link_run(90.0, 0.2);
        let d = effective_delay(&dnl, &net, &PenaltyParams::default());
        let mut worst_completed: f64 = 0.0;
        for k in 0..dnl.grid.n_steps {
            match dnl.travel_time[[0, k]] {
                Some(tt) => {
                    assert!(d.psi[[0, k]] >= tt);
                    worst_completed = worst_completed.max(d.psi[[0, k]]);
                }
                None => assert!(d.psi[[0, k]] > worst_completed),
            }
            assert!(d.psi[[0, k]] >= net.path_free_flow_time(0) - 1e-9);
        }
        assert!(!dnl.truncated.is_empty());
    }
}
