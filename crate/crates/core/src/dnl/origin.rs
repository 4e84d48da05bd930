//! Point queues at origin nodes.
//!
//! Each origin keeps cumulative departure and service counts. The queue is a FIFO
//! column: service draws from the oldest unserved departures, and the queue exit
//! time is the horizontal difference between the two curves.

use super::link::{earliest_time_reaching, COUNT_TOLERANCE};
use crate::grid::TimeGrid;

/// Multiple of the largest downstream capacity used as the "unbounded" demand of a
/// non-empty origin queue.
pub const BIG_M_FACTOR: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub struct OriginState {
    /// Node index of the origin.
    pub node: usize,
    /// Global indices of the paths departing here; the position is the path's slot.
    pub paths: Vec<usize>,
    /// Cumulative departures on grid points.
    pub cum_departures: Vec<f64>,
    /// Cumulative vehicles released onto the network.
    pub cum_served: Vec<f64>,
    /// Queue volume on grid points.
    pub queue_veh: Vec<f64>,
    /// Release rate per step.
    pub served: Vec<f64>,
    /// Composition at the head of the queue per step, `n_steps × paths.len()`.
    pub queue_composition: Vec<f64>,
    pub(crate) known: usize,
}

impl OriginState {
    pub fn new(node: usize, paths: Vec<usize>, n_steps: usize) -> Self {
        let width = paths.len();
        OriginState {
            node,
            paths,
            cum_departures: vec![0.0; n_steps + 1],
            cum_served: vec![0.0; n_steps + 1],
            queue_veh: vec![0.0; n_steps + 1],
            served: vec![0.0; n_steps],
            queue_composition: vec![0.0; n_steps * width],
            known: 0,
        }
    }

    /// Queue exit time of the vehicle that joined at `t`.
    pub fn exit_time(&self, grid: &TimeGrid, t: f64) -> Option<f64> {
        let count = super::link::curve_at(&self.cum_departures, self.known, grid, t);
        earliest_time_reaching(&self.cum_served, self.known, grid, count - COUNT_TOLERANCE)
            .map(|s| s.max(t))
    }

    /// Step in which the vehicle at the head of the queue departed, given the served
    /// count at grid point `k` and departures known through `k + 1`.
    pub(crate) fn head_step(&self, k: usize) -> Option<usize> {
        let target = self.cum_served[k];
        let upper = &self.cum_departures[1..=k + 1];
        let idx = upper.partition_point(|&c| c <= target);
        (idx < upper.len()).then_some(idx)
    }
}

/// Demand of an origin: unbounded (`big_m`) while a queue is waiting, otherwise the
/// current departure rate.
pub fn origin_demand(queue_veh: f64, departure_rate: f64, big_m: f64) -> f64 {
    if queue_veh > COUNT_TOLERANCE {
        big_m
    } else {
        departure_rate
    }
}

/// One explicit step of the point-queue balance, clamped at zero.
pub fn step_origin_queue(queue_veh: f64, departure_rate: f64, served_rate: f64, dt: f64) -> f64 {
    (queue_veh + dt * (departure_rate - served_rate)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demand_branches() {
        assert_eq!(origin_demand(0.0, 0.0, 5.0), 0.0);
        assert_eq!(origin_demand(3.0, 0.1, 5.0), 5.0);
        assert_eq!(origin_demand(0.0, 0.4, 5.0), 0.4);
    }

    #[test]
    fn queue_steps() {
        assert!((step_origin_queue(0.0, 1.0, 0.5, 2.0) - 1.0).abs() < 1e-15);
        assert_eq!(step_origin_queue(0.0, 0.7, 0.7, 1.0), 0.0);
        assert_eq!(step_origin_queue(0.3, 0.0, 0.5, 1.0), 0.0);
    }

    #[test]
    fn queue_exit_time_is_horizontal_difference() {
        let grid = TimeGrid::new(0.0, 10.0, 1.0).unwrap();
        let mut o = OriginState::new(0, vec![0], 10);
        // 1 veh/s arrives, 0.5 veh/s served.
        for k in 0..=10 {
            o.cum_departures[k] = k as f64;
            o.cum_served[k] = 0.5 * k as f64;
        }
        o.known = 10;
        assert!((o.exit_time(&grid, 2.0).unwrap() - 4.0).abs() < 1e-6);
        assert!(o.exit_time(&grid, 6.0).is_none());
        assert_eq!(o.exit_time(&grid, 0.0), Some(0.0));
    }
}
