//! Link boundary state and the cumulative-count formulas for demand, supply and
//! entry/exit times.
//!
//! Cumulative curves are stored on grid points and read as piecewise linear.

use crate::grid::TimeGrid;
use crate::network::Link;

/// Tolerance on cumulative counts when testing the demand/supply branch conditions.
pub const COUNT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct LinkState {
    /// Cumulative entering count on grid points (`n_steps + 1`).
    pub n_up: Vec<f64>,
    /// Cumulative exiting count on grid points.
    pub n_dn: Vec<f64>,
    /// Inflow per step (veh/s).
    pub inflow: Vec<f64>,
    pub outflow: Vec<f64>,
    /// Demand and supply evaluated at the start of each step.
    pub demand: Vec<f64>,
    pub supply: Vec<f64>,
    /// Global indices of the paths using this link; the position is the path's slot.
    pub paths: Vec<usize>,
    /// Entrance composition, `n_steps × paths.len()`, row-major. Rows of steps with
    /// zero inflow are all zero and must not be read.
    pub entry_composition: Vec<f64>,
    /// Last grid point whose counts are final.
    pub(crate) known: usize,
}

impl LinkState {
    pub fn new(n_steps: usize, paths: Vec<usize>) -> Self {
        let width = paths.len();
        LinkState {
            n_up: vec![0.0; n_steps + 1],
            n_dn: vec![0.0; n_steps + 1],
            inflow: vec![0.0; n_steps],
            outflow: vec![0.0; n_steps],
            demand: vec![0.0; n_steps],
            supply: vec![0.0; n_steps],
            paths,
            entry_composition: vec![0.0; n_steps * width],
            known: 0,
        }
    }

    /// Builds a state from complete cumulative curves (all points final).
    pub fn from_curves(n_up: Vec<f64>, n_dn: Vec<f64>, dt: f64) -> Self {
        assert_eq!(n_up.len(), n_dn.len());
        let n_steps = n_up.len() - 1;
        let rate = |c: &[f64]| c.windows(2).map(|w| (w[1] - w[0]) / dt).collect::<Vec<_>>();
        let inflow = rate(&n_up);
        let outflow = rate(&n_dn);
        LinkState {
            inflow,
            outflow,
            demand: vec![0.0; n_steps],
            supply: vec![0.0; n_steps],
            paths: Vec::new(),
            entry_composition: Vec::new(),
            known: n_steps,
            n_up,
            n_dn,
        }
    }

    pub fn width(&self) -> usize {
        self.paths.len()
    }

    /// Entrance composition of step `k`, or `None` when nothing entered.
    pub fn composition(&self, k: usize) -> Option<&[f64]> {
        if self.inflow[k] > 0.0 {
            let w = self.width();
            Some(&self.entry_composition[k * w..(k + 1) * w])
        } else {
            None
        }
    }

    /// Step in which the next vehicle to exit at grid point `k` entered the link.
    pub(crate) fn exit_step(&self, k: usize) -> Option<usize> {
        if self.known == 0 {
            return None;
        }
        let target = self.n_dn[k];
        let upper = &self.n_up[1..=self.known];
        let idx = upper.partition_point(|&c| c <= target);
        (idx < upper.len()).then_some(idx)
    }

    pub(crate) fn up_at(&self, grid: &TimeGrid, t: f64) -> f64 {
        curve_at(&self.n_up, self.known, grid, t)
    }

    pub(crate) fn dn_at(&self, grid: &TimeGrid, t: f64) -> f64 {
        curve_at(&self.n_dn, self.known, grid, t)
    }
}

/// Value of a cumulative curve at `t`: zero before `t0`, linear between grid points,
/// held at the last final point beyond it.
pub fn curve_at(curve: &[f64], known: usize, grid: &TimeGrid, t: f64) -> f64 {
    let pos = (t - grid.t0_s) / grid.dt_s;
    if pos <= 0.0 {
        return curve[0];
    }
    let i = pos.floor() as usize;
    if i >= known {
        return curve[known];
    }
    let frac = pos - i as f64;
    curve[i] + frac * (curve[i + 1] - curve[i])
}

/// Earliest time at which a nondecreasing curve reaches `count`, or `None` if it never
/// does within the final points.
pub fn earliest_time_reaching(curve: &[f64], known: usize, grid: &TimeGrid, count: f64) -> Option<f64> {
    let pts = &curve[..=known];
    let idx = pts.partition_point(|&c| c < count);
    if idx == pts.len() {
        return None;
    }
    if idx == 0 {
        return Some(grid.t0_s);
    }
    let (c0, c1) = (pts[idx - 1], pts[idx]);
    let frac = (count - c0) / (c1 - c0);
    Some(grid.time(idx - 1) + frac * grid.dt_s)
}

/// Maximum exit flow at the start of step `k`.
///
/// Free-flowing links send what entered `L/v` earlier; links holding a queue send at
/// capacity. The lagged inflow is averaged over the lookback window of one step, and
/// no link sends more than it holds within reach of its exit.
pub fn link_demand(link: &Link, state: &LinkState, grid: &TimeGrid, k: usize) -> f64 {
    let t = grid.time(k);
    let lag = t - link.free_flow_time();
    let reach = (lag + grid.dt_s).min(t);
    let n_dn = state.n_dn[k];
    let available = (state.up_at(grid, reach) - n_dn).max(0.0) / grid.dt_s;
    if state.up_at(grid, lag) - n_dn > COUNT_TOLERANCE {
        link.capacity_vps.min(available)
    } else {
        // N_up(t - L/v) = N_dn(t): the lagged inflow.
        available.min(link.capacity_vps)
    }
}

/// Maximum entry flow at the start of step `k`.
///
/// A link with spare storage accepts capacity; a link at its jam bound accepts what
/// left its exit `L/w` earlier.
pub fn link_supply(link: &Link, state: &LinkState, grid: &TimeGrid, k: usize) -> f64 {
    let t = grid.time(k);
    let lag = t - link.wave_time();
    let reach = (lag + grid.dt_s).min(t);
    let n_up = state.n_up[k];
    let room = (state.dn_at(grid, reach) + link.storage() - n_up).max(0.0) / grid.dt_s;
    if n_up >= state.dn_at(grid, lag) + link.storage() - COUNT_TOLERANCE {
        // Storage bound binds: the lagged outflow.
        room.min(link.capacity_vps)
    } else {
        link.capacity_vps.min(room)
    }
}

/// Entry time `τ(t)`: earliest time with `N_up(τ) = N_dn(t)`.
pub fn entry_time(state: &LinkState, grid: &TimeGrid, t: f64) -> Option<f64> {
    let count = state.dn_at(grid, t);
    earliest_time_reaching(&state.n_up, state.known, grid, count - COUNT_TOLERANCE)
}

/// Exit time `λ(t)`: earliest time with `N_dn(λ) = N_up(t)`. `None` while the vehicle
/// entering at `t` has not exited by the end of the recorded horizon.
pub fn exit_time(state: &LinkState, grid: &TimeGrid, t: f64) -> Option<f64> {
    let count = state.up_at(grid, t);
    earliest_time_reaching(&state.n_dn, state.known, grid, count - COUNT_TOLERANCE)
}

/// Exit time of a vehicle entering `link` at `t`, continued by free flow where the
/// horizontal difference is degenerate (no vehicles, or a cleared queue).
pub fn link_exit_time(link: &Link, state: &LinkState, grid: &TimeGrid, t: f64) -> Option<f64> {
    exit_time(state, grid, t).map(|lam| lam.max(t + link.free_flow_time()))
}
