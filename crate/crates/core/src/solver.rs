//! Fixed-point projection solver for route-and-departure-time dynamic user equilibrium.
//!
//! Each iteration loads the current departure profile, turns travel times into
//! effective delays, and moves every O-D block to `[h − αΨ + v]_+`, where the dual
//! shift `v` restores the O-D demand. The shift is the root of a continuous,
//! nondecreasing, piecewise-linear function and is found by bracketing and bisection.

use std::time::{Duration, Instant};

use log::{info, warn};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delay::{effective_delay, DelayProfile, PenaltyParams};
use crate::dnl::{run_dnl, DnlError, DnlResult};
use crate::grid::TimeGrid;
use crate::junction::JunctionModel;
use crate::network::{Network, NodeId};

const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("O-D ({origin}, {destination}) has positive demand but no paths")]
    NoPaths { origin: NodeId, destination: NodeId },
    #[error(transparent)]
    Dnl(#[from] DnlError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Step size `α` (veh/s per second of cost).
    pub alpha: f64,
    /// Relative-gap threshold.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Indifference band (seconds) for bounded rationality.
    pub br_tolerance: f64,
    /// Dual residual tolerance, relative to the O-D demand.
    pub bisect_tol: f64,
    /// A cell is "used" when its rate exceeds this fraction of the O-D's largest rate.
    pub used_flow_threshold: f64,
    /// Departure window of the initial profile; the whole horizon when absent.
    pub initial_window: Option<[f64; 2]>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: 1e-3,
            epsilon: 1e-4,
            max_iters: 200,
            br_tolerance: 0.0,
            bisect_tol: 1e-9,
            used_flow_threshold: 1e-6,
            initial_window: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1");
        }
        if !(self.br_tolerance >= 0.0) {
            return bad("br_tolerance must be nonnegative");
        }
        if !(self.bisect_tol > 0.0) {
            return bad("bisect_tol must be positive");
        }
        if !(0.0..1.0).contains(&self.used_flow_threshold) {
            return bad("used_flow_threshold must lie in [0, 1)");
        }
        if let Some([a, b]) = self.initial_window {
            if !(b > a) {
                return bad("initial_window must be an increasing interval");
            }
        }
        Ok(())
    }
}

/// Uniform initial profile: each O-D demand spread evenly over its paths and over
/// the steps starting inside `window` (the whole horizon by default).
pub fn init_departures(net: &Network, grid: &TimeGrid, window: Option<[f64; 2]>) -> Result<Array2<f64>, SolverError> {
    let steps: Vec<usize> = match window {
        None => (0..grid.n_steps).collect(),
        Some([a, b]) => (0..grid.n_steps)
            .filter(|&k| {
                let t = grid.time(k);
                t >= a - 1e-9 && t < b - 1e-9
            })
            .collect(),
    };
    if steps.is_empty() {
        return Err(SolverError::InvalidConfig(
            "initial departure window contains no time step".into(),
        ));
    }
    let mut h = Array2::zeros((net.paths.len(), grid.n_steps));
    for od in &net.ods {
        if od.demand_veh <= 0.0 {
            continue;
        }
        if od.paths.is_empty() {
            return Err(SolverError::NoPaths {
                origin: od.origin,
                destination: od.destination,
            });
        }
        let rate = od.demand_veh / (od.paths.len() as f64 * steps.len() as f64 * grid.dt_s);
        for &p in &od.paths {
            for &k in &steps {
                h[[p, k]] = rate;
            }
        }
    }
    Ok(h)
}

fn residual_of(base: &[f64], x: f64, demand: f64, dt: f64) -> f64 {
    base.iter().map(|&c| (c + x).max(0.0)).sum::<f64>() * dt - demand
}

/// `G(x) = Σ_p Σ_k [h − αΨ + x]_+ · Δt − Q` over one O-D block.
pub fn dual_residual(h: &[f64], psi: &[f64], alpha: f64, x: f64, demand: f64, dt: f64) -> f64 {
    h.iter()
        .zip(psi)
        .map(|(&hv, &pv)| (hv - alpha * pv + x).max(0.0))
        .sum::<f64>()
        * dt
        - demand
}

/// Root of `G` for precomputed `c = h − αΨ` values.
fn solve_shift(base: &[f64], demand: f64, dt: f64, span: f64, tol: f64) -> f64 {
    if demand <= 0.0 || base.is_empty() {
        return 0.0;
    }
    let cmax = base.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = -cmax;
    let mut hi = demand / span;
    while residual_of(base, hi, demand, dt) <= 0.0 {
        hi *= 2.0;
    }
    let target = tol * demand;
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTIONS {
        mid = 0.5 * (lo + hi);
        let g = residual_of(base, mid, demand, dt);
        if g.abs() <= target {
            break;
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid
}

/// Dual variable `v` with `|G(v)| ≤ tol · Q`. Zero when `Q ≤ 0`.
pub fn solve_dual(h: &[f64], psi: &[f64], alpha: f64, demand: f64, grid: &TimeGrid, tol: f64) -> f64 {
    let base: Vec<f64> = h.iter().zip(psi).map(|(&hv, &pv)| hv - alpha * pv).collect();
    solve_shift(&base, demand, grid.dt_s, grid.span(), tol)
}

/// One projection step `h ← [h − αΨ + v]_+`, O-D by O-D.
///
/// With a positive indifference band, cells whose cost is within the band of the O-D
/// minimum are charged the minimum cost instead of their own.
pub fn fixed_point_update(
    h: &Array2<f64>,
    psi: &DelayProfile,
    net: &Network,
    grid: &TimeGrid,
    config: &SolverConfig,
) -> Array2<f64> {
    let n = grid.n_steps;
    let blocks: Vec<(usize, Vec<f64>)> = net
        .ods
        .par_iter()
        .enumerate()
        .map(|(o, od)| {
            if od.demand_veh <= 0.0 || od.paths.is_empty() {
                return (o, vec![0.0; od.paths.len() * n]);
            }
            let cost = |p: usize, k: usize| psi.psi[[p, k]];
            let floor = od
                .paths
                .iter()
                .flat_map(|&p| (0..n).map(move |k| cost(p, k)))
                .fold(f64::INFINITY, f64::min);
            let band = config.br_tolerance;
            let base: Vec<f64> = od
                .paths
                .iter()
                .flat_map(|&p| {
                    (0..n).map(move |k| {
                        let c = cost(p, k);
                        let charged = if band > 0.0 && c - floor <= band { floor } else { c };
                        h[[p, k]] - config.alpha * charged
                    })
                })
                .collect();
            let v = solve_shift(&base, od.demand_veh, grid.dt_s, grid.span(), config.bisect_tol);
            (o, base.into_iter().map(|c| (c + v).max(0.0)).collect())
        })
        .collect();
    let mut next = Array2::zeros(h.dim());
    for (o, values) in blocks {
        for (r, &p) in net.ods[o].paths.iter().enumerate() {
            for k in 0..n {
                next[[p, k]] = values[r * n + k];
            }
        }
    }
    next
}

/// `‖h_next − h‖² / ‖h‖²` in the discrete L² norm.
pub fn relative_gap(next: &Array2<f64>, prev: &Array2<f64>, dt: f64) -> f64 {
    let num: f64 = next.iter().zip(prev).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * dt;
    let den: f64 = prev.iter().map(|b| b * b).sum::<f64>() * dt;
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Largest relative violation of the demand constraint over all O-D pairs.
pub fn demand_residual(h: &Array2<f64>, net: &Network, dt: f64) -> f64 {
    net.ods
        .iter()
        .filter(|od| od.demand_veh > 0.0)
        .map(|od| {
            let total: f64 = od.paths.iter().map(|&p| h.row(p).sum()).sum::<f64>() * dt;
            (total - od.demand_veh).abs() / od.demand_veh
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OdGap {
    pub origin: NodeId,
    pub destination: NodeId,
    /// Spread of effective delay over used cells (seconds).
    pub gap_s: f64,
    /// Smallest effective delay over used cells.
    pub min_cost_s: f64,
    pub used_cells: usize,
}

/// Per-O-D spread of effective delay over used `(path, step)` cells.
pub fn od_gap(h: &Array2<f64>, psi: &DelayProfile, net: &Network, threshold: f64) -> (Vec<OdGap>, Vec<String>) {
    let mut warnings = Vec::new();
    let gaps = net
        .ods
        .iter()
        .map(|od| {
            let hmax = od
                .paths
                .iter()
                .flat_map(|&p| h.row(p).to_vec())
                .fold(0.0, f64::max);
            let (mut lo, mut hi, mut used) = (f64::INFINITY, f64::NEG_INFINITY, 0usize);
            if hmax > 0.0 {
                for &p in &od.paths {
                    for (k, &rate) in h.row(p).iter().enumerate() {
                        if rate > threshold * hmax {
                            let c = psi.psi[[p, k]];
                            lo = lo.min(c);
                            hi = hi.max(c);
                            used += 1;
                        }
                    }
                }
            }
            if used == 0 {
                if od.demand_veh > 0.0 {
                    warnings.push(format!(
                        "O-D ({}, {}) has no used cell; gap reported as 0",
                        od.origin, od.destination
                    ));
                }
                return OdGap {
                    origin: od.origin,
                    destination: od.destination,
                    gap_s: 0.0,
                    min_cost_s: 0.0,
                    used_cells: 0,
                };
            }
            OdGap {
                origin: od.origin,
                destination: od.destination,
                gap_s: hi - lo,
                min_cost_s: lo,
                used_cells: used,
            }
        })
        .collect();
    (gaps, warnings)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTiming {
    pub dnl_s: f64,
    pub update_s: f64,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub iterations_used: usize,
    pub converged: bool,
    pub relative_gap_history: Vec<f64>,
    /// Largest relative demand violation after each update.
    pub demand_residual_history: Vec<f64>,
    pub od_gaps: Vec<OdGap>,
    pub dnl_time: Duration,
    pub update_time: Duration,
    pub timings: Vec<IterationTiming>,
    pub h_final: Array2<f64>,
    pub psi_final: DelayProfile,
    /// Loading of `h_final`.
    pub final_dnl: DnlResult,
    pub warnings: Vec<String>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v[v.len() / 2])
}

/// Runs the fixed-point iteration until the relative gap drops to `epsilon` or the
/// iteration cap is reached. Non-convergence is reported, not an error.
pub fn solve_due(
    net: &Network,
    grid: &TimeGrid,
    config: &SolverConfig,
    penalty: &PenaltyParams,
    model: &dyn JunctionModel,
) -> Result<SolveReport, SolverError> {
    config.validate()?;
    if !penalty.is_valid() {
        return Err(SolverError::InvalidConfig("penalty weights must be nonnegative".into()));
    }
    let mut h = init_departures(net, grid, config.initial_window)?;
    let mut warnings = Vec::new();
    let mut history = Vec::new();
    let mut demand_history = Vec::new();
    let mut timings = Vec::new();
    let (mut dnl_time, mut update_time) = (Duration::ZERO, Duration::ZERO);
    let mut converged = false;

    for iter in 0..config.max_iters {
        let started = Instant::now();
        let dnl = run_dnl(net, &h, grid, model)?;
        let psi = effective_delay(&dnl, net, penalty);
        let dnl_elapsed = started.elapsed();
        if iter == 0 {
            for w in dnl.warnings.iter().filter(|w| w.contains("time step")) {
                warnings.push(w.clone());
            }
            let med_h = median(h.iter().copied().filter(|&x| x > 0.0).collect());
            let med_psi = median(psi.psi.iter().copied().collect());
            if let (Some(mh), Some(mp)) = (med_h, med_psi) {
                let scaled = config.alpha * mp;
                if scaled > 0.0 && ((scaled / mh).log10().abs() > 2.0) {
                    let msg = format!(
                        "alpha·median(psi) = {scaled:.3e} is not comparable to median(h) = {mh:.3e}; consider adjusting alpha"
                    );
                    warn!("{msg}");
                    warnings.push(msg);
                }
            }
        }

        let started = Instant::now();
        let next = fixed_point_update(&h, &psi, net, grid, config);
        let gap = relative_gap(&next, &h, grid.dt_s);
        let update_elapsed = started.elapsed();

        demand_history.push(demand_residual(&next, net, grid.dt_s));
        history.push(gap);
        timings.push(IterationTiming {
            dnl_s: dnl_elapsed.as_secs_f64(),
            update_s: update_elapsed.as_secs_f64(),
        });
        dnl_time += dnl_elapsed;
        update_time += update_elapsed;
        info!("iteration {}: log10 relative gap {:.4}", iter + 1, gap.log10());
        h = next;
        if gap <= config.epsilon {
            converged = true;
            break;
        }
    }

    let started = Instant::now();
    let final_dnl = run_dnl(net, &h, grid, model)?;
    let psi_final = effective_delay(&final_dnl, net, penalty);
    dnl_time += started.elapsed();
    let (od_gaps, gap_warnings) = od_gap(&h, &psi_final, net, config.used_flow_threshold);
    warnings.extend(gap_warnings);
    if !converged {
        warnings.push(format!(
            "not converged after {} iterations (last relative gap {:e})",
            history.len(),
            history.last().copied().unwrap_or(f64::NAN)
        ));
    }

    Ok(SolveReport {
        iterations_used: history.len(),
        converged,
        relative_gap_history: history,
        demand_residual_history: demand_history,
        od_gaps,
        dnl_time,
        update_time,
        timings,
        h_final: h,
        psi_final,
        final_dnl,
        warnings,
    })
}

#[cfg(test)]
mod tests;
