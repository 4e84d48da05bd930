//! Dynamic network loading.
//!
//! Maps a path departure matrix `h` (`|P| × N`, veh/s) to link boundary states and
//! path travel times. Each step computes origin demands, link demands and supplies
//! from lagged cumulative counts, junction flows from the path composition of the
//! exiting traffic, the composition of the entering traffic, and then advances the
//! cumulative counts by one explicit step. Travel times are read off the cumulative
//! curves afterwards by chaining the origin queue exit time with each link's exit time.

pub mod composition;
pub mod link;
pub mod origin;

use log::warn;
use ndarray::Array2;
use rayon::prelude::*;
use thiserror::Error;

pub use composition::{propagate_composition, Feeder, Target};
pub use link::{
    curve_at, earliest_time_reaching, entry_time, exit_time, link_demand, link_exit_time, link_supply, LinkState,
    COUNT_TOLERANCE,
};
pub use origin::{origin_demand, step_origin_queue, OriginState, BIG_M_FACTOR};

use crate::grid::TimeGrid;
use crate::junction::{DistributionMatrix, JunctionError, JunctionIo, JunctionModel};
use crate::network::{Network, NodeId};

/// Largest per-step junction conservation residual (relative) tolerated before aborting.
pub const CONSERVATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DnlError {
    #[error("departure matrix is {rows}x{cols}, expected {paths}x{steps}")]
    Shape {
        rows: usize,
        cols: usize,
        paths: usize,
        steps: usize,
    },
    #[error("invalid departure rate {value} for path index {path} at step {step}")]
    BadRate { path: usize, step: usize, value: f64 },
    #[error("step {step}, node {node}: junction conservation residual {residual:e}")]
    Conservation { step: usize, node: NodeId, residual: f64 },
    #[error("step {step}, node {node}: {source}")]
    Junction {
        step: usize,
        node: NodeId,
        #[source]
        source: JunctionError,
    },
}

#[derive(Clone, Debug)]
pub struct DnlResult {
    pub grid: TimeGrid,
    /// `D_p(t_k)` per path and departure step; `None` when the trip does not finish
    /// within the horizon.
    pub travel_time: Array2<Option<f64>>,
    pub links: Vec<LinkState>,
    pub origins: Vec<OriginState>,
    /// Cumulative vehicles delivered to destinations, on grid points.
    pub arrived: Vec<f64>,
    /// Largest relative junction conservation residual of each step.
    pub conservation_residual: Vec<f64>,
    /// Relative vehicle balance residual on each grid point.
    pub balance_residual: Vec<f64>,
    /// `(path, step)` cells whose vehicles do not exit by the end of the horizon.
    pub truncated: Vec<(usize, usize)>,
    pub warnings: Vec<String>,
}

impl DnlResult {
    pub fn arrival_time(&self, path: usize, step: usize) -> Option<f64> {
        self.travel_time[[path, step]].map(|d| self.grid.time(step) + d)
    }
}

/// Static lookup tables for one network.
struct Plan {
    link_paths: Vec<Vec<usize>>,
    link_targets: Vec<Vec<Target>>,
    /// Junction column (at the link's head node) of each slot.
    link_cols: Vec<Vec<usize>>,
    origin_nodes: Vec<usize>,
    origin_paths: Vec<Vec<usize>>,
    origin_targets: Vec<Vec<Target>>,
    origin_cols: Vec<Vec<usize>>,
    origin_of_node: Vec<Option<usize>>,
    origin_of_path: Vec<usize>,
    has_sink: Vec<bool>,
    big_m: Vec<f64>,
}

impl Plan {
    fn new(net: &Network) -> Self {
        let n_links = net.links.len();
        let n_nodes = net.nodes.len();
        let mut link_paths = vec![Vec::new(); n_links];
        let mut slots: Vec<Vec<usize>> = Vec::with_capacity(net.paths.len());
        for (p, path) in net.paths.iter().enumerate() {
            slots.push(
                path.links
                    .iter()
                    .map(|&l| {
                        link_paths[l].push(p);
                        link_paths[l].len() - 1
                    })
                    .collect(),
            );
        }
        let target_after = |p: usize, r: usize| {
            let path = &net.paths[p];
            if r + 1 < path.links.len() {
                Target::Link {
                    link: path.links[r + 1],
                    slot: slots[p][r + 1],
                }
            } else {
                Target::Sink
            }
        };
        let col_at = |node: usize, target: Target| match target {
            Target::Link { link, .. } => net.nodes[node]
                .outgoing
                .iter()
                .position(|&o| o == link)
                .expect("path continues along an outgoing link"),
            Target::Sink => net.nodes[node].outgoing.len(),
        };

        let mut link_targets = vec![Vec::new(); n_links];
        let mut link_cols = vec![Vec::new(); n_links];
        for (l, users) in link_paths.iter().enumerate() {
            let head = net.links[l].head_index();
            for &p in users {
                let r = net.paths[p].links.iter().position(|&x| x == l).unwrap();
                let t = target_after(p, r);
                link_targets[l].push(t);
                link_cols[l].push(col_at(head, t));
            }
        }

        let mut has_sink = vec![false; n_nodes];
        let mut origin_of_node = vec![None; n_nodes];
        let mut origin_nodes = Vec::new();
        let mut origin_paths: Vec<Vec<usize>> = Vec::new();
        let mut origin_targets: Vec<Vec<Target>> = Vec::new();
        let mut origin_cols: Vec<Vec<usize>> = Vec::new();
        let mut origin_of_path = vec![0; net.paths.len()];
        for (p, path) in net.paths.iter().enumerate() {
            let first = path.links[0];
            let last = *path.links.last().unwrap();
            has_sink[net.links[last].head_index()] = true;
            let node = net.links[first].tail_index();
            let o = *origin_of_node[node].get_or_insert_with(|| {
                origin_nodes.push(node);
                origin_paths.push(Vec::new());
                origin_targets.push(Vec::new());
                origin_cols.push(Vec::new());
                origin_nodes.len() - 1
            });
            origin_of_path[p] = o;
            origin_paths[o].push(p);
            let t = Target::Link {
                link: first,
                slot: slots[p][0],
            };
            origin_targets[o].push(t);
            origin_cols[o].push(col_at(node, t));
        }
        let big_m = origin_nodes
            .iter()
            .map(|&n| {
                let cmax = net.nodes[n]
                    .outgoing
                    .iter()
                    .map(|&l| net.links[l].capacity_vps)
                    .fold(0.0, f64::max);
                BIG_M_FACTOR * cmax
            })
            .collect();

        Plan {
            link_paths,
            link_targets,
            link_cols,
            origin_nodes,
            origin_paths,
            origin_targets,
            origin_cols,
            origin_of_node,
            origin_of_path,
            has_sink,
            big_m,
        }
    }
}

/// Loads `departures` onto the network over `grid`.
pub fn run_dnl(
    net: &Network,
    departures: &Array2<f64>,
    grid: &TimeGrid,
    model: &dyn JunctionModel,
) -> Result<DnlResult, DnlError> {
    let n = grid.n_steps;
    let dt = grid.dt_s;
    let (rows, cols) = departures.dim();
    if rows != net.paths.len() || cols != n {
        return Err(DnlError::Shape {
            rows,
            cols,
            paths: net.paths.len(),
            steps: n,
        });
    }
    if let Some(((path, step), &value)) = departures.indexed_iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
        return Err(DnlError::BadRate { path, step, value });
    }

    let mut warnings = Vec::new();
    let min_ff = net.min_free_flow_time();
    if dt > min_ff {
        let msg = format!("time step {dt} s exceeds the minimum link free-flow time {min_ff} s");
        warn!("{msg}");
        warnings.push(msg);
    }

    let plan = Plan::new(net);
    let mut links: Vec<LinkState> = plan
        .link_paths
        .iter()
        .map(|p| LinkState::new(n, p.clone()))
        .collect();
    let mut origins: Vec<OriginState> = plan
        .origin_nodes
        .iter()
        .zip(&plan.origin_paths)
        .map(|(&node, p)| OriginState::new(node, p.clone(), n))
        .collect();
    let mut arrived = vec![0.0; n + 1];
    let mut conservation_residual = vec![0.0_f64; n];
    let mut balance_residual = vec![0.0; n + 1];

    let mut exit_steps: Vec<Option<usize>> = vec![None; links.len()];
    let mut origin_demands = vec![0.0; origins.len()];
    let mut scratch = Vec::new();

    for k in 0..n {
        for (l, st) in links.iter_mut().enumerate() {
            st.demand[k] = link_demand(&net.links[l], st, grid, k);
            st.supply[k] = link_supply(&net.links[l], st, grid, k);
            exit_steps[l] = st.exit_step(k);
        }

        for (o, st) in origins.iter_mut().enumerate() {
            let rate: f64 = st.paths.iter().map(|&p| departures[[p, k]]).sum();
            st.cum_departures[k + 1] = st.cum_departures[k] + dt * rate;
            let queue = (st.cum_departures[k] - st.cum_served[k]).max(0.0);
            origin_demands[o] = origin_demand(queue, rate, plan.big_m[o]).min(queue / dt + rate);
            let w = st.paths.len();
            if let Some(head) = st.head_step(k) {
                let head_rate: f64 = st.paths.iter().map(|&p| departures[[p, head]]).sum();
                for (slot, &p) in st.paths.iter().enumerate() {
                    st.queue_composition[k * w + slot] = departures[[p, head]] / head_rate;
                }
            } else {
                origin_demands[o] = 0.0;
            }
        }

        // Junctions.
        let mut step_arrivals = 0.0;
        for (j, node) in net.nodes.iter().enumerate() {
            let source = plan.origin_of_node[j];
            let m = node.incoming.len() + usize::from(source.is_some());
            let sink_col = node.outgoing.len();
            let ncols = sink_col + usize::from(plan.has_sink[j]);
            if m == 0 || ncols == 0 {
                continue;
            }
            let mut demands = Vec::with_capacity(m);
            scratch.clear();
            for (row, &i) in node.incoming.iter().enumerate() {
                match exit_steps[i] {
                    Some(ks) if links[i].demand[k] > 0.0 => {
                        let w = links[i].width();
                        let mu = &links[i].entry_composition[ks * w..(ks + 1) * w];
                        for (s, &x) in mu.iter().enumerate() {
                            if x > 0.0 {
                                scratch.push((row, plan.link_cols[i][s], x));
                            }
                        }
                        demands.push(links[i].demand[k]);
                    }
                    _ => demands.push(0.0),
                }
            }
            if let Some(o) = source {
                let row = node.incoming.len();
                let w = origins[o].paths.len();
                let mu = &origins[o].queue_composition[k * w..(k + 1) * w];
                if origin_demands[o] > 0.0 {
                    for (s, &x) in mu.iter().enumerate() {
                        if x > 0.0 {
                            scratch.push((row, plan.origin_cols[o][s], x));
                        }
                    }
                }
                demands.push(origin_demands[o]);
            }
            let mut supplies: Vec<f64> = node.outgoing.iter().map(|&l| links[l].supply[k]).collect();
            if plan.has_sink[j] {
                supplies.push(f64::INFINITY);
            }
            let dist = DistributionMatrix::from_fractions(m, ncols, scratch.iter().copied(), &demands).map_err(
                |source| DnlError::Junction {
                    step: k,
                    node: node.id,
                    source,
                },
            )?;
            let io = JunctionIo {
                demands,
                supplies,
                priorities: node.junction_priorities(),
            };
            let flows = model.resolve(&io, &dist);

            for (row, &i) in node.incoming.iter().enumerate() {
                links[i].outflow[k] = flows.outflows[row];
            }
            if let Some(o) = source {
                origins[o].served[k] = flows.outflows[node.incoming.len()];
            }
            for (col, &l) in node.outgoing.iter().enumerate() {
                links[l].inflow[k] = flows.inflows[col];
            }
            if plan.has_sink[j] {
                step_arrivals += flows.inflows[sink_col];
            }
            let out: f64 = flows.outflows.iter().sum();
            let inn: f64 = flows.inflows.iter().sum();
            if out > 0.0 {
                let residual = (out - inn).abs() / out;
                conservation_residual[k] = conservation_residual[k].max(residual);
                if residual > CONSERVATION_TOLERANCE {
                    return Err(DnlError::Conservation {
                        step: k,
                        node: node.id,
                        residual,
                    });
                }
            }
        }

        // Entrance compositions.
        for l in 0..links.len() {
            let inflow = links[l].inflow[k];
            let w = links[l].width();
            if inflow <= 0.0 || w == 0 {
                continue;
            }
            let tail = net.links[l].tail_index();
            let mut feeders: Vec<Feeder<'_>> = Vec::new();
            for &i in &net.nodes[tail].incoming {
                if let Some(ks) = exit_steps[i] {
                    let wi = links[i].width();
                    feeders.push(Feeder {
                        outflow: links[i].outflow[k],
                        exit_composition: &links[i].entry_composition[ks * wi..(ks + 1) * wi],
                        targets: &plan.link_targets[i],
                    });
                }
            }
            if let Some(o) = plan.origin_of_node[tail] {
                let wo = origins[o].paths.len();
                feeders.push(Feeder {
                    outflow: origins[o].served[k],
                    exit_composition: &origins[o].queue_composition[k * wo..(k + 1) * wo],
                    targets: &plan.origin_targets[o],
                });
            }
            if let Some(mu) = propagate_composition(&feeders, l, inflow, w) {
                links[l].entry_composition[k * w..(k + 1) * w].copy_from_slice(&mu);
            }
        }

        // Advance cumulative counts.
        let mut on_links = 0.0;
        for st in links.iter_mut() {
            st.n_up[k + 1] = st.n_up[k] + dt * st.inflow[k];
            st.n_dn[k + 1] = st.n_dn[k] + dt * st.outflow[k];
            st.known = k + 1;
            on_links += st.n_up[k + 1] - st.n_dn[k + 1];
        }
        let mut departed = 0.0;
        let mut queued = 0.0;
        for st in origins.iter_mut() {
            st.cum_served[k + 1] = st.cum_served[k] + dt * st.served[k];
            let rate = (st.cum_departures[k + 1] - st.cum_departures[k]) / dt;
            st.queue_veh[k + 1] = step_origin_queue(st.queue_veh[k], rate, st.served[k], dt);
            st.known = k + 1;
            departed += st.cum_departures[k + 1];
            queued += st.cum_departures[k + 1] - st.cum_served[k + 1];
        }
        arrived[k + 1] = arrived[k] + dt * step_arrivals;
        if departed > 0.0 {
            balance_residual[k + 1] = (departed - arrived[k + 1] - on_links - queued).abs() / departed;
        }
    }

    let rows: Vec<Vec<Option<f64>>> = (0..net.paths.len())
        .into_par_iter()
        .map(|p| {
            let origin = &origins[plan.origin_of_path[p]];
            (0..n)
                .map(|k| {
                    let t = grid.time(k);
                    let mut at = origin.exit_time(grid, t)?;
                    for &l in &net.paths[p].links {
                        at = link_exit_time(&net.links[l], &links[l], grid, at)?;
                    }
                    Some(at - t)
                })
                .collect()
        })
        .collect();
    let mut travel_time = Array2::from_elem((net.paths.len(), n), None);
    let mut truncated = Vec::new();
    for (p, row) in rows.into_iter().enumerate() {
        for (k, d) in row.into_iter().enumerate() {
            if d.is_none() {
                truncated.push((p, k));
            }
            travel_time[[p, k]] = d;
        }
    }
    if !truncated.is_empty() {
        let msg = format!(
            "{} path/departure cells do not reach their destination by the end of the horizon",
            truncated.len()
        );
        warn!("{msg}");
        warnings.push(msg);
    }

    Ok(DnlResult {
        grid: *grid,
        travel_time,
        links,
        origins,
        arrived,
        conservation_residual,
        balance_residual,
        truncated,
        warnings,
    })
}
