//! Result writers. Every table has a header row and a fixed column order; numbers are
//! printed in shortest round-trip form so repeated runs give identical bytes.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::FormatError;
use crate::dnl::DnlResult;
use crate::network::{Network, NodeId, PathId};
use crate::solver::{IterationTiming, OdGap, SolveReport, SolverConfig};

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, FormatError> {
    csv::Writer::from_path(path).map_err(|e| FormatError::csv(path, e))
}

fn put<I, T>(w: &mut csv::Writer<fs::File>, path: &Path, record: I) -> Result<(), FormatError>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(record).map_err(|e| FormatError::csv(path, e))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<(), FormatError> {
    w.flush().map_err(|e| FormatError::io(path, e))
}

fn check_horizon(n_steps: usize) -> Result<(), FormatError> {
    if n_steps == 0 {
        Err(FormatError::EmptyHorizon)
    } else {
        Ok(())
    }
}

fn path_ids(net: &Network) -> Vec<PathId> {
    net.paths.iter().map(|p| p.id).collect()
}

/// `path_id,0,1,…` with one row per path.
pub fn write_matrix_csv(path: &Path, ids: &[PathId], m: &Array2<f64>) -> Result<(), FormatError> {
    write_rows(path, ids, m.ncols(), |r, k| m[[r, k]].to_string())
}

fn write_rows(
    path: &Path,
    ids: &[PathId],
    n_steps: usize,
    cell: impl Fn(usize, usize) -> String,
) -> Result<(), FormatError> {
    check_horizon(n_steps)?;
    let mut w = csv_writer(path)?;
    let header: Vec<String> = std::iter::once("path_id".to_string())
        .chain((0..n_steps).map(|k| k.to_string()))
        .collect();
    put(&mut w, path, &header)?;
    for (r, id) in ids.iter().enumerate() {
        let row: Vec<String> = std::iter::once(id.to_string())
            .chain((0..n_steps).map(|k| cell(r, k)))
            .collect();
        put(&mut w, path, &row)?;
    }
    finish(w, path)
}

/// Reads a `path_id,0,1,…` table. Rows keep file order.
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<PathId>, Array2<f64>), FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| FormatError::csv(path, e))?;
    let header = reader.headers().map_err(|e| FormatError::csv(path, e))?.clone();
    let cols = header.len().saturating_sub(1);
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| FormatError::csv(path, e))?;
        if rec.len() != cols + 1 {
            return Err(FormatError::Dimension {
                expected_rows: r + 1,
                expected_cols: cols,
                rows: r + 1,
                cols: rec.len().saturating_sub(1),
            });
        }
        let bad = |field: &str, col: usize| FormatError::Parse {
            path: path.to_path_buf(),
            message: format!("row {}, column {}: cannot parse {field:?}", r + 2, col + 1),
        };
        let id: u32 = rec[0].parse().map_err(|_| bad(&rec[0], 0))?;
        ids.push(PathId(id));
        for c in 0..cols {
            let v: f64 = rec[c + 1].parse().map_err(|_| bad(&rec[c + 1], c + 1))?;
            values.push(v);
        }
    }
    let m = Array2::from_shape_vec((ids.len(), cols), values).expect("row lengths checked");
    Ok((ids, m))
}

/// Per link and step: flows, average density `(N_up − N_dn) / L` at the end of the
/// step, and the same quantities relative to jam density and capacity.
pub fn write_link_timeseries(path: &Path, net: &Network, dnl: &DnlResult) -> Result<(), FormatError> {
    let n = dnl.grid.n_steps;
    check_horizon(n)?;
    let mut w = csv_writer(path)?;
    put(
        &mut w,
        path,
        [
            "link_id",
            "step",
            "time_s",
            "inflow_vps",
            "outflow_vps",
            "density_vpm",
            "relative_density",
            "relative_inflow",
            "relative_outflow",
        ],
    )?;
    for (link, st) in net.links.iter().zip(&dnl.links) {
        for k in 0..n {
            let density = (st.n_up[k + 1] - st.n_dn[k + 1]) / link.length_m;
            put(
                &mut w,
                path,
                [
                    link.id.to_string(),
                    k.to_string(),
                    dnl.grid.time(k).to_string(),
                    st.inflow[k].to_string(),
                    st.outflow[k].to_string(),
                    density.to_string(),
                    (density / link.jam_density_vpm).to_string(),
                    (st.inflow[k] / link.capacity_vps).to_string(),
                    (st.outflow[k] / link.capacity_vps).to_string(),
                ],
            )?;
        }
    }
    finish(w, path)
}

/// Travel times per path and departure step; empty cells did not finish in the horizon.
fn write_travel_times(path: &Path, net: &Network, dnl: &DnlResult) -> Result<(), FormatError> {
    write_rows(path, &path_ids(net), dnl.grid.n_steps, |r, k| {
        dnl.travel_time[[r, k]].map(|d| d.to_string()).unwrap_or_default()
    })
}

fn write_od_gaps(path: &Path, gaps: &[OdGap]) -> Result<(), FormatError> {
    let mut w = csv_writer(path)?;
    put(
        &mut w,
        path,
        ["origin", "destination", "gap_s", "min_cost_s", "relative_gap", "used_cells"],
    )?;
    for g in gaps {
        let rel = if g.min_cost_s > 0.0 { g.gap_s / g.min_cost_s } else { 0.0 };
        put(
            &mut w,
            path,
            [
                g.origin.to_string(),
                g.destination.to_string(),
                g.gap_s.to_string(),
                g.min_cost_s.to_string(),
                rel.to_string(),
                g.used_cells.to_string(),
            ],
        )?;
    }
    finish(w, path)
}

/// Row of `od_gaps.csv`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct OdGapRecord {
    pub origin: NodeId,
    pub destination: NodeId,
    pub gap_s: f64,
    pub min_cost_s: f64,
    pub relative_gap: f64,
    pub used_cells: usize,
}

pub fn read_od_gaps(path: &Path) -> Result<Vec<OdGapRecord>, FormatError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| FormatError::csv(path, e))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| FormatError::csv(path, e)))
        .collect()
}

fn write_convergence(path: &Path, history: &[f64]) -> Result<(), FormatError> {
    let mut w = csv_writer(path)?;
    put(&mut w, path, ["iteration", "relative_gap", "log10_relative_gap"])?;
    for (i, g) in history.iter().enumerate() {
        put(&mut w, path, [(i + 1).to_string(), g.to_string(), g.log10().to_string()])?;
    }
    finish(w, path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| FormatError::io(path, e))
}

/// Per-step departure rate and effective delay of one path.
pub fn write_path_curves(path: &Path, times: &[f64], rates: &[f64], delays: &[f64]) -> Result<(), FormatError> {
    check_horizon(times.len())?;
    let mut w = csv_writer(path)?;
    put(&mut w, path, ["step", "time_s", "departure_rate_vps", "effective_delay_s"])?;
    for k in 0..times.len() {
        put(
            &mut w,
            path,
            [k.to_string(), times[k].to_string(), rates[k].to_string(), delays[k].to_string()],
        )?;
    }
    finish(w, path)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DnlSummary {
    pub mode: String,
    pub links: usize,
    pub paths: usize,
    pub steps: usize,
    pub t0_s: f64,
    pub dt_s: f64,
    pub departed_veh: f64,
    pub arrived_veh: f64,
    pub truncated_cells: usize,
    pub max_conservation_residual: f64,
    pub max_balance_residual: f64,
    pub warnings: Vec<String>,
}

impl DnlSummary {
    pub fn new(net: &Network, dnl: &DnlResult) -> Self {
        let n = dnl.grid.n_steps;
        DnlSummary {
            mode: "dnl".into(),
            links: net.links.len(),
            paths: net.paths.len(),
            steps: n,
            t0_s: dnl.grid.t0_s,
            dt_s: dnl.grid.dt_s,
            departed_veh: dnl.origins.iter().map(|o| o.cum_departures[n]).sum(),
            arrived_veh: dnl.arrived[n],
            truncated_cells: dnl.truncated.len(),
            max_conservation_residual: dnl.conservation_residual.iter().copied().fold(0.0, f64::max),
            max_balance_residual: dnl.balance_residual.iter().copied().fold(0.0, f64::max),
            warnings: dnl.warnings.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DueSummary {
    pub mode: String,
    /// `CONVERGED` or `NOT-CONVERGED`.
    pub status: String,
    pub iterations_used: usize,
    pub final_relative_gap: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub paths: usize,
    pub steps: usize,
    pub t0_s: f64,
    pub dt_s: f64,
    pub max_od_gap_s: f64,
    pub max_relative_od_gap: f64,
    pub dnl_time_s: f64,
    pub update_time_s: f64,
    pub timings: Vec<IterationTiming>,
    pub warnings: Vec<String>,
}

impl DueSummary {
    pub fn new(net: &Network, report: &SolveReport, config: &SolverConfig) -> Self {
        let grid = report.final_dnl.grid;
        DueSummary {
            mode: "due".into(),
            status: if report.converged { "CONVERGED" } else { "NOT-CONVERGED" }.into(),
            iterations_used: report.iterations_used,
            final_relative_gap: report.relative_gap_history.last().copied().unwrap_or(0.0),
            epsilon: config.epsilon,
            alpha: config.alpha,
            paths: net.paths.len(),
            steps: grid.n_steps,
            t0_s: grid.t0_s,
            dt_s: grid.dt_s,
            max_od_gap_s: report.od_gaps.iter().map(|g| g.gap_s).fold(0.0, f64::max),
            max_relative_od_gap: report
                .od_gaps
                .iter()
                .filter(|g| g.min_cost_s > 0.0)
                .map(|g| g.gap_s / g.min_cost_s)
                .fold(0.0, f64::max),
            dnl_time_s: report.dnl_time.as_secs_f64(),
            update_time_s: report.update_time.as_secs_f64(),
            timings: report.timings.clone(),
            warnings: report.warnings.clone(),
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), FormatError> {
    fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))
}

pub fn write_dnl_outputs(dir: &Path, net: &Network, dnl: &DnlResult) -> Result<(), FormatError> {
    check_horizon(dnl.grid.n_steps)?;
    ensure_dir(dir)?;
    write_link_timeseries(&dir.join("link_timeseries.csv"), net, dnl)?;
    write_travel_times(&dir.join("travel_times.csv"), net, dnl)?;
    write_json(&dir.join("summary.json"), &DnlSummary::new(net, dnl))?;
    write_plot_script(dir)
}

pub fn write_due_outputs(
    dir: &Path,
    net: &Network,
    report: &SolveReport,
    config: &SolverConfig,
) -> Result<(), FormatError> {
    check_horizon(report.h_final.ncols())?;
    ensure_dir(dir)?;
    let ids = path_ids(net);
    write_matrix_csv(&dir.join("h_final.csv"), &ids, &report.h_final)?;
    write_matrix_csv(&dir.join("eff_delay.csv"), &ids, &report.psi_final.psi)?;
    write_od_gaps(&dir.join("od_gaps.csv"), &report.od_gaps)?;
    write_convergence(&dir.join("convergence.csv"), &report.relative_gap_history)?;
    write_link_timeseries(&dir.join("link_timeseries.csv"), net, &report.final_dnl)?;
    write_travel_times(&dir.join("travel_times.csv"), net, &report.final_dnl)?;
    write_json(&dir.join("summary.json"), &DueSummary::new(net, report, config))?;
    write_plot_script(dir)
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plots for a run directory: convergence, path curves and link densities.

usage: python3 plot.py [path_id ...]
"""
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def rows(name):
    with open(os.path.join(HERE, name)) as f:
        return list(csv.reader(f))


def matrix(name):
    table = rows(name)
    return {r[0]: [float(x) if x else float("nan") for x in r[1:]] for r in table[1:]}


if os.path.exists(os.path.join(HERE, "convergence.csv")):
    conv = rows("convergence.csv")[1:]
    plt.figure()
    plt.plot([int(r[0]) for r in conv], [float(r[2]) for r in conv], marker=".")
    plt.xlabel("iteration")
    plt.ylabel("log10 relative gap")
    plt.savefig(os.path.join(HERE, "convergence.png"), dpi=120)

if os.path.exists(os.path.join(HERE, "h_final.csv")):
    h = matrix("h_final.csv")
    psi = matrix("eff_delay.csv")
    chosen = sys.argv[1:] or list(h)[:2]
    for pid in chosen:
        fig, ax = plt.subplots()
        ax.plot(psi[pid], color="tab:blue")
        ax.set_xlabel("departure step")
        ax.set_ylabel("effective delay (s)", color="tab:blue")
        ax2 = ax.twinx()
        ax2.plot(h[pid], color="tab:red")
        ax2.set_ylabel("departure rate (veh/s)", color="tab:red")
        fig.savefig(os.path.join(HERE, "path_%s.png" % pid), dpi=120)

series = {}
for r in rows("link_timeseries.csv")[1:]:
    series.setdefault(r[0], []).append(float(r[6]))
plt.figure()
for link, values in series.items():
    plt.plot(values, label="link %s" % link)
plt.xlabel("step")
plt.ylabel("relative density")
if len(series) <= 12:
    plt.legend()
plt.savefig(os.path.join(HERE, "link_density.png"), dpi=120)
"#;

pub fn write_plot_script(dir: &Path) -> Result<(), FormatError> {
    let path = dir.join("plot.py");
    fs::write(&path, PLOT_SCRIPT).map_err(|e| FormatError::io(&path, e))
}
