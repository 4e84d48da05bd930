//! Text file formats.
//!
//! * network: TOML with `[[nodes]]` and `[[links]]` tables
//! * paths: TOML with `[[paths]]` tables (`id`, `links`)
//! * demand: CSV `origin,destination,demand_veh,target_arrival_s`
//! * departures: CSV `path_id,0,1,…,N-1`, one row per path, rates in veh/s
//!
//! See `fixtures/braess/` for a complete example.

mod config;
mod paths;
mod write;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{GridConfig, RunConfig};
pub use paths::enumerate_paths;
pub use write::{
    read_matrix_csv, read_od_gaps, write_dnl_outputs, write_due_outputs, write_link_timeseries, write_matrix_csv,
    write_path_curves, write_plot_script, DnlSummary, DueSummary, OdGapRecord,
};

use crate::network::{NodeId, PathId, RawLink, RawNode, RawOd, RawPath};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("empty network: no links")]
    EmptyNetwork,
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u32 },
    #[error("departure matrix dimension mismatch: expected {expected_rows}x{expected_cols}, found {rows}x{cols}")]
    Dimension {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("negative departure rate {value} at path {path}, step {step}")]
    NegativeRate { path: PathId, step: usize, value: f64 },
    #[error("unknown path id {0}")]
    UnknownPath(PathId),
    #[error("no path from node {origin} to node {destination}")]
    Unreachable { origin: NodeId, destination: NodeId },
    #[error("empty horizon: nothing to write")]
    EmptyHorizon,
    #[error("{0}")]
    Invalid(String),
}

impl FormatError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn csv(path: &Path, source: csv::Error) -> Self {
        FormatError::Csv {
            path: path.to_path_buf(),
            source,
        }
    }
}

fn read(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|e| FormatError::io(path, e))
}

fn parse_toml<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, FormatError> {
    toml::from_str(text).map_err(|e| FormatError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    #[serde(default)]
    nodes: Vec<RawNode>,
    #[serde(default)]
    links: Vec<RawLink>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathsFile {
    #[serde(default)]
    paths: Vec<RawPath>,
}

fn check_unique<I: IntoIterator<Item = u32>>(kind: &'static str, ids: I) -> Result<(), FormatError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(FormatError::DuplicateId { kind, id });
        }
    }
    Ok(())
}

pub fn parse_network(path: &Path, text: &str) -> Result<(Vec<RawNode>, Vec<RawLink>), FormatError> {
    let file: NetworkFile = parse_toml(path, text)?;
    if file.links.is_empty() {
        return Err(FormatError::EmptyNetwork);
    }
    check_unique("node", file.nodes.iter().map(|n| n.id.0))?;
    check_unique("link", file.links.iter().map(|l| l.id.0))?;
    Ok((file.nodes, file.links))
}

pub fn load_network(path: &Path) -> Result<(Vec<RawNode>, Vec<RawLink>), FormatError> {
    parse_network(path, &read(path)?)
}

pub fn network_to_toml(nodes: &[RawNode], links: &[RawLink]) -> String {
    let file = NetworkFile {
        nodes: nodes.to_vec(),
        links: links.to_vec(),
    };
    toml::to_string(&file).expect("network records serialize")
}

pub fn load_paths(path: &Path) -> Result<Vec<RawPath>, FormatError> {
    let file: PathsFile = parse_toml(path, &read(path)?)?;
    check_unique("path", file.paths.iter().map(|p| p.id.0))?;
    Ok(file.paths)
}

pub fn paths_to_toml(paths: &[RawPath]) -> String {
    toml::to_string(&PathsFile { paths: paths.to_vec() }).expect("path records serialize")
}

pub fn write_paths(path: &Path, paths: &[RawPath]) -> Result<(), FormatError> {
    fs::write(path, paths_to_toml(paths)).map_err(|e| FormatError::io(path, e))
}

pub fn load_demand(path: &Path) -> Result<Vec<RawOd>, FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| FormatError::csv(path, e))?;
    let mut out = Vec::new();
    for rec in reader.deserialize::<RawOd>() {
        let od = rec.map_err(|e| FormatError::csv(path, e))?;
        out.push(od);
    }
    Ok(out)
}

pub fn write_demand(path: &Path, ods: &[RawOd]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| FormatError::csv(path, e))?;
    for od in ods {
        w.serialize(od).map_err(|e| FormatError::csv(path, e))?;
    }
    w.flush().map_err(|e| FormatError::io(path, e))
}

/// Reads a departure matrix and orders its rows as `path_ids`.
///
/// Every path must appear exactly once and each row must carry `n_steps` rates.
pub fn load_departures(path: &Path, path_ids: &[PathId], n_steps: usize) -> Result<Array2<f64>, FormatError> {
    let (ids, matrix) = read_matrix_csv(path)?;
    let (rows, cols) = matrix.dim();
    if rows != path_ids.len() || cols != n_steps {
        return Err(FormatError::Dimension {
            expected_rows: path_ids.len(),
            expected_cols: n_steps,
            rows,
            cols,
        });
    }
    let mut out = Array2::zeros((rows, cols));
    let mut filled = vec![false; rows];
    for (r, id) in ids.iter().enumerate() {
        let target = path_ids
            .iter()
            .position(|p| p == id)
            .ok_or(FormatError::UnknownPath(*id))?;
        if filled[target] {
            return Err(FormatError::DuplicateId { kind: "path", id: id.0 });
        }
        filled[target] = true;
        for k in 0..cols {
            let v = matrix[[r, k]];
            if !(v >= 0.0 && v.is_finite()) {
                return Err(FormatError::NegativeRate {
                    path: *id,
                    step: k,
                    value: v,
                });
            }
            out[[target, k]] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
