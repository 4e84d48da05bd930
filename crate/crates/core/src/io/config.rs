//! Run configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{parse_toml, read, FormatError};
use crate::delay::PenaltyParams;
use crate::grid::TimeGrid;
use crate::solver::SolverConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub t0_s: f64,
    pub horizon_s: f64,
    pub dt_s: f64,
}

impl GridConfig {
    pub fn grid(&self) -> Result<TimeGrid, FormatError> {
        TimeGrid::new(self.t0_s, self.t0_s + self.horizon_s, self.dt_s).map_err(|e| FormatError::Invalid(e.to_string()))
    }
}

/// Everything one `dnl` or `due` run needs. Relative file paths are resolved against
/// the directory holding the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: PathBuf,
    #[serde(default)]
    pub paths: Option<PathBuf>,
    /// Generate this many shortest paths per O-D instead of reading a path file.
    #[serde(default)]
    pub auto_paths: Option<usize>,
    #[serde(default)]
    pub demand: Option<PathBuf>,
    #[serde(default)]
    pub departures: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_model")]
    pub junction_model: String,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub penalty: PenaltyParams,
}

fn default_model() -> String {
    "fifo-priority".to_string()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, FormatError> {
        let mut cfg: RunConfig = parse_toml(path, &read(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.network);
        for p in [&mut self.paths, &mut self.demand, &mut self.departures, &mut self.out]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    /// Checks the mode (exactly one of demand or departures) and that input files exist.
    pub fn validate(&self) -> Result<(), FormatError> {
        match (&self.demand, &self.departures) {
            (Some(_), Some(_)) => {
                return Err(FormatError::Invalid(
                    "config sets both demand and departures; choose one".into(),
                ))
            }
            (None, None) => return Err(FormatError::Invalid("config sets neither demand nor departures".into())),
            _ => {}
        }
        if self.paths.is_none() && self.auto_paths.is_none() {
            return Err(FormatError::Invalid("config needs paths or auto_paths".into()));
        }
        for p in [Some(&self.network), self.paths.as_ref(), self.demand.as_ref(), self.departures.as_ref()]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return Err(FormatError::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
                ));
            }
        }
        self.grid.grid()?;
        Ok(())
    }
}
