use serde::{Deserialize, Serialize};

use crate::network::NetworkError;

/// Uniform discretization of the horizon `[t0, tf]`.
///
/// Step `k` covers `[t0 + k·dt, t0 + (k+1)·dt)`; cumulative quantities live on the
/// `n_steps + 1` grid points and rates live on the `n_steps` steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0_s: f64,
    pub tf_s: f64,
    pub dt_s: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0_s: f64, tf_s: f64, dt_s: f64) -> Result<Self, NetworkError> {
        if !(t0_s.is_finite() && tf_s.is_finite() && dt_s.is_finite()) || tf_s <= t0_s || dt_s <= 0.0
        {
            return Err(NetworkError::InvalidGrid { t0_s, tf_s, dt_s });
        }
        // Guard against (tf - t0)/dt landing a hair above an integer.
        let ratio = (tf_s - t0_s) / dt_s;
        let n_steps = (ratio - 1e-9).ceil().max(1.0) as usize;
        Ok(TimeGrid {
            t0_s,
            tf_s,
            dt_s,
            n_steps,
        })
    }

    /// Time of grid point `k`.
    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t0_s + k as f64 * self.dt_s
    }

    /// Time covered by the grid, `n_steps · dt`. May exceed `tf − t0` by less than one step.
    pub fn span(&self) -> f64 {
        self.n_steps as f64 * self.dt_s
    }

    /// End of the last step.
    pub fn end(&self) -> f64 {
        self.time(self.n_steps)
    }

    /// Index of the step containing `t`, clamped into `[0, n_steps)`.
    pub fn step_of(&self, t: f64) -> usize {
        let k = ((t - self.t0_s) / self.dt_s).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.n_steps - 1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_count_is_ceiling() {
        assert_eq!(TimeGrid::new(0.0, 100.0, 1.0).unwrap().n_steps, 100);
        assert_eq!(TimeGrid::new(0.0, 100.0, 3.0).unwrap().n_steps, 34);
        assert_eq!(TimeGrid::new(0.0, 0.3, 0.1).unwrap().n_steps, 3);
    }

    #[test]
    fn rejects_degenerate_horizon() {
        assert!(TimeGrid::new(10.0, 10.0, 1.0).is_err());
        assert!(TimeGrid::new(0.0, 10.0, 0.0).is_err());
        assert!(TimeGrid::new(0.0, 10.0, -1.0).is_err());
    }

    #[test]
    fn grid_points_map_to_times() {
        let g = TimeGrid::new(5.0, 25.0, 2.0).unwrap();
        assert_eq!(g.time(0), 5.0);
        assert_eq!(g.time(3), 11.0);
        assert_eq!(g.step_of(11.5), 3);
        assert_eq!(g.step_of(-3.0), 0);
        assert_eq!(g.step_of(1e9), g.n_steps - 1);
    }
}
