//! Junction flow resolution.
//!
//! A junction has `m` incoming links (an origin source counts as one more incoming
//! link) and `n` outgoing links (a destination sink counts as one more outgoing link
//! with unbounded supply). Flows are resolved from the incoming demands, the outgoing
//! supplies and the distribution matrix built from path composition.

use thiserror::Error;

/// Row-sum slack tolerated when building a distribution matrix.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JunctionError {
    #[error("distribution row {row} sums to {sum} with positive demand")]
    RowSum { row: usize, sum: f64 },
    #[error("distribution entry ({row}, {col}) out of range for a {m}x{n} junction")]
    OutOfRange {
        row: usize,
        col: usize,
        m: usize,
        n: usize,
    },
    #[error("unknown junction model '{0}'")]
    UnknownModel(String),
}

/// `alpha[i][j]`: fraction of incoming link `i`'s exit flow headed to outgoing link `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionMatrix {
    m: usize,
    n: usize,
    alpha: Vec<f64>,
}

impl DistributionMatrix {
    pub fn zeros(m: usize, n: usize) -> Self {
        DistributionMatrix {
            m,
            n,
            alpha: vec![0.0; m * n],
        }
    }

    /// Sums per-path fractions `(row, col, μ)` into a matrix.
    ///
    /// Rows with positive demand must sum to one within [`ROW_SUM_TOLERANCE`]; they are
    /// then normalized exactly so that junction conservation holds to rounding.
    /// Rows with zero demand are cleared.
    pub fn from_fractions<I>(m: usize, n: usize, fractions: I, demands: &[f64]) -> Result<Self, JunctionError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut a = Self::zeros(m, n);
        for (row, col, mu) in fractions {
            if row >= m || col >= n {
                return Err(JunctionError::OutOfRange { row, col, m, n });
            }
            a.alpha[row * n + col] += mu;
        }
        for (row, &d) in demands.iter().enumerate().take(m) {
            let r = &mut a.alpha[row * n..(row + 1) * n];
            if d <= 0.0 {
                r.fill(0.0);
                continue;
            }
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(JunctionError::RowSum { row, sum });
            }
            r.iter_mut().for_each(|x| *x /= sum);
        }
        Ok(a)
    }

    /// Builds a matrix from dense rows without any checks.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let mut a = Self::zeros(m, n);
        for (i, r) in rows.iter().enumerate() {
            a.alpha[i * n..(i + 1) * n].copy_from_slice(r);
        }
        a
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.alpha[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.alpha[i * self.n..(i + 1) * self.n]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JunctionIo {
    pub demands: Vec<f64>,
    /// `f64::INFINITY` is allowed (destination sinks).
    pub supplies: Vec<f64>,
    pub priorities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JunctionFlows {
    pub outflows: Vec<f64>,
    pub inflows: Vec<f64>,
}

/// The conceptual junction map `(D, S; A) -> (f_out, f_in)`.
pub trait JunctionModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn resolve(&self, io: &JunctionIo, dist: &DistributionMatrix) -> JunctionFlows;
}

/// FIFO diverge with proportional-priority merge. See [`resolve_junction`].
#[derive(Clone, Copy, Debug, Default)]
pub struct FifoPriority;

impl JunctionModel for FifoPriority {
    fn name(&self) -> &'static str {
        "fifo-priority"
    }

    fn resolve(&self, io: &JunctionIo, dist: &DistributionMatrix) -> JunctionFlows {
        resolve_junction(io, dist)
    }
}

/// Looks a junction model up by its configuration key.
pub fn model_by_name(name: &str) -> Result<Box<dyn JunctionModel>, JunctionError> {
    match name {
        "fifo-priority" => Ok(Box::new(FifoPriority)),
        other => Err(JunctionError::UnknownModel(other.to_string())),
    }
}

/// Resolves junction flows.
///
/// For each outgoing link `j` the oriented demands `α_ij·D_i` are compared with `S_j`.
/// An uncongested `j` passes everything. A congested `j` offers its supply in
/// proportion to priority, and whatever a satisfied link leaves unused is re-offered to
/// the others (at most `m` rounds). Each incoming link is then throttled by its worst
/// movement (FIFO).
///
/// Sharing by priority rather than by demand keeps an origin queue, whose demand is a
/// large placeholder, from crowding out a competing link.
pub fn resolve_junction(io: &JunctionIo, dist: &DistributionMatrix) -> JunctionFlows {
    let (m, n) = (dist.m(), dist.n());
    debug_assert_eq!(io.demands.len(), m);
    debug_assert_eq!(io.supplies.len(), n);

    // γ_i: fraction of D_i that may leave.
    let mut throttle = vec![1.0f64; m];
    let mut oriented = vec![0.0f64; m];
    let mut active = Vec::with_capacity(m);
    for j in 0..n {
        let mut total = 0.0;
        for i in 0..m {
            oriented[i] = dist.get(i, j) * io.demands[i];
            total += oriented[i];
        }
        let supply = io.supplies[j].max(0.0);
        if total <= supply || total <= 0.0 {
            continue;
        }
        active.clear();
        active.extend((0..m).filter(|&i| oriented[i] > 0.0));
        let alloc = priority_allocation(&oriented, &io.priorities, &active, supply);
        for (&i, &a) in active.iter().zip(&alloc) {
            throttle[i] = throttle[i].min((a / oriented[i]).min(1.0));
        }
    }

    let outflows: Vec<f64> = (0..m).map(|i| throttle[i] * io.demands[i].max(0.0)).collect();
    let inflows = (0..n)
        .map(|j| (0..m).map(|i| dist.get(i, j) * outflows[i]).sum())
        .collect();
    JunctionFlows { outflows, inflows }
}

/// Shares `supply` among `active` links by priority, capping each at its oriented
/// demand and re-offering the remainder. Returns allocations aligned with `active`.
fn priority_allocation(oriented: &[f64], priorities: &[f64], active: &[usize], supply: f64) -> Vec<f64> {
    let mut alloc = vec![0.0; active.len()];
    let mut open: Vec<usize> = (0..active.len()).collect();
    let mut remaining = supply;
    for _round in 0..active.len() {
        if open.is_empty() {
            break;
        }
        let weight: f64 = open.iter().map(|&k| priorities[active[k]]).sum();
        let offer = |k: usize| {
            if weight > 0.0 {
                remaining * priorities[active[k]] / weight
            } else {
                let d: f64 = open.iter().map(|&q| oriented[active[q]]).sum();
                remaining * oriented[active[k]] / d
            }
        };
        let satisfied: Vec<usize> = open
            .iter()
            .copied()
            .filter(|&k| oriented[active[k]] <= offer(k))
            .collect();
        if satisfied.is_empty() {
            for &k in &open {
                alloc[k] = offer(k);
            }
            return alloc;
        }
        for &k in &satisfied {
            alloc[k] = oriented[active[k]];
            remaining -= alloc[k];
        }
        remaining = remaining.max(0.0);
        open.retain(|k| !satisfied.contains(k));
    }
    alloc
}
