//! Path composition of link flows.

/// Where a path goes after the slot it occupies on a link (or origin).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    /// Next link on the path, and the path's slot there.
    Link { link: usize, slot: usize },
    /// The path ends at this node.
    Sink,
}

/// One upstream contributor to a downstream link's entrance.
#[derive(Clone, Copy, Debug)]
pub struct Feeder<'a> {
    /// `f_i^out` at this step.
    pub outflow: f64,
    /// Composition of the flow leaving `i`, indexed by `i`'s slots.
    pub exit_composition: &'a [f64],
    /// Target of each of `i`'s slots.
    pub targets: &'a [Target],
}

/// Entrance composition of link `j`: `μ_j^p = Σ_i f_i^out μ_i^p / f_j^in` over the paths
/// that move from each feeder `i` into `j`.
///
/// Returns `None` when `f_j^in = 0`; there is no flow to label.
pub fn propagate_composition(feeders: &[Feeder<'_>], link: usize, inflow: f64, width: usize) -> Option<Vec<f64>> {
    if inflow <= 0.0 {
        return None;
    }
    let mut mu = vec![0.0; width];
    accumulate(feeders, link, &mut mu);
    for x in &mut mu {
        *x /= inflow;
    }
    Some(mu)
}

pub(crate) fn accumulate(feeders: &[Feeder<'_>], link: usize, out: &mut [f64]) {
    for f in feeders {
        if f.outflow <= 0.0 {
            continue;
        }
        for (mu, target) in f.exit_composition.iter().zip(f.targets) {
            if let Target::Link { link: j, slot } = *target {
                if j == link && *mu > 0.0 {
                    out[slot] += f.outflow * mu;
                }
            }
        }
    }
}
