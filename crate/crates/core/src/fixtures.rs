//! Small reference networks used by the tests, the benchmarks and the CLI examples.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::TimeGrid;
use crate::io::enumerate_paths;
use crate::network::{validate_network, LinkId, Network, NodeId, PathId, RawLink, RawNode, RawOd, RawPath};

pub fn raw_node(id: u32, origin: bool, destination: bool) -> RawNode {
    RawNode {
        id: NodeId(id),
        x: None,
        y: None,
        origin,
        destination,
        source_priority: None,
    }
}

pub fn raw_link(id: u32, tail: u32, head: u32, length_m: f64, free_speed_mps: f64, capacity_vps: f64) -> RawLink {
    RawLink {
        id: LinkId(id),
        tail: NodeId(tail),
        head: NodeId(head),
        length_m,
        free_speed_mps,
        capacity_vps,
        backward_speed_mps: None,
    }
}

fn raw_path(id: u32, links: &[u32]) -> RawPath {
    RawPath {
        id: PathId(id),
        links: links.iter().map(|&l| LinkId(l)).collect(),
    }
}

fn raw_od(origin: u32, destination: u32, demand_veh: f64, target_arrival_s: f64) -> RawOd {
    RawOd {
        origin: NodeId(origin),
        destination: NodeId(destination),
        demand_veh,
        target_arrival_s,
    }
}

/// The four-node Braess network with its eight paths and four O-D pairs.
///
/// Free-flow times: link 1 = 20 s, 2 = 30 s, 3 = 20 s, 4 = 28 s, 5 = 20 s.
pub fn braess_raw() -> (Vec<RawNode>, Vec<RawLink>, Vec<RawPath>, Vec<RawOd>) {
    let nodes = vec![
        raw_node(1, true, false),
        raw_node(2, true, false),
        raw_node(3, false, true),
        raw_node(4, false, true),
    ];
    let links = vec![
        raw_link(1, 1, 2, 300.0, 15.0, 0.6),
        raw_link(2, 1, 3, 450.0, 15.0, 0.5),
        raw_link(3, 2, 3, 300.0, 15.0, 0.5),
        raw_link(4, 2, 4, 420.0, 15.0, 0.4),
        raw_link(5, 3, 4, 300.0, 15.0, 0.5),
    ];
    let paths = vec![
        raw_path(1, &[1, 3]),
        raw_path(2, &[2]),
        raw_path(3, &[3]),
        raw_path(4, &[1, 4]),
        raw_path(5, &[1, 3, 5]),
        raw_path(6, &[2, 5]),
        raw_path(7, &[4]),
        raw_path(8, &[3, 5]),
    ];
    let ods = vec![
        raw_od(1, 3, 60.0, 200.0),
        raw_od(2, 3, 40.0, 200.0),
        raw_od(1, 4, 90.0, 200.0),
        raw_od(2, 4, 50.0, 200.0),
    ];
    (nodes, links, paths, ods)
}

pub fn braess() -> Network {
    let (n, l, p, o) = braess_raw();
    validate_network(&n, &l, &p, &o).expect("braess fixture is valid")
}

/// Links in series `1 → 2 → … → n+1`, each given as `(L, v, C)`, with one path and
/// one O-D pair from the first node to the last.
pub fn series(links: &[(f64, f64, f64)], demand_veh: f64, target_arrival_s: f64) -> Network {
    let n = links.len() as u32;
    let nodes: Vec<RawNode> = (1..=n + 1).map(|i| raw_node(i, i == 1, i == n + 1)).collect();
    let raw_links: Vec<RawLink> = links
        .iter()
        .zip(1..)
        .map(|(&(l, v, c), i)| raw_link(i, i, i + 1, l, v, c))
        .collect();
    let ids: Vec<u32> = (1..=n).collect();
    let paths = vec![raw_path(1, &ids)];
    let ods = vec![raw_od(1, n + 1, demand_veh, target_arrival_s)];
    validate_network(&nodes, &raw_links, &paths, &ods).expect("series fixture is valid")
}

pub fn single_link(length_m: f64, free_speed_mps: f64, capacity_vps: f64, demand_veh: f64, target_arrival_s: f64) -> Network {
    series(&[(length_m, free_speed_mps, capacity_vps)], demand_veh, target_arrival_s)
}

/// A wide link feeding a short link that drains through a narrow one. Queues form on
/// the short link and spill back onto the first.
pub fn spillback() -> Network {
    series(&[(600.0, 15.0, 1.0), (150.0, 15.0, 1.0), (300.0, 15.0, 0.25)], 300.0, 300.0)
}

/// `rate` veh/s on every path for the steps starting in `[start, end)`.
pub fn constant_departures(net: &Network, grid: &TimeGrid, rate: f64, start: f64, end: f64) -> Array2<f64> {
    let mut h = Array2::zeros((net.paths.len(), grid.n_steps));
    for k in 0..grid.n_steps {
        let t = grid.time(k);
        if t >= start - 1e-9 && t < end - 1e-9 {
            h.column_mut(k).fill(rate);
        }
    }
    h
}

fn random_ods(rng: &mut ChaCha8Rng, n_nodes: u32, n_ods: usize) -> Vec<(u32, u32)> {
    let mut pairs = Vec::with_capacity(n_ods);
    let max = (n_nodes * (n_nodes - 1)) as usize;
    while pairs.len() < n_ods.min(max) {
        let o = rng.random_range(1..=n_nodes);
        let d = rng.random_range(1..=n_nodes);
        if o != d && !pairs.contains(&(o, d)) {
            pairs.push((o, d));
        }
    }
    pairs
}

fn assemble(mut links: Vec<RawLink>, n_nodes: u32, pairs: &[(u32, u32)], k: usize, rng: &mut ChaCha8Rng) -> Network {
    links.sort_by_key(|l| l.id);
    let mut nodes: Vec<RawNode> = (1..=n_nodes).map(|i| raw_node(i, false, false)).collect();
    let mut ods = Vec::with_capacity(pairs.len());
    for &(o, d) in pairs {
        nodes[(o - 1) as usize].origin = true;
        nodes[(d - 1) as usize].destination = true;
        ods.push(raw_od(o, d, rng.random_range(10.0..40.0), rng.random_range(200.0..400.0)));
    }
    let od_ids: Vec<(NodeId, NodeId)> = pairs.iter().map(|&(o, d)| (NodeId(o), NodeId(d))).collect();
    let paths = enumerate_paths(&links, &od_ids, k).expect("fixture pairs are connected");
    validate_network(&nodes, &links, &paths, &ods).expect("generated fixture is valid")
}

fn random_link(rng: &mut ChaCha8Rng, id: u32, tail: u32, head: u32) -> RawLink {
    raw_link(
        id,
        tail,
        head,
        rng.random_range(200.0..600.0),
        rng.random_range(10.0..20.0),
        rng.random_range(0.3..1.0),
    )
}

/// A bidirectional ring with random one-way chords, `n_ods` random O-D pairs and up to
/// three shortest paths per pair. Deterministic in `seed`.
pub fn random_network(seed: u64, n_nodes: u32, n_ods: usize) -> Network {
    assert!(n_nodes >= 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut links = Vec::new();
    let mut id = 1;
    for i in 1..=n_nodes {
        let j = i % n_nodes + 1;
        links.push(random_link(&mut rng, id, i, j));
        links.push(random_link(&mut rng, id + 1, j, i));
        id += 2;
    }
    let mut chords = Vec::new();
    while chords.len() < (n_nodes / 2) as usize {
        let a = rng.random_range(1..=n_nodes);
        let b = rng.random_range(1..=n_nodes);
        let adjacent = a == b || a % n_nodes + 1 == b || b % n_nodes + 1 == a;
        if !adjacent && !chords.contains(&(a, b)) {
            chords.push((a, b));
            links.push(random_link(&mut rng, id, a, b));
            id += 1;
        }
    }
    let pairs = random_ods(&mut rng, n_nodes, n_ods);
    assemble(links, n_nodes, &pairs, 3, &mut rng)
}

/// Bidirectional `rows × cols` grid with random O-D pairs and up to `k` paths each.
pub fn grid_network(seed: u64, rows: u32, cols: u32, n_ods: usize, k: usize) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let node = |r: u32, c: u32| r * cols + c + 1;
    let mut links = Vec::new();
    let mut id = 1;
    for r in 0..rows {
        for c in 0..cols {
            let mut add = |a: u32, b: u32, rng: &mut ChaCha8Rng| {
                links.push(random_link(rng, id, a, b));
                links.push(random_link(rng, id + 1, b, a));
                id += 2;
            };
            if c + 1 < cols {
                add(node(r, c), node(r, c + 1), &mut rng);
            }
            if r + 1 < rows {
                add(node(r, c), node(r + 1, c), &mut rng);
            }
        }
    }
    let pairs = random_ods(&mut rng, rows * cols, n_ods);
    assemble(links, rows * cols, &pairs, k, &mut rng)
}

/// A synthetic network the size of Sioux Falls: 24 nodes, 76 links, 530 O-D pairs
/// and about 6,000 paths.
pub fn sioux_falls_like() -> Network {
    grid_network(2024, 4, 6, 530, 12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_shapes() {
        let net = series(&[(300.0, 15.0, 1.0), (300.0, 15.0, 0.5)], 10.0, 0.0);
        assert_eq!(net.links.len(), 2);
        assert_eq!(net.paths[0].links, vec![0, 1]);
        assert!((net.path_free_flow_time(0) - 40.0).abs() < 1e-12);
    }

    #[test]
    fn random_network_is_deterministic() {
        assert_eq!(random_network(11, 12, 8), random_network(11, 12, 8));
        let net = random_network(11, 12, 8);
        assert_eq!(net.links.len(), 24 + 6);
        assert_eq!(net.ods.len(), 8);
    }

    #[test]
    fn sioux_falls_like_size() {
        let net = sioux_falls_like();
        assert_eq!(net.nodes.len(), 24);
        assert_eq!(net.links.len(), 76);
        assert_eq!(net.ods.len(), 530);
        assert!(net.paths.len() > 5000 && net.paths.len() <= 530 * 12, "{}", net.paths.len());
    }
}
