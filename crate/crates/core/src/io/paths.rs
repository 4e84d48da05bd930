//! k-shortest loopless paths under free-flow link times (Yen's algorithm).

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};

use super::FormatError;
use crate::network::{LinkId, NodeId, PathId, RawLink, RawPath};

#[derive(Clone, Debug)]
struct Label {
    cost: f64,
    links: Vec<LinkId>,
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Label {}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost.total_cmp(&other.cost).then_with(|| self.links.cmp(&other.links))
    }
}

struct Graph<'a> {
    links: &'a [RawLink],
    by_id: HashMap<LinkId, usize>,
    /// Outgoing link indices per node, sorted by link id.
    out: HashMap<NodeId, Vec<usize>>,
}

impl<'a> Graph<'a> {
    fn new(links: &'a [RawLink]) -> Self {
        let mut out: HashMap<NodeId, Vec<usize>> = HashMap::new();
        let mut by_id = HashMap::new();
        for (i, l) in links.iter().enumerate() {
            out.entry(l.tail).or_default().push(i);
            by_id.insert(l.id, i);
        }
        for v in out.values_mut() {
            v.sort_by_key(|&i| links[i].id);
        }
        Graph { links, by_id, out }
    }

    fn weight(&self, i: usize) -> f64 {
        self.links[i].length_m / self.links[i].free_speed_mps
    }

    fn cost(&self, ids: &[LinkId]) -> f64 {
        ids.iter().map(|id| self.weight(self.by_id[id])).sum()
    }

    /// Shortest path from `src` to `dst` avoiding the given nodes and links. Ties go to
    /// the lexicographically smaller link id sequence.
    fn shortest(
        &self,
        src: NodeId,
        dst: NodeId,
        banned_nodes: &HashSet<NodeId>,
        banned_links: &HashSet<LinkId>,
    ) -> Option<Label> {
        let mut best: HashMap<NodeId, Label> = HashMap::new();
        let mut heap = BinaryHeap::new();
        let start = Label {
            cost: 0.0,
            links: Vec::new(),
        };
        best.insert(src, start.clone());
        heap.push(std::cmp::Reverse((start, src)));
        while let Some(std::cmp::Reverse((label, node))) = heap.pop() {
            if best.get(&node).is_some_and(|b| *b < label) {
                continue;
            }
            if node == dst {
                return Some(label);
            }
            for &i in self.out.get(&node).map(Vec::as_slice).unwrap_or(&[]) {
                let l = &self.links[i];
                if banned_links.contains(&l.id) || banned_nodes.contains(&l.head) || l.head == src {
                    continue;
                }
                let mut links = label.links.clone();
                links.push(l.id);
                let next = Label {
                    cost: label.cost + self.weight(i),
                    links,
                };
                if best.get(&l.head).is_none_or(|b| next < *b) {
                    best.insert(l.head, next.clone());
                    heap.push(std::cmp::Reverse((next, l.head)));
                }
            }
        }
        None
    }

    fn nodes_of(&self, src: NodeId, ids: &[LinkId]) -> Vec<NodeId> {
        let mut nodes = vec![src];
        nodes.extend(ids.iter().map(|id| self.links[self.by_id[id]].head));
        nodes
    }

    fn yen(&self, src: NodeId, dst: NodeId, k: usize) -> Vec<Vec<LinkId>> {
        let Some(first) = self.shortest(src, dst, &HashSet::new(), &HashSet::new()) else {
            return Vec::new();
        };
        let mut found: Vec<Vec<LinkId>> = vec![first.links];
        let mut candidates: BTreeSet<Label> = BTreeSet::new();
        while found.len() < k {
            let prev = found.last().unwrap().clone();
            let prev_nodes = self.nodes_of(src, &prev);
            for i in 0..prev.len() {
                let spur = prev_nodes[i];
                let root = &prev[..i];
                let mut banned_links = HashSet::new();
                for p in &found {
                    if p.len() > i && p[..i] == *root {
                        banned_links.insert(p[i]);
                    }
                }
                let banned_nodes: HashSet<NodeId> = prev_nodes[..i].iter().copied().collect();
                if let Some(tail) = self.shortest(spur, dst, &banned_nodes, &banned_links) {
                    let mut links = root.to_vec();
                    links.extend(tail.links);
                    let cost = self.cost(&links);
                    candidates.insert(Label { cost, links });
                }
            }
            let next = loop {
                match candidates.pop_first() {
                    Some(c) if found.contains(&c.links) => continue,
                    other => break other,
                }
            };
            match next {
                Some(c) => found.push(c.links),
                None => break,
            }
        }
        found
    }
}

/// Up to `k` loopless shortest paths per O-D pair under free-flow times `L / v`.
///
/// Paths come out grouped by O-D in the given order, cheapest first, with ties broken
/// by the lexicographic order of their link ids. Ids are assigned from 1.
pub fn enumerate_paths(links: &[RawLink], ods: &[(NodeId, NodeId)], k: usize) -> Result<Vec<RawPath>, FormatError> {
    if k == 0 {
        return Err(FormatError::Invalid("k must be at least 1".into()));
    }
    let graph = Graph::new(links);
    let mut out = Vec::new();
    for &(origin, destination) in ods {
        let found = if origin == destination {
            Vec::new()
        } else {
            graph.yen(origin, destination, k)
        };
        if found.is_empty() {
            return Err(FormatError::Unreachable { origin, destination });
        }
        for links in found {
            out.push(RawPath {
                id: PathId(out.len() as u32 + 1),
                links,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn ids(v: &[u32]) -> Vec<LinkId> {
        v.iter().map(|&x| LinkId(x)).collect()
    }

    #[test]
    fn braess_one_to_four() {
        let (_, links, _, _) = fixtures::braess_raw();
        let paths = enumerate_paths(&links, &[(NodeId(1), NodeId(4))], 3).unwrap();
        let got: Vec<_> = paths.iter().map(|p| p.links.clone()).collect();
        assert_eq!(got, vec![ids(&[1, 4]), ids(&[2, 5]), ids(&[1, 3, 5])]);
        // Only three simple paths exist.
        let all = enumerate_paths(&links, &[(NodeId(1), NodeId(4))], 10).unwrap();
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn single_path_pair() {
        let (_, links, _, _) = fixtures::braess_raw();
        let paths = enumerate_paths(&links, &[(NodeId(2), NodeId(3))], 1).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].links, ids(&[3]));
    }

    #[test]
    fn unreachable_pair_is_named() {
        let (_, links, _, _) = fixtures::braess_raw();
        let err = enumerate_paths(&links, &[(NodeId(4), NodeId(1))], 2).unwrap_err();
        assert!(matches!(err, FormatError::Unreachable { origin: NodeId(4), destination: NodeId(1) }));
        assert!(err.to_string().contains("node 4"));
    }

    #[test]
    fn ties_break_on_link_ids() {
        let mk = |id, tail, head| RawLink {
            id: LinkId(id),
            tail: NodeId(tail),
            head: NodeId(head),
            length_m: 100.0,
            free_speed_mps: 10.0,
            capacity_vps: 1.0,
            backward_speed_mps: None,
        };
        // Two equal-cost routes 1→2→4 and 1→3→4.
        let links = vec![mk(7, 1, 3), mk(8, 3, 4), mk(5, 1, 2), mk(9, 2, 4)];
        let paths = enumerate_paths(&links, &[(NodeId(1), NodeId(4))], 2).unwrap();
        assert_eq!(paths[0].links, ids(&[5, 9]));
        assert_eq!(paths[1].links, ids(&[7, 8]));
    }

    #[test]
    fn paths_are_loopless_and_sorted() {
        let net = fixtures::random_network(3, 20, 10);
        let (_, links, _, _) = net.to_raw();
        let graph = Graph::new(&links);
        let ods: Vec<_> = net.ods.iter().map(|o| (o.origin, o.destination)).collect();
        let paths = enumerate_paths(&links, &ods, 4).unwrap();
        let ends = |p: &RawPath| {
            let first = &links[graph.by_id[&p.links[0]]];
            let last = &links[graph.by_id[p.links.last().unwrap()]];
            (first.tail, last.head)
        };
        for w in paths.windows(2) {
            if ends(&w[0]) == ends(&w[1]) {
                assert!(graph.cost(&w[0].links) <= graph.cost(&w[1].links) + 1e-9);
            }
        }
        for p in &paths {
            let src = links[graph.by_id[&p.links[0]]].tail;
            let nodes = graph.nodes_of(src, &p.links);
            let unique: HashSet<_> = nodes.iter().collect();
            assert_eq!(unique.len(), nodes.len());
        }
    }
}
