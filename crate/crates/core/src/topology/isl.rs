use std::collections::VecDeque;

use super::geometry::{angle_between, cross, dot, orbit_normal};
use super::NetworkTopology;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    IntraOrbit,
    InterOrbit,
}

/// Undirected inter-satellite link, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IslEdge {
    pub a: usize,
    pub b: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IslGraph {
    edges: Vec<IslEdge>,
    adjacency: Vec<Vec<usize>>,
    /// Satellite ids per orbit in ring order.
    orbits: Vec<Vec<usize>>,
    orbit_of: Vec<usize>,
}

impl IslGraph {
    /// Builds a graph from explicit orbits (ring order) and edges.
    pub fn from_parts(orbits: Vec<Vec<usize>>, edges: &[(usize, usize, EdgeKind)]) -> Result<Self> {
        let n: usize = orbits.iter().map(Vec::len).sum();
        let mut orbit_of = vec![usize::MAX; n];
        for (o, members) in orbits.iter().enumerate() {
            for &s in members {
                if s >= n || orbit_of[s] != usize::MAX {
                    return Err(Error::Input(format!("satellite {s} is not a dense unique id")));
                }
                orbit_of[s] = o;
            }
        }
        let mut g = IslGraph {
            edges: Vec::new(),
            adjacency: vec![Vec::new(); n],
            orbits,
            orbit_of,
        };
        for &(a, b, kind) in edges {
            if a >= n || b >= n || a == b {
                return Err(Error::Input(format!("invalid edge ({a}, {b})")));
            }
            g.add_edge(a, b, kind);
        }
        g.finish();
        Ok(g)
    }

    fn add_edge(&mut self, a: usize, b: usize, kind: EdgeKind) {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        if self.adjacency[a].contains(&b) {
            return;
        }
        self.adjacency[a].push(b);
        self.adjacency[b].push(a);
        self.edges.push(IslEdge { a, b, kind });
    }

    fn finish(&mut self) {
        for adj in &mut self.adjacency {
            adj.sort_unstable();
        }
        self.edges.sort_by_key(|e| (e.a, e.b));
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edges(&self) -> &[IslEdge] {
        &self.edges
    }

    /// Sorted neighbour ids.
    pub fn neighbors(&self, s: usize) -> &[usize] {
        &self.adjacency[s]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn orbits(&self) -> &[Vec<usize>] {
        &self.orbits
    }

    pub fn orbit_of(&self, s: usize) -> usize {
        self.orbit_of[s]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn degree(&self, s: usize) -> usize {
        self.adjacency[s].len()
    }

    /// Satellites incident to at least one inter-orbit edge.
    pub fn is_bridge_node(&self, s: usize) -> bool {
        self.adjacency[s]
            .iter()
            .any(|&t| self.orbit_of[t] != self.orbit_of[s])
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n_nodes();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let dist = bfs(&self.adjacency, start, None);
            let mut comp: Vec<usize> = (0..n).filter(|&v| dist[v].is_some()).collect();
            comp.sort_unstable();
            for &v in &comp {
                seen[v] = true;
            }
            out.push(comp);
        }
        out
    }
}

/// Breadth-first hop counts from `src`, restricted to nodes with
/// `allowed[v] == true` when a mask is given.
pub(crate) fn bfs(adjacency: &[Vec<usize>], src: usize, allowed: Option<&[bool]>) -> Vec<Option<u32>> {
    let mut dist = vec![None; adjacency.len()];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &v in &adjacency[u] {
            if dist[v].is_none() && allowed.is_none_or(|m| m[v]) {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Angular ties below this are broken by satellite id.
const ANGLE_TIE_RAD: f64 = 1e-12;

/// Intra-orbit rings plus two inter-orbit links per plane pair, one for each
/// region where the two orbits cross. Inside a region the link joins the
/// closest satellite pair at `epoch_s` (ties broken by lowest ids).
pub fn derive_isl_graph(topology: &NetworkTopology, epoch_s: f64) -> IslGraph {
    let orbits = topology.orbits();
    let mut edges = Vec::new();
    for members in &orbits {
        let n = members.len();
        if n == 2 {
            edges.push((members[0], members[1], EdgeKind::IntraOrbit));
        } else if n >= 3 {
            for k in 0..n {
                edges.push((members[k], members[(k + 1) % n], EdgeKind::IntraOrbit));
            }
        }
    }

    let pos: Vec<[f64; 3]> = topology
        .satellites
        .iter()
        .map(|s| s.unit_position(epoch_s))
        .collect();
    for p in 0..orbits.len() {
        for q in p + 1..orbits.len() {
            let (sp, sq) = (&topology.satellites[orbits[p][0]], &topology.satellites[orbits[q][0]]);
            let mut axis = cross(
                orbit_normal(sp.raan_deg, sp.inclination_deg),
                orbit_normal(sq.raan_deg, sq.inclination_deg),
            );
            if dot(axis, axis) < 1e-18 {
                // coplanar orbits: split by an arbitrary in-plane axis
                axis = pos[orbits[p][0]];
            }
            let mut best: [Option<(f64, usize, usize)>; 2] = [None, None];
            for &a in &orbits[p] {
                for &b in &orbits[q] {
                    let mid = [pos[a][0] + pos[b][0], pos[a][1] + pos[b][1], pos[a][2] + pos[b][2]];
                    let region = usize::from(dot(mid, axis) < 0.0);
                    let sep = angle_between(pos[a], pos[b]);
                    let better = match best[region] {
                        None => true,
                        Some((bs, ba, bb)) => {
                            sep < bs - ANGLE_TIE_RAD
                                || ((sep - bs).abs() <= ANGLE_TIE_RAD && (a, b) < (ba, bb))
                        }
                    };
                    if better {
                        best[region] = Some((sep, a, b));
                    }
                }
            }
            for (_, a, b) in best.into_iter().flatten() {
                edges.push((a, b, EdgeKind::InterOrbit));
            }
        }
    }
    IslGraph::from_parts(orbits, &edges).expect("generated edges reference valid satellites")
}

/// All-pairs hop counts, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopMatrix {
    n: usize,
    hops: Vec<u32>,
}

impl HopMatrix {
    pub fn get(&self, a: usize, b: usize) -> u32 {
        self.hops[a * self.n + b]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, a: usize) -> &[u32] {
        &self.hops[a * self.n..(a + 1) * self.n]
    }
}

/// Shortest-path hop counts by breadth-first search from every satellite.
pub fn hop_distances(graph: &IslGraph) -> Result<HopMatrix> {
    let n = graph.n_nodes();
    let mut hops = Vec::with_capacity(n * n);
    for s in 0..n {
        let dist = bfs(graph.adjacency(), s, None);
        if dist.iter().any(Option::is_none) {
            let comps = graph.components();
            let listed: Vec<String> = comps.iter().map(|c| format!("{c:?}")).collect();
            return Err(Error::Topology(format!(
                "inter-satellite link graph is disconnected into {} components: {}",
                comps.len(),
                listed.join(", ")
            )));
        }
        hops.extend(dist.into_iter().map(Option::unwrap));
    }
    Ok(HopMatrix { n, hops })
}
