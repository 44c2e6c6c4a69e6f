//! Communication-bounded partitions of the constellation.
//!
//! A single orbit is cut into arcs of `n_geo` consecutive slots. A general
//! inter-satellite link graph is cut greedily into sub-graphs whose hop
//! diameter stays below `n_geo`.

use rand::Rng;

use crate::coverage::CoverageMap;
use crate::error::{Error, Result};
use crate::topology::isl::bfs;
use crate::topology::{IslGraph, NetworkTopology};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSet {
    /// Satellite ids of every part, ascending.
    pub parts: Vec<Vec<usize>>,
    /// Air-node ids of every part, ascending; parallel to `parts`.
    pub air_parts: Vec<Vec<usize>>,
    pub n_geo: usize,
}

impl PartitionSet {
    /// One part holding every satellite and every air node.
    pub fn global(n_sats: usize, coverage: &CoverageMap) -> Self {
        let parts = vec![(0..n_sats).collect::<Vec<_>>()];
        let air_parts = air_nodes_to_parts(coverage, &parts);
        PartitionSet {
            parts,
            air_parts,
            n_geo: n_sats,
        }
    }

    /// Part index of every satellite.
    pub fn part_of(&self) -> Vec<usize> {
        let n: usize = self.parts.iter().map(Vec::len).sum();
        let mut out = vec![usize::MAX; n];
        for (i, part) in self.parts.iter().enumerate() {
            for &s in part {
                out[s] = i;
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

/// Consecutive arcs of `n_geo` orbit slots starting at slot 0; the last arc
/// is short when `n_geo` does not divide the satellite count.
pub fn arc_partition(topology: &NetworkTopology, coverage: &CoverageMap, n_geo: usize) -> Result<PartitionSet> {
    if !topology.is_single_orbit() {
        return Err(Error::config(
            "policy.n_geo",
            "arc partitioning needs a single-orbit topology",
        ));
    }
    let n = topology.n_sats();
    if n_geo == 0 || n_geo > n {
        return Err(Error::config(
            "policy.n_geo",
            format!("n_geo must lie in 1..={n}, got {n_geo}"),
        ));
    }
    let ring = &topology.orbits()[0];
    let parts: Vec<Vec<usize>> = ring
        .chunks(n_geo)
        .map(|c| {
            let mut p = c.to_vec();
            p.sort_unstable();
            p
        })
        .collect();
    let air_parts = air_nodes_to_parts(coverage, &parts);
    Ok(PartitionSet {
        parts,
        air_parts,
        n_geo,
    })
}

/// Greedy diameter-bounded partition of the link graph.
///
/// Each iteration recomputes hop distances on the residual graph, seeds a
/// part at a uniformly drawn remaining satellite and grows it breadth-first.
/// A neighbour joins when its residual distance to every member is below
/// `n_geo` and the part's own induced sub-graph keeps a diameter below
/// `n_geo`. Members and their links are then removed from the residual graph.
pub fn graph_partition<R: Rng + ?Sized>(
    graph: &IslGraph,
    coverage: &CoverageMap,
    n_geo: usize,
    rng: &mut R,
) -> Result<PartitionSet> {
    if n_geo == 0 {
        return Err(Error::config("policy.n_geo", "n_geo must be at least 1"));
    }
    let parts = diameter_bounded_parts(graph, n_geo, rng);
    let air_parts = air_nodes_to_parts(coverage, &parts);
    Ok(PartitionSet {
        parts,
        air_parts,
        n_geo,
    })
}

pub(crate) fn diameter_bounded_parts<R: Rng + ?Sized>(graph: &IslGraph, n_geo: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let n = graph.n_nodes();
    let adjacency = graph.adjacency();
    let bound = n_geo as u32;
    let mut alive = vec![true; n];
    let mut remaining = n;
    let mut parts = Vec::new();

    while remaining > 0 {
        // residual all-pairs distances, recomputed every iteration
        let residual: Vec<Vec<Option<u32>>> = (0..n)
            .map(|s| {
                if alive[s] {
                    bfs(adjacency, s, Some(&alive))
                } else {
                    Vec::new()
                }
            })
            .collect();

        let candidates: Vec<usize> = (0..n).filter(|&s| alive[s]).collect();
        let seed = candidates[rng.random_range(0..candidates.len())];

        let mut members = vec![seed];
        let mut in_part = vec![false; n];
        in_part[seed] = true;
        let mut cursor = 0;
        while cursor < members.len() {
            let si = members[cursor];
            cursor += 1;
            for &sj in &adjacency[si] {
                if !alive[sj] || in_part[sj] {
                    continue;
                }
                let close = members
                    .iter()
                    .all(|&m| residual[m][sj].is_some_and(|d| d < bound));
                if !close {
                    continue;
                }
                in_part[sj] = true;
                let induced = bfs(adjacency, sj, Some(&in_part));
                if members.iter().all(|&m| induced[m].is_some_and(|d| d < bound)) {
                    members.push(sj);
                } else {
                    in_part[sj] = false;
                }
            }
        }

        for &m in &members {
            alive[m] = false;
        }
        remaining -= members.len();
        members.sort_unstable();
        parts.push(members);
    }
    parts
}

/// Every air node joins the part holding its access satellite.
pub fn air_nodes_to_parts(coverage: &CoverageMap, parts: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n_sats = coverage.cell_members.len();
    let mut part_of = vec![usize::MAX; n_sats];
    for (i, part) in parts.iter().enumerate() {
        for &s in part {
            part_of[s] = i;
        }
    }
    let mut air_parts = vec![Vec::new(); parts.len()];
    for (air, &s) in coverage.access.iter().enumerate() {
        air_parts[part_of[s]].push(air);
    }
    air_parts
}

/// Hop diameter of the sub-graph induced by `members`; `None` if disconnected.
pub fn induced_diameter(graph: &IslGraph, members: &[usize]) -> Option<u32> {
    let mut mask = vec![false; graph.n_nodes()];
    for &m in members {
        mask[m] = true;
    }
    let mut diameter = 0;
    for &m in members {
        let d = bfs(graph.adjacency(), m, Some(&mask));
        for &o in members {
            diameter = diameter.max(d[o]?);
        }
    }
    Some(diameter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::compute_coverage;
    use crate::topology::{build_single_orbit, build_walker, derive_isl_graph, LinkTable};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(n_sats: usize, n_air: usize) -> (NetworkTopology, CoverageMap) {
        let t = build_single_orbit(n_sats, 330.0, n_air, 2, LinkTable::reference()).unwrap();
        let c = compute_coverage(&t);
        (t, c)
    }

    #[test]
    fn arcs_of_two() {
        let (t, c) = single(20, 100);
        let p = arc_partition(&t, &c, 2).unwrap();
        assert_eq!(p.len(), 10);
        assert_eq!(p.parts[0], vec![0, 1]);
        assert_eq!(p.parts[9], vec![18, 19]);
    }

    #[test]
    fn full_width_is_one_part() {
        let (t, c) = single(20, 100);
        let p = arc_partition(&t, &c, 20).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.air_parts[0].len(), 100);
    }

    #[test]
    fn arcs_of_four_hold_twenty_air_nodes() {
        let (t, c) = single(20, 100);
        let p = arc_partition(&t, &c, 4).unwrap();
        assert_eq!(p.len(), 5);
        assert!(p.air_parts.iter().all(|a| a.len() == 20));
    }

    #[test]
    fn short_last_arc() {
        let (t, c) = single(10, 10);
        let p = arc_partition(&t, &c, 4).unwrap();
        assert_eq!(p.parts.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
    }

    #[test]
    fn arc_width_out_of_range() {
        let (t, c) = single(20, 100);
        assert!(arc_partition(&t, &c, 0).is_err());
        assert!(arc_partition(&t, &c, 21).is_err());
    }

    #[test]
    fn ring_of_six_width_three() {
        let (t, c) = single(6, 6);
        let g = derive_isl_graph(&t, 0.0);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = graph_partition(&g, &c, 3, &mut rng).unwrap();
            for part in &p.parts {
                assert!(induced_diameter(&g, part).unwrap() <= 2);
            }
            assert_eq!(p.parts.iter().map(Vec::len).sum::<usize>(), 6);
        }
    }

    #[test]
    fn width_one_gives_singletons() {
        let t = build_walker(3, 5, 85.0, 330.0, 1, 1, LinkTable::reference()).unwrap();
        let g = derive_isl_graph(&t, 0.0);
        let c = compute_coverage(&t);
        let p = graph_partition(&g, &c, 1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(p.len(), 15);
        assert!(p.parts.iter().all(|x| x.len() == 1));
    }

    #[test]
    fn three_plane_width_three() {
        let t = build_walker(3, 8, 85.0, 330.0, 2, 1, LinkTable::reference()).unwrap();
        let g = derive_isl_graph(&t, 0.0);
        let c = compute_coverage(&t);
        let p = graph_partition(&g, &c, 3, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        for part in &p.parts {
            assert!(induced_diameter(&g, part).unwrap() < 3);
        }
        let mut all: Vec<usize> = p.parts.concat();
        all.sort_unstable();
        assert_eq!(all, (0..24).collect::<Vec<_>>());
        let mut air: Vec<usize> = p.air_parts.concat();
        air.sort_unstable();
        assert_eq!(air, (0..48).collect::<Vec<_>>());
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let t = build_walker(4, 6, 85.0, 330.0, 1, 1, LinkTable::reference()).unwrap();
        let g = derive_isl_graph(&t, 0.0);
        let c = compute_coverage(&t);
        let a = graph_partition(&g, &c, 3, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = graph_partition(&g, &c, 3, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn air_lookup() {
        let c = CoverageMap::from_access(vec![0, 1, 2], 3);
        let parts = vec![vec![0, 1], vec![2]];
        assert_eq!(air_nodes_to_parts(&c, &parts), vec![vec![0, 1], vec![2]]);
        let empty = CoverageMap::from_access(vec![0, 0], 3);
        assert_eq!(air_nodes_to_parts(&empty, &parts), vec![vec![0, 1], vec![]]);
    }
}
