//! Access-satellite selection by nearest sub-satellite point.
//!
//! The Voronoi cells of the sub-satellite points are never materialised; an
//! air node's cell is found by exhaustive nearest-neighbour search.

use crate::topology::{GeoPoint, NetworkTopology};

/// Central-angle differences below this count as ties (lowest id wins).
const TIE_RAD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMap {
    /// Access satellite of every air node.
    pub access: Vec<usize>,
    /// Air nodes of every satellite cell, ascending.
    pub cell_members: Vec<Vec<usize>>,
}

impl CoverageMap {
    pub fn from_access(access: Vec<usize>, n_sats: usize) -> Self {
        let mut cell_members = vec![Vec::new(); n_sats];
        for (air, &s) in access.iter().enumerate() {
            cell_members[s].push(air);
        }
        CoverageMap {
            access,
            cell_members,
        }
    }

    /// Largest number of air nodes sharing one access satellite.
    pub fn max_cell_size(&self) -> usize {
        self.cell_members.iter().map(Vec::len).max().unwrap_or(0)
    }
}

pub fn subsatellite_points(topology: &NetworkTopology) -> Vec<GeoPoint> {
    topology
        .satellites
        .iter()
        .map(|s| s.subsatellite_point(topology.epoch_s))
        .collect()
}

/// Index of the nearest point to `p`, ties broken by lowest index.
pub fn nearest(points: &[GeoPoint], p: GeoPoint) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &q) in points.iter().enumerate() {
        let d = p.central_angle(q);
        match best {
            Some((_, bd)) if d >= bd - TIE_RAD => {}
            _ => best = Some((i, d)),
        }
    }
    best.map(|(i, _)| i)
}

/// Maps every air node to the satellite whose sub-satellite point is closest.
pub fn compute_coverage(topology: &NetworkTopology) -> CoverageMap {
    let points = subsatellite_points(topology);
    let access = topology
        .air_nodes
        .iter()
        .map(|a| nearest(&points, a.ground_point()).expect("topology has satellites"))
        .collect();
    CoverageMap::from_access(access, topology.n_sats())
}
