use crate::coverage::{compute_coverage, CoverageMap};
use crate::error::Result;
use crate::topology::{derive_isl_graph, hop_distances, HopMatrix, IslGraph, NetworkTopology};

/// A topology together with everything derived from its snapshot: link graph,
/// hop matrix and coverage.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub topology: NetworkTopology,
    pub graph: IslGraph,
    pub hops: HopMatrix,
    pub coverage: CoverageMap,
}

impl Scenario {
    pub fn new(topology: NetworkTopology) -> Result<Self> {
        let graph = derive_isl_graph(&topology, topology.epoch_s);
        let hops = hop_distances(&graph)?;
        let coverage = compute_coverage(&topology);
        Ok(Scenario {
            topology,
            graph,
            hops,
            coverage,
        })
    }

    pub fn n_sats(&self) -> usize {
        self.topology.n_sats()
    }

    pub fn n_air(&self) -> usize {
        self.topology.n_air()
    }
}
