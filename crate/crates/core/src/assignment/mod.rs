//! Air-node to satellite assignment.
//!
//! Three policies share one output type:
//!
//! * GDO keeps every air node on its access satellite.
//! * CNASA splits the constellation into communication-bounded parts, groups
//!   each part's air nodes by class distribution with k-means, deals one
//!   member of every group into each cluster, and matches clusters to the
//!   part's satellites by minimum model-delivery time.
//! * CDO runs the same clustering over a single global part.

mod clusters;
mod kmeans;
mod matching;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use clusters::{build_clusters, ClusterSet};
pub use kmeans::{kmeans, CENTER_TOLERANCE, MAX_ITERATIONS};
pub use matching::{matching_cost, min_cost_matching};

use crate::coverage::CoverageMap;
use crate::error::{Error, Result};
use crate::partition::PartitionSet;
use crate::scenario::Scenario;

/// Label histogram of a dataset, normalised to unit L1 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    pub probs: Vec<f64>,
    pub sample_count: usize,
}

impl ClassDistribution {
    pub fn from_labels(labels: &[usize], n_classes: usize) -> Self {
        let mut counts = vec![0usize; n_classes];
        for &l in labels {
            counts[l] += 1;
        }
        Self::from_counts(&counts)
    }

    pub fn from_counts(counts: &[usize]) -> Self {
        let total: usize = counts.iter().sum();
        let probs = if total == 0 {
            vec![0.0; counts.len()]
        } else {
            counts.iter().map(|&c| c as f64 / total as f64).collect()
        };
        ClassDistribution {
            probs,
            sample_count: total,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn l1_distance(&self, other: &ClassDistribution) -> f64 {
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// Sample-size-weighted average of device distributions under one air node.
pub fn air_class_distribution(devices: &[ClassDistribution]) -> Result<ClassDistribution> {
    let first = devices
        .first()
        .ok_or_else(|| Error::Input("air node has no devices".into()))?;
    let c = first.n_classes();
    if devices.iter().any(|d| d.n_classes() != c) {
        return Err(Error::Input("class distributions have different lengths".into()));
    }
    let total: usize = devices.iter().map(|d| d.sample_count).sum();
    if total == 0 {
        return Err(Error::UndefinedDistribution);
    }
    let mut probs = vec![0.0; c];
    for d in devices {
        let w = d.sample_count as f64;
        for (p, &q) in probs.iter_mut().zip(&d.probs) {
            *p += w * q;
        }
    }
    for p in &mut probs {
        *p /= total as f64;
    }
    Ok(ClassDistribution {
        probs,
        sample_count: total,
    })
}

/// Per-model delivery delays feeding the cluster-to-satellite cost matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeliveryCosts {
    /// End-to-end delay from an air node to its access satellite.
    pub air_sat_s: f64,
    /// End-to-end delay of one inter-satellite relay hop.
    pub hop_s: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentMap {
    /// Target satellite of every air node.
    pub target: Vec<usize>,
    /// Relay hops from each air node's access satellite to its target.
    pub hops: Vec<u32>,
    /// Parts without air nodes, skipped during clustering.
    pub skipped_parts: Vec<usize>,
}

impl AssignmentMap {
    pub fn new(target: Vec<usize>, scenario: &Scenario) -> Self {
        let hops = target
            .iter()
            .enumerate()
            .map(|(a, &s)| scenario.hops.get(scenario.coverage.access[a], s))
            .collect();
        AssignmentMap {
            target,
            hops,
            skipped_parts: Vec::new(),
        }
    }

    /// Largest relay hop count over all air nodes.
    pub fn relay_hops(&self) -> u32 {
        self.hops.iter().copied().max().unwrap_or(0)
    }

    /// Air nodes assigned to each satellite, ascending.
    pub fn members(&self, n_sats: usize) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); n_sats];
        for (a, &s) in self.target.iter().enumerate() {
            m[s].push(a);
        }
        m
    }

    pub fn max_load(&self, n_sats: usize) -> usize {
        self.members(n_sats).iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Every air node stays on its access satellite.
pub fn gdo(coverage: &CoverageMap) -> AssignmentMap {
    AssignmentMap {
        target: coverage.access.clone(),
        hops: vec![0; coverage.access.len()],
        skipped_parts: Vec::new(),
    }
}

/// Cost of sending every model of `cluster` to `sat`.
fn cluster_cost(scenario: &Scenario, cluster: &[usize], sat: usize, delivery: DeliveryCosts) -> f64 {
    cluster
        .iter()
        .map(|&a| {
            let hops = scenario.hops.get(scenario.coverage.access[a], sat);
            delivery.air_sat_s + f64::from(hops) * delivery.hop_s
        })
        .sum()
}

/// Clustered, communication-aware assignment over the given partition.
///
/// Each part with `n` satellites and `m` air nodes is clustered into `n`
/// clusters from `max(1, m / n)` k-means groups. Every part draws from its own
/// generator seeded from `rng`, so the result depends only on the seed.
pub fn cnasa<R: Rng + ?Sized>(
    scenario: &Scenario,
    partitions: &PartitionSet,
    air_dists: &[ClassDistribution],
    delivery: DeliveryCosts,
    rng: &mut R,
) -> Result<AssignmentMap> {
    let n_air = scenario.n_air();
    if air_dists.len() != n_air {
        return Err(Error::Input(format!(
            "expected {n_air} air-node distributions, got {}",
            air_dists.len()
        )));
    }
    let covered: usize = partitions.air_parts.iter().map(Vec::len).sum();
    let sats: usize = partitions.parts.iter().map(Vec::len).sum();
    if covered != n_air || sats != scenario.n_sats() {
        return Err(Error::config(
            "policy",
            "partition does not cover the scenario's satellites and air nodes",
        ));
    }

    let seeds: Vec<u64> = partitions.parts.iter().map(|_| rng.random()).collect();
    let mut target = vec![usize::MAX; n_air];
    let mut skipped = Vec::new();
    for (i, (part, air)) in partitions.parts.iter().zip(&partitions.air_parts).enumerate() {
        if air.is_empty() {
            skipped.push(i);
            continue;
        }
        let mut part_rng = ChaCha8Rng::seed_from_u64(seeds[i]);
        let n_clusters = part.len();
        let k = (air.len() / n_clusters).max(1);
        let points: Vec<Vec<f64>> = air.iter().map(|&a| air_dists[a].probs.clone()).collect();
        let labels = kmeans(&points, k, &mut part_rng)?;
        let mut groups = vec![Vec::new(); k];
        for (&a, &l) in air.iter().zip(&labels) {
            groups[l].push(a);
        }
        let clusters = build_clusters(groups, n_clusters, &mut part_rng);

        let cost: Vec<Vec<f64>> = clusters
            .clusters
            .iter()
            .map(|c| part.iter().map(|&s| cluster_cost(scenario, c, s, delivery)).collect())
            .collect();
        let perm = min_cost_matching(&cost)?;
        for (c, members) in clusters.clusters.iter().enumerate() {
            for &a in members {
                target[a] = part[perm[c]];
            }
        }
    }
    debug_assert!(target.iter().all(|&s| s != usize::MAX));
    let mut map = AssignmentMap::new(target, scenario);
    map.skipped_parts = skipped;
    Ok(map)
}

/// Diversity-only baseline: CNASA over one global part.
pub fn cdo<R: Rng + ?Sized>(
    scenario: &Scenario,
    air_dists: &[ClassDistribution],
    delivery: DeliveryCosts,
    rng: &mut R,
) -> Result<AssignmentMap> {
    let global = PartitionSet::global(scenario.n_sats(), &scenario.coverage);
    cnasa(scenario, &global, air_dists, delivery, rng)
}
