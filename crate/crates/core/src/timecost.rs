//! Per-round time accounting: ground-air-space communication, computation and
//! inter-satellite synchronization.

use serde::{Deserialize, Serialize};

use crate::assignment::{AssignmentMap, DeliveryCosts};
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::topology::{LinkClass, LinkParams, LinkTable};

/// Processing rate of every node class in the reference network, FLOPS.
pub const REFERENCE_FLOPS: f64 = 0.665e12;

/// Inter-satellite synchronization algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SyncAlgo {
    #[default]
    Ring,
    Gossip,
}

impl std::fmt::Display for SyncAlgo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SyncAlgo::Ring => "ring",
            SyncAlgo::Gossip => "gossip",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeParams {
    pub links: LinkTable,
    /// Number of model parameters `M`.
    pub model_params: usize,
    pub bits_per_param: u32,
    /// Forward plus backward FLOPs per training sample.
    pub flops_per_sample: f64,
    pub flops_device: f64,
    pub flops_air: f64,
    pub flops_sat: f64,
    /// Samples used in one local epoch.
    pub samples_per_epoch: usize,
    /// Epochs per local round.
    pub epochs: usize,
    pub tau1: usize,
    pub tau2: usize,
}

impl TimeParams {
    pub fn model_bits(&self) -> f64 {
        self.model_params as f64 * f64::from(self.bits_per_param)
    }

    pub fn validate(&self) -> Result<()> {
        self.links.validate()?;
        let positive = [
            ("timing.flops_per_sample", self.flops_per_sample),
            ("timing.flops_device", self.flops_device),
            ("timing.flops_air", self.flops_air),
            ("timing.flops_sat", self.flops_sat),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        if self.tau1 == 0 {
            return Err(Error::config("training.tau1", "must be at least 1"));
        }
        if self.tau2 == 0 {
            return Err(Error::config("training.tau2", "must be at least 1"));
        }
        if self.bits_per_param == 0 {
            return Err(Error::config("timing.bits_per_param", "must be at least 1"));
        }
        Ok(())
    }
}

/// Time cost of one global round.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TimeBreakdown {
    pub t_comm: f64,
    pub t_comp: f64,
    pub t_sync: f64,
    pub t_total: f64,
    /// Largest relay hop count in the round.
    pub n_ss: u32,
}

impl TimeBreakdown {
    pub fn new(t_comm: f64, t_comp: f64, t_sync: f64, n_ss: u32) -> Self {
        TimeBreakdown {
            t_comm,
            t_comp,
            t_sync,
            t_total: t_comm + t_comp + t_sync,
            n_ss,
        }
    }
}

/// Transmission delay of `bits` over `link`, optionally sharing its capacity
/// equally among `share` simultaneous transmitters.
pub fn trans_delay(bits: f64, link: &LinkParams, share: usize) -> Result<f64> {
    let capacity = link.channel.capacity_bps();
    if !(capacity.is_finite() && capacity > 0.0) {
        return Err(Error::Input(format!("{:?} link has zero capacity", link.class)));
    }
    Ok(bits * share.max(1) as f64 / capacity)
}

/// Transmission plus propagation delay.
pub fn end_to_end(bits: f64, link: &LinkParams, share: usize) -> Result<f64> {
    Ok(trans_delay(bits, link, share)? + link.prop_delay_s)
}

/// Largest relay hop count `N^SS` of an assignment.
pub fn relay_hops(assignment: &AssignmentMap) -> u32 {
    assignment.relay_hops()
}

/// Simultaneous users sharing each access link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkLoad {
    /// Devices per air node.
    pub devices_per_air: usize,
    /// Air nodes uploading through one access satellite.
    pub air_per_access: usize,
}

impl LinkLoad {
    pub fn of(scenario: &Scenario) -> Self {
        let devices_per_air = scenario
            .topology
            .air_nodes
            .iter()
            .map(|a| a.device_ids.len())
            .max()
            .unwrap_or(0);
        LinkLoad {
            devices_per_air,
            air_per_access: scenario.coverage.max_cell_size(),
        }
    }
}

/// End-to-end delays of one model over each link class, with access links
/// shared per `load`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkDelays {
    pub sat_ground: f64,
    pub ground_air: f64,
    pub air_sat: f64,
    pub sat_sat: f64,
}

impl LinkDelays {
    pub fn new(params: &TimeParams, load: LinkLoad) -> Result<Self> {
        let bits = params.model_bits();
        let l = &params.links;
        Ok(LinkDelays {
            sat_ground: end_to_end(bits, l.get(LinkClass::SatGround), 1)?,
            ground_air: end_to_end(bits, l.get(LinkClass::GroundAir), load.devices_per_air)?,
            air_sat: end_to_end(bits, l.get(LinkClass::AirSat), load.air_per_access)?,
            sat_sat: end_to_end(bits, l.get(LinkClass::SatSat), 1)?,
        })
    }

    pub fn delivery(&self) -> DeliveryCosts {
        DeliveryCosts {
            air_sat_s: self.air_sat,
            hop_s: self.sat_sat,
        }
    }
}

/// Communication time of one global round:
/// `tau2 * (T_SG + T_GA + T_AS + N_SS * T_SS)`.
pub fn comm_time(n_ss: u32, delays: &LinkDelays, tau2: usize) -> f64 {
    tau2 as f64 * (delays.sat_ground + delays.ground_air + delays.air_sat + f64::from(n_ss) * delays.sat_sat)
}

/// Local training time per local round.
pub fn train_time(params: &TimeParams) -> f64 {
    params.flops_per_sample * params.samples_per_epoch as f64 * params.epochs as f64 / params.flops_device
}

/// Aggregation time of `n_models` models on a node with `flops`.
pub fn agg_time(model_params: usize, n_models: usize, flops: f64) -> f64 {
    model_params as f64 * n_models as f64 / flops
}

/// Computation time of one global round:
/// `tau2 * (tau1 * T_train + T_agg^A + T_agg^S)`, with `devices_per_air`
/// models merged on an air node and `air_per_sat` on a satellite.
pub fn comp_time(params: &TimeParams, devices_per_air: usize, air_per_sat: usize) -> f64 {
    let air = agg_time(params.model_params, devices_per_air, params.flops_air);
    let sat = agg_time(params.model_params, air_per_sat, params.flops_sat);
    params.tau2 as f64 * (params.tau1 as f64 * train_time(params) + air + sat)
}

/// Ring allreduce time over `n` satellites:
/// `2 (n - 1) (T_trans / n + T_prop + M / (n FLOPS_S))`.
pub fn ring_sync_time(n: usize, params: &TimeParams) -> Result<f64> {
    if n <= 1 {
        return Ok(0.0);
    }
    let ss = params.links.get(LinkClass::SatSat);
    let nf = n as f64;
    let per_step =
        trans_delay(params.model_bits(), ss, 1)? / nf + ss.prop_delay_s + params.model_params as f64 / (nf * params.flops_sat);
    Ok(2.0 * (nf - 1.0) * per_step)
}

/// Gossip time over `n` satellites: `n log2(n)` full-model exchanges.
pub fn gossip_sync_time(n: usize, params: &TimeParams) -> Result<f64> {
    if n <= 1 {
        return Ok(0.0);
    }
    let ss = params.links.get(LinkClass::SatSat);
    let nf = n as f64;
    let per_cycle = end_to_end(params.model_bits(), ss, 1)? + params.model_params as f64 / params.flops_sat;
    Ok(nf * nf.log2() * per_cycle)
}

/// Synchronization time for orbits of the given sizes. Several orbits sum the
/// three ring phases: intra-orbit, across one representative per orbit, and
/// intra-orbit propagation.
pub fn sync_time(orbit_sizes: &[usize], algo: SyncAlgo, params: &TimeParams) -> Result<f64> {
    let total: usize = orbit_sizes.iter().sum();
    match algo {
        SyncAlgo::Gossip => gossip_sync_time(total, params),
        SyncAlgo::Ring if orbit_sizes.len() <= 1 => ring_sync_time(total, params),
        SyncAlgo::Ring => {
            let widest = orbit_sizes.iter().copied().max().unwrap_or(0);
            let intra = ring_sync_time(widest, params)?;
            Ok(2.0 * intra + ring_sync_time(orbit_sizes.len(), params)?)
        }
    }
}

/// Time of one global round under `assignment`.
pub fn round_time(
    scenario: &Scenario,
    assignment: &AssignmentMap,
    params: &TimeParams,
    algo: SyncAlgo,
) -> Result<TimeBreakdown> {
    let load = LinkLoad::of(scenario);
    let delays = LinkDelays::new(params, load)?;
    let n_ss = relay_hops(assignment);
    let t_comm = comm_time(n_ss, &delays, params.tau2);
    let t_comp = comp_time(params, load.devices_per_air, assignment.max_load(scenario.n_sats()));
    let sizes: Vec<usize> = scenario.graph.orbits().iter().map(Vec::len).collect();
    let t_sync = sync_time(&sizes, algo, params)?;
    Ok(TimeBreakdown::new(t_comm, t_comp, t_sync, n_ss))
}

/// Overall training time: the sum of every round's total.
pub fn total_time(rounds: &[TimeBreakdown]) -> f64 {
    rounds.iter().map(|r| r.t_total).sum()
}
