use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::aggregate::{satellite_aggregate, Weighted};
use super::data::{generate_data, Dataset, DeviceDataset};
use super::divergence::{diagnose_interval, Hierarchy, IntervalDiagnostics};
use super::learner::Learner;
use crate::allreduce::{multi_orbit_sync_all, ring_allreduce_all, CommLog, ModelVector};
use crate::assignment::{air_class_distribution, cdo, cnasa, gdo, AssignmentMap, ClassDistribution};
use crate::config::{ExperimentConfig, Policy};
use crate::error::{Error, Result};
use crate::partition::{arc_partition, graph_partition, PartitionSet};
use crate::scalar::Scalar;
use crate::scenario::Scenario;
use crate::timecost::{round_time, LinkDelays, LinkLoad, TimeBreakdown, TimeParams};

/// Everything fixed before training starts: network, data, assignment.
#[derive(Debug, Clone)]
pub struct Federation<T> {
    pub config: ExperimentConfig,
    pub scenario: Scenario,
    pub devices: Vec<DeviceDataset<T>>,
    pub test: Dataset<T>,
    /// All training data, device order.
    pub pooled: Dataset<T>,
    pub air_dists: Vec<ClassDistribution>,
    pub partition: Option<PartitionSet>,
    pub assignment: AssignmentMap,
    pub learner: Learner,
    pub time_params: TimeParams,
    pub hierarchy: Hierarchy,
    /// Device ids per air node, grouped by target satellite.
    pub air_groups: Vec<Vec<Vec<usize>>>,
    train_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteRecord<T> {
    /// Local round of the aggregation.
    pub t: usize,
    /// Satellite models; `None` for satellites without devices.
    pub models: Vec<Option<Vec<T>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalRecord<T> {
    pub round: usize,
    pub t: usize,
    pub model: Vec<T>,
    pub accuracy: f64,
    /// Global training objective.
    pub loss: f64,
    pub time: TimeBreakdown,
    /// Parameters sent by all satellites during the synchronization.
    pub params_sent: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrace<T> {
    pub initial: Vec<T>,
    pub satellite_records: Vec<SatelliteRecord<T>>,
    pub global_records: Vec<GlobalRecord<T>>,
    /// Transfer log of the first synchronization; later ones repeat it.
    pub comm: CommLog,
    pub diagnostics: Vec<IntervalDiagnostics>,
}

impl<T: Scalar> TrainingTrace<T> {
    pub fn final_accuracy(&self) -> f64 {
        self.global_records.last().map_or(0.0, |r| r.accuracy)
    }

    pub fn final_loss(&self) -> f64 {
        self.global_records.last().map_or(f64::NAN, |r| r.loss)
    }

    pub fn total_time(&self) -> f64 {
        self.global_records.iter().map(|r| r.time.t_total).sum()
    }

    /// Largest interval estimates, NaN without diagnostics.
    pub fn max_delta(&self) -> (f64, f64) {
        if self.diagnostics.is_empty() {
            return (f64::NAN, f64::NAN);
        }
        self.diagnostics
            .iter()
            .fold((0.0, 0.0), |(a, b), d| (f64::max(a, d.delta), f64::max(b, d.big_delta)))
    }

    /// Smallest `bound - gap` over all intervals, NaN without diagnostics.
    pub fn bound_margin(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.bound - d.gap)
            .reduce(f64::min)
            .unwrap_or(f64::NAN)
    }
}

fn time_params(cfg: &ExperimentConfig, learner: &Learner) -> TimeParams {
    let t = &cfg.timing;
    TimeParams {
        links: cfg.links.table().expect("validated"),
        model_params: t.model_params.unwrap_or_else(|| learner.n_params()),
        bits_per_param: t.bits_per_param,
        flops_per_sample: t.flops_per_sample.unwrap_or_else(|| learner.flops_per_sample()),
        flops_device: t.flops_device,
        flops_air: t.flops_air,
        flops_sat: t.flops_sat,
        samples_per_epoch: cfg
            .training
            .batch_size
            .map_or(cfg.data.samples_per_device, |b| b.min(cfg.data.samples_per_device)),
        epochs: 1,
        tau1: cfg.training.tau1,
        tau2: cfg.training.tau2,
    }
}

impl<T: Scalar> Federation<T> {
    /// Builds the scenario, data and assignment from `cfg`. Data, partition,
    /// assignment and training draw from independent generators derived from
    /// the seed in that order, so policies compared at one seed see the same
    /// data.
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
        let data_seed: u64 = master.random();
        let partition_seed: u64 = master.random();
        let assign_seed: u64 = master.random();
        let train_seed: u64 = master.random();

        let topology = cfg.topology.build(cfg.links.table()?)?;
        let scenario = Scenario::new(topology)?;
        let longitudes: Vec<f64> = scenario.topology.devices.iter().map(|d| d.longitude_deg).collect();
        let (devices, test) = generate_data::<T, _>(&cfg.data, &longitudes, &mut ChaCha8Rng::seed_from_u64(data_seed))?;
        let air_dists = scenario
            .topology
            .air_nodes
            .iter()
            .map(|a| {
                let d: Vec<ClassDistribution> = a.device_ids.iter().map(|&i| devices[i].class_dist.clone()).collect();
                air_class_distribution(&d)
            })
            .collect::<Result<Vec<_>>>()?;

        let learner = Learner {
            kind: cfg.training.learner,
            dim: cfg.data.dim,
            n_classes: cfg.data.n_classes,
            lambda: cfg.training.lambda,
        };
        let time_params = time_params(cfg, &learner);
        time_params.validate()?;
        let delivery = LinkDelays::new(&time_params, LinkLoad::of(&scenario))?.delivery();

        let mut assign_rng = ChaCha8Rng::seed_from_u64(assign_seed);
        let (partition, assignment) = match cfg.policy {
            Policy::Gdo => (None, gdo(&scenario.coverage)),
            Policy::Cdo => (None, cdo(&scenario, &air_dists, delivery, &mut assign_rng)?),
            Policy::Cnasa { n_geo } => {
                let parts = if scenario.topology.is_single_orbit() {
                    arc_partition(&scenario.topology, &scenario.coverage, n_geo)?
                } else {
                    let mut r = ChaCha8Rng::seed_from_u64(partition_seed);
                    graph_partition(&scenario.graph, &scenario.coverage, n_geo, &mut r)?
                };
                let a = cnasa(&scenario, &parts, &air_dists, delivery, &mut assign_rng)?;
                (Some(parts), a)
            }
        };

        let n_sats = scenario.n_sats();
        let members = assignment.members(n_sats);
        let air_groups: Vec<Vec<Vec<usize>>> = members
            .iter()
            .map(|airs| {
                airs.iter()
                    .map(|&a| scenario.topology.air_nodes[a].device_ids.clone())
                    .collect()
            })
            .collect();
        let sat_devices = air_groups
            .iter()
            .map(|groups| {
                let mut d: Vec<usize> = groups.concat();
                d.sort_unstable();
                d
            })
            .collect();
        let hierarchy = Hierarchy {
            sat_devices,
            samples: devices.iter().map(|d| d.data.len()).collect(),
        };
        let pooled = Dataset::pooled(devices.iter().map(|d| &d.data), cfg.data.dim);

        Ok(Federation {
            config: cfg.clone(),
            scenario,
            devices,
            test,
            pooled,
            air_dists,
            partition,
            assignment,
            learner,
            time_params,
            hierarchy,
            air_groups,
            train_seed,
        })
    }

    /// Whether the convergence diagnostics apply: convex learner, full
    /// local gradients and diagnostics requested.
    pub fn diagnostics_enabled(&self) -> bool {
        let t = &self.config.training;
        t.diagnostics && self.learner.is_convex() && t.batch_size.is_none()
    }

    fn local_round(&self, local: &mut [Vec<T>], rngs: &mut [ChaCha8Rng], t: usize) -> Result<()> {
        let eta = T::of(self.config.training.eta);
        let batch = self.config.training.batch_size;
        let m = self.learner.n_params();
        local
            .par_iter_mut()
            .zip(rngs.par_iter_mut())
            .zip(self.devices.par_iter())
            .try_for_each_init(
                || vec![T::zero(); m],
                |grad, ((w, rng), dev)| match batch {
                    Some(b) if b < dev.data.len() => {
                        let idx = index::sample(rng, dev.data.len(), b).into_vec();
                        let sub = dev.data.subset(&idx);
                        self.learner.step(w, &sub, eta, grad, t)
                    }
                    _ => self.learner.step(w, &dev.data, eta, grad, t),
                },
            )
    }

    fn aggregate_satellites(&self, local: &mut [Vec<T>]) -> Result<Vec<Option<Vec<T>>>> {
        let air_first = self.config.training.air_first;
        self.air_groups
            .iter()
            .zip(&self.hierarchy.sat_devices)
            .map(|(groups, members)| {
                if members.is_empty() {
                    return Ok(None);
                }
                let models: Vec<Weighted<T>> = members
                    .iter()
                    .map(|&i| Weighted {
                        params: local[i].clone(),
                        samples: self.hierarchy.samples[i],
                    })
                    .collect();
                let positions: Vec<Vec<usize>> = groups
                    .iter()
                    .map(|g| g.iter().map(|d| members.binary_search(d).expect("member")).collect())
                    .collect();
                let agg = satellite_aggregate(&models, air_first.then_some(positions.as_slice()))?;
                for &i in members {
                    local[i].clone_from(&agg.params);
                }
                Ok(Some(agg.params))
            })
            .collect()
    }

    fn synchronize(&self, sat_models: &[Option<Vec<T>>], fallback: &[T]) -> Result<(Vec<T>, CommLog)> {
        let total = self.hierarchy.total_samples() as f64;
        let participants: Vec<ModelVector<T>> = sat_models
            .iter()
            .zip(self.hierarchy.sat_samples())
            .map(|(m, n)| ModelVector::new(m.clone().unwrap_or_else(|| fallback.to_vec()), T::of(n as f64 / total)))
            .collect();
        let out = if self.scenario.topology.is_single_orbit() {
            ring_allreduce_all(&participants)?
        } else {
            multi_orbit_sync_all(&participants, &self.scenario.graph)?
        };
        debug_assert!(out.replicas.iter().all(|r| r == &out.replicas[0]));
        let model = out.replicas.into_iter().next().expect("at least one satellite");
        Ok((model, out.log))
    }

    /// Runs the configured number of global rounds.
    pub fn train(&self) -> Result<TrainingTrace<T>> {
        let cfg = &self.config.training;
        if self.hierarchy.total_samples() == 0 {
            return Err(Error::UndefinedDistribution);
        }
        let per_round = round_time(&self.scenario, &self.assignment, &self.time_params, cfg.sync_algo)?;
        let diagnostics_on = self.diagnostics_enabled();
        let device_data: Vec<Dataset<T>> = if diagnostics_on {
            self.devices.iter().map(|d| d.data.clone()).collect()
        } else {
            Vec::new()
        };

        let mut rng = ChaCha8Rng::seed_from_u64(self.train_seed);
        let initial: Vec<T> = self.learner.init(&mut rng);
        let mut rngs: Vec<ChaCha8Rng> = (0..self.devices.len())
            .map(|_| ChaCha8Rng::seed_from_u64(rng.random()))
            .collect();
        let mut local = vec![initial.clone(); self.devices.len()];
        let mut global = initial.clone();
        let mut t = 0;

        let mut trace = TrainingTrace {
            initial: initial.clone(),
            satellite_records: Vec::new(),
            global_records: Vec::new(),
            comm: CommLog::default(),
            diagnostics: Vec::new(),
        };

        for round in 1..=cfg.global_rounds {
            let start = global.clone();
            let mut sat_models: Vec<Option<Vec<T>>> = self
                .hierarchy
                .sat_devices
                .iter()
                .map(|m| (!m.is_empty()).then(|| global.clone()))
                .collect();
            let mut sat_starts = Vec::new();
            let mut recorded = Vec::new();
            for _ in 0..cfg.tau2 {
                if diagnostics_on {
                    sat_starts.push(sat_models.clone());
                }
                for _ in 0..cfg.tau1 {
                    t += 1;
                    self.local_round(&mut local, &mut rngs, t)?;
                }
                sat_models = self.aggregate_satellites(&mut local)?;
                if diagnostics_on {
                    recorded.extend(sat_models.iter().flatten().cloned());
                }
                trace.satellite_records.push(SatelliteRecord {
                    t,
                    models: sat_models.clone(),
                });
            }

            let (model, log) = self.synchronize(&sat_models, &global)?;
            global = model;
            for w in local.iter_mut() {
                w.clone_from(&global);
            }
            if round == 1 {
                trace.comm = log.clone();
            }
            if diagnostics_on {
                trace.diagnostics.push(diagnose_interval(
                    &self.learner,
                    &device_data,
                    &self.hierarchy,
                    round,
                    &start,
                    &sat_starts,
                    &recorded,
                    &global,
                    cfg.eta,
                    cfg.tau1,
                )?);
            }
            trace.global_records.push(GlobalRecord {
                round,
                t,
                accuracy: self.learner.accuracy(&global, &self.test),
                loss: self.learner.loss(&global, &self.pooled).as_f64(),
                model: global.clone(),
                time: per_round,
                params_sent: log.total_params_sent(),
            });
        }
        Ok(trace)
    }
}

/// Builds the federation and trains it.
pub fn run_hierarchical<T: Scalar>(cfg: &ExperimentConfig) -> Result<(Federation<T>, TrainingTrace<T>)> {
    let fed = Federation::build(cfg)?;
    let trace = fed.train()?;
    Ok((fed, trace))
}

/// Test accuracy of full-batch descent on the pooled data with the same
/// number of local rounds as the federated run.
pub fn centralized_accuracy<T: Scalar>(fed: &Federation<T>) -> Result<f64> {
    let cfg = &fed.config.training;
    let mut rng = ChaCha8Rng::seed_from_u64(fed.train_seed);
    let mut w: Vec<T> = fed.learner.init(&mut rng);
    let mut grad = vec![T::zero(); w.len()];
    let eta = T::of(cfg.eta);
    for t in 1..=cfg.global_rounds * cfg.tau1 * cfg.tau2 {
        fed.learner.step(&mut w, &fed.pooled, eta, &mut grad, t)?;
    }
    Ok(fed.learner.accuracy(&w, &fed.test))
}
