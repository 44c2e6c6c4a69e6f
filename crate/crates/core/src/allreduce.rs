//! Inter-satellite model synchronization.
//!
//! Ring allreduce is simulated step by step: every participant cuts its
//! weight-scaled model into `n` chunks, runs `n - 1` scatter-reduce steps in
//! which satellite `k` forwards chunk `(k - step) mod n` to its successor, and
//! `n - 1` allgather steps in which the completed chunks overwrite stale ones.
//! Every transfer is recorded in a [`CommLog`].

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::topology::IslGraph;

/// Model parameters plus the fraction of global data they stand for.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelVector<T> {
    pub params: Vec<T>,
    pub weight: T,
}

impl<T: Scalar> ModelVector<T> {
    pub fn new(params: Vec<T>, weight: T) -> Self {
        ModelVector { params, weight }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

/// Which synchronization round a transfer belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyncPhase {
    /// Flat ring over all participants.
    Ring,
    /// Multi-orbit step 1: allreduce inside every orbit.
    IntraOrbit,
    /// Multi-orbit step 2: allreduce across one representative per orbit.
    InterOrbit,
    /// Multi-orbit step 3: representatives push the global model around
    /// their orbit; other satellites replace what they receive.
    Propagate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    ScatterReduce,
    AllGather,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Phase {
    pub sync: SyncPhase,
    pub stage: Stage,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sync = match self.sync {
            SyncPhase::Ring => "ring",
            SyncPhase::IntraOrbit => "intra",
            SyncPhase::InterOrbit => "inter",
            SyncPhase::Propagate => "propagate",
        };
        let stage = match self.stage {
            Stage::ScatterReduce => "scatter_reduce",
            Stage::AllGather => "allgather",
        };
        write!(f, "{sync}:{stage}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommRecord {
    pub phase: Phase,
    pub step: usize,
    pub src: usize,
    pub dst: usize,
    pub params: usize,
}

/// Transfer counters per satellite and the full transfer record.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommLog {
    pub chunks_sent: Vec<usize>,
    pub chunks_received: Vec<usize>,
    pub params_sent: Vec<usize>,
    pub params_received: Vec<usize>,
    /// Synchronous steps per (sync phase, stage), in execution order.
    pub steps: Vec<(Phase, usize)>,
    pub records: Vec<CommRecord>,
}

impl CommLog {
    pub fn new(n_nodes: usize) -> Self {
        CommLog {
            chunks_sent: vec![0; n_nodes],
            chunks_received: vec![0; n_nodes],
            params_sent: vec![0; n_nodes],
            params_received: vec![0; n_nodes],
            steps: Vec::new(),
            records: Vec::new(),
        }
    }

    fn record(&mut self, phase: Phase, step: usize, src: usize, dst: usize, params: usize) {
        self.chunks_sent[src] += 1;
        self.chunks_received[dst] += 1;
        self.params_sent[src] += params;
        self.params_received[dst] += params;
        self.records.push(CommRecord {
            phase,
            step,
            src,
            dst,
            params,
        });
    }

    /// Step count of one synchronization phase, both stages together.
    pub fn phase_steps(&self, sync: SyncPhase) -> usize {
        self.steps
            .iter()
            .filter(|(p, _)| p.sync == sync)
            .map(|&(_, s)| s)
            .sum()
    }

    pub fn total_params_sent(&self) -> usize {
        self.params_sent.iter().sum()
    }

    pub fn total_params_received(&self) -> usize {
        self.params_received.iter().sum()
    }
}

/// Splits `params` into `n` chunks of `ceil(M / n)` entries, zero-padding the
/// tail.
pub fn chunk_model<T: Scalar>(params: &[T], n: usize) -> Vec<Vec<T>> {
    let n = n.max(1);
    let size = params.len().div_ceil(n);
    (0..n)
        .map(|c| {
            let mut chunk = vec![T::zero(); size];
            let lo = (c * size).min(params.len());
            let hi = ((c + 1) * size).min(params.len());
            chunk[..hi - lo].copy_from_slice(&params[lo..hi]);
            chunk
        })
        .collect()
}

/// Concatenates chunks and drops the padding beyond `len`.
pub fn stitch<T: Scalar>(chunks: &[Vec<T>], len: usize) -> Vec<T> {
    let mut out: Vec<T> = chunks.concat();
    out.truncate(len);
    out
}

/// Runs scatter-reduce then allgather over `ring` (satellite ids, ring
/// order). `bufs[k]` holds member `k`'s chunks; on return every member holds
/// the chunk-wise sum.
fn ring_pass<T: Scalar>(ring: &[usize], bufs: &mut [Vec<Vec<T>>], sync: SyncPhase, log: &mut CommLog) {
    let n = ring.len();
    if n < 2 {
        return;
    }
    let scatter = Phase {
        sync,
        stage: Stage::ScatterReduce,
    };
    for step in 0..n - 1 {
        for k in 0..n {
            let idx = (k + n - step % n) % n;
            let dst = (k + 1) % n;
            let chunk = bufs[k][idx].clone();
            for (acc, x) in bufs[dst][idx].iter_mut().zip(&chunk) {
                *acc += *x;
            }
            log.record(scatter, step, ring[k], ring[dst], chunk.len());
        }
    }
    log.steps.push((scatter, n - 1));

    let gather = Phase {
        sync,
        stage: Stage::AllGather,
    };
    for step in 0..n - 1 {
        for k in 0..n {
            let idx = (k + 1 + n - step % n) % n;
            let dst = (k + 1) % n;
            let chunk = bufs[k][idx].clone();
            log.record(gather, step, ring[k], ring[dst], chunk.len());
            bufs[dst][idx] = chunk;
        }
    }
    log.steps.push((gather, n - 1));
}

fn validate<T: Scalar>(models: &[&ModelVector<T>]) -> Result<usize> {
    let first = models
        .first()
        .ok_or_else(|| Error::Input("allreduce needs at least one participant".into()))?;
    let m = first.len();
    if let Some(bad) = models.iter().position(|v| v.len() != m) {
        return Err(Error::Input(format!(
            "participant {bad} has {} parameters, expected {m}",
            models[bad].len()
        )));
    }
    if models.iter().any(|v| !v.weight.is_finite() || v.params.iter().any(|x| !x.is_finite())) {
        return Err(Error::Input("non-finite model entries".into()));
    }
    let total: T = models.iter().map(|v| v.weight).sum();
    let tol = T::of(1e-9).max(T::epsilon() * T::of_usize(16 * models.len()));
    if (total - T::one()).abs() > tol {
        return Err(Error::Input(format!("participant weights sum to {total}, expected 1")));
    }
    Ok(m)
}

fn scaled_chunks<T: Scalar>(model: &ModelVector<T>, n: usize) -> Vec<Vec<T>> {
    let scaled: Vec<T> = model.params.iter().map(|&x| x * model.weight).collect();
    chunk_model(&scaled, n)
}

/// Outcome of a synchronization with every participant's final copy.
#[derive(Debug, Clone)]
pub struct SyncOutcome<T> {
    /// Final model of every participant, indexed like the input.
    pub replicas: Vec<Vec<T>>,
    pub log: CommLog,
}

impl<T: Scalar> SyncOutcome<T> {
    pub fn model(&self) -> ModelVector<T> {
        ModelVector::new(self.replicas[0].clone(), T::one())
    }
}

/// Weighted ring allreduce keeping every participant's result.
pub fn ring_allreduce_all<T: Scalar>(models: &[ModelVector<T>]) -> Result<SyncOutcome<T>> {
    let refs: Vec<&ModelVector<T>> = models.iter().collect();
    let m = validate(&refs)?;
    let n = models.len();
    let ring: Vec<usize> = (0..n).collect();
    let mut log = CommLog::new(n);
    let mut bufs: Vec<Vec<Vec<T>>> = models.iter().map(|v| scaled_chunks(v, n)).collect();
    ring_pass(&ring, &mut bufs, SyncPhase::Ring, &mut log);
    let replicas = bufs.iter().map(|b| stitch(b, m)).collect();
    Ok(SyncOutcome { replicas, log })
}

/// Weighted ring allreduce: the data-weighted average and the transfer log.
pub fn ring_allreduce<T: Scalar>(models: &[ModelVector<T>]) -> Result<(ModelVector<T>, CommLog)> {
    let out = ring_allreduce_all(models)?;
    Ok((out.model(), out.log))
}

/// Representative of every orbit for the cross-orbit ring: the lowest-id
/// satellite with an inter-orbit link.
pub fn orbit_representatives(graph: &IslGraph) -> Result<Vec<usize>> {
    let orbits = graph.orbits();
    if orbits.len() < 2 {
        return Ok(orbits.iter().map(|o| *o.iter().min().expect("non-empty orbit")).collect());
    }
    orbits
        .iter()
        .enumerate()
        .map(|(i, o)| {
            o.iter()
                .copied()
                .filter(|&s| graph.is_bridge_node(s))
                .min()
                .ok_or_else(|| Error::Topology(format!("orbit {i} has no inter-orbit link")))
        })
        .collect()
}

/// Three-phase synchronization for several orbits. `models[s]` belongs to
/// satellite `s` of `graph`.
///
/// 1. Ring allreduce inside every orbit yields the orbit's weighted sum.
/// 2. One representative per orbit, ring ordered by orbit index, allreduces
///    the orbit sums into the global sum.
/// 3. Inside every orbit the representative's copy is propagated with the
///    same ring schedule while the other satellites replace their chunks.
pub fn multi_orbit_sync_all<T: Scalar>(models: &[ModelVector<T>], graph: &IslGraph) -> Result<SyncOutcome<T>> {
    let n = graph.n_nodes();
    if models.len() != n {
        return Err(Error::Input(format!(
            "expected {n} satellite models, got {}",
            models.len()
        )));
    }
    let refs: Vec<&ModelVector<T>> = models.iter().collect();
    let m = validate(&refs)?;
    let orbits = graph.orbits();
    if orbits.iter().any(Vec::is_empty) {
        return Err(Error::Topology("empty orbit".into()));
    }
    let reps = orbit_representatives(graph)?;
    let mut log = CommLog::new(n);
    let mut replicas: Vec<Vec<T>> = vec![Vec::new(); n];

    // phase 1
    for orbit in orbits {
        let k = orbit.len();
        let mut bufs: Vec<Vec<Vec<T>>> = orbit.iter().map(|&s| scaled_chunks(&models[s], k)).collect();
        ring_pass(orbit, &mut bufs, SyncPhase::IntraOrbit, &mut log);
        for (&s, b) in orbit.iter().zip(&bufs) {
            replicas[s] = stitch(b, m);
        }
    }
    if orbits.len() == 1 {
        return Ok(SyncOutcome { replicas, log });
    }

    // phase 2
    let r = reps.len();
    let mut bufs: Vec<Vec<Vec<T>>> = reps.iter().map(|&s| chunk_model(&replicas[s], r)).collect();
    ring_pass(&reps, &mut bufs, SyncPhase::InterOrbit, &mut log);
    for (&s, b) in reps.iter().zip(&bufs) {
        replicas[s] = stitch(b, m);
    }

    // phase 3
    for (orbit, &rep) in orbits.iter().zip(&reps) {
        let k = orbit.len();
        let mut bufs: Vec<Vec<Vec<T>>> = orbit
            .iter()
            .map(|&s| {
                if s == rep {
                    chunk_model(&replicas[s], k)
                } else {
                    chunk_model(&vec![T::zero(); m], k)
                }
            })
            .collect();
        ring_pass(orbit, &mut bufs, SyncPhase::Propagate, &mut log);
        for (&s, b) in orbit.iter().zip(&bufs) {
            replicas[s] = stitch(b, m);
        }
    }
    Ok(SyncOutcome { replicas, log })
}

pub fn multi_orbit_sync<T: Scalar>(models: &[ModelVector<T>], graph: &IslGraph) -> Result<(ModelVector<T>, CommLog)> {
    let out = multi_orbit_sync_all(models, graph)?;
    Ok((out.model(), out.log))
}

/// Closed-form per-node ring traffic in parameters: `2 (n - 1) ceil(M / n)`.
pub fn ring_traffic(m: usize, n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        2 * (n - 1) * m.div_ceil(n)
    }
}

/// Parameters sent by every node of a completed flat ring allreduce over `n`
/// participants of `m` parameters. Fails if nodes disagree or the log does
/// not cover `n` nodes.
pub fn traffic_per_node(log: &CommLog, m: usize, n: usize) -> Result<usize> {
    if log.params_sent.len() != n {
        return Err(Error::Input(format!(
            "log covers {} nodes, expected {n}",
            log.params_sent.len()
        )));
    }
    let first = log.params_sent.first().copied().unwrap_or(0);
    if log.params_sent.iter().any(|&p| p != first) {
        return Err(Error::Input("per-node traffic is not uniform".into()));
    }
    debug_assert!(n == 0 || first == ring_traffic(m, n) || log.records.is_empty());
    Ok(first)
}

/// Analytic per-node gossip traffic in parameters: `n log2(n) M`.
pub fn gossip_traffic(n: usize, m: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Input("gossip needs at least two satellites".into()));
    }
    Ok(n as f64 * (n as f64).log2() * m as f64)
}
