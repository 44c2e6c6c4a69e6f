//! Gradient divergence, virtual centralized trajectories and the
//! convergence bound `(rho / beta) (delta h(tau1) + Delta h(tau1 tau2))`.
//!
//! The maxima over all models in the divergence definitions are replaced by
//! maxima over a finite set of probe models taken from the trajectory, so
//! every value here is an estimate.

use rayon::prelude::*;

use super::data::Dataset;
use super::learner::Learner;
use crate::error::{Error, Result};
use crate::scalar::{distance, Scalar};

/// Safety factor applied to the smoothness and Lipschitz estimates.
pub const CONSTANT_MARGIN: f64 = 1.5;

/// Which devices feed which satellite, and how much data each holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hierarchy {
    /// Device ids of every satellite; satellites without devices are empty.
    pub sat_devices: Vec<Vec<usize>>,
    /// Sample count of every device.
    pub samples: Vec<usize>,
}

impl Hierarchy {
    pub fn sat_samples(&self) -> Vec<usize> {
        self.sat_devices
            .iter()
            .map(|d| d.iter().map(|&i| self.samples[i]).sum())
            .collect()
    }

    pub fn total_samples(&self) -> usize {
        self.samples.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    /// Overall local divergence, data-weighted over devices.
    pub delta: f64,
    /// Overall satellite divergence, data-weighted over satellites.
    pub big_delta: f64,
    /// Per device: max over probes of `|grad F_ki - grad F_k|`.
    pub per_device: Vec<f64>,
    /// Per satellite: max over probes of `|grad F_k - grad F|`.
    pub per_satellite: Vec<f64>,
}

/// Loss and gradient of every device at one probe model.
struct ProbeEval<T> {
    losses: Vec<T>,
    grads: Vec<Vec<T>>,
}

fn evaluate<T: Scalar>(learner: &Learner, devices: &[Dataset<T>], w: &[T]) -> ProbeEval<T> {
    let (losses, grads) = devices
        .par_iter()
        .map(|d| {
            let mut g = vec![T::zero(); w.len()];
            let l = learner.loss_grad(w, d, Some(&mut g));
            (l, g)
        })
        .unzip();
    ProbeEval { losses, grads }
}

fn weighted_sum<T: Scalar>(grads: &[Vec<T>], members: &[usize], samples: &[usize]) -> Vec<T> {
    let total: usize = members.iter().map(|&i| samples[i]).sum();
    let mut out = vec![T::zero(); grads[0].len()];
    if total == 0 {
        return out;
    }
    for &i in members {
        let w = T::of(samples[i] as f64 / total as f64);
        for (o, &g) in out.iter_mut().zip(&grads[i]) {
            *o += w * g;
        }
    }
    out
}

fn check<T: Scalar>(devices: &[Dataset<T>], hierarchy: &Hierarchy, probes: &[Vec<T>]) -> Result<()> {
    if devices.len() != hierarchy.samples.len() {
        return Err(Error::Input("hierarchy and device list disagree".into()));
    }
    if probes.is_empty() {
        return Err(Error::Input("no probe models".into()));
    }
    if hierarchy.total_samples() == 0 {
        return Err(Error::UndefinedDistribution);
    }
    Ok(())
}

/// Divergence estimates over `probes`.
pub fn measure_divergence<T: Scalar>(
    learner: &Learner,
    devices: &[Dataset<T>],
    hierarchy: &Hierarchy,
    probes: &[Vec<T>],
) -> Result<Divergence> {
    check(devices, hierarchy, probes)?;
    let evals: Vec<ProbeEval<T>> = probes.iter().map(|w| evaluate(learner, devices, w)).collect();
    Ok(divergence_from(&evals, hierarchy))
}

fn divergence_from<T: Scalar>(evals: &[ProbeEval<T>], h: &Hierarchy) -> Divergence {
    let n_sats = h.sat_devices.len();
    let mut per_device = vec![0.0f64; h.samples.len()];
    let mut per_satellite = vec![0.0f64; n_sats];
    let all: Vec<usize> = (0..h.samples.len()).collect();
    for e in evals {
        let global = weighted_sum(&e.grads, &all, &h.samples);
        for (k, members) in h.sat_devices.iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let sat = weighted_sum(&e.grads, members, &h.samples);
            per_satellite[k] = per_satellite[k].max(distance(&sat, &global).as_f64());
            for &i in members {
                per_device[i] = per_device[i].max(distance(&e.grads[i], &sat).as_f64());
            }
        }
    }
    let total = h.total_samples() as f64;
    let delta = per_device
        .iter()
        .zip(&h.samples)
        .map(|(&d, &n)| d * n as f64 / total)
        .sum();
    let big_delta = per_satellite
        .iter()
        .zip(h.sat_samples())
        .map(|(&d, n)| d * n as f64 / total)
        .sum();
    Divergence {
        delta,
        big_delta,
        per_device,
        per_satellite,
    }
}

/// Raw Lipschitz and smoothness estimates: the largest loss-difference and
/// gradient-difference ratios over probe pairs and devices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub rho: f64,
    pub beta: f64,
}

fn constants_from<T: Scalar>(evals: &[ProbeEval<T>], probes: &[Vec<T>]) -> Constants {
    let mut rho = 0.0f64;
    let mut beta = 0.0f64;
    for a in 0..probes.len() {
        for b in a + 1..probes.len() {
            let r = distance(&probes[a], &probes[b]).as_f64();
            if r < 1e-12 {
                continue;
            }
            for i in 0..evals[a].losses.len() {
                let dl = (evals[a].losses[i] - evals[b].losses[i]).abs().as_f64();
                let dg = distance(&evals[a].grads[i], &evals[b].grads[i]).as_f64();
                rho = rho.max(dl / r);
                beta = beta.max(dg / r);
            }
        }
    }
    Constants { rho, beta }
}

pub fn estimate_constants<T: Scalar>(learner: &Learner, devices: &[Dataset<T>], probes: &[Vec<T>]) -> Constants {
    let evals: Vec<ProbeEval<T>> = probes.iter().map(|w| evaluate(learner, devices, w)).collect();
    constants_from(&evals, probes)
}

/// `h(t) = (eta beta + 1)^t - 1`.
pub fn h(eta: f64, beta: f64, t: usize) -> f64 {
    ((eta * beta).ln_1p() * t as f64).exp_m1()
}

/// `(rho / beta) (delta h(tau1) + Delta h(tau1 tau2))`.
pub fn theorem_bound(delta: f64, big_delta: f64, rho: f64, beta: f64, eta: f64, tau1: usize, tau2: usize) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Input(format!("smoothness estimate must be positive, got {beta}")));
    }
    Ok(rho / beta * (delta * h(eta, beta, tau1) + big_delta * h(eta, beta, tau1 * tau2)))
}

/// Centralized reference trajectories over one global interval.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualTrajectories<T> {
    /// `v` at every local round of the interval, `tau1 tau2 + 1` points.
    pub global: Vec<Vec<T>>,
    /// `v_k` at every local round, per satellite; `None` without devices.
    pub satellites: Vec<Option<Vec<Vec<T>>>>,
}

/// Runs `v` from `global_start` on all data and every `v_k` on satellite
/// `k`'s data, restarting `v_k` from `sat_starts[s][k]` at the start of
/// satellite interval `s`.
pub fn virtual_trajectories<T: Scalar>(
    learner: &Learner,
    devices: &[Dataset<T>],
    hierarchy: &Hierarchy,
    global_start: &[T],
    sat_starts: &[Vec<Option<Vec<T>>>],
    eta: f64,
    tau1: usize,
) -> Result<VirtualTrajectories<T>> {
    let n_sats = hierarchy.sat_devices.len();
    if sat_starts.iter().any(|s| s.len() != n_sats) {
        return Err(Error::Input("satellite starts do not cover every satellite".into()));
    }
    let tau2 = sat_starts.len();
    let dim = devices.first().map_or(0, |d| d.dim);
    let pooled = Dataset::pooled(devices, dim);
    let eta_t = T::of(eta);
    let mut grad = vec![T::zero(); global_start.len()];

    let mut v = global_start.to_vec();
    let mut global = vec![v.clone()];
    for t in 1..=tau1 * tau2 {
        learner.step(&mut v, &pooled, eta_t, &mut grad, t)?;
        global.push(v.clone());
    }

    let mut satellites = Vec::with_capacity(n_sats);
    for (k, members) in hierarchy.sat_devices.iter().enumerate() {
        if members.is_empty() {
            satellites.push(None);
            continue;
        }
        let data = Dataset::pooled(members.iter().map(|&i| &devices[i]), dim);
        let mut path = Vec::with_capacity(tau1 * tau2 + 1);
        let mut vk = Vec::new();
        for (s, starts) in sat_starts.iter().enumerate() {
            vk = starts[k]
                .clone()
                .ok_or_else(|| Error::Input(format!("satellite {k} has no model at interval {s}")))?;
            if s == 0 {
                path.push(vk.clone());
            }
            for t in 1..=tau1 {
                learner.step(&mut vk, &data, eta_t, &mut grad, s * tau1 + t)?;
                if t < tau1 {
                    path.push(vk.clone());
                }
            }
            path.push(vk.clone());
        }
        debug_assert!(!vk.is_empty());
        satellites.push(Some(path));
    }
    Ok(VirtualTrajectories { global, satellites })
}

/// Estimates for one global interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalDiagnostics {
    pub round: usize,
    pub delta: f64,
    pub big_delta: f64,
    /// Inflated Lipschitz estimate.
    pub rho: f64,
    /// Inflated smoothness estimate.
    pub beta: f64,
    pub bound: f64,
    /// `|F(w) - F(v)|` at the end of the interval.
    pub gap: f64,
}

impl IntervalDiagnostics {
    pub fn holds(&self) -> bool {
        self.gap <= self.bound
    }
}

/// Full diagnostics of one global interval from its probe models and the
/// synchronized model `w_end` at its end.
#[allow(clippy::too_many_arguments)]
pub fn diagnose_interval<T: Scalar>(
    learner: &Learner,
    devices: &[Dataset<T>],
    hierarchy: &Hierarchy,
    round: usize,
    global_start: &[T],
    sat_starts: &[Vec<Option<Vec<T>>>],
    recorded: &[Vec<T>],
    w_end: &[T],
    eta: f64,
    tau1: usize,
) -> Result<IntervalDiagnostics> {
    let tau2 = sat_starts.len();
    let virt = virtual_trajectories(learner, devices, hierarchy, global_start, sat_starts, eta, tau1)?;
    let mut probes: Vec<Vec<T>> = Vec::new();
    probes.push(global_start.to_vec());
    probes.extend(recorded.iter().cloned());
    probes.push(w_end.to_vec());
    probes.extend(virt.global.iter().skip(1).cloned());
    for path in virt.satellites.iter().flatten() {
        probes.extend(path.iter().skip(1).cloned());
    }
    check(devices, hierarchy, &probes)?;
    let evals: Vec<ProbeEval<T>> = probes.iter().map(|w| evaluate(learner, devices, w)).collect();
    let div = divergence_from(&evals, hierarchy);
    let c = constants_from(&evals, &probes);
    let rho = CONSTANT_MARGIN * c.rho;
    let beta = CONSTANT_MARGIN * c.beta;

    let dim = devices.first().map_or(0, |d| d.dim);
    let pooled = Dataset::pooled(devices, dim);
    let v_end = virt.global.last().expect("trajectory has a start");
    let gap = (learner.loss(w_end, &pooled) - learner.loss(v_end, &pooled)).abs().as_f64();
    let bound = if beta > 0.0 {
        theorem_bound(div.delta, div.big_delta, rho, beta, eta, tau1, tau2)?
    } else {
        0.0
    };
    Ok(IntervalDiagnostics {
        round,
        delta: div.delta,
        big_delta: div.big_delta,
        rho,
        beta,
        bound,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(shift: f64) -> Dataset<f64> {
        let mut d = Dataset::empty(2);
        d.push(&[1.0 + shift, 0.0], 0);
        d.push(&[0.0, 1.0 - shift], 1);
        d
    }

    #[test]
    fn h_arithmetic() {
        assert!((h(0.01, 1.0, 5) - 0.051_010_050_1).abs() < 1e-9);
        assert_eq!(h(0.1, 2.0, 0), 0.0);
        assert!(h(0.05, 1.0, 10) > h(0.05, 1.0, 5));
    }

    #[test]
    fn zero_divergence_zero_bound() {
        assert_eq!(theorem_bound(0.0, 0.0, 3.0, 2.0, 0.1, 5, 4).unwrap(), 0.0);
        assert!(theorem_bound(1.0, 1.0, 1.0, 0.0, 0.1, 1, 1).is_err());
    }

    #[test]
    fn identical_devices_do_not_diverge() {
        let l = Learner::softmax(2, 2, 0.01);
        let devices = vec![toy(0.0), toy(0.0), toy(0.0)];
        let h = Hierarchy {
            sat_devices: vec![vec![0, 1], vec![2]],
            samples: vec![2, 2, 2],
        };
        let probes = vec![vec![0.0; 6], vec![0.1, -0.2, 0.3, 0.0, 0.5, -0.1]];
        let d = measure_divergence(&l, &devices, &h, &probes).unwrap();
        assert!(d.delta.abs() < 1e-15);
        assert!(d.big_delta.abs() < 1e-15);
    }

    #[test]
    fn two_device_hand_computed() {
        // at w = 0 every softmax output is 1/2, so the gradient of device data
        // {x, y} is (p - onehot(y)) x^T / n, plus the bias column
        let l = Learner::softmax(1, 2, 0.0);
        let mut a = Dataset::empty(1);
        a.push(&[2.0], 0);
        let mut b = Dataset::empty(1);
        b.push(&[2.0], 1);
        let h = Hierarchy {
            sat_devices: vec![vec![0, 1]],
            samples: vec![1, 1],
        };
        let d = measure_divergence(&l, &[a, b], &h, &[vec![0.0; 4]]).unwrap();
        // grad_a = [-1, 1, -0.5, 0.5], grad_b = [1, -1, 0.5, -0.5], mean 0
        let expected = (1.0f64 + 1.0 + 0.25 + 0.25).sqrt();
        assert!((d.per_device[0] - expected).abs() < 1e-12);
        assert!((d.delta - expected).abs() < 1e-12);
        assert!(d.big_delta.abs() < 1e-15);
    }

    #[test]
    fn virtual_start_matches_sync_point() {
        let l = Learner::softmax(2, 2, 0.01);
        let devices = vec![toy(0.1), toy(-0.2)];
        let h = Hierarchy {
            sat_devices: vec![vec![0], vec![1]],
            samples: vec![2, 2],
        };
        let w0 = vec![0.05; 6];
        let starts = vec![vec![Some(w0.clone()), Some(w0.clone())]; 2];
        let v = virtual_trajectories(&l, &devices, &h, &w0, &starts, 0.1, 3).unwrap();
        assert_eq!(v.global[0], w0);
        assert_eq!(v.global.len(), 7);
        assert_eq!(v.satellites[0].as_ref().unwrap().len(), 7);
    }

    #[test]
    fn single_device_virtual_equals_local() {
        let l = Learner::softmax(2, 2, 0.0);
        let devices = vec![toy(0.3)];
        let h = Hierarchy {
            sat_devices: vec![vec![0]],
            samples: vec![2],
        };
        let w0 = vec![0.0; 6];
        let starts = vec![vec![Some(w0.clone())]];
        let v = virtual_trajectories(&l, &devices, &h, &w0, &starts, 0.5, 4).unwrap();
        let mut w = w0.clone();
        let mut g = vec![0.0; 6];
        for (t, vt) in v.global.iter().enumerate().skip(1) {
            l.step(&mut w, &devices[0], 0.5, &mut g, t).unwrap();
            assert_eq!(&w, vt);
            assert_eq!(&w, &v.satellites[0].as_ref().unwrap()[t]);
        }
    }
}
