mod common;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sagin_core::assignment::{
    air_class_distribution, cnasa, gdo, kmeans, AssignmentMap, ClassDistribution, DeliveryCosts,
};
use sagin_core::config::ExperimentConfig;
use sagin_core::fl::data::Dataset;
use sagin_core::fl::divergence::{virtual_trajectories, Hierarchy};
use sagin_core::fl::learner::Learner;
use sagin_core::fl::Federation;
use sagin_core::partition::PartitionSet;
use sagin_core::scenario::Scenario;
use sagin_core::topology::{build_single_orbit, LinkTable};

use common::{descend, max_abs_diff, softmax_gradient};

fn sse(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let dim = points[0].len();
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<&Vec<f64>> = points.iter().zip(labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
        if members.is_empty() {
            return f64::INFINITY;
        }
        let mean: Vec<f64> = (0..dim)
            .map(|j| members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64)
            .collect();
        total += members
            .iter()
            .map(|p| p.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum::<f64>();
    }
    total
}

/// Same partition up to a relabelling.
fn same_partition(a: &[usize], b: &[usize]) -> bool {
    (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

#[test]
fn kmeans_two_families_equals_best_two_partition() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Vec<f64>> = (0..8)
            .map(|i| {
                let mut p = vec![0.0; 4];
                let family = if i % 3 == 0 { 0 } else { 2 };
                let noise = rng.random_range(0.0..0.2);
                p[family] = 1.0 - noise;
                p[family + 1] = noise;
                p
            })
            .collect();
        let mut best = (f64::INFINITY, vec![]);
        for mask in 1u32..(1 << 8) - 1 {
            let labels: Vec<usize> = (0..8).map(|i| ((mask >> i) & 1) as usize).collect();
            let cost = sse(&points, &labels, 2);
            if cost < best.0 {
                best = (cost, labels);
            }
        }
        let got = kmeans(&points, 2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert!(same_partition(&got, &best.1), "seed {seed}: {got:?} vs {:?}", best.1);
        let families: Vec<usize> = (0..8).map(|i| usize::from(i % 3 != 0)).collect();
        assert!(same_partition(&got, &families));
    }
}

#[test]
fn kmeans_degenerate_k() {
    let points: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 0.0]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut singletons = kmeans(&points, 5, &mut rng).unwrap();
    singletons.sort_unstable();
    assert_eq!(singletons, vec![0, 1, 2, 3, 4]);
    assert!(kmeans(&points, 1, &mut rng).unwrap().iter().all(|&l| l == 0));
    assert!(kmeans(&points, 6, &mut rng).is_err());
}

#[test]
fn air_distribution_equals_pooled_histogram() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let mut pooled = Vec::new();
        let devices: Vec<ClassDistribution> = (0..3)
            .map(|_| {
                let n = rng.random_range(1..40);
                let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..10)).collect();
                pooled.extend_from_slice(&labels);
                ClassDistribution::from_labels(&labels, 10)
            })
            .collect();
        let got = air_class_distribution(&devices).unwrap();
        let want = ClassDistribution::from_labels(&pooled, 10);
        assert_eq!(got.sample_count, want.sample_count);
        assert!(max_abs_diff(&got.probs, &want.probs) < 1e-12);
    }
}

const DELIVERY: DeliveryCosts = DeliveryCosts {
    air_sat_s: 0.005,
    hop_s: 0.021,
};

fn delivery_time(s: &Scenario, target: &[usize]) -> f64 {
    target
        .iter()
        .enumerate()
        .map(|(a, &sat)| DELIVERY.air_sat_s + f64::from(s.hops.get(s.coverage.access[a], sat)) * DELIVERY.hop_s)
        .sum()
}

#[test]
fn cnasa_is_optimal_for_its_clusters() {
    // 4 satellites, 8 air nodes in two label families of 4. Every satellite
    // must receive one member of each family, and no other placement of the
    // same clusters may be faster.
    let s = Scenario::new(build_single_orbit(4, 330.0, 8, 1, LinkTable::reference()).unwrap()).unwrap();
    for layout in 0..6u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(layout);
        let mut family: Vec<usize> = [0, 0, 0, 0, 1, 1, 1, 1].to_vec();
        family.shuffle(&mut rng);
        let dists: Vec<ClassDistribution> = family
            .iter()
            .map(|&f| ClassDistribution::from_counts(&if f == 0 { [3, 1] } else { [0, 4] }))
            .collect();
        let global = PartitionSet::global(4, &s.coverage);
        let f = cnasa(&s, &global, &dists, DELIVERY, &mut rng).unwrap();
        let clusters = f.members(4);
        for c in &clusters {
            let mut fams: Vec<usize> = c.iter().map(|&a| family[a]).collect();
            fams.sort_unstable();
            assert_eq!(fams, vec![0, 1], "layout {layout}");
        }

        let mut best = f64::INFINITY;
        let mut balanced_best = f64::INFINITY;
        for code in 0..4usize.pow(8) {
            let target: Vec<usize> = (0..8).map(|a| (code / 4usize.pow(a as u32)) % 4).collect();
            let balanced = (0..4).all(|sat| {
                (0..2).all(|fam| (0..8).filter(|&a| target[a] == sat && family[a] == fam).count() == 1)
            });
            if !balanced {
                continue;
            }
            let t = delivery_time(&s, &target);
            balanced_best = balanced_best.min(t);
            let keeps_clusters = clusters.iter().all(|c| c.iter().all(|&a| target[a] == target[c[0]]));
            if keeps_clusters {
                best = best.min(t);
            }
        }
        let ours = delivery_time(&s, &f.target);
        assert!((ours - best).abs() < 1e-12, "layout {layout}");
        assert!(ours >= balanced_best - 1e-12);
        assert_eq!(f, AssignmentMap::new(f.target.clone(), &s));
    }
}

fn pooled_l1(members: &[usize], air: &[ClassDistribution], global: &ClassDistribution) -> f64 {
    let d: Vec<ClassDistribution> = members.iter().map(|&a| air[a].clone()).collect();
    air_class_distribution(&d).unwrap().l1_distance(global)
}

fn table_config(policy: &str, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml(include_str!("../../../configs/table1.toml")).unwrap();
    cfg.policy = policy.parse().unwrap();
    cfg.seed = seed;
    cfg
}

#[test]
fn cdo_trades_hops_for_diversity() {
    let g: Federation<f64> = Federation::build(&table_config("gdo", 0)).unwrap();
    let c: Federation<f64> = Federation::build(&table_config("cdo", 0)).unwrap();
    let global = air_class_distribution(&g.air_dists).unwrap();
    let n = g.scenario.n_sats();
    let mean_l1 = |f: &Federation<f64>| {
        f.assignment.members(n).iter().map(|m| pooled_l1(m, &f.air_dists, &global)).sum::<f64>() / n as f64
    };
    assert_eq!(g.assignment, gdo(&g.scenario.coverage));
    assert!(c.assignment.hops.iter().zip(&g.assignment.hops).all(|(a, b)| a >= b));
    assert!(c.assignment.relay_hops() > 0);
    assert!(mean_l1(&c) < mean_l1(&g));
}

#[test]
fn cnasa_clusters_beat_random_splits() {
    let (mut ours, mut random) = (0.0, 0.0);
    for seed in 0..20 {
        let f: Federation<f64> = Federation::build(&table_config("cnasa-4", seed)).unwrap();
        let parts = f.partition.as_ref().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let members = f.assignment.members(f.scenario.n_sats());
        for (part, air) in parts.parts.iter().zip(&parts.air_parts) {
            let part_dists: Vec<ClassDistribution> = air.iter().map(|&a| f.air_dists[a].clone()).collect();
            let part_global = air_class_distribution(&part_dists).unwrap();
            let mut shuffled = air.clone();
            shuffled.shuffle(&mut rng);
            let mut offset = 0;
            for &sat in part {
                let size = members[sat].len();
                ours += pooled_l1(&members[sat], &f.air_dists, &part_global);
                random += pooled_l1(&shuffled[offset..offset + size], &f.air_dists, &part_global);
                offset += size;
            }
        }
    }
    assert!(ours <= random, "clustered {ours} vs random {random}");
}

fn toy_devices() -> Vec<Dataset<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    (0..4)
        .map(|i| {
            let mut d = Dataset::empty(3);
            for j in 0..5 {
                let label = (i + j) % 3;
                let x: Vec<f64> = (0..3).map(|k| f64::from(u8::from(k == label)) + rng.random_range(-0.5..0.5)).collect();
                d.push(&x, label);
            }
            d
        })
        .collect()
}

#[test]
fn virtual_trajectories_match_hand_rolled_descent() {
    let devices = toy_devices();
    let learner = Learner::softmax(3, 3, 0.05);
    let h = Hierarchy {
        sat_devices: vec![vec![0, 1], vec![2, 3]],
        samples: vec![5; 4],
    };
    let w0: Vec<f64> = (0..learner.n_params()).map(|i| 0.01 * i as f64).collect();
    let w1: Vec<f64> = w0.iter().map(|x| -x).collect();
    let starts = vec![vec![Some(w0.clone()), Some(w0.clone())], vec![Some(w1.clone()), Some(w0.clone())]];
    let (eta, tau1) = (0.4, 3);
    let v = virtual_trajectories(&learner, &devices, &h, &w0, &starts, eta, tau1).unwrap();

    let pooled = Dataset::pooled(&devices, 3);
    let want = descend(&w0, &pooled, 3, 0.05, eta, 2 * tau1);
    assert_eq!(v.global.len(), want.len());
    for (a, b) in v.global.iter().zip(&want) {
        assert!(max_abs_diff(a, b) < 1e-12);
    }

    let sat0 = Dataset::pooled(&devices[..2], 3);
    let first = descend(&w0, &sat0, 3, 0.05, eta, tau1);
    let second = descend(&w1, &sat0, 3, 0.05, eta, tau1);
    let path = v.satellites[0].as_ref().unwrap();
    let want: Vec<&Vec<f64>> = first.iter().chain(&second[1..]).collect();
    assert_eq!(path.len(), want.len());
    for (a, b) in path.iter().zip(want) {
        assert!(max_abs_diff(a, b) < 1e-12);
    }
}

#[test]
fn learner_gradient_matches_direct_formula() {
    let devices = toy_devices();
    let learner = Learner::softmax(3, 3, 0.1);
    let w: Vec<f64> = (0..learner.n_params()).map(|i| (i as f64 * 0.37).sin()).collect();
    for d in &devices {
        let got = learner.gradient(&w, d);
        assert!(max_abs_diff(&got, &softmax_gradient(&w, d, 3, 0.1)) < 1e-12);
    }
}
