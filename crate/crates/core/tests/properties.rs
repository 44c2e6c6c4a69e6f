use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sagin_core::allreduce::{chunk_model, multi_orbit_sync_all, ring_allreduce_all, stitch, ModelVector};
use sagin_core::assignment::{build_clusters, matching_cost, min_cost_matching, ClassDistribution};
use sagin_core::coverage::compute_coverage;
use sagin_core::partition::graph_partition;
use sagin_core::topology::{build_single_orbit, build_walker, derive_isl_graph, hop_distances, IslGraph, LinkTable};

fn weighted_average(models: &[ModelVector<f64>]) -> Vec<f64> {
    let m = models[0].params.len();
    let mut out = vec![0.0; m];
    for mv in models {
        for (o, p) in out.iter_mut().zip(&mv.params) {
            *o += mv.weight * p;
        }
    }
    out
}

fn models_strategy(max_n: usize, max_m: usize) -> impl Strategy<Value = Vec<ModelVector<f64>>> {
    (1..=max_n, 1..=max_m).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(prop::collection::vec(-10.0..10.0f64, m), n),
            prop::collection::vec(0.01..1.0f64, n),
        )
            .prop_map(|(params, raw)| {
                let total: f64 = raw.iter().sum();
                params
                    .into_iter()
                    .zip(raw)
                    .map(|(p, w)| ModelVector::new(p, w / total))
                    .collect()
            })
    })
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1.0f64, |s, x| s.max(x.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn walker_graph(planes: usize, per_plane: usize) -> IslGraph {
    let t = build_walker(planes, per_plane, 85.0, 550.0, 1, 1, LinkTable::reference()).unwrap();
    derive_isl_graph(&t, t.epoch_s)
}

/// All-pairs hop counts by Floyd-Warshall.
fn floyd_warshall(g: &IslGraph) -> Vec<Vec<u32>> {
    let n = g.n_nodes();
    let inf = u32::MAX / 2;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
        for &j in g.neighbors(i) {
            row[j] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn induced_diameter_bfs(g: &IslGraph, members: &[usize]) -> u32 {
    let mut worst = 0;
    for &src in members {
        let mut dist = vec![u32::MAX; g.n_nodes()];
        dist[src] = 0;
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if members.contains(&v) && dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for &m in members {
            worst = worst.max(dist[m]);
        }
    }
    worst
}

fn brute_force_min(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == cost.len() {
            *best = best.min(acc);
            return;
        }
        for c in 0..cost.len() {
            if !used[c] {
                used[c] = true;
                go(cost, row + 1, used, acc + cost[row][c], best);
                used[c] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_allreduce_matches_weighted_average(models in models_strategy(24, 300)) {
        let expect = weighted_average(&models);
        let out = ring_allreduce_all(&models).unwrap();
        prop_assert!(rel_err(&out.replicas[0], &expect) < 1e-9);
        prop_assert!(out.replicas.iter().all(|r| r == &out.replicas[0]));
    }

    #[test]
    fn multi_orbit_matches_weighted_average(planes in 2usize..5, per_plane in 3usize..7, m in 1usize..200, seed in any::<u64>()) {
        use rand::Rng;
        let g = walker_graph(planes, per_plane);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = planes * per_plane;
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let models: Vec<ModelVector<f64>> = raw
            .iter()
            .map(|w| ModelVector::new((0..m).map(|_| rng.random_range(-5.0..5.0)).collect(), w / total))
            .collect();
        let out = multi_orbit_sync_all(&models, &g).unwrap();
        prop_assert!(rel_err(&out.replicas[0], &weighted_average(&models)) < 1e-9);
        prop_assert!(out.replicas.iter().all(|r| r == &out.replicas[0]));
    }

    #[test]
    fn chunks_stitch_back(params in prop::collection::vec(-1e6..1e6f64, 0..500), n in 1usize..70) {
        let chunks = chunk_model(&params, n);
        prop_assert_eq!(chunks.len(), n);
        prop_assert!(chunks.iter().all(|c| c.len() == params.len().div_ceil(n)));
        prop_assert_eq!(stitch(&chunks, params.len()), params);
    }

    #[test]
    fn hop_matrix_is_shortest_path_metric(planes in 2usize..6, per_plane in 3usize..12) {
        let g = walker_graph(planes, per_plane);
        let h = hop_distances(&g).unwrap();
        let fw = floyd_warshall(&g);
        for a in 0..g.n_nodes() {
            for b in 0..g.n_nodes() {
                prop_assert_eq!(h.get(a, b), fw[a][b]);
                prop_assert_eq!(h.get(a, b), h.get(b, a));
            }
            prop_assert_eq!(h.get(a, a), 0);
        }
    }

    #[test]
    fn coverage_is_nearest_subsatellite_point(planes in 2usize..5, per_plane in 3usize..9, air in 1usize..4) {
        let t = build_walker(planes, per_plane, 70.0, 550.0, air, 1, LinkTable::reference()).unwrap();
        let c = compute_coverage(&t);
        prop_assert_eq!(c.access.len(), t.n_air());
        for (a, node) in t.air_nodes.iter().enumerate() {
            let p = node.ground_point();
            let best = t
                .satellites
                .iter()
                .map(|s| p.central_angle(s.subsatellite_point(t.epoch_s)))
                .fold(f64::INFINITY, f64::min);
            let chosen = p.central_angle(t.satellites[c.access[a]].subsatellite_point(t.epoch_s));
            prop_assert!(chosen <= best + 1e-12);
            prop_assert!(c.cell_members[c.access[a]].contains(&a));
        }
    }

    #[test]
    fn single_orbit_cells_are_even(n_sats in 1usize..40, half in 0usize..3) {
        // an odd count per cell keeps every air node off a cell boundary
        let per_sat = 2 * half + 1;
        let t = build_single_orbit(n_sats, 330.0, n_sats * per_sat, 1, LinkTable::reference()).unwrap();
        let c = compute_coverage(&t);
        prop_assert!(c.cell_members.iter().all(|m| m.len() == per_sat));
    }

    #[test]
    fn graph_partition_covers_with_bounded_diameter(
        planes in 2usize..7,
        per_plane in 4usize..17,
        n_geo in 1usize..5,
        seed in any::<u64>(),
    ) {
        let t = build_walker(planes, per_plane, 85.0, 550.0, 1, 1, LinkTable::reference()).unwrap();
        let g = derive_isl_graph(&t, t.epoch_s);
        let cov = compute_coverage(&t);
        let p = graph_partition(&g, &cov, n_geo, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let mut all: Vec<usize> = p.parts.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..g.n_nodes()).collect::<Vec<_>>());
        for part in &p.parts {
            prop_assert!(!part.is_empty());
            prop_assert!((induced_diameter_bfs(&g, part) as usize) < n_geo);
        }
        let mut air: Vec<usize> = p.air_parts.concat();
        air.sort_unstable();
        prop_assert_eq!(air, (0..t.n_air()).collect::<Vec<_>>());
    }

    #[test]
    fn matching_is_optimal(n in 1usize..7, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
        let perm = min_cost_matching(&cost).unwrap();
        let mut seen = perm.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        prop_assert!((matching_cost(&cost, &perm) - brute_force_min(&cost)).abs() < 1e-9);
    }

    #[test]
    fn clusters_cover_and_balance(
        (n_clusters, sizes) in (1usize..6).prop_flat_map(|n| (Just(n), prop::collection::vec(n..n + 5, 1..6))),
        seed in any::<u64>(),
    ) {
        let mut next = 0;
        let groups: Vec<Vec<usize>> = sizes
            .iter()
            .map(|&s| {
                let g: Vec<usize> = (next..next + s).collect();
                next += s;
                g
            })
            .collect();
        let cs = build_clusters(groups, n_clusters, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(cs.clusters.len(), n_clusters);
        let lens: Vec<usize> = cs.clusters.iter().map(Vec::len).collect();
        let (lo, hi) = (lens.iter().min().unwrap(), lens.iter().max().unwrap());
        prop_assert!(hi - lo <= 1);
        let mut all = cs.clusters.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..next).collect::<Vec<_>>());
    }

    #[test]
    fn class_distribution_is_normalised(labels in prop::collection::vec(0usize..10, 1..200)) {
        let d = ClassDistribution::from_labels(&labels, 10);
        prop_assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(d.probs.iter().all(|&p| p >= 0.0));
        prop_assert_eq!(d.sample_count, labels.len());
    }
}
