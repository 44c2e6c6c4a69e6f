use rand::Rng;

/// Air-node clusters of one part; cluster `c` is later matched to a satellite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSet {
    pub clusters: Vec<Vec<usize>>,
}

/// Fills `n_clusters` clusters by drawing, for each cluster in turn, one
/// member uniformly without replacement from every homogeneous group. An
/// exhausted group is substituted by the largest remaining group (lowest
/// index on ties). Members left over once every cluster has had its round are
/// dealt one per cluster in cluster order, so sizes differ by at most one.
pub fn build_clusters<R: Rng + ?Sized>(mut groups: Vec<Vec<usize>>, n_clusters: usize, rng: &mut R) -> ClusterSet {
    let mut clusters = vec![Vec::new(); n_clusters];
    let mut left: usize = groups.iter().map(Vec::len).sum();
    if n_clusters == 0 {
        return ClusterSet { clusters };
    }

    for cluster in clusters.iter_mut() {
        for g in 0..groups.len() {
            if left == 0 {
                break;
            }
            let src = if groups[g].is_empty() { largest(&groups) } else { g };
            cluster.push(draw(&mut groups[src], rng));
            left -= 1;
        }
    }
    let mut c = 0;
    while left > 0 {
        let src = largest(&groups);
        clusters[c].push(draw(&mut groups[src], rng));
        left -= 1;
        c = (c + 1) % n_clusters;
    }
    ClusterSet { clusters }
}

fn largest(groups: &[Vec<usize>]) -> usize {
    let mut best = 0;
    for (i, g) in groups.iter().enumerate() {
        if g.len() > groups[best].len() {
            best = i;
        }
    }
    best
}

fn draw<R: Rng + ?Sized>(group: &mut Vec<usize>, rng: &mut R) -> usize {
    let idx = rng.random_range(0..group.len());
    group.remove(idx)
}
