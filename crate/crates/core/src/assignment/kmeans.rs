//! Lloyd's k-means with farthest-point seeding.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{distance, Scalar};

pub const MAX_ITERATIONS: usize = 100;
pub const CENTER_TOLERANCE: f64 = 1e-6;

/// Cluster labels in `0..k` for every point.
///
/// The first center is drawn from `rng`; each further center is the point
/// farthest from the chosen ones (ties to the lowest index). Lloyd
/// iterations run until no center moves more than [`CENTER_TOLERANCE`] or
/// [`MAX_ITERATIONS`] is reached. A cluster left empty takes the point
/// farthest from its own center among clusters with more than one member.
pub fn kmeans<T: Scalar, R: Rng + ?Sized>(points: &[Vec<T>], k: usize, rng: &mut R) -> Result<Vec<usize>> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::config("kmeans.k", format!("k must lie in 1..={n}, got {k}")));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Input("k-means points have different dimensions".into()));
    }

    let mut centers = seed_centers(points, k, rng);
    let mut labels = vec![0usize; n];
    let tol = T::of(CENTER_TOLERANCE);
    for _ in 0..MAX_ITERATIONS {
        for (i, p) in points.iter().enumerate() {
            labels[i] = nearest_center(&centers, p);
        }
        repair_empty(points, &mut centers, &mut labels);

        let mut sums = vec![vec![T::zero(); dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, &x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut shift = T::zero();
        for c in 0..k {
            let cnt = T::of_usize(counts[c]);
            let next: Vec<T> = sums[c].iter().map(|&s| s / cnt).collect();
            shift = shift.max(distance(&next, &centers[c]));
            centers[c] = next;
        }
        if shift < tol {
            break;
        }
    }
    Ok(labels)
}

fn seed_centers<T: Scalar, R: Rng + ?Sized>(points: &[Vec<T>], k: usize, rng: &mut R) -> Vec<Vec<T>> {
    let n = points.len();
    let first = rng.random_range(0..n);
    let mut chosen = vec![false; n];
    chosen[first] = true;
    let mut centers = vec![points[first].clone()];
    let mut min_dist: Vec<T> = points.iter().map(|p| distance(p, &points[first])).collect();
    while centers.len() < k {
        let mut pick = usize::MAX;
        for i in 0..n {
            if !chosen[i] && (pick == usize::MAX || min_dist[i] > min_dist[pick]) {
                pick = i;
            }
        }
        chosen[pick] = true;
        centers.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            min_dist[i] = min_dist[i].min(distance(p, &points[pick]));
        }
    }
    centers
}

fn nearest_center<T: Scalar>(centers: &[Vec<T>], p: &[T]) -> usize {
    let mut best = 0;
    let mut best_d = distance(&centers[0], p);
    for (c, center) in centers.iter().enumerate().skip(1) {
        let d = distance(center, p);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn repair_empty<T: Scalar>(points: &[Vec<T>], centers: &mut [Vec<T>], labels: &mut [usize]) {
    let k = centers.len();
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let mut steal = usize::MAX;
        let mut steal_d = T::neg_infinity();
        for (i, p) in points.iter().enumerate() {
            if counts[labels[i]] < 2 {
                continue;
            }
            let d = distance(p, &centers[labels[i]]);
            if d > steal_d {
                steal = i;
                steal_d = d;
            }
        }
        counts[labels[steal]] -= 1;
        labels[steal] = empty;
        counts[empty] = 1;
        centers[empty] = points[steal].clone();
    }
}
