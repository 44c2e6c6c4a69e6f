//! Minimum-cost perfect matching on a square cost matrix.
//!
//! Shortest augmenting paths with row/column dual variables, in the
//! Jonker-Volgenant family without the initialization heuristics. One
//! Dijkstra-like search per row; `O(n^3)` overall. Columns are scanned in an
//! order that makes a constant matrix resolve to the identity permutation.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Returns `perm` with row `i` matched to column `perm[i]`, minimizing the
/// total cost.
pub fn min_cost_matching<T: Scalar>(cost: &[Vec<T>]) -> Result<Vec<usize>> {
    let n = cost.len();
    for (i, row) in cost.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Input(format!(
                "cost matrix must be square: row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|c| !c.is_finite()) {
            return Err(Error::Input(format!("non-finite cost at ({i}, {j})")));
        }
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    let inf = T::infinity();
    let mut u = vec![T::zero(); n];
    let mut v = vec![T::zero(); n];
    let mut col4row: Vec<Option<usize>> = vec![None; n];
    let mut row4col: Vec<Option<usize>> = vec![None; n];
    let mut path = vec![0usize; n];
    let mut shortest = vec![inf; n];
    let mut seen_row = vec![false; n];
    let mut seen_col = vec![false; n];
    let mut remaining = vec![0usize; n];

    for cur_row in 0..n {
        // shortest augmenting path from cur_row to a free column
        for (it, r) in remaining.iter_mut().enumerate() {
            *r = n - it - 1;
        }
        let mut n_remaining = n;
        seen_row.iter_mut().for_each(|x| *x = false);
        seen_col.iter_mut().for_each(|x| *x = false);
        shortest.iter_mut().for_each(|x| *x = inf);

        let mut min_val = T::zero();
        let mut i = cur_row;
        let sink = loop {
            seen_row[i] = true;
            let mut lowest = inf;
            let mut index = usize::MAX;
            for (it, &j) in remaining[..n_remaining].iter().enumerate() {
                let r = min_val + cost[i][j] - u[i] - v[j];
                if r < shortest[j] {
                    path[j] = i;
                    shortest[j] = r;
                }
                if shortest[j] < lowest || (shortest[j] == lowest && row4col[j].is_none()) {
                    lowest = shortest[j];
                    index = it;
                }
            }
            min_val = lowest;
            if index == usize::MAX {
                return Err(Error::Input("no feasible assignment".into()));
            }
            let j = remaining[index];
            seen_col[j] = true;
            n_remaining -= 1;
            remaining[index] = remaining[n_remaining];
            match row4col[j] {
                None => break j,
                Some(r) => i = r,
            }
        };

        // dual update
        u[cur_row] += min_val;
        for r in 0..n {
            if seen_row[r] && r != cur_row {
                let c = col4row[r].expect("visited rows are matched");
                u[r] += min_val - shortest[c];
            }
        }
        for c in 0..n {
            if seen_col[c] {
                v[c] -= min_val - shortest[c];
            }
        }

        // augment along the path
        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = Some(r);
            let prev = col4row[r].replace(j);
            if r == cur_row {
                break;
            }
            j = prev.expect("interior path rows are matched");
        }
    }

    Ok(col4row.into_iter().map(|c| c.expect("every row matched")).collect())
}

/// Total cost of a permutation.
pub fn matching_cost<T: Scalar>(cost: &[Vec<T>], perm: &[usize]) -> T {
    perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
            if prefix.len() == used.len() {
                out.push(prefix.clone());
                return;
            }
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    prefix.push(j);
                    rec(prefix, used, out);
                    prefix.pop();
                    used[j] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut vec![false; n], &mut out);
        out
    }

    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        permutations(cost.len())
            .iter()
            .map(|p| matching_cost(cost, p))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn two_by_two() {
        let cost = vec![vec![1.0, 2.0], vec![3.0, 1.0]];
        let p = min_cost_matching(&cost).unwrap();
        assert_eq!(p, vec![0, 1]);
        assert_eq!(matching_cost(&cost, &p), 2.0);
    }

    #[test]
    fn zero_matrix_is_identity() {
        for n in 1..7 {
            let cost = vec![vec![0.0f64; n]; n];
            assert_eq!(min_cost_matching(&cost).unwrap(), (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn five_by_five_matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let cost: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..5).map(|_| rng.random_range(0.0..10.0)).collect())
                .collect();
            let p = min_cost_matching(&cost).unwrap();
            assert!((matching_cost(&cost, &p) - brute_force(&cost)).abs() < 1e-9);
        }
    }

    #[test]
    fn integer_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=6 {
            for _ in 0..30 {
                let cost: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..n).map(|_| rng.random_range(0..3) as f64).collect())
                    .collect();
                let p = min_cost_matching(&cost).unwrap();
                assert_eq!(matching_cost(&cost, &p), brute_force(&cost));
            }
        }
    }

    #[test]
    fn works_in_f32() {
        let cost = vec![vec![4.0f32, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let p = min_cost_matching(&cost).unwrap();
        assert_eq!(matching_cost(&cost, &p), 5.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(min_cost_matching(&[vec![1.0, f64::NAN], vec![0.0, 0.0]]).is_err());
        assert!(min_cost_matching(&[vec![1.0, f64::INFINITY], vec![0.0, 0.0]]).is_err());
        assert!(min_cost_matching(&[vec![1.0, 2.0]]).is_err());
        assert_eq!(min_cost_matching::<f64>(&[]).unwrap(), Vec::<usize>::new());
    }
}
