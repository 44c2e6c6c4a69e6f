//! Data-size-weighted model averaging on air nodes and satellites.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Model parameters tagged with the number of samples behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct Weighted<T> {
    pub params: Vec<T>,
    pub samples: usize,
}

/// `sum_i n_i w_i / sum_i n_i`.
pub fn weighted_average<T: Scalar>(models: &[(&[T], usize)]) -> Result<Weighted<T>> {
    let (first, _) = models
        .first()
        .ok_or_else(|| Error::Input("nothing to aggregate".into()))?;
    let m = first.len();
    if models.iter().any(|(p, _)| p.len() != m) {
        return Err(Error::Input("models have different lengths".into()));
    }
    let total: usize = models.iter().map(|&(_, n)| n).sum();
    if total == 0 {
        return Err(Error::Input("total data size is zero".into()));
    }
    let inv = T::one() / T::of_usize(total);
    let mut out = vec![T::zero(); m];
    for &(p, n) in models {
        let w = T::of_usize(n) * inv;
        for (o, &x) in out.iter_mut().zip(p) {
            *o += w * x;
        }
    }
    Ok(Weighted {
        params: out,
        samples: total,
    })
}

/// Satellite aggregation of device models.
///
/// With `air_groups` every group (indices into `models`) is first averaged on
/// its air node and the air models are then averaged on the satellite;
/// otherwise all device models are averaged at once. Both give the same
/// model up to rounding.
pub fn satellite_aggregate<T: Scalar>(models: &[Weighted<T>], air_groups: Option<&[Vec<usize>]>) -> Result<Weighted<T>> {
    match air_groups {
        None => {
            let refs: Vec<(&[T], usize)> = models.iter().map(|m| (m.params.as_slice(), m.samples)).collect();
            weighted_average(&refs)
        }
        Some(groups) => {
            let mut air = Vec::with_capacity(groups.len());
            for g in groups.iter().filter(|g| !g.is_empty()) {
                let refs: Vec<(&[T], usize)> = g
                    .iter()
                    .map(|&i| (models[i].params.as_slice(), models[i].samples))
                    .collect();
                let a = weighted_average(&refs)?;
                if a.samples > 0 {
                    air.push(a);
                }
            }
            let refs: Vec<(&[T], usize)> = air.iter().map(|m| (m.params.as_slice(), m.samples)).collect();
            weighted_average(&refs)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weighted(p: Vec<f64>, n: usize) -> Weighted<f64> {
        Weighted { params: p, samples: n }
    }

    #[test]
    fn equal_sizes_give_mean() {
        let m = [weighted(vec![1.0, 2.0], 5), weighted(vec![3.0, 6.0], 5)];
        assert_eq!(satellite_aggregate(&m, None).unwrap().params, vec![2.0, 4.0]);
    }

    #[test]
    fn single_device_identity() {
        let m = [weighted(vec![1.5, -2.0], 7)];
        let out = satellite_aggregate(&m, None).unwrap();
        assert_eq!(out.params, m[0].params);
        assert_eq!(out.samples, 7);
    }

    #[test]
    fn air_first_matches_flat() {
        let m: Vec<Weighted<f64>> = (0..6)
            .map(|i| weighted(vec![i as f64 * 0.37, 1.0 / (i as f64 + 1.0)], i + 1))
            .collect();
        let groups = vec![vec![0, 1], vec![2], vec![3, 4, 5]];
        let flat = satellite_aggregate(&m, None).unwrap();
        let two = satellite_aggregate(&m, Some(&groups)).unwrap();
        for (a, b) in flat.params.iter().zip(&two.params) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(flat.samples, two.samples);
    }

    #[test]
    fn zero_data_rejected() {
        let m = [weighted(vec![1.0], 0)];
        assert!(satellite_aggregate(&m, None).is_err());
        assert!(satellite_aggregate::<f64>(&[], None).is_err());
    }
}
