//! Synthetic labelled data with geographically correlated label skew.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::assignment::ClassDistribution;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major feature matrix with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub features: Vec<T>,
    pub labels: Vec<usize>,
    pub dim: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn empty(dim: usize) -> Self {
        Dataset {
            features: Vec::new(),
            labels: Vec::new(),
            dim,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, x: &[T], y: usize) {
        debug_assert_eq!(x.len(), self.dim);
        self.features.extend_from_slice(x);
        self.labels.push(y);
    }

    /// Concatenation of several datasets, in order.
    pub fn pooled<'a>(parts: impl IntoIterator<Item = &'a Dataset<T>>, dim: usize) -> Self {
        let mut out = Dataset::empty(dim);
        for p in parts {
            out.features.extend_from_slice(&p.features);
            out.labels.extend_from_slice(&p.labels);
        }
        out
    }

    /// Rows at `idx`, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut out = Dataset::empty(self.dim);
        for &i in idx {
            out.push(self.row(i), self.labels[i]);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceDataset<T> {
    pub owner: usize,
    pub data: Dataset<T>,
    pub class_dist: ClassDistribution,
}

/// Placement of the class means.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanLayout {
    /// Isotropic Gaussian draws with expected norm `separation`.
    #[default]
    Random,
    /// `separation * e_c`; needs `dim >= n_classes`.
    Orthogonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub n_classes: usize,
    /// Labels present on every device; `n_classes` means IID devices.
    pub classes_per_device: usize,
    pub samples_per_device: usize,
    pub dim: usize,
    /// Scale of the class means.
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default)]
    pub means: MeanLayout,
    /// Longitude width of a label region; neighbouring regions shift the
    /// label set by one.
    #[serde(default)]
    pub region_deg: Option<f64>,
    #[serde(default = "default_test_samples")]
    pub test_samples: usize,
}

fn default_separation() -> f64 {
    3.0
}

fn default_test_samples() -> usize {
    2000
}

impl DataConfig {
    pub fn region_width(&self) -> f64 {
        self.region_deg.unwrap_or(360.0 / self.n_classes as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::config("data.n_classes", "need at least 2 classes"));
        }
        if self.classes_per_device == 0 || self.classes_per_device > self.n_classes {
            return Err(Error::config(
                "data.classes_per_device",
                format!("must lie in 1..={}", self.n_classes),
            ));
        }
        if self.samples_per_device < self.classes_per_device {
            return Err(Error::config(
                "data.samples_per_device",
                "every device needs at least one sample per class",
            ));
        }
        if self.dim == 0 {
            return Err(Error::config("data.dim", "must be at least 1"));
        }
        if self.means == MeanLayout::Orthogonal && self.dim < self.n_classes {
            return Err(Error::config("data.dim", "orthogonal means need dim >= n_classes"));
        }
        if !(self.separation.is_finite() && self.separation > 0.0) {
            return Err(Error::config("data.separation", "must be positive"));
        }
        let w = self.region_width();
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::config("data.region_deg", "must be positive"));
        }
        if self.test_samples == 0 {
            return Err(Error::config("data.test_samples", "must be at least 1"));
        }
        Ok(())
    }
}

/// Label set of a device at `longitude_deg`: `classes_per_device`
/// consecutive labels (mod `n_classes`) starting at the region index.
pub fn device_classes(cfg: &DataConfig, longitude_deg: f64) -> Vec<usize> {
    let region = ((longitude_deg + 180.0) / cfg.region_width()).floor() as i64;
    let first = region.rem_euclid(cfg.n_classes as i64) as usize;
    (0..cfg.classes_per_device)
        .map(|j| (first + j) % cfg.n_classes)
        .collect()
}

fn sample<T: Scalar, R: Rng + ?Sized>(means: &[Vec<f64>], class: usize, rng: &mut R, out: &mut Vec<T>) {
    for &m in &means[class] {
        let z: f64 = StandardNormal.sample(rng);
        out.push(T::of(m + z));
    }
}

/// One mean per class, drawn before any sample.
pub fn class_means<R: Rng + ?Sized>(cfg: &DataConfig, rng: &mut R) -> Vec<Vec<f64>> {
    let scale = cfg.separation / (cfg.dim as f64).sqrt();
    (0..cfg.n_classes)
        .map(|c| match cfg.means {
            MeanLayout::Random => (0..cfg.dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    scale * z
                })
                .collect(),
            MeanLayout::Orthogonal => (0..cfg.dim)
                .map(|j| if j == c { cfg.separation } else { 0.0 })
                .collect(),
        })
        .collect()
}

/// Per-device datasets for devices at `longitudes` plus one IID test set.
///
/// Class `c` is a unit-covariance Gaussian around its mean. Every device splits its samples as evenly as possible over its label set.
pub fn generate_data<T: Scalar, R: Rng + ?Sized>(
    cfg: &DataConfig,
    longitudes: &[f64],
    rng: &mut R,
) -> Result<(Vec<DeviceDataset<T>>, Dataset<T>)> {
    cfg.validate()?;
    if longitudes.is_empty() {
        return Err(Error::config("topology", "no devices to hold data"));
    }
    let means = class_means(cfg, rng);
    let mut devices = Vec::with_capacity(longitudes.len());
    for (owner, &lon) in longitudes.iter().enumerate() {
        let classes = device_classes(cfg, lon);
        let mut data = Dataset::empty(cfg.dim);
        let mut row = Vec::with_capacity(cfg.dim);
        for i in 0..cfg.samples_per_device {
            let c = classes[i % classes.len()];
            row.clear();
            sample(&means, c, rng, &mut row);
            data.push(&row, c);
        }
        let class_dist = ClassDistribution::from_labels(&data.labels, cfg.n_classes);
        devices.push(DeviceDataset {
            owner,
            data,
            class_dist,
        });
    }
    let mut test = Dataset::empty(cfg.dim);
    let mut row = Vec::with_capacity(cfg.dim);
    for i in 0..cfg.test_samples {
        let c = i % cfg.n_classes;
        row.clear();
        sample(&means, c, rng, &mut row);
        test.push(&row, c);
    }
    Ok((devices, test))
}
