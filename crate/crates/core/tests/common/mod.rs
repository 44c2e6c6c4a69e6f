#![allow(dead_code)]

use sagin_core::config::ExperimentConfig;
use sagin_core::fl::data::Dataset;

/// Mean softmax cross-entropy gradient plus `lambda * w`, written out
/// directly. Layout: `(dim + 1) x classes`, row-major, bias row last.
pub fn softmax_gradient(w: &[f64], data: &Dataset<f64>, classes: usize, lambda: f64) -> Vec<f64> {
    let d = data.dim;
    let mut g = vec![0.0; w.len()];
    for i in 0..data.len() {
        let x = data.row(i);
        let logits: Vec<f64> = (0..classes)
            .map(|c| (0..d).map(|j| x[j] * w[j * classes + c]).sum::<f64>() + w[d * classes + c])
            .collect();
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|l| (l - top).exp()).sum();
        for c in 0..classes {
            let p = (logits[c] - top).exp() / z - if data.labels[i] == c { 1.0 } else { 0.0 };
            for j in 0..d {
                g[j * classes + c] += p * x[j];
            }
            g[d * classes + c] += p;
        }
    }
    let n = data.len() as f64;
    g.iter_mut().zip(w).for_each(|(gi, wi)| *gi = *gi / n + lambda * wi);
    g
}

pub fn descend(w0: &[f64], data: &Dataset<f64>, classes: usize, lambda: f64, eta: f64, steps: usize) -> Vec<Vec<f64>> {
    let mut w = w0.to_vec();
    let mut path = vec![w.clone()];
    for _ in 0..steps {
        let g = softmax_gradient(&w, data, classes, lambda);
        w.iter_mut().zip(&g).for_each(|(wi, gi)| *wi -= eta * gi);
        path.push(w.clone());
    }
    path
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// A small single-orbit run; `extra` is appended to the `[training]` block.
pub fn small_config(seed: u64, policy: &str, extra: &str) -> ExperimentConfig {
    let policy = match policy {
        "gdo" => "kind = \"gdo\"".to_owned(),
        "cdo" => "kind = \"cdo\"".to_owned(),
        p => format!("kind = \"cnasa\"\nn_geo = {}", p.trim_start_matches("cnasa-")),
    };
    ExperimentConfig::from_toml(&format!(
        r#"
seed = {seed}
[topology]
layout = "single_orbit"
n_sats = 4
n_air = 8
devices_per_air = 2
[data]
n_classes = 4
classes_per_device = 2
samples_per_device = 8
dim = 5
test_samples = 200
[training]
eta = 0.3
lambda = 0.01
tau1 = 2
tau2 = 3
global_rounds = 4
{extra}
[policy]
{policy}
"#
    ))
    .unwrap()
}
