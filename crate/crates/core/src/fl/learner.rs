//! Local learners: L2-regularized softmax regression and a one-hidden-layer
//! tanh network. Parameters live in one flat vector so they can be averaged
//! and synchronized as a [`ModelVector`](crate::allreduce::ModelVector).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerKind {
    #[default]
    Softmax,
    Mlp {
        hidden: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Learner {
    pub kind: LearnerKind,
    pub dim: usize,
    pub n_classes: usize,
    /// L2 penalty `lambda / 2 * |w|^2` on every parameter.
    pub lambda: f64,
}

impl Learner {
    pub fn softmax(dim: usize, n_classes: usize, lambda: f64) -> Self {
        Learner {
            kind: LearnerKind::Softmax,
            dim,
            n_classes,
            lambda,
        }
    }

    pub fn n_params(&self) -> usize {
        match self.kind {
            LearnerKind::Softmax => (self.dim + 1) * self.n_classes,
            LearnerKind::Mlp { hidden } => (self.dim + 1) * hidden + (hidden + 1) * self.n_classes,
        }
    }

    /// Convex objective, so the convergence diagnostics apply.
    pub fn is_convex(&self) -> bool {
        matches!(self.kind, LearnerKind::Softmax)
    }

    /// Forward plus backward FLOPs per sample, roughly `6 * params`.
    pub fn flops_per_sample(&self) -> f64 {
        6.0 * self.n_params() as f64
    }

    /// Zeros for softmax regression; scaled normal weights for the network.
    pub fn init<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        match self.kind {
            LearnerKind::Softmax => vec![T::zero(); self.n_params()],
            LearnerKind::Mlp { hidden } => {
                let mut p = vec![T::zero(); self.n_params()];
                let s1 = 1.0 / (self.dim as f64).sqrt();
                let s2 = 1.0 / (hidden as f64).sqrt();
                let (w1, rest) = p.split_at_mut(self.dim * hidden);
                for w in w1 {
                    let z: f64 = StandardNormal.sample(rng);
                    *w = T::of(z * s1);
                }
                let w2 = &mut rest[hidden..hidden + hidden * self.n_classes];
                for w in w2 {
                    let z: f64 = StandardNormal.sample(rng);
                    *w = T::of(z * s2);
                }
                p
            }
        }
    }

    /// Mean cross-entropy plus the L2 penalty. When `grad` is given it is
    /// overwritten with the gradient.
    pub fn loss_grad<T: Scalar>(&self, params: &[T], data: &Dataset<T>, grad: Option<&mut [T]>) -> T {
        debug_assert_eq!(params.len(), self.n_params());
        let lambda = T::of(self.lambda);
        let half = T::of(0.5);
        let mut loss = half * lambda * params.iter().map(|&w| w * w).sum::<T>();
        let mut grad = grad;
        if let Some(g) = grad.as_deref_mut() {
            for (gi, &w) in g.iter_mut().zip(params) {
                *gi = lambda * w;
            }
        }
        if data.is_empty() {
            return loss;
        }
        let inv_n = T::one() / T::of_usize(data.len());
        let mut probs = vec![T::zero(); self.n_classes];
        match self.kind {
            LearnerKind::Softmax => {
                for i in 0..data.len() {
                    let x = data.row(i);
                    let y = data.labels[i];
                    self.softmax_logits(params, x, &mut probs);
                    loss += inv_n * softmax_in_place(&mut probs, y);
                    if let Some(g) = grad.as_deref_mut() {
                        let c = self.n_classes;
                        for (k, &p) in probs.iter().enumerate() {
                            let err = (p - if k == y { T::one() } else { T::zero() }) * inv_n;
                            for (j, &xj) in x.iter().enumerate() {
                                g[j * c + k] += xj * err;
                            }
                            g[self.dim * c + k] += err;
                        }
                    }
                }
            }
            LearnerKind::Mlp { hidden } => {
                let mut h = vec![T::zero(); hidden];
                let mut dh = vec![T::zero(); hidden];
                let (d, c) = (self.dim, self.n_classes);
                let (w1, rest) = params.split_at(d * hidden);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(hidden * c);
                for i in 0..data.len() {
                    let x = data.row(i);
                    let y = data.labels[i];
                    for (u, hu) in h.iter_mut().enumerate() {
                        let mut a = b1[u];
                        for (j, &xj) in x.iter().enumerate() {
                            a += xj * w1[j * hidden + u];
                        }
                        *hu = a.tanh();
                    }
                    for (k, pk) in probs.iter_mut().enumerate() {
                        let mut a = b2[k];
                        for (u, &hu) in h.iter().enumerate() {
                            a += hu * w2[u * c + k];
                        }
                        *pk = a;
                    }
                    loss += inv_n * softmax_in_place(&mut probs, y);
                    if let Some(g) = grad.as_deref_mut() {
                        let (g1, grest) = g.split_at_mut(d * hidden);
                        let (gb1, grest) = grest.split_at_mut(hidden);
                        let (g2, gb2) = grest.split_at_mut(hidden * c);
                        for v in dh.iter_mut() {
                            *v = T::zero();
                        }
                        for (k, &p) in probs.iter().enumerate() {
                            let err = (p - if k == y { T::one() } else { T::zero() }) * inv_n;
                            gb2[k] += err;
                            for u in 0..hidden {
                                g2[u * c + k] += h[u] * err;
                                dh[u] += w2[u * c + k] * err;
                            }
                        }
                        for u in 0..hidden {
                            let da = dh[u] * (T::one() - h[u] * h[u]);
                            gb1[u] += da;
                            for (j, &xj) in x.iter().enumerate() {
                                g1[j * hidden + u] += xj * da;
                            }
                        }
                    }
                }
            }
        }
        loss
    }

    pub fn loss<T: Scalar>(&self, params: &[T], data: &Dataset<T>) -> T {
        self.loss_grad(params, data, None)
    }

    pub fn gradient<T: Scalar>(&self, params: &[T], data: &Dataset<T>) -> Vec<T> {
        let mut g = vec![T::zero(); params.len()];
        self.loss_grad(params, data, Some(&mut g));
        g
    }

    fn softmax_logits<T: Scalar>(&self, params: &[T], x: &[T], out: &mut [T]) {
        let c = self.n_classes;
        for (k, o) in out.iter_mut().enumerate() {
            let mut a = params[self.dim * c + k];
            for (j, &xj) in x.iter().enumerate() {
                a += xj * params[j * c + k];
            }
            *o = a;
        }
    }

    fn logits<T: Scalar>(&self, params: &[T], x: &[T], out: &mut [T]) {
        match self.kind {
            LearnerKind::Softmax => self.softmax_logits(params, x, out),
            LearnerKind::Mlp { hidden } => {
                let (d, c) = (self.dim, self.n_classes);
                let (w1, rest) = params.split_at(d * hidden);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(hidden * c);
                out.copy_from_slice(b2);
                for u in 0..hidden {
                    let mut a = b1[u];
                    for (j, &xj) in x.iter().enumerate() {
                        a += xj * w1[j * hidden + u];
                    }
                    let hu = a.tanh();
                    for (k, o) in out.iter_mut().enumerate() {
                        *o += hu * w2[u * c + k];
                    }
                }
            }
        }
    }

    /// Most likely class; ties go to the lowest label.
    pub fn predict<T: Scalar>(&self, params: &[T], x: &[T]) -> usize {
        let mut z = vec![T::zero(); self.n_classes];
        self.logits(params, x, &mut z);
        let mut best = 0;
        for k in 1..z.len() {
            if z[k] > z[best] {
                best = k;
            }
        }
        best
    }

    pub fn accuracy<T: Scalar>(&self, params: &[T], data: &Dataset<T>) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = (0..data.len())
            .filter(|&i| self.predict(params, data.row(i)) == data.labels[i])
            .count();
        hits as f64 / data.len() as f64
    }

    /// One gradient step `w -= eta * grad F(w)` on `data`, reusing `grad` as
    /// scratch. `round` only labels the error.
    pub fn step<T: Scalar>(&self, params: &mut [T], data: &Dataset<T>, eta: T, grad: &mut [T], round: usize) -> Result<()> {
        let loss = self.loss_grad(params, data, Some(grad));
        if !loss.is_finite() {
            return Err(Error::Training {
                round,
                reason: "non-finite loss".into(),
            });
        }
        for (w, &g) in params.iter_mut().zip(grad.iter()) {
            *w -= eta * g;
        }
        if params.iter().any(|w| !w.is_finite()) {
            return Err(Error::Training {
                round,
                reason: "non-finite parameters".into(),
            });
        }
        Ok(())
    }
}

/// Turns logits into probabilities and returns `-log p[y]`.
fn softmax_in_place<T: Scalar>(z: &mut [T], y: usize) -> T {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let log_p = (z[y] / sum).ln();
    for v in z.iter_mut() {
        *v /= sum;
    }
    -log_p
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> Dataset<f64> {
        let mut d = Dataset::empty(2);
        d.push(&[1.0, 0.5], 0);
        d.push(&[-0.3, 2.0], 1);
        d.push(&[0.2, -1.0], 2);
        d
    }

    fn finite_difference(l: &Learner, params: &[f64], data: &Dataset<f64>) -> f64 {
        let g = l.gradient(params, data);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..params.len() {
            let mut p = params.to_vec();
            p[i] += h;
            let up = l.loss(&p, data);
            p[i] -= 2.0 * h;
            let down = l.loss(&p, data);
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-3);
            worst = worst.max(rel);
        }
        worst
    }

    #[test]
    fn softmax_gradient_matches_finite_differences() {
        let l = Learner::softmax(2, 3, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p: Vec<f64> = (0..l.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        assert!(finite_difference(&l, &p, &toy()) < 1e-5);
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let l = Learner {
            kind: LearnerKind::Mlp { hidden: 4 },
            dim: 2,
            n_classes: 3,
            lambda: 0.01,
        };
        let p: Vec<f64> = l.init(&mut ChaCha8Rng::seed_from_u64(3));
        assert!(finite_difference(&l, &p, &toy()) < 1e-5);
    }

    #[test]
    fn zero_rate_keeps_state() {
        let l = Learner::softmax(2, 3, 0.0);
        let mut p = vec![0.3; l.n_params()];
        let before = p.clone();
        let mut g = vec![0.0; p.len()];
        l.step(&mut p, &toy(), 0.0, &mut g, 1).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn small_steps_descend() {
        let l = Learner::softmax(2, 3, 0.05);
        let d = toy();
        let mut p = vec![0.0; l.n_params()];
        let mut g = vec![0.0; p.len()];
        let mut prev = l.loss(&p, &d);
        for t in 0..50 {
            l.step(&mut p, &d, 0.1, &mut g, t).unwrap();
            let cur = l.loss(&p, &d);
            assert!(cur <= prev + 1e-15);
            prev = cur;
        }
        assert_eq!(l.accuracy(&p, &d), 1.0);
    }

    #[test]
    fn overflow_is_reported() {
        let l = Learner::softmax(2, 3, 0.0);
        let mut p = vec![0.0; l.n_params()];
        let mut g = vec![0.0; p.len()];
        let mut d = Dataset::empty(2);
        d.push(&[f64::MAX, 1.0], 0);
        d.push(&[-f64::MAX, 1.0], 1);
        let err = (0..5).try_for_each(|t| l.step(&mut p, &d, 1e300, &mut g, t));
        assert!(matches!(err, Err(Error::Training { .. })));
    }

    #[test]
    fn f32_learner() {
        let l = Learner::softmax(2, 3, 0.0);
        let mut d = Dataset::<f32>::empty(2);
        d.push(&[1.0, 0.0], 0);
        d.push(&[0.0, 1.0], 1);
        let mut p = vec![0.0f32; l.n_params()];
        let mut g = vec![0.0f32; p.len()];
        for t in 0..100 {
            l.step(&mut p, &d, 0.5, &mut g, t).unwrap();
        }
        assert_eq!(l.predict(&p, &[1.0, 0.0]), 0);
        assert_eq!(l.predict(&p, &[0.0, 1.0]), 1);
    }
}
