//! Adam, global-norm clipping and a cosine schedule with warm restarts.

use crate::params::{ParamId, ParamStore};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug)]
pub struct Adam<S> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    moments: Vec<Option<(Vec<S>, Vec<S>)>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(n_params: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moments: vec![None; n_params],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update to the parameters that have gradients.
    pub fn update(&mut self, params: &mut ParamStore<S>, grads: &[(ParamId, Tensor<S>)], lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (S::of(self.beta1), S::of(self.beta2));
        let (ob1, ob2) = (S::of(1.0 - self.beta1), S::of(1.0 - self.beta2));
        let step = S::of(lr / c1);
        let rc2 = S::of(1.0 / c2.sqrt());
        let eps = S::of(self.eps);
        for (id, g) in grads {
            let len = g.len();
            let (m, v) = self.moments[id.index()].get_or_insert_with(|| (vec![S::zero(); len], vec![S::zero(); len]));
            let p = params.get_mut(*id).data_mut();
            for i in 0..len {
                let gi = g.data()[i];
                m[i] = b1 * m[i] + ob1 * gi;
                v[i] = b2 * v[i] + ob2 * gi * gi;
                p[i] -= step * m[i] / (v[i].sqrt() * rc2 + eps);
            }
        }
    }
}

/// Scales gradients so their joint L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_global_norm<S: Scalar>(grads: &mut [(ParamId, Tensor<S>)], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|(_, g)| g.sum_sq()).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = S::of(max_norm / norm);
        for (_, g) in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}

/// Cosine annealing from `base` to `base * floor` that restarts every `period` epochs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarmRestarts {
    pub base: f64,
    pub floor: f64,
    pub period: f64,
}

impl WarmRestarts {
    /// Restart period of half the stage, floor of one percent.
    pub fn for_stage(base: f64, epochs: usize) -> Self {
        Self {
            base,
            floor: 0.01,
            period: (epochs as f64 / 2.0).max(1.0),
        }
    }

    /// Learning rate at fractional epoch `t`.
    pub fn at(&self, t: f64) -> f64 {
        let phase = (t / self.period).fract();
        let lo = self.base * self.floor;
        lo + 0.5 * (self.base - lo) * (1.0 + (std::f64::consts::PI * phase).cos())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_restarts() {
        let s = WarmRestarts::for_stage(1e-3, 10);
        assert_eq!(s.at(0.0), 1e-3);
        assert!((s.at(2.5) - (1e-5 + 0.5 * (1e-3 - 1e-5))).abs() < 1e-15);
        assert_eq!(s.at(5.0), 1e-3);
        assert!(s.at(4.99) < 2e-5);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut store = ParamStore::<f64>::default();
        let id = store.insert("w".into(), Tensor::full([1, 1, 1, 3], 1.0));
        let mut opt = Adam::new(1);
        let g = Tensor::from_vec([1, 1, 1, 3], vec![0.5, -2.0, 0.0]);
        opt.update(&mut store, &[(id, g)], 0.1);
        let p = store.get(id).data();
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] - 1.1).abs() < 1e-6);
        assert_eq!(p[2], 1.0);
    }

    #[test]
    fn clipping_bounds_the_norm() {
        let id = ParamId(0);
        let mut g = vec![(id, Tensor::<f64>::from_vec([1, 1, 1, 2], vec![3.0, 4.0]))];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((g[0].1.data()[0] - 0.6).abs() < 1e-12);
    }
}
