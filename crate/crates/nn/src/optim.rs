//! SGD with momentum and the step learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::array::ParamStore;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            lr: 0.01,
            momentum: 0.5,
            weight_decay: 5e-4,
        }
    }
}

/// Heavy-ball SGD: `g += wd * p; v = mu * v + g; p -= lr * v`.
///
/// Weight decay applies to model parameters only. The offset matrix has its
/// own velocity and no decay.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd<T> {
    pub config: SgdConfig,
    velocity: Vec<Vec<T>>,
    offset_velocity: Vec<f64>,
}

impl<T: Real> Sgd<T> {
    pub fn new(config: SgdConfig, params: &ParamStore<T>, offset_len: usize) -> Self {
        Sgd {
            config,
            velocity: params
                .iter()
                .map(|(_, a)| vec![T::zero(); a.len()])
                .collect(),
            offset_velocity: vec![0.0; offset_len],
        }
    }

    pub fn from_state(config: SgdConfig, velocity: Vec<Vec<T>>, offset_velocity: Vec<f64>) -> Self {
        Sgd {
            config,
            velocity,
            offset_velocity,
        }
    }

    pub fn velocity(&self) -> &[Vec<T>] {
        &self.velocity
    }

    pub fn offset_velocity(&self) -> &[f64] {
        &self.offset_velocity
    }

    /// Applies one update using the gradients stored in `params`.
    pub fn step(&mut self, params: &mut ParamStore<T>, lr: f64) {
        let lr = T::from_f64(lr);
        let mu = T::from_f64(self.config.momentum);
        let wd = T::from_f64(self.config.weight_decay);
        for ((_, array), vel) in params.iter_mut().zip(&mut self.velocity) {
            let Some(_) = array.grad() else { continue };
            let (values, grad) = array.split_mut();
            let values: &[T] = values;
            let updates: Vec<T> = values
                .iter()
                .zip(grad.iter())
                .zip(vel.iter_mut())
                .map(|((&p, &g), v)| {
                    *v = mu * *v + g + wd * p;
                    p - lr * *v
                })
                .collect();
            array.values_mut().copy_from_slice(&updates);
        }
    }

    pub fn step_offset(&mut self, entries: &mut [f64], grad: &[f64], lr: f64) {
        let mu = self.config.momentum;
        for ((p, &g), v) in entries.iter_mut().zip(grad).zip(&mut self.offset_velocity) {
            *v = mu * *v + g;
            *p -= lr * *v;
        }
    }
}

/// Learning rate for `epoch` under the tenfold drops at 15/30 and 25/30 of
/// `total_epochs`.
pub fn lr_schedule(epoch: usize, base_lr: f64, total_epochs: usize) -> f64 {
    let scaled = |mark: usize| (mark * total_epochs) as f64 / 30.0;
    let e = epoch as f64;
    if e < scaled(15) {
        base_lr
    } else if e < scaled(25) {
        base_lr / 10.0
    } else {
        base_lr / 100.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        assert_eq!(lr_schedule(0, 0.01, 30), 0.01);
        assert_eq!(lr_schedule(14, 0.01, 30), 0.01);
        assert_eq!(lr_schedule(15, 0.01, 30), 0.001);
        assert_eq!(lr_schedule(24, 0.01, 30), 0.001);
        assert_eq!(lr_schedule(29, 0.01, 30), 0.0001);
    }

    #[test]
    fn schedule_scales_with_run_length() {
        assert_eq!(lr_schedule(4, 1.0, 10), 1.0);
        assert_eq!(lr_schedule(5, 1.0, 10), 0.1);
        assert_eq!(lr_schedule(8, 1.0, 10), 0.1);
        assert_eq!(lr_schedule(9, 1.0, 10), 0.01);
    }
}
