use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Mat, ParamSet, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam optimizer state: first/second moments per parameter plus the step
/// counter. Moments start at zero and are allocated on a parameter's first
/// gradient.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    step: u64,
    first_moment: BTreeMap<String, Mat>,
    second_moment: BTreeMap<String, Mat>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Result<Self> {
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = config;
        if !(learning_rate.is_finite() && learning_rate >= 0.0) {
            return Err(Error::Config(format!("learning rate {learning_rate}")));
        }
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(Error::Config(format!("betas ({beta1}, {beta2}) outside [0, 1)")));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon {epsilon}")));
        }
        Ok(AdamState {
            config,
            step: 0,
            first_moment: BTreeMap::new(),
            second_moment: BTreeMap::new(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn learning_rate(&self) -> f64 {
        self.config.learning_rate
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.config.learning_rate = lr;
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn first_moment(&self, name: &str) -> Option<&Mat> {
        self.first_moment.get(name)
    }

    pub fn second_moment(&self, name: &str) -> Option<&Mat> {
        self.second_moment.get(name)
    }

    /// One bias-corrected Adam update of every parameter named in `grads`.
    ///
    /// Gradients are validated before anything is touched, so on error both
    /// the parameters and the optimizer state are unchanged.
    pub fn step<P: ParamStore + ?Sized>(&mut self, params: &mut P, grads: &ParamSet) -> Result<()> {
        for (name, g) in grads.iter() {
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("gradient of {name}")));
            }
            let p = params
                .param_mut(name)
                .ok_or_else(|| Error::Shape(format!("gradient for unknown parameter {name:?}")))?;
            if p.shape() != g.shape() {
                return Err(Error::Shape(format!(
                    "gradient of {name} is {:?}, parameter is {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
        }

        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - b1.powi(t);
        let bias2 = 1.0 - b2.powi(t);

        for (name, g) in grads.iter() {
            let p = params.param_mut(name).expect("validated above");
            let m = self
                .first_moment
                .entry(name.to_string())
                .or_insert_with(|| Mat::zeros(g.rows(), g.cols()));
            let v = self
                .second_moment
                .entry(name.to_string())
                .or_insert_with(|| Mat::zeros(g.rows(), g.cols()));
            for (((p, m), v), &g) in p
                .as_mut_slice()
                .iter_mut()
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
                .zip(g.as_slice())
            {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar_set(name: &str, v: f64) -> ParamSet {
        let mut p = ParamSet::new();
        p.insert(name, Mat::scalar(v).unwrap()).unwrap();
        p
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut params = scalar_set("w", 1.0);
        let mut adam = AdamState::new(AdamConfig::default()).unwrap();
        adam.step(&mut params, &scalar_set("w", 2.0)).unwrap();
        let delta = params.get("w").unwrap().get(0, 0) - 1.0;
        let expected = -0.001 * 2.0 / (2.0 + 1e-8);
        assert!((delta - expected).abs() < 1e-15, "{delta} vs {expected}");
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = scalar_set("w", 0.7);
        let mut adam = AdamState::new(AdamConfig::default()).unwrap();
        adam.step(&mut params, &scalar_set("w", 0.0)).unwrap();
        assert_eq!(params.get("w").unwrap().get(0, 0), 0.7);
    }

    #[test]
    fn two_steps_match_unrolled_recurrence() {
        let (lr, b1, b2, eps): (f64, f64, f64, f64) = (0.01, 0.9, 0.999, 1e-8);
        let (g1, g2): (f64, f64) = (0.5, -1.5);
        // hand-unrolled
        let m1 = (1.0 - b1) * g1;
        let v1 = (1.0 - b2) * g1 * g1;
        let th1 = 1.0 - lr * (m1 / (1.0 - b1)) / ((v1 / (1.0 - b2)).sqrt() + eps);
        let m2 = b1 * m1 + (1.0 - b1) * g2;
        let v2 = b2 * v1 + (1.0 - b2) * g2 * g2;
        let th2 = th1
            - lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps);

        let mut params = scalar_set("w", 1.0);
        let mut adam = AdamState::new(AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        })
        .unwrap();
        adam.step(&mut params, &scalar_set("w", g1)).unwrap();
        adam.step(&mut params, &scalar_set("w", g2)).unwrap();
        assert!((params.get("w").unwrap().get(0, 0) - th2).abs() < 1e-12);
        assert_eq!(adam.step_count(), 2);
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_mutation() {
        let mut params = scalar_set("w", 1.0);
        let mut adam = AdamState::new(AdamConfig::default()).unwrap();
        let mut g = ParamSet::new();
        // bypass Mat's constructor check the way a broken backward pass would
        let mut m = Mat::zeros(1, 1);
        m.as_mut_slice()[0] = f64::NAN;
        g.insert("w", m).unwrap();
        assert!(matches!(adam.step(&mut params, &g), Err(Error::NonFinite(_))));
        assert_eq!(adam.step_count(), 0);
        assert_eq!(params.get("w").unwrap().get(0, 0), 1.0);
    }

    #[test]
    fn unknown_or_misshapen_gradient() {
        let mut params = scalar_set("w", 1.0);
        let mut adam = AdamState::new(AdamConfig::default()).unwrap();
        assert!(adam.step(&mut params, &scalar_set("x", 1.0)).is_err());
        let mut g = ParamSet::new();
        g.insert("w", Mat::zeros(2, 1)).unwrap();
        assert!(matches!(adam.step(&mut params, &g), Err(Error::Shape(_))));
    }

    proptest! {
        #[test]
        fn zero_learning_rate_is_identity(
            theta in prop::collection::vec(-10.0f64..10.0, 1..8),
            grads in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 8), 1..5),
        ) {
            let n = theta.len();
            let mut params = ParamSet::new();
            params.insert("w", Mat::from_vec(1, n, theta.clone()).unwrap()).unwrap();
            let mut adam = AdamState::new(AdamConfig { learning_rate: 0.0, ..Default::default() }).unwrap();
            for g in &grads {
                let mut gs = ParamSet::new();
                gs.insert("w", Mat::from_vec(1, n, g[..n].to_vec()).unwrap()).unwrap();
                adam.step(&mut params, &gs).unwrap();
            }
            prop_assert_eq!(params.get("w").unwrap().as_slice(), &theta[..]);
        }

        #[test]
        fn finite_in_finite_out(
            theta in prop::collection::vec(-1e6f64..1e6, 1..8),
            g in prop::collection::vec(-1e150f64..1e150, 8),
            lr in 0.0f64..10.0,
        ) {
            let n = theta.len();
            let mut params = ParamSet::new();
            params.insert("w", Mat::from_vec(1, n, theta).unwrap()).unwrap();
            let mut gs = ParamSet::new();
            gs.insert("w", Mat::from_vec(1, n, g[..n].to_vec()).unwrap()).unwrap();
            let mut adam = AdamState::new(AdamConfig { learning_rate: lr, ..Default::default() }).unwrap();
            for _ in 0..3 {
                adam.step(&mut params, &gs).unwrap();
            }
            prop_assert!(params.is_finite());
        }
    }
}
