//! RMSprop with per-element gradient clipping.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use super::NeuralError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Minimize (prior training).
    Descent,
    /// Maximize (agent fine-tuning).
    Ascent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    /// Raw gradients are clipped to `[-clip, clip]` before accumulation.
    pub clip: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig { learning_rate: 1e-3, decay: 0.9, epsilon: 1e-8, clip: 3.0 }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub config: RmsPropConfig,
    /// Running mean of squared (clipped) gradients, one per parameter block.
    pub accumulators: Vec<Array2<f64>>,
}

impl OptimizerState {
    pub fn new(params: &ModelParams, config: RmsPropConfig) -> Self {
        OptimizerState { config, accumulators: params.blocks().iter().map(|b| Array2::zeros(b.raw_dim())).collect() }
    }

    /// One RMSprop step: clip, accumulate, then move by `lr·g/√(acc+ε)`.
    pub fn update(&mut self, params: &mut ModelParams, grads: &ModelParams, direction: Direction) -> Result<(), NeuralError> {
        if grads.dims != params.dims || self.accumulators.len() != params.blocks().len() {
            return Err(NeuralError::ShapeMismatch("gradients do not match parameters".into()));
        }
        if !grads.is_finite() {
            return Err(NeuralError::NonFiniteGradient);
        }
        let RmsPropConfig { learning_rate, decay, epsilon, clip } = self.config;
        let sign = match direction {
            Direction::Descent => -1.0,
            Direction::Ascent => 1.0,
        };
        for ((p, g), acc) in params.blocks_mut().into_iter().zip(grads.blocks()).zip(&mut self.accumulators) {
            Zip::from(p).and(g).and(acc).for_each(|p, &g, a| {
                let g = g.clamp(-clip, clip);
                *a = decay * *a + (1.0 - decay) * g * g;
                *p += sign * learning_rate * g / (*a + epsilon).sqrt();
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::params::ModelDims;

    fn tiny() -> ModelParams {
        ModelParams::init(ModelDims { vocab_size: 5, embed_dim: 3, hidden_dim: 4, n_layers: 1 }, 1)
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = tiny();
        let before = p.clone();
        let mut opt = OptimizerState::new(&p, RmsPropConfig::default());
        let zero = ModelParams::zeros(p.dims);
        opt.update(&mut p, &zero, Direction::Descent).unwrap();
        assert!(p.bitwise_eq(&before));
    }

    #[test]
    fn large_gradients_are_clipped_before_accumulation() {
        let mut p = tiny();
        let mut g = ModelParams::zeros(p.dims);
        g.b_out[[0, 0]] = 10.0;
        let mut opt = OptimizerState::new(&p, RmsPropConfig::default());
        let before = p.b_out[[0, 0]];
        opt.update(&mut p, &g, Direction::Descent).unwrap();
        let acc = opt.accumulators.last().unwrap()[[0, 0]];
        assert!((acc - 0.1 * 9.0).abs() < 1e-12);
        let step = 1e-3 * 3.0 / (0.9f64 + 1e-8).sqrt();
        assert!((before - p.b_out[[0, 0]] - step).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = tiny();
        let mut g = ModelParams::zeros(p.dims);
        g.w_out[[0, 0]] = f64::NAN;
        let mut opt = OptimizerState::new(&p, RmsPropConfig::default());
        assert!(matches!(opt.update(&mut p, &g, Direction::Ascent), Err(NeuralError::NonFiniteGradient)));
    }

    #[test]
    fn quadratic_bowl_descends() {
        // loss = (x - 2)^2 on a single bias entry
        let mut p = tiny();
        p.b_out[[0, 1]] = 5.0;
        let loss = |p: &ModelParams| (p.b_out[[0, 1]] - 2.0).powi(2);
        let before = loss(&p);
        let mut g = ModelParams::zeros(p.dims);
        g.b_out[[0, 1]] = 2.0 * (p.b_out[[0, 1]] - 2.0);
        let mut opt = OptimizerState::new(&p, RmsPropConfig::default());
        opt.update(&mut p, &g, Direction::Descent).unwrap();
        assert!(loss(&p) < before);
        // ascent moves the other way
        let mut q = tiny();
        q.b_out[[0, 1]] = 5.0;
        let mut opt = OptimizerState::new(&q, RmsPropConfig::default());
        opt.update(&mut q, &g, Direction::Ascent).unwrap();
        assert!(loss(&q) > before);
    }
}
