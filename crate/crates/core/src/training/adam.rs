use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.epsilon.is_finite();
        if !ok {
            return Err(Error::Argument(format!("invalid Adam hyperparameters {self:?}")));
        }
        Ok(())
    }
}

/// Optimizer state: first/second moment buffers shaped like the parameters.
#[derive(Clone, Debug)]
pub struct AdamState {
    config: AdamConfig,
    t: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl AdamState {
    /// Moment buffers sized to match `shapes`.
    pub fn new(config: AdamConfig, shapes: &[(usize, usize)]) -> Result<Self> {
        config.validate()?;
        let m: Vec<Matrix> = shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect();
        Ok(AdamState { config, t: 0, v: m.clone(), m })
    }

    pub fn for_params(config: AdamConfig, params: &[&Matrix]) -> Result<Self> {
        let shapes: Vec<_> = params.iter().map(|p| p.shape()).collect();
        AdamState::new(config, &shapes)
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update of every parameter tensor from its gradient.
    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[&Matrix]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "{} params / {} grads for an optimizer tracking {} tensors",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for (idx, ((p, g), m)) in params.iter().zip(grads).zip(&self.m).enumerate() {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::Shape(format!(
                    "tensor {idx}: param {:?}, grad {:?}, moments {:?}",
                    p.shape(),
                    g.shape(),
                    m.shape()
                )));
            }
            g.ensure_finite(&format!("gradient of tensor {idx}"))?;
        }

        self.t += 1;
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        let t = self.t.min(i32::MAX as u64) as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let ps = p.as_mut_slice();
            let (ms, vs) = (m.as_mut_slice(), v.as_mut_slice());
            for (k, &gk) in g.as_slice().iter().enumerate() {
                ms[k] = beta1 * ms[k] + (1.0 - beta1) * gk;
                vs[k] = beta2 * vs[k] + (1.0 - beta2) * gk * gk;
                let m_hat = ms[k] / bc1;
                let v_hat = vs[k] / bc2;
                ps[k] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_vec(1, 1, vec![v]).unwrap()
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut rng = crate::numkit::Rng::new(1);
        let mut p = rng.uniform(-1.0, 1.0, 3, 4).unwrap();
        let before = p.clone();
        let g = Matrix::zeros(3, 4);
        let mut adam = AdamState::for_params(AdamConfig::default(), &[&p]).unwrap();
        for _ in 0..25 {
            adam.step(&mut [&mut p], &[&g]).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(adam.steps(), 25);
    }

    #[test]
    fn first_step_closed_form() {
        let mut theta = scalar(1.0);
        let g = scalar(1.0);
        let mut adam = AdamState::for_params(AdamConfig::default(), &[&theta]).unwrap();
        adam.step(&mut [&mut theta], &[&g]).unwrap();
        // m_hat = v_hat = 1 at t = 1
        let want = 1.0 - 0.001 * 1.0 / (1.0 + 1e-8);
        assert!((theta.get(0, 0) - want).abs() < 1e-12);
    }

    #[test]
    fn quadratic_decreases_every_step() {
        let mut theta = scalar(1.0);
        let mut adam = AdamState::for_params(AdamConfig::default(), &[&theta]).unwrap();
        let mut prev = 1.0;
        for _ in 0..10 {
            let g = scalar(2.0 * theta.get(0, 0));
            adam.step(&mut [&mut theta], &[&g]).unwrap();
            let f = theta.get(0, 0).powi(2);
            assert!(f < prev);
            prev = f;
        }
    }

    #[test]
    fn shape_and_finiteness_errors() {
        let mut p = Matrix::zeros(2, 2);
        let mut adam = AdamState::for_params(AdamConfig::default(), &[&p]).unwrap();
        let wrong = Matrix::zeros(2, 1);
        assert!(matches!(adam.step(&mut [&mut p], &[&wrong]), Err(Error::Shape(_))));
        let mut bad = Matrix::zeros(2, 2);
        bad.as_mut_slice()[3] = f64::INFINITY;
        assert!(matches!(adam.step(&mut [&mut p], &[&bad]), Err(Error::Numeric(_))));
        assert_eq!(adam.steps(), 0);
    }

    #[test]
    fn invalid_hyperparameters() {
        let bad = AdamConfig { beta1: 1.0, ..AdamConfig::default() };
        assert!(AdamState::new(bad, &[(1, 1)]).is_err());
        let bad = AdamConfig { learning_rate: 0.0, ..AdamConfig::default() };
        assert!(AdamState::new(bad, &[(1, 1)]).is_err());
    }
}
