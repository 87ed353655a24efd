//! First-order parameter updates.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
}

impl OptimizerConfig {
    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::adam(),
            learning_rate,
        }
    }

    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
        }
    }
}

/// Optimizer state for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    config: OptimizerConfig,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    steps: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, num_params: usize) -> Self {
        let moments = match config.kind {
            OptimizerKind::Sgd => 0,
            OptimizerKind::Adam { .. } => num_params,
        };
        Self {
            config,
            first_moment: vec![0.0; moments],
            second_moment: vec![0.0; moments],
            steps: 0,
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one descent step. A non-finite gradient is refused and leaves
    /// both the parameters and the optimizer state untouched.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != grad.len() {
            return Err(Error::Usage(format!(
                "gradient has {} entries, parameters {}",
                grad.len(),
                params.len()
            )));
        }
        if let Some(idx) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite gradient at parameter {idx}; update refused"
            )));
        }
        let lr = self.config.learning_rate;
        self.steps += 1;
        match self.config.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                if self.first_moment.len() != params.len() {
                    return Err(Error::Usage("optimizer sized for another network".into()));
                }
                let t = self.steps as i32;
                let bias1 = 1.0 - beta1.powi(t);
                let bias2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grad)
                    .zip(self.first_moment.iter_mut())
                    .zip(self.second_moment.iter_mut())
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / bias1;
                    let v_hat = *v / bias2;
                    *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("parameters became non-finite".into()));
        }
        Ok(())
    }
}

/// Rescales the concatenation of `grads` to at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm.is_finite() {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|x| *x *= scale);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_arithmetic() {
        let mut opt = Optimizer::new(OptimizerConfig::sgd(0.1), 1);
        let mut p = vec![1.0];
        opt.step(&mut p, &[2.0]).unwrap();
        assert!((p[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        for cfg in [OptimizerConfig::sgd(0.1), OptimizerConfig::adam(0.1)] {
            let mut opt = Optimizer::new(cfg, 3);
            let mut p = vec![1.0, -2.0, 3.0];
            opt.step(&mut p, &[0.0; 3]).unwrap();
            assert_eq!(p, vec![1.0, -2.0, 3.0]);
        }
    }

    #[test]
    fn nan_gradient_refused() {
        let mut opt = Optimizer::new(OptimizerConfig::adam(0.1), 2);
        let mut p = vec![1.0, 1.0];
        let before = opt.clone();
        assert!(matches!(
            opt.step(&mut p, &[f64::NAN, 0.0]),
            Err(Error::Numerical(_))
        ));
        assert_eq!(p, vec![1.0, 1.0]);
        assert_eq!(opt, before);
    }

    #[test]
    fn adam_moves_monotonically_against_constant_gradient() {
        // Direct simulation of the rule: with a constant gradient the
        // bias-corrected step is lr * g / (|g| + eps) every time.
        let lr = 1e-3;
        let mut opt = Optimizer::new(OptimizerConfig::adam(lr), 1);
        let mut p = vec![0.5];
        let mut prev = p[0];
        for _ in 0..100 {
            opt.step(&mut p, &[3.0]).unwrap();
            assert!(p[0] < prev);
            assert!((prev - p[0] - lr * 3.0 / (3.0 + 1e-8)).abs() < 1e-12);
            prev = p[0];
        }
    }

    #[test]
    fn clipping_scales_to_max_norm() {
        let mut a = vec![3.0, 0.0];
        let mut b = vec![4.0];
        let norm = clip_global_norm(&mut [&mut a, &mut b], 1.0);
        assert_eq!(norm, 5.0);
        assert!((a[0] - 0.6).abs() < 1e-15 && (b[0] - 0.8).abs() < 1e-15);
        let mut c = vec![0.1];
        clip_global_norm(&mut [&mut c], 1.0);
        assert_eq!(c, vec![0.1]);
    }
}
