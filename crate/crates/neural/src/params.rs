//! Parameter blocks, initialisation and the Adam optimiser.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

/// A named weight matrix. Biases are stored as `1 x n` matrices so every
/// block has the same shape type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: Array2<f64>,
}

impl Param {
    /// Glorot-uniform weights.
    pub fn glorot(name: impl Into<String>, rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
        Param {
            name: name.into(),
            value: Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng)),
        }
    }

    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Param {
            name: name.into(),
            value: Array2::zeros((rows, cols)),
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Anything that owns parameter blocks in a fixed order. Gradients are
/// returned as matrices in the same order.
pub trait Parameterized {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn n_parameters(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn zero_grads(&self) -> Vec<Array2<f64>> {
        self.params().iter().map(|p| Array2::zeros(p.value.raw_dim())).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    t: i32,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(model: &impl Parameterized, config: AdamConfig) -> Self {
        Adam {
            config,
            t: 0,
            m: model.zero_grads(),
            v: model.zero_grads(),
        }
    }

    pub fn step(&mut self, model: &mut impl Parameterized, grads: &[Array2<f64>]) {
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t);
        let bc2 = 1.0 - c.beta2.powi(self.t);
        for (((p, g), m), v) in model
            .params_mut()
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            ndarray::Zip::from(&mut p.value)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                    *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                    *w -= c.lr * (*m / bc1) / ((*v / bc2).sqrt() + c.eps);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Quad(Param);

    impl Parameterized for Quad {
        fn params(&self) -> Vec<&Param> {
            vec![&self.0]
        }
        fn params_mut(&mut self) -> Vec<&mut Param> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn adam_minimises_a_quadratic() {
        let mut q = Quad(Param::glorot("w", 3, 2, &mut ChaCha8Rng::seed_from_u64(1)));
        q.0.value += 2.0;
        let mut opt = Adam::new(&q, AdamConfig { lr: 0.05, ..Default::default() });
        for _ in 0..2000 {
            let g = q.0.value.clone() * 2.0;
            opt.step(&mut q, &[g]);
        }
        assert!(q.0.value.iter().all(|w| w.abs() < 1e-3));
    }

    #[test]
    fn glorot_within_limit() {
        let p = Param::glorot("w", 10, 30, &mut ChaCha8Rng::seed_from_u64(0));
        let limit = (6.0f64 / 40.0).sqrt();
        assert!(p.value.iter().all(|w| w.abs() <= limit));
        assert_eq!(p.len(), 300);
    }
}
