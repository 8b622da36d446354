//! Fully connected Q-network: ReLU hidden layers, linear output, batched
//! forward and backward passes in double precision.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    /// `(out_dim, in_dim)` row-major.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub relu: bool,
}

/// Multilayer perceptron holding the Q-network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub(crate) layers: Vec<Layer>,
}

/// Parameter gradients with the same shapes as the network.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub(crate) dw: Vec<Array2<f64>>,
    pub(crate) db: Vec<Array1<f64>>,
}

impl Mlp {
    /// He-initialized network; every hidden layer uses ReLU, the output is
    /// linear.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidParameter(
                "network needs at least input and output sizes".into(),
            ));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidParameter("zero-width layer".into()));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for k in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[k], sizes[k + 1]);
            let scale = (2.0 / fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((fan_out, fan_in), |_| {
                scale * normal_sample(rng)
            });
            layers.push(Layer {
                w,
                b: Array1::zeros(fan_out),
                relu: k + 1 < sizes.len() - 1,
            });
        }
        Ok(Self { layers })
    }

    /// The standard Q-network shape: two hidden layers of 64 units.
    pub fn q_network(obs_dim: usize, n_actions: usize, rng: &mut impl Rng) -> Result<Self> {
        Self::new(&[obs_dim, 64, 64, n_actions], rng)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].w.ncols()];
        sizes.extend(self.layers.iter().map(|l| l.w.nrows()));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").w.nrows()
    }

    /// Action values for one observation.
    pub fn forward(&self, obs: &[f64]) -> Result<Vec<f64>> {
        if obs.len() != self.input_dim() {
            return Err(Error::InvalidParameter(format!(
                "observation length {} does not match input dim {}",
                obs.len(),
                self.input_dim()
            )));
        }
        let mut x = Array1::from_iter(obs.iter().copied());
        for layer in &self.layers {
            let mut z = layer.w.dot(&x) + &layer.b;
            if layer.relu {
                z.mapv_inplace(|v| v.max(0.0));
            }
            x = z;
        }
        Ok(x.to_vec())
    }

    /// Batched forward pass returning post-activation values per layer
    /// (the last entry is the Q-value matrix, `batch x n_actions`).
    pub(crate) fn forward_batch(&self, x: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let mut z = cur.dot(&layer.w.t());
            z += &layer.b;
            if layer.relu {
                z.mapv_inplace(|v| v.max(0.0));
            }
            activations.push(z.clone());
            cur = z;
        }
        activations
    }

    /// Backpropagate `d_out` (gradient w.r.t. the network output) through the
    /// activations produced by `forward_batch` on input `x`.
    pub(crate) fn backward_batch(
        &self,
        x: &Array2<f64>,
        activations: &[Array2<f64>],
        d_out: Array2<f64>,
    ) -> Gradients {
        let n_layers = self.layers.len();
        let mut dw = Vec::with_capacity(n_layers);
        let mut db = Vec::with_capacity(n_layers);
        let mut d_cur = d_out;
        for idx in (0..n_layers).rev() {
            let layer = &self.layers[idx];
            if layer.relu {
                // post-activation > 0 marks the active units
                d_cur.zip_mut_with(&activations[idx], |d, &y| {
                    if y <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            let input: &Array2<f64> = if idx == 0 { x } else { &activations[idx - 1] };
            dw.push(d_cur.t().dot(input));
            db.push(d_cur.sum_axis(ndarray::Axis(0)));
            if idx > 0 {
                d_cur = d_cur.dot(&layer.w);
            }
        }
        dw.reverse();
        db.reverse();
        Gradients { dw, db }
    }

    /// Hard copy of all parameters from another network of the same shape.
    pub fn copy_from(&mut self, other: &Mlp) {
        debug_assert_eq!(self.sizes(), other.sizes());
        for (dst, src) in self.layers.iter_mut().zip(&other.layers) {
            dst.w.assign(&src.w);
            dst.b.assign(&src.b);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().all(|v| v.is_finite()) && l.b.iter().all(|v| v.is_finite()))
    }
}

impl Gradients {
    pub fn global_norm(&self) -> f64 {
        let mut sum = 0.0;
        for w in &self.dw {
            sum += w.iter().map(|v| v * v).sum::<f64>();
        }
        for b in &self.db {
            sum += b.iter().map(|v| v * v).sum::<f64>();
        }
        sum.sqrt()
    }

    /// Scale so the global norm does not exceed `max_norm`; returns the
    /// pre-clip norm.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let scale = max_norm / norm;
            for w in &mut self.dw {
                w.mapv_inplace(|v| v * scale);
            }
            for b in &mut self.db {
                b.mapv_inplace(|v| v * scale);
            }
        }
        norm
    }
}

/// Box-Muller standard normal draw.
fn normal_sample(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
