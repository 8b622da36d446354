//! Adam optimizer state mirroring the network parameter shapes.

use ndarray::{Array1, Array2};

use super::mlp::{Gradients, Mlp};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub(crate) m_w: Vec<Array2<f64>>,
    pub(crate) m_b: Vec<Array1<f64>>,
    pub(crate) v_w: Vec<Array2<f64>>,
    pub(crate) v_b: Vec<Array1<f64>>,
    pub(crate) step: u64,
}

impl AdamState {
    pub fn new(net: &Mlp) -> Self {
        let m_w = net.layers.iter().map(|l| Array2::zeros(l.w.dim())).collect();
        let m_b = net.layers.iter().map(|l| Array1::zeros(l.b.len())).collect();
        let v_w = net.layers.iter().map(|l| Array2::zeros(l.w.dim())).collect();
        let v_b = net.layers.iter().map(|l| Array1::zeros(l.b.len())).collect();
        Self {
            m_w,
            m_b,
            v_w,
            v_b,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update with bias correction.
    pub fn update(&mut self, net: &mut Mlp, grads: &Gradients, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step as i32);
        let c2 = 1.0 - BETA2.powi(self.step as i32);
        for (idx, layer) in net.layers.iter_mut().enumerate() {
            let gw = &grads.dw[idx];
            let gb = &grads.db[idx];
            self.m_w[idx].zip_mut_with(gw, |m, &g| *m = BETA1 * *m + (1.0 - BETA1) * g);
            self.v_w[idx].zip_mut_with(gw, |v, &g| *v = BETA2 * *v + (1.0 - BETA2) * g * g);
            self.m_b[idx].zip_mut_with(gb, |m, &g| *m = BETA1 * *m + (1.0 - BETA1) * g);
            self.v_b[idx].zip_mut_with(gb, |v, &g| *v = BETA2 * *v + (1.0 - BETA2) * g * g);

            let (m_w, v_w) = (&self.m_w[idx], &self.v_w[idx]);
            ndarray::Zip::from(&mut layer.w)
                .and(m_w)
                .and(v_w)
                .for_each(|w, &m, &v| {
                    *w -= lr * (m / c1) / ((v / c2).sqrt() + EPS);
                });
            let (m_b, v_b) = (&self.m_b[idx], &self.v_b[idx]);
            ndarray::Zip::from(&mut layer.b)
                .and(m_b)
                .and(v_b)
                .for_each(|b, &m, &v| {
                    *b -= lr * (m / c1) / ((v / c2).sqrt() + EPS);
                });
        }
    }
}
