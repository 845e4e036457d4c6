//! AdamW with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamWConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamWConfig {
            lr,
            beta1: 0.5,
            beta2: 0.9,
            eps: 1e-8,
            weight_decay,
        }
    }
}

/// Optimizer state for one parameter list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub config: AdamWConfig,
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamW {
    pub fn new(config: AdamWConfig, params: &[Tensor]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        AdamW {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One update. A `None` gradient leaves the moments decaying and still
    /// applies weight decay, as a zero gradient would.
    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Tensor>, grads: &[Option<Tensor>]) {
        let mut params: Vec<&mut Tensor> = params.into_iter().collect();
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        assert_eq!(params.len(), grads.len(), "one gradient slot per parameter");
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let decay = 1.0 - c.lr * c.weight_decay;
            let (pd, md, vd) = (p.data_mut(), m.data_mut(), v.data_mut());
            for i in 0..pd.len() {
                let gi = g.as_ref().map_or(0.0, |g| g.data()[i]);
                md[i] = c.beta1 * md[i] + (1.0 - c.beta1) * gi;
                vd[i] = c.beta2 * vd[i] + (1.0 - c.beta2) * gi * gi;
                let m_hat = md[i] / bc1;
                let v_hat = vd[i] / bc2;
                pd[i] = pd[i] * decay - c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
        }
    }
}
