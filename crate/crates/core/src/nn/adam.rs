use super::network::{NetGradient, Network};
use crate::error::{Error, Result};

/// Adam with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self::with_hyper(len, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(len: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Internal(format!(
                "adam state holds {} moments but got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        let mut update = self.begin_step(lr);
        for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
            update.apply(i, p, g);
        }
        Ok(())
    }
}

impl AdamState {
    /// Same update as [`AdamState::step`], applied directly to the network.
    pub fn step_network(&mut self, net: &mut Network, grad: &NetGradient, lr: f64) -> Result<()> {
        if net.param_count() != self.m.len() {
            return Err(Error::Internal(format!(
                "adam state holds {} moments but the network has {} parameters",
                self.m.len(),
                net.param_count()
            )));
        }
        let mut update = self.begin_step(lr);
        let mut i = 0;
        net.update_with(grad, |p, g| {
            update.apply(i, p, g);
            i += 1;
        })
    }

    fn begin_step(&mut self, lr: f64) -> Update<'_> {
        self.step += 1;
        let t = self.step as i32;
        Update {
            bc1: 1.0 - self.beta1.powi(t),
            bc2: 1.0 - self.beta2.powi(t),
            b1: self.beta1,
            b2: self.beta2,
            eps: self.eps,
            lr,
            m: &mut self.m,
            v: &mut self.v,
        }
    }
}

struct Update<'a> {
    bc1: f64,
    bc2: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    lr: f64,
    m: &'a mut [f64],
    v: &'a mut [f64],
}

impl Update<'_> {
    fn apply(&mut self, i: usize, p: &mut f64, g: f64) {
        let m = &mut self.m[i];
        let v = &mut self.v[i];
        *m = self.b1 * *m + (1.0 - self.b1) * g;
        *v = self.b2 * *v + (1.0 - self.b2) * g * g;
        let m_hat = *m / self.bc1;
        let v_hat = *v / self.bc2;
        *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
    }
}
