//! Adaptive moment estimation with global gradient-norm clipping.

use crate::tensorad::ParamStore;

#[derive(Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, clip_norm: f64, params: &ParamStore) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm,
            step: 0,
            m: params.params().iter().map(|p| vec![0.0; p.data.len()]).collect(),
            v: params.params().iter().map(|p| vec![0.0; p.data.len()]).collect(),
        }
    }

    pub fn update(&mut self, params: &mut ParamStore, grads: &[Vec<f64>]) {
        assert_eq!(grads.len(), params.len());
        let norm: f64 = grads
            .iter()
            .flat_map(|g| g.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt();
        let scale = if norm > self.clip_norm { self.clip_norm / norm } else { 1.0 };
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (pi, param) in params.params_mut().iter_mut().enumerate() {
            for (si, p) in param.data.iter_mut().enumerate() {
                let g = grads[pi][si] * scale;
                let m = &mut self.m[pi][si];
                let v = &mut self.v[pi][si];
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *p -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}
