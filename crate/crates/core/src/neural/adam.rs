/// Adam optimizer over a flat parameter vector, with global-norm gradient
/// clipping applied before the moment updates.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    clip_norm: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64, clip_norm: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    /// Applies one update in place. Returns the gradient's global norm
    /// after clipping.
    pub fn step(&mut self, params: &mut [f64], grad: &mut [f64]) -> f64 {
        assert_eq!(params.len(), grad.len());
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let applied_norm = if norm > self.clip_norm && norm > 0.0 {
            let scale = self.clip_norm / norm;
            for g in grad.iter_mut() {
                *g *= scale;
            }
            self.clip_norm
        } else {
            norm
        };
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        applied_norm
    }
}
