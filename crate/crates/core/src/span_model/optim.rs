use super::ClassifierParams;
use crate::error::{Error, Result};

/// Adam with decoupled weight decay:
///
/// ```text
/// m ← β1·m + (1-β1)·g          v ← β2·v + (1-β2)·g²
/// m̂ = m / (1-β1^t)             v̂ = v / (1-β2^t)
/// θ ← θ - lr·( m̂ / (√v̂ + ε) + λ·θ )
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    step: u64,
    first: Option<ClassifierParams>,
    second: Option<ClassifierParams>,
}

impl AdamW {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay,
            step: 0,
            first: None,
            second: None,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut ClassifierParams, grad: &ClassifierParams) -> Result<()> {
        for ((name, p), (_, g)) in params.tensors().iter().zip(grad.tensors().iter()) {
            if p.len() != g.len() {
                return Err(Error::Shape(format!("gradient for {name} has {} entries, expected {}", g.len(), p.len())));
            }
            if let Some((index, &value)) = g.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    tensor: name,
                    index,
                    value,
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps, wd) = (self.beta1, self.beta2, self.learning_rate, self.epsilon, self.weight_decay);
        let first = self.first.get_or_insert_with(|| params.zeros_like());
        let second = self.second.get_or_insert_with(|| params.zeros_like());

        let p_t = params.tensors_mut();
        let g_t = grad.tensors();
        let m_t = first.tensors_mut();
        let v_t = second.tensors_mut();
        for (((p, g), m), v) in p_t.into_iter().zip(g_t).zip(m_t).zip(v_t) {
            let (p, g, m, v) = (p.1, g.1, m.1, v.1);
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                let m_hat = m[k] / bias1;
                let v_hat = v[k] / bias2;
                p[k] -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * p[k]);
            }
        }
        Ok(())
    }
}
