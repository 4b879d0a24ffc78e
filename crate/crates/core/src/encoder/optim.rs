use crate::encoder::{GradientSet, ReferenceEncoderParams};
use crate::error::{Error, Result};

/// AdamW hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamWConfig {
    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidOptimizer(what.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("epsilon must be positive and weight decay non-negative");
        }
        Ok(())
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamWConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    /// State for tensors with the given lengths.
    pub fn new(config: AdamWConfig, shapes: &[usize]) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            step: 0,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        })
    }

    pub fn for_params(config: AdamWConfig, params: &ReferenceEncoderParams) -> Result<Self> {
        Self::new(
            config,
            &[params.embeddings().len(), params.projection().len()],
        )
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One decoupled-weight-decay Adam update over parallel tensor lists.
    /// Inputs are validated before anything is written.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[(&'static str, &[f64])]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::Shape("optimizer tensor count mismatch".into()));
        }
        for ((p, (_, g)), m) in params.iter().zip(grads).zip(&self.first) {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(Error::Shape("optimizer tensor shape mismatch".into()));
            }
        }
        for (name, g) in grads {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { parameter: name });
            }
        }

        let AdamWConfig {
            learning_rate: lr,
            beta1,
            beta2,
            epsilon,
            weight_decay,
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);

        for (k, p) in params.iter_mut().enumerate() {
            let g = grads[k].1;
            let m = &mut self.first[k];
            let v = &mut self.second[k];
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                p[i] *= 1.0 - lr * weight_decay;
                p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

/// Applies one AdamW update to the reference encoder.
pub fn optimizer_step(
    params: &mut ReferenceEncoderParams,
    grads: &GradientSet,
    state: &mut OptimizerState,
) -> Result<()> {
    if grads.vocab_size != params.vocab_size() || grads.dim != params.dim() {
        return Err(Error::Shape("gradient set shape differs from parameters".into()));
    }
    state.step(
        &mut [&mut params.embeddings, &mut params.projection],
        &[("embeddings", &grads.embeddings), ("projection", &grads.projection)],
    )
}
