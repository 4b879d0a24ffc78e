//! Text encoders mapping token sequences to unit-norm embeddings.
//!
//! The built-in [`ReferenceEncoderParams`] is a trainable bag-of-embeddings
//! encoder: mean-pool token rows, apply a square projection, L2-normalize.
//! Its gradients are derived by hand in [`ReferenceEncoderParams::backward`].
//! [`RemoteEncoder`] talks to an external embedding service instead.

mod optim;
mod remote;

pub use optim::{optimizer_step, AdamWConfig, OptimizerState};
pub use remote::RemoteEncoder;

use rand::Rng;

use crate::error::{Error, Result};

/// Below this norm an embedding is considered collapsed.
pub const MIN_NORM: f64 = 1e-12;

/// A unit-L2-norm vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Normalizes `values` to unit length.
    pub fn normalize(mut values: Vec<f64>) -> Result<Self> {
        let norm = l2_norm(&values);
        if !norm.is_finite() || norm < MIN_NORM {
            return Err(Error::DegenerateEmbedding { norm });
        }
        for v in &mut values {
            *v /= norm;
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Cosine similarity; for unit vectors this is the dot product.
    pub fn cosine(&self, other: &Embedding) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(dot(&self.0, &other.0))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Wraps values without normalizing them.
    #[cfg(test)]
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self(values)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// One text to encode. Local encoders read `tokens`, remote ones `text`.
#[derive(Debug, Clone, Copy)]
pub struct TextInput<'a> {
    pub text: &'a str,
    pub tokens: &'a [usize],
}

impl<'a> TextInput<'a> {
    pub fn new(text: &'a str, tokens: &'a [usize]) -> Self {
        Self { text, tokens }
    }
}

/// Anything that maps texts into a shared embedding space.
pub trait TextEncoder {
    fn encode_batch(&self, inputs: &[TextInput<'_>]) -> Result<Vec<Embedding>>;

    fn encode_one(&self, input: TextInput<'_>) -> Result<Embedding> {
        let mut out = self.encode_batch(std::slice::from_ref(&input))?;
        out.pop()
            .ok_or_else(|| Error::ProtocolViolation("encoder returned no embedding".into()))
    }
}

impl<E: TextEncoder + ?Sized> TextEncoder for &E {
    fn encode_batch(&self, inputs: &[TextInput<'_>]) -> Result<Vec<Embedding>> {
        (**self).encode_batch(inputs)
    }
}

/// Parameters of the reference encoder: a `V x D` token table and a `D x D`
/// projection, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceEncoderParams {
    vocab_size: usize,
    dim: usize,
    embeddings: Vec<f64>,
    projection: Vec<f64>,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub pooled: Vec<f64>,
    pub projected: Vec<f64>,
    pub norm: f64,
    pub output: Embedding,
}

/// Gradients with the same layout as [`ReferenceEncoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub vocab_size: usize,
    pub dim: usize,
    pub embeddings: Vec<f64>,
    pub projection: Vec<f64>,
}

impl GradientSet {
    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        Self {
            vocab_size,
            dim,
            embeddings: vec![0.0; vocab_size * dim],
            projection: vec![0.0; dim * dim],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.embeddings
            .iter()
            .chain(&self.projection)
            .all(|&g| g == 0.0)
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.embeddings.iter_mut().zip(&other.embeddings) {
            *a += b;
        }
        for (a, b) in self.projection.iter_mut().zip(&other.projection) {
            *a += b;
        }
    }

    pub fn embedding_row(&self, token: usize) -> &[f64] {
        &self.embeddings[token * self.dim..(token + 1) * self.dim]
    }
}

fn round_to_f32(v: f64) -> f64 {
    v as f32 as f64
}

impl ReferenceEncoderParams {
    pub fn new(
        vocab_size: usize,
        dim: usize,
        embeddings: Vec<f64>,
        projection: Vec<f64>,
    ) -> Result<Self> {
        if vocab_size < 1 || dim < 2 {
            return Err(Error::Shape(format!(
                "reference encoder needs V >= 1 and D >= 2, got V={vocab_size}, D={dim}"
            )));
        }
        if embeddings.len() != vocab_size * dim || projection.len() != dim * dim {
            return Err(Error::Shape(format!(
                "parameter lengths {}/{} do not match V={vocab_size}, D={dim}",
                embeddings.len(),
                projection.len()
            )));
        }
        if embeddings.iter().chain(&projection).any(|v| !v.is_finite()) {
            return Err(Error::Shape("parameters contain non-finite entries".into()));
        }
        Ok(Self {
            vocab_size,
            dim,
            embeddings,
            projection,
        })
    }

    /// Random initialization: token rows uniform in `[-0.5/D, 0.5/D]`,
    /// projection identity plus uniform noise in `[-0.01, 0.01]`. Values are
    /// drawn on the f32 grid so checkpoints store them exactly.
    pub fn init<R: Rng + ?Sized>(vocab_size: usize, dim: usize, rng: &mut R) -> Result<Self> {
        let half = 0.5 / dim as f64;
        let embeddings = (0..vocab_size * dim)
            .map(|_| round_to_f32(rng.gen_range(-half..=half)))
            .collect();
        let projection = (0..dim * dim)
            .map(|i| {
                let diag = if i / dim == i % dim { 1.0 } else { 0.0 };
                round_to_f32(diag + rng.gen_range(-0.01..=0.01))
            })
            .collect();
        Self::new(vocab_size, dim, embeddings, projection)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embeddings(&self) -> &[f64] {
        &self.embeddings
    }

    pub fn projection(&self) -> &[f64] {
        &self.projection
    }

    pub fn embeddings_mut(&mut self) -> &mut [f64] {
        &mut self.embeddings
    }

    pub fn projection_mut(&mut self) -> &mut [f64] {
        &mut self.projection
    }

    pub fn row(&self, token: usize) -> &[f64] {
        &self.embeddings[token * self.dim..(token + 1) * self.dim]
    }

    pub fn row_mut(&mut self, token: usize) -> &mut [f64] {
        &mut self.embeddings[token * self.dim..(token + 1) * self.dim]
    }

    /// Rounds every parameter to the nearest f32.
    pub fn is_finite(&self) -> bool {
        self.embeddings.iter().chain(&self.projection).all(|v| v.is_finite())
    }

    pub fn snap_to_f32(&mut self) {
        for v in self.embeddings.iter_mut().chain(self.projection.iter_mut()) {
            *v = round_to_f32(*v);
        }
    }

    fn check_tokens(&self, tokens: &[usize]) -> Result<()> {
        if tokens.is_empty() {
            return Err(Error::EmptyTokens);
        }
        if let Some(&index) = tokens.iter().find(|&&t| t >= self.vocab_size) {
            return Err(Error::TokenOutOfRange {
                index,
                vocab_size: self.vocab_size,
            });
        }
        Ok(())
    }

    pub fn forward(&self, tokens: &[usize]) -> Result<Forward> {
        self.check_tokens(tokens)?;
        let d = self.dim;
        // summing in sorted order makes pooling exactly order independent
        let mut order = tokens.to_vec();
        order.sort_unstable();
        let mut pooled = vec![0.0; d];
        for &t in &order {
            for (p, e) in pooled.iter_mut().zip(self.row(t)) {
                *p += e;
            }
        }
        let n = tokens.len() as f64;
        for p in &mut pooled {
            *p /= n;
        }
        let projected: Vec<f64> = self
            .projection
            .chunks_exact(d)
            .map(|w_row| dot(w_row, &pooled))
            .collect();
        let norm = l2_norm(&projected);
        if !norm.is_finite() || norm < MIN_NORM {
            return Err(Error::DegenerateEmbedding { norm });
        }
        let output = Embedding(projected.iter().map(|u| u / norm).collect());
        Ok(Forward {
            pooled,
            projected,
            norm,
            output,
        })
    }

    pub fn encode(&self, tokens: &[usize]) -> Result<Embedding> {
        self.forward(tokens).map(|f| f.output)
    }

    /// Gradient of a scalar loss with respect to all parameters, given
    /// `grad_out`, its gradient with respect to the normalized output.
    pub fn backward(&self, tokens: &[usize], grad_out: &[f64]) -> Result<GradientSet> {
        let mut grads = GradientSet::zeros(self.vocab_size, self.dim);
        self.accumulate_backward(tokens, grad_out, &mut grads)?;
        Ok(grads)
    }

    /// Like [`backward`](Self::backward) but adds into an existing set.
    pub fn accumulate_backward(
        &self,
        tokens: &[usize],
        grad_out: &[f64],
        grads: &mut GradientSet,
    ) -> Result<()> {
        let d = self.dim;
        if grad_out.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: grad_out.len(),
            });
        }
        if grads.vocab_size != self.vocab_size || grads.dim != d {
            return Err(Error::Shape("gradient set shape differs from parameters".into()));
        }
        let fwd = self.forward(tokens)?;
        let f = fwd.output.values();

        // through normalization: (I - f f^T) g / |u|
        let fg = dot(f, grad_out);
        let du: Vec<f64> = f
            .iter()
            .zip(grad_out)
            .map(|(fi, gi)| (gi - fi * fg) / fwd.norm)
            .collect();

        let mut dm = vec![0.0; d];
        for (a, du_a) in du.iter().enumerate() {
            let w_row = &self.projection[a * d..(a + 1) * d];
            let dw_row = &mut grads.projection[a * d..(a + 1) * d];
            for b in 0..d {
                dw_row[b] += du_a * fwd.pooled[b];
                dm[b] += w_row[b] * du_a;
            }
        }

        let n = tokens.len() as f64;
        for &t in tokens {
            let row = &mut grads.embeddings[t * d..(t + 1) * d];
            for (r, g) in row.iter_mut().zip(&dm) {
                *r += g / n;
            }
        }
        Ok(())
    }
}

impl TextEncoder for ReferenceEncoderParams {
    fn encode_batch(&self, inputs: &[TextInput<'_>]) -> Result<Vec<Embedding>> {
        inputs.iter().map(|i| self.encode(i.tokens)).collect()
    }
}
