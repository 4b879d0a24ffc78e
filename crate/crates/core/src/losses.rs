//! Contrastive training batches and the LCT, PCL and PLCT objectives.
//!
//! Every loss here is a sum over batch queries of a multi-positive
//! softmax cross-entropy:
//!
//! ```text
//! loss_i = logsumexp_{m in M} (s_im / t)  -  mean_{a in A(i)} (s_ia / t)
//! ```
//!
//! where `s` are cosine similarities between the augmented document of
//! example `i` and candidate texts. The three objectives differ only in the
//! candidate set `M` and positive set `A(i)`:
//!
//! | loss | candidates `M`        | positives `A(i)`                 |
//! |------|-----------------------|----------------------------------|
//! | LCT  | all batch keys        | keys sharing the pseudo-label    |
//! | PCL  | all class prompts     | the pseudo-label prompt          |
//! | PLCT | keys and prompts      | union of the two above           |
//!
//! A query's own key always counts among its positives.

use rand::Rng;

use crate::corpus::{Document, PromptTokens, Sentence};
use crate::encoder::{
    Embedding, GradientSet, ReferenceEncoderParams, TextEncoder, TextInput,
};
use crate::error::{Error, Result};

/// Default softmax temperature for every contrastive loss.
pub const DEFAULT_TEMPERATURE: f64 = 0.07;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    Plct,
    Lct,
    Pcl,
    LctPlusPcl,
}

impl LossMode {
    pub fn name(self) -> &'static str {
        match self {
            LossMode::Plct => "plct",
            LossMode::Lct => "lct",
            LossMode::Pcl => "pcl",
            LossMode::LctPlusPcl => "lct_plus_pcl",
        }
    }
}

impl std::str::FromStr for LossMode {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "plct" => Ok(LossMode::Plct),
            "lct" => Ok(LossMode::Lct),
            "pcl" => Ok(LossMode::Pcl),
            "lct_plus_pcl" => Ok(LossMode::LctPlusPcl),
            _ => Err(()),
        }
    }
}

/// A pseudo-labelled document with its chosen key sentence.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub doc: &'a Document,
    pub pseudo_label: usize,
    pub key: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub doc_id: String,
    /// The query: the document without its key sentence, unless augmentation
    /// is off or the document has a single sentence.
    pub query: Sentence,
    pub key: Sentence,
    pub pseudo_label: usize,
    /// Set when the query fell back to the full document although
    /// augmentation was requested.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    pub examples: Vec<TrainingExample>,
    /// One rendered prompt per class, all from the same template.
    pub prompts: Vec<Sentence>,
    pub template: usize,
    pub temperature: f64,
}

impl TrainingBatch {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.prompts.len()
    }

    pub fn pseudo_labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.pseudo_label).collect()
    }

    pub fn fallback_count(&self) -> usize {
        self.examples.iter().filter(|e| e.fallback).count()
    }

    /// Encodes every participating text.
    pub fn embed<E: TextEncoder + ?Sized>(&self, encoder: &E) -> Result<BatchEmbeddings> {
        let encode = |items: Vec<&Sentence>| {
            let inputs: Vec<TextInput<'_>> = items
                .into_iter()
                .map(|s| TextInput::new(&s.text, &s.tokens))
                .collect();
            encoder.encode_batch(&inputs)
        };
        let queries = self.examples.iter().map(|e| &e.query).collect();
        let keys = self.examples.iter().map(|e| &e.key).collect();
        let prompts = self.prompts.iter().collect();
        Ok(BatchEmbeddings {
            queries: encode(queries)?,
            keys: encode(keys)?,
            prompts: encode(prompts)?,
        })
    }
}

/// Assembles a batch. One template is drawn uniformly for the whole batch.
pub fn build_batch<R: Rng + ?Sized>(
    samples: &[Sample<'_>],
    prompts: &PromptTokens,
    augment: bool,
    temperature: f64,
    template_rng: &mut R,
) -> Result<TrainingBatch> {
    if samples.is_empty() {
        return Err(Error::Shape("training batch needs at least one example".into()));
    }
    if !(temperature > 0.0) {
        return Err(Error::Config("temperature must be positive".into()));
    }
    let classes = prompts.num_classes();
    let mut examples = Vec::with_capacity(samples.len());
    for s in samples {
        let n = s.doc.num_sentences();
        if s.key >= n {
            return Err(Error::Shape(format!(
                "key index {} out of range for document {} with {n} sentences",
                s.key, s.doc.id
            )));
        }
        if s.pseudo_label >= classes {
            return Err(Error::Shape(format!(
                "pseudo-label {} out of range for {classes} classes",
                s.pseudo_label
            )));
        }
        let (query, fallback) = if augment && n > 1 {
            let tokens = s.doc.tokens_without(s.key);
            if tokens.is_empty() {
                (full_document(s.doc), true)
            } else {
                (
                    Sentence {
                        text: s.doc.text_without(s.key),
                        tokens,
                    },
                    false,
                )
            }
        } else {
            (full_document(s.doc), augment)
        };
        examples.push(TrainingExample {
            doc_id: s.doc.id.clone(),
            query,
            key: s.doc.sentences[s.key].clone(),
            pseudo_label: s.pseudo_label,
            fallback,
        });
    }
    let template = template_rng.gen_range(0..prompts.num_templates());
    Ok(TrainingBatch {
        examples,
        prompts: (0..classes).map(|c| prompts.get(c, template).clone()).collect(),
        template,
        temperature,
    })
}

fn full_document(doc: &Document) -> Sentence {
    Sentence {
        text: doc.text(),
        tokens: doc.tokens(),
    }
}

/// Unit embeddings of a batch: augmented queries, keys and class prompts.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchEmbeddings {
    pub queries: Vec<Embedding>,
    pub keys: Vec<Embedding>,
    pub prompts: Vec<Embedding>,
}

/// Loss value and its gradient with respect to every participating embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub query_grads: Vec<Vec<f64>>,
    pub key_grads: Vec<Vec<f64>>,
    pub prompt_grads: Vec<Vec<f64>>,
}

impl LossOutput {
    fn zeros(b: usize, l: usize, d: usize) -> Self {
        Self {
            loss: 0.0,
            query_grads: vec![vec![0.0; d]; b],
            key_grads: vec![vec![0.0; d]; b],
            prompt_grads: vec![vec![0.0; d]; l],
        }
    }

    fn add(mut self, other: &LossOutput) -> Self {
        self.loss += other.loss;
        for (a, b) in [
            (&mut self.query_grads, &other.query_grads),
            (&mut self.key_grads, &other.key_grads),
            (&mut self.prompt_grads, &other.prompt_grads),
        ] {
            for (x, y) in a.iter_mut().zip(b) {
                for (p, q) in x.iter_mut().zip(y) {
                    *p += q;
                }
            }
        }
        self
    }
}

#[derive(Clone, Copy)]
enum Candidate {
    Key(usize),
    Prompt(usize),
}

/// Shared kernel of all three losses.
fn multi_positive_loss(
    emb: &BatchEmbeddings,
    labels: &[usize],
    temperature: f64,
    with_keys: bool,
    with_prompts: bool,
) -> Result<LossOutput> {
    let b = emb.queries.len();
    let l = emb.prompts.len();
    if b == 0 || emb.keys.len() != b || labels.len() != b {
        return Err(Error::Shape(format!(
            "batch has {b} queries, {} keys and {} labels",
            emb.keys.len(),
            labels.len()
        )));
    }
    if with_prompts && (l == 0 || labels.iter().any(|&y| y >= l)) {
        return Err(Error::Shape("pseudo-label without a class prompt".into()));
    }
    let d = emb.queries[0].dim();

    let mut candidates = Vec::with_capacity(b + l);
    if with_keys {
        candidates.extend((0..b).map(Candidate::Key));
    }
    if with_prompts {
        candidates.extend((0..l).map(Candidate::Prompt));
    }
    let vector = |c: Candidate| match c {
        Candidate::Key(j) => &emb.keys[j],
        Candidate::Prompt(c) => &emb.prompts[c],
    };

    let mut out = LossOutput::zeros(b, l, d);
    let mut logits = vec![0.0; candidates.len()];
    let mut positive = vec![false; candidates.len()];
    for i in 0..b {
        let query = &emb.queries[i];
        for (slot, &c) in candidates.iter().enumerate() {
            logits[slot] = query.cosine(vector(c))? / temperature;
            positive[slot] = match c {
                Candidate::Key(j) => labels[j] == labels[i],
                Candidate::Prompt(c) => c == labels[i],
            };
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = logits.iter().map(|z| (z - max).exp()).sum();
        let log_norm = max + sum_exp.ln();
        let num_pos = positive.iter().filter(|&&p| p).count() as f64;
        let pos_mean = logits
            .iter()
            .zip(&positive)
            .filter(|(_, &p)| p)
            .map(|(z, _)| z)
            .sum::<f64>()
            / num_pos;
        out.loss += log_norm - pos_mean;

        for (slot, &c) in candidates.iter().enumerate() {
            let p = (logits[slot] - log_norm).exp();
            let target = if positive[slot] { 1.0 / num_pos } else { 0.0 };
            let g = (p - target) / temperature;
            if g == 0.0 {
                continue;
            }
            let cand = vector(c).values();
            for (q, x) in out.query_grads[i].iter_mut().zip(cand) {
                *q += g * x;
            }
            let dest = match c {
                Candidate::Key(j) => &mut out.key_grads[j],
                Candidate::Prompt(c) => &mut out.prompt_grads[c],
            };
            for (k, x) in dest.iter_mut().zip(query.values()) {
                *k += g * x;
            }
        }
    }
    Ok(out)
}

pub fn lct_from_embeddings(emb: &BatchEmbeddings, labels: &[usize], temperature: f64) -> Result<LossOutput> {
    multi_positive_loss(emb, labels, temperature, true, false)
}

pub fn pcl_from_embeddings(emb: &BatchEmbeddings, labels: &[usize], temperature: f64) -> Result<LossOutput> {
    multi_positive_loss(emb, labels, temperature, false, true)
}

pub fn plct_from_embeddings(emb: &BatchEmbeddings, labels: &[usize], temperature: f64) -> Result<LossOutput> {
    multi_positive_loss(emb, labels, temperature, true, true)
}

pub fn loss_from_embeddings(
    mode: LossMode,
    emb: &BatchEmbeddings,
    labels: &[usize],
    temperature: f64,
) -> Result<LossOutput> {
    match mode {
        LossMode::Plct => plct_from_embeddings(emb, labels, temperature),
        LossMode::Lct => lct_from_embeddings(emb, labels, temperature),
        LossMode::Pcl => pcl_from_embeddings(emb, labels, temperature),
        LossMode::LctPlusPcl => {
            let lct = lct_from_embeddings(emb, labels, temperature)?;
            let pcl = pcl_from_embeddings(emb, labels, temperature)?;
            Ok(lct.add(&pcl))
        }
    }
}

pub fn lct_loss<E: TextEncoder + ?Sized>(batch: &TrainingBatch, encoder: &E) -> Result<LossOutput> {
    combined_loss(batch, encoder, LossMode::Lct)
}

pub fn pcl_loss<E: TextEncoder + ?Sized>(batch: &TrainingBatch, encoder: &E) -> Result<LossOutput> {
    combined_loss(batch, encoder, LossMode::Pcl)
}

pub fn plct_loss<E: TextEncoder + ?Sized>(batch: &TrainingBatch, encoder: &E) -> Result<LossOutput> {
    combined_loss(batch, encoder, LossMode::Plct)
}

pub fn combined_loss<E: TextEncoder + ?Sized>(
    batch: &TrainingBatch,
    encoder: &E,
    mode: LossMode,
) -> Result<LossOutput> {
    let emb = batch.embed(encoder)?;
    loss_from_embeddings(mode, &emb, &batch.pseudo_labels(), batch.temperature)
}

/// Loss and its gradient with respect to the reference encoder parameters.
/// Gradients flow into queries, keys and prompts alike.
pub fn parameter_gradients(
    batch: &TrainingBatch,
    params: &ReferenceEncoderParams,
    mode: LossMode,
) -> Result<(f64, GradientSet)> {
    let out = combined_loss(batch, params, mode)?;
    let mut grads = GradientSet::zeros(params.vocab_size(), params.dim());
    for (ex, (gq, gk)) in batch
        .examples
        .iter()
        .zip(out.query_grads.iter().zip(&out.key_grads))
    {
        params.accumulate_backward(&ex.query.tokens, gq, &mut grads)?;
        params.accumulate_backward(&ex.key.tokens, gk, &mut grads)?;
    }
    for (prompt, gp) in batch.prompts.iter().zip(&out.prompt_grads) {
        params.accumulate_backward(&prompt.tokens, gp, &mut grads)?;
    }
    Ok((out.loss, grads))
}
