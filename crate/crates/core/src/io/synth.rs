//! Synthetic topic corpora with known class structure.
//!
//! Class `c` owns the tokens `c{c}w0 .. c{c}w{n-1}`; the tokens `s0 ..` are
//! shared by all classes. The description of class `c` is its first two
//! tokens.

use rand::prelude::*;
use rand::seq::index;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{words, Document, LabelPromptSet, Vocabulary};
use crate::encoder::ReferenceEncoderParams;
use crate::error::{Error, Result};
use crate::io::dataset::{build_documents, build_vocabulary, LoadedDataset, RawRecord};

pub const SYNTHETIC_TEMPLATES: [&str; 2] = ["Category: [desc].", "It is about [desc]."];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub classes: usize,
    pub docs_per_class: usize,
    pub vocab_per_class: usize,
    pub shared_vocab: usize,
    pub sentences_per_doc: usize,
    pub words_per_sentence: usize,
    /// Fraction of each document's tokens drawn from the shared vocabulary.
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: 4,
            docs_per_class: 500,
            vocab_per_class: 50,
            shared_vocab: 100,
            sentences_per_doc: 3,
            words_per_sentence: 8,
            noise_rate: 0.2,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.classes == 0 || self.docs_per_class == 0 {
            return fail("synthetic corpus needs at least one class and one document per class");
        }
        if self.vocab_per_class < 3 {
            return fail("vocab_per_class must be at least 3");
        }
        if self.sentences_per_doc < 2 || self.words_per_sentence == 0 {
            return fail("documents need at least two non-empty sentences");
        }
        if !(0.0..0.5).contains(&self.noise_rate) {
            return fail("noise_rate must lie in [0, 0.5)");
        }
        if self.noise_rate > 0.0 && self.shared_vocab == 0 {
            return fail("a positive noise_rate needs a shared vocabulary");
        }
        Ok(())
    }
}

pub fn class_token(class: usize, j: usize) -> String {
    format!("c{class}w{j}")
}

pub fn shared_token(j: usize) -> String {
    format!("s{j}")
}

/// Class owning `word`, if it is a topical token.
pub fn token_class(word: &str) -> Option<usize> {
    let rest = word.strip_prefix('c')?;
    let (class, j) = rest.split_once('w')?;
    j.parse::<usize>().ok()?;
    class.parse().ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub records: Vec<RawRecord>,
    pub descriptions: Vec<String>,
    pub templates: Vec<String>,
}

impl SyntheticCorpus {
    pub fn labels(&self) -> Result<LabelPromptSet> {
        LabelPromptSet::new(self.descriptions.clone(), self.templates.clone())
    }

    pub fn vocabulary(&self) -> Result<Vocabulary> {
        Ok(build_vocabulary(&self.records, &self.labels()?))
    }

    pub fn documents(&self, vocab: &Vocabulary) -> Result<Vec<Document>> {
        build_documents(&self.records, vocab)
    }

    /// Documents, labels and a vocabulary built over both.
    pub fn load(&self) -> Result<LoadedDataset> {
        let labels = self.labels()?;
        let vocab = build_vocabulary(&self.records, &labels);
        Ok(LoadedDataset {
            documents: build_documents(&self.records, &vocab)?,
            labels,
            vocab,
        })
    }

    /// Rows in the CSV dataset format: 1-based label, then the text.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .quote_style(csv::QuoteStyle::Always)
            .from_writer(Vec::new());
        for r in &self.records {
            let label = r.label.map_or(0, |l| l + 1);
            w.write_record([label.to_string().as_str(), r.text.as_str()])
                .map_err(|e| Error::Io(e.into()))?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

pub fn generate_synthetic_corpus(config: &SynthConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.sentences_per_doc * config.words_per_sentence;
    let shared_count = (config.noise_rate * n as f64).round() as usize;

    let mut docs: Vec<(usize, String)> = Vec::with_capacity(config.classes * config.docs_per_class);
    for class in 0..config.classes {
        for _ in 0..config.docs_per_class {
            let mut tokens: Vec<String> = (0..n)
                .map(|_| class_token(class, rng.gen_range(0..config.vocab_per_class)))
                .collect();
            for pos in index::sample(&mut rng, n, shared_count) {
                tokens[pos] = shared_token(rng.gen_range(0..config.shared_vocab));
            }
            let text = tokens
                .chunks(config.words_per_sentence)
                .map(|s| format!("{}.", s.join(" ")))
                .collect::<Vec<_>>()
                .join(" ");
            docs.push((class, text));
        }
    }
    docs.shuffle(&mut rng);

    let records = docs
        .into_iter()
        .enumerate()
        .map(|(i, (label, text))| RawRecord {
            id: i.to_string(),
            text,
            label: Some(label),
            line: i as u64 + 1,
        })
        .collect();
    let descriptions = (0..config.classes)
        .map(|c| format!("{} {}", class_token(c, 0), class_token(c, 1)))
        .collect();
    Ok(SyntheticCorpus {
        records,
        descriptions,
        templates: SYNTHETIC_TEMPLATES.iter().map(|t| t.to_string()).collect(),
    })
}

/// Bag-of-words classifier that counts tokens of each class vocabulary,
/// ties to the lowest class.
pub fn counting_oracle(text: &str, classes: usize) -> usize {
    let mut counts = vec![0usize; classes];
    for w in words(text) {
        if let Some(c) = token_class(&w).filter(|&c| c < classes) {
            counts[c] += 1;
        }
    }
    let mut best = 0;
    for c in 1..classes {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best
}

/// A partially informative starting encoder for synthetic corpora.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorConfig {
    /// Weight added along a class axis.
    pub strength: f64,
    /// Probability that a non-description class token is informative.
    pub coverage: f64,
    /// Relative weight of a shared token's spurious class axis.
    pub shared_bias: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            strength: 1.0,
            coverage: 0.05,
            shared_bias: 0.6,
        }
    }
}

/// Standard random initialization, then `strength` along axis `c` for the
/// description tokens of class `c` and for a `coverage` fraction of its
/// other tokens. Each shared token leans toward one random class axis.
pub fn prior_init<R: Rng + ?Sized>(
    vocab: &Vocabulary,
    classes: usize,
    dim: usize,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<ReferenceEncoderParams> {
    if dim < classes {
        return Err(Error::Config(format!(
            "prior initialization needs dim >= classes ({dim} < {classes})"
        )));
    }
    if !(0.0..=1.0).contains(&prior.coverage) {
        return Err(Error::Config("prior coverage must lie in [0, 1]".into()));
    }
    let mut params = ReferenceEncoderParams::init(vocab.len(), dim, rng)?;
    for (t, token) in vocab.tokens().iter().enumerate() {
        if let Some(c) = token_class(token).filter(|&c| c < classes) {
            let j: usize = token.rsplit('w').next().and_then(|j| j.parse().ok()).unwrap_or(0);
            if j < 2 || rng.gen::<f64>() < prior.coverage {
                params.row_mut(t)[c] += prior.strength;
            }
        } else if token.strip_prefix('s').is_some_and(|j| j.parse::<usize>().is_ok()) {
            let c = rng.gen_range(0..classes);
            params.row_mut(t)[c] += prior.strength * prior.shared_bias;
        }
    }
    params.snap_to_f32();
    Ok(params)
}
