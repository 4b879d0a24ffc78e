#![allow(dead_code)]

use pesco::corpus::{Document, PromptTokens, Vocabulary};
use pesco::encoder::ReferenceEncoderParams;
use pesco::io::{generate_synthetic_corpus, prior_init, PriorConfig, SynthConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Task {
    pub docs: Vec<Document>,
    pub eval: Vec<Document>,
    pub prompts: PromptTokens,
    pub vocab: Vocabulary,
    pub init: ReferenceEncoderParams,
}

/// Synthetic corpus, a held-out split drawn from the same generator, and a
/// partially informative encoder, all derived from `seed`.
pub fn synthetic_task(synth: SynthConfig, dim: usize, seed: u64) -> Task {
    let synth = SynthConfig { seed, ..synth };
    let corpus = generate_synthetic_corpus(&synth).unwrap().load().unwrap();
    let held_out = SynthConfig {
        seed: seed + 10_000,
        docs_per_class: (synth.docs_per_class / 2).max(1),
        ..synth.clone()
    };
    let eval = generate_synthetic_corpus(&held_out)
        .unwrap()
        .documents(&corpus.vocab)
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = prior_init(&corpus.vocab, synth.classes, dim, &PriorConfig::default(), &mut rng).unwrap();
    Task {
        prompts: corpus.labels.tokenize(&corpus.vocab),
        docs: corpus.documents,
        eval,
        vocab: corpus.vocab,
        init,
    }
}

pub fn small_task(seed: u64) -> Task {
    let synth = SynthConfig {
        docs_per_class: 30,
        vocab_per_class: 12,
        shared_vocab: 20,
        ..SynthConfig::default()
    };
    synthetic_task(synth, 8, seed)
}
