//! The teacher/student self-training loop.
//!
//! Each round the current encoder labels the clean corpus, a class-balanced
//! sample of confident pseudo-labelled documents is drawn, and the same
//! encoder is trained on augmented versions of them. The sample size grows
//! geometrically until it reaches a cap.

use std::time::Instant;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Document, PromptTokens};
use crate::encoder::{
    optimizer_step, AdamWConfig, OptimizerState, ReferenceEncoderParams, TextEncoder,
};
use crate::error::{Error, ErrorClass, Result};
use crate::eval::{evaluate, EvalResult};
use crate::losses::{build_batch, parameter_gradients, LossMode, Sample, DEFAULT_TEMPERATURE};
use crate::matching::{confidence_distribution, predict, select_key_sentence, KeyMode, PromptEmbeddings};

/// A sample count, either absolute or relative to the corpus size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleSize {
    Count(usize),
    Fraction(f64),
}

impl SampleSize {
    pub fn resolve(self, corpus_size: usize) -> usize {
        match self {
            SampleSize::Count(n) => n,
            SampleSize::Fraction(f) => (f * corpus_size as f64).floor() as usize,
        }
    }
}

impl std::fmt::Display for SampleSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SampleSize::Count(n) => write!(f, "{n}"),
            SampleSize::Fraction(x) => write!(f, "{x}N"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfTrainConfig {
    pub loss_mode: LossMode,
    pub key_mode: KeyMode,
    pub augment: bool,
    pub temperature: f64,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    pub epochs: usize,
    /// Factor by which the sample size grows between rounds.
    pub growth: f64,
    pub initial_samples: SampleSize,
    pub sample_cap: SampleSize,
    pub max_rounds: usize,
    pub seed: u64,
}

impl Default for SelfTrainConfig {
    fn default() -> Self {
        Self {
            loss_mode: LossMode::Plct,
            key_mode: KeyMode::Salient,
            augment: true,
            temperature: DEFAULT_TEMPERATURE,
            batch_size: 32,
            optimizer: AdamWConfig::default(),
            epochs: 1,
            growth: 2.0,
            initial_samples: SampleSize::Fraction(0.05),
            sample_cap: SampleSize::Fraction(0.2),
            max_rounds: 10,
            seed: 0,
        }
    }
}

impl SelfTrainConfig {
    /// Checks the configuration against a corpus of `corpus_size` documents
    /// and returns the resolved `(initial, cap)` sample sizes.
    pub fn resolve(&self, corpus_size: usize) -> Result<(usize, usize)> {
        let t0 = self.initial_samples.resolve(corpus_size);
        let cap = self.sample_cap.resolve(corpus_size);
        let fail = |m: String| Err(Error::Config(m));
        if !(self.growth > 1.0) {
            return fail(format!("growth factor must exceed 1, got {}", self.growth));
        }
        if !(0 < t0 && t0 <= cap && cap <= corpus_size) {
            return fail(format!(
                "need 0 < initial samples ({t0}) <= cap ({cap}) <= corpus size ({corpus_size})"
            ));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.max_rounds == 0 {
            return fail("batch size, epochs and max rounds must be positive".into());
        }
        if !(self.temperature > 0.0) {
            return fail("temperature must be positive".into());
        }
        Ok((t0, cap))
    }
}

/// Sample size of round `round` (1-based): `min(t0 * growth^(round-1), cap)`.
pub fn schedule_size(t0: usize, growth: f64, cap: usize, round: usize) -> usize {
    let grown = t0 as f64 * growth.powi(round.saturating_sub(1) as i32);
    if grown >= cap as f64 {
        cap
    } else {
        grown.floor() as usize
    }
}

/// Pseudo-labelled documents grouped by predicted class.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelPool {
    /// `per_class[c]` holds `(document index, confidence)` pairs.
    pub per_class: Vec<Vec<(usize, f64)>>,
    /// Documents that could not be encoded.
    pub excluded: Vec<usize>,
}

impl PseudoLabelPool {
    pub fn num_classes(&self) -> usize {
        self.per_class.len()
    }

    pub fn len(&self) -> usize {
        self.per_class.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pseudo-label of every pooled document, indexed by document.
    pub fn labels(&self, corpus_size: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; corpus_size];
        for (c, docs) in self.per_class.iter().enumerate() {
            for &(d, _) in docs {
                out[d] = Some(c);
            }
        }
        out
    }
}

/// Labels every document of `corpus` with the encoder's prediction on the
/// clean text. Documents whose embedding collapses are excluded.
pub fn generate_pseudo_labels<E: TextEncoder + ?Sized>(
    corpus: &[Document],
    prompts: &PromptTokens,
    encoder: &E,
    temperature: f64,
) -> Result<PseudoLabelPool> {
    if corpus.is_empty() {
        return Err(Error::Config("cannot pseudo-label an empty corpus".into()));
    }
    let prompt_embeddings = PromptEmbeddings::encode(prompts, encoder)?;
    let mut pool = PseudoLabelPool {
        per_class: vec![Vec::new(); prompts.num_classes()],
        excluded: Vec::new(),
    };
    for (i, doc) in corpus.iter().enumerate() {
        match predict(doc, &prompt_embeddings, encoder) {
            Ok(p) => {
                let confidence = confidence_distribution(&p.scores, temperature)[p.class];
                pool.per_class[p.class].push((i, confidence));
            }
            Err(e) if e.class() == ErrorClass::Numerical => pool.excluded.push(i),
            Err(e) => return Err(e),
        }
    }
    Ok(pool)
}

/// Per-class quotas for a balanced sample of `total` over `num_classes`,
/// with quotas of classes lacking candidates handed one at a time to the
/// smallest remaining quota.
pub fn class_quotas(total: usize, available: &[bool]) -> Vec<usize> {
    let l = available.len();
    let mut quotas: Vec<usize> = (0..l)
        .map(|c| total / l + usize::from(c < total % l))
        .collect();
    let mut forfeited = 0;
    for (q, &ok) in quotas.iter_mut().zip(available) {
        if !ok {
            forfeited += *q;
            *q = 0;
        }
    }
    if available.iter().any(|&a| a) {
        for _ in 0..forfeited {
            let target = (0..l)
                .filter(|&c| available[c])
                .min_by_key(|&c| (quotas[c], c))
                .expect("at least one class available");
            quotas[target] += 1;
        }
    }
    quotas
}

/// Draws a class-balanced, confidence-weighted sample of
/// `(document index, pseudo-label)` pairs.
pub fn sample_training_pairs<R: Rng + ?Sized>(
    pool: &PseudoLabelPool,
    total: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    let l = pool.num_classes();
    if total < l {
        return Err(Error::InvalidSample(format!(
            "sample size {total} smaller than class count {l}"
        )));
    }
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let available: Vec<bool> = pool.per_class.iter().map(|c| !c.is_empty()).collect();
    let quotas = class_quotas(total, &available);

    let mut pairs = Vec::with_capacity(total);
    for (class, (candidates, &quota)) in pool.per_class.iter().zip(&quotas).enumerate() {
        if quota == 0 {
            continue;
        }
        let weight = |&(_, w): &(usize, f64)| w;
        let distinct = quota.min(candidates.len());
        let chosen = candidates
            .choose_multiple_weighted(rng, distinct, weight)
            .map_err(|e| Error::InvalidSample(e.to_string()))?;
        pairs.extend(chosen.map(|&(doc, _)| (doc, class)));
        if quota > distinct {
            let dist = WeightedIndex::new(candidates.iter().map(weight))
                .map_err(|e| Error::InvalidSample(e.to_string()))?;
            for _ in distinct..quota {
                pairs.push((candidates[dist.sample(rng)].0, class));
            }
        }
    }
    pairs.shuffle(rng);
    Ok(pairs)
}

/// Number of batches of size `batch_size` covering `n` items; the last may be
/// partial.
pub fn batch_count(n: usize, batch_size: usize) -> usize {
    n.div_ceil(batch_size)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTraining {
    pub mean_loss: f64,
    pub epoch_losses: Vec<f64>,
    pub batches: usize,
    /// Examples whose query fell back to the full document.
    pub fallbacks: usize,
}

/// One student update over `pairs`: choose key sentences, then run
/// `config.epochs` passes of mini-batch AdamW on the configured loss.
/// On failure the parameters and optimizer state are restored.
#[allow(clippy::too_many_arguments)]
pub fn train_round<R: Rng + ?Sized>(
    pairs: &[(usize, usize)],
    corpus: &[Document],
    prompts: &PromptTokens,
    params: &mut ReferenceEncoderParams,
    optimizer: &mut OptimizerState,
    config: &SelfTrainConfig,
    rng: &mut R,
) -> Result<RoundTraining> {
    if pairs.is_empty() {
        return Err(Error::InvalidSample("no training pairs".into()));
    }
    let saved = (params.clone(), optimizer.clone());
    let result = run_epochs(pairs, corpus, prompts, params, optimizer, config, rng);
    if result.is_err() {
        (*params, *optimizer) = saved;
    }
    result
}

fn run_epochs<R: Rng + ?Sized>(
    pairs: &[(usize, usize)],
    corpus: &[Document],
    prompts: &PromptTokens,
    params: &mut ReferenceEncoderParams,
    optimizer: &mut OptimizerState,
    config: &SelfTrainConfig,
    rng: &mut R,
) -> Result<RoundTraining> {
    let prompt_embeddings = PromptEmbeddings::encode(prompts, &*params)?;
    let mut samples = Vec::with_capacity(pairs.len());
    for &(doc, label) in pairs {
        let d = &corpus[doc];
        let key = select_key_sentence(d, prompt_embeddings.class(label), &*params, config.key_mode, rng)?;
        samples.push(Sample {
            doc: d,
            pseudo_label: label,
            key,
        });
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut total_loss = 0.0;
    let mut batches = 0;
    let mut fallbacks = 0;
    for _ in 0..config.epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        let mut epoch_batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch_samples: Vec<Sample<'_>> = chunk.iter().map(|&i| samples[i]).collect();
            let batch = build_batch(&batch_samples, prompts, config.augment, config.temperature, rng)?;
            fallbacks += batch.fallback_count();
            let (loss, grads) = parameter_gradients(&batch, params, config.loss_mode)?;
            optimizer_step(params, &grads, optimizer)?;
            params.snap_to_f32();
            if !params.is_finite() {
                return Err(Error::NonFiniteGradient {
                    parameter: "updated parameters",
                });
            }
            epoch_loss += loss;
            epoch_batches += 1;
        }
        total_loss += epoch_loss;
        batches += epoch_batches;
        epoch_losses.push(epoch_loss / epoch_batches as f64);
    }
    Ok(RoundTraining {
        mean_loss: total_loss / batches as f64,
        epoch_losses,
        batches,
        fallbacks,
    })
}

/// Summary of one self-training round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: usize,
    pub sample_size: usize,
    pub class_counts: Vec<usize>,
    pub mean_loss: f64,
    /// Accuracy on the labelled evaluation split after the update; reporting
    /// only.
    pub accuracy: Option<f64>,
    pub excluded: usize,
    pub fallbacks: usize,
    pub seconds: f64,
}

impl RoundReport {
    /// One `key=value` record. Wall-clock time is left out so that records
    /// are reproducible.
    pub fn to_record(&self) -> String {
        let counts: Vec<String> = self.class_counts.iter().map(usize::to_string).collect();
        let mut line = format!(
            "round={} t={} counts={} mean_loss={:.6} excluded={} fallbacks={}",
            self.round,
            self.sample_size,
            counts.join(","),
            self.mean_loss,
            self.excluded,
            self.fallbacks
        );
        if let Some(acc) = self.accuracy {
            line.push_str(&format!(" accuracy={acc:.6}"));
        }
        line
    }

    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &RoundReport) -> bool {
        RoundReport {
            seconds: 0.0,
            ..self.clone()
        } == RoundReport {
            seconds: 0.0,
            ..other.clone()
        }
    }
}

/// What happened inside one round, kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub pool: PseudoLabelPool,
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct SelfTrainOutcome {
    pub params: ReferenceEncoderParams,
    pub reports: Vec<RoundReport>,
    pub traces: Vec<RoundTrace>,
    /// Accuracy of the starting encoder on the evaluation split.
    pub initial_accuracy: Option<f64>,
    pub final_eval: Option<EvalResult>,
}

/// A run that stopped early; carries the reports of completed rounds.
#[derive(Debug, thiserror::Error)]
#[error("self-training aborted after {} round(s): {error}", reports.len())]
pub struct Aborted {
    #[source]
    pub error: Error,
    pub reports: Vec<RoundReport>,
}

/// Predictions of `encoder` scored against gold labels. Documents lacking a
/// gold label are skipped.
pub fn evaluate_encoder<E: TextEncoder + ?Sized>(
    docs: &[Document],
    prompts: &PromptTokens,
    encoder: &E,
) -> Result<EvalResult> {
    let prompt_embeddings = PromptEmbeddings::encode(prompts, encoder)?;
    let mut preds = Vec::new();
    let mut golds = Vec::new();
    for doc in docs {
        let Some(gold) = doc.gold_label else { continue };
        preds.push(predict(doc, &prompt_embeddings, encoder)?.class);
        golds.push(gold);
    }
    evaluate(&preds, &golds, prompts.num_classes())
}

/// Runs the full self-training loop from `params`.
///
/// Round `t` trains on `min(T0 * d^(t-1), cap)` pairs. The loop ends after
/// the second consecutive round at the cap, or after `max_rounds`. Gold
/// labels of `eval` are used only for the reported accuracies.
pub fn self_train(
    corpus: &[Document],
    prompts: &PromptTokens,
    params: ReferenceEncoderParams,
    config: &SelfTrainConfig,
    eval: Option<&[Document]>,
) -> std::result::Result<SelfTrainOutcome, Aborted> {
    let mut reports = Vec::new();
    let abort = |error: Error, reports: &Vec<RoundReport>| Aborted {
        error,
        reports: reports.clone(),
    };
    let (t0, cap) = config.resolve(corpus.len()).map_err(|e| abort(e, &reports))?;
    let mut params = params;
    let mut optimizer =
        OptimizerState::for_params(config.optimizer, &params).map_err(|e| abort(e, &reports))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let eval_with = |p: &ReferenceEncoderParams| -> Result<Option<EvalResult>> {
        match eval {
            Some(docs) if docs.iter().any(|d| d.gold_label.is_some()) => {
                evaluate_encoder(docs, prompts, p).map(Some)
            }
            _ => Ok(None),
        }
    };
    let initial_accuracy = eval_with(&params)
        .map_err(|e| abort(e, &reports))?
        .map(|r| r.accuracy);

    let mut traces = Vec::new();
    let mut rounds_at_cap = 0;
    for round in 1..=config.max_rounds {
        let started = Instant::now();
        let sample_size = schedule_size(t0, config.growth, cap, round);
        let step = (|| -> Result<(RoundReport, RoundTrace)> {
            let pool = generate_pseudo_labels(corpus, prompts, &params, config.temperature)?;
            let pairs = sample_training_pairs(&pool, sample_size, &mut rng)?;
            let trained = train_round(
                &pairs,
                corpus,
                prompts,
                &mut params,
                &mut optimizer,
                config,
                &mut rng,
            )?;
            let mut class_counts = vec![0; prompts.num_classes()];
            for &(_, c) in &pairs {
                class_counts[c] += 1;
            }
            let accuracy = eval_with(&params)?.map(|r| r.accuracy);
            let report = RoundReport {
                round,
                sample_size,
                class_counts,
                mean_loss: trained.mean_loss,
                accuracy,
                excluded: pool.excluded.len(),
                fallbacks: trained.fallbacks,
                seconds: started.elapsed().as_secs_f64(),
            };
            Ok((report, RoundTrace { pool, pairs }))
        })();
        let (report, trace) = step.map_err(|e| abort(e, &reports))?;
        reports.push(report);
        traces.push(trace);

        if sample_size == cap {
            rounds_at_cap += 1;
            if rounds_at_cap == 2 {
                break;
            }
        }
    }

    let final_eval = eval_with(&params).map_err(|e| abort(e, &reports))?;
    Ok(SelfTrainOutcome {
        params,
        reports,
        traces,
        initial_accuracy,
        final_eval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabelPromptSet, Vocabulary};
    use crate::encoder::{Embedding, TextInput};
    use std::cell::RefCell;

    fn pool(per_class: Vec<Vec<f64>>) -> PseudoLabelPool {
        let mut next = 0;
        PseudoLabelPool {
            per_class: per_class
                .into_iter()
                .map(|c| {
                    c.into_iter()
                        .map(|w| {
                            next += 1;
                            (next - 1, w)
                        })
                        .collect()
                })
                .collect(),
            excluded: vec![],
        }
    }

    #[test]
    fn schedule_doubles_to_cap() {
        let seq: Vec<usize> = (1..=5).map(|t| schedule_size(100, 2.0, 400, t)).collect();
        assert_eq!(seq, vec![100, 200, 400, 400, 400]);
        assert_eq!(schedule_size(3, 1.5, 100, 3), 6);
        assert_eq!(schedule_size(10, 2.0, 10, 1), 10);
        assert_eq!(schedule_size(1, 2.0, 50, 200), 50);
    }

    #[test]
    fn quotas_floor_plus_remainder() {
        assert_eq!(class_quotas(10, &[true; 4]), vec![3, 3, 2, 2]);
        assert_eq!(class_quotas(8, &[true; 4]), vec![2, 2, 2, 2]);
    }

    #[test]
    fn forfeited_quota_is_redistributed_evenly() {
        let q = class_quotas(10, &[false, true, true, true]);
        assert_eq!(q.iter().sum::<usize>(), 10);
        assert_eq!(q[0], 0);
        let live: Vec<usize> = q[1..].to_vec();
        assert!(live.iter().max().unwrap() - live.iter().min().unwrap() <= 1);

        let q = class_quotas(11, &[true, false, false, true]);
        assert_eq!(q, vec![6, 0, 0, 5]);
        assert_eq!(class_quotas(5, &[false, false]), vec![0, 0]);
    }

    #[test]
    fn equal_stock_and_quota_uses_every_document_once() {
        let p = pool(vec![vec![0.5; 3], vec![0.5; 3]]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pairs = sample_training_pairs(&p, 6, &mut rng).unwrap();
        pairs.sort_unstable();
        assert_eq!(pairs, vec![(0, 0), (1, 0), (2, 0), (3, 1), (4, 1), (5, 1)]);
    }

    #[test]
    fn small_class_is_upsampled() {
        let p = pool(vec![vec![0.9, 0.8], vec![0.6; 10]]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pairs = sample_training_pairs(&p, 6, &mut rng).unwrap();
        let class0: Vec<usize> = pairs.iter().filter(|p| p.1 == 0).map(|p| p.0).collect();
        assert_eq!(class0.len(), 3);
        assert!(class0.contains(&0) && class0.contains(&1));
        let class1: Vec<usize> = pairs.iter().filter(|p| p.1 == 1).map(|p| p.0).collect();
        let mut dedup = class1.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), 3, "no replacement while stock lasts");
    }

    #[test]
    fn confident_documents_are_preferred() {
        let p = pool(vec![vec![0.99, 0.01, 0.01, 0.01]]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut hits = 0;
        for _ in 0..500 {
            if sample_training_pairs(&p, 1, &mut rng).unwrap()[0].0 == 0 {
                hits += 1;
            }
        }
        assert!(hits > 450, "{hits}");
    }

    #[test]
    fn sampling_errors() {
        let empty = pool(vec![vec![], vec![]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample_training_pairs(&empty, 4, &mut rng), Err(Error::EmptyPool)));
        let p = pool(vec![vec![0.5], vec![0.5], vec![0.5]]);
        assert!(matches!(
            sample_training_pairs(&p, 2, &mut rng),
            Err(Error::InvalidSample(_))
        ));
    }

    #[test]
    fn sampling_empty_class_keeps_total() {
        let p = pool(vec![vec![0.4; 5], vec![], vec![0.7; 2]]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pairs = sample_training_pairs(&p, 9, &mut rng).unwrap();
        assert_eq!(pairs.len(), 9);
        let c0 = pairs.iter().filter(|p| p.1 == 0).count();
        let c2 = pairs.iter().filter(|p| p.1 == 2).count();
        assert!(c0.abs_diff(c2) <= 1 && c0 + c2 == 9);
    }

    #[test]
    fn batch_partition_arithmetic() {
        assert_eq!(batch_count(64, 32), 2);
        assert_eq!(batch_count(65, 32), 3);
        assert_eq!(batch_count(1, 32), 1);
    }

    /// Encoder that returns a fixed vector per text and records its inputs.
    struct Recording {
        table: Vec<(Vec<usize>, Vec<f64>)>,
        seen: RefCell<Vec<Vec<usize>>>,
    }

    impl TextEncoder for Recording {
        fn encode_batch(&self, inputs: &[TextInput<'_>]) -> Result<Vec<Embedding>> {
            inputs
                .iter()
                .map(|i| {
                    self.seen.borrow_mut().push(i.tokens.to_vec());
                    let v = self
                        .table
                        .iter()
                        .find(|(t, _)| t == i.tokens)
                        .map(|(_, v)| v.clone())
                        .unwrap_or_else(|| vec![0.0, 0.0]);
                    Embedding::normalize(v)
                })
                .collect()
        }
    }

    fn two_class_setup() -> (Vec<Document>, PromptTokens) {
        let labels = LabelPromptSet::new(vec!["red".into(), "blue".into()], vec!["[desc]".into()]).unwrap();
        let texts = ["red apple. red car.", "blue sky. blue sea.", "red one. blue two.", "grey"];
        let vocab = Vocabulary::build(texts.iter().copied().chain(labels.texts()));
        let docs = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("d{i}"), *t, Some(i % 2), &vocab).unwrap())
            .collect();
        (docs, labels.tokenize(&vocab))
    }

    #[test]
    fn pseudo_labels_come_from_clean_documents() {
        let (docs, prompts) = two_class_setup();
        let table = vec![
            (prompts.get(0, 0).tokens.clone(), vec![1.0, 0.0]),
            (prompts.get(1, 0).tokens.clone(), vec![0.0, 1.0]),
            (docs[0].tokens(), vec![1.0, 0.0]),
            (docs[1].tokens(), vec![0.0, 1.0]),
            (docs[2].tokens(), vec![0.9, 0.1]),
        ];
        let enc = Recording {
            table,
            seen: RefCell::new(vec![]),
        };
        let pool = generate_pseudo_labels(&docs, &prompts, &enc, 1.0).unwrap();
        // doc 3 maps to the zero vector and is excluded
        assert_eq!(pool.excluded, vec![3]);
        assert_eq!(pool.per_class[0].iter().map(|p| p.0).collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(pool.per_class[1].iter().map(|p| p.0).collect::<Vec<_>>(), vec![1]);
        // cosine 1 against the own prompt, 0 against the other
        let e = std::f64::consts::E;
        assert!((pool.per_class[0][0].1 - e / (e + 1.0)).abs() < 1e-12);

        let clean: Vec<Vec<usize>> = docs.iter().map(Document::tokens).collect();
        let prompt_tokens: Vec<Vec<usize>> =
            (0..2).map(|c| prompts.get(c, 0).tokens.clone()).collect();
        for seen in enc.seen.borrow().iter() {
            assert!(clean.contains(seen) || prompt_tokens.contains(seen), "{seen:?}");
        }
    }

    #[test]
    fn pseudo_label_confidence_for_known_scores() {
        // scores (0.9, 0.1) at temperature 1
        let (docs, prompts) = two_class_setup();
        let doc_vec = vec![0.9, (1.0f64 - 0.81).sqrt()];
        let other = {
            // unit vector with cosine 0.1 to doc_vec and orthogonal solution
            let (a, b) = (doc_vec[0], doc_vec[1]);
            let c: f64 = 0.1;
            let s = (1.0 - c * c).sqrt();
            vec![c * a - s * b, c * b + s * a]
        };
        let table = vec![
            (prompts.get(0, 0).tokens.clone(), vec![1.0, 0.0]),
            (prompts.get(1, 0).tokens.clone(), other),
            (docs[0].tokens(), doc_vec),
        ];
        let enc = Recording {
            table,
            seen: RefCell::new(vec![]),
        };
        let pool = generate_pseudo_labels(&docs[..1], &prompts, &enc, 1.0).unwrap();
        let (_, conf) = pool.per_class[0][0];
        assert!((conf - 0.6899744811276125).abs() < 1e-9, "{conf}");
        assert!(pool.per_class[1].is_empty());
    }

    #[test]
    fn config_validation() {
        let c = SelfTrainConfig::default();
        assert_eq!(c.resolve(1000).unwrap(), (50, 200));
        let bad_growth = SelfTrainConfig {
            growth: 1.0,
            ..c.clone()
        };
        assert!(bad_growth.resolve(1000).is_err());
        let bad_order = SelfTrainConfig {
            initial_samples: SampleSize::Count(300),
            ..c.clone()
        };
        assert!(bad_order.resolve(1000).is_err());
        assert!(c.resolve(10).is_err());
    }
}
