//! Zero-shot prediction by matching document embeddings against label-prompt
//! embeddings.

use rand::Rng;

use crate::corpus::{Document, PromptTokens};
use crate::encoder::{Embedding, TextEncoder, TextInput};
use crate::error::{Error, Result};

/// How the key sentence of a document is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyMode {
    /// The sentence scoring highest against the pseudo-label prompts.
    Salient,
    /// A uniformly random sentence.
    Random,
}

/// Mean cosine similarity between a document and the T prompts of one class.
///
/// Cosines are summed in ascending order so the result does not depend on
/// template order.
pub fn score(doc: &Embedding, prompts: &[Embedding]) -> Result<f64> {
    if prompts.is_empty() {
        return Err(Error::EmptyLabelSet);
    }
    let mut cosines = prompts
        .iter()
        .map(|p| doc.cosine(p))
        .collect::<Result<Vec<f64>>>()?;
    cosines.sort_by(f64::total_cmp);
    Ok(cosines.iter().sum::<f64>() / prompts.len() as f64)
}

/// Index of the largest value; ties go to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Softmax of `scores / temperature`.
pub fn confidence_distribution(scores: &[f64], temperature: f64) -> Vec<f64> {
    debug_assert!(temperature > 0.0);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores
        .iter()
        .map(|s| ((s - max) / temperature).exp())
        .collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Embeddings of every rendered label prompt, `[class][template]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptEmbeddings {
    per_class: Vec<Vec<Embedding>>,
}

impl PromptEmbeddings {
    pub fn encode<E: TextEncoder + ?Sized>(prompts: &PromptTokens, encoder: &E) -> Result<Self> {
        let inputs: Vec<TextInput<'_>> = prompts
            .prompts
            .iter()
            .flatten()
            .map(|s| TextInput::new(&s.text, &s.tokens))
            .collect();
        let mut flat = encoder.encode_batch(&inputs)?.into_iter();
        let t = prompts.num_templates();
        let per_class = (0..prompts.num_classes())
            .map(|_| flat.by_ref().take(t).collect())
            .collect();
        Ok(Self { per_class })
    }

    pub fn from_vectors(per_class: Vec<Vec<Embedding>>) -> Result<Self> {
        if per_class.is_empty() || per_class.iter().any(Vec::is_empty) {
            return Err(Error::EmptyLabelSet);
        }
        Ok(Self { per_class })
    }

    pub fn num_classes(&self) -> usize {
        self.per_class.len()
    }

    pub fn class(&self, class: usize) -> &[Embedding] {
        &self.per_class[class]
    }
}

/// Predicted class together with every class score.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub scores: Vec<f64>,
}

pub fn class_scores(doc: &Embedding, prompts: &PromptEmbeddings) -> Result<Vec<f64>> {
    prompts.per_class.iter().map(|p| score(doc, p)).collect()
}

pub fn predict_embedding(doc: &Embedding, prompts: &PromptEmbeddings) -> Result<Prediction> {
    let scores = class_scores(doc, prompts)?;
    Ok(Prediction {
        class: argmax(&scores),
        scores,
    })
}

/// Encodes the clean document and picks the best-scoring class.
pub fn predict<E: TextEncoder + ?Sized>(
    doc: &Document,
    prompts: &PromptEmbeddings,
    encoder: &E,
) -> Result<Prediction> {
    let text = doc.text();
    let tokens = doc.tokens();
    let embedding = encoder.encode_one(TextInput::new(&text, &tokens))?;
    predict_embedding(&embedding, prompts)
}

/// Score of every sentence of `doc` against one class's prompts.
pub fn sentence_scores<E: TextEncoder + ?Sized>(
    doc: &Document,
    class_prompts: &[Embedding],
    encoder: &E,
) -> Result<Vec<f64>> {
    let inputs: Vec<TextInput<'_>> = doc
        .sentences
        .iter()
        .map(|s| TextInput::new(&s.text, &s.tokens))
        .collect();
    encoder
        .encode_batch(&inputs)?
        .iter()
        .map(|e| score(e, class_prompts))
        .collect()
}

/// Chooses the key sentence of `doc` for its pseudo-label.
pub fn select_key_sentence<E, R>(
    doc: &Document,
    class_prompts: &[Embedding],
    encoder: &E,
    mode: KeyMode,
    rng: &mut R,
) -> Result<usize>
where
    E: TextEncoder + ?Sized,
    R: Rng + ?Sized,
{
    let n = doc.num_sentences();
    match mode {
        KeyMode::Random => Ok(rng.gen_range(0..n)),
        KeyMode::Salient if n == 1 => Ok(0),
        KeyMode::Salient => Ok(argmax(&sentence_scores(doc, class_prompts, encoder)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::encoder::ReferenceEncoderParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(v: &[f64]) -> Embedding {
        Embedding::normalize(v.to_vec()).unwrap()
    }

    /// Unit vector at angle whose cosine with (1, 0) is `c`.
    fn with_cosine(c: f64) -> Embedding {
        unit(&[c, (1.0 - c * c).sqrt()])
    }

    #[test]
    fn score_cases() {
        let a = unit(&[0.3, 0.4]);
        assert!((score(&a, &[a.clone()]).unwrap() - 1.0).abs() < 1e-15);
        let x = unit(&[1.0, 0.0]);
        let s = score(&x, &[with_cosine(0.2), with_cosine(0.6)]).unwrap();
        assert!((s - 0.4).abs() < 1e-12);
        assert_eq!(score(&x, &[unit(&[0.0, 1.0])]).unwrap(), 0.0);
        assert!(matches!(
            score(&x, &[unit(&[0.0, 1.0, 0.0])]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn score_ignores_template_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let doc = unit(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.3]);
            let mut prompts: Vec<Embedding> = (0..5)
                .map(|_| unit(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.1]))
                .collect();
            let a = score(&doc, &prompts).unwrap();
            prompts.reverse();
            prompts.swap(0, 2);
            assert_eq!(score(&doc, &prompts).unwrap(), a);
            assert!((-1.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.3, 0.3, 0.1]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.3]), 1);
        assert_eq!(argmax(&[-2.0]), 0);
    }

    #[test]
    fn predicts_closest_class() {
        let prompts =
            PromptEmbeddings::from_vectors(vec![vec![unit(&[1.0, 0.0])], vec![unit(&[0.0, 1.0])]])
                .unwrap();
        let p = predict_embedding(&unit(&[0.6, 0.8]), &prompts).unwrap();
        assert_eq!(p.class, 1);
        assert!((p.scores[0] - 0.6).abs() < 1e-12 && (p.scores[1] - 0.8).abs() < 1e-12);

        let single = PromptEmbeddings::from_vectors(vec![vec![unit(&[1.0, 0.0])]]).unwrap();
        assert_eq!(predict_embedding(&unit(&[-1.0, 0.1]), &single).unwrap().class, 0);
    }

    #[test]
    fn confidence_cases() {
        let uniform = confidence_distribution(&[0.2; 4], 0.07);
        assert!(uniform.iter().all(|p| (p - 0.25).abs() < 1e-12));

        let e = std::f64::consts::E;
        let p = confidence_distribution(&[1.0, 0.0], 1.0);
        assert!((p[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((p[0] - 0.7311).abs() < 1e-4 && (p[1] - 0.2689).abs() < 1e-4);

        let flat = confidence_distribution(&[0.9, -0.5, 0.1], 1e6);
        assert!(flat.iter().all(|q| (q - 1.0 / 3.0).abs() < 1e-3));
    }

    #[test]
    fn confidence_preserves_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let scores: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let temp = 10f64.powf(rng.gen_range(-3.0..3.0));
            let p = confidence_distribution(&scores, temp);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&q| q >= 0.0));
            let top = argmax(&scores);
            assert!(p.iter().all(|&q| q <= p[top]));
        }
    }

    /// Three sentences whose tokens map to orthogonal rows.
    fn orthogonal_setup() -> (Document, ReferenceEncoderParams) {
        let vocab = Vocabulary::from_ordered(
            ["<unk>", "aa", "bb", "cc"].iter().map(|s| s.to_string()).collect(),
        )
        .unwrap();
        let doc = Document::new("d", "aa aa. bb. cc cc cc.", None, &vocab).unwrap();
        let e = vec![
            0.0, 0.0, 1.0, //
            1.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, //
            0.0, 0.0, 1.0,
        ];
        let w = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        (doc, ReferenceEncoderParams::new(4, 3, e, w).unwrap())
    }

    #[test]
    fn salient_key_is_the_sentence_matching_the_prompt() {
        let (doc, enc) = orthogonal_setup();
        assert_eq!(doc.num_sentences(), 3);
        let prompt = enc.encode(&doc.sentences[1].tokens).unwrap();
        let scores = sentence_scores(&doc, std::slice::from_ref(&prompt), &enc).unwrap();
        assert_eq!(scores, vec![0.0, 1.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let k = select_key_sentence(&doc, &[prompt], &enc, KeyMode::Salient, &mut rng).unwrap();
        assert_eq!(k, 1);
    }

    #[test]
    fn random_key_is_uniform_over_sentences() {
        let (doc, enc) = orthogonal_setup();
        let prompt = unit(&[1.0, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = [0usize; 3];
        for _ in 0..3000 {
            let k = select_key_sentence(&doc, std::slice::from_ref(&prompt), &enc, KeyMode::Random, &mut rng)
                .unwrap();
            seen[k] += 1;
        }
        assert!(seen.iter().all(|&c| (900..1100).contains(&c)), "{seen:?}");
    }

    #[test]
    fn single_sentence_key_is_zero() {
        let vocab = Vocabulary::build(["just one sentence"]);
        let doc = Document::new("d", "just one sentence", None, &vocab).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = ReferenceEncoderParams::init(vocab.len(), 3, &mut rng).unwrap();
        let p = unit(&[1.0, 0.0, 0.0]);
        for mode in [KeyMode::Salient, KeyMode::Random] {
            let k = select_key_sentence(&doc, std::slice::from_ref(&p), &enc, mode, &mut rng).unwrap();
            assert_eq!(k, 0);
        }
    }

    #[test]
    fn predict_on_documents_is_consistent_with_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let vocab = Vocabulary::build(["alpha beta gamma delta epsilon zeta eta theta"]);
        let enc = ReferenceEncoderParams::init(vocab.len(), 4, &mut rng).unwrap();
        let labels = crate::corpus::LabelPromptSet::new(
            vec!["alpha".into(), "delta".into(), "eta".into()],
            vec!["[desc].".into(), "about [desc] theta.".into()],
        )
        .unwrap();
        let prompts = PromptEmbeddings::encode(&labels.tokenize(&vocab), &enc).unwrap();
        for text in ["alpha beta. gamma.", "zeta eta theta", "delta delta. epsilon!"] {
            let doc = Document::new("x", text, None, &vocab).unwrap();
            let p = predict(&doc, &prompts, &enc).unwrap();
            assert_eq!(p.class, argmax(&p.scores));
            assert_eq!(p.scores.len(), 3);
        }
    }
}
