//! Strict `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored, as is anything after
//! a ` #` on a value line. Unknown or repeated keys are errors. Relative
//! paths resolve against the directory holding the file.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Vocabulary;
use crate::encoder::ReferenceEncoderParams;
use crate::error::{Error, Result};
use crate::io::dataset::DatasetSpec;
use crate::io::synth::{prior_init, PriorConfig, SynthConfig};
use crate::matching::KeyMode;
use crate::selftrain::{SampleSize, SelfTrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    Random,
    /// Partially informative start for synthetic corpora.
    SyntheticPrior,
    Checkpoint(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub dim: usize,
    pub init: InitMode,
    pub prior: PriorConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 16,
            init: InitMode::Random,
            prior: PriorConfig::default(),
        }
    }
}

impl ModelConfig {
    /// Fresh parameters for `Random` or `SyntheticPrior` initialization,
    /// drawn from a stream of the run generator separate from training.
    pub fn fresh_params(&self, vocab: &Vocabulary, classes: usize, seed: u64) -> Result<ReferenceEncoderParams> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        match &self.init {
            InitMode::Random => ReferenceEncoderParams::init(vocab.len(), self.dim, &mut rng),
            InitMode::SyntheticPrior => prior_init(vocab, classes, self.dim, &self.prior, &mut rng),
            InitMode::Checkpoint(path) => Err(Error::Config(format!(
                "parameters for {} come from the checkpoint",
                path.display()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub train: SelfTrainConfig,
    pub dataset: DatasetSpec,
    pub synth: SynthConfig,
    pub model: ModelConfig,
}

struct Entry<'a> {
    key: &'a str,
    value: &'a str,
    line: usize,
}

impl Entry<'_> {
    fn parse<T: FromStr>(&self, expected: &'static str) -> Result<T> {
        self.value.parse().map_err(|_| self.type_error(expected))
    }

    fn type_error(&self, expected: &'static str) -> Error {
        Error::Type {
            key: self.key.to_string(),
            line: self.line,
            expected,
            value: self.value.to_string(),
        }
    }

    fn flag(&self) -> Result<bool> {
        match self.value {
            "on" | "true" | "yes" | "1" => Ok(true),
            "off" | "false" | "no" | "0" => Ok(false),
            _ => Err(self.type_error("on or off")),
        }
    }

    fn sample_size(&self) -> Result<SampleSize> {
        const EXPECTED: &str = "a count or a fraction of the corpus such as 0.2N";
        if let Some(frac) = self.value.strip_suffix('N') {
            let f: f64 = frac.trim().parse().map_err(|_| self.type_error(EXPECTED))?;
            if !(f > 0.0 && f <= 1.0) {
                return Err(self.type_error(EXPECTED));
            }
            Ok(SampleSize::Fraction(f))
        } else {
            Ok(SampleSize::Count(self.parse(EXPECTED)?))
        }
    }

    fn path(&self, base: &Path) -> PathBuf {
        let p = PathBuf::from(self.value);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    }
}

fn strip_quotes(v: &str) -> &str {
    v.strip_prefix('"')
        .and_then(|v| v.strip_suffix('"'))
        .unwrap_or(v)
}

/// Parses configuration text; relative paths are joined onto `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen = HashSet::new();
    let mut synth_seed = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let trimmed = trimmed.split(" #").next().unwrap_or(trimmed).trim();
        let (key, value) = trimmed.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {line}: expected `key = value`, got {trimmed:?}"))
        })?;
        let e = Entry {
            key: key.trim(),
            value: strip_quotes(value.trim()),
            line,
        };
        if !seen.insert(e.key.to_string()) {
            return Err(Error::Config(format!("line {line}: key `{}` set twice", e.key)));
        }
        apply(&mut cfg, &e, base, &mut synth_seed)?;
    }
    cfg.synth.seed = synth_seed.unwrap_or(cfg.train.seed);
    Ok(cfg)
}

fn apply(cfg: &mut RunConfig, e: &Entry<'_>, base: &Path, synth_seed: &mut Option<u64>) -> Result<()> {
    let t = &mut cfg.train;
    let s = &mut cfg.synth;
    let m = &mut cfg.model;
    let d = &mut cfg.dataset;
    match e.key {
        "seed" => t.seed = e.parse("an unsigned integer")?,
        "loss_mode" => t.loss_mode = e.parse("plct, lct, pcl or lct_plus_pcl")?,
        "key_mode" => {
            t.key_mode = match e.value {
                "salient" => KeyMode::Salient,
                "random" => KeyMode::Random,
                _ => return Err(e.type_error("salient or random")),
            }
        }
        "augment" => t.augment = e.flag()?,
        "temperature" => t.temperature = e.parse("a number")?,
        "batch_size" => t.batch_size = e.parse("a positive integer")?,
        "learning_rate" => t.optimizer.learning_rate = e.parse("a number")?,
        "epsilon" => t.optimizer.epsilon = e.parse("a number")?,
        "weight_decay" => t.optimizer.weight_decay = e.parse("a number")?,
        "beta1" => t.optimizer.beta1 = e.parse("a number")?,
        "beta2" => t.optimizer.beta2 = e.parse("a number")?,
        "epochs" => t.epochs = e.parse("a positive integer")?,
        "d" => t.growth = e.parse("a number")?,
        "t0" => t.initial_samples = e.sample_size()?,
        "t_cap" => t.sample_cap = e.sample_size()?,
        "max_rounds" => t.max_rounds = e.parse("a positive integer")?,

        "dim" => m.dim = e.parse("a positive integer")?,
        "init" => {
            m.init = match e.value {
                "random" => InitMode::Random,
                "synthetic_prior" => InitMode::SyntheticPrior,
                _ => match e.value.strip_prefix("checkpoint:") {
                    Some(p) => InitMode::Checkpoint(Entry { value: p, ..*e }.path(base)),
                    None => return Err(e.type_error("random, synthetic_prior or checkpoint:<path>")),
                },
            }
        }
        "prior_strength" => m.prior.strength = e.parse("a number")?,
        "prior_coverage" => m.prior.coverage = e.parse("a number")?,
        "prior_shared_bias" => m.prior.shared_bias = e.parse("a number")?,

        "format" => d.format = e.parse("csv, jsonl or synthetic")?,
        "path" => d.path = Some(e.path(base)),
        "text_columns" => {
            let cols = e
                .value
                .split(',')
                .map(|c| c.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| e.type_error("comma-separated column indices"))?;
            d.text_columns = Some(cols);
        }
        "label_column" => d.label_column = e.parse("a column index")?,
        "descriptions" => d.descriptions = Some(e.path(base)),
        "templates" => d.templates = Some(e.path(base)),

        "synth_classes" => s.classes = e.parse("a positive integer")?,
        "synth_docs_per_class" => s.docs_per_class = e.parse("a positive integer")?,
        "synth_vocab_per_class" => s.vocab_per_class = e.parse("a positive integer")?,
        "synth_shared_vocab" => s.shared_vocab = e.parse("an integer")?,
        "synth_sentences_per_doc" => s.sentences_per_doc = e.parse("a positive integer")?,
        "synth_words_per_sentence" => s.words_per_sentence = e.parse("a positive integer")?,
        "synth_noise_rate" => s.noise_rate = e.parse("a number")?,
        "synth_seed" => *synth_seed = Some(e.parse("an unsigned integer")?),
        _ => {
            return Err(Error::UnknownKey {
                key: e.key.to_string(),
                line: e.line,
            })
        }
    }
    Ok(())
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}
