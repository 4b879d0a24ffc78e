use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use pesco::corpus::{Document, Vocabulary};
use pesco::encoder::{ReferenceEncoderParams, RemoteEncoder, TextEncoder};
use pesco::eval::evaluate;
use pesco::io::{
    generate_synthetic_corpus, load_checkpoint, load_config, load_dataset_with_vocab, load_labels,
    read_records, save_checkpoint, DatasetFormat, DatasetSpec, InitMode, LoadedDataset, RunConfig,
};
use pesco::matching::{confidence_distribution, predict as predict_doc, PromptEmbeddings};
use pesco::selftrain::self_train;
use pesco::{Error, ErrorClass, Result};

pub fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numerical => 3,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::File {
        path: dir.to_path_buf(),
        source: e,
    })
}

/// A file-based spec for `path`, keeping the configured format unless it
/// names the synthetic generator.
fn file_spec(dataset: &DatasetSpec, path: &Path) -> DatasetSpec {
    let format = match dataset.format {
        DatasetFormat::Synthetic if path.extension().is_some_and(|e| e == "jsonl") => DatasetFormat::Jsonl,
        DatasetFormat::Synthetic => DatasetFormat::Csv,
        f => f,
    };
    DatasetSpec {
        format,
        path: Some(path.to_path_buf()),
        ..dataset.clone()
    }
}

/// The configured training corpus, tokenized with `vocab` when given.
fn training_data(cfg: &RunConfig, vocab: Option<&Vocabulary>) -> Result<LoadedDataset> {
    match cfg.dataset.format {
        DatasetFormat::Synthetic => {
            let corpus = generate_synthetic_corpus(&cfg.synth)?;
            match vocab {
                None => corpus.load(),
                Some(v) => Ok(LoadedDataset {
                    documents: corpus.documents(v)?,
                    labels: corpus.labels()?,
                    vocab: v.clone(),
                }),
            }
        }
        _ => load_dataset_with_vocab(&cfg.dataset, vocab),
    }
}

pub fn predict(
    config: &Path,
    checkpoint: Option<&Path>,
    remote: Option<&str>,
    input: &Path,
    out: &Path,
) -> Result<()> {
    let cfg = load_config(config)?;
    let spec = file_spec(&cfg.dataset, input);
    let temperature = cfg.train.temperature;
    let mut lines = Vec::new();
    match (checkpoint, remote) {
        (_, Some(endpoint)) => {
            let data = load_dataset_with_vocab(&spec, None)?;
            let encoder = RemoteEncoder::connect(endpoint)?;
            predict_all(&data, &encoder, temperature, &mut lines)?;
        }
        (Some(path), None) => {
            let ckpt = load_checkpoint(path)?;
            let data = load_dataset_with_vocab(&spec, Some(&ckpt.vocab))?;
            predict_all(&data, &ckpt.params, temperature, &mut lines)?;
        }
        (None, None) => {
            return Err(Error::Config("predict needs --checkpoint or --remote".into()));
        }
    }
    write_file(out, lines.concat().as_bytes())
}

fn predict_all<E: TextEncoder + ?Sized>(
    data: &LoadedDataset,
    encoder: &E,
    temperature: f64,
    lines: &mut Vec<String>,
) -> Result<()> {
    let prompts = PromptEmbeddings::encode(&data.labels.tokenize(&data.vocab), encoder)?;
    for doc in &data.documents {
        let p = predict_doc(doc, &prompts, encoder)?;
        let confidence = confidence_distribution(&p.scores, temperature)[p.class];
        lines.push(format!("{}\t{}\t{confidence:.6}\n", doc.id, p.class));
    }
    Ok(())
}

pub fn selftrain(config: &Path, out_dir: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let (data, params) = match &cfg.model.init {
        InitMode::Checkpoint(path) => {
            let ckpt = load_checkpoint(path)?;
            (training_data(&cfg, Some(&ckpt.vocab))?, ckpt.params)
        }
        _ => {
            let data = training_data(&cfg, None)?;
            let params = cfg
                .model
                .fresh_params(&data.vocab, data.labels.num_classes(), cfg.train.seed)?;
            (data, params)
        }
    };
    create_dir(out_dir)?;
    let prompts = data.labels.tokenize(&data.vocab);
    let labelled = data.documents.iter().any(|d| d.gold_label.is_some());
    let eval_docs: Option<&[Document]> = labelled.then_some(&data.documents[..]);

    let outcome = self_train(&data.documents, &prompts, params, &cfg.train, eval_docs);
    let (reports, result) = match outcome {
        Ok(out) => (out.reports.clone(), Ok(out)),
        Err(aborted) => (aborted.reports, Err(aborted.error)),
    };
    let mut log = String::new();
    for r in &reports {
        let line = r.to_record();
        println!("{line}");
        eprintln!("round {} took {:.2}s", r.round, r.seconds);
        log.push_str(&line);
        log.push('\n');
    }
    write_file(&out_dir.join("rounds.log"), log.as_bytes())?;
    let out = result?;

    save_checkpoint(out_dir.join("model.pesc"), &out.params, &data.vocab)?;
    if let Some(eval) = &out.final_eval {
        let text = format!("{}{}", eval.to_records(), eval.confusion_table());
        write_file(&out_dir.join("eval.txt"), text.as_bytes())?;
        let initial = out.initial_accuracy.map_or(String::new(), |a| format!(" initial_accuracy={a:.6}"));
        println!("final rounds={} accuracy={:.6}{initial}", out.reports.len(), eval.accuracy);
    } else {
        println!("final rounds={}", out.reports.len());
    }
    Ok(())
}

/// Lines `doc_id<TAB>class[<TAB>confidence]`.
fn read_predictions(path: &Path) -> Result<Vec<(String, usize)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let mut fields = l.split('\t');
            let id = fields.next().unwrap_or_default().to_string();
            let class = fields
                .next()
                .and_then(|c| c.trim().parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: i as u64 + 1,
                    message: format!("expected doc_id<TAB>class, got {l:?}"),
                })?;
            Ok((id, class))
        })
        .collect()
}

pub fn eval(pred: &Path, gold: &Path, config: Option<&Path>) -> Result<()> {
    let cfg = match config {
        Some(c) => load_config(c)?,
        None => RunConfig::default(),
    };
    let spec = file_spec(&cfg.dataset, gold);
    let known_classes = match (&spec.descriptions, &spec.templates) {
        (Some(_), Some(_)) => Some(load_labels(&spec)?.num_classes()),
        _ => None,
    };
    let records = read_records(&spec, known_classes.unwrap_or(u32::MAX as usize))?;
    let predictions = read_predictions(pred)?;
    if predictions.len() != records.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} gold documents",
            predictions.len(),
            records.len()
        )));
    }
    let mut preds = Vec::with_capacity(records.len());
    let mut golds = Vec::with_capacity(records.len());
    for ((id, class), rec) in predictions.iter().zip(&records) {
        if *id != rec.id {
            return Err(Error::Shape(format!("prediction for {id:?} aligned with gold document {:?}", rec.id)));
        }
        let gold = rec.label.ok_or_else(|| Error::Shape(format!("gold document {:?} has no label", rec.id)))?;
        preds.push(*class);
        golds.push(gold);
    }
    let classes = known_classes.unwrap_or_else(|| preds.iter().chain(&golds).max().map_or(1, |m| m + 1));
    let result = evaluate(&preds, &golds, classes)?;
    print!("{}{}", result.to_records(), result.confusion_table());
    Ok(())
}

pub fn gen_synth(config: &Path, out_dir: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let corpus = generate_synthetic_corpus(&cfg.synth)?;
    create_dir(out_dir)?;
    write_file(&out_dir.join("data.csv"), &corpus.to_csv()?)?;
    write_file(&out_dir.join("descriptions.txt"), (corpus.descriptions.join("\n") + "\n").as_bytes())?;
    write_file(&out_dir.join("templates.txt"), (corpus.templates.join("\n") + "\n").as_bytes())?;
    let dataset_conf = "format = csv\npath = data.csv\ndescriptions = descriptions.txt\ntemplates = templates.txt\n";
    write_file(&out_dir.join("dataset.conf"), dataset_conf.as_bytes())?;
    println!("wrote {} documents to {}", corpus.records.len(), out_dir.display());
    Ok(())
}

pub fn inspect(checkpoint: &Path) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let stdout = std::io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    let p: &ReferenceEncoderParams = &ckpt.params;
    writeln!(w, "version={}", ckpt.version)?;
    writeln!(w, "V={}", p.vocab_size())?;
    writeln!(w, "D={}", p.dim())?;
    writeln!(w, "vocab_size={}", ckpt.vocab.len())?;
    w.flush()?;
    Ok(())
}
