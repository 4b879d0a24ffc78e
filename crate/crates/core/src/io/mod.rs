//! Datasets, synthetic corpora, checkpoints and configuration files.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod synth;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION, HEADER_LEN, MAGIC};
pub use config::{load_config, parse_config, InitMode, ModelConfig, RunConfig};
pub use dataset::{load_dataset, load_dataset_with_vocab, load_labels, read_records, DatasetFormat, DatasetSpec, LoadedDataset, RawRecord};
pub use synth::{counting_oracle, generate_synthetic_corpus, prior_init, PriorConfig, SynthConfig, SyntheticCorpus};
