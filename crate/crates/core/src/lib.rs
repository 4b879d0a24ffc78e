//! Zero-shot text classification as prompt-enhanced embedding matching,
//! refined by contrastive self-training on pseudo-labels.
//!
//! Documents and label prompts share one encoder. A document is assigned
//! the class whose prompts it is most similar to; the encoder is then
//! trained to pull augmented documents toward the key sentences and prompts
//! of their pseudo-class, and the cycle repeats on a growing sample.

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod io;
pub mod losses;
pub mod matching;
pub mod selftrain;

pub use error::{Error, ErrorClass, Result};
