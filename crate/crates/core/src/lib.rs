//! Summarization evaluation metrics and their meta-evaluation against
//! crowd-sourced focus and coverage judgments in several languages.

pub mod batch;
pub mod embedding;
pub mod error;
pub mod lexical;
pub mod metaeval;
pub mod neural;
pub mod score;
pub mod stats;
pub mod textnorm;

pub use error::{Error, Result};
pub use score::MetricScore;
pub use textnorm::{tokenize, LangCode, TokenSequence};
