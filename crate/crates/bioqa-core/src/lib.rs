//! Dataset engineering and evaluation for biomedical extractive question
//! answering.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! - [`model`] — shared domain types (questions, snippets, answer spans).
//! - [`formats`] — readers/writers for the BioASQ and SQuAD JSON schemas and
//!   a prediction-file format shaped like BioASQ system responses.
//! - [`convert`] — BioASQ → SQuAD conversion under three context strategies
//!   with boundary-aware exact-span matching.
//! - [`context`] — sentence segmentation, minimal-context reduction, and
//!   context-length distribution reports.
//! - [`answerability`] — unanswerable-rate auditing with a match-failure
//!   taxonomy.
//! - [`metrics`] — Yes/No, Factoid, and List scoring plus the challenge
//!   macro average.
//! - [`heads`] — numerically careful classifier/span heads, losses, span
//!   decoding, and gradient checking.
//! - [`encoder`] / [`harness`] — a deterministic toy encoder and a
//!   sequential fine-tuning harness that carries encoder state across
//!   stages.
//! - [`synthetic`] — deterministic corpus generators used by fixtures,
//!   tests, and benchmarks.

pub mod answerability;
pub mod context;
pub mod convert;
pub mod encoder;
pub mod formats;
pub mod harness;
pub mod heads;
pub mod metrics;
pub mod model;
pub mod normalize;
pub mod synthetic;

pub use formats::predictions::{parse_predictions, write_predictions, Prediction, PredictionFile};
pub use formats::squad::{
    parse_squad, write_squad, SquadArticle, SquadDataset, SquadParagraph, SquadQa,
};
pub use formats::{bioasq::parse_bioasq, FormatError};
pub use model::{
    validate_dataset, AnswerSpan, BinaryInstance, BioasqQuestion, GoldAnswer, QuestionType,
    Snippet, SquadInstance, Violation,
};
