//! Normalization, edit alignment and string similarity shared by the metrics.

mod edit;
mod normalize;
mod sentences;

#[cfg(test)]
pub(crate) use edit::align_by;
pub(crate) use normalize::is_apostrophe;

pub use edit::{edit_distance, levenshtein, Alignment, EditOp, OpCounts};
pub use normalize::{normalize, NormSpec};
pub use sentences::{align_sentences, similarity, split_sentences, SentencePair, SentencePairing};
