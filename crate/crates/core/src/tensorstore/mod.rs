//! On-disk dumps of activations and attention, and subword aggregation.

mod aggregate;
mod dump;
pub mod format;
mod manifest;
mod types;
mod validate;

pub use aggregate::{aggregate_subword_attention, aggregate_subword_representations};
pub use dump::{
    read_activation_dump, read_attention_dump, write_attention_dump, write_representation_dump,
    Dump,
};
pub use manifest::{
    subword_counts, CorpusInfo, DumpKind, DumpManifest, LayerEntry, SubwordSpan, FORMAT_VERSION,
};
pub use types::{ActivationMatrix, AttentionLayer, RowViolation, ROW_SUM_TOLERANCE};
pub use validate::{validate_dump, ValidationReport, Violation};
