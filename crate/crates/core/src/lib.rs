//! Similarity between layers of neural language models.
//!
//! Layers come from on-disk dumps ([`tensorstore`]) and are compared at three
//! granularities: individual neurons ([`neuron`]), whole representations
//! ([`rep`]) and attention heads ([`attn`]). [`analysis`] assembles the
//! pairwise scores into heatmaps and per-layer localization profiles.

pub mod analysis;
pub mod attn;
pub mod error;
pub mod linalg;
pub mod neuron;
pub mod parallel;
pub mod rep;
pub mod synth;
pub mod tensorstore;

pub use analysis::{Analyzer, LayerRef, Measure, MeasureOptions, SimilarityHeatmap};
pub use error::{Error, Result};
pub use parallel::Parallelism;
pub use tensorstore::{ActivationMatrix, AttentionLayer};
