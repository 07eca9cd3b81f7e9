use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DumpKind {
    Representation,
    Attention,
}

impl DumpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DumpKind::Representation => "representation",
            DumpKind::Attention => "attention",
        }
    }
}

/// Half-open subword range `[start, end)` within one sentence.
pub type SubwordSpan = [usize; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub index: usize,
    /// Path of the layer file, relative to the manifest's directory.
    pub file: String,
    /// Words (representation) or sentences (attention).
    pub rows: u64,
    /// Neurons (representation) or heads (attention).
    pub cols: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusInfo {
    pub num_sentences: usize,
    /// Words per sentence.
    pub sentence_lengths: Vec<usize>,
    /// For each sentence, the subword span of each word.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subword_alignment: Option<Vec<Vec<SubwordSpan>>>,
}

impl CorpusInfo {
    pub fn word_level(sentence_lengths: Vec<usize>) -> Self {
        CorpusInfo {
            num_sentences: sentence_lengths.len(),
            sentence_lengths,
            subword_alignment: None,
        }
    }

    pub fn word_count(&self) -> usize {
        self.sentence_lengths.iter().sum()
    }
}

/// JSON metadata describing one model's dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpManifest {
    pub format_version: u32,
    pub model_name: String,
    pub kind: DumpKind,
    pub num_layers: usize,
    pub layers: Vec<LayerEntry>,
    pub corpus: CorpusInfo,
    /// Whether layer files are already word-level. Defaults to true when the
    /// corpus carries no subword alignment and false otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aligned: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped_sentences: Vec<usize>,
}

impl DumpManifest {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Manifest {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn word_count(&self) -> usize {
        self.corpus.word_count()
    }

    /// True when layer files hold subword rows that still need aggregating.
    pub fn is_subword_level(&self) -> bool {
        let has_alignment = self.corpus.subword_alignment.is_some();
        !self.aligned.unwrap_or(!has_alignment) && has_alignment
    }

    /// Per-sentence token counts as stored in the layer files.
    pub fn stored_sentence_lengths(&self) -> Result<Vec<usize>> {
        match (&self.corpus.subword_alignment, self.is_subword_level()) {
            (Some(alignment), true) => subword_counts(alignment),
            _ => Ok(self.corpus.sentence_lengths.clone()),
        }
    }

    /// Structural problems that make the dump unreadable, as messages.
    pub fn structural_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.format_version != FORMAT_VERSION {
            out.push(format!("unsupported format_version {}", self.format_version));
        }
        if self.num_layers != self.layers.len() {
            out.push(format!(
                "num_layers is {} but {} layers are listed",
                self.num_layers,
                self.layers.len()
            ));
        }
        for (pos, entry) in self.layers.iter().enumerate() {
            if entry.index != pos {
                out.push(format!("layer entry {pos} has index {}", entry.index));
            }
        }
        let corpus = &self.corpus;
        if corpus.num_sentences != corpus.sentence_lengths.len() {
            out.push(format!(
                "num_sentences is {} but {} sentence lengths are listed",
                corpus.num_sentences,
                corpus.sentence_lengths.len()
            ));
        }
        if let Some(i) = corpus.sentence_lengths.iter().position(|&t| t == 0) {
            out.push(format!("sentence {i} has no words"));
        }
        let mut stored = None;
        if let Some(alignment) = &corpus.subword_alignment {
            if alignment.len() != corpus.sentence_lengths.len() {
                out.push(format!(
                    "subword_alignment covers {} sentences, corpus has {}",
                    alignment.len(),
                    corpus.sentence_lengths.len()
                ));
            } else {
                for (i, (spans, &t)) in alignment.iter().zip(&corpus.sentence_lengths).enumerate() {
                    if spans.len() != t {
                        out.push(format!(
                            "sentence {i}: {} aligned words, {t} in sentence_lengths",
                            spans.len()
                        ));
                    }
                }
                match self.stored_sentence_lengths() {
                    Ok(lengths) => stored = Some(lengths),
                    Err(e) => out.push(e.to_string()),
                }
            }
        } else {
            stored = Some(corpus.sentence_lengths.clone());
        }
        if let Some(lengths) = stored {
            for entry in &self.layers {
                match self.kind {
                    DumpKind::Representation => {
                        let expected: usize = lengths.iter().sum();
                        if entry.rows != expected as u64 {
                            out.push(format!(
                                "layer {}: manifest declares {} rows, corpus has {expected} tokens",
                                entry.index, entry.rows
                            ));
                        }
                    }
                    DumpKind::Attention => {
                        if entry.rows != corpus.num_sentences as u64 {
                            out.push(format!(
                                "layer {}: manifest declares {} sentences, corpus has {}",
                                entry.index, entry.rows, corpus.num_sentences
                            ));
                        }
                    }
                }
                if entry.cols == 0 {
                    out.push(format!("layer {}: zero columns", entry.index));
                }
            }
        }
        out
    }
}

/// Validates an alignment and returns the subword count of each sentence.
/// Spans must be non-empty, start at 0 and tile the sentence in order.
pub fn subword_counts(alignment: &[Vec<SubwordSpan>]) -> Result<Vec<usize>> {
    alignment
        .iter()
        .enumerate()
        .map(|(i, spans)| {
            let mut next = 0;
            for (w, &[start, end]) in spans.iter().enumerate() {
                if start != next || end <= start {
                    return Err(Error::Alignment(format!(
                        "sentence {i} word {w}: span [{start}, {end}) does not continue at subword {next}"
                    )));
                }
                next = end;
            }
            Ok(next)
        })
        .collect()
}
