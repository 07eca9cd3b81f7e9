use std::path::{Path, PathBuf};

use super::aggregate::{aggregate_subword_attention, aggregate_subword_representations};
use super::format::{LayerFile, LayerKind};
use super::manifest::{CorpusInfo, DumpKind, DumpManifest, LayerEntry, FORMAT_VERSION};
use super::types::{attention_payload_len, ActivationMatrix, AttentionLayer};
use crate::error::{Error, Result};

/// An opened dump: a parsed, structurally valid manifest and the directory
/// its layer files live in.
#[derive(Clone, Debug)]
pub struct Dump {
    manifest: DumpManifest,
    manifest_path: PathBuf,
    base_dir: PathBuf,
}

impl Dump {
    pub fn open(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let manifest_path = manifest_path.as_ref().to_path_buf();
        let manifest = DumpManifest::from_path(&manifest_path)?;
        if let Some(problem) = manifest.structural_violations().into_iter().next() {
            return Err(Error::InvariantViolation(format!(
                "{}: {problem}",
                manifest_path.display()
            )));
        }
        let base_dir = manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok(Dump {
            manifest,
            manifest_path,
            base_dir,
        })
    }

    pub fn manifest(&self) -> &DumpManifest {
        &self.manifest
    }

    pub fn manifest_path(&self) -> &Path {
        &self.manifest_path
    }

    pub fn model_name(&self) -> &str {
        &self.manifest.model_name
    }

    pub fn kind(&self) -> DumpKind {
        self.manifest.kind
    }

    pub fn num_layers(&self) -> usize {
        self.manifest.num_layers
    }

    fn entry(&self, layer: usize) -> Result<&LayerEntry> {
        self.manifest.layers.get(layer).ok_or(Error::LayerOutOfRange {
            layer,
            num_layers: self.manifest.num_layers,
        })
    }

    pub fn layer_path(&self, layer: usize) -> Result<PathBuf> {
        Ok(self.base_dir.join(&self.entry(layer)?.file))
    }

    fn expect_kind(&self, kind: DumpKind) -> Result<()> {
        if self.manifest.kind != kind {
            return Err(Error::WrongKind {
                expected: kind.as_str(),
                found: self.manifest.kind.as_str(),
            });
        }
        Ok(())
    }

    /// Reads a layer file and checks its header against the manifest.
    fn read_layer_file(&self, layer: usize, kind: LayerKind) -> Result<(PathBuf, LayerFile)> {
        let entry = self.entry(layer)?;
        let path = self.base_dir.join(&entry.file);
        let file = LayerFile::read(&path)?;
        if file.header.kind != kind {
            return Err(Error::DimensionMismatch(format!(
                "{}: header kind {:?}, manifest kind {}",
                path.display(),
                file.header.kind,
                self.manifest.kind.as_str()
            )));
        }
        if file.header.rows != entry.rows || file.header.cols != entry.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}: header says {}x{}, manifest declares {}x{}",
                path.display(),
                file.header.rows,
                file.header.cols,
                entry.rows,
                entry.cols
            )));
        }
        Ok((path, file))
    }

    /// The layer exactly as stored (subword rows if the dump is unaligned).
    pub fn read_activation_layer(&self, layer: usize) -> Result<ActivationMatrix> {
        self.expect_kind(DumpKind::Representation)?;
        let (path, file) = self.read_layer_file(layer, LayerKind::Matrix)?;
        let rows = file.header.rows as usize;
        let cols = file.header.cols as usize;
        file.expect_len(&path, rows * cols)?;
        if let Some(index) = file.first_non_finite() {
            return Err(Error::NonFinite { path, index });
        }
        ActivationMatrix::from_row_major_f32(rows, cols, &file.payload)
    }

    pub fn read_attention_layer(&self, layer: usize) -> Result<AttentionLayer> {
        self.expect_kind(DumpKind::Attention)?;
        let (path, file) = self.read_layer_file(layer, LayerKind::Attention)?;
        let heads = file.header.cols as usize;
        let lengths = self.manifest.stored_sentence_lengths()?;
        if lengths.len() != file.header.rows as usize {
            return Err(Error::DimensionMismatch(format!(
                "{}: {} sentences in header, {} in corpus",
                path.display(),
                file.header.rows,
                lengths.len()
            )));
        }
        file.expect_len(&path, attention_payload_len(heads, &lengths))?;
        if let Some(index) = file.first_non_finite() {
            return Err(Error::NonFinite { path, index });
        }
        let data = file.payload.iter().map(|&v| v as f64).collect();
        AttentionLayer::new(heads, lengths, data, !self.manifest.is_subword_level())
            .map_err(|e| match e {
                Error::InvariantViolation(msg) => {
                    Error::InvariantViolation(format!("{}: {msg}", path.display()))
                }
                other => other,
            })
    }

    /// The layer at word level, aggregating subwords when needed.
    pub fn word_representation(&self, layer: usize) -> Result<ActivationMatrix> {
        let raw = self.read_activation_layer(layer)?;
        match (&self.manifest.corpus.subword_alignment, self.manifest.is_subword_level()) {
            (Some(alignment), true) => aggregate_subword_representations(&raw, alignment),
            _ => Ok(raw),
        }
    }

    pub fn word_attention(&self, layer: usize) -> Result<AttentionLayer> {
        let raw = self.read_attention_layer(layer)?;
        match (&self.manifest.corpus.subword_alignment, self.manifest.is_subword_level()) {
            (Some(alignment), true) => aggregate_subword_attention(&raw, alignment),
            _ => Ok(raw),
        }
    }
}

/// Reads one stored layer of a representation dump.
pub fn read_activation_dump(manifest_path: impl AsRef<Path>, layer: usize) -> Result<ActivationMatrix> {
    Dump::open(manifest_path)?.read_activation_layer(layer)
}

/// Reads one stored layer of an attention dump.
pub fn read_attention_dump(manifest_path: impl AsRef<Path>, layer: usize) -> Result<AttentionLayer> {
    Dump::open(manifest_path)?.read_attention_layer(layer)
}

fn layer_file_name(index: usize) -> String {
    format!("layer_{index:03}.bin")
}

fn write_manifest(dir: &Path, manifest: &DumpManifest) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("manifest.json");
    std::fs::write(&path, manifest.to_json()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes a representation dump into `dir` and returns the manifest path.
///
/// Layers may be word-level or, when `corpus` carries an alignment,
/// subword-level; the manifest's `aligned` flag records which.
pub fn write_representation_dump(
    dir: impl AsRef<Path>,
    model_name: &str,
    corpus: CorpusInfo,
    layers: &[ActivationMatrix],
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(layers.len());
    for (index, m) in layers.iter().enumerate() {
        let file = layer_file_name(index);
        LayerFile::matrix(m.nrows(), m.ncols(), m.to_row_major_f32()).write(&dir.join(&file))?;
        entries.push(LayerEntry {
            index,
            file,
            rows: m.nrows() as u64,
            cols: m.ncols() as u64,
        });
    }
    let aligned = corpus
        .subword_alignment
        .as_ref()
        .map(|_| layers.first().is_none_or(|m| m.nrows() == corpus.word_count()));
    let manifest = DumpManifest {
        format_version: FORMAT_VERSION,
        model_name: model_name.to_string(),
        kind: DumpKind::Representation,
        num_layers: layers.len(),
        layers: entries,
        corpus,
        aligned,
        revision: None,
        skipped_sentences: Vec::new(),
    };
    write_manifest(dir, &manifest)
}

/// Writes an attention dump into `dir` and returns the manifest path.
pub fn write_attention_dump(
    dir: impl AsRef<Path>,
    model_name: &str,
    corpus: CorpusInfo,
    layers: &[AttentionLayer],
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(layers.len());
    for (index, layer) in layers.iter().enumerate() {
        let file = layer_file_name(index);
        let payload = layer.values().iter().map(|&v| v as f32).collect();
        LayerFile::attention(layer.num_sentences(), layer.heads(), payload)
            .write(&dir.join(&file))?;
        entries.push(LayerEntry {
            index,
            file,
            rows: layer.num_sentences() as u64,
            cols: layer.heads() as u64,
        });
    }
    let aligned = corpus
        .subword_alignment
        .as_ref()
        .map(|_| {
            layers
                .first()
                .is_none_or(|l| l.sentence_lengths() == corpus.sentence_lengths.as_slice())
        });
    let manifest = DumpManifest {
        format_version: FORMAT_VERSION,
        model_name: model_name.to_string(),
        kind: DumpKind::Attention,
        num_layers: layers.len(),
        layers: entries,
        corpus,
        aligned,
        revision: None,
        skipped_sentences: Vec::new(),
    };
    write_manifest(dir, &manifest)
}
