//! Cross-model heatmaps, localization profiles and model-set comparisons.

mod cache;
mod heatmap;
mod measure;

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

pub use cache::{CacheStats, DEFAULT_MEMORY_BUDGET};
pub use heatmap::{
    CellFailure, LayerGroup, LayerRef, LocalizationEntry, LocalizationProfile, SimilarityHeatmap,
};
pub use measure::{Measure, MeasureOptions};

use cache::{OperandCache, Prep};

use crate::attn::{self, DistributedMeasure};
use crate::error::{Error, Result};
use crate::neuron::{self, RegressorBasis, StandardizedColumns};
use crate::parallel::{map_range, Parallelism};
use crate::rep::{self, CkaOperand, TruncatedBasis};
use crate::tensorstore::{AttentionLayer, Dump, DumpKind};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LocalizationOptions {
    pub measure: MeasureOptions,
    /// Average only over layers of other models.
    pub cross_model_only: bool,
}


/// A set of opened dumps plus a shared operand cache.
pub struct Analyzer {
    dumps: Vec<Dump>,
    by_name: HashMap<String, usize>,
    layer_base: Vec<usize>,
    cache: OperandCache,
    parallelism: Parallelism,
}

impl Analyzer {
    pub fn new(dumps: Vec<Dump>) -> Result<Self> {
        let mut by_name = HashMap::new();
        let mut layer_base = Vec::with_capacity(dumps.len());
        let mut total = 0;
        for (i, d) in dumps.iter().enumerate() {
            if by_name.insert(d.model_name().to_string(), i).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "model name {:?} appears in more than one dump",
                    d.model_name()
                )));
            }
            layer_base.push(total);
            total += d.num_layers();
        }
        Ok(Analyzer {
            dumps,
            by_name,
            layer_base,
            cache: OperandCache::new(DEFAULT_MEMORY_BUDGET),
            parallelism: Parallelism::Ambient,
        })
    }

    pub fn open<P: AsRef<Path>>(manifests: &[P]) -> Result<Self> {
        Self::new(manifests.iter().map(Dump::open).collect::<Result<_>>()?)
    }

    pub fn with_memory_budget(mut self, bytes: usize) -> Self {
        self.cache = OperandCache::new(bytes);
        self
    }

    pub fn with_parallelism(mut self, parallelism: Parallelism) -> Self {
        self.parallelism = parallelism;
        self
    }

    pub fn memory_budget(&self) -> usize {
        self.cache.budget()
    }

    pub fn cache_stats(&self) -> CacheStats {
        self.cache.stats()
    }

    /// Bytes currently held by the operand cache.
    pub fn cache_resident_bytes(&self) -> usize {
        self.cache.resident_bytes()
    }

    pub fn dumps(&self) -> &[Dump] {
        &self.dumps
    }

    /// Every layer of every dump, in dump order.
    pub fn all_layers(&self) -> Vec<LayerRef> {
        self.dumps
            .iter()
            .flat_map(|d| (0..d.num_layers()).map(|l| LayerRef::new(d.model_name(), l)))
            .collect()
    }

    pub fn model_layers(&self, model: &str) -> Result<Vec<LayerRef>> {
        let i = *self.by_name.get(model).ok_or(Error::UnknownLayer {
            model: model.to_string(),
            layer: 0,
        })?;
        Ok((0..self.dumps[i].num_layers())
            .map(|l| LayerRef::new(model, l))
            .collect())
    }

    fn resolve(&self, r: &LayerRef) -> Result<(&Dump, usize)> {
        let unknown = || Error::UnknownLayer {
            model: r.model.clone(),
            layer: r.layer,
        };
        let &i = self.by_name.get(&r.model).ok_or_else(unknown)?;
        let dump = &self.dumps[i];
        if r.layer >= dump.num_layers() {
            return Err(unknown());
        }
        Ok((dump, self.layer_base[i] + r.layer))
    }

    fn standardized(&self, r: &LayerRef) -> Result<Arc<StandardizedColumns>> {
        let (dump, slot) = self.resolve(r)?;
        self.cache.get_or_load((slot, Prep::Standardized), || {
            let s = StandardizedColumns::new(&dump.word_representation(r.layer)?);
            let bytes = s.size_bytes();
            Ok((s, bytes))
        })
    }

    fn regressors(&self, r: &LayerRef) -> Result<Arc<RegressorBasis>> {
        let (dump, slot) = self.resolve(r)?;
        self.cache.get_or_load((slot, Prep::Regressors), || {
            let b = RegressorBasis::new(&dump.word_representation(r.layer)?)?;
            let bytes = b.size_bytes();
            Ok((b, bytes))
        })
    }

    fn truncated(&self, r: &LayerRef, threshold: f64) -> Result<Arc<TruncatedBasis>> {
        let (dump, slot) = self.resolve(r)?;
        self.cache
            .get_or_load((slot, Prep::Truncated(threshold.to_bits())), || {
                let b = TruncatedBasis::new(&dump.word_representation(r.layer)?, threshold)?;
                let bytes = b.size_bytes();
                Ok((b, bytes))
            })
    }

    fn cka(&self, r: &LayerRef) -> Result<Arc<CkaOperand>> {
        let (dump, slot) = self.resolve(r)?;
        self.cache.get_or_load((slot, Prep::Cka), || {
            let op = CkaOperand::new(&dump.word_representation(r.layer)?)?;
            let bytes = op.size_bytes();
            Ok((op, bytes))
        })
    }

    fn attention(&self, r: &LayerRef) -> Result<Arc<AttentionLayer>> {
        let (dump, slot) = self.resolve(r)?;
        self.cache.get_or_load((slot, Prep::Attention), || {
            let layer = dump.word_attention(r.layer)?;
            let bytes = layer.size_bytes();
            Ok((layer, bytes))
        })
    }

    fn attn_truncated(&self, r: &LayerRef, threshold: f64) -> Result<Arc<TruncatedBasis>> {
        let (_, slot) = self.resolve(r)?;
        self.cache
            .get_or_load((slot, Prep::AttnTruncated(threshold.to_bits())), || {
                let rep = attn::attention_representation(&*self.attention(r)?)?;
                let b = TruncatedBasis::new(rep.matrix(), threshold)?;
                let bytes = b.size_bytes();
                Ok((b, bytes))
            })
    }

    fn attn_cka(&self, r: &LayerRef) -> Result<Arc<CkaOperand>> {
        let (_, slot) = self.resolve(r)?;
        self.cache.get_or_load((slot, Prep::AttnCka), || {
            let rep = attn::attention_representation(&*self.attention(r)?)?;
            let op = CkaOperand::new(rep.matrix())?;
            let bytes = op.size_bytes();
            Ok((op, bytes))
        })
    }

    /// Loads whatever `measure` needs for one layer, so that pair evaluation
    /// finds it cached.
    fn prepare(&self, r: &LayerRef, measure: Measure, opts: &MeasureOptions) -> Result<()> {
        let t = opts.variance_threshold;
        match measure {
            Measure::NeuronSim => self.standardized(r).map(drop),
            Measure::MixedSim => {
                self.standardized(r)?;
                self.regressors(r).map(drop)
            }
            Measure::SvSim | Measure::PwSim => self.truncated(r, t).map(drop),
            Measure::CkaSim => self.cka(r).map(drop),
            Measure::AttnHead(_) => self.attention(r).map(drop),
            Measure::AttnDistributed(DistributedMeasure::CkaSim) => self.attn_cka(r).map(drop),
            Measure::AttnDistributed(_) => self.attn_truncated(r, t).map(drop),
        }
    }

    /// `measure(row, col)`, with averaging or weighting over `row`.
    pub fn evaluate(&self, row: &LayerRef, col: &LayerRef, measure: Measure, opts: &MeasureOptions) -> Result<f64> {
        let t = opts.variance_threshold;
        match measure {
            Measure::NeuronSim => {
                neuron::neuronsim_layer_prepared(&*self.standardized(row)?, &*self.standardized(col)?, opts.top_k)
            }
            Measure::MixedSim => {
                neuron::mixedsim_layer_prepared(&*self.standardized(row)?, &*self.regressors(col)?)
            }
            Measure::SvSim => rep::svsim_prepared(&*self.truncated(row, t)?, &*self.truncated(col, t)?),
            Measure::PwSim => rep::pwsim_prepared(&*self.truncated(row, t)?, &*self.truncated(col, t)?),
            Measure::CkaSim => rep::ckasim_prepared(&*self.cka(row)?, &*self.cka(col)?),
            Measure::AttnHead(method) => {
                attn::attnsim_layer(&*self.attention(row)?, &*self.attention(col)?, method)
            }
            Measure::AttnDistributed(DistributedMeasure::SvSim) => {
                rep::svsim_prepared(&*self.attn_truncated(row, t)?, &*self.attn_truncated(col, t)?)
            }
            Measure::AttnDistributed(DistributedMeasure::PwSim) => {
                rep::pwsim_prepared(&*self.attn_truncated(row, t)?, &*self.attn_truncated(col, t)?)
            }
            Measure::AttnDistributed(DistributedMeasure::CkaSim) => {
                rep::ckasim_prepared(&*self.attn_cka(row)?, &*self.attn_cka(col)?)
            }
        }
    }

    fn check_layers(&self, layers: &[LayerRef], kind: DumpKind, what: &str) -> Result<()> {
        for r in layers {
            let (dump, _) = self.resolve(r)?;
            if dump.kind() != kind {
                return Err(Error::InvalidArgument(format!(
                    "{what} needs {} dumps, but {} is a {} dump",
                    kind.as_str(),
                    r.model,
                    dump.kind().as_str()
                )));
            }
        }
        Ok(())
    }

    /// Scores every ordered pair of `layers`. Symmetric measures evaluate one
    /// triangle and mirror it. Pairs that fail are left absent and listed in
    /// `failures`.
    pub fn build_heatmap(
        &self,
        layers: &[LayerRef],
        measure: Measure,
        opts: &MeasureOptions,
    ) -> Result<SimilarityHeatmap> {
        opts.validate()?;
        if layers.is_empty() {
            return Err(Error::InvalidArgument("no layers to compare".into()));
        }
        self.check_layers(layers, measure.kind(), measure.name())?;
        let n = layers.len();
        let symmetric = measure.is_symmetric();
        let cells: Vec<(usize, usize)> = (0..n)
            .flat_map(|r| {
                let first = if symmetric { r } else { 0 };
                (first..n).map(move |c| (r, c))
            })
            .collect();

        let results = self.parallelism.install(|| {
            // Preparation errors resurface, per cell, during evaluation.
            let _ = map_range(n, |i| self.prepare(&layers[i], measure, opts));
            map_range(cells.len(), |i| {
                let (r, c) = cells[i];
                self.evaluate(&layers[r], &layers[c], measure, opts)
            })
        });

        let mut values = vec![vec![None; n]; n];
        let mut failures = Vec::new();
        for (&(r, c), result) in cells.iter().zip(results) {
            match result {
                Ok(v) => {
                    values[r][c] = Some(v);
                    if symmetric {
                        values[c][r] = Some(v);
                    }
                }
                Err(e) => {
                    log::warn!("{measure}({}, {}) failed: {e}", layers[r], layers[c]);
                    failures.push(CellFailure {
                        row: r,
                        col: c,
                        message: e.to_string(),
                    });
                    if symmetric && r != c {
                        failures.push(CellFailure {
                            row: c,
                            col: r,
                            message: e.to_string(),
                        });
                    }
                }
            }
        }
        failures.sort_by_key(|f| (f.row, f.col));

        let uses_threshold = matches!(
            measure,
            Measure::SvSim | Measure::PwSim | Measure::AttnDistributed(_)
        ) && measure != Measure::AttnDistributed(DistributedMeasure::CkaSim);
        Ok(SimilarityHeatmap {
            measure: measure.name().to_string(),
            symmetric,
            orientation: measure.orientation_note().to_string(),
            row_labels: layers.to_vec(),
            col_labels: layers.to_vec(),
            values,
            variance_threshold: uses_threshold.then_some(opts.variance_threshold),
            top_k: if measure == Measure::NeuronSim { opts.top_k } else { None },
            groups: Vec::new(),
            failures,
        })
    }

    /// Per-layer mean neuronsim minus mean svsim against every other layer.
    ///
    /// Means run down each heatmap column, so for the asymmetric neuronsim
    /// they average `neuronsim(other, layer)`. A layer's own cell is never
    /// included.
    pub fn localization_profile(
        &self,
        layers: &[LayerRef],
        opts: &LocalizationOptions,
    ) -> Result<LocalizationProfile> {
        if layers.len() < 2 {
            return Err(Error::Degenerate(format!(
                "localization needs at least two layers, got {}",
                layers.len()
            )));
        }
        self.check_layers(layers, DumpKind::Representation, "localization")?;
        let neuronsim = self.build_heatmap(layers, Measure::NeuronSim, &opts.measure)?;
        let svsim = self.build_heatmap(layers, Measure::SvSim, &opts.measure)?;
        let column_mean = |h: &SimilarityHeatmap, c: usize| -> Result<f64> {
            let vals: Vec<f64> = (0..layers.len())
                .filter(|&r| r != c)
                .filter(|&r| !opts.cross_model_only || layers[r].model != layers[c].model)
                .filter_map(|r| h.values[r][c])
                .collect();
            if vals.is_empty() {
                return Err(Error::Degenerate(format!(
                    "no comparable layers for {} under {}",
                    layers[c], h.measure
                )));
            }
            Ok(vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let entries = (0..layers.len())
            .map(|c| {
                let neuronsim_mean = column_mean(&neuronsim, c)?;
                let svsim_mean = column_mean(&svsim, c)?;
                Ok(LocalizationEntry {
                    layer: layers[c].clone(),
                    neuronsim_mean,
                    svsim_mean,
                    localization_score: neuronsim_mean - svsim_mean,
                })
            })
            .collect::<Result<_>>()?;
        Ok(LocalizationProfile {
            entries,
            neuronsim,
            svsim,
        })
    }

    /// One heatmap over `base` followed by `variant`, with the two blocks
    /// recorded as groups.
    pub fn compare_model_sets(
        &self,
        base: &[LayerRef],
        variant: &[LayerRef],
        measure: Measure,
        opts: &MeasureOptions,
    ) -> Result<SimilarityHeatmap> {
        if base.is_empty() || variant.is_empty() {
            return Err(Error::InvalidArgument(
                "model-set comparison needs non-empty base and variant lists".into(),
            ));
        }
        let layers: Vec<LayerRef> = base.iter().chain(variant).cloned().collect();
        let mut heatmap = self.build_heatmap(&layers, measure, opts)?;
        heatmap.groups = vec![
            LayerGroup {
                name: "base".into(),
                start: 0,
                len: base.len(),
            },
            LayerGroup {
                name: "variant".into(),
                start: base.len(),
                len: variant.len(),
            },
        ];
        Ok(heatmap)
    }
}
