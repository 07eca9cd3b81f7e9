use std::fmt;

use crate::attn::{DistributedMeasure, HeadSimilarityMethod};
use crate::error::{Error, Result};
use crate::rep::DEFAULT_VARIANCE_THRESHOLD;
use crate::tensorstore::DumpKind;

/// Every layer-level measure a heatmap can be built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Measure {
    NeuronSim,
    MixedSim,
    SvSim,
    PwSim,
    CkaSim,
    AttnHead(HeadSimilarityMethod),
    AttnDistributed(DistributedMeasure),
}

impl Measure {
    pub const REPRESENTATION: [Measure; 5] = [
        Measure::NeuronSim,
        Measure::MixedSim,
        Measure::SvSim,
        Measure::PwSim,
        Measure::CkaSim,
    ];

    pub const ATTENTION: [Measure; 6] = [
        Measure::AttnHead(HeadSimilarityMethod::Norm),
        Measure::AttnHead(HeadSimilarityMethod::Pearson),
        Measure::AttnHead(HeadSimilarityMethod::Js),
        Measure::AttnDistributed(DistributedMeasure::SvSim),
        Measure::AttnDistributed(DistributedMeasure::PwSim),
        Measure::AttnDistributed(DistributedMeasure::CkaSim),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::NeuronSim => "neuronsim",
            Measure::MixedSim => "mixedsim",
            Measure::SvSim => "svsim",
            Measure::PwSim => "pwsim",
            Measure::CkaSim => "ckasim",
            Measure::AttnHead(HeadSimilarityMethod::Norm) => "attn-norm",
            Measure::AttnHead(HeadSimilarityMethod::Pearson) => "attn-pearson",
            Measure::AttnHead(HeadSimilarityMethod::Js) => "attn-js",
            Measure::AttnDistributed(DistributedMeasure::SvSim) => "attn-svsim",
            Measure::AttnDistributed(DistributedMeasure::PwSim) => "attn-pwsim",
            Measure::AttnDistributed(DistributedMeasure::CkaSim) => "attn-ckasim",
        }
    }

    pub fn kind(self) -> DumpKind {
        match self {
            Measure::AttnHead(_) | Measure::AttnDistributed(_) => DumpKind::Attention,
            _ => DumpKind::Representation,
        }
    }

    pub fn is_symmetric(self) -> bool {
        matches!(
            self,
            Measure::SvSim
                | Measure::CkaSim
                | Measure::AttnDistributed(DistributedMeasure::SvSim)
                | Measure::AttnDistributed(DistributedMeasure::CkaSim)
        )
    }

    /// Resolves a measure id for a dump kind. Attention ids may be given with
    /// or without the `attn-` prefix.
    pub fn parse(kind: DumpKind, id: &str) -> Result<Self> {
        let candidates: &[Measure] = match kind {
            DumpKind::Representation => &Self::REPRESENTATION,
            DumpKind::Attention => &Self::ATTENTION,
        };
        candidates
            .iter()
            .copied()
            .find(|m| m.name() == id || m.name().strip_prefix("attn-") == Some(id))
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "measure {id:?} is not available for {} dumps",
                    kind.as_str()
                ))
            })
    }

    pub fn orientation_note(self) -> &'static str {
        if self.is_symmetric() {
            "symmetric: cell (r, c) = sim(r, c) = sim(c, r)"
        } else {
            match self {
                Measure::AttnHead(HeadSimilarityMethod::Norm) => {
                    "cell (r, c) = measure(r, c), averaged over the row layer's heads; values are negated Frobenius distances"
                }
                Measure::AttnHead(HeadSimilarityMethod::Js) => {
                    "cell (r, c) = measure(r, c), averaged over the row layer's heads; values are 1 - Jensen-Shannon divergence (base 2)"
                }
                Measure::AttnHead(_) => {
                    "cell (r, c) = measure(r, c), averaged over the row layer's heads"
                }
                Measure::PwSim | Measure::AttnDistributed(_) => {
                    "cell (r, c) = measure(r, c), weighted by the row layer's canonical alignments"
                }
                _ => "cell (r, c) = measure(r, c), averaged over the row layer's neurons",
            }
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureOptions {
    pub variance_threshold: f64,
    /// Average only the best `top_k` neurons (neuronsim).
    pub top_k: Option<usize>,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions {
            variance_threshold: DEFAULT_VARIANCE_THRESHOLD,
            top_k: None,
        }
    }
}

impl MeasureOptions {
    pub fn validate(&self) -> Result<()> {
        let t = self.variance_threshold;
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "variance threshold must lie in (0, 1], got {t}"
            )));
        }
        if self.top_k == Some(0) {
            return Err(Error::InvalidArgument("top_k must be positive".into()));
        }
        Ok(())
    }
}
