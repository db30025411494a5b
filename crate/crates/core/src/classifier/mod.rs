//! Prototype projection, top-K pre-selection, class rearrange and the shared
//! one-vs-rest classification network.

mod net;
mod projection;
mod rearrange;

pub use net::{classify, ClsBlock, ClsNetWeights, DEFAULT_CLS_BLOCKS, DEFAULT_HIDDEN};
pub(crate) use net::{push_conv, take_conv};
pub use projection::{preselect_classes, prototype_projection, SimilarityMap};
pub use rearrange::{rearrange, ClassSpecificMap};

use crate::error::{Error, Result};
use crate::feature_io::{PrototypeBank, RegionFeatures};

pub const DEFAULT_TOP_K: usize = 10;
pub const DEFAULT_REARRANGE_WIDTH: usize = 128;

/// Input channel count of the classifier for width `t` and `b` backgrounds.
pub fn classifier_channels(t: usize, background_count: usize) -> usize {
    1 + t + background_count
}

/// Scores for the top-`k` classes of one region; every other class gets
/// exactly zero. Returns a dense vector of length `C`.
pub fn score_proposal(
    region: &RegionFeatures,
    bank: &PrototypeBank,
    k: usize,
    t: usize,
    weights: &ClsNetWeights,
) -> Result<Vec<f32>> {
    if weights.in_channels() != classifier_channels(t, bank.background_count()) {
        return Err(Error::validation(format!(
            "classifier expects {} input channels, bank with B={} and T={t} gives {}",
            weights.in_channels(),
            bank.background_count(),
            classifier_channels(t, bank.background_count())
        )));
    }
    let sim = prototype_projection(region, bank)?;
    let selected = preselect_classes(region, bank, k)?;
    let mut scores = vec![0f32; bank.class_count()];
    for class_id in selected {
        scores[class_id] = classify(&rearrange(&sim, class_id, t)?, weights)?;
    }
    Ok(scores)
}
