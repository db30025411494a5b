//! Region-propagation localization.
//!
//! A proposal is expanded, encoded as a binary heatmap over the expanded box,
//! propagated by a small conv net conditioned on the class and background
//! similarity planes, and read back as a box through the spatial integral.

mod geometry;
mod integral;
mod net;

pub use geometry::{box_to_heatmap, expand_proposal, to_absolute, Heatmap, RelBox};
pub use integral::{spatial_integral, IntegralParams};
pub use net::{propagate, LocNetWeights, Propagator, DEFAULT_LOC_BLOCKS};

use crate::classifier::{prototype_projection, SimilarityMap};
use crate::error::{Error, Result};
use crate::feature_io::{roi_align, BBox, FeatureMap, PrototypeBank};

/// Input channel count of the propagation net for `b` backgrounds.
pub fn localizer_channels(background_count: usize) -> usize {
    2 + background_count
}

/// Every intermediate of one localization.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationTrace {
    /// Proposal clipped to the image.
    pub proposal: BBox,
    /// Expanded proposal clipped to the image; the frame of all heatmaps.
    pub expanded: BBox,
    pub initial: Heatmap,
    pub logits: Heatmap,
    pub relative: RelBox,
    /// Refined box clipped to the image.
    pub refined: BBox,
}

/// Clipped proposal and clipped expansion, or `EmptyRegion` when the proposal
/// misses the image.
pub fn expansion_frame(proposal: &BBox, fm: &FeatureMap) -> Result<(BBox, BBox)> {
    let (iw, ih) = (fm.image_width_px() as f32, fm.image_height_px() as f32);
    let clipped = proposal.clip(iw, ih).ok_or_else(|| {
        Error::EmptyRegion(format!("proposal {:?} misses the image", proposal.corners()))
    })?;
    let expanded = expand_proposal(proposal)?
        .clip(iw, ih)
        .expect("expansion contains the clipped proposal");
    Ok((clipped, expanded))
}

/// Localization given the similarity map of the expanded region.
pub fn localize_in_frame(
    proposal: &BBox,
    expanded: &BBox,
    expanded_sim: &SimilarityMap,
    class_id: usize,
    propagator: &dyn Propagator,
    params: &IntegralParams,
    image_size: (f32, f32),
) -> Result<LocalizationTrace> {
    let grid = expanded_sim.grid();
    let initial = box_to_heatmap(proposal, expanded, grid)?;
    let class_sim = expanded_sim.class_with_backgrounds(class_id)?;
    let logits = propagator.propagate(&initial, &class_sim)?;
    if logits.grid() != grid {
        return Err(Error::validation(format!(
            "propagator returned a {}x{} map for grid {grid}",
            logits.grid(),
            logits.grid()
        )));
    }
    let relative = spatial_integral(&logits, params)?;
    let absolute = to_absolute(&relative, expanded)?;
    let refined = absolute.clip(image_size.0, image_size.1).ok_or_else(|| {
        Error::DegenerateBox(format!("refined box {:?} leaves the image", absolute.corners()))
    })?;
    Ok(LocalizationTrace {
        proposal: *proposal,
        expanded: *expanded,
        initial,
        logits,
        relative,
        refined,
    })
}

/// Full localization trace for one proposal and class.
pub fn localize_traced(
    proposal: &BBox,
    fm: &FeatureMap,
    bank: &PrototypeBank,
    class_id: usize,
    propagator: &dyn Propagator,
    params: &IntegralParams,
    grid: usize,
) -> Result<LocalizationTrace> {
    let (clipped, expanded) = expansion_frame(proposal, fm)?;
    let region = roi_align(fm, &expanded, grid)?;
    let sim = prototype_projection(&region, bank)?;
    localize_in_frame(
        &clipped,
        &expanded,
        &sim,
        class_id,
        propagator,
        params,
        (fm.image_width_px() as f32, fm.image_height_px() as f32),
    )
}

/// Refined absolute box for `proposal` under class `class_id`.
pub fn localize(
    proposal: &BBox,
    fm: &FeatureMap,
    bank: &PrototypeBank,
    class_id: usize,
    propagator: &dyn Propagator,
    params: &IntegralParams,
    grid: usize,
) -> Result<BBox> {
    localize_traced(proposal, fm, bank, class_id, propagator, params, grid).map(|t| t.refined)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_map() -> FeatureMap {
        FeatureMap::from_grid(8, 8, 2, vec![0.5; 128], 10).unwrap()
    }

    fn bank() -> PrototypeBank {
        PrototypeBank::new(2, vec!["x".into()], vec![1.0, 0.0], vec![0.0, 1.0], true).unwrap()
    }

    #[test]
    fn zero_net_yields_half_extent_box() {
        let fm = flat_map();
        let net = LocNetWeights::zeros(3, 4, 2);
        let s = 8;
        let proposal = BBox::new(40.0, 40.0, 20.0, 10.0).unwrap();
        let out = localize(&proposal, &fm, &bank(), 0, &net, &IntegralParams::uniform(s), s).unwrap();
        // expanded 24 x 14; uniform logits: half extent, center at (S+1)/(2S).
        let c = (s as f32 + 1.0) / (2.0 * s as f32);
        assert!((out.w - 12.0).abs() < 1e-4 && (out.h - 7.0).abs() < 1e-4);
        assert!((out.cx - (28.0 + c * 24.0)).abs() < 1e-4);
        assert!((out.cy - (33.0 + c * 14.0)).abs() < 1e-4);
    }

    #[test]
    fn border_proposal_stays_inside_image() {
        let fm = flat_map();
        let net = LocNetWeights::seeded(3, 4, 2, 5);
        let proposal = BBox::from_corners(60.0, 65.0, 85.0, 80.0).unwrap();
        let out = localize(&proposal, &fm, &bank(), 0, &net, &IntegralParams::uniform(6), 6).unwrap();
        let [x0, y0, x1, y1] = out.corners();
        assert!(x0 >= 0.0 && y0 >= 0.0 && x1 <= 80.0 && y1 <= 80.0);
        out.validate().unwrap();
    }

    #[test]
    fn proposal_outside_image_is_empty_region() {
        let fm = flat_map();
        let net = LocNetWeights::zeros(3, 2, 1);
        let proposal = BBox::from_corners(100.0, 100.0, 120.0, 120.0).unwrap();
        let e = localize(&proposal, &fm, &bank(), 0, &net, &IntegralParams::uniform(4), 4);
        assert!(matches!(e, Err(Error::EmptyRegion(_))));
    }
}
