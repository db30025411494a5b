use crate::error::{Error, Result};
use crate::feature_io::{PrototypeBank, RegionFeatures};
use crate::nn::dot;

/// Per-cell dot products against every prototype, `S x S x (C + B)`,
/// channels ordered classes first then backgrounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMap {
    grid: usize,
    class_count: usize,
    background_count: usize,
    data: Vec<f32>,
}

impl SimilarityMap {
    pub fn new(
        grid: usize,
        class_count: usize,
        background_count: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if grid == 0 || class_count == 0 {
            return Err(Error::validation("similarity map needs S >= 1 and C >= 1"));
        }
        if data.len() != grid * grid * (class_count + background_count) {
            return Err(Error::validation(format!(
                "similarity map has {} values, expected {grid}x{grid}x{}",
                data.len(),
                class_count + background_count
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite similarity"));
        }
        Ok(SimilarityMap {
            grid,
            class_count,
            background_count,
            data,
        })
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn background_count(&self) -> usize {
        self.background_count
    }

    pub fn channels(&self) -> usize {
        self.class_count + self.background_count
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn cell(&self, row: usize, col: usize) -> &[f32] {
        let ch = self.channels();
        let at = (row * self.grid + col) * ch;
        &self.data[at..at + ch]
    }

    /// One channel as an `S x S` plane.
    pub fn plane(&self, channel: usize) -> Vec<f32> {
        self.data
            .chunks_exact(self.channels())
            .map(|cell| cell[channel])
            .collect()
    }

    /// `S x S x (1 + B)`: the class channel followed by all backgrounds.
    pub fn class_with_backgrounds(&self, class_id: usize) -> Result<Vec<f32>> {
        if class_id >= self.class_count {
            return Err(Error::validation(format!(
                "class {class_id} out of range for {} classes",
                self.class_count
            )));
        }
        let c = self.class_count;
        let mut out = Vec::with_capacity(self.grid * self.grid * (1 + self.background_count));
        for cell in self.data.chunks_exact(self.channels()) {
            out.push(cell[class_id]);
            out.extend_from_slice(&cell[c..]);
        }
        Ok(out)
    }
}

pub fn prototype_projection(region: &RegionFeatures, bank: &PrototypeBank) -> Result<SimilarityMap> {
    if region.dim() != bank.dim() {
        return Err(Error::validation(format!(
            "region feature dim {} does not match prototype dim {}",
            region.dim(),
            bank.dim()
        )));
    }
    let total = bank.total_count();
    let mut data = Vec::with_capacity(region.grid() * region.grid() * total);
    for cell in region.data().chunks_exact(region.dim()) {
        for k in 0..total {
            data.push(dot(cell, bank.prototype(k)));
        }
    }
    SimilarityMap::new(region.grid(), bank.class_count(), bank.background_count(), data)
}

/// Top-`k` classes by similarity between the region's mean feature and each
/// class prototype, descending, ties to the lower index. Backgrounds never
/// take part.
pub fn preselect_classes(
    region: &RegionFeatures,
    bank: &PrototypeBank,
    k: usize,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::validation("top-K needs K >= 1"));
    }
    if region.dim() != bank.dim() {
        return Err(Error::validation(format!(
            "region feature dim {} does not match prototype dim {}",
            region.dim(),
            bank.dim()
        )));
    }
    let mean = region.mean_feature();
    let scores: Vec<f32> = (0..bank.class_count())
        .map(|c| dot(&mean, bank.class_prototype(c)))
        .collect();
    Ok(top_indices(&scores, k))
}

pub(crate) fn top_indices(scores: &[f32], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Stable sort keeps lower indices first among equal scores.
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order.truncate(k);
    order
}
