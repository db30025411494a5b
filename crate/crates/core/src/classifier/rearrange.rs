use log::warn;

use super::projection::SimilarityMap;
use crate::error::{Error, Result};

/// `S x S x (1 + T + B)`: target class, rearranged other classes, backgrounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpecificMap {
    grid: usize,
    rearranged: usize,
    background_count: usize,
    target_class: usize,
    data: Vec<f32>,
}

impl ClassSpecificMap {
    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn channels(&self) -> usize {
        1 + self.rearranged + self.background_count
    }

    /// `T`.
    pub fn rearranged_width(&self) -> usize {
        self.rearranged
    }

    pub fn background_count(&self) -> usize {
        self.background_count
    }

    pub fn target_class(&self) -> usize {
        self.target_class
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn cell(&self, row: usize, col: usize) -> &[f32] {
        let ch = self.channels();
        let at = (row * self.grid + col) * ch;
        &self.data[at..at + ch]
    }
}

/// Resamples a descending sequence to length `t`: keeps the top `t` when it is
/// longer, otherwise linear interpolation at positions `k (n - 1) / (t - 1)`.
pub(crate) fn resample_sorted(sorted: &[f32], t: usize, out: &mut Vec<f32>) {
    let n = sorted.len();
    if n == 0 {
        out.extend(std::iter::repeat_n(0.0, t));
    } else if n > t {
        out.extend_from_slice(&sorted[..t]);
    } else if t == 1 || n == 1 {
        out.extend(std::iter::repeat_n(sorted[0], t));
    } else {
        let scale = (n - 1) as f64 / (t - 1) as f64;
        for k in 0..t {
            let pos = k as f64 * scale;
            let lo = (pos.floor() as usize).min(n - 1);
            let hi = (lo + 1).min(n - 1);
            let frac = (pos - lo as f64) as f32;
            out.push(sorted[lo] + (sorted[hi] - sorted[lo]) * frac);
        }
    }
}

/// Builds the class-specific map for `target`. Per cell, the other class
/// similarities are sorted descending and resampled to width `t`.
pub fn rearrange(sim: &SimilarityMap, target: usize, t: usize) -> Result<ClassSpecificMap> {
    let c = sim.class_count();
    if target >= c {
        return Err(Error::validation(format!(
            "target class {target} out of range for {c} classes"
        )));
    }
    if t == 0 {
        return Err(Error::validation("rearrange width T must be at least 1"));
    }
    if c == 1 {
        warn!("single-class bank: rearranged block of width {t} is all zeros");
    }
    let b = sim.background_count();
    let grid = sim.grid();
    let mut data = Vec::with_capacity(grid * grid * (1 + t + b));
    let mut others = Vec::with_capacity(c.saturating_sub(1));
    for cell in sim.data().chunks_exact(sim.channels()) {
        data.push(cell[target]);
        others.clear();
        others.extend(
            cell[..c]
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != target)
                .map(|(_, &v)| v),
        );
        others.sort_by(|x, y| y.total_cmp(x));
        resample_sorted(&others, t, &mut data);
        data.extend_from_slice(&cell[c..]);
    }
    Ok(ClassSpecificMap {
        grid,
        rearranged: t,
        background_count: b,
        target_class: target,
        data,
    })
}
