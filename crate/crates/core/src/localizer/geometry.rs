use log::warn;

use crate::error::{Error, Result};
use crate::feature_io::BBox;

/// Binary initial mask or propagated logits on an `S x S` grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    grid: usize,
    data: Vec<f32>,
}

impl Heatmap {
    pub fn new(grid: usize, data: Vec<f32>) -> Result<Self> {
        if grid == 0 || data.len() != grid * grid {
            return Err(Error::validation(format!(
                "heatmap needs {grid}x{grid} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite heatmap value"));
        }
        Ok(Heatmap { grid, data })
    }

    pub fn filled(grid: usize, value: f32) -> Self {
        Heatmap::new(grid, vec![value; grid * grid]).expect("finite fill")
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.grid + col]
    }

    /// Elementwise `scale * v + shift`.
    pub fn affine(&self, scale: f32, shift: f32) -> Result<Heatmap> {
        Heatmap::new(self.grid, self.data.iter().map(|v| v * scale + shift).collect())
    }
}

/// Grows both extents by `min(0.4 w, 0.4 h)`, keeping the center.
pub fn expand_proposal(bbox: &BBox) -> Result<BBox> {
    bbox.validate()?;
    let m = (0.4 * bbox.w).min(0.4 * bbox.h);
    BBox::new(bbox.cx, bbox.cy, bbox.w + m, bbox.h + m)
}

/// Samples the lattice `(x0' + i/S w', y0' + j/S h')` of the expanded box and
/// marks the points inside the original box (closed).
pub fn box_to_heatmap(original: &BBox, expanded: &BBox, grid: usize) -> Result<Heatmap> {
    if grid == 0 {
        return Err(Error::validation("heatmap grid must be at least 1"));
    }
    expanded
        .validate()
        .map_err(|e| Error::validation(format!("degenerate expanded box: {e}")))?;
    original.validate()?;
    let [x0, y0, x1, y1] = original.corners();
    let [ex0, ey0, ex1, ey1] = expanded.corners();
    let tol = 1e-4 * expanded.w.max(expanded.h);
    if x0 < ex0 - tol || y0 < ey0 - tol || x1 > ex1 + tol || y1 > ey1 + tol {
        return Err(Error::validation(format!(
            "original box {:?} is not inside the expanded box {:?}",
            original.corners(),
            expanded.corners()
        )));
    }
    let s = grid as f32;
    let inside_x: Vec<bool> = (0..grid)
        .map(|i| {
            let x = ex0 + (i as f32 / s) * expanded.w;
            x >= x0 && x <= x1
        })
        .collect();
    let mut data = Vec::with_capacity(grid * grid);
    for j in 0..grid {
        let y = ey0 + (j as f32 / s) * expanded.h;
        let row_in = y >= y0 && y <= y1;
        data.extend(inside_x.iter().map(|&xin| (row_in && xin) as u8 as f32));
    }
    if data.iter().all(|&v| v == 0.0) {
        warn!(
            "box {:?} covers no sample point of the {grid}x{grid} lattice over {:?}",
            original.corners(),
            expanded.corners()
        );
    }
    Heatmap::new(grid, data)
}

/// Box relative to the expanded proposal: center and extent in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelBox {
    pub cw: f32,
    pub ch: f32,
    pub w: f32,
    pub h: f32,
}

impl RelBox {
    pub fn validate(&self) -> Result<()> {
        for v in [self.cw, self.ch, self.w, self.h] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!("relative box {self:?} leaves [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Maps a relative box back to pixels using the expanded proposal.
pub fn to_absolute(rel: &RelBox, expanded: &BBox) -> Result<BBox> {
    rel.validate()?;
    expanded.validate()?;
    if rel.w == 0.0 || rel.h == 0.0 {
        return Err(Error::DegenerateBox(format!("relative extent is zero: {rel:?}")));
    }
    let [ex0, ey0, _, _] = expanded.corners();
    BBox::new(
        ex0 + rel.cw * expanded.w,
        ey0 + rel.ch * expanded.h,
        expanded.w * rel.w,
        expanded.h * rel.h,
    )
}
