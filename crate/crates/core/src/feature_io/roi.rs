use crate::error::{Error, Result};
use crate::feature_io::{BBox, FeatureMap, RegionFeatures};

pub const DEFAULT_GRID: usize = 16;

/// Samples an `S x S` grid of features over `bbox` (pixels).
///
/// One bilinear sample per output cell, taken at the cell center. Patch cell
/// `(r, c)` is anchored at pixel `((c + 0.5) * stride, (r + 0.5) * stride)`;
/// samples beyond the outermost anchors take the border value. The box is
/// clipped to the image first.
pub fn roi_align(fm: &FeatureMap, bbox: &BBox, grid: usize) -> Result<RegionFeatures> {
    if grid == 0 {
        return Err(Error::validation("roi grid size must be at least 1"));
    }
    bbox.validate()?;
    let clipped = bbox
        .clip(fm.image_width_px() as f32, fm.image_height_px() as f32)
        .ok_or_else(|| {
            Error::EmptyRegion(format!(
                "box {:?} does not intersect the {}x{} image",
                bbox.corners(),
                fm.image_width_px(),
                fm.image_height_px()
            ))
        })?;
    let [x0, y0, _, _] = clipped.corners();
    let stride = fm.patch_stride_px() as f32;
    let dim = fm.dim();
    let mut data = vec![0f32; grid * grid * dim];
    let (bin_w, bin_h) = (clipped.w / grid as f32, clipped.h / grid as f32);
    for i in 0..grid {
        let py = (y0 + (i as f32 + 0.5) * bin_h) / stride - 0.5;
        for j in 0..grid {
            let px = (x0 + (j as f32 + 0.5) * bin_w) / stride - 0.5;
            let out = &mut data[(i * grid + j) * dim..(i * grid + j + 1) * dim];
            bilinear(fm, px, py, out);
        }
    }
    RegionFeatures::new(grid, dim, data)
}

/// Bilinear sample at continuous patch coordinates, clamped to the grid.
pub(crate) fn bilinear(fm: &FeatureMap, px: f32, py: f32, out: &mut [f32]) {
    let x = px.clamp(0.0, (fm.width() - 1) as f32);
    let y = py.clamp(0.0, (fm.height() - 1) as f32);
    let (xl, yl) = (x.floor() as usize, y.floor() as usize);
    let xh = (xl + 1).min(fm.width() - 1);
    let yh = (yl + 1).min(fm.height() - 1);
    let (fx, fy) = (x - xl as f32, y - yl as f32);
    let weights = [
        ((1.0 - fy) * (1.0 - fx), yl, xl),
        ((1.0 - fy) * fx, yl, xh),
        (fy * (1.0 - fx), yh, xl),
        (fy * fx, yh, xh),
    ];
    out.iter_mut().for_each(|v| *v = 0.0);
    for (w, r, c) in weights {
        if w == 0.0 {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(fm.cell(r, c)) {
            *o += w * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_is_preserved() {
        let fm = FeatureMap::from_grid(5, 7, 3, vec![2.5; 105], 14).unwrap();
        let b = BBox::from_corners(3.0, 9.0, 61.0, 50.0).unwrap();
        let r = roi_align(&fm, &b, 4).unwrap();
        assert!(r.data().iter().all(|&v| (v - 2.5).abs() < 1e-6));
    }

    #[test]
    fn aligned_single_cell_crop() {
        let data: Vec<f32> = (0..3 * 3 * 2).map(|v| v as f32).collect();
        let fm = FeatureMap::from_grid(3, 3, 2, data, 10).unwrap();
        let b = BBox::from_corners(10.0, 20.0, 20.0, 30.0).unwrap();
        let r = roi_align(&fm, &b, 1).unwrap();
        assert_eq!(r.cell(0, 0), fm.cell(2, 1));
    }

    #[test]
    fn whole_image_at_native_resolution_reproduces_map() {
        let data: Vec<f32> = (0..4 * 4 * 2).map(|v| (v as f32).sin()).collect();
        let fm = FeatureMap::from_grid(4, 4, 2, data, 8).unwrap();
        let b = BBox::from_corners(0.0, 0.0, 32.0, 32.0).unwrap();
        let r = roi_align(&fm, &b, 4).unwrap();
        for (a, b) in r.data().iter().zip(fm.data()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn partially_outside_box_is_clipped() {
        let data: Vec<f32> = (0..16).map(|v| (v % 4) as f32).collect();
        let fm = FeatureMap::from_grid(4, 4, 1, data, 10).unwrap();
        let inside = BBox::from_corners(0.0, 0.0, 20.0, 20.0).unwrap();
        let spilling = BBox::from_corners(-20.0, -20.0, 20.0, 20.0).unwrap();
        assert_eq!(
            roi_align(&fm, &inside, 2).unwrap(),
            roi_align(&fm, &spilling, 2).unwrap()
        );
    }

    #[test]
    fn box_outside_image_is_empty_region() {
        let fm = FeatureMap::from_grid(2, 2, 1, vec![0.0; 4], 10).unwrap();
        let b = BBox::from_corners(30.0, 30.0, 40.0, 40.0).unwrap();
        assert!(matches!(roi_align(&fm, &b, 2), Err(Error::EmptyRegion(_))));
        assert!(roi_align(&fm, &BBox::from_corners(0.0, 0.0, 5.0, 5.0).unwrap(), 0).is_err());
    }
}
