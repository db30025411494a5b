use crate::error::{Error, Result};

/// Axis-aligned box in pixels, stored as center and extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub cx: f32,
    pub cy: f32,
    pub w: f32,
    pub h: f32,
}

impl BBox {
    pub fn new(cx: f32, cy: f32, w: f32, h: f32) -> Result<Self> {
        let b = BBox { cx, cy, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn from_corners(x0: f32, y0: f32, x1: f32, y1: f32) -> Result<Self> {
        BBox::new((x0 + x1) * 0.5, (y0 + y1) * 0.5, x1 - x0, y1 - y0)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.cx, self.cy, self.w, self.h].iter().all(|v| v.is_finite()) {
            return Err(Error::validation(format!("non-finite box {self:?}")));
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::validation(format!(
                "box extent must be positive, got w={} h={}",
                self.w, self.h
            )));
        }
        Ok(())
    }

    /// `(x0, y0, x1, y1)`.
    pub fn corners(&self) -> [f32; 4] {
        let (hw, hh) = (self.w * 0.5, self.h * 0.5);
        [self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh]
    }

    pub fn area(&self) -> f32 {
        self.w * self.h
    }

    pub fn iou(&self, other: &BBox) -> f32 {
        let [ax0, ay0, ax1, ay1] = self.corners();
        let [bx0, by0, bx1, by1] = other.corners();
        let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
        let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Intersection with `[0, width] x [0, height]`; `None` when nothing of
    /// positive area remains.
    pub fn clip(&self, width: f32, height: f32) -> Option<BBox> {
        let [x0, y0, x1, y1] = self.corners();
        let (x0, y0) = (x0.max(0.0), y0.max(0.0));
        let (x1, y1) = (x1.min(width), y1.min(height));
        if x1 > x0 && y1 > y0 {
            BBox::from_corners(x0, y0, x1, y1).ok()
        } else {
            None
        }
    }

    pub fn contains_point(&self, x: f32, y: f32) -> bool {
        let [x0, y0, x1, y1] = self.corners();
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }
}

/// Backbone patch features for one image, `H x W x D` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    dim: usize,
    data: Vec<f32>,
    image_width_px: u32,
    image_height_px: u32,
    patch_stride_px: u32,
}

impl FeatureMap {
    pub fn new(
        height: usize,
        width: usize,
        dim: usize,
        data: Vec<f32>,
        image_width_px: u32,
        image_height_px: u32,
        patch_stride_px: u32,
    ) -> Result<Self> {
        if height == 0 || width == 0 || dim == 0 {
            return Err(Error::validation(format!(
                "feature map dimensions must be nonzero, got {height}x{width}x{dim}"
            )));
        }
        if data.len() != height * width * dim {
            return Err(Error::validation(format!(
                "feature map data has {} values, expected {}",
                data.len(),
                height * width * dim
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite feature value at flat index {pos}"
            )));
        }
        if patch_stride_px == 0 {
            return Err(Error::validation("patch stride must be positive"));
        }
        if (image_width_px as usize) < width || (image_height_px as usize) < height {
            return Err(Error::validation(format!(
                "image {image_width_px}x{image_height_px}px is smaller than the {width}x{height} patch grid"
            )));
        }
        Ok(FeatureMap {
            height,
            width,
            dim,
            data,
            image_width_px,
            image_height_px,
            patch_stride_px,
        })
    }

    /// Map whose geometry is exactly the patch grid: image size = grid * stride.
    pub fn from_grid(
        height: usize,
        width: usize,
        dim: usize,
        data: Vec<f32>,
        stride: u32,
    ) -> Result<Self> {
        FeatureMap::new(
            height,
            width,
            dim,
            data,
            width as u32 * stride,
            height as u32 * stride,
            stride,
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn image_width_px(&self) -> u32 {
        self.image_width_px
    }

    pub fn image_height_px(&self) -> u32 {
        self.image_height_px
    }

    pub fn patch_stride_px(&self) -> u32 {
        self.patch_stride_px
    }

    /// Feature vector of patch cell `(row, col)`.
    pub fn cell(&self, row: usize, col: usize) -> &[f32] {
        let start = (row * self.width + col) * self.dim;
        &self.data[start..start + self.dim]
    }

    /// Pixel coordinates of the center of patch cell `(row, col)`.
    pub fn cell_center_px(&self, row: usize, col: usize) -> (f32, f32) {
        let s = self.patch_stride_px as f32;
        ((col as f32 + 0.5) * s, (row as f32 + 0.5) * s)
    }

    /// Copy with every patch vector scaled to unit L2 norm; all-zero patches
    /// stay zero.
    pub fn l2_normalized(&self) -> Self {
        let mut data = self.data.clone();
        for cell in data.chunks_exact_mut(self.dim) {
            let norm = l2_norm(cell);
            if norm > 0.0 {
                cell.iter_mut().for_each(|v| *v /= norm);
            }
        }
        FeatureMap { data, ..self.clone() }
    }

    /// Applies `f` to every value, keeping geometry.
    pub fn map_values(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        FeatureMap::new(
            self.height,
            self.width,
            self.dim,
            self.data.iter().map(|&v| f(v)).collect(),
            self.image_width_px,
            self.image_height_px,
            self.patch_stride_px,
        )
    }
}

/// Fixed-size `S x S x D` grid sampled from a feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionFeatures {
    grid: usize,
    dim: usize,
    data: Vec<f32>,
}

impl RegionFeatures {
    pub fn new(grid: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if grid == 0 || dim == 0 {
            return Err(Error::validation("region grid and dim must be nonzero"));
        }
        if data.len() != grid * grid * dim {
            return Err(Error::validation(format!(
                "region data has {} values, expected {}",
                data.len(),
                grid * grid * dim
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite region feature"));
        }
        Ok(RegionFeatures { grid, dim, data })
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn cell(&self, row: usize, col: usize) -> &[f32] {
        let start = (row * self.grid + col) * self.dim;
        &self.data[start..start + self.dim]
    }

    /// Spatial mean over all `S x S` cells.
    pub fn mean_feature(&self) -> Vec<f32> {
        let mut acc = vec![0f64; self.dim];
        for cell in self.data.chunks_exact(self.dim) {
            for (a, &v) in acc.iter_mut().zip(cell) {
                *a += v as f64;
            }
        }
        let n = (self.grid * self.grid) as f64;
        acc.into_iter().map(|a| (a / n) as f32).collect()
    }
}

/// `C` class prototypes followed by `B` class-agnostic background prototypes.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeBank {
    dim: usize,
    class_names: Vec<String>,
    class_prototypes: Vec<f32>,
    background_prototypes: Vec<f32>,
    normalized: bool,
}

const NORM_TOL: f32 = 1e-5;

impl PrototypeBank {
    pub fn new(
        dim: usize,
        class_names: Vec<String>,
        class_prototypes: Vec<f32>,
        background_prototypes: Vec<f32>,
        normalized: bool,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("prototype dim must be nonzero"));
        }
        if class_names.is_empty() {
            return Err(Error::validation("prototype bank needs at least one class"));
        }
        if class_prototypes.len() != class_names.len() * dim {
            return Err(Error::validation(format!(
                "{} class names but {} class prototype values (dim {dim})",
                class_names.len(),
                class_prototypes.len()
            )));
        }
        if !background_prototypes.len().is_multiple_of(dim) {
            return Err(Error::validation(format!(
                "background prototype payload of {} values is not a multiple of dim {dim}",
                background_prototypes.len()
            )));
        }
        if let Some(name) = class_names.iter().find(|n| n.contains('\0')) {
            return Err(Error::validation(format!("class name {name:?} contains NUL")));
        }
        let all = class_prototypes.iter().chain(&background_prototypes);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite prototype value"));
        }
        if normalized {
            for (k, p) in class_prototypes
                .chunks_exact(dim)
                .chain(background_prototypes.chunks_exact(dim))
                .enumerate()
            {
                let norm = l2_norm(p);
                if (norm - 1.0).abs() > NORM_TOL {
                    return Err(Error::validation(format!(
                        "prototype {k} has norm {norm} but the bank is flagged normalized"
                    )));
                }
            }
        }
        Ok(PrototypeBank {
            dim,
            class_names,
            class_prototypes,
            background_prototypes,
            normalized,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn background_count(&self) -> usize {
        self.background_prototypes.len() / self.dim
    }

    pub fn total_count(&self) -> usize {
        self.class_count() + self.background_count()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_name(&self, class_id: usize) -> &str {
        &self.class_names[class_id]
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|n| n == name)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn class_prototypes(&self) -> &[f32] {
        &self.class_prototypes
    }

    pub fn background_prototypes(&self) -> &[f32] {
        &self.background_prototypes
    }

    pub fn class_prototype(&self, class_id: usize) -> &[f32] {
        &self.class_prototypes[class_id * self.dim..(class_id + 1) * self.dim]
    }

    pub fn background_prototype(&self, k: usize) -> &[f32] {
        &self.background_prototypes[k * self.dim..(k + 1) * self.dim]
    }

    /// Prototype `k` in channel order: classes first, then backgrounds.
    pub fn prototype(&self, k: usize) -> &[f32] {
        let c = self.class_count();
        if k < c {
            self.class_prototype(k)
        } else {
            self.background_prototype(k - c)
        }
    }

    /// Copy of this bank with the background prototypes replaced.
    pub fn with_backgrounds(&self, background_prototypes: Vec<f32>) -> Result<Self> {
        PrototypeBank::new(
            self.dim,
            self.class_names.clone(),
            self.class_prototypes.clone(),
            background_prototypes,
            self.normalized,
        )
    }
}

pub(crate) fn l2_norm(v: &[f32]) -> f32 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt() as f32
}

/// L2-normalizes `v` in place. Fails on a (near) zero vector.
pub(crate) fn normalize_in_place(v: &mut [f32]) -> Result<()> {
    let norm = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
    if !(norm > 1e-12) || !norm.is_finite() {
        return Err(Error::validation(format!(
            "cannot L2-normalize a vector of norm {norm}"
        )));
    }
    for x in v.iter_mut() {
        *x = (*x as f64 / norm) as f32;
    }
    Ok(())
}
