use crate::error::{Error, Result};
use crate::feature_io::{normalize_in_place, BBox, FeatureMap};

/// Binary mask over the patch grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchMask {
    height: usize,
    width: usize,
    cells: Vec<bool>,
}

impl PatchMask {
    pub fn new(height: usize, width: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != height * width {
            return Err(Error::validation(format!(
                "mask has {} cells, expected {height}x{width}",
                cells.len()
            )));
        }
        Ok(PatchMask {
            height,
            width,
            cells,
        })
    }

    /// Decodes alternating run lengths, starting with a run of zeros.
    pub fn from_rle(height: usize, width: usize, counts: &[usize]) -> Result<Self> {
        let mut cells = Vec::with_capacity(height * width);
        let mut value = false;
        for &run in counts {
            cells.extend(std::iter::repeat_n(value, run));
            value = !value;
        }
        if cells.len() != height * width {
            return Err(Error::validation(format!(
                "RLE covers {} cells, expected {}",
                cells.len(),
                height * width
            )));
        }
        PatchMask::new(height, width, cells)
    }

    pub fn to_rle(&self) -> Vec<usize> {
        let mut counts = Vec::new();
        let mut value = false;
        let mut run = 0;
        for &c in &self.cells {
            if c == value {
                run += 1;
            } else {
                counts.push(run);
                value = c;
                run = 1;
            }
        }
        counts.push(run);
        counts
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

/// Where an example object sits in its image.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Box(BBox),
    Mask(PatchMask),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstancePrototype {
    pub vector: Vec<f32>,
    pub class_id: usize,
}

/// Patch cells selected by `region`: mask cells directly, or every cell whose
/// center lies inside the box.
pub fn select_cells(fm: &FeatureMap, region: &Region) -> Result<Vec<(usize, usize)>> {
    let cells: Vec<(usize, usize)> = match region {
        Region::Mask(mask) => {
            if mask.height() != fm.height() || mask.width() != fm.width() {
                return Err(Error::validation(format!(
                    "mask grid {}x{} does not match feature grid {}x{}",
                    mask.height(),
                    mask.width(),
                    fm.height(),
                    fm.width()
                )));
            }
            (0..fm.height())
                .flat_map(|r| (0..fm.width()).map(move |c| (r, c)))
                .filter(|&(r, c)| mask.get(r, c))
                .collect()
        }
        Region::Box(b) => {
            b.validate()?;
            (0..fm.height())
                .flat_map(|r| (0..fm.width()).map(move |c| (r, c)))
                .filter(|&(r, c)| {
                    let (x, y) = fm.cell_center_px(r, c);
                    b.contains_point(x, y)
                })
                .collect()
        }
    };
    if cells.is_empty() {
        return Err(Error::EmptyRegion(
            "region selects no patch cell after rasterization".into(),
        ));
    }
    Ok(cells)
}

/// Mean feature over the selected patch cells, L2-normalized when asked.
pub fn instance_prototype(
    fm: &FeatureMap,
    region: &Region,
    class_id: usize,
    normalize: bool,
) -> Result<InstancePrototype> {
    let cells = select_cells(fm, region)?;
    let mut acc = vec![0f64; fm.dim()];
    for &(r, c) in &cells {
        for (a, &v) in acc.iter_mut().zip(fm.cell(r, c)) {
            *a += v as f64;
        }
    }
    let n = cells.len() as f64;
    let mut vector: Vec<f32> = acc.into_iter().map(|a| (a / n) as f32).collect();
    if normalize {
        normalize_in_place(&mut vector)?;
    }
    Ok(InstancePrototype { vector, class_id })
}
