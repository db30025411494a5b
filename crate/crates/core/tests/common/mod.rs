#![allow(dead_code)]

use std::path::PathBuf;

use protohead::classifier::{classifier_channels, ClsBlock, ClsNetWeights};
use protohead::localizer::{Heatmap, Propagator};
use protohead::nn::Conv2d;
use protohead::prototype::{instance_prototype, Region};
use protohead::{BBox, FeatureMap, PrototypeBank, Result};
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect()
}

pub fn unit_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f32> {
    loop {
        let v = random_vec(rng, n);
        let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        if norm > 1e-3 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

pub fn random_bank<R: Rng>(rng: &mut R, dim: usize, classes: usize, backgrounds: usize) -> PrototypeBank {
    PrototypeBank::new(
        dim,
        (0..classes).map(|i| format!("class{i}")).collect(),
        random_vec(rng, classes * dim),
        random_vec(rng, backgrounds * dim),
        false,
    )
    .unwrap()
}

/// Scalar bilinear lookup in pixel space, written against the patch-center
/// convention independently of the library.
pub fn bilinear_oracle(fm: &FeatureMap, x_px: f64, y_px: f64) -> Vec<f64> {
    let s = fm.patch_stride_px() as f64;
    let u = (x_px / s - 0.5).max(0.0).min((fm.width() - 1) as f64);
    let v = (y_px / s - 0.5).max(0.0).min((fm.height() - 1) as f64);
    let mut out = vec![0f64; fm.dim()];
    for r in 0..fm.height() {
        for c in 0..fm.width() {
            let wx = (1.0 - (u - c as f64).abs()).max(0.0);
            let wy = (1.0 - (v - r as f64).abs()).max(0.0);
            if wx * wy == 0.0 {
                continue;
            }
            for d in 0..fm.dim() {
                out[d] += wx * wy * fm.cell(r, c)[d] as f64;
            }
        }
    }
    out
}

/// Direct 2D convolution over a channel-last tensor, zero padded.
pub fn conv_oracle(conv: &Conv2d, x: &[f32], h: usize, w: usize) -> Vec<f64> {
    let (cin, cout, k) = (conv.in_channels(), conv.out_channels(), conv.kernel());
    let pad = (k / 2) as isize;
    let mut out = vec![0f64; h * w * cout];
    for r in 0..h {
        for c in 0..w {
            for o in 0..cout {
                let mut acc = conv.bias()[o] as f64;
                for dr in 0..k {
                    for dc in 0..k {
                        let (rr, cc) = (r as isize + dr as isize - pad, c as isize + dc as isize - pad);
                        if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                            continue;
                        }
                        for i in 0..cin {
                            let wt = conv.weight()[((o * k + dr) * k + dc) * cin + i] as f64;
                            acc += wt * x[(rr as usize * w + cc as usize) * cin + i] as f64;
                        }
                    }
                }
                out[(r * w + c) * cout + o] = acc;
            }
        }
    }
    out
}

pub fn sigmoid64(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Saturated logits wherever the target-similarity channel exceeds `threshold`.
pub struct ThresholdOracle {
    pub threshold: f32,
    pub channels: usize,
}

impl Propagator for ThresholdOracle {
    fn propagate(&self, initial: &Heatmap, class_sim: &[f32]) -> Result<Heatmap> {
        let data = class_sim
            .chunks_exact(self.channels)
            .map(|c| if c[0] > self.threshold { 50.0 } else { -50.0 })
            .collect();
        Heatmap::new(initial.grid(), data)
    }
}

/// Planted-object scene: background patches carry one unit vector, patches
/// under the object another, and every other class prototype is orthogonal
/// to both.
pub struct PlantedScene {
    pub features: FeatureMap,
    pub truth: BBox,
    pub class_id: usize,
    pub classes: usize,
    pub background: Vec<f32>,
    pub object: Vec<f32>,
    pub proposals: Vec<BBox>,
}

pub fn planted_scene<R: Rng>(rng: &mut R, classes: usize, dim: usize) -> PlantedScene {
    assert!(dim > classes);
    let (rows, cols, stride) = (14usize, 16usize, 16u32);
    let class_id = rng.gen_range(0..classes);
    let basis = |k: usize| {
        let mut v = vec![0f32; dim];
        v[k] = 1.0;
        v
    };
    let object = basis(class_id);
    let background = basis(dim - 1);
    let (h, w) = (rng.gen_range(4..8usize), rng.gen_range(4..8usize));
    let (r0, c0) = (rng.gen_range(1..rows - h), rng.gen_range(1..cols - w));
    let mut data = Vec::with_capacity(rows * cols * dim);
    for r in 0..rows {
        for c in 0..cols {
            let inside = r >= r0 && r < r0 + h && c >= c0 && c < c0 + w;
            data.extend(if inside { &object } else { &background });
        }
    }
    let features = FeatureMap::from_grid(rows, cols, dim, data, stride).unwrap();
    let s = stride as f32;
    let truth = BBox::from_corners(
        c0 as f32 * s,
        r0 as f32 * s,
        (c0 + w) as f32 * s,
        (r0 + h) as f32 * s,
    )
    .unwrap();
    let jitter = |rng: &mut R, b: &BBox| {
        let [x0, y0, x1, y1] = b.corners();
        let d = 0.12 * b.w.min(b.h);
        BBox::from_corners(
            x0 + rng.gen_range(-d..d),
            y0 + rng.gen_range(-d..d),
            x1 + rng.gen_range(-d..d),
            y1 + rng.gen_range(-d..d),
        )
        .unwrap()
    };
    let mut proposals = vec![jitter(rng, &truth), jitter(rng, &truth)];
    let (iw, ih) = (cols as f32 * s, rows as f32 * s);
    while proposals.len() < 8 {
        let (bw, bh) = (rng.gen_range(20.0..60.0), rng.gen_range(20.0..60.0));
        let b = BBox::from_corners(0.0, 0.0, bw, bh).unwrap();
        let b = BBox::new(rng.gen_range(bw / 2.0..iw - bw / 2.0), rng.gen_range(bh / 2.0..ih - bh / 2.0), b.w, b.h).unwrap();
        if b.iou(&truth) == 0.0 {
            proposals.push(b);
        }
    }
    PlantedScene {
        features,
        truth,
        class_id,
        classes,
        background,
        object,
        proposals,
    }
}

/// Classifier whose logit is `gain * mean(relu(target similarity)) + bias`.
pub fn target_similarity_classifier(t: usize, backgrounds: usize, gain: f32, bias: f32) -> ClsNetWeights {
    let cin = classifier_channels(t, backgrounds);
    let mut w = vec![0f32; 9 * cin];
    w[4 * cin] = 1.0;
    let conv = Conv2d::new(cin, 1, 3, w, vec![0.0]).unwrap();
    // A zero attention conv gates every cell by exactly 0.5.
    let attention = Conv2d::zeros(1, 1, 1);
    ClsNetWeights::new(vec![ClsBlock { conv, attention }], vec![2.0 * gain], bias).unwrap()
}

/// Bank whose planted-class prototype is the mean feature under the planted
/// box; the remaining classes are orthogonal unit vectors.
pub fn planted_bank(scene: &PlantedScene) -> PrototypeBank {
    let dim = scene.features.dim();
    let planted = instance_prototype(&scene.features, &Region::Box(scene.truth), scene.class_id, true)
        .unwrap()
        .vector;
    let mut classes = Vec::new();
    for k in 0..scene.classes {
        if k == scene.class_id {
            classes.extend_from_slice(&planted);
        } else {
            let mut v = vec![0f32; dim];
            v[k] = 1.0;
            classes.extend(v);
        }
    }
    PrototypeBank::new(
        dim,
        (0..scene.classes).map(|k| format!("class{k}")).collect(),
        classes,
        scene.background.clone(),
        true,
    )
    .unwrap()
}
