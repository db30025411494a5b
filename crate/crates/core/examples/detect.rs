//! End-to-end detection on a synthetic image with one planted object.
//!
//! The classifier is built by hand so that its logit follows the mean
//! target-class similarity, and box refinement thresholds that similarity.
//! Real deployments load trained weights with `ClsNetWeights::load` and
//! `LocNetWeights::load`.
//!
//! cargo run --example detect

use protohead::classifier::{classifier_channels, ClsBlock, ClsNetWeights};
use protohead::localizer::{Heatmap, IntegralParams, Propagator};
use protohead::nn::Conv2d;
use protohead::pipeline::format_detections;
use protohead::{BBox, Detector, FeatureMap, PipelineConfig, PrototypeBank};

const DIM: usize = 6;

struct SimilarityThreshold {
    channels: usize,
}

impl Propagator for SimilarityThreshold {
    fn propagate(&self, initial: &Heatmap, class_sim: &[f32]) -> protohead::Result<Heatmap> {
        let logits = class_sim
            .chunks_exact(self.channels)
            .map(|c| if c[0] > 0.5 { 30.0 } else { -30.0 })
            .collect();
        Heatmap::new(initial.grid(), logits)
    }
}

fn unit(k: usize) -> Vec<f32> {
    let mut v = vec![0.0; DIM];
    v[k] = 1.0;
    v
}

fn main() -> protohead::Result<()> {
    // 12x16 patches of 16px; a "bowl" covers patch rows 4..9 and columns 6..12.
    let (rows, cols) = (12, 16);
    let mut data = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            data.extend(if (4..9).contains(&r) && (6..12).contains(&c) { unit(2) } else { unit(5) });
        }
    }
    let fm = FeatureMap::from_grid(rows, cols, DIM, data, 16)?;
    let truth = BBox::from_corners(96.0, 64.0, 192.0, 144.0)?;

    let names = ["plate", "cup", "bowl", "spoon"].map(String::from).to_vec();
    let classes: Vec<f32> = (0..4).flat_map(unit).collect();
    let bank = PrototypeBank::new(DIM, names, classes, unit(5), true)?;

    let config = PipelineConfig::default();
    let cin = classifier_channels(config.rearrange_width, bank.background_count());
    let mut w = vec![0.0; 9 * cin];
    w[4 * cin] = 1.0;
    let block = ClsBlock {
        conv: Conv2d::new(cin, 1, 3, w, vec![0.0])?,
        attention: Conv2d::zeros(1, 1, 1),
    };
    let classifier = ClsNetWeights::new(vec![block], vec![12.0], -2.0)?;
    let propagator = SimilarityThreshold {
        channels: 1 + bank.background_count(),
    };
    let params = IntegralParams::top_heavy(config.grid, 20.0);
    let detector = Detector::new(bank, classifier, Box::new(propagator), params, config)?;

    let proposals = [
        BBox::from_corners(88.0, 70.0, 200.0, 150.0)?,
        BBox::from_corners(110.0, 60.0, 185.0, 130.0)?,
        BBox::from_corners(10.0, 10.0, 60.0, 50.0)?,
        BBox::from_corners(200.0, 150.0, 250.0, 190.0)?,
    ];
    let run = detector.detect(&fm, &proposals)?;
    println!(
        "{} candidates scored, {} above threshold, {} kept",
        run.candidates_scored,
        run.candidates_kept,
        run.detections.len()
    );
    print!("{}", format_detections(&run.detections));
    if let Some(top) = run.detections.first() {
        println!("top: {} IoU with the planted box {:.3}", top.class_name, top.bbox.iou(&truth));
    }
    Ok(())
}
