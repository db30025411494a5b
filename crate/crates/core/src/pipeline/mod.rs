//! End-to-end detection over precomputed features and external proposals.

mod io;
mod nms;

pub use io::{
    format_detections, format_proposals, parse_detections, parse_proposals, read_detections,
    read_proposals, write_detections, DetectionRecord, Proposal,
};
pub use nms::{filter_small, nms_class_agnostic, nms_per_class};

use std::path::PathBuf;

use log::debug;
use rayon::prelude::*;

use crate::classifier::{
    classifier_channels, classify, preselect_classes, prototype_projection, rearrange,
    ClsNetWeights, DEFAULT_REARRANGE_WIDTH, DEFAULT_TOP_K,
};
use crate::error::{Error, Result};
use crate::feature_io::{roi_align, BBox, FeatureMap, PrototypeBank, DEFAULT_GRID};
use crate::localizer::{
    expansion_frame, localize_in_frame, localizer_channels, IntegralParams, Propagator,
};

pub const THREADS_ENV: &str = "PROTOHEAD_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub class_id: usize,
    pub class_name: String,
    pub score: f32,
    pub proposal_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub top_k: usize,
    pub rearrange_width: usize,
    pub grid: usize,
    pub nms_iou: f32,
    pub score_threshold: f32,
    pub min_box_area: f32,
    /// L2-normalize patch features before sampling.
    pub normalize: bool,
    /// `false` switches to per-class NMS.
    pub class_agnostic_nms: bool,
    /// Worker cap; `None` defers to `PROTOHEAD_THREADS`, then rayon's default.
    pub threads: Option<usize>,
    pub bank_path: Option<PathBuf>,
    pub cls_weights_path: Option<PathBuf>,
    pub loc_weights_path: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            top_k: DEFAULT_TOP_K,
            rearrange_width: DEFAULT_REARRANGE_WIDTH,
            grid: DEFAULT_GRID,
            nms_iou: 0.5,
            score_threshold: 0.05,
            min_box_area: 100.0,
            normalize: true,
            class_agnostic_nms: true,
            threads: None,
            bank_path: None,
            cls_weights_path: None,
            loc_weights_path: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 || self.rearrange_width == 0 || self.grid == 0 {
            return Err(Error::validation("K, T and grid size must all be at least 1"));
        }
        if !(self.nms_iou > 0.0 && self.nms_iou < 1.0) {
            return Err(Error::validation(format!(
                "NMS IoU threshold must lie in (0, 1), got {}",
                self.nms_iou
            )));
        }
        if !(self.min_box_area >= 0.0) {
            return Err(Error::validation("minimum box area must be non-negative"));
        }
        if !self.score_threshold.is_finite() {
            return Err(Error::validation("score threshold must be finite"));
        }
        if self.threads == Some(0) {
            return Err(Error::validation("thread count must be positive"));
        }
        Ok(())
    }
}

/// Result of one [`Detector::detect`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRun {
    /// Final detections, best first.
    pub detections: Vec<Detection>,
    /// Number of (proposal, class) pairs sent through the classifier.
    pub candidates_scored: usize,
    /// Candidates at or above the score threshold with a non-degenerate box, before NMS.
    pub candidates_kept: usize,
}

pub struct Detector {
    bank: PrototypeBank,
    classifier: ClsNetWeights,
    propagator: Box<dyn Propagator + Send>,
    integral: IntegralParams,
    config: PipelineConfig,
}

impl Detector {
    pub fn new(
        bank: PrototypeBank,
        classifier: ClsNetWeights,
        propagator: Box<dyn Propagator + Send>,
        integral: IntegralParams,
        config: PipelineConfig,
    ) -> Result<Self> {
        config.validate()?;
        let b = bank.background_count();
        let want = classifier_channels(config.rearrange_width, b);
        if classifier.in_channels() != want {
            return Err(Error::validation(format!(
                "classifier takes {} input channels; T={} and B={b} need {want}",
                classifier.in_channels(),
                config.rearrange_width
            )));
        }
        if let Some(ch) = propagator.input_channels() {
            if ch != localizer_channels(b) {
                return Err(Error::validation(format!(
                    "localizer takes {ch} input channels; B={b} needs {}",
                    localizer_channels(b)
                )));
            }
        }
        integral.validate(config.grid)?;
        Ok(Detector {
            bank,
            classifier,
            propagator,
            integral,
            config,
        })
    }

    pub fn bank(&self) -> &PrototypeBank {
        &self.bank
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn thread_count(&self) -> Option<usize> {
        self.config.threads.or_else(|| {
            std::env::var(THREADS_ENV)
                .ok()
                .and_then(|v| v.trim().parse::<usize>().ok())
                .filter(|&n| n > 0)
        })
    }

    /// Scores and localizes every proposal, then thresholds, suppresses and
    /// filters the candidates.
    pub fn detect(&self, fm: &FeatureMap, proposals: &[BBox]) -> Result<DetectionRun> {
        if proposals.is_empty() {
            return Err(Error::validation("no proposals given"));
        }
        if fm.dim() != self.bank.dim() {
            return Err(Error::validation(format!(
                "feature dim {} does not match prototype dim {}",
                fm.dim(),
                self.bank.dim()
            )));
        }
        let normalized;
        let fm = if self.config.normalize {
            normalized = fm.l2_normalized();
            &normalized
        } else {
            fm
        };
        let work = || -> Result<Vec<(Vec<Detection>, usize)>> {
            proposals
                .par_iter()
                .enumerate()
                .map(|(idx, p)| self.process_proposal(fm, idx, p))
                .collect()
        };
        let per_proposal = match self.thread_count() {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::validation(format!("cannot build worker pool: {e}")))?
                .install(work)?,
            None => work()?,
        };
        let candidates_scored = per_proposal.iter().map(|(_, n)| n).sum();
        let candidates: Vec<Detection> = per_proposal.into_iter().flat_map(|(d, _)| d).collect();
        let candidates_kept = candidates.len();
        let suppressed = if self.config.class_agnostic_nms {
            nms_class_agnostic(&candidates, self.config.nms_iou)
        } else {
            nms_per_class(&candidates, self.config.nms_iou)
        };
        let detections = filter_small(&suppressed, self.config.min_box_area)
            .into_iter()
            .filter(|d| d.bbox.area() > 0.0)
            .collect();
        Ok(DetectionRun {
            detections,
            candidates_scored,
            candidates_kept,
        })
    }

    fn process_proposal(
        &self,
        fm: &FeatureMap,
        idx: usize,
        proposal: &BBox,
    ) -> Result<(Vec<Detection>, usize)> {
        let cfg = &self.config;
        let region = roi_align(fm, proposal, cfg.grid)?;
        let sim = prototype_projection(&region, &self.bank)?;
        let selected = preselect_classes(&region, &self.bank, cfg.top_k)?;
        let (clipped, expanded) = expansion_frame(proposal, fm)?;
        let expanded_sim = prototype_projection(&roi_align(fm, &expanded, cfg.grid)?, &self.bank)?;
        let image = (fm.image_width_px() as f32, fm.image_height_px() as f32);
        let mut out = Vec::new();
        for &class_id in &selected {
            let score = classify(&rearrange(&sim, class_id, cfg.rearrange_width)?, &self.classifier)?;
            if score < cfg.score_threshold {
                continue;
            }
            let trace = match localize_in_frame(
                &clipped,
                &expanded,
                &expanded_sim,
                class_id,
                self.propagator.as_ref(),
                &self.integral,
                image,
            ) {
                Ok(t) => t,
                Err(Error::DegenerateBox(msg)) => {
                    debug!("proposal {idx} class {class_id}: dropped degenerate box ({msg})");
                    continue;
                }
                Err(e) => return Err(e),
            };
            out.push(Detection {
                bbox: trace.refined,
                class_id,
                class_name: self.bank.class_name(class_id).to_owned(),
                score,
                proposal_index: idx,
            });
        }
        Ok((out, selected.len()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localizer::LocNetWeights;

    fn one_class_setup(threshold: f32) -> (FeatureMap, Detector) {
        let fm = FeatureMap::from_grid(6, 6, 2, [1.0, 0.0].repeat(36), 10).unwrap();
        let bank = PrototypeBank::new(2, vec!["obj".into()], vec![1.0, 0.0], vec![], true).unwrap();
        let config = PipelineConfig {
            rearrange_width: 2,
            grid: 4,
            score_threshold: threshold,
            min_box_area: 0.0,
            ..Default::default()
        };
        let det = Detector::new(
            bank,
            ClsNetWeights::zeros(3, 4, 1),
            Box::new(LocNetWeights::zeros(2, 4, 1)),
            IntegralParams::uniform(4),
            config,
        )
        .unwrap();
        (fm, det)
    }

    #[test]
    fn zero_networks_give_one_half() {
        let proposal = BBox::from_corners(10.0, 10.0, 40.0, 40.0).unwrap();
        let (fm, det) = one_class_setup(0.5);
        let run = det.detect(&fm, &[proposal]).unwrap();
        assert_eq!(run.candidates_scored, 1);
        assert_eq!(run.detections.len(), 1);
        assert_eq!(run.detections[0].score, 0.5);
        let (fm, det) = one_class_setup(0.51);
        assert!(det.detect(&fm, &[proposal]).unwrap().detections.is_empty());
    }

    #[test]
    fn duplicate_proposals_are_suppressed() {
        let (fm, det) = one_class_setup(0.1);
        let p = BBox::from_corners(10.0, 10.0, 40.0, 40.0).unwrap();
        let run = det.detect(&fm, &[p, p, p]).unwrap();
        assert_eq!(run.candidates_scored, 3);
        assert_eq!(run.detections.len(), 1);
        assert_eq!(run.detections[0].proposal_index, 0);
    }

    #[test]
    fn rejects_incompatible_parts() {
        let bank = PrototypeBank::new(2, vec!["obj".into()], vec![1.0, 0.0], vec![], true).unwrap();
        let cfg = PipelineConfig {
            rearrange_width: 2,
            grid: 4,
            ..Default::default()
        };
        let wrong_cls = Detector::new(
            bank.clone(),
            ClsNetWeights::zeros(4, 2, 1),
            Box::new(LocNetWeights::zeros(2, 2, 1)),
            IntegralParams::uniform(4),
            cfg.clone(),
        );
        assert!(wrong_cls.is_err());
        let wrong_loc = Detector::new(
            bank.clone(),
            ClsNetWeights::zeros(3, 2, 1),
            Box::new(LocNetWeights::zeros(3, 2, 1)),
            IntegralParams::uniform(4),
            cfg.clone(),
        );
        assert!(wrong_loc.is_err());
        let wrong_theta = Detector::new(
            bank,
            ClsNetWeights::zeros(3, 2, 1),
            Box::new(LocNetWeights::zeros(2, 2, 1)),
            IntegralParams::uniform(5),
            cfg,
        );
        assert!(wrong_theta.is_err());
        let (fm, det) = one_class_setup(0.1);
        assert!(det.detect(&fm, &[]).is_err());
        let fm3 = FeatureMap::from_grid(2, 2, 3, vec![0.0; 12], 10).unwrap();
        assert!(det.detect(&fm3, &[BBox::new(5.0, 5.0, 4.0, 4.0).unwrap()]).is_err());
        let _ = fm;
    }

    #[test]
    fn config_validation() {
        let mut c = PipelineConfig::default();
        assert!(c.validate().is_ok());
        c.nms_iou = 1.0;
        assert!(c.validate().is_err());
        let c = PipelineConfig {
            top_k: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = PipelineConfig {
            min_box_area: -1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
