//! Open-set object detection head over precomputed backbone features.
//!
//! Given a patch feature map of an image, a set of region proposals and a
//! bank of class and background prototypes, the pipeline
//!
//! 1. samples each proposal with [`feature_io::roi_align`],
//! 2. projects the samples onto the prototypes ([`classifier::prototype_projection`]),
//! 3. pre-selects the top-K classes and scores each one with a shared
//!    one-vs-rest network over a class-rearranged similarity map,
//! 4. refines the box of every scored class by region propagation
//!    ([`localizer::localize`]),
//! 5. applies score thresholding, class-agnostic NMS and a small-box filter.
//!
//! Prototypes are built from example images with [`prototype::build_bank`],
//! either by plain averaging or by Sinkhorn-based online clustering.
//!
//! See the crate's `examples/` directory for one runnable program per stage.

pub mod classifier;
pub mod cli;
pub mod error;
pub mod feature_io;
pub mod localizer;
pub mod nn;
pub mod pipeline;
pub mod prototype;

pub use error::{Error, Result};
pub use feature_io::{BBox, FeatureMap, PrototypeBank, RegionFeatures};
pub use pipeline::{Detection, DetectionRun, Detector, PipelineConfig};
