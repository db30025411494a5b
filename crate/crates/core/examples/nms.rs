//! Post-processing: class-agnostic versus per-class NMS and the small-box
//! filter.
//!
//! cargo run --example nms

use protohead::pipeline::{filter_small, nms_class_agnostic, nms_per_class};
use protohead::{BBox, Detection};

fn det(x0: f32, y0: f32, x1: f32, y1: f32, class_name: &str, class_id: usize, score: f32) -> Detection {
    Detection {
        bbox: BBox::from_corners(x0, y0, x1, y1).unwrap(),
        class_id,
        class_name: class_name.into(),
        score,
        proposal_index: 0,
    }
}

fn print(title: &str, dets: &[Detection]) {
    println!("{title}");
    for d in dets {
        println!("  {:<5} {:.2} {:?}", d.class_name, d.score, d.bbox.corners());
    }
}

fn main() {
    let dets = vec![
        det(10.0, 10.0, 60.0, 60.0, "cup", 0, 0.92),
        det(12.0, 11.0, 62.0, 58.0, "mug", 1, 0.85),
        det(14.0, 14.0, 58.0, 64.0, "cup", 0, 0.40),
        det(100.0, 20.0, 140.0, 70.0, "cup", 0, 0.70),
        det(200.0, 200.0, 206.0, 207.0, "mug", 1, 0.65),
    ];
    print("input", &dets);
    print("class-agnostic nms @0.5", &nms_class_agnostic(&dets, 0.5));
    print("per-class nms @0.5", &nms_per_class(&dets, 0.5));
    print("class-agnostic nms, then min area 100", &filter_small(&nms_class_agnostic(&dets, 0.5), 100.0));
}
