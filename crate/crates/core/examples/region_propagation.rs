//! Box refinement by region propagation: initial heatmap, propagated
//! logits, spatial integral and the refined box.
//!
//! cargo run --example region_propagation

use protohead::localizer::{
    box_to_heatmap, expand_proposal, spatial_integral, to_absolute, Heatmap, IntegralParams, Propagator,
};
use protohead::BBox;

/// Grows the initial heatmap by one cell in every direction.
struct Dilate;

impl Propagator for Dilate {
    fn propagate(&self, initial: &Heatmap, _class_sim: &[f32]) -> protohead::Result<Heatmap> {
        let s = initial.grid();
        let mut out = vec![-20.0; s * s];
        for r in 0..s {
            for c in 0..s {
                let near = (r.saturating_sub(1)..(r + 2).min(s))
                    .any(|rr| (c.saturating_sub(1)..(c + 2).min(s)).any(|cc| initial.get(rr, cc) > 0.5));
                if near {
                    out[r * s + c] = 20.0;
                }
            }
        }
        Heatmap::new(s, out)
    }
}

fn show(name: &str, map: &Heatmap) {
    println!("{name}:");
    for r in 0..map.grid() {
        let row: String = (0..map.grid()).map(|c| if map.get(r, c) > 0.0 { '#' } else { '.' }).collect();
        println!("  {row}");
    }
}

fn main() -> protohead::Result<()> {
    let s = 12;
    let proposal = BBox::new(100.0, 80.0, 60.0, 40.0)?;
    let expanded = expand_proposal(&proposal)?;
    println!("proposal {:?} expanded {:?}", proposal.corners(), expanded.corners());

    let initial = box_to_heatmap(&proposal, &expanded, s)?;
    show("initial", &initial);
    let logits = protohead::localizer::propagate(&initial, &vec![0.0; s * s], &Dilate)?;
    show("propagated", &logits);

    let params = IntegralParams::top_heavy(s, 20.0);
    let rel = spatial_integral(&logits, &params)?;
    let refined = to_absolute(&rel, &expanded)?;
    println!("relative {rel:?}");
    println!("refined {:?}", refined.corners());
    Ok(())
}
