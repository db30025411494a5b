//! Scores one proposal against a prototype bank: projection, top-K
//! pre-selection, class rearrangement and the one-vs-rest network.
//!
//! cargo run --example classify_proposal

use protohead::classifier::{
    classifier_channels, classify, preselect_classes, prototype_projection, rearrange, ClsNetWeights,
};
use protohead::feature_io::roi_align;
use protohead::{BBox, FeatureMap, PrototypeBank};

fn main() -> protohead::Result<()> {
    let dim = 4;
    let data: Vec<f32> = (0..10 * 10)
        .flat_map(|k| {
            let (r, c) = (k / 10, k % 10);
            if (3..7).contains(&r) && (2..6).contains(&c) { [0.9, 0.3, 0.1, 0.0] } else { [0.0, 0.1, 0.2, 1.0] }
        })
        .collect();
    let fm = FeatureMap::from_grid(10, 10, dim, data, 16)?.l2_normalized();
    let bank = PrototypeBank::new(
        dim,
        vec!["kettle".into(), "lamp".into(), "chair".into()],
        vec![0.95, 0.3, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.5, 0.5, 0.5, 0.5],
        vec![0.0, 0.1, 0.2, 0.97],
        false,
    )?;

    let proposal = BBox::from_corners(30.0, 45.0, 100.0, 115.0)?;
    let region = roi_align(&fm, &proposal, 8)?;
    let sim = prototype_projection(&region, &bank)?;
    let selected = preselect_classes(&region, &bank, 2)?;
    println!("pre-selected: {:?}", selected.iter().map(|&c| bank.class_name(c)).collect::<Vec<_>>());

    let t = 8;
    let net = ClsNetWeights::seeded(classifier_channels(t, bank.background_count()), 16, 2, 7);
    for &c in &selected {
        let map = rearrange(&sim, c, t)?;
        println!("center cell of {:<6}: {:?}", bank.class_name(c), map.cell(4, 4));
        println!("score {:.4} (untrained network)", classify(&map, &net)?);
    }
    Ok(())
}
