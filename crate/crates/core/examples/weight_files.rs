//! Saves and reloads network weights in the PHW1 container.
//!
//! cargo run --example weight_files

use protohead::classifier::{classifier_channels, ClsNetWeights};
use protohead::localizer::{localizer_channels, IntegralParams, LocNetWeights};
use protohead::nn::{load_weights, Branch};

fn main() -> protohead::Result<()> {
    let dir = std::env::temp_dir().join("protohead-weights");
    std::fs::create_dir_all(&dir)?;
    let backgrounds = 2;

    let cls = ClsNetWeights::seeded(classifier_channels(128, backgrounds), 32, 3, 1);
    let cls_path = dir.join("cls.phw1");
    cls.save(&cls_path)?;

    let loc = LocNetWeights::seeded(localizer_channels(backgrounds), 32, 5, 2);
    let loc_path = dir.join("loc.phw1");
    loc.save(&IntegralParams::top_heavy(16, 4.0), &loc_path)?;

    for path in [&cls_path, &loc_path] {
        let wf = load_weights(path)?;
        let branch = if wf.branch == Branch::Classification { "classification" } else { "localization" };
        let params: usize = wf.tensors.iter().map(|t| t.data.len()).sum();
        println!("{}: {branch}, {} blocks, {} inputs, {params} parameters", path.display(), wf.block_count, wf.in_channels);
    }

    assert_eq!(ClsNetWeights::load(&cls_path)?, cls);
    let (loc_back, params) = LocNetWeights::load(&loc_path)?;
    assert_eq!(loc_back, loc);
    println!("theta_w[..3] = {:?}", &params.theta_w[..3]);
    Ok(())
}
