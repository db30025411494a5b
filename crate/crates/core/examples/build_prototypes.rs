//! Builds a prototype bank from annotated example images, in both mean and
//! cluster mode.
//!
//! cargo run --example build_prototypes

use protohead::feature_io::{load_bank, save_feature_map};
use protohead::prototype::{build_bank, parse_instance_list, BuildConfig, ClusterConfig, PrototypeMode};
use protohead::FeatureMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIM: usize = 6;

/// 8x8 map: object patches near `object`, everything else near `background`.
fn scene(rng: &mut ChaCha8Rng, object: &[f32], background: &[f32], box_cells: (usize, usize, usize, usize)) -> FeatureMap {
    let (r0, c0, r1, c1) = box_cells;
    let mut data = Vec::new();
    for r in 0..8 {
        for c in 0..8 {
            let base = if r >= r0 && r < r1 && c >= c0 && c < c1 { object } else { background };
            data.extend(base.iter().map(|v| v + rng.gen_range(-0.05..0.05)));
        }
    }
    FeatureMap::from_grid(8, 8, DIM, data, 16).unwrap()
}

fn main() -> protohead::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cat = [1.0, 0.2, 0.0, 0.0, 0.0, 0.1];
    let dog = [0.1, 1.0, 0.3, 0.0, 0.0, 0.0];
    let floor = [0.0, 0.0, 0.0, 1.0, 0.5, 0.0];

    let dir = std::env::temp_dir().join("protohead-prototypes");
    std::fs::create_dir_all(&dir)?;
    let mut lines = Vec::new();
    for k in 0..4 {
        let (object, name) = if k % 2 == 0 { (&cat, "cat") } else { (&dog, "dog") };
        let file = format!("img{k}.phf1");
        save_feature_map(&scene(&mut rng, object, &floor, (2, 2, 6, 5)), dir.join(&file))?;
        lines.push(format!(r#"{{"features":"{file}","class":"{name}","box":[32,32,80,96]}}"#));
        lines.push(format!(r#"{{"features":"{file}","class":"floor","background":true,"box":[0,0,128,24]}}"#));
    }
    let records = parse_instance_list(&lines.join("\n"), "inline")?;

    for mode in [PrototypeMode::Mean, PrototypeMode::Cluster] {
        let cfg = BuildConfig {
            cluster: ClusterConfig {
                centroids: 3,
                steps: 50,
                ..ClusterConfig::default()
            },
            ..BuildConfig::normalized(mode)
        };
        let bank = build_bank(&records, &dir, &cfg)?;
        let path = dir.join(format!("{mode:?}.phb1").to_lowercase());
        protohead::feature_io::save_bank(&bank, &path)?;
        let bank = load_bank(&path)?;
        println!("{mode:?}: {} classes, {} backgrounds -> {}", bank.class_count(), bank.background_count(), path.display());
        for c in 0..bank.class_count() {
            let p: Vec<String> = bank.class_prototype(c).iter().map(|v| format!("{v:.2}")).collect();
            println!("  {:<4} [{}]", bank.class_name(c), p.join(", "));
        }
    }
    Ok(())
}
