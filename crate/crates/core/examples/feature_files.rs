//! Writes a patch feature map to disk, reads it back and samples a region.
//!
//! cargo run --example feature_files

use protohead::feature_io::{load_feature_map, peek_feature_header, roi_align, save_feature_map};
use protohead::{BBox, FeatureMap};

fn main() -> protohead::Result<()> {
    let (h, w, d) = (6, 8, 3);
    let data = (0..h * w * d).map(|k| ((k / d) % w) as f32 + (k % d) as f32 * 0.1).collect();
    let fm = FeatureMap::from_grid(h, w, d, data, 14)?;

    let dir = std::env::temp_dir().join("protohead-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("map.phf1");
    save_feature_map(&fm, &path)?;

    let bytes = std::fs::read(&path)?;
    let header = peek_feature_header(&bytes)?;
    println!("{} ({} bytes): {:?}", path.display(), bytes.len(), header);

    let back = load_feature_map(&path)?;
    assert_eq!(back, fm);

    // Features grow with the column index, so the samples do too.
    let region = roi_align(&back, &BBox::from_corners(20.0, 10.0, 90.0, 60.0)?, 4)?;
    for i in 0..region.grid() {
        let row: Vec<String> = (0..region.grid()).map(|j| format!("{:5.2}", region.cell(i, j)[0])).collect();
        println!("{}", row.join(" "));
    }
    Ok(())
}
