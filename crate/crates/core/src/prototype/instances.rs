//! Line-delimited JSON instance lists and bank assembly.
//!
//! One record per line:
//!
//! ```text
//! {"features": "img0.phf", "class": "mug", "box": [x0, y0, x1, y1]}
//! {"features": "img1.phf", "class": "sky", "background": true,
//!  "mask": {"height": 16, "width": 16, "counts": [40, 12, ...]}}
//! ```
//!
//! Masks are run-length encoded over the patch grid, row-major, starting with
//! a run of zeros. Relative feature paths resolve against the list's directory.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use super::cluster::{build_background_prototypes, build_class_prototype, BuildConfig};
use super::instance::{instance_prototype, InstancePrototype, PatchMask, Region};
use crate::error::{Error, Result};
use crate::feature_io::{load_feature_map, read_file, BBox, FeatureMap, PrototypeBank};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRecord {
    pub height: usize,
    pub width: usize,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub features: PathBuf,
    pub class: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub background: bool,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f32; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<MaskRecord>,
}

impl InstanceRecord {
    pub fn region(&self) -> Result<Region> {
        match (&self.bbox, &self.mask) {
            (Some([x0, y0, x1, y1]), None) => Ok(Region::Box(BBox::from_corners(*x0, *y0, *x1, *y1)?)),
            (None, Some(m)) => Ok(Region::Mask(PatchMask::from_rle(m.height, m.width, &m.counts)?)),
            _ => Err(Error::validation(
                "instance record needs exactly one of \"box\" or \"mask\"",
            )),
        }
    }
}

pub fn parse_instance_list(text: &str, source: &str) -> Result<Vec<InstanceRecord>> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rec: InstanceRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: source.to_owned(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        rec.region().map_err(|e| Error::Parse {
            path: source.to_owned(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

pub fn read_instance_list(path: impl AsRef<Path>) -> Result<Vec<InstanceRecord>> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|e| Error::Format(format!("{}: not UTF-8: {e}", path.display())))?;
    parse_instance_list(&text, &path.display().to_string())
}

pub fn format_instance_list(records: &[InstanceRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("instance record serializes") + "\n")
        .collect()
}

/// Builds a bank from instance records. Class order and background order are
/// the order of first appearance in `records`.
pub fn build_bank(
    records: &[InstanceRecord],
    base_dir: &Path,
    cfg: &BuildConfig,
) -> Result<PrototypeBank> {
    let mut maps: HashMap<PathBuf, FeatureMap> = HashMap::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut bg_names: Vec<String> = Vec::new();
    let mut class_groups: Vec<Vec<InstancePrototype>> = Vec::new();
    let mut bg_groups: Vec<Vec<InstancePrototype>> = Vec::new();

    for rec in records {
        let path = if rec.features.is_absolute() {
            rec.features.clone()
        } else {
            base_dir.join(&rec.features)
        };
        if !maps.contains_key(&path) {
            let fm = load_feature_map(&path)?;
            maps.insert(path.clone(), fm);
        }
        let fm = &maps[&path];
        let (names, groups) = if rec.background {
            (&mut bg_names, &mut bg_groups)
        } else {
            (&mut class_names, &mut class_groups)
        };
        let id = match names.iter().position(|n| *n == rec.class) {
            Some(id) => id,
            None => {
                names.push(rec.class.clone());
                groups.push(Vec::new());
                names.len() - 1
            }
        };
        match instance_prototype(fm, &rec.region()?, id, cfg.normalize) {
            Ok(p) => groups[id].push(p),
            Err(Error::EmptyRegion(msg)) => {
                warn!("skipping instance of {:?} in {}: {msg}", rec.class, path.display())
            }
            Err(e) => return Err(e),
        }
    }

    if class_names.is_empty() {
        return Err(Error::validation("instance list has no (non-background) class"));
    }
    let mut class_protos = Vec::new();
    for (id, group) in class_groups.iter().enumerate() {
        if group.is_empty() {
            return Err(Error::validation(format!(
                "class {:?} has no usable instances",
                class_names[id]
            )));
        }
        let mut class_cfg = *cfg;
        class_cfg.cluster.seed = cfg.cluster.seed.wrapping_add(id as u64);
        class_protos.extend(build_class_prototype(group, &class_cfg)?);
    }
    let dim = class_protos.len() / class_names.len();
    let bg_protos = if bg_groups.is_empty() {
        Vec::new()
    } else {
        let mut bg_cfg = *cfg;
        bg_cfg.cluster.seed = cfg.cluster.seed.wrapping_add(class_names.len() as u64);
        build_background_prototypes(&bg_groups, &bg_cfg)?
    };
    PrototypeBank::new(dim, class_names, class_protos, bg_protos, cfg.normalize)
}
