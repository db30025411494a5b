//! Text formats for proposals (whitespace columns) and detections (JSON lines).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Detection;
use crate::error::{Error, Result};
use crate::feature_io::{read_file, write_file, BBox};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub bbox: BBox,
    /// Carried through from the external proposal generator; not used in scoring.
    pub objectness: f32,
}

/// Parses `x0 y0 x1 y1 [objectness]` lines; blank lines and `#` comments are skipped.
pub fn parse_proposals(text: &str, source: &str) -> Result<Vec<Proposal>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: source.to_owned(),
            line: idx + 1,
            msg,
        };
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f32>().map_err(|e| err(format!("bad number {t:?}: {e}"))))
            .collect::<Result<Vec<f32>>>()?;
        if vals.len() != 4 && vals.len() != 5 {
            return Err(err(format!("expected 4 or 5 columns, found {}", vals.len())));
        }
        let bbox = BBox::from_corners(vals[0], vals[1], vals[2], vals[3])
            .map_err(|e| err(e.to_string()))?;
        out.push(Proposal {
            bbox,
            objectness: vals.get(4).copied().unwrap_or(1.0),
        });
    }
    Ok(out)
}

pub fn read_proposals(path: impl AsRef<Path>) -> Result<Vec<Proposal>> {
    let path = path.as_ref();
    let text = String::from_utf8(read_file(path)?)
        .map_err(|e| Error::Format(format!("{}: not UTF-8: {e}", path.display())))?;
    parse_proposals(&text, &path.display().to_string())
}

pub fn format_proposals(proposals: &[Proposal]) -> String {
    proposals
        .iter()
        .map(|p| {
            let [x0, y0, x1, y1] = p.bbox.corners();
            format!("{x0} {y0} {x1} {y1} {}\n", p.objectness)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub x0: f32,
    pub y0: f32,
    pub x1: f32,
    pub y1: f32,
    pub class: String,
    pub class_id: usize,
    pub score: f32,
    pub proposal: usize,
}

impl From<&Detection> for DetectionRecord {
    fn from(d: &Detection) -> Self {
        let [x0, y0, x1, y1] = d.bbox.corners();
        DetectionRecord {
            x0,
            y0,
            x1,
            y1,
            class: d.class_name.clone(),
            class_id: d.class_id,
            score: d.score,
            proposal: d.proposal_index,
        }
    }
}

pub fn format_detections(dets: &[Detection]) -> String {
    dets.iter()
        .map(|d| {
            serde_json::to_string(&DetectionRecord::from(d)).expect("record serializes") + "\n"
        })
        .collect()
}

pub fn write_detections(dets: &[Detection], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), format_detections(dets).as_bytes())
}

pub fn parse_detections(text: &str, source: &str) -> Result<Vec<DetectionRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: source.to_owned(),
                line: idx + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<Vec<DetectionRecord>> {
    let path = path.as_ref();
    let text = String::from_utf8(read_file(path)?)
        .map_err(|e| Error::Format(format!("{}: not UTF-8: {e}", path.display())))?;
    parse_detections(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proposals_parse_with_and_without_objectness() {
        let text = "# x0 y0 x1 y1 obj\n0 0 10 10 0.9\n\n5 5 20 30\n";
        let p = parse_proposals(text, "p").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].objectness, 0.9);
        assert_eq!(p[1].bbox.corners(), [5.0, 5.0, 20.0, 30.0]);
        assert_eq!(parse_proposals(&format_proposals(&p), "p").unwrap(), p);
    }

    #[test]
    fn proposal_errors() {
        assert!(matches!(parse_proposals("1 2 3", "p"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_proposals("0 0 a 1", "p").is_err());
        assert!(matches!(
            parse_proposals("0 0 1 1\n5 5 5 9", "p"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn detection_records_round_trip() {
        let d = Detection {
            bbox: BBox::from_corners(1.0, 2.0, 11.0, 22.0).unwrap(),
            class_id: 3,
            class_name: "mug".into(),
            score: 0.75,
            proposal_index: 7,
        };
        let text = format_detections(&[d.clone()]);
        let recs = parse_detections(&text, "d").unwrap();
        assert_eq!(recs, vec![DetectionRecord::from(&d)]);
        assert_eq!(recs[0].x1, 11.0);
    }
}
