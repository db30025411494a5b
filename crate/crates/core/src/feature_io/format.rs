//! The `PHF1` feature-map and `PHB1` prototype-bank containers.
//!
//! All integers are `u32` little-endian and all values `f32` little-endian.
//!
//! ```text
//! PHF1: "PHF1" | H W D image_w image_h stride | H*W*D f32 (row-major H, W, D)
//! PHB1: "PHB1" | C B D | C NUL-terminated UTF-8 names | (C+B)*D f32 | u8 normalized
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::feature_io::{FeatureMap, PrototypeBank};

pub const FEATURE_MAGIC: &[u8; 4] = b"PHF1";
pub const BANK_MAGIC: &[u8; 4] = b"PHB1";
pub const FEATURE_HEADER_LEN: usize = 28;

/// Little-endian cursor over an in-memory file.
pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8], what: &'static str) -> Self {
        ByteReader { buf, pos: 0, what }
    }

    pub(crate) fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.buf.len() < 4 || &self.buf[..4] != magic {
            let got = String::from_utf8_lossy(&self.buf[..self.buf.len().min(4)]).into_owned();
            return Err(Error::Format(format!(
                "{}: expected magic {:?}, found {got:?}",
                self.what,
                std::str::from_utf8(magic).unwrap_or("?")
            )));
        }
        self.pos = 4;
        Ok(())
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Corrupt(format!(
                "{}: truncated at byte {} (needed {n} more, {} available)",
                self.what,
                self.pos,
                self.buf.len() - self.pos
            ))),
        }
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn f32_vec(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| Error::Corrupt(format!("{}: payload size overflows", self.what)))?;
        let raw = self.take(bytes)?;
        Ok(raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect())
    }

    pub(crate) fn cstring(&mut self) -> Result<String> {
        let rest = &self.buf[self.pos..];
        let len = rest.iter().position(|&b| b == 0).ok_or_else(|| {
            Error::Corrupt(format!("{}: unterminated string at byte {}", self.what, self.pos))
        })?;
        let s = std::str::from_utf8(&rest[..len])
            .map_err(|e| Error::Format(format!("{}: invalid UTF-8 name: {e}", self.what)))?
            .to_owned();
        self.pos += len + 1;
        Ok(s)
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Corrupt(format!(
                "{}: {} trailing bytes after payload",
                self.what,
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, vs: &[f32]) {
    out.reserve(vs.len() * 4);
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io_at(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io_at(path, e))
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::validation(format!("{what} {v} does not fit in u32")))
}

pub fn encode_feature_map(fm: &FeatureMap) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(FEATURE_HEADER_LEN + fm.data().len() * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    put_u32(&mut out, to_u32(fm.height(), "height")?);
    put_u32(&mut out, to_u32(fm.width(), "width")?);
    put_u32(&mut out, to_u32(fm.dim(), "dim")?);
    put_u32(&mut out, fm.image_width_px());
    put_u32(&mut out, fm.image_height_px());
    put_u32(&mut out, fm.patch_stride_px());
    put_f32s(&mut out, fm.data());
    Ok(out)
}

pub fn decode_feature_map(bytes: &[u8]) -> Result<FeatureMap> {
    let mut r = ByteReader::new(bytes, "PHF1");
    r.expect_magic(FEATURE_MAGIC)?;
    let header = read_feature_header(&mut r)?;
    let n = header
        .height
        .checked_mul(header.width)
        .and_then(|v| v.checked_mul(header.dim))
        .ok_or_else(|| Error::Corrupt("PHF1: grid size overflows".into()))?;
    let data = r.f32_vec(n)?;
    r.finish()?;
    FeatureMap::new(
        header.height,
        header.width,
        header.dim,
        data,
        header.image_width_px,
        header.image_height_px,
        header.patch_stride_px,
    )
}

/// The fixed 24-byte header fields following the `PHF1` magic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureHeader {
    pub height: usize,
    pub width: usize,
    pub dim: usize,
    pub image_width_px: u32,
    pub image_height_px: u32,
    pub patch_stride_px: u32,
}

fn read_feature_header(r: &mut ByteReader<'_>) -> Result<FeatureHeader> {
    Ok(FeatureHeader {
        height: r.u32()? as usize,
        width: r.u32()? as usize,
        dim: r.u32()? as usize,
        image_width_px: r.u32()?,
        image_height_px: r.u32()?,
        patch_stride_px: r.u32()?,
    })
}

/// Parses only the header of a `PHF1` buffer.
pub fn peek_feature_header(bytes: &[u8]) -> Result<FeatureHeader> {
    let mut r = ByteReader::new(bytes, "PHF1");
    r.expect_magic(FEATURE_MAGIC)?;
    read_feature_header(&mut r)
}

pub fn load_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap> {
    decode_feature_map(&read_file(path.as_ref())?)
}

pub fn save_feature_map(fm: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_feature_map(fm)?)
}

pub fn encode_bank(bank: &PrototypeBank) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(BANK_MAGIC);
    put_u32(&mut out, to_u32(bank.class_count(), "class count")?);
    put_u32(&mut out, to_u32(bank.background_count(), "background count")?);
    put_u32(&mut out, to_u32(bank.dim(), "dim")?);
    for name in bank.class_names() {
        out.extend_from_slice(name.as_bytes());
        out.push(0);
    }
    put_f32s(&mut out, bank.class_prototypes());
    put_f32s(&mut out, bank.background_prototypes());
    out.push(bank.is_normalized() as u8);
    Ok(out)
}

pub fn decode_bank(bytes: &[u8]) -> Result<PrototypeBank> {
    let mut r = ByteReader::new(bytes, "PHB1");
    r.expect_magic(BANK_MAGIC)?;
    let classes = r.u32()? as usize;
    let backgrounds = r.u32()? as usize;
    let dim = r.u32()? as usize;
    // A name takes at least one byte, so this bounds allocation on garbage headers.
    if classes > bytes.len() {
        return Err(Error::Corrupt(format!("PHB1: implausible class count {classes}")));
    }
    let names = (0..classes).map(|_| r.cstring()).collect::<Result<Vec<_>>>()?;
    let class_protos = r.f32_vec(classes * dim)?;
    let bg_protos = r.f32_vec(backgrounds * dim)?;
    let normalized = match r.u8()? {
        0 => false,
        1 => true,
        other => return Err(Error::Format(format!("PHB1: bad normalized flag {other}"))),
    };
    r.finish()?;
    PrototypeBank::new(dim, names, class_protos, bg_protos, normalized)
}

/// Header summary of a `PHB1` buffer: `(C, B, D, names)`.
pub fn peek_bank_header(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<String>)> {
    let mut r = ByteReader::new(bytes, "PHB1");
    r.expect_magic(BANK_MAGIC)?;
    let classes = r.u32()? as usize;
    let backgrounds = r.u32()? as usize;
    let dim = r.u32()? as usize;
    if classes > bytes.len() {
        return Err(Error::Corrupt(format!("PHB1: implausible class count {classes}")));
    }
    let names = (0..classes).map(|_| r.cstring()).collect::<Result<Vec<_>>>()?;
    Ok((classes, backgrounds, dim, names))
}

pub fn load_bank(path: impl AsRef<Path>) -> Result<PrototypeBank> {
    decode_bank(&read_file(path.as_ref())?)
}

pub fn save_bank(bank: &PrototypeBank, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_bank(bank)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones_2x2x3() -> FeatureMap {
        FeatureMap::from_grid(2, 2, 3, vec![1.0; 12], 14).unwrap()
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.phf");
        let fm = ones_2x2x3();
        save_feature_map(&fm, &path).unwrap();
        assert_eq!(load_feature_map(&path).unwrap(), fm);
    }

    #[test]
    fn save_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("1.phf"), dir.path().join("2.phf"));
        let fm = ones_2x2x3();
        save_feature_map(&fm, &p1).unwrap();
        save_feature_map(&fm, &p2).unwrap();
        assert_eq!(fs::read(p1).unwrap(), fs::read(p2).unwrap());
    }

    #[test]
    fn single_value_file_layout() {
        let fm = FeatureMap::new(1, 1, 1, vec![0.5], 14, 14, 14).unwrap();
        let bytes = encode_feature_map(&fm).unwrap();
        assert_eq!(bytes.len(), 28 + 4);
        assert_eq!(&bytes[..4], b"PHF1");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &14u32.to_le_bytes());
        assert_eq!(&bytes[28..], &0.5f32.to_le_bytes());
    }

    #[test]
    fn bad_magic_is_format_error() {
        let mut bytes = encode_feature_map(&ones_2x2x3()).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_feature_map(&bytes), Err(Error::Format(_))));
        assert!(matches!(decode_feature_map(b"PH"), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_is_corruption() {
        let bytes = encode_feature_map(&ones_2x2x3()).unwrap();
        let short = &bytes[..bytes.len() - 1];
        assert!(matches!(decode_feature_map(short), Err(Error::Corrupt(_))));
        assert!(matches!(decode_feature_map(&bytes[..10]), Err(Error::Corrupt(_))));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_feature_map(&long), Err(Error::Corrupt(_))));
    }

    #[test]
    fn non_finite_payload_is_validation_error() {
        let mut bytes = encode_feature_map(&ones_2x2x3()).unwrap();
        bytes[28..32].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_feature_map(&bytes), Err(Error::Validation(_))));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = save_feature_map(&ones_2x2x3(), "/nonexistent-dir/x/y.phf").unwrap_err();
        assert!(matches!(err, Error::IoAt { .. }));
    }

    #[test]
    fn bank_layout_and_round_trip() {
        let bank = PrototypeBank::new(
            2,
            vec!["cat".into(), "dog".into()],
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.6, 0.8],
            true,
        )
        .unwrap();
        let bytes = encode_bank(&bank).unwrap();
        // magic + 3 u32 + "cat\0dog\0" + 6 f32 + flag
        assert_eq!(bytes.len(), 4 + 12 + 8 + 24 + 1);
        assert_eq!(&bytes[16..24], b"cat\0dog\0");
        assert_eq!(*bytes.last().unwrap(), 1);
        assert_eq!(decode_bank(&bytes).unwrap(), bank);
        let (c, b, d, names) = peek_bank_header(&bytes).unwrap();
        assert_eq!((c, b, d), (2, 1, 2));
        assert_eq!(names, vec!["cat", "dog"]);
    }

    #[test]
    fn bank_rejects_bad_flag_and_truncation() {
        let bank =
            PrototypeBank::new(1, vec!["a".into()], vec![2.0], vec![], false).unwrap();
        let mut bytes = encode_bank(&bank).unwrap();
        *bytes.last_mut().unwrap() = 7;
        assert!(matches!(decode_bank(&bytes), Err(Error::Format(_))));
        let bytes = encode_bank(&bank).unwrap();
        assert!(matches!(decode_bank(&bytes[..bytes.len() - 2]), Err(Error::Corrupt(_))));
        let mut wrong = bytes.clone();
        wrong[..4].copy_from_slice(b"PHF1");
        assert!(matches!(decode_bank(&wrong), Err(Error::Format(_))));
    }
}
