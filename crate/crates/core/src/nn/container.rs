//! `PHW1` weight container.
//!
//! ```text
//! "PHW1" | u32 block_count | u32 in_channels | u32 branch (0 = cls, 1 = loc)
//!        | u32 tensor_count | tensor_count x (u32 rank | rank x u32 dim | f32 payload)
//! ```
//!
//! Interpreting the tensor list (and checking the shape chain) is up to the
//! head that owns the branch.

use std::path::Path;

use crate::error::{Error, Result};
use crate::feature_io::{put_f32s, put_u32, read_file, write_file, ByteReader};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"PHW1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Classification,
    Localization,
}

impl Branch {
    fn tag(self) -> u32 {
        match self {
            Branch::Classification => 0,
            Branch::Localization => 1,
        }
    }

    fn from_tag(tag: u32) -> Result<Self> {
        match tag {
            0 => Ok(Branch::Classification),
            1 => Ok(Branch::Localization),
            t => Err(Error::Format(format!("PHW1: unknown branch tag {t}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightFile {
    pub branch: Branch,
    pub block_count: usize,
    pub in_channels: usize,
    pub tensors: Vec<Tensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightsHeader {
    pub branch: Branch,
    pub block_count: usize,
    pub in_channels: usize,
    pub shapes: Vec<Vec<usize>>,
}

pub fn encode_weights(wf: &WeightFile) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(WEIGHTS_MAGIC);
    put_u32(&mut out, wf.block_count as u32);
    put_u32(&mut out, wf.in_channels as u32);
    put_u32(&mut out, wf.branch.tag());
    put_u32(&mut out, wf.tensors.len() as u32);
    for t in &wf.tensors {
        put_u32(&mut out, t.shape.len() as u32);
        for &d in &t.shape {
            put_u32(&mut out, d as u32);
        }
        put_f32s(&mut out, &t.data);
    }
    out
}

fn decode(bytes: &[u8], with_payload: bool) -> Result<(WeightFile, Vec<Vec<usize>>)> {
    let mut r = ByteReader::new(bytes, "PHW1");
    r.expect_magic(WEIGHTS_MAGIC)?;
    let block_count = r.u32()? as usize;
    let in_channels = r.u32()? as usize;
    let branch = Branch::from_tag(r.u32()?)?;
    let count = r.u32()? as usize;
    if count > bytes.len() {
        return Err(Error::Corrupt(format!("PHW1: implausible tensor count {count}")));
    }
    let mut tensors = Vec::with_capacity(count);
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(Error::Format(format!("PHW1: tensor rank {rank} too large")));
        }
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Corrupt("PHW1: tensor size overflows".into()))?;
        let data = r.f32_vec(n)?;
        if with_payload {
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation("PHW1: non-finite weight"));
            }
            tensors.push(Tensor::new(shape.clone(), data));
        }
        shapes.push(shape);
    }
    r.finish()?;
    Ok((
        WeightFile {
            branch,
            block_count,
            in_channels,
            tensors,
        },
        shapes,
    ))
}

pub fn decode_weights(bytes: &[u8]) -> Result<WeightFile> {
    decode(bytes, true).map(|(wf, _)| wf)
}

pub fn peek_weights_header(bytes: &[u8]) -> Result<WeightsHeader> {
    let (wf, shapes) = decode(bytes, false)?;
    Ok(WeightsHeader {
        branch: wf.branch,
        block_count: wf.block_count,
        in_channels: wf.in_channels,
        shapes,
    })
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightFile> {
    decode_weights(&read_file(path.as_ref())?)
}

pub fn save_weights(wf: &WeightFile, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_weights(wf))
}
