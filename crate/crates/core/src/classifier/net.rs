use std::path::Path;

use super::rearrange::ClassSpecificMap;
use crate::error::{Error, Result};
use crate::nn::{
    check_finite, load_weights, relu_in_place, save_weights, seeded_rng, sigmoid, Branch,
    Conv2d, Tensor, WeightFile,
};

pub const DEFAULT_HIDDEN: usize = 256;
pub const DEFAULT_CLS_BLOCKS: usize = 3;

/// 3x3 conv -> ReLU -> multiply by a sigmoid 1x1-conv spatial attention mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ClsBlock {
    pub conv: Conv2d,
    pub attention: Conv2d,
}

/// One-vs-rest classification network: a stack of [`ClsBlock`]s, global
/// average pooling and a linear layer to a single logit.
#[derive(Debug, Clone, PartialEq)]
pub struct ClsNetWeights {
    blocks: Vec<ClsBlock>,
    fc_weight: Vec<f32>,
    fc_bias: f32,
}

impl ClsNetWeights {
    pub fn new(blocks: Vec<ClsBlock>, fc_weight: Vec<f32>, fc_bias: f32) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::validation("classification net needs at least one block"));
        }
        for (k, b) in blocks.iter().enumerate() {
            if b.conv.kernel() != 3 {
                return Err(Error::validation(format!("block {k}: conv kernel must be 3")));
            }
            if k > 0 && b.conv.in_channels() != blocks[k - 1].conv.out_channels() {
                return Err(Error::validation(format!(
                    "block {k}: expects {} input channels but block {} emits {}",
                    b.conv.in_channels(),
                    k - 1,
                    blocks[k - 1].conv.out_channels()
                )));
            }
            if b.attention.kernel() != 1
                || b.attention.out_channels() != 1
                || b.attention.in_channels() != b.conv.out_channels()
            {
                return Err(Error::validation(format!(
                    "block {k}: attention must be a 1x1 conv from {} channels to 1",
                    b.conv.out_channels()
                )));
            }
        }
        let hidden = blocks.last().map(|b| b.conv.out_channels()).unwrap_or(0);
        if fc_weight.len() != hidden {
            return Err(Error::validation(format!(
                "linear layer has {} weights, expected {hidden}",
                fc_weight.len()
            )));
        }
        if fc_weight.iter().any(|v| !v.is_finite()) || !fc_bias.is_finite() {
            return Err(Error::validation("non-finite linear parameter"));
        }
        Ok(ClsNetWeights {
            blocks,
            fc_weight,
            fc_bias,
        })
    }

    pub fn zeros(in_channels: usize, hidden: usize, block_count: usize) -> Self {
        let blocks = (0..block_count)
            .map(|k| ClsBlock {
                conv: Conv2d::zeros(if k == 0 { in_channels } else { hidden }, hidden, 3),
                attention: Conv2d::zeros(hidden, 1, 1),
            })
            .collect();
        ClsNetWeights::new(blocks, vec![0.0; hidden], 0.0).expect("valid zero net")
    }

    /// Fan-in-scaled uniform initialization from a fixed seed.
    pub fn seeded(in_channels: usize, hidden: usize, block_count: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let blocks = (0..block_count)
            .map(|k| ClsBlock {
                conv: Conv2d::seeded(
                    if k == 0 { in_channels } else { hidden },
                    hidden,
                    3,
                    &mut rng,
                ),
                attention: Conv2d::seeded(hidden, 1, 1, &mut rng),
            })
            .collect();
        let fc = Conv2d::seeded(hidden, 1, 1, &mut rng);
        ClsNetWeights::new(blocks, fc.weight().to_vec(), fc.bias()[0]).expect("valid seeded net")
    }

    pub fn in_channels(&self) -> usize {
        self.blocks[0].conv.in_channels()
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[ClsBlock] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [ClsBlock] {
        &mut self.blocks
    }

    pub fn fc_weight(&self) -> &[f32] {
        &self.fc_weight
    }

    pub fn fc_bias(&self) -> f32 {
        self.fc_bias
    }

    pub fn set_linear(&mut self, weight: Vec<f32>, bias: f32) -> Result<()> {
        if weight.len() != self.fc_weight.len() {
            return Err(Error::validation("linear weight length mismatch"));
        }
        self.fc_weight = weight;
        self.fc_bias = bias;
        Ok(())
    }

    /// Pre-sigmoid output for an `S x S x in_channels` input.
    pub fn logit(&self, input: &[f32], grid: usize) -> Result<f32> {
        if input.len() != grid * grid * self.in_channels() {
            return Err(Error::validation(format!(
                "classifier input has {} values, expected {grid}x{grid}x{}",
                input.len(),
                self.in_channels()
            )));
        }
        let cells = grid * grid;
        let mut x = input.to_vec();
        for (k, block) in self.blocks.iter().enumerate() {
            let mut h = block.conv.forward(&x, grid, grid);
            relu_in_place(&mut h);
            let mask = block.attention.forward(&h, grid, grid);
            let hidden = block.conv.out_channels();
            for (cell, &m) in h.chunks_exact_mut(hidden).zip(&mask) {
                let m = sigmoid(m);
                cell.iter_mut().for_each(|v| *v *= m);
            }
            check_finite(&h, &format!("classification block {k}"))?;
            x = h;
        }
        let hidden = self.fc_weight.len();
        let mut pooled = vec![0f32; hidden];
        for cell in x.chunks_exact(hidden) {
            for (p, &v) in pooled.iter_mut().zip(cell) {
                *p += v;
            }
        }
        let inv = 1.0 / cells as f32;
        let logit = pooled
            .iter()
            .zip(&self.fc_weight)
            .map(|(p, w)| p * inv * w)
            .sum::<f32>()
            + self.fc_bias;
        if !logit.is_finite() {
            return Err(Error::Numerical("classification logit is not finite".into()));
        }
        Ok(logit)
    }

    pub fn to_weight_file(&self) -> WeightFile {
        let mut tensors = Vec::new();
        for b in &self.blocks {
            push_conv(&mut tensors, &b.conv);
            push_conv(&mut tensors, &b.attention);
        }
        tensors.push(Tensor::new(vec![1, self.fc_weight.len()], self.fc_weight.clone()));
        tensors.push(Tensor::new(vec![1], vec![self.fc_bias]));
        WeightFile {
            branch: Branch::Classification,
            block_count: self.blocks.len(),
            in_channels: self.in_channels(),
            tensors,
        }
    }

    pub fn from_weight_file(wf: &WeightFile) -> Result<Self> {
        if wf.branch != Branch::Classification {
            return Err(Error::Format("PHW1: expected a classification branch file".into()));
        }
        let expected = wf.block_count * 4 + 2;
        if wf.tensors.len() != expected {
            return Err(Error::validation(format!(
                "classification weights: {} tensors for {} blocks, expected {expected}",
                wf.tensors.len(),
                wf.block_count
            )));
        }
        let mut it = wf.tensors.iter();
        let mut blocks = Vec::with_capacity(wf.block_count);
        for _ in 0..wf.block_count {
            let conv = take_conv(&mut it)?;
            let attention = take_conv(&mut it)?;
            blocks.push(ClsBlock { conv, attention });
        }
        let fc_w = it.next().expect("counted");
        let fc_b = it.next().expect("counted");
        if fc_w.shape.len() != 2 || fc_w.shape[0] != 1 || fc_b.shape != [1] {
            return Err(Error::validation(format!(
                "linear layer shapes {:?}/{:?}, expected [1, hidden]/[1]",
                fc_w.shape, fc_b.shape
            )));
        }
        let net = ClsNetWeights::new(blocks, fc_w.data.clone(), fc_b.data[0])?;
        if net.in_channels() != wf.in_channels {
            return Err(Error::validation(format!(
                "header says {} input channels, first conv takes {}",
                wf.in_channels,
                net.in_channels()
            )));
        }
        Ok(net)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ClsNetWeights::from_weight_file(&load_weights(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_weights(&self.to_weight_file(), path)
    }
}

pub(crate) fn push_conv(tensors: &mut Vec<Tensor>, conv: &Conv2d) {
    let k = conv.kernel();
    tensors.push(Tensor::new(
        vec![conv.out_channels(), k, k, conv.in_channels()],
        conv.weight().to_vec(),
    ));
    tensors.push(Tensor::new(vec![conv.out_channels()], conv.bias().to_vec()));
}

pub(crate) fn take_conv<'a>(it: &mut impl Iterator<Item = &'a Tensor>) -> Result<Conv2d> {
    let (w, b) = match (it.next(), it.next()) {
        (Some(w), Some(b)) => (w, b),
        _ => return Err(Error::validation("missing conv tensors")),
    };
    if w.shape.len() != 4 || w.shape[1] != w.shape[2] || b.shape != [w.shape[0]] {
        return Err(Error::validation(format!(
            "conv tensor shapes {:?}/{:?}, expected [out, k, k, in]/[out]",
            w.shape, b.shape
        )));
    }
    Conv2d::new(w.shape[3], w.shape[0], w.shape[1], w.data.clone(), b.data.clone())
}

/// Probability that the proposal belongs to the map's target class.
pub fn classify(map: &ClassSpecificMap, weights: &ClsNetWeights) -> Result<f32> {
    if map.channels() != weights.in_channels() {
        return Err(Error::validation(format!(
            "class-specific map has {} channels but the classifier expects {}",
            map.channels(),
            weights.in_channels()
        )));
    }
    Ok(sigmoid(weights.logit(map.data(), map.grid())?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_net_scores_one_half() {
        let net = ClsNetWeights::zeros(4, 8, 3);
        assert_eq!(sigmoid(net.logit(&[0.3; 4 * 4 * 4], 4).unwrap()), 0.5);
    }

    #[test]
    fn seeded_is_deterministic_and_round_trips() {
        let a = ClsNetWeights::seeded(5, 6, 2, 9);
        assert_eq!(a, ClsNetWeights::seeded(5, 6, 2, 9));
        assert_ne!(a, ClsNetWeights::seeded(5, 6, 2, 10));
        let back = ClsNetWeights::from_weight_file(&a.to_weight_file()).unwrap();
        assert_eq!(back, a);
        let input: Vec<f32> = (0..3 * 3 * 5).map(|v| (v as f32 * 0.37).sin()).collect();
        assert_eq!(a.logit(&input, 3).unwrap().to_bits(), back.logit(&input, 3).unwrap().to_bits());
    }

    #[test]
    fn shape_chain_is_validated() {
        let bad = vec![
            ClsBlock {
                conv: Conv2d::zeros(3, 4, 3),
                attention: Conv2d::zeros(4, 1, 1),
            },
            ClsBlock {
                conv: Conv2d::zeros(5, 4, 3),
                attention: Conv2d::zeros(4, 1, 1),
            },
        ];
        assert!(ClsNetWeights::new(bad, vec![0.0; 4], 0.0).is_err());
        let wrong_attn = vec![ClsBlock {
            conv: Conv2d::zeros(3, 4, 3),
            attention: Conv2d::zeros(4, 2, 1),
        }];
        assert!(ClsNetWeights::new(wrong_attn, vec![0.0; 4], 0.0).is_err());
        let mut wf = ClsNetWeights::zeros(3, 4, 1).to_weight_file();
        wf.branch = Branch::Localization;
        assert!(ClsNetWeights::from_weight_file(&wf).is_err());
        let mut wf = ClsNetWeights::zeros(3, 4, 1).to_weight_file();
        wf.in_channels = 7;
        assert!(ClsNetWeights::from_weight_file(&wf).is_err());
    }

    #[test]
    fn input_size_is_checked() {
        let net = ClsNetWeights::zeros(4, 2, 1);
        assert!(net.logit(&[0.0; 10], 4).is_err());
    }
}
