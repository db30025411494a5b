use std::path::Path;

use super::geometry::Heatmap;
use super::integral::IntegralParams;
use crate::classifier::{push_conv, take_conv};
use crate::error::{Error, Result};
use crate::nn::{
    check_finite, load_weights, relu_in_place, save_weights, seeded_rng, Branch, Conv2d, Tensor,
    WeightFile,
};

pub const DEFAULT_LOC_BLOCKS: usize = 5;

/// Turns an initial heatmap plus the per-class similarity planes into
/// propagated heatmap logits.
///
/// `class_sim` is `S x S x (1 + B)`: the target class channel followed by the
/// background channels.
pub trait Propagator: Sync {
    fn propagate(&self, initial: &Heatmap, class_sim: &[f32]) -> Result<Heatmap>;

    /// Expected `2 + B` input channels, when the propagator has a fixed shape.
    fn input_channels(&self) -> Option<usize> {
        None
    }
}

/// Segmentation-style propagation network: 3x3 conv + ReLU blocks over the
/// `2 + B` input channels, then a 1x1 conv to one logit per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LocNetWeights {
    blocks: Vec<Conv2d>,
    head: Conv2d,
}

impl LocNetWeights {
    pub fn new(blocks: Vec<Conv2d>, head: Conv2d) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::validation("localization net needs at least one block"));
        }
        for (k, b) in blocks.iter().enumerate() {
            if b.kernel() != 3 {
                return Err(Error::validation(format!("block {k}: conv kernel must be 3")));
            }
            if k > 0 && b.in_channels() != blocks[k - 1].out_channels() {
                return Err(Error::validation(format!(
                    "block {k}: expects {} input channels but block {} emits {}",
                    b.in_channels(),
                    k - 1,
                    blocks[k - 1].out_channels()
                )));
            }
        }
        let last = blocks.last().map(|b| b.out_channels()).unwrap_or(0);
        if head.kernel() != 1 || head.out_channels() != 1 || head.in_channels() != last {
            return Err(Error::validation(format!(
                "head must be a 1x1 conv from {last} channels to 1"
            )));
        }
        if blocks[0].in_channels() < 2 {
            return Err(Error::validation("localization input needs at least 2 channels"));
        }
        Ok(LocNetWeights { blocks, head })
    }

    pub fn zeros(in_channels: usize, hidden: usize, block_count: usize) -> Self {
        let blocks = (0..block_count)
            .map(|k| Conv2d::zeros(if k == 0 { in_channels } else { hidden }, hidden, 3))
            .collect();
        LocNetWeights::new(blocks, Conv2d::zeros(hidden, 1, 1)).expect("valid zero net")
    }

    pub fn seeded(in_channels: usize, hidden: usize, block_count: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let blocks = (0..block_count)
            .map(|k| {
                Conv2d::seeded(if k == 0 { in_channels } else { hidden }, hidden, 3, &mut rng)
            })
            .collect();
        let head = Conv2d::seeded(hidden, 1, 1, &mut rng);
        LocNetWeights::new(blocks, head).expect("valid seeded net")
    }

    /// `2 + B`.
    pub fn in_channels(&self) -> usize {
        self.blocks[0].in_channels()
    }

    pub fn background_count(&self) -> usize {
        self.in_channels() - 2
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Conv2d] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Conv2d] {
        &mut self.blocks
    }

    pub fn head(&self) -> &Conv2d {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut Conv2d {
        &mut self.head
    }

    pub fn to_weight_file(&self, params: &IntegralParams) -> WeightFile {
        let mut tensors = Vec::new();
        for b in &self.blocks {
            push_conv(&mut tensors, b);
        }
        push_conv(&mut tensors, &self.head);
        let s = params.grid();
        tensors.push(Tensor::new(vec![s], params.theta_w.clone()));
        tensors.push(Tensor::new(vec![s], params.theta_h.clone()));
        WeightFile {
            branch: Branch::Localization,
            block_count: self.blocks.len(),
            in_channels: self.in_channels(),
            tensors,
        }
    }

    pub fn from_weight_file(wf: &WeightFile) -> Result<(Self, IntegralParams)> {
        if wf.branch != Branch::Localization {
            return Err(Error::Format("PHW1: expected a localization branch file".into()));
        }
        let expected = wf.block_count * 2 + 4;
        if wf.tensors.len() != expected {
            return Err(Error::validation(format!(
                "localization weights: {} tensors for {} blocks, expected {expected}",
                wf.tensors.len(),
                wf.block_count
            )));
        }
        let mut it = wf.tensors.iter();
        let blocks = (0..wf.block_count)
            .map(|_| take_conv(&mut it))
            .collect::<Result<Vec<_>>>()?;
        let head = take_conv(&mut it)?;
        let net = LocNetWeights::new(blocks, head)?;
        if net.in_channels() != wf.in_channels {
            return Err(Error::validation(format!(
                "header says {} input channels, first conv takes {}",
                wf.in_channels,
                net.in_channels()
            )));
        }
        let tw = it.next().expect("counted");
        let th = it.next().expect("counted");
        if tw.shape.len() != 1 || tw.shape != th.shape {
            return Err(Error::validation(format!(
                "theta shapes {:?}/{:?}, expected two vectors of length S",
                tw.shape, th.shape
            )));
        }
        let params = IntegralParams {
            theta_w: tw.data.clone(),
            theta_h: th.data.clone(),
        };
        Ok((net, params))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, IntegralParams)> {
        LocNetWeights::from_weight_file(&load_weights(path)?)
    }

    pub fn save(&self, params: &IntegralParams, path: impl AsRef<Path>) -> Result<()> {
        save_weights(&self.to_weight_file(params), path)
    }
}

impl Propagator for LocNetWeights {
    fn input_channels(&self) -> Option<usize> {
        Some(LocNetWeights::in_channels(self))
    }

    fn propagate(&self, initial: &Heatmap, class_sim: &[f32]) -> Result<Heatmap> {
        let s = initial.grid();
        let sim_channels = self.in_channels() - 1;
        if class_sim.len() != s * s * sim_channels {
            return Err(Error::validation(format!(
                "propagation input has {} similarity values, expected {s}x{s}x{sim_channels} (1 + B)",
                class_sim.len()
            )));
        }
        let mut x = Vec::with_capacity(s * s * self.in_channels());
        for (h, sim) in initial.data().iter().zip(class_sim.chunks_exact(sim_channels)) {
            x.push(*h);
            x.extend_from_slice(sim);
        }
        for (k, conv) in self.blocks.iter().enumerate() {
            x = conv.forward(&x, s, s);
            relu_in_place(&mut x);
            check_finite(&x, &format!("localization block {k}"))?;
        }
        let logits = self.head.forward(&x, s, s);
        check_finite(&logits, "localization head")?;
        Heatmap::new(s, logits)
    }
}

pub fn propagate(
    initial: &Heatmap,
    class_sim: &[f32],
    weights: &dyn Propagator,
) -> Result<Heatmap> {
    weights.propagate(initial, class_sim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_net_emits_head_bias() {
        let mut net = LocNetWeights::zeros(3, 4, 2);
        net.head_mut().bias_mut()[0] = -1.25;
        let init = Heatmap::filled(3, 1.0);
        let g = net.propagate(&init, &[0.4; 3 * 3 * 2]).unwrap();
        assert!(g.data().iter().all(|&v| v == -1.25));
    }

    #[test]
    fn seeded_forward_is_bit_identical() {
        let net = LocNetWeights::seeded(4, 6, 2, 3);
        let init = Heatmap::new(3, (0..9).map(|k| (k % 2) as f32).collect()).unwrap();
        let sim: Vec<f32> = (0..27).map(|k| (k as f32 * 0.3).sin()).collect();
        let a = net.propagate(&init, &sim).unwrap();
        let b = net.clone().propagate(&init, &sim).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn file_round_trip_with_theta() {
        let net = LocNetWeights::seeded(3, 2, 5, 1);
        let params = IntegralParams::top_heavy(4, 7.0);
        let (back, p) = LocNetWeights::from_weight_file(&net.to_weight_file(&params)).unwrap();
        assert_eq!(back, net);
        assert_eq!(p, params);
    }

    #[test]
    fn input_channel_mismatch() {
        let net = LocNetWeights::zeros(4, 2, 1);
        let init = Heatmap::filled(2, 0.0);
        assert!(net.propagate(&init, &[0.0; 2 * 2 * 2]).is_err());
    }
}
