//! Forward-only convolution blocks shared by the classification and
//! localization heads, plus the `PHW1` weight container.

mod container;

pub use container::{
    decode_weights, encode_weights, load_weights, peek_weights_header, save_weights, Branch,
    Tensor, WeightFile, WeightsHeader, WEIGHTS_MAGIC,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Square-kernel 2-D convolution with zero padding `k / 2` and stride 1.
///
/// Weights are laid out `[out][ky][kx][in]` to match the channel-last
/// activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    weight: Vec<f32>,
    bias: Vec<f32>,
}

impl Conv2d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        weight: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || kernel.is_multiple_of(2) {
            return Err(Error::validation(format!(
                "bad conv geometry in={in_channels} out={out_channels} k={kernel}"
            )));
        }
        if weight.len() != out_channels * kernel * kernel * in_channels {
            return Err(Error::validation(format!(
                "conv weight has {} values, expected {out_channels}x{kernel}x{kernel}x{in_channels}",
                weight.len()
            )));
        }
        if bias.len() != out_channels {
            return Err(Error::validation(format!(
                "conv bias has {} values, expected {out_channels}",
                bias.len()
            )));
        }
        if weight.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite conv parameter"));
        }
        Ok(Conv2d {
            in_channels,
            out_channels,
            kernel,
            weight,
            bias,
        })
    }

    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Conv2d::new(
            in_channels,
            out_channels,
            kernel,
            vec![0.0; out_channels * kernel * kernel * in_channels],
            vec![0.0; out_channels],
        )
        .expect("valid zero conv")
    }

    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` for weights and biases.
    pub fn seeded<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / ((in_channels * kernel * kernel) as f32).sqrt();
        let n = out_channels * kernel * kernel * in_channels;
        let weight = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        let bias = (0..out_channels).map(|_| rng.gen_range(-bound..bound)).collect();
        Conv2d::new(in_channels, out_channels, kernel, weight, bias).expect("valid seeded conv")
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn weight(&self) -> &[f32] {
        &self.weight
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    pub fn weight_mut(&mut self) -> &mut [f32] {
        &mut self.weight
    }

    pub fn bias_mut(&mut self) -> &mut [f32] {
        &mut self.bias
    }

    /// `x` is `height x width x in_channels`; returns `height x width x out_channels`.
    pub fn forward(&self, x: &[f32], height: usize, width: usize) -> Vec<f32> {
        debug_assert_eq!(x.len(), height * width * self.in_channels);
        let (cin, cout, k) = (self.in_channels, self.out_channels, self.kernel);
        let pad = (k / 2) as isize;
        let mut out = vec![0f32; height * width * cout];
        for y in 0..height {
            for xx in 0..width {
                let dst = &mut out[(y * width + xx) * cout..(y * width + xx + 1) * cout];
                dst.copy_from_slice(&self.bias);
                for ky in 0..k {
                    let sy = y as isize + ky as isize - pad;
                    if sy < 0 || sy >= height as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let sx = xx as isize + kx as isize - pad;
                        if sx < 0 || sx >= width as isize {
                            continue;
                        }
                        let src_at = (sy as usize * width + sx as usize) * cin;
                        let src = &x[src_at..src_at + cin];
                        for (o, d) in dst.iter_mut().enumerate() {
                            let w_at = ((o * k + ky) * k + kx) * cin;
                            let w = &self.weight[w_at..w_at + cin];
                            *d += dot(src, w);
                        }
                    }
                }
            }
        }
        out
    }
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn relu_in_place(x: &mut [f32]) {
    x.iter_mut().for_each(|v| *v = v.max(0.0));
}

pub(crate) fn check_finite(x: &[f32], stage: &str) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite activation after {stage}")));
    }
    Ok(())
}

pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
