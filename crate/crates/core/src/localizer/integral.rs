//! Spatial integral layer: heatmap logits to a relative box.
//!
//! The center is the expectation of the 1-based cell coordinates `(j/S, i/S)`
//! under a softmax over all `S^2` logits (row index -> vertical, column index
//! -> horizontal). The width is a convex combination of per-row occupancy
//! estimates `r_i = (1/S) sum_j sigmoid(g_ij)`, sorted descending and weighted
//! by `softmax(theta_w)`; the height uses columns and `softmax(theta_h)`.

use super::geometry::{Heatmap, RelBox};
use crate::error::{Error, Result};

/// Order-statistic weights for the extent estimates. Stored unnormalized;
/// softmax is applied on use.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralParams {
    pub theta_w: Vec<f32>,
    pub theta_h: Vec<f32>,
}

impl IntegralParams {
    /// Uniform weights.
    pub fn uniform(grid: usize) -> Self {
        IntegralParams {
            theta_w: vec![0.0; grid],
            theta_h: vec![0.0; grid],
        }
    }

    /// Weight mass concentrated on the largest row/column estimate.
    pub fn top_heavy(grid: usize, peak: f32) -> Self {
        let mut theta = vec![0.0; grid];
        theta[0] = peak;
        IntegralParams {
            theta_w: theta.clone(),
            theta_h: theta,
        }
    }

    pub fn grid(&self) -> usize {
        self.theta_w.len()
    }

    pub fn validate(&self, grid: usize) -> Result<()> {
        if self.theta_w.len() != grid || self.theta_h.len() != grid {
            return Err(Error::validation(format!(
                "integral params have lengths {}/{}, grid is {grid}",
                self.theta_w.len(),
                self.theta_h.len()
            )));
        }
        if self.theta_w.iter().chain(&self.theta_h).any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite integral parameter"));
        }
        Ok(())
    }
}

pub(crate) fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

fn sigmoid64(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn ordered_mix(mut estimates: Vec<f64>, theta: &[f32]) -> f64 {
    estimates.sort_by(|a, b| b.total_cmp(a));
    let w = softmax(&theta.iter().map(|&t| t as f64).collect::<Vec<_>>());
    estimates.iter().zip(&w).map(|(e, w)| e * w).sum()
}

pub fn spatial_integral(logits: &Heatmap, params: &IntegralParams) -> Result<RelBox> {
    let s = logits.grid();
    params.validate(s)?;
    let g: Vec<f64> = logits.data().iter().map(|&v| v as f64).collect();
    let p = softmax(&g);
    let sf = s as f64;
    let (mut cw, mut ch) = (0f64, 0f64);
    for i in 0..s {
        for j in 0..s {
            let w = p[i * s + j];
            ch += (i + 1) as f64 / sf * w;
            cw += (j + 1) as f64 / sf * w;
        }
    }
    let sig: Vec<f64> = g.iter().map(|&x| sigmoid64(x)).collect();
    let rows: Vec<f64> = (0..s)
        .map(|i| sig[i * s..(i + 1) * s].iter().sum::<f64>() / sf)
        .collect();
    let cols: Vec<f64> = (0..s)
        .map(|j| (0..s).map(|i| sig[i * s + j]).sum::<f64>() / sf)
        .collect();
    let w = ordered_mix(rows, &params.theta_w);
    let h = ordered_mix(cols, &params.theta_h);
    let clamp = |v: f64| v.clamp(0.0, 1.0) as f32;
    Ok(RelBox {
        cw: clamp(cw),
        ch: clamp(ch),
        w: clamp(w),
        h: clamp(h),
    })
}
