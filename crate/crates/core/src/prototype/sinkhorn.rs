//! Entropic-regularized optimal transport via Sinkhorn-Knopp scaling.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    pub epsilon: f32,
    pub iters: usize,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig {
            epsilon: 0.05,
            iters: 1000,
        }
    }
}

/// Transport plan `gamma` (n x m, row-major) with its target marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    gamma: Vec<f64>,
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
}

impl TransportPlan {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.gamma[i * self.cols + j]
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &[f64] {
        &self.col_marginal
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.gamma.chunks_exact(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.gamma.chunks_exact(self.cols) {
            for (s, &g) in sums.iter_mut().zip(row) {
                *s += g;
            }
        }
        sums
    }

    /// Largest absolute deviation of any row or column sum from its marginal.
    pub fn max_marginal_residual(&self) -> f64 {
        let rows = self
            .row_sums()
            .iter()
            .zip(&self.row_marginal)
            .map(|(s, a)| (s - a).abs())
            .fold(0.0, f64::max);
        let cols = self
            .col_sums()
            .iter()
            .zip(&self.col_marginal)
            .map(|(s, b)| (s - b).abs())
            .fold(0.0, f64::max);
        rows.max(cols)
    }

    /// Rows rescaled to sum to one: row `i` is divided by `a_i`.
    pub fn row_normalized(&self) -> Vec<f64> {
        let mut out = self.gamma.clone();
        for (row, &a) in out.chunks_exact_mut(self.cols).zip(&self.row_marginal) {
            for g in row {
                *g /= a;
            }
        }
        out
    }
}

/// L1 marginal errors recorded after each half-step.
#[derive(Debug, Clone, Default)]
pub struct SinkhornTrace {
    /// Column error right after each row scaling (rows are exact there).
    pub col_residuals: Vec<f64>,
    /// Row error right after each column scaling (columns are exact there).
    pub row_residuals: Vec<f64>,
}

pub fn uniform_marginal(n: usize) -> Vec<f32> {
    vec![1.0 / n as f32; n]
}

/// Solves `min <gamma, cost> - eps * H(gamma)` subject to `gamma 1 = a`,
/// `gamma^T 1 = b`, running `iters` alternating row/column scalings.
///
/// `cost` is row-major `a.len() x b.len()`.
pub fn sinkhorn(
    cost: &[f32],
    a: &[f32],
    b: &[f32],
    epsilon: f32,
    iters: usize,
) -> Result<TransportPlan> {
    sinkhorn_impl(cost, a, b, epsilon, iters, None)
}

pub fn sinkhorn_traced(
    cost: &[f32],
    a: &[f32],
    b: &[f32],
    epsilon: f32,
    iters: usize,
) -> Result<(TransportPlan, SinkhornTrace)> {
    let mut trace = SinkhornTrace::default();
    let plan = sinkhorn_impl(cost, a, b, epsilon, iters, Some(&mut trace))?;
    Ok((plan, trace))
}

fn check_marginal(p: &[f32], name: &str) -> Result<Vec<f64>> {
    if p.is_empty() {
        return Err(Error::validation(format!("marginal {name} is empty")));
    }
    if p.iter().any(|&x| !x.is_finite() || x <= 0.0) {
        return Err(Error::validation(format!(
            "marginal {name} must have finite positive entries"
        )));
    }
    let total: f64 = p.iter().map(|&x| x as f64).sum();
    if (total - 1.0).abs() > 1e-5 {
        return Err(Error::validation(format!(
            "marginal {name} sums to {total}, expected 1"
        )));
    }
    Ok(p.iter().map(|&x| x as f64).collect())
}

fn sinkhorn_impl(
    cost: &[f32],
    a: &[f32],
    b: &[f32],
    epsilon: f32,
    iters: usize,
    mut trace: Option<&mut SinkhornTrace>,
) -> Result<TransportPlan> {
    let a = check_marginal(a, "a")?;
    let b = check_marginal(b, "b")?;
    let (n, m) = (a.len(), b.len());
    if cost.len() != n * m {
        return Err(Error::validation(format!(
            "cost has {} entries, expected {n}x{m}",
            cost.len()
        )));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::validation(format!("epsilon must be positive, got {epsilon}")));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::validation("cost matrix has non-finite entries"));
    }

    // The plan is invariant to a constant cost shift; anchoring the minimum
    // at zero keeps the largest kernel entry at exactly 1.
    let min = cost.iter().copied().fold(f32::INFINITY, f32::min) as f64;
    let eps = epsilon as f64;
    let kernel: Vec<f64> = cost
        .iter()
        .map(|&c| (-(c as f64 - min) / eps).exp())
        .collect();

    let mut u = vec![1.0f64; n];
    let mut v = vec![1.0f64; m];
    let mut kv = vec![0.0f64; n];
    let mut ktu = vec![0.0f64; m];

    let check = |s: &[f64], which: &str, it: usize| -> Result<()> {
        if s.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::Convergence(format!(
                "scaling vector {which} became non-finite at iteration {it} (epsilon too small for this cost range?)"
            )));
        }
        Ok(())
    };

    for it in 0..iters {
        for i in 0..n {
            let row = &kernel[i * m..(i + 1) * m];
            kv[i] = row.iter().zip(&v).map(|(k, v)| k * v).sum();
        }
        for i in 0..n {
            u[i] = a[i] / kv[i];
        }
        check(&u, "u", it)?;
        ktu.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            let row = &kernel[i * m..(i + 1) * m];
            for (acc, k) in ktu.iter_mut().zip(row) {
                *acc += k * u[i];
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.col_residuals
                .push(ktu.iter().zip(&v).zip(&b).map(|((s, v), b)| (s * v - b).abs()).sum());
        }
        for j in 0..m {
            v[j] = b[j] / ktu[j];
        }
        check(&v, "v", it)?;
        if let Some(t) = trace.as_deref_mut() {
            let row_err = (0..n)
                .map(|i| {
                    let row = &kernel[i * m..(i + 1) * m];
                    let s: f64 = row.iter().zip(&v).map(|(k, v)| k * v).sum();
                    (u[i] * s - a[i]).abs()
                })
                .sum();
            t.row_residuals.push(row_err);
        }
    }

    let mut gamma = kernel;
    for i in 0..n {
        for j in 0..m {
            gamma[i * m + j] *= u[i] * v[j];
        }
    }
    if gamma.iter().any(|g| !g.is_finite()) {
        return Err(Error::Convergence("transport plan has non-finite entries".into()));
    }
    Ok(TransportPlan {
        rows: n,
        cols: m,
        gamma,
        row_marginal: a,
        col_marginal: b,
    })
}
