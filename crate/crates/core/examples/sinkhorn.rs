//! Entropic optimal transport between two small point sets.
//!
//! cargo run --example sinkhorn

use protohead::prototype::{sinkhorn_traced, uniform_marginal};

fn main() -> protohead::Result<()> {
    let xs = [0.0f32, 1.0, 2.0, 3.0, 4.0];
    let ys = [0.5f32, 2.5, 4.5];
    let cost: Vec<f32> = xs.iter().flat_map(|x| ys.iter().map(move |y| (x - y).powi(2) / 16.0)).collect();

    let (plan, trace) = sinkhorn_traced(&cost, &uniform_marginal(xs.len()), &uniform_marginal(ys.len()), 0.05, 300)?;
    for i in 0..plan.rows() {
        let row: Vec<String> = (0..plan.cols()).map(|j| format!("{:.4}", plan.get(i, j))).collect();
        println!("x={} -> [{}]", xs[i], row.join(", "));
    }
    println!("row sums {:?}", plan.row_sums());
    println!("col sums {:?}", plan.col_sums());
    for k in [0, 9, 99, 299] {
        println!("iteration {:>3}: row residual {:.3e}", k + 1, trace.row_residuals[k]);
    }
    Ok(())
}
