//! Exact cost histogram of the ensemble of coprime pairs with denominator at most N.

use cfcost::costs::CostFunction;
use cfcost::ensemble::{count, histogram, EnsembleSpec};
use std::f64::consts::PI;

fn main() -> cfcost::Result<()> {
    let n = 2000;
    let total = count(n, true)?;
    println!("N = {n}: {total} pairs, ratio to 3N²/π² = {:.5}", total as f64 / (3.0 * (n * n) as f64 / (PI * PI)));

    let h = histogram(&EnsembleSpec::new(n, CostFunction::one()))?;
    let (mean, var) = h.moments();
    println!("depth: mean {mean:.4}, variance {var:.4}");
    for (depth, c) in h.values().take(12) {
        println!("  P = {depth:>2}  {c:>8}  {}", "#".repeat((60 * c / h.total) as usize));
    }
    Ok(())
}
