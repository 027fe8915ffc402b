//! Exponent bookkeeping for the speed-of-convergence estimates.

use cfcost::limit_lab::alpha_calc;

fn main() -> cfcost::Result<()> {
    for eta in [2.5, 3.0, 4.0] {
        let b = alpha_calc(eta, 0.8, 4.0)?;
        println!("η = {eta}: α ≥ {:.4}, ε ≤ {:.4}, r ≥ {:.4}", b.alpha_min, b.eps_max, b.r_min);
    }
    Ok(())
}
