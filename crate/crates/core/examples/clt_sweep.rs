//! Kolmogorov distance between the standardized depth and the normal law.

use cfcost::costs::CostFunction;
use cfcost::ensemble::EnsembleSpec;
use cfcost::limit_lab::clt_sweep;
use cfcost::transfer_op::{drift_dispersion, OperatorConfig};

fn main() -> cfcost::Result<()> {
    let cost = CostFunction::one();
    let dd = drift_dispersion(&cost, &OperatorConfig::default())?;
    let ns: Vec<u64> = (8..=13).map(|k| 1 << k).collect();
    let sw = clt_sweep(&EnsembleSpec::new(1, cost), &ns, dd.mu, dd.delta2.sqrt())?;
    for r in &sw.rows {
        println!("N = {:>5}  d_K = {:.5}  d_K·√log N = {:.5}", r.n, r.distance, r.scaled);
    }
    println!("Ĉ = {:.4}, inversions = {}", sw.c_hat, sw.inversions);
    Ok(())
}
