//! Drift μ and dispersion δ² from the transfer operator, next to the empirical slopes.

use cfcost::costs::CostFunction;
use cfcost::ensemble::EnsembleSpec;
use cfcost::limit_lab::moment_slopes;
use cfcost::transfer_op::{build, dominant_eig, drift_dispersion, OperatorConfig};
use cfcost::Complex64;

fn main() -> cfcost::Result<()> {
    let cfg = OperatorConfig::default();
    let one = CostFunction::one();

    let op = build(Complex64::new(1.0, 0.0), 0.0, &one, &cfg)?;
    let eig = dominant_eig(&op)?;
    println!("λ(1,0) = {:.15}, second eigenvalue {:.12}", eig.lambda.re, eig.second.norm());

    let ns: Vec<u64> = (8..=12).map(|k| 1 << k).collect();
    for cost in [one, CostFunction::log()] {
        let dd = drift_dispersion(&cost, &cfg)?;
        let (se, sv) = moment_slopes(&EnsembleSpec::new(1, cost.clone()), &ns)?;
        println!("{:<4} μ = {:.10} (slope {se:.4})  δ² = {:.10} (slope {sv:.4})", cost.name, dd.mu, dd.delta2);
    }
    Ok(())
}
