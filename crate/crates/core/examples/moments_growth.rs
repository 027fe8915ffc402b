//! Mean and variance of the total cost grow linearly in log N.

use cfcost::costs::CostFunction;
use cfcost::ensemble::EnsembleSpec;
use cfcost::limit_lab::moment_slopes;

fn main() -> cfcost::Result<()> {
    let ns: Vec<u64> = (8..=13).map(|k| 1 << k).collect();
    for cost in [CostFunction::one(), CostFunction::log(), CostFunction::bitlength()] {
        let (se, sv) = moment_slopes(&EnsembleSpec::new(1, cost.clone()), &ns)?;
        println!("{:<10} dE/dlogN = {se:.4}   dV/dlogN = {sv:.4}", cost.name);
    }
    Ok(())
}
