//! Modulus of the smoothed characteristic function across frequency regions,
//! for a nonlattice cost and a lattice one.

use cfcost::costs::CostFunction;
use cfcost::ensemble::EnsembleSpec;
use cfcost::limit_lab::{region_profile, RegionConfig};

fn main() -> cfcost::Result<()> {
    let cfg = RegionConfig { extend_region3_to: Some(7.0), points_per_region: 8, ..Default::default() };
    for cost in [CostFunction::log(), CostFunction::one()] {
        let prof = region_profile(&EnsembleSpec::new(5000, cost.clone()), &cfg, None)?;
        println!("{}: τ_N = {:.4}, L_N = {:.4}, α′ ≥ {}", cost.name, prof.tau_n, prof.l_n, prof.region3.alpha_prime_min);
        for r in prof.rows.iter().filter(|r| r.region >= 3) {
            println!("  region {} τ = {:>7.4}  |Ē| = {:.5}", r.region, r.tau, r.modulus);
        }
    }
    Ok(())
}
