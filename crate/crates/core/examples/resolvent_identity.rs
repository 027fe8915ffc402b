//! The Dirichlet series of the cost equals a resolvent expression.

use cfcost::costs::CostFunction;
use cfcost::ensemble::dirichlet_series;
use cfcost::transfer_op::{dirichlet_via_resolvent, resolvent_sweep, OperatorConfig};
use cfcost::Complex64;

fn main() -> cfcost::Result<()> {
    let cfg = OperatorConfig::default();
    let log = CostFunction::log();
    let s = Complex64::new(1.5, 0.0);
    let direct = dirichlet_series(s, &log, 0.0, 5000)?;
    let via = dirichlet_via_resolvent(s, 0.0, &log, &cfg)?;
    println!("S(3, 0): series {:.10}  resolvent {:.10}", direct.corrected().re, via.re);

    let taus: Vec<f64> = (1..=6).map(|k| 5.0 * k as f64).collect();
    let sweep = resolvent_sweep(1.0, 0.0, &taus, &log, &cfg)?;
    for r in &sweep.rows {
        match r.norm {
            Some(norm) => println!("τ = {:>4}  ‖(Id − H)⁻¹‖ ≈ {norm:.4}", r.tau),
            None => println!("τ = {:>4}  near the spectrum", r.tau),
        }
    }
    println!("fitted growth exponent {:?}", sweep.fitted_alpha);
    Ok(())
}
