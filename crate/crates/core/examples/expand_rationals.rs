//! Expand a few rationals under all three division algorithms and rebuild them.
//!
//! Run with `cargo run --release --example expand_rationals`.

use cfcost::cf_core::{expand, reconstruct, AlgorithmKind, Rational};
use cfcost::costs::{total_cost, CostFunction};

fn main() -> cfcost::Result<()> {
    let log = CostFunction::log();
    for (p, q) in [(5, 7), (13, 21), (355, 1000), (1, 1)] {
        let r = Rational::new(p, q)?;
        for alg in [AlgorithmKind::Ordinary, AlgorithmKind::Centered, AlgorithmKind::Odd] {
            let e = expand(r, alg);
            let back = reconstruct(&e)?;
            let signs: String = (0..e.depth()).map(|j| if e.sign(j) > 0 { '+' } else { '-' }).collect();
            println!(
                "{p:>4}/{q:<5} {alg:<9} digits={:?} signs={signs} log-cost={:.4} back={}/{}",
                e.digits,
                total_cost(&e, &log)?,
                back.p(),
                back.q()
            );
        }
    }
    Ok(())
}
