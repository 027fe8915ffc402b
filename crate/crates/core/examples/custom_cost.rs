//! A tabulated cost with a logarithmic tail, loaded from JSON, with its lattice class and moment tails.

use cfcost::costs::{lattice_detect, moment_tail_report, CostFunction};
use cfcost::ensemble::{histogram, EnsembleSpec};

fn main() -> cfcost::Result<()> {
    let json = r#"{"name": "small-digits", "kind": "table", "table": [1.0, 0.5, 0.25], "params": {}, "tail": {"kind": "log", "offset": 0.0, "scale": 1.0}}"#;
    let cost = CostFunction::from_json(json)?;
    println!("{:?}", lattice_detect(&cost, 64)?);
    println!("{:?}", moment_tail_report(&cost, 2, 0.5, 10_000)?);
    let (mean, var) = histogram(&EnsembleSpec::new(1000, cost))?.moments();
    println!("N = 1000: mean {mean:.4}, variance {var:.4}");
    Ok(())
}
