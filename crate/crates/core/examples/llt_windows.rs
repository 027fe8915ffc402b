//! Local limit comparison: a lattice window for the depth, and smooth test
//! functions for the nonlattice log cost.

use cfcost::costs::CostFunction;
use cfcost::ensemble::EnsembleSpec;
use cfcost::limit_lab::{ensemble_histogram, llt_interval, llt_smooth, sandwich, CenteringSpec, LltRow, TestFunction};
use cfcost::transfer_op::{drift_dispersion, OperatorConfig};

fn main() -> cfcost::Result<()> {
    let cfg = OperatorConfig::default();
    let ns = [1000, 4000, 10000];

    let one = CostFunction::one();
    let dd = drift_dispersion(&one, &cfg)?;
    println!("depth, window (-1/2, 1/2]");
    println!("{}", LltRow::csv_header());
    for n in ns {
        let h = ensemble_histogram(&EnsembleSpec::new(n, one.clone()), None)?;
        for x in [0.0, 1.0] {
            let c = CenteringSpec::new(x, n, dd.mu, dd.delta2.sqrt())?;
            println!("{}", llt_interval(&h, &c, -0.5, 0.5)?.csv());
        }
    }

    let log = CostFunction::log();
    let dd = drift_dispersion(&log, &cfg)?;
    let (lower, upper) = sandwich(-0.5, 0.5, 0.1)?;
    let gaussian = TestFunction::Gaussian { center: 0.0, width: 0.5 };
    println!("log cost, smooth test functions");
    for n in ns {
        let h = ensemble_histogram(&EnsembleSpec::new(n, log.clone()), None)?;
        let c = CenteringSpec::new(0.0, n, dd.mu, dd.delta2.sqrt())?;
        let lo = llt_smooth(&h, &c, &lower)?;
        let hi = llt_smooth(&h, &c, &upper)?;
        let g = llt_smooth(&h, &c, &gaussian)?;
        println!("N = {n:>5}  sandwich ratios [{:.4}, {:.4}]  gaussian ratio {:.4}", lo.ratio, hi.ratio, g.ratio);
    }
    Ok(())
}
