//! Small-frequency law for the smoothed characteristic function of the depth.

use cfcost::costs::CostFunction;
use cfcost::ensemble::{EnsembleSpec, SmoothingSpec};
use cfcost::limit_lab::ensemble_histogram;
use cfcost::transfer_op::{e_factor_at, sigma_path, OperatorConfig};
use cfcost::Complex64;

fn main() -> cfcost::Result<()> {
    let n = 5000;
    let cost = CostFunction::one();
    let cfg = OperatorConfig::default();
    let h = ensemble_histogram(&EnsembleSpec::new(n, cost.clone()), Some(&SmoothingSpec::default()))?;
    let taus = [0.02, 0.05, 0.1, 0.2];
    let e0 = e_factor_at(Complex64::new(1.0, 0.0), 0.0, &cost, &cfg)?;
    for (tau, sol) in taus.iter().zip(sigma_path(&taus, &cost, &cfg)?) {
        let e = e_factor_at(sol.sigma, *tau, &cost, &cfg)?;
        let predicted = (e / (e0 * sol.sigma)).norm() * (n as f64).powf(2.0 * (sol.sigma.re - 1.0));
        let empirical = h.char_fn(*tau).norm();
        println!("τ = {tau:<5} empirical {empirical:.6}  predicted {predicted:.6}");
    }
    Ok(())
}
