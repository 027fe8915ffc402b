//! Direct averaging against a test function equals its Fourier-side integral.

use cfcost::costs::CostFunction;
use cfcost::ensemble::{EnsembleSpec, SmoothingSpec};
use cfcost::limit_lab::{
    ensemble_histogram, fourier_inversion_check, kernel_hat, kernel_hat_quadrature, mollifier_error, CenteringSpec,
    PlateauSide, TestFunction,
};

fn main() -> cfcost::Result<()> {
    for (d, t) in [(0.1, 3.0), (0.5, 2.0), (1.0, 1.5)] {
        println!("kernel transform δ={d} τ={t}: closed form {:.12}, quadrature {:.12}", kernel_hat(d, t), kernel_hat_quadrature(d, t));
    }
    let plateau = TestFunction::plateau(-0.5, 0.5, 0.25, PlateauSide::Upper)?;
    for d in [0.1, 0.01, 0.001] {
        let e = mollifier_error(&plateau, d)?;
        println!("mollifier δ={d}: sup error {:.3e}, D = {:.6}", e.sup_error, e.d_hat);
    }

    let n = 1000;
    let h = ensemble_histogram(&EnsembleSpec::new(n, CostFunction::log()), Some(&SmoothingSpec::default()))?;
    let c = CenteringSpec::new(0.3, n, 0.8325255125563032, 0.10460794065340433f64.sqrt())?;
    let psi = TestFunction::plateau(-0.5, 0.5, 0.04, PlateauSide::Upper)?.mollify(0.2)?;
    let chk = fourier_inversion_check(&h, &c, &psi, 60.0, 1e-7)?;
    println!("route A {:.12}  route B {:.12}  difference {:.2e}", chk.route_a, chk.route_b, chk.difference);
    Ok(())
}
