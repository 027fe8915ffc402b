//! Periodic orbits of the Gauss map and the strongly-diophantine diagnostics.

use cfcost::costs::CostFunction;
use cfcost::diophantine::{periodic_point, remark7_alpha, strongly_dio_report, DigitTuple};

fn main() -> cfcost::Result<()> {
    for m in [1, 2, 5] {
        let orbit = periodic_point(&DigitTuple::new(vec![m])?)?;
        println!("[{m}]: x = {} ≈ {:.12}, a = {:.12}, closed form {:.12}", orbit.surd, orbit.x, orbit.a, remark7_alpha(m)?);
    }
    let tuples = [vec![1], vec![2], vec![1, 2], vec![1, 1, 2]].map(|d| DigitTuple::new(d).unwrap());
    for cost in [CostFunction::one(), CostFunction::log()] {
        let rep = strongly_dio_report(&tuples, &cost, 3.0, 400)?;
        println!("{}: L = {:?}", cost.name, rep.l.iter().map(|l| l.value).collect::<Vec<_>>());
        println!("    verdict {:?}", rep.verdict);
    }
    Ok(())
}
