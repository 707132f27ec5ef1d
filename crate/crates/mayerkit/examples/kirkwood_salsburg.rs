// Kirkwood–Salsburg residual on a brute-force oracle and Picard iterates.

use mayerkit::expansion::{correlation_expansion, ks_apply, picard_iterate, CorrelationOracle, FiniteVolumeOracle, Unnormalized};
use mayerkit::model::{Activity, PairPotential, Point, Region};
use mayerkit::quad::SamplingPlan;

fn main() -> mayerkit::Result<()> {
    let rods = PairPotential::hard_sphere(1.0)?;
    let act = Activity::constant(0.1, Region::cube(1, 4.0)?)?;
    let plan = SamplingPlan::new(2_000, 11).with_workers(4);
    let oracle = FiniteVolumeOracle::new(&rods, &act, 5, &plan, 1e-12)?;
    let un = Unnormalized(&oracle);
    let x0 = Point::on_line(2.0);
    let x1 = Point::on_line(0.4);
    let lhs = ks_apply(&rods, &act, &un, &x0, &[x1], 2, &plan, 1e-12)?;
    let rhs = un.rho(&[x0, x1])?;
    println!("K rho at (x0, x1): {:.5} ± {:.1e}; oracle {:.5} ± {:.1e}", lhs.mean, lhs.std_error, rhs.mean, rhs.std_error);

    let pts = [Point::on_line(1.1)];
    let direct = correlation_expansion(&rods, &act, &pts, 4, &plan)?;
    let picard = picard_iterate(&rods, &act, &pts, 5, &plan)?;
    println!("rho_1 series {:.12}, Picard iterate {:.12}", direct.partial_sum, picard.partial_sum);
    Ok(())
}
