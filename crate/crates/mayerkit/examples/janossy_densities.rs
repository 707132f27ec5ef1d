// Janossy densities from correlation functions and their normalisation.

use mayerkit::expansion::{janossy_from_correlations, janossy_normalization, FiniteVolumeOracle, Unnormalized};
use mayerkit::model::{Activity, PairPotential, Point, Region};
use mayerkit::quad::SamplingPlan;

fn main() -> mayerkit::Result<()> {
    let rods = PairPotential::hard_sphere(1.0)?;
    let act = Activity::constant(0.2, Region::cube(1, 3.0)?)?;
    let plan = SamplingPlan::new(2_000, 17).with_workers(4);
    let oracle = FiniteVolumeOracle::new(&rods, &act, 4, &plan, 1e-12)?;
    let un = Unnormalized(&oracle);
    let region = Region::new(&[0.5], &[2.0])?;
    let void = janossy_from_correlations(&rods, &act, &un, &region, &[], 2, &plan, 1e-12)?;
    let one = janossy_from_correlations(&rods, &act, &un, &region, &[Point::on_line(1.0)], 2, &plan, 1e-12)?;
    println!("void {:.5}, one point at 1.0 {:.5} (both times Xi)", void.mean, one.mean);
    let inner = SamplingPlan::new(500, 18);
    let total = janossy_normalization(&rods, &act, &un, &region, 2, &SamplingPlan::new(500, 19), &inner, 1e-12)?;
    println!("normalisation {:.5} ± {:.1e} vs Xi {:.5}", total.mean, total.std_error, oracle.xi().mean);
    Ok(())
}
