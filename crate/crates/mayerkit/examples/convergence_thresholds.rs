// Critical activities for hard spheres under the KPU and FP conditions.

use mayerkit::converge::{default_grid, optimize_witness, Checker};
use mayerkit::model::{Activity, PairPotential, Region};
use mayerkit::quad::SamplingPlan;

fn main() -> mayerkit::Result<()> {
    let spheres = PairPotential::hard_sphere(1.0)?;
    let plan = SamplingPlan::new(200_000, 5).with_workers(4);
    for dim in 1..=2 {
        let act = Activity::constant(0.1, Region::cube(dim, 10.0)?)?;
        let kpu = optimize_witness(&spheres, &act, 0.0, Checker::Kpu, &default_grid(), &plan)?;
        let fp = optimize_witness(&spheres, &act, 0.0, Checker::Fp { kmax: None }, &default_grid(), &plan)?;
        println!(
            "d={dim}: critical z|B| KPU {:.5}, FP {:.5} (terms up to k = {:?})",
            kpu.critical_zb().unwrap_or(f64::NAN),
            fp.critical_zb().unwrap_or(f64::NAN),
            fp.kmax_used
        );
    }
    Ok(())
}
