// Cluster expansion of log Xi for hard rods against the Tonks closed form.

use mayerkit::expansion::log_partition_expansion;
use mayerkit::model::{Activity, PairPotential, Region};
use mayerkit::oracle::tonks_log_xi;
use mayerkit::quad::SamplingPlan;

fn main() -> mayerkit::Result<()> {
    let (sigma, length) = (1.0, 10.0);
    let rods = PairPotential::hard_sphere(sigma)?;
    let plan = SamplingPlan::new(50_000, 7).with_workers(4);
    for z in [0.02, 0.05, 0.1 / std::f64::consts::E] {
        let act = Activity::constant(z, Region::cube(1, length)?)?;
        let r = log_partition_expansion(&rods, &act, 6, &plan)?;
        let exact = tonks_log_xi(z, sigma, length);
        println!(
            "z={z:.4}: series {:.6} ± {:.1e}, tail ≤ {:.1e}, exact {exact:.6}",
            r.partial_sum,
            r.std_error,
            r.tail_bound.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
