// Correlation and truncated correlation series of hard rods against brute force.

use mayerkit::expansion::{correlation_expansion, rho_bruteforce, truncated_expansion};
use mayerkit::model::{Activity, PairPotential, Point, Region};
use mayerkit::quad::SamplingPlan;

fn main() -> mayerkit::Result<()> {
    let rods = PairPotential::hard_sphere(1.0)?;
    let act = Activity::constant(0.1, Region::cube(1, 4.0)?)?;
    let plan = SamplingPlan::new(20_000, 3).with_workers(4);
    let pair = [Point::on_line(1.0), Point::on_line(2.5)];
    for k in 1..=2 {
        let pts = &pair[..k];
        let series = correlation_expansion(&rods, &act, pts, 4, &plan)?;
        let brute = rho_bruteforce(&rods, &act, pts, 5, &plan, 1e-12)?;
        println!(
            "rho_{k}: series {:.6} ± {:.1e}, brute force {:.6} ± {:.1e}",
            series.partial_sum, series.std_error, brute.mean, brute.std_error
        );
    }
    let t = truncated_expansion(&rods, &act, &pair, 4, &plan)?;
    println!("rho_2^T: {:.6} ± {:.1e}", t.partial_sum, t.std_error);
    Ok(())
}
