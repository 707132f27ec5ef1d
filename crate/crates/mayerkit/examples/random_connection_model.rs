// Cluster of an added point in the hard-disk random connection model.

use mayerkit::branching::{borel_domination_statistic, borel_pmf, one_sided_critical, rcm_cluster, BranchingSpec};
use mayerkit::model::{Activity, PairPotential, Region};
use mayerkit::quad::SamplingPlan;

fn main() -> mayerkit::Result<()> {
    let zb = 0.3;
    let z = zb / std::f64::consts::PI;
    let act = Activity::constant(z, Region::cube(2, 60.0)?)?;
    let spec = BranchingSpec::new(&PairPotential::hard_sphere(1.0)?, &act)?;
    let trials = 500;
    let r = rcm_cluster(&spec, &act.domain().center(), trials, 10_000, &SamplingPlan::new(0, 4))?;
    println!("size  empirical  Borel");
    for n in 1..=6 {
        let count = r.histogram.iter().find(|(s, _)| *s == n).map_or(0, |(_, c)| *c);
        println!("{n:>4}  {:>9.4}  {:.4}", count as f64 / trials as f64, borel_pmf(spec.b, n));
    }
    let d = borel_domination_statistic(&r, spec.b);
    println!("D- = {d:.4} (1% critical value {:.4}), capped {}", one_sided_critical(0.01, trials), r.capped);
    Ok(())
}
