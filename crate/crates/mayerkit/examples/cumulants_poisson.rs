// Cumulants of a Poisson double integral from multigraphs and partition pairs.

use mayerkit::cumulants::{cumulant_multigraph, cumulant_partition_pairs, empirical_cumulants};
use mayerkit::model::{Activity, Kernel, Region};
use mayerkit::quad::SamplingPlan;

fn main() -> mayerkit::Result<()> {
    let kernel = Kernel::gaussian(1.0, 0.3)?;
    let act = Activity::constant(3.0, Region::cube(2, 1.0)?)?;
    let plan = SamplingPlan::new(20_000, 13).with_workers(4);
    let empirical = empirical_cumulants(&kernel, &act, 3, 5_000, &plan)?;
    for m in 1..=3 {
        let mg = cumulant_multigraph(&kernel, &act, m, &plan)?.to_full_scale();
        let pp = cumulant_partition_pairs(&kernel, &act, m, &plan)?;
        let e = empirical[m - 1];
        println!(
            "kappa_{m}: multigraph {:.4} ± {:.1e}, partition pairs {:.4}, sampled {:.4} ± {:.1e}",
            mg.value, mg.std_error, pp.value, e.value, e.std_error
        );
    }
    Ok(())
}
