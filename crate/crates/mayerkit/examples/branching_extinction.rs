// Galton–Watson extinction, the Borel law and the progeny generating function.

use mayerkit::branching::{borel_pmf, extinction_probability, total_progeny_gf, BranchingSpec, ExtinctionMethod};
use mayerkit::quad::SamplingPlan;

fn main() -> mayerkit::Result<()> {
    let plan = SamplingPlan::new(0, 21).with_workers(4);
    for bz in [0.5, 1.0, 1.5, 2.0] {
        let spec = BranchingSpec::poisson(bz)?;
        let fixed = extinction_probability(&spec, ExtinctionMethod::FixedPoint { iterations: 10_000 }, &plan)?;
        let sim = extinction_probability(&spec, ExtinctionMethod::Simulation { trials: 20_000 }, &plan)?;
        println!(
            "bz={bz}: fixed point {:.6}, simulated {:.4} ± {:.4}",
            fixed.probability, sim.probability, sim.std_error
        );
    }
    let head: Vec<String> = (1..=5).map(|n| format!("{:.4}", borel_pmf(0.3, n))).collect();
    println!("Borel(0.3) masses 1..5: {}", head.join(" "));
    for bz in [0.3, 0.35, 0.39, 0.5] {
        let gf = total_progeny_gf(bz, 300)?;
        println!("bz={bz}: partial sum {:.4e}, diverged {}", gf.partial_sum, gf.diverged);
    }
    Ok(())
}
