// Rooted tree generating functions as smallest fixed points, and forests.

use mayerkit::converge::{forest_picard, tree_gf, TreeVariant};
use mayerkit::model::{Activity, PairPotential, Point, Region};
use mayerkit::quad::SamplingPlan;

fn main() -> mayerkit::Result<()> {
    let rods = PairPotential::hard_sphere(0.5)?;
    let plan = SamplingPlan::new(100_000, 9).with_workers(4);
    let q = Point::on_line(0.0);
    for z in [0.1, 0.3, 0.4] {
        let act = Activity::constant(z, Region::centered_cube(1, 20.0)?)?;
        let plain = tree_gf(&rods, &act, &q, TreeVariant::Plain, 10_000, &plan)?;
        let fp = tree_gf(&rods, &act, &q, TreeVariant::Fp, 10_000, &plan)?;
        println!(
            "z={z}: plain {:.5} (diverged {}), FP {:.5} (diverged {})",
            plain.value, plain.diverged, fp.value, fp.diverged
        );
    }
    let act = Activity::constant(0.2, Region::centered_cube(1, 20.0)?)?;
    let f = forest_picard(&rods, &act, &[q, Point::on_line(3.0)], 6, &plan)?;
    println!("two-root forest sum to 6 vertices: {:.6}", f.value);
    Ok(())
}
