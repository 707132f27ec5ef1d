// Galton–Watson simulation against the Borel law and the extinction fixed point.

use mayerkit::branching::{borel_pmf, extinction_probability, simulate_total_progeny, total_progeny_gf, BranchingSpec, ExtinctionMethod};
use mayerkit::converge::{tree_gf, TreeVariant};
use mayerkit::model::{Activity, PairPotential, Point, Region};
use mayerkit::quad::SamplingPlan;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const TRIALS: u64 = 100_000;
const P_MIN: f64 = 0.01;

/// Pearson test of simulated total progeny against Borel(bz), pooling cells
/// until each expects at least five trials.
fn borel_chi_square_p(bz: f64, seed: u64) -> f64 {
    let sizes = simulate_total_progeny(bz, TRIALS, 1_000_000, &SamplingPlan::new(0, seed));
    let n = TRIALS as f64;
    let mut cells: Vec<(f64, u64)> = Vec::new();
    let (mut expected, mut observed, mut covered) = (0.0, 0u64, 0.0);
    let mut size = 1;
    while n * (1.0 - covered) >= 10.0 {
        let p = borel_pmf(bz, size);
        expected += n * p;
        covered += p;
        observed += sizes.iter().filter(|&&s| s == size as u64).count() as u64;
        if expected >= 5.0 {
            cells.push((expected, observed));
            expected = 0.0;
            observed = 0;
        }
        size += 1;
    }
    let tail_observed = sizes.iter().filter(|&&s| s >= size as u64).count() as u64 + observed;
    cells.push((expected + n * (1.0 - covered), tail_observed));
    let stat: f64 = cells.iter().map(|(e, o)| (*o as f64 - e).powi(2) / e).sum();
    let df = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

#[test]
fn progeny_matches_borel_at_03() {
    let p = borel_chi_square_p(0.3, 5);
    assert!(p > P_MIN, "p = {p}");
}

#[test]
fn progeny_matches_borel_at_08() {
    let p = borel_chi_square_p(0.8, 6);
    assert!(p > P_MIN, "p = {p}");
}

#[test]
fn simulated_extinction_near_fixed_point() {
    let spec = BranchingSpec::poisson(2.0).unwrap();
    let plan = SamplingPlan::new(0, 7).with_workers(4);
    let exact = extinction_probability(&spec, ExtinctionMethod::FixedPoint { iterations: 10_000 }, &plan).unwrap();
    let sim = extinction_probability(&spec, ExtinctionMethod::Simulation { trials: TRIALS }, &plan).unwrap();
    let gap = (sim.probability - exact.probability).abs();
    assert!(gap <= 3.0 * sim.std_error, "simulated {} ± {}, fixed point {}", sim.probability, sim.std_error, exact.probability);
}

#[test]
fn progeny_series_is_plain_tree_function() {
    // unit rods: b = 2, so T = z e^{2T} = z T°(2z)
    let z = 0.1;
    let rods = PairPotential::hard_sphere(1.0).unwrap();
    let act = Activity::constant(z, Region::centered_cube(1, 20.0).unwrap()).unwrap();
    let tree = tree_gf(&rods, &act, &Point::on_line(0.0), TreeVariant::Plain, 100_000, &SamplingPlan::new(1_000, 1)).unwrap();
    let gf = total_progeny_gf(2.0 * z, 200).unwrap();
    assert!(!gf.diverged);
    let series = z * gf.partial_sum;
    assert!((tree.value - series).abs() <= 1e-8 * series, "tree {} vs series {series}", tree.value);
}
