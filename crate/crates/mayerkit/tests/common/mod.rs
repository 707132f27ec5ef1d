// Property suites shared by the invariant tests and the acceptance target.

use std::sync::Arc;

use mayerkit::combinat::{all_graphs, edge_index, pair_count, trees};
use mayerkit::converge::check_fp;
use mayerkit::expansion::{janossy_from_correlations, janossy_normalization, picard_iterate, region_packing, CorrelationOracle, FiniteVolumeOracle, Unnormalized};
use mayerkit::model::{energy, Activity, PairPotential, Point, Region};
use mayerkit::quad::SamplingPlan;
use mayerkit::ursell::{graph_weight, psi, psi_by_recursion, psi_matrix, ursell_fast, MayerMatrix};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub const CASES: u32 = 100;
pub const MAX_N: usize = 5;
/// Exact identities on f tables with entries in [−1, 0].
pub const EXACT_TOL: f64 = 1e-12;
/// Monte Carlo bounds hold up to this many standard errors.
pub const SIGMA: f64 = 5.0;
/// Witness a and the largest activity for the t = 0 Picard envelope on unit rods.
pub const PICARD_A: f64 = 1.0;
pub const PICARD_Z_MAX: f64 = 0.15;

#[allow(dead_code)]
pub type Suite = fn(u32) -> Result<(), String>;

#[allow(dead_code)]
pub const SUITES: [(&str, Suite); 7] = [
    ("Ursell permutation symmetry", ursell_symmetry),
    ("tree-graph inequality", tree_graph_inequality),
    ("graph-sum factorization", keygraph_factorization),
    ("psi recursion equals enumeration", psi_recursion),
    ("rho bounded by activity product", nonneg_bound),
    ("Picard envelope under a t = 0 witness", picard_envelope),
    ("Janossy normalization and non-negativity", janossy),
];

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn f_value() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 1 => Just(-1.0), 4 => -1.0..=0.0f64]
}

fn f_table() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1..=MAX_N).prop_flat_map(|n| (Just(n), prop::collection::vec(f_value(), pair_count(n))))
}

fn matrix(n: usize, f: Vec<f64>) -> MayerMatrix {
    MayerMatrix::from_values(n, f).expect("table length")
}

fn soft_potential(strength: f64) -> PairPotential {
    PairPotential::callback(Arc::new(move |x: &Point, y: &Point| strength * (-x.dist2(y)).exp()), None)
}

fn plane_points(n: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((0.0..3.0f64, 0.0..3.0f64), n).prop_map(|v| v.into_iter().map(|(a, b)| Point::new(&[a, b]).unwrap()).collect())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

pub fn ursell_symmetry(cases: u32) -> Result<(), String> {
    let strategy = f_table().prop_flat_map(|(n, f)| (Just(n), Just(f), Just((0..n).collect::<Vec<_>>()).prop_shuffle()));
    run(cases, strategy, |(n, f, perm)| {
        let mut g = vec![0.0; f.len()];
        for i in 0..n {
            for j in i + 1..n {
                g[edge_index(i, j)] = f[edge_index(perm[i], perm[j])];
            }
        }
        let (a, b) = (matrix(n, f), matrix(n, g));
        let (x, y) = (ursell_fast(&a), ursell_fast(&b));
        prop_assert!(close(x, y, EXACT_TOL), "phi {x} vs permuted {y}");
        let by_graphs = psi_matrix(&a, 1).value;
        prop_assert!(close(x, by_graphs, EXACT_TOL), "subset recursion {x} vs graphs {by_graphs}");
        Ok(())
    })
}

pub fn tree_graph_inequality(cases: u32) -> Result<(), String> {
    run(cases, f_table(), |(n, f)| {
        let m = matrix(n, f);
        let phi = ursell_fast(&m);
        let tree_sum: f64 = trees(n, false)
            .unwrap()
            .map(|t| t.graph.edges().map(|(i, j)| m.get(i, j).abs()).product::<f64>())
            .sum();
        prop_assert!(phi.abs() <= tree_sum * (1.0 + EXACT_TOL) + EXACT_TOL, "|phi| {} > tree sum {tree_sum}", phi.abs());
        Ok(())
    })
}

pub fn keygraph_factorization(cases: u32) -> Result<(), String> {
    let strategy = (f_table(), 0.0..3.0f64, (1..=MAX_N).prop_flat_map(plane_points));
    run(cases, strategy, |((n, f), strength, pts)| {
        let m = matrix(n, f);
        let sum: f64 = all_graphs(n).unwrap().map(|g| g.edges().map(|(i, j)| m.get(i, j)).product::<f64>()).sum();
        prop_assert!(close(sum, m.boltzmann(), EXACT_TOL), "graph sum {sum} vs product {}", m.boltzmann());
        let pot = soft_potential(strength);
        let sum: f64 = all_graphs(pts.len()).unwrap().map(|g| graph_weight(&pot, &g, &pts).unwrap()).sum();
        let boltzmann = (-energy(&pot, &pts)).exp();
        prop_assert!(close(sum, boltzmann, 1e-10), "graph sum {sum} vs e^-H {boltzmann}");
        Ok(())
    })
}

pub fn psi_recursion(cases: u32) -> Result<(), String> {
    let strategy = (1..=MAX_N).prop_flat_map(|n| (plane_points(n), 1..=n, 0.0..3.0f64, any::<bool>()));
    run(cases, strategy, |(pts, k, strength, hard)| {
        let pot = if hard { PairPotential::hard_sphere(1.0).unwrap() } else { soft_potential(strength) };
        let roots: Vec<usize> = (0..k).collect();
        let enumerated = psi(&pot, k, &pts).unwrap().value;
        let recursive = psi_by_recursion(&pot, &roots, &pts).unwrap();
        prop_assert!(close(enumerated, recursive, 1e-10), "enumeration {enumerated} vs recursion {recursive}");
        Ok(())
    })
}

fn rods_in_box() -> impl Strategy<Value = (f64, f64, f64, u64)> {
    (0.6..1.5f64, 2.0..3.0f64, 0.05..0.5f64, any::<u64>())
}

fn oracle(sigma: f64, length: f64, z: f64, seed: u64, samples: u64) -> (PairPotential, Activity, FiniteVolumeOracle) {
    let pot = PairPotential::hard_sphere(sigma).unwrap();
    let act = Activity::constant(z, Region::cube(1, length).unwrap()).unwrap();
    let nmax = region_packing(&pot, act.domain()).expect("hard rods pack");
    let o = FiniteVolumeOracle::new(&pot, &act, nmax, &SamplingPlan::new(samples, seed), 1e-12).unwrap();
    (pot, act, o)
}

pub fn nonneg_bound(cases: u32) -> Result<(), String> {
    let strategy = (rods_in_box(), prop::collection::vec(0.0..1.0f64, 1..=3));
    run(cases, strategy, |((sigma, length, z, seed), unit)| {
        let (_, _, o) = oracle(sigma, length, z, seed, 400);
        let pts: Vec<Point> = unit.iter().map(|u| Point::on_line(u * length)).collect();
        let rho = o.rho(&pts).unwrap();
        let bound = z.powi(pts.len() as i32);
        prop_assert!(rho.mean <= bound + SIGMA * rho.std_error + EXACT_TOL, "rho {} ± {} above {bound}", rho.mean, rho.std_error);
        Ok(())
    })
}

pub fn picard_envelope(cases: u32) -> Result<(), String> {
    let pot = PairPotential::hard_sphere(1.0).unwrap();
    let witness = Activity::constant(PICARD_Z_MAX, Region::centered_cube(1, 20.0).unwrap()).unwrap();
    let cert = check_fp(&pot, &witness, 0.0, PICARD_A, None, &SamplingPlan::new(20_000, 1)).map_err(|e| e.to_string())?;
    if !cert.satisfied() {
        return Err(format!("no t = 0 witness at z = {PICARD_Z_MAX}, a = {PICARD_A}: margin {}", cert.margin));
    }
    let strategy = (0.01..PICARD_Z_MAX, 3.0..6.0f64, prop::collection::vec(0.0..1.0f64, 1..=3), 0usize..=2, any::<u64>());
    run(cases, strategy, |(z, length, unit, extra, seed)| {
        let act = Activity::constant(z, Region::cube(1, length).unwrap()).unwrap();
        let pts: Vec<Point> = unit.iter().map(|u| Point::on_line(u * length)).collect();
        let n = (pts.len() + extra).min(MAX_N);
        let s = picard_iterate(&pot, &act, &pts, n, &SamplingPlan::new(500, seed)).unwrap();
        let mut envelope = (z * PICARD_A.exp()).powi(pts.len() as i32);
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                envelope *= 1.0 + pot.mayer_f(&pts[i], &pts[j]);
            }
        }
        prop_assert!(
            s.partial_sum.abs() <= envelope + SIGMA * s.std_error + EXACT_TOL,
            "|S_N| {} ± {} above {envelope}",
            s.partial_sum.abs(),
            s.std_error
        );
        Ok(())
    })
}

pub fn janossy(cases: u32) -> Result<(), String> {
    let strategy = (rods_in_box(), 0.0..0.5f64, 0.5..1.0f64, 0.0..1.0f64);
    run(cases, strategy, |((sigma, length, z, seed), lo, hi, at)| {
        let (pot, act, o) = oracle(sigma, length, z, seed, 200);
        let un = Unnormalized(&o);
        let region = Region::new(&[lo * length], &[hi * length]).unwrap();
        let kmax = region_packing(&pot, &region).unwrap();
        let inner = SamplingPlan::new(100, seed ^ 1);
        let x = Point::on_line((lo + at * (hi - lo)) * length);
        for pts in [vec![], vec![x]] {
            let j = janossy_from_correlations(&pot, &act, &un, &region, &pts, kmax, &inner, 1e-12).unwrap();
            prop_assert!(j.mean >= -SIGMA * j.std_error - EXACT_TOL, "Janossy {} ± {} at {} points", j.mean, j.std_error, pts.len());
        }
        let total = janossy_normalization(&pot, &act, &un, &region, kmax, &SamplingPlan::new(100, seed ^ 2), &inner, 1e-12).unwrap();
        let xi = o.xi();
        let se = total.std_error.hypot(xi.std_error);
        prop_assert!((total.mean - xi.mean).abs() <= SIGMA * se + 1e-9, "normalization {} vs Xi {} (se {se})", total.mean, xi.mean);
        Ok(())
    })
}
