//! One-shot acceptance runner: each suite evaluates a fixed list of numeric
//! criteria and reports pass/fail with the pinned tolerances.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::branching::{
    borel_domination_statistic, borel_mass, extinction_fixed_point, one_sided_critical, rcm_cluster, total_progeny_gf,
    BranchingSpec,
};
use crate::combinat::{
    all_graphs, binomial, connected_graphs, is_connected, multirooted_graphs, partition_log, trees,
};
use crate::converge::{default_grid, optimize_witness, Checker};
use crate::cumulants::{cumulant_multigraph, cumulant_partition_pairs, moment_multigraph, moments_from_cumulants};
use crate::error::{Error, Result};
use crate::expansion::{
    correlation_expansion, ks_apply, log_partition_expansion, picard_iterate, CorrelationOracle, FiniteVolumeOracle,
    Unnormalized,
};
use crate::model::{Activity, Kernel, PairPotential, Point, Region};
use crate::oracle::{extinction_root, poisson_pair_cumulants, tonks_log_xi};
use crate::quad::SamplingPlan;

pub const KPU_TOL: f64 = 1e-4;
pub const FP_TARGET: f64 = 0.5107;
pub const FP_REL_TOL: f64 = 0.02;
pub const FP_SAMPLES: u64 = 10_000_000;
pub const TONKS_ORDER: usize = 6;
pub const PICARD_REL_TOL: f64 = 1e-10;
pub const CROSS_FORM_REL_TOL: f64 = 1e-10;
pub const BOREL_MASS_TOL: f64 = 1e-10;
pub const EXTINCTION_TOL: f64 = 1e-8;
pub const RCM_ZB: f64 = 0.3;
pub const RCM_CAP: usize = 10_000;
pub const RCM_TRIALS: u64 = 1_000;
pub const RCM_ALPHA: f64 = 0.01;
pub const RCM_MAX_CAPPED: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Counts,
    Thresholds,
    Oracles,
    Cumulants,
    Branching,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Counts, Suite::Thresholds, Suite::Oracles, Suite::Cumulants, Suite::Branching];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Counts => "counts",
            Suite::Thresholds => "thresholds",
            Suite::Oracles => "oracles",
            Suite::Cumulants => "cumulants",
            Suite::Branching => "branching",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| Error::Config {
            path: "suite".into(),
            message: format!("unknown suite `{s}`; expected one of counts, thresholds, oracles, cumulants, branching"),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sampling parameters for the MC-based criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    pub seed: u64,
    pub workers: usize,
    /// Samples per Q_k term for the 2D FP threshold.
    pub fp_samples: u64,
    /// Samples per expansion order elsewhere.
    pub samples: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 2024,
            workers: 8,
            fp_samples: FP_SAMPLES,
            samples: 200_000,
        }
    }
}

impl VerifyOptions {
    fn plan(&self, samples: u64) -> SamplingPlan {
        SamplingPlan::new(samples, self.seed).with_workers(self.workers)
    }
}

/// A single comparison inside a criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    fn from_result(name: impl Into<String>, r: Result<Check>) -> Check {
        let name = name.into();
        r.unwrap_or_else(|e| Check::new(name, false, format!("error: {e}")))
    }
}

/// One numbered acceptance criterion and its checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: u8,
    pub title: String,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl Criterion {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    fn timed(id: u8, title: &str, run: impl FnOnce() -> Vec<Check>) -> Criterion {
        let t0 = Instant::now();
        let checks = run();
        Criterion {
            id,
            title: title.into(),
            checks,
            seconds: t0.elapsed().as_secs_f64(),
        }
    }

    pub fn summary_line(&self) -> String {
        format!(
            "[{}] criterion {}: {} ({:.1} s)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds
        )
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Vec<Criterion> {
    match suite {
        Suite::Counts => vec![combinatorial_counts()],
        Suite::Thresholds => vec![kpu_threshold(opts), fp_threshold(opts)],
        Suite::Oracles => vec![tonks_partition(opts), ks_residual(opts)],
        Suite::Cumulants => vec![cumulant_cross_forms(opts)],
        Suite::Branching => vec![borel_extinction(), rcm_subcritical(opts)],
    }
}

/// Plain-text table of every check followed by the criterion lines.
pub fn render_table(criteria: &[Criterion]) -> String {
    let mut out = String::new();
    let width = criteria
        .iter()
        .flat_map(|c| c.checks.iter().map(|k| k.name.len()))
        .max()
        .unwrap_or(10);
    for c in criteria {
        for k in &c.checks {
            out.push_str(&format!(
                "{:>2}  {:<width$}  {}  {}\n",
                c.id,
                k.name,
                if k.passed { "pass" } else { "FAIL" },
                k.detail
            ));
        }
    }
    for c in criteria {
        out.push_str(&c.summary_line());
        out.push('\n');
    }
    out
}

/// Hard spheres: the KPU critical z·|B(0, d)| equals 1/e in every dimension.
pub fn kpu_threshold(opts: &VerifyOptions) -> Criterion {
    Criterion::timed(1, "KPU threshold 1/e for hard spheres", || {
        (1..=3)
            .map(|dim| {
                let name = format!("kpu critical zb, d={dim}");
                Check::from_result(
                    name.clone(),
                    (|| {
                        let pot = PairPotential::hard_sphere(1.0)?;
                        let act = Activity::constant(0.1, Region::cube(dim, 10.0)?)?;
                        let cert = optimize_witness(&pot, &act, 0.0, Checker::Kpu, &default_grid(), &opts.plan(10))?;
                        let zb = cert.critical_zb().unwrap_or(f64::NAN);
                        let err = (zb - (-1f64).exp()).abs();
                        Ok(Check::new(name, err <= KPU_TOL, format!("{zb:.7} vs 1/e, |Δ| = {err:.2e} ≤ {KPU_TOL:.0e}")))
                    })(),
                )
            })
            .collect()
    })
}

/// Hard disks: the FP critical z·π d² from MC moments Q_k, k ≤ packing bound.
pub fn fp_threshold(opts: &VerifyOptions) -> Criterion {
    Criterion::timed(2, "FP critical value 0.5107 for hard disks", || {
        let name = "fp critical zb, d=2".to_string();
        vec![Check::from_result(
            name.clone(),
            (|| {
                let pot = PairPotential::hard_sphere(1.0)?;
                let act = Activity::constant(0.1, Region::cube(2, 10.0)?)?;
                let plan = opts.plan(opts.fp_samples);
                let cert = optimize_witness(&pot, &act, 0.0, Checker::Fp { kmax: None }, &default_grid(), &plan)?;
                let zb = cert.critical_zb().unwrap_or(f64::NAN);
                let rel = (zb - FP_TARGET).abs() / FP_TARGET;
                Ok(Check::new(
                    name,
                    rel <= FP_REL_TOL,
                    format!(
                        "{zb:.5} vs {FP_TARGET}, rel {rel:.2e} ≤ {FP_REL_TOL}, kmax {:?}, {} samples/term",
                        cert.kmax_used, plan.samples
                    ),
                ))
            })(),
        )]
    })
}

/// Hard rods on [0, 10σ]: log-partition series against the Tonks closed form.
pub fn tonks_partition(opts: &VerifyOptions) -> Criterion {
    Criterion::timed(3, "log-partition series vs Tonks closed form", || {
        [0.02, 0.05, 0.1 / std::f64::consts::E]
            .into_iter()
            .map(|z| {
                let name = format!("tonks log Xi, z={z:.4}");
                Check::from_result(
                    name.clone(),
                    (|| {
                        let (sigma, length) = (1.0, 10.0);
                        let pot = PairPotential::hard_sphere(sigma)?;
                        let act = Activity::constant(z, Region::cube(1, length)?)?;
                        let r = log_partition_expansion(&pot, &act, TONKS_ORDER, &opts.plan(opts.samples))?;
                        let exact = tonks_log_xi(z, sigma, length);
                        let tail = r.tail_bound.unwrap_or(f64::INFINITY);
                        let allowed = 3.0 * r.std_error + tail;
                        let err = (r.partial_sum - exact).abs();
                        Ok(Check::new(
                            name,
                            err <= allowed,
                            format!("|Δ| = {err:.3e} ≤ 3σ + tail = {allowed:.3e} (σ = {:.2e}, tail = {tail:.2e})", r.std_error),
                        ))
                    })(),
                )
            })
            .collect()
    })
}

fn rods_oracle(opts: &VerifyOptions) -> Result<(PairPotential, Activity, FiniteVolumeOracle)> {
    let pot = PairPotential::hard_sphere(1.0)?;
    let act = Activity::constant(0.1, Region::cube(1, 4.0)?)?;
    let oracle = FiniteVolumeOracle::new(&pot, &act, 5, &opts.plan(opts.samples / 100), 1e-12)?;
    Ok((pot, act, oracle))
}

/// Hard rods: Kirkwood–Salsburg residual for n = 0, 1, 2 and Picard iterates
/// against the direct correlation series.
pub fn ks_residual(opts: &VerifyOptions) -> Criterion {
    Criterion::timed(4, "Kirkwood–Salsburg residual and Picard identity", || {
        let mut checks = Vec::new();
        let setup = rods_oracle(opts);
        let (pot, act, oracle) = match setup {
            Ok(s) => s,
            Err(e) => return vec![Check::new("rod oracle", false, format!("error: {e}"))],
        };
        let x0 = Point::on_line(2.0);
        let all = [Point::on_line(0.4), Point::on_line(3.3)];
        for n in 0..=2 {
            let name = format!("ks residual, n={n}");
            checks.push(Check::from_result(
                name.clone(),
                (|| {
                    let pts = &all[..n];
                    let un = Unnormalized(&oracle);
                    let lhs = ks_apply(&pot, &act, &un, &x0, pts, 2, &opts.plan(opts.samples / 100), 1e-12)?;
                    let mut with = vec![x0];
                    with.extend_from_slice(pts);
                    let rhs = un.rho(&with)?;
                    let se = lhs.std_error.hypot(rhs.std_error);
                    let err = (lhs.mean - rhs.mean).abs();
                    Ok(Check::new(
                        name,
                        err <= 3.0 * se,
                        format!("|K ρ − ρ| = {err:.3e} ≤ 3σ = {:.3e}", 3.0 * se),
                    ))
                })(),
            ));
        }
        let name = "picard = correlation series".to_string();
        checks.push(Check::from_result(
            name.clone(),
            (|| {
                let plan = opts.plan(opts.samples / 10);
                let mut worst: f64 = 0.0;
                for k in 1..=2 {
                    let pts = &[Point::on_line(1.1), Point::on_line(2.6)][..k];
                    let direct = correlation_expansion(&pot, &act, pts, 5 - k, &plan)?;
                    let picard = picard_iterate(&pot, &act, pts, 5, &plan)?;
                    let rel = (direct.partial_sum - picard.partial_sum).abs() / direct.partial_sum.abs().max(1e-300);
                    worst = worst.max(rel);
                }
                Ok(Check::new(name, worst <= PICARD_REL_TOL, format!("max rel {worst:.2e} ≤ {PICARD_REL_TOL:.0e}")))
            })(),
        ));
        checks
    })
}

/// Graph, multirooted-graph and tree counts against independent oracles.
pub fn combinatorial_counts() -> Criterion {
    Criterion::timed(5, "combinatorial counts", || {
        let mut checks = Vec::new();
        let mut b = vec![1.0];
        b.extend((1..=6).map(|n| 2f64.powi(binomial(n, 2) as i32)));
        let egf = partition_log(&b);
        for n in 1..=6 {
            let name = format!("connected graphs n={n}");
            checks.push(Check::from_result(
                name.clone(),
                (|| {
                    let filtered = all_graphs(n)?.filter(is_connected).count() as f64;
                    let listed = connected_graphs(n)?.count() as f64;
                    let ok = filtered == listed && listed == egf[n - 1];
                    Ok(Check::new(name, ok, format!("{listed} listed, {filtered} filtered, {} by log-EGF", egf[n - 1])))
                })(),
            ));
            let name = format!("multirooted D(1,{n}) = C, D({n},{n}) = G");
            checks.push(Check::from_result(
                name.clone(),
                (|| {
                    let d1 = multirooted_graphs(1, n)?.count() as f64;
                    let dn = multirooted_graphs(n, n)?.count() as f64;
                    let all = 2f64.powi(binomial(n, 2) as i32);
                    Ok(Check::new(name, d1 == egf[n - 1] && dn == all, format!("{d1} and {dn} vs {} and {all}", egf[n - 1])))
                })(),
            ));
        }
        for n in 2..=8 {
            let name = format!("trees n={n}");
            checks.push(Check::from_result(
                name.clone(),
                (|| {
                    let valid = |t: &crate::combinat::Tree| is_connected(&t.graph) && t.graph.edge_count() == n - 1;
                    let un: Vec<_> = trees(n, false)?.collect();
                    let ro: Vec<_> = trees(n, true)?.collect();
                    let (a, b) = ((n as f64).powi(n as i32 - 2), (n as f64).powi(n as i32 - 1));
                    let ok = un.len() as f64 == a && ro.len() as f64 == b && un.iter().all(valid) && ro.iter().all(valid);
                    Ok(Check::new(name, ok, format!("{} unrooted / {} rooted vs {a} / {b}", un.len(), ro.len())))
                })(),
            ));
        }
        checks
    })
}

/// Partition-pair vs multigraph cumulants, the moment–cumulant identity and
/// the Poisson case u ≡ 1.
pub fn cumulant_cross_forms(opts: &VerifyOptions) -> Criterion {
    Criterion::timed(6, "cumulant multigraph and partition-pair forms", || {
        let mut checks = Vec::new();
        let plan = opts.plan((opts.samples / 20).max(1_000));
        let setup = || -> Result<(Kernel, Activity)> {
            Ok((Kernel::gaussian(0.8, 0.4)?, Activity::constant(1.5, Region::cube(2, 1.2)?)?))
        };
        for m in 1..=3 {
            let name = format!("partition pairs = 2^m multigraph, m={m}");
            checks.push(Check::from_result(
                name.clone(),
                (|| {
                    let (kernel, act) = setup()?;
                    let mg = cumulant_multigraph(&kernel, &act, m, &plan)?.to_full_scale();
                    let pp = cumulant_partition_pairs(&kernel, &act, m, &plan)?;
                    let mut worst: f64 = 0.0;
                    for ((_, a), (_, b)) in mg.per_n.iter().zip(&pp.per_n) {
                        worst = worst.max((a.mean - b.mean).abs() / a.mean.abs().max(1e-300));
                    }
                    let total = (mg.value - pp.value).abs() / mg.value.abs().max(1e-300);
                    worst = worst.max(total);
                    Ok(Check::new(name, worst <= CROSS_FORM_REL_TOL, format!("max rel {worst:.2e} ≤ {CROSS_FORM_REL_TOL:.0e}")))
                })(),
            ));
        }
        for (c, z, side) in [(1.0, 0.8, 1.5), (0.6, 2.0, 0.9)] {
            let name = format!("moment–cumulant identity, u={c}, zV={:.2}", z * side);
            checks.push(Check::from_result(
                name.clone(),
                (|| {
                    let kernel = Kernel::constant(c)?;
                    let act = Activity::constant(z, Region::cube(1, side)?)?;
                    let kappa: Vec<f64> = (1..=4)
                        .map(|m| cumulant_multigraph(&kernel, &act, m, &plan).map(|r| r.value))
                        .collect::<Result<_>>()?;
                    let rebuilt = moments_from_cumulants(&kappa);
                    let mut worst: f64 = 0.0;
                    for m in 1..=4 {
                        let mo = moment_multigraph(&kernel, &act, m, &plan)?.value;
                        worst = worst.max((mo - rebuilt[m - 1]).abs() / mo.abs());
                    }
                    Ok(Check::new(name, worst <= 1e-12, format!("max rel {worst:.2e} ≤ 1e-12")))
                })(),
            ));
        }
        let name = "u ≡ 1 vs Poisson cumulants of N(N−1)".to_string();
        checks.push(Check::from_result(
            name.clone(),
            (|| {
                let act = Activity::constant(0.9, Region::cube(2, 1.3)?)?;
                let mu = 0.9 * 1.69;
                let exact = poisson_pair_cumulants(mu, 4);
                let one = Kernel::constant(1.0)?;
                let mut ok = true;
                let mut detail = Vec::new();
                for m in 1..=4 {
                    let r = cumulant_partition_pairs(&one, &act, m, &plan)?;
                    let slack = (3.0 * r.std_error).max(1e-10 * exact[m - 1].abs());
                    let err = (r.value - exact[m - 1]).abs();
                    ok &= err <= slack;
                    detail.push(format!("m={m}: |Δ| {err:.1e}"));
                }
                Ok(Check::new(name, ok, detail.join(", ")))
            })(),
        ));
        checks
    })
}

/// Borel normalisation, the 1/e divergence boundary and extinction roots.
pub fn borel_extinction() -> Criterion {
    Criterion::timed(7, "Borel law, progeny divergence and extinction", || {
        let mut checks = Vec::new();
        for bz in [0.1, 0.3, 0.5, 0.8, 1.0] {
            let mass = borel_mass(bz, 5_000);
            let err = (mass - 1.0).abs();
            checks.push(Check::new(
                format!("borel mass, bz={bz}"),
                err <= BOREL_MASS_TOL,
                format!("|Σ − 1| = {err:.2e} ≤ {BOREL_MASS_TOL:.0e}"),
            ));
        }
        let e = std::f64::consts::E;
        for (bz, want) in [(0.3, false), (1.0 / e - 0.02, false), (1.0 / e + 0.02, true), (0.5, true)] {
            let r = total_progeny_gf(bz, 400);
            let got = r.as_ref().map(|g| g.diverged).ok();
            checks.push(Check::new(
                format!("progeny divergence, bz={bz:.4}"),
                got == Some(want),
                format!("diverged = {got:?}, expected {want}"),
            ));
        }
        for bz in [0.5, 1.0, 2.0] {
            let p = extinction_fixed_point(bz, 100_000).probability;
            let root = extinction_root(bz);
            let err = (p - root).abs();
            checks.push(Check::new(
                format!("extinction, bz={bz}"),
                err <= EXTINCTION_TOL,
                format!("{p:.12} vs bisection {root:.12}"),
            ));
        }
        checks
    })
}

/// Hard-disk random connection model at zb = 0.3 against the Borel law.
pub fn rcm_subcritical(opts: &VerifyOptions) -> Criterion {
    Criterion::timed(8, "RCM clusters dominated by Borel total progeny", || {
        let name = "rcm cluster sizes, zb=0.3".to_string();
        vec![Check::from_result(
            name.clone(),
            (|| {
                let d = 1.0;
                let z = RCM_ZB / (std::f64::consts::PI * d * d);
                let act = Activity::constant(z, Region::cube(2, 400.0 * d)?)?;
                let spec = BranchingSpec::new(&PairPotential::hard_sphere(d)?, &act)?;
                let r = rcm_cluster(&spec, &act.domain().center(), RCM_TRIALS, RCM_CAP, &opts.plan(RCM_TRIALS))?;
                let stat = borel_domination_statistic(&r, spec.b);
                let crit = one_sided_critical(RCM_ALPHA, RCM_TRIALS);
                Ok(Check::new(
                    name,
                    r.capped_fraction <= RCM_MAX_CAPPED && stat <= crit,
                    format!(
                        "capped {:.3} ≤ {RCM_MAX_CAPPED}, D⁻ = {stat:.4} ≤ {crit:.4}",
                        r.capped_fraction
                    ),
                ))
            })(),
        )]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn counts_suite_passes() {
        let c = run_suite(Suite::Counts, &VerifyOptions::default());
        assert!(c.iter().all(Criterion::passed), "{}", render_table(&c));
    }
}
