//! Moments and cumulants of the double integral ∫u dη⁽²⁾ = Σ_{i≠j} u(x_i, x_j)
//! against a Poisson process, from multigraph and partition-pair sums.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinat::{
    connected_multigraphs, edge_index, factorial, nonflat_connected_pairs, pair_count, spanning_multigraphs, Multigraph,
};
use crate::error::{check_cap, Error, Result};
use crate::model::{Activity, Kernel, Point};
use crate::quad::{mc_integrate_plan, sample_point, stream_tag, McEstimate, RngStream, SamplingPlan};

/// Largest order m handled by the diagram sums.
pub const CAP_CUMULANT_ORDER: usize = 4;
/// Fewest Poisson samples accepted by [`empirical_cumulants`].
pub const MIN_TRIALS: u64 = 1_000;

const NS_CUMULANT: u64 = 0;
const KIND_CUMULANT: u64 = 0;
const KIND_MOMENT: u64 = 1;
const KIND_EMPIRICAL: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    Multigraph,
    PartitionPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Moment,
    Cumulant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantReport {
    pub m: usize,
    pub statistic: Statistic,
    pub form: Form,
    /// `true` when the report refers to ½∫u dη⁽²⁾ rather than ∫u dη⁽²⁾.
    pub half: bool,
    pub value: f64,
    pub std_error: f64,
    /// (n, contribution) for n = 2..=2m.
    pub per_n: Vec<(usize, McEstimate)>,
    pub seed: u64,
    pub samples: u64,
}

impl CumulantReport {
    pub fn estimate(&self) -> McEstimate {
        McEstimate {
            mean: self.value,
            std_error: self.std_error,
            samples: self.samples,
        }
    }

    /// κ_m(X) = 2^m κ_m(X/2) (and likewise for moments) applied to a half-scale report.
    pub fn to_full_scale(&self) -> CumulantReport {
        if !self.half {
            return self.clone();
        }
        let c = 2f64.powi(self.m as i32);
        CumulantReport {
            half: false,
            value: self.value * c,
            std_error: self.std_error * c,
            per_n: self.per_n.iter().map(|(n, e)| (*n, e.scaled(c))).collect(),
            ..self.clone()
        }
    }

    pub fn contribution(&self, n: usize) -> f64 {
        self.per_n.iter().find(|(k, _)| *k == n).map_or(0.0, |(_, e)| e.mean)
    }
}

/// Σ_g c_g Π u_{ij}^{m_ij}: multiplicity vectors with coefficients, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagramSum {
    pub n: usize,
    terms: Vec<(Vec<(u8, u8)>, f64)>,
}

impl DiagramSum {
    fn from_counts(n: usize, counts: BTreeMap<Vec<u8>, f64>, scale: f64) -> Self {
        let terms = counts
            .into_iter()
            .map(|(mult, c)| {
                let sparse = mult
                    .iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .map(|(p, &k)| (p as u8, k))
                    .collect();
                (sparse, c * scale)
            })
            .collect();
        DiagramSum { n, terms }
    }

    fn from_multigraphs(n: usize, graphs: impl Iterator<Item = Multigraph>) -> Self {
        let mut counts = BTreeMap::new();
        for g in graphs {
            *counts.entry(g.multiplicities()).or_insert(0.0) += 1.0;
        }
        DiagramSum::from_counts(n, counts, 1.0 / factorial(n))
    }

    /// Σ of coefficients: the value at u ≡ 1 before integration.
    pub fn total_coefficient(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c).sum()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Evaluates the weighted sum at one point tuple.
    pub fn eval(&self, kernel: &Kernel, pts: &[Point]) -> f64 {
        let n = self.n;
        let mut u = vec![0.0; pair_count(n)];
        for j in 1..n {
            for i in 0..j {
                u[edge_index(i, j)] = kernel.value(&pts[i], &pts[j]);
            }
        }
        self.terms
            .iter()
            .map(|(mult, c)| c * mult.iter().map(|&(p, k)| u[p as usize].powi(k as i32)).product::<f64>())
            .sum()
    }
}

fn check_order(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::contract("order m must be positive"));
    }
    check_cap("cumulant order m", m, CAP_CUMULANT_ORDER, false)
}

/// (1/n!) Σ_{γ ∈ ℳ_s([n],[m])} Π u^{m_ij}, grouped by multiplicity vector.
pub fn spanning_diagrams(n: usize, m: usize) -> Result<DiagramSum> {
    check_order(m)?;
    Ok(DiagramSum::from_multigraphs(n, spanning_multigraphs(n, m)?))
}

/// (1/n!) Σ_{γ ∈ ℳ_c([n],[m])} Π u^{m_ij}, grouped by multiplicity vector.
pub fn connected_diagrams(n: usize, m: usize) -> Result<DiagramSum> {
    check_order(m)?;
    Ok(DiagramSum::from_multigraphs(n, connected_multigraphs(n, m)?))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    heap_permute(n, &mut p, &mut out);
    out
}

fn heap_permute(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(p.clone());
        return;
    }
    for i in 0..k - 1 {
        heap_permute(k - 1, p, out);
        if k % 2 == 0 {
            p.swap(i, k - 1);
        } else {
            p.swap(0, k - 1);
        }
    }
    heap_permute(k - 1, p, out);
}

/// Σ over σ with n blocks of the σ-contracted tensor (u⊗…⊗u)_σ, symmetrised
/// over the n! assignments of integration variables to blocks.
pub fn partition_pair_diagrams(n: usize, m: usize) -> Result<DiagramSum> {
    check_order(m)?;
    let perms = permutations(n);
    let mut counts = BTreeMap::new();
    for sigma in nonflat_connected_pairs(m)? {
        if sigma.block_count() != n {
            continue;
        }
        for perm in &perms {
            let mut mult = vec![0u8; pair_count(n)];
            for a in 0..m {
                let (i, j) = (perm[sigma.block_of(2 * a)], perm[sigma.block_of(2 * a + 1)]);
                mult[edge_index(i.min(j), i.max(j))] += 1;
            }
            *counts.entry(mult).or_insert(0.0) += 1.0;
        }
    }
    Ok(DiagramSum::from_counts(n, counts, 1.0 / factorial(n)))
}

fn integrate(
    kernel: &Kernel,
    act: &Activity,
    sums: &[DiagramSum],
    plan: &SamplingPlan,
    kind: u64,
    m: usize,
) -> Result<Vec<(usize, McEstimate)>> {
    if !kernel.is_bounded() {
        return Err(Error::Unsupported("diagram sums need a bounded kernel".into()));
    }
    sums.iter()
        .map(|s| {
            if s.is_empty() {
                return Ok((s.n, McEstimate::exact(0.0)));
            }
            let g = |pts: &[Point]| s.eval(kernel, pts);
            let tag = stream_tag(NS_CUMULANT, kind << 8 | m as u64, s.n);
            Ok((s.n, mc_integrate_plan(act, s.n, &g, plan, tag)?))
        })
        .collect()
}

fn report(m: usize, statistic: Statistic, form: Form, half: bool, per_n: Vec<(usize, McEstimate)>, plan: &SamplingPlan) -> CumulantReport {
    let total = McEstimate::sum(per_n.iter().map(|(_, e)| e));
    CumulantReport {
        m,
        statistic,
        form,
        half,
        value: total.mean,
        std_error: total.std_error,
        per_n,
        seed: plan.seed,
        samples: plan.samples,
    }
}

/// E[(½∫u dη⁽²⁾)^m] = Σ_{n=2}^{2m} (1/n!) ∫ Σ_{γ ∈ ℳ_s} Π u^{m_ij} dλ_z^n.
pub fn moment_multigraph(kernel: &Kernel, act: &Activity, m: usize, plan: &SamplingPlan) -> Result<CumulantReport> {
    let sums = (2..=2 * m).map(|n| spanning_diagrams(n, m)).collect::<Result<Vec<_>>>()?;
    let per_n = integrate(kernel, act, &sums, plan, KIND_MOMENT, m)?;
    Ok(report(m, Statistic::Moment, Form::Multigraph, true, per_n, plan))
}

/// κ_m(½∫u dη⁽²⁾) from connected multigraphs.
pub fn cumulant_multigraph(kernel: &Kernel, act: &Activity, m: usize, plan: &SamplingPlan) -> Result<CumulantReport> {
    let sums = (2..=2 * m).map(|n| connected_diagrams(n, m)).collect::<Result<Vec<_>>>()?;
    let per_n = integrate(kernel, act, &sums, plan, KIND_CUMULANT, m)?;
    Ok(report(m, Statistic::Cumulant, Form::Multigraph, true, per_n, plan))
}

/// κ_m(∫u dη⁽²⁾) from non-flat connected partition pairs (π_m, σ).
/// Uses the same streams as [`cumulant_multigraph`].
pub fn cumulant_partition_pairs(kernel: &Kernel, act: &Activity, m: usize, plan: &SamplingPlan) -> Result<CumulantReport> {
    let sums = (2..=2 * m).map(|n| partition_pair_diagrams(n, m)).collect::<Result<Vec<_>>>()?;
    let per_n = integrate(kernel, act, &sums, plan, KIND_CUMULANT, m)?;
    Ok(report(m, Statistic::Cumulant, Form::PartitionPair, false, per_n, plan))
}

/// Σ over set partitions of [m] of Π κ_{|A_i|}, given κ_1..κ_m.
pub fn moments_from_cumulants(kappa: &[f64]) -> Vec<f64> {
    crate::combinat::partition_sum(kappa)[1..].to_vec()
}

/// k-statistic estimates with jackknife standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KStatistic {
    pub order: usize,
    pub value: f64,
    pub std_error: f64,
}

fn k_statistics(x: &[f64], m: usize) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let mut s = [0.0; 5];
    for &v in x {
        let d = v - mean;
        let mut p = 1.0;
        for item in s.iter_mut() {
            *item += p;
            p *= d;
        }
    }
    let (s1, s2, s3, s4) = (s[1], s[2], s[3], s[4]);
    let k = [
        mean,
        (n * s2 - s1 * s1) / (n * (n - 1.0)),
        (n * n * s3 - 3.0 * n * s2 * s1 + 2.0 * s1.powi(3)) / (n * (n - 1.0) * (n - 2.0)),
        ((n.powi(3) + n * n) * s4 - 4.0 * (n * n + n) * s3 * s1 - 3.0 * (n * n - n) * s2 * s2 + 12.0 * n * s2 * s1 * s1
            - 6.0 * s1.powi(4))
            / (n * (n - 1.0) * (n - 2.0) * (n - 3.0)),
    ];
    k[..m].to_vec()
}

fn poisson_configuration<R: Rng + ?Sized>(act: &Activity, rng: &mut R) -> Result<Vec<Point>> {
    use rand_distr::{Distribution, Poisson};
    let (mass, thin) = match act.exact_mass() {
        Some(m) => (m, false),
        None => (act.mass_bound(), true),
    };
    if mass <= 0.0 {
        return Ok(vec![]);
    }
    let count = Poisson::new(mass).map_err(|e| Error::contract(e.to_string()))?.sample(rng) as usize;
    let dom = act.domain();
    let bound = mass / dom.volume();
    let mut pts = Vec::with_capacity(count);
    for _ in 0..count {
        if thin {
            let p = dom.uniform_point(rng);
            if rng.random::<f64>() * bound < act.z(&p) {
                pts.push(p);
            }
        } else {
            pts.push(sample_point(act, rng)?);
        }
    }
    Ok(pts)
}

/// κ_1..κ_m of X = Σ_{i≠j} u(x_i, x_j) from `trials` Poisson configurations.
pub fn empirical_cumulants(kernel: &Kernel, act: &Activity, m: usize, trials: u64, plan: &SamplingPlan) -> Result<Vec<KStatistic>> {
    check_order(m)?;
    if trials < MIN_TRIALS {
        return Err(Error::contract(format!("need at least {MIN_TRIALS} trials")));
    }
    let xs: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = RngStream::new(plan.seed, stream_tag(NS_CUMULANT, KIND_EMPIRICAL << 32 | t, 0)).rng();
            let pts = poisson_configuration(act, &mut rng)?;
            let mut x = 0.0;
            for j in 1..pts.len() {
                for i in 0..j {
                    x += 2.0 * kernel.value(&pts[i], &pts[j]);
                }
            }
            Ok(x)
        })
        .collect::<Result<_>>()?;
    let full = k_statistics(&xs, m);
    let nt = xs.len();
    // leave-one-out estimates on ⌈n/400⌉-sized blocks keep the jackknife linear
    let blocks = nt.min(400);
    let size = nt.div_ceil(blocks);
    let loo: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .filter_map(|b| {
            let (lo, hi) = (b * size, ((b + 1) * size).min(nt));
            (lo < hi).then(|| {
                let rest: Vec<f64> = xs[..lo].iter().chain(&xs[hi..]).copied().collect();
                k_statistics(&rest, m)
            })
        })
        .collect();
    let g = loo.len() as f64;
    Ok((0..m)
        .map(|r| {
            let mean = loo.iter().map(|v| v[r]).sum::<f64>() / g;
            let var = (g - 1.0) / g * loo.iter().map(|v| (v[r] - mean).powi(2)).sum::<f64>();
            KStatistic {
                order: r + 1,
                value: full[r],
                std_error: var.sqrt(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinat::binomial;
    use crate::model::Region;
    use crate::oracle::{poisson_pair_cumulants, poisson_pair_moments};

    fn unit_box(z: f64, side: f64) -> Activity {
        Activity::constant(z, Region::cube(1, side).unwrap()).unwrap()
    }

    #[test]
    fn first_order_is_half_the_mean() {
        let act = unit_box(1.3, 2.0);
        let k = Kernel::constant(0.7).unwrap();
        let plan = SamplingPlan::new(1_000, 1);
        let mo = moment_multigraph(&k, &act, 1, &plan).unwrap();
        let cu = cumulant_multigraph(&k, &act, 1, &plan).unwrap();
        let mu = 1.3 * 2.0;
        assert!((mo.value - 0.5 * 0.7 * mu * mu).abs() < 1e-12);
        assert_eq!(mo.value, cu.value);
        assert_eq!(mo.per_n.len(), 1);
    }

    #[test]
    fn constant_kernel_matches_poisson() {
        let act = unit_box(0.8, 1.5);
        let mu = 1.2;
        let plan = SamplingPlan::new(100, 2);
        let one = Kernel::constant(1.0).unwrap();
        let mom = poisson_pair_moments(mu, 4);
        let cum = poisson_pair_cumulants(mu, 4);
        for m in 1..=4 {
            let scale = 2f64.powi(m as i32);
            let mo = moment_multigraph(&one, &act, m, &plan).unwrap();
            assert!((mo.value * scale - mom[m - 1]).abs() < 1e-9 * mom[m - 1], "moment {m}");
            let cu = cumulant_multigraph(&one, &act, m, &plan).unwrap();
            assert!((cu.to_full_scale().value - cum[m - 1]).abs() < 1e-9 * cum[m - 1].abs(), "cumulant {m}");
            let pp = cumulant_partition_pairs(&one, &act, m, &plan).unwrap();
            assert!((pp.value - cum[m - 1]).abs() < 1e-9 * cum[m - 1].abs(), "pairs {m}");
        }
    }

    #[test]
    fn per_n_counts_for_unit_kernel() {
        // each n-term is μ^n/n! times the number of spanning multigraphs
        let act = unit_box(1.0, 1.7);
        let mo = moment_multigraph(&Kernel::constant(1.0).unwrap(), &act, 2, &SamplingPlan::new(10, 0)).unwrap();
        let counts = [(2, 1.0), (3, 6.0), (4, 6.0)];
        for (n, c) in counts {
            let want = 1.7f64.powi(n as i32) / factorial(n) * c;
            assert!((mo.contribution(n) - want).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn pair_diagrams_scale_by_two_to_the_m() {
        for m in 1..=3 {
            for n in 2..=2 * m {
                let a = connected_diagrams(n, m).unwrap();
                let b = partition_pair_diagrams(n, m).unwrap();
                assert_eq!(a.len(), b.len());
                for ((ma, ca), (mb, cb)) in a.terms.iter().zip(&b.terms) {
                    assert_eq!(ma, mb);
                    assert_eq!(*cb, ca * 2f64.powi(m as i32));
                }
            }
        }
    }

    #[test]
    fn spanning_coefficients_sum_to_pair_powers() {
        // Σ_n C(N,n)·n!·(coefficient mass at n) over spanning diagrams = C(N,2)^m
        for m in 1..=3 {
            for big_n in 2..=4usize {
                let total: f64 = (2..=2 * m)
                    .filter(|&n| n <= big_n)
                    .map(|n| binomial(big_n, n) * factorial(n) * spanning_diagrams(n, m).unwrap().total_coefficient())
                    .sum();
                assert_eq!(total, binomial(big_n, 2).powi(m as i32));
            }
        }
    }

    #[test]
    fn order_cap() {
        let act = unit_box(1.0, 1.0);
        let k = Kernel::constant(1.0).unwrap();
        assert!(matches!(
            cumulant_multigraph(&k, &act, 5, &SamplingPlan::default()),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn k_statistics_of_small_sample() {
        let x = [1.0, 2.0, 4.0, 7.0, 11.0];
        let k = k_statistics(&x, 2);
        assert!((k[0] - 5.0).abs() < 1e-12);
        assert!((k[1] - 16.5).abs() < 1e-12);
    }

    #[test]
    fn zero_kernel_has_zero_cumulants() {
        let act = unit_box(2.0, 1.0);
        let ks = empirical_cumulants(&Kernel::constant(0.0).unwrap(), &act, 3, 1_000, &SamplingPlan::new(10, 4)).unwrap();
        assert!(ks.iter().all(|k| k.value == 0.0 && k.std_error == 0.0));
    }
}
