//! Branching processes with Poisson offspring intensity |f(q, y)| dλ_z(y):
//! extinction, the Borel total-progeny law and the random connection model.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::converge::offspring_mass;
use crate::error::{Error, Result};
use crate::model::{Activity, PairPotential, Point};
use crate::quad::{stream_tag, RngStream, SamplingPlan};

/// Generations after which a simulated line counts as surviving.
pub const GENERATION_CAP: usize = 10_000;
/// Population size after which a simulated line counts as surviving.
pub const POPULATION_CAP: u64 = 10_000;
/// Smallest box-side to interaction-range ratio accepted by the RCM simulation.
pub const RCM_MIN_RATIO: f64 = 20.0;

const NS_GW: u64 = 13;
const NS_RCM: u64 = 14;
const NS_PROGENY: u64 = 15;

/// Offspring law of a homogeneous model: Poisson with mean b = ∫|f(q, y)| dλ_z(y).
#[derive(Debug, Clone)]
pub struct BranchingSpec {
    pub pot: PairPotential,
    pub act: Activity,
    /// Mean offspring number z·∫|f(q, y)| dy.
    pub b: f64,
}

impl BranchingSpec {
    pub fn new(pot: &PairPotential, act: &Activity) -> Result<Self> {
        let z = act
            .constant_value()
            .ok_or_else(|| Error::Unsupported("branching needs a constant activity in this version".into()))?;
        let b = offspring_mass(pot, act.dim())
            .ok_or_else(|| Error::Unsupported("offspring mass has no closed form for this potential".into()))?;
        if !(z * b).is_finite() {
            return Err(Error::model("offspring mass must be finite"));
        }
        Ok(BranchingSpec {
            pot: pot.clone(),
            act: act.clone(),
            b: z * b,
        })
    }

    /// A bare Poisson(μ) offspring law without a spatial model.
    pub fn poisson(mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::model("mean offspring must be finite and non-negative"));
        }
        let act = Activity::constant(mu, crate::model::Region::cube(1, 1.0)?)?;
        Ok(BranchingSpec {
            pot: PairPotential::ideal(),
            act,
            b: mu,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtinctionMethod {
    FixedPoint { iterations: usize },
    Simulation { trials: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extinction {
    pub probability: f64,
    /// Binomial standard error for simulations, 0 for the fixed point.
    pub std_error: f64,
    pub iterations: usize,
    pub trials: u64,
    pub generation_cap: usize,
}

/// Smallest solution of p = e^{b(p−1)}.
pub fn extinction_probability(spec: &BranchingSpec, method: ExtinctionMethod, plan: &SamplingPlan) -> Result<Extinction> {
    match method {
        ExtinctionMethod::FixedPoint { iterations } => Ok(extinction_fixed_point(spec.b, iterations)),
        ExtinctionMethod::Simulation { trials } => simulate_extinction(spec.b, trials, plan),
    }
}

/// Iteration p ← e^{μ(p−1)} from 0 followed by Newton steps from the left.
/// For μ ≤ 1 the smallest root is 1 and is returned exactly.
pub fn extinction_fixed_point(mu: f64, iterations: usize) -> Extinction {
    let done = |p: f64, i: usize| Extinction {
        probability: p,
        std_error: 0.0,
        iterations: i,
        trials: 0,
        generation_cap: 0,
    };
    if mu <= 1.0 {
        return done(1.0, 0);
    }
    let g = |p: f64| (mu * (p - 1.0)).exp();
    let mut p = 0.0;
    let mut used = 0;
    for i in 1..=iterations {
        let next = g(p);
        assert!(next >= p && next <= 1.0, "extinction iterates must rise within [0, 1]");
        used = i;
        if next - p < 1e-6 {
            p = next;
            break;
        }
        p = next;
    }
    // Newton on the convex map e^{μ(p−1)} − p stays left of the smallest root
    for _ in 0..100 {
        let e = g(p);
        let step = (e - p) / (1.0 - mu * e);
        if !(step > 0.0) {
            break;
        }
        assert!(p + step <= 1.0, "Newton step left the unit interval");
        p += step;
        used += 1;
        if step < 1e-17 {
            break;
        }
    }
    done(p, used)
}

fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

fn simulate_extinction(mu: f64, trials: u64, plan: &SamplingPlan) -> Result<Extinction> {
    if trials == 0 {
        return Err(Error::contract("need at least one trial"));
    }
    let extinct: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = RngStream::new(plan.seed, stream_tag(NS_GW, t, 0)).rng();
            let mut pop: u64 = 1;
            for _ in 0..GENERATION_CAP {
                if pop == 0 {
                    return 1;
                }
                if pop > POPULATION_CAP {
                    return 0;
                }
                pop = poisson_draw(mu * pop as f64, &mut rng);
            }
            u64::from(pop == 0)
        })
        .sum();
    let p = extinct as f64 / trials as f64;
    Ok(Extinction {
        probability: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        iterations: 0,
        trials,
        generation_cap: GENERATION_CAP,
    })
}

/// Total progeny of Galton–Watson Poisson(μ) trees; `cap` marks truncated runs.
pub fn simulate_total_progeny(mu: f64, trials: u64, cap: u64, plan: &SamplingPlan) -> Vec<u64> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = RngStream::new(plan.seed, stream_tag(NS_PROGENY, t, 0)).rng();
            let (mut pop, mut total) = (1u64, 1u64);
            while pop > 0 && total < cap {
                pop = poisson_draw(mu * pop as f64, &mut rng);
                total += pop;
            }
            total.min(cap)
        })
        .collect()
}

/// Borel mass P(N = n) = (μn)^{n−1} e^{−μn} / n! with μ = bz.
pub fn borel_pmf(bz: f64, n: usize) -> f64 {
    assert!(n >= 1 && bz >= 0.0, "need n >= 1 and bz >= 0");
    if bz == 0.0 {
        return if n == 1 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    if n <= 50 {
        (bz * nf).powi(n as i32 - 1) * (-bz * nf).exp() / crate::combinat::factorial(n)
    } else {
        ((nf - 1.0) * (bz * nf).ln() - bz * nf - ln_gamma(nf + 1.0)).exp()
    }
}

/// ln P(N = n) from the Stirling series; accurate for large n.
fn borel_ln_asymptotic(bz: f64, x: f64) -> f64 {
    let c = bz - 1.0 - bz.ln();
    -1.5 * x.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 1.0 / (12.0 * x) + 1.0 / (360.0 * x.powi(3))
        - 1.0 / (1260.0 * x.powi(5))
        - c * x
        - bz.ln()
}

/// Σ_{n≤N} P(N = n) plus an Euler–Maclaurin estimate of the remainder.
pub fn borel_mass(bz: f64, n_terms: usize) -> f64 {
    if bz == 0.0 {
        return 1.0;
    }
    let head: f64 = (1..=n_terms).map(|n| borel_pmf(bz, n)).sum();
    if n_terms < 200 {
        return head;
    }
    let f = |x: f64| borel_ln_asymptotic(bz, x).exp();
    let nf = n_terms as f64;
    // ∫_N^∞ f dx with x = u^{−2}
    let umax = nf.powf(-0.5);
    let c = bz - 1.0 - bz.ln();
    let g = |u: f64| {
        let u2 = u * u;
        let decay = if c == 0.0 { 0.0 } else if u == 0.0 { f64::INFINITY } else { c / u2 };
        let stirling = -u2 / 12.0 + u2.powi(3) / 360.0 - u2.powi(5) / 1260.0;
        (2f64.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + stirling - decay - bz.ln()).exp()
    };
    let m = 4000;
    let h = umax / m as f64;
    let mut s = g(0.0) + g(umax);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
    }
    let integral = s * h / 3.0;
    let dlog = -1.5 / nf + 1.0 / (12.0 * nf * nf) - c;
    head + integral - 0.5 * f(nf) - f(nf) * dlog / 12.0
}

/// Partial sums of T° = Σ_n (μn)^{n−1}/n! with a divergence diagnosis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgenyGf {
    pub partial_sum: f64,
    pub terms: usize,
    /// Estimate of lim a_{n+1}/a_n (exactly μe).
    pub ratio_limit: f64,
    pub diverged: bool,
    /// Geometric bound on the remainder when convergent.
    pub tail_bound: Option<f64>,
}

fn ln_progeny_term(mu: f64, n: usize) -> f64 {
    let nf = n as f64;
    (nf - 1.0) * (mu * nf).ln() - ln_gamma(nf + 1.0)
}

pub fn total_progeny_gf(bz: f64, n_terms: usize) -> Result<ProgenyGf> {
    if n_terms == 0 || !(bz >= 0.0) {
        return Err(Error::contract("need N >= 1 and bz >= 0"));
    }
    if bz == 0.0 {
        return Ok(ProgenyGf {
            partial_sum: 1.0,
            terms: n_terms,
            ratio_limit: 0.0,
            diverged: false,
            tail_bound: Some(0.0),
        });
    }
    let mut sum = 1.0;
    for n in 2..=n_terms {
        sum += ln_progeny_term(bz, n).exp();
    }
    let n = n_terms.max(2);
    let last_ratio = (ln_progeny_term(bz, n + 1) - ln_progeny_term(bz, n)).exp();
    // a_{n+1}/a_n = μ(1 + 1/n)^{n−1}
    let ratio_limit = last_ratio * std::f64::consts::E / (1.0 + 1.0 / n as f64).powi(n as i32 - 1);
    let diverged = ratio_limit > 1.0;
    let tail_bound =
        (ratio_limit < 1.0).then(|| ln_progeny_term(bz, n_terms).exp() * ratio_limit / (1.0 - ratio_limit));
    Ok(ProgenyGf {
        partial_sum: sum,
        terms: n_terms,
        ratio_limit,
        diverged,
        tail_bound,
    })
}

/// Cluster-size sample of the random connection model around an added point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcmReport {
    pub trials: u64,
    pub node_cap: usize,
    /// (size, count), sizes counting q; capped trials appear at `node_cap`.
    pub histogram: Vec<(usize, u64)>,
    pub capped: u64,
    pub capped_fraction: f64,
    pub mean_offspring: f64,
    pub seed: u64,
}

impl RcmReport {
    /// Empirical P(|C| ≤ n).
    pub fn cdf(&self, n: usize) -> f64 {
        let below: u64 = self.histogram.iter().filter(|(s, _)| *s <= n).map(|(_, c)| c).sum();
        below as f64 / self.trials as f64
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Uniform coin for the unordered pair {i, j} of one trial.
fn pair_coin(seed: u64, trial: u64, i: usize, j: usize) -> f64 {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    let key = splitmix(seed ^ splitmix(trial ^ splitmix(((a as u64) << 32) | b as u64)));
    (key >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

struct CellList {
    lower: [f64; 3],
    cell: f64,
    dims: [usize; 3],
    dim: usize,
    start: Vec<usize>,
    items: Vec<usize>,
}

impl CellList {
    fn new(pts: &[Point], lower: &[f64], upper: &[f64], cell: f64) -> Self {
        let dim = lower.len();
        let mut lo = [0.0; 3];
        let mut dims = [1usize; 3];
        for i in 0..dim {
            lo[i] = lower[i];
            dims[i] = (((upper[i] - lower[i]) / cell).ceil() as usize).max(1);
        }
        let ncell = dims.iter().product::<usize>();
        let mut me = CellList {
            lower: lo,
            cell,
            dims,
            dim,
            start: vec![0; ncell + 1],
            items: vec![0; pts.len()],
        };
        let ids: Vec<usize> = pts.iter().map(|p| me.index(&me.coord(p))).collect();
        for &c in &ids {
            me.start[c + 1] += 1;
        }
        for c in 0..ncell {
            me.start[c + 1] += me.start[c];
        }
        let mut fill = me.start.clone();
        for (i, &c) in ids.iter().enumerate() {
            me.items[fill[c]] = i;
            fill[c] += 1;
        }
        me
    }

    fn coord(&self, p: &Point) -> [usize; 3] {
        let mut c = [0usize; 3];
        for (i, ci) in c.iter_mut().enumerate().take(self.dim) {
            let k = ((p.coords()[i] - self.lower[i]) / self.cell).floor();
            *ci = (k.max(0.0) as usize).min(self.dims[i] - 1);
        }
        c
    }

    fn index(&self, c: &[usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    fn neighbours(&self, p: &Point, out: &mut Vec<usize>) {
        out.clear();
        let c = self.coord(p);
        let range = |i: usize| {
            if i < self.dim {
                c[i].saturating_sub(1)..=(c[i] + 1).min(self.dims[i] - 1)
            } else {
                0..=0
            }
        };
        for z in range(2) {
            for y in range(1) {
                for x in range(0) {
                    let id = self.index(&[x, y, z]);
                    out.extend_from_slice(&self.items[self.start[id]..self.start[id + 1]]);
                }
            }
        }
    }
}

/// Breadth-first cluster of `q` in the random connection model with
/// connection probability |f| on a Poisson sample of the activity.
pub fn rcm_cluster(spec: &BranchingSpec, q: &Point, trials: u64, node_cap: usize, plan: &SamplingPlan) -> Result<RcmReport> {
    let act = &spec.act;
    let z = act
        .constant_value()
        .ok_or_else(|| Error::Unsupported("the RCM needs a constant activity".into()))?;
    let range = spec
        .pot
        .range()
        .ok_or_else(|| Error::Unsupported("the RCM needs a finite interaction range".into()))?;
    let dom = act.domain();
    if range > 0.0 && dom.min_side() < RCM_MIN_RATIO * range {
        return Err(Error::contract(format!(
            "box side {} is below {} times the interaction range {range}",
            dom.min_side(),
            RCM_MIN_RATIO
        )));
    }
    if !dom.contains(q) || q.dim() != dom.dim() {
        return Err(Error::contract("q must lie in the box"));
    }
    if trials == 0 || node_cap == 0 {
        return Err(Error::contract("need trials >= 1 and node_cap >= 1"));
    }
    let mass = z * dom.volume();
    let sizes: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = RngStream::new(plan.seed, stream_tag(NS_RCM, t, 0)).rng();
            let n = poisson_draw(mass, &mut rng) as usize;
            if n == 0 || range == 0.0 {
                return 1;
            }
            let mut pts: Vec<Point> = (0..n).map(|_| dom.uniform_point(&mut rng)).collect();
            pts.push(*q);
            let root = n;
            let cells = CellList::new(&pts[..n], dom.lower(), dom.upper(), range);
            let mut seen = vec![false; n + 1];
            seen[root] = true;
            let mut queue = std::collections::VecDeque::from([root]);
            let mut size = 1;
            let mut near = Vec::new();
            while let Some(v) = queue.pop_front() {
                cells.neighbours(&pts[v], &mut near);
                for &w in &near {
                    if seen[w] {
                        continue;
                    }
                    let p = spec.pot.mayer_f(&pts[v], &pts[w]).abs();
                    if p > 0.0 && (p >= 1.0 || pair_coin(plan.seed, t, v, w) < p) {
                        seen[w] = true;
                        size += 1;
                        if size >= node_cap {
                            return node_cap;
                        }
                        queue.push_back(w);
                    }
                }
            }
            size
        })
        .collect();
    let mut hist = BTreeMap::new();
    for s in &sizes {
        *hist.entry(*s).or_insert(0u64) += 1;
    }
    let capped = sizes.iter().filter(|&&s| s >= node_cap).count() as u64;
    Ok(RcmReport {
        trials,
        node_cap,
        histogram: hist.into_iter().collect(),
        capped,
        capped_fraction: capped as f64 / trials as f64,
        mean_offspring: spec.b,
        seed: plan.seed,
    })
}

/// max_n (F_B(n) − F_emp(n)) against the Borel CDF with mean offspring μ.
pub fn borel_domination_statistic(report: &RcmReport, mu: f64) -> f64 {
    let mut cdf_b = 0.0;
    let mut worst: f64 = 0.0;
    for n in 1..report.node_cap {
        cdf_b += borel_pmf(mu, n);
        worst = worst.max(cdf_b - report.cdf(n));
    }
    worst
}

/// One-sided Kolmogorov–Smirnov critical value √(ln(1/α)/(2n)).
pub fn one_sided_critical(alpha: f64, trials: u64) -> f64 {
    ((1.0 / alpha).ln() / (2.0 * trials as f64)).sqrt()
}
