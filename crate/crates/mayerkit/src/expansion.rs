//! Order-by-order Monte Carlo expansions of log Ξ, ρ_k, ρ_k^T and the
//! log-Laplace functional; the brute-force finite-volume oracle; the
//! Kirkwood–Salsburg operator, Picard iterates and Janossy densities.

use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::combinat::factorial;
use crate::converge::{correlation_tail_bound, log_xi_tail_bound, offspring_mass, poisson_tail};
use crate::error::{check_cap, Error, Result};
use crate::model::{Activity, PairPotential, Point, Region};
use crate::quad::{mc_integrate_plan, stream_tag, McEstimate, SamplingPlan};
use crate::ursell::{psi_fast, psi_recursive_matrix, ursell_fast, MayerMatrix};

/// Largest expansion order (total vertex count) without `force_size_limits`.
pub const CAP_ORDER: usize = 7;

const NS_LOGXI: u64 = 4;
const NS_XI: u64 = 5;
const NS_CORR: u64 = 6;
const NS_TRUNC: u64 = 7;
const NS_LAPLACE: u64 = 8;
const NS_RHO: u64 = 9;
const NS_KS: u64 = 10;
const NS_JANOSSY: u64 = 11;
const NS_NORM: u64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    #[serde(rename = "logXi")]
    LogXi,
    #[serde(rename = "rho_n")]
    Rho,
    #[serde(rename = "rho_n_T")]
    RhoTruncated,
    #[serde(rename = "logLaplace")]
    LogLaplace,
    #[serde(rename = "janossy")]
    Janossy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderTerm {
    pub order: usize,
    pub estimate: McEstimate,
}

/// Partial sum S_N of an expansion with its per-order coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub quantity: Quantity,
    /// Number of fixed points (k for correlations, 0 otherwise).
    pub points: usize,
    pub orders: Vec<OrderTerm>,
    pub truncation: usize,
    pub partial_sum: f64,
    pub std_error: f64,
    pub tail_bound: Option<f64>,
    pub seed: u64,
    pub samples: u64,
    pub workers: usize,
}

impl ExpansionReport {
    fn assemble(
        quantity: Quantity,
        points: usize,
        orders: Vec<OrderTerm>,
        truncation: usize,
        tail_bound: Option<f64>,
        plan: &SamplingPlan,
    ) -> Self {
        let total = McEstimate::sum(orders.iter().map(|o| &o.estimate));
        ExpansionReport {
            quantity,
            points,
            orders,
            truncation,
            partial_sum: total.mean,
            std_error: total.std_error,
            tail_bound,
            seed: plan.seed,
            samples: plan.samples,
            workers: plan.workers,
        }
    }

    pub fn estimate(&self) -> McEstimate {
        McEstimate::sum(self.orders.iter().map(|o| &o.estimate))
    }
}

fn coefficient(act: &Activity, n: usize, g: &(dyn Fn(&[Point]) -> f64 + Sync), plan: &SamplingPlan, tag: u64) -> Result<McEstimate> {
    Ok(mc_integrate_plan(act, n, g, plan, tag)?.scaled(1.0 / factorial(n)))
}

fn first_order(act: &Activity, plan: &SamplingPlan, tag: u64) -> Result<McEstimate> {
    match act.exact_mass() {
        Some(m) => Ok(McEstimate::exact(m)),
        None => mc_integrate_plan(act, 1, &|_| 1.0, plan, tag),
    }
}

fn joined(pts: &[Point], ys: &[Point]) -> Vec<Point> {
    let mut all = Vec::with_capacity(pts.len() + ys.len());
    all.extend_from_slice(pts);
    all.extend_from_slice(ys);
    all
}

fn activity_product(act: &Activity, pts: &[Point]) -> f64 {
    pts.iter().map(|p| act.z(p)).product()
}

/// FNV-1a over the coordinates and marks, mixed with `salt`.
fn point_key(pts: &[Point], salt: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let mut eat = |x: u64| {
        for b in x.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    for p in pts {
        for c in p.coords() {
            eat(c.to_bits());
        }
        eat(p.mark().map_or(u64::MAX, f64::to_bits));
    }
    h
}

fn check_order(what: &'static str, n: usize, plan: &SamplingPlan) -> Result<()> {
    check_cap(what, n, CAP_ORDER, plan.force_size_limits)
}

/// log Ξ_Λ ≈ Σ_{n≤N} (1/n!) ∫ φ_n^T dλ_z^n.
pub fn log_partition_expansion(pot: &PairPotential, act: &Activity, n_max: usize, plan: &SamplingPlan) -> Result<ExpansionReport> {
    if n_max == 0 {
        return Err(Error::contract("truncation order must be at least 1"));
    }
    check_order("expansion order", n_max, plan)?;
    let mut orders = vec![OrderTerm {
        order: 1,
        estimate: first_order(act, plan, stream_tag(NS_LOGXI, 0, 1))?,
    }];
    for n in 2..=n_max {
        let estimate = if pot.is_ideal() {
            McEstimate::exact(0.0)
        } else {
            coefficient(
                act,
                n,
                &|p| ursell_fast(&MayerMatrix::new(pot, p)),
                plan,
                stream_tag(NS_LOGXI, n as u64, 0),
            )?
        };
        orders.push(OrderTerm { order: n, estimate });
    }
    let tail = if pot.is_ideal() {
        Some(0.0)
    } else {
        log_xi_tail_bound(pot, act, n_max)
    };
    Ok(ExpansionReport::assemble(Quantity::LogXi, 0, orders, n_max, tail, plan))
}

fn required_order(mass: f64, tol: f64, from: usize) -> usize {
    (from..10_000).find(|&n| poisson_tail(mass, n) <= tol).unwrap_or(10_000)
}

/// Ξ_Λ = 1 + Σ_{n≤nmax} (1/n!) ∫ e^{−H_n} dλ_z^n by direct sampling.
pub fn xi_bruteforce(pot: &PairPotential, act: &Activity, nmax: usize, plan: &SamplingPlan, tol: f64) -> Result<McEstimate> {
    let mass = act.mass_bound();
    let packed = region_packing(pot, act.domain()).is_some_and(|p| nmax >= p);
    let tail = if packed { 0.0 } else { poisson_tail(mass, nmax) };
    if tail > tol {
        return Err(Error::TailTooLarge {
            required: required_order(mass, tol, nmax),
            detail: format!("partition-function tail bound {tail:.3e} exceeds tolerance {tol:.3e}"),
        });
    }
    let mut terms = vec![McEstimate::exact(1.0)];
    if nmax >= 1 {
        terms.push(first_order(act, plan, stream_tag(NS_XI, 1, 0))?);
    }
    for n in 2..=nmax {
        terms.push(coefficient(act, n, &|p| MayerMatrix::new(pot, p).boltzmann(), plan, stream_tag(NS_XI, n as u64, 0))?);
    }
    Ok(McEstimate::sum(&terms))
}

/// Source of correlation-function values ρ_n(x_1, …, x_n); ρ_0 is the
/// normalisation.
pub trait CorrelationOracle: Sync {
    fn rho(&self, pts: &[Point]) -> Result<McEstimate>;
}

/// Wraps a closure as a [`CorrelationOracle`].
pub struct FnOracle<F>(pub F);

impl<F> CorrelationOracle for FnOracle<F>
where
    F: Fn(&[Point]) -> Result<McEstimate> + Sync,
{
    fn rho(&self, pts: &[Point]) -> Result<McEstimate> {
        (self.0)(pts)
    }
}

/// Brute-force finite-volume correlations ρ_n = Πz · (1/Ξ) Σ_k (1/k!) ∫ e^{−H_{n+k}} dλ_z^k.
///
/// Ξ is estimated once. Each ρ evaluation draws from streams keyed by the
/// point coordinates, so repeated queries at one tuple agree exactly.
#[derive(Debug, Clone)]
pub struct FiniteVolumeOracle {
    pot: PairPotential,
    act: Activity,
    nmax: usize,
    plan: SamplingPlan,
    xi: McEstimate,
}

impl FiniteVolumeOracle {
    pub fn new(pot: &PairPotential, act: &Activity, nmax: usize, plan: &SamplingPlan, tol: f64) -> Result<Self> {
        let xi = xi_bruteforce(pot, act, nmax, plan, tol)?;
        Ok(FiniteVolumeOracle {
            pot: pot.clone(),
            act: act.clone(),
            nmax,
            plan: *plan,
            xi,
        })
    }

    pub fn xi(&self) -> McEstimate {
        self.xi
    }

    pub fn activity(&self) -> &Activity {
        &self.act
    }

    pub fn potential(&self) -> &PairPotential {
        &self.pot
    }

    /// Ξ·ρ_n(pts); the empty tuple gives Ξ.
    pub fn unnormalized(&self, pts: &[Point]) -> Result<McEstimate> {
        if pts.is_empty() {
            return Ok(self.xi);
        }
        let pre = activity_product(&self.act, pts);
        let base = MayerMatrix::new(&self.pot, pts).boltzmann();
        if pre == 0.0 || base == 0.0 {
            return Ok(McEstimate::exact(0.0));
        }
        let mut terms = vec![McEstimate::exact(base)];
        for k in 1..=self.nmax {
            let g = |ys: &[Point]| MayerMatrix::new(&self.pot, &joined(pts, ys)).boltzmann();
            let tag = stream_tag(NS_RHO, point_key(pts, k as u64), 0);
            terms.push(coefficient(&self.act, k, &g, &self.plan, tag)?);
        }
        Ok(McEstimate::sum(&terms).scaled(pre))
    }
}

impl CorrelationOracle for FiniteVolumeOracle {
    fn rho(&self, pts: &[Point]) -> Result<McEstimate> {
        if pts.is_empty() {
            return Ok(McEstimate::exact(1.0));
        }
        let num = self.unnormalized(pts)?;
        let xi = self.xi;
        let mean = num.mean / xi.mean;
        let rel = if num.mean == 0.0 {
            0.0
        } else {
            ((num.std_error / num.mean).powi(2) + (xi.std_error / xi.mean).powi(2)).sqrt()
        };
        Ok(McEstimate {
            mean,
            std_error: if num.mean == 0.0 { num.std_error / xi.mean } else { mean.abs() * rel },
            samples: num.samples,
        })
    }
}

/// The oracle's Ξ·ρ_n values; linear relations among ρ's hold for these too,
/// without the common 1/Ξ̂ factor.
pub struct Unnormalized<'a>(pub &'a FiniteVolumeOracle);

impl CorrelationOracle for Unnormalized<'_> {
    fn rho(&self, pts: &[Point]) -> Result<McEstimate> {
        self.0.unnormalized(pts)
    }
}

/// ρ_n(pts) from a freshly built [`FiniteVolumeOracle`].
pub fn rho_bruteforce(
    pot: &PairPotential,
    act: &Activity,
    pts: &[Point],
    nmax: usize,
    plan: &SamplingPlan,
    tol: f64,
) -> Result<McEstimate> {
    FiniteVolumeOracle::new(pot, act, nmax, plan, tol)?.rho(pts)
}

fn zero_orders(n: usize) -> Vec<OrderTerm> {
    (0..=n)
        .map(|order| OrderTerm {
            order,
            estimate: McEstimate::exact(0.0),
        })
        .collect()
}

/// ρ_k(pts) ≈ Πz [ψ_{k,k}(pts) + Σ_{m≤N} (1/m!) ∫ ψ_{k,k+m}(pts, ·) dλ_z^m].
pub fn correlation_expansion(
    pot: &PairPotential,
    act: &Activity,
    pts: &[Point],
    n: usize,
    plan: &SamplingPlan,
) -> Result<ExpansionReport> {
    correlation_series(pot, act, pts, n, plan, false)
}

fn correlation_series(
    pot: &PairPotential,
    act: &Activity,
    pts: &[Point],
    n: usize,
    plan: &SamplingPlan,
    recursion: bool,
) -> Result<ExpansionReport> {
    let k = pts.len();
    if k == 0 {
        return Err(Error::contract("need at least one point"));
    }
    check_order("expansion vertices k + N", k + n, plan)?;
    let pre = activity_product(act, pts);
    let base = MayerMatrix::new(pot, pts).boltzmann();
    if pre == 0.0 || base == 0.0 {
        return Ok(ExpansionReport::assemble(Quantity::Rho, k, zero_orders(n), n, Some(0.0), plan));
    }
    let roots = ((1u32 << k) - 1) as u16;
    let mut orders = vec![OrderTerm {
        order: 0,
        estimate: McEstimate::exact(pre * base),
    }];
    for m in 1..=n {
        let estimate = if pot.is_ideal() {
            McEstimate::exact(0.0)
        } else {
            let g = |ys: &[Point]| {
                let mm = MayerMatrix::new(pot, &joined(pts, ys));
                if recursion {
                    psi_recursive_matrix(&mm, roots, ((1u32 << (k + m)) - 1) as u16)
                } else {
                    psi_fast(&mm, k)
                }
            };
            coefficient(act, m, &g, plan, stream_tag(NS_CORR, 0, m))?.scaled(pre)
        };
        orders.push(OrderTerm { order: m, estimate });
    }
    let tail = if pot.is_ideal() {
        Some(0.0)
    } else {
        correlation_tail_bound(pot, act, k, n, pre * base)
    };
    Ok(ExpansionReport::assemble(Quantity::Rho, k, orders, n, tail, plan))
}

/// ρ_k^T(pts) ≈ Πz [φ_k^T(pts) + Σ_{m≤N} (1/m!) ∫ φ_{k+m}^T(pts, ·) dλ_z^m].
pub fn truncated_expansion(
    pot: &PairPotential,
    act: &Activity,
    pts: &[Point],
    n: usize,
    plan: &SamplingPlan,
) -> Result<ExpansionReport> {
    let k = pts.len();
    if k == 1 {
        let mut r = correlation_expansion(pot, act, pts, n, plan)?;
        r.quantity = Quantity::RhoTruncated;
        return Ok(r);
    }
    if k == 0 {
        return Err(Error::contract("need at least one point"));
    }
    check_order("expansion vertices k + N", k + n, plan)?;
    let pre = activity_product(act, pts);
    if pre == 0.0 || pot.is_ideal() {
        return Ok(ExpansionReport::assemble(Quantity::RhoTruncated, k, zero_orders(n), n, Some(0.0), plan));
    }
    let mut orders = vec![OrderTerm {
        order: 0,
        estimate: McEstimate::exact(pre * ursell_fast(&MayerMatrix::new(pot, pts))),
    }];
    for m in 1..=n {
        let g = |ys: &[Point]| ursell_fast(&MayerMatrix::new(pot, &joined(pts, ys)));
        let estimate = coefficient(act, m, &g, plan, stream_tag(NS_TRUNC, k as u64, m))?.scaled(pre);
        orders.push(OrderTerm { order: m, estimate });
    }
    Ok(ExpansionReport::assemble(Quantity::RhoTruncated, k, orders, n, None, plan))
}

/// ρ values on every subset of an n-tuple, indexed by bit mask; ρ(∅) = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    n: usize,
    values: Vec<Option<f64>>,
}

impl CorrelationTable {
    pub fn new(n: usize) -> Result<Self> {
        if n > 16 {
            return Err(Error::contract("correlation tables cover at most 16 points"));
        }
        let mut values = vec![None; 1 << n];
        values[0] = Some(1.0);
        Ok(CorrelationTable { n, values })
    }

    /// Fills every non-empty subset from `f(indices)`.
    pub fn from_fn(n: usize, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let mut t = Self::new(n)?;
        for mask in 1..(1u32 << n) {
            let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            t.values[mask as usize] = Some(f(&idx));
        }
        Ok(t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn set(&mut self, mask: u32, value: f64) {
        self.values[mask as usize] = Some(value);
    }

    pub fn get(&self, mask: u32) -> Option<f64> {
        self.values.get(mask as usize).copied().flatten()
    }

    fn require(&self, mask: u32) -> Result<f64> {
        self.get(mask)
            .ok_or_else(|| Error::contract(format!("correlation table misses sub-tuple {mask:#b}")))
    }
}

/// ρ^T on every subset via ρ(S) = Σ_{B ∋ min S} ρ^T(B) ρ(S∖B).
pub fn truncated_table(rhos: &CorrelationTable) -> Result<Vec<f64>> {
    let n = rhos.n;
    let mut t = vec![0.0; 1 << n];
    for s in 1u32..(1 << n) {
        let low = s & s.wrapping_neg();
        let rest = s & !low;
        let mut v = rhos.require(s)?;
        // proper blocks B = low ∪ u with u ⊊ rest
        let mut u = rest;
        while u != 0 {
            u = (u - 1) & rest;
            let b = low | u;
            v -= t[b as usize] * rhos.require(s & !b)?;
        }
        t[s as usize] = v;
    }
    Ok(t)
}

/// ρ_n^T of the full tuple by Möbius inversion over set partitions.
pub fn truncated_from_correlations(rhos: &CorrelationTable) -> Result<f64> {
    if rhos.n == 0 {
        return Err(Error::contract("need at least one point"));
    }
    Ok(truncated_table(rhos)?[(1 << rhos.n) - 1])
}

/// log E[e^{−Σh}] ≈ Σ_{n≤N} (1/n!) ∫ (e^{−Σh(x_j)} − 1) φ_n^T dλ_z^n for h ≥ −t.
pub fn log_laplace_expansion(
    pot: &PairPotential,
    act: &Activity,
    h: &(dyn Fn(&Point) -> f64 + Sync),
    n_max: usize,
    t: f64,
    plan: &SamplingPlan,
) -> Result<ExpansionReport> {
    if n_max == 0 {
        return Err(Error::contract("truncation order must be at least 1"));
    }
    if !(t >= 0.0) {
        return Err(Error::contract("lower bound parameter t must be non-negative"));
    }
    check_order("expansion order", n_max, plan)?;
    let violated = AtomicBool::new(false);
    let weight = |p: &[Point]| {
        let mut s = 0.0;
        for x in p {
            let v = h(x);
            if v < -t || v.is_nan() {
                violated.store(true, Ordering::Relaxed);
                return 0.0;
            }
            s += v;
        }
        (-s).exp_m1()
    };
    let mut orders = vec![OrderTerm {
        order: 1,
        estimate: mc_integrate_plan(act, 1, &|p| weight(p), plan, stream_tag(NS_LAPLACE, 1, 0))?,
    }];
    for n in 2..=n_max {
        let estimate = if pot.is_ideal() {
            McEstimate::exact(0.0)
        } else {
            let g = |p: &[Point]| {
                let w = weight(p);
                if w == 0.0 {
                    0.0
                } else {
                    w * ursell_fast(&MayerMatrix::new(pot, p))
                }
            };
            coefficient(act, n, &g, plan, stream_tag(NS_LAPLACE, n as u64, 0))?
        };
        orders.push(OrderTerm { order: n, estimate });
    }
    if violated.load(Ordering::Relaxed) {
        return Err(Error::contract(format!("h fell below -t = {} at a sampled point", -t)));
    }
    let tail = if pot.is_ideal() {
        Some(0.0)
    } else if t == 0.0 {
        log_xi_tail_bound(pot, act, n_max)
    } else {
        None
    };
    Ok(ExpansionReport::assemble(Quantity::LogLaplace, 0, orders, n_max, tail, plan))
}

/// Most points of a hard-sphere configuration that fit in `region`,
/// when the potential has a single hard-core distance.
pub fn region_packing(pot: &PairPotential, region: &Region) -> Option<usize> {
    let d = pot.hard_sphere_diameter()?;
    let dim = region.dim();
    if dim == 1 {
        return Some((region.side(0) / d).floor() as usize + 1);
    }
    let grown: f64 = (0..dim).map(|i| region.side(i) + d).product();
    Some((grown / crate::converge::ball_volume(dim, d / 2.0)).floor() as usize)
}

fn lebesgue(region: &Region) -> Result<Activity> {
    Activity::constant(1.0, *region)
}

/// Number of alternating terms needed beyond the packing limit or to push the
/// Poisson envelope below `tol`.
fn janossy_terms(pot: &PairPotential, act: &Activity, region: &Region, k: usize, mmax: usize, tol: f64) -> Result<usize> {
    if let Some(p) = region_packing(pot, region) {
        if k + mmax >= p {
            return Ok(p.saturating_sub(k));
        }
    }
    let mu = act.z_bound() * region.volume();
    let tail = poisson_tail(mu, mmax);
    if tail > tol {
        return Err(Error::TailTooLarge {
            required: required_order(mu, tol, mmax),
            detail: format!("alternating Janossy tail bound {tail:.3e} exceeds tolerance {tol:.3e}"),
        });
    }
    Ok(mmax)
}

/// j_{k,Δ}(pts)·Πz = Σ_m ((−1)^m/m!) ∫_{Δ^m} ρ_{k+m}(pts, y) dy.
#[allow(clippy::too_many_arguments)]
pub fn janossy_from_correlations(
    pot: &PairPotential,
    act: &Activity,
    oracle: &dyn CorrelationOracle,
    region: &Region,
    pts: &[Point],
    mmax: usize,
    plan: &SamplingPlan,
    tol: f64,
) -> Result<McEstimate> {
    if pts.iter().any(|p| !region.contains(p)) {
        return Err(Error::contract("Janossy points must lie in the region"));
    }
    let k = pts.len();
    let terms_m = janossy_terms(pot, act, region, k, mmax, tol)?;
    let leb = lebesgue(region)?;
    let mut terms = vec![oracle.rho(pts)?];
    for m in 1..=terms_m {
        let g = |ys: &[Point]| oracle.rho(&joined(pts, ys)).map_or(f64::NAN, |e| e.mean);
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let tag = stream_tag(NS_JANOSSY, point_key(pts, m as u64), 0);
        terms.push(coefficient(&leb, m, &g, plan, tag)?.scaled(sign));
    }
    Ok(McEstimate::sum(&terms))
}

/// Σ_{k≤kmax} (1/k!) ∫_{Δ^k} j_{k,Δ}·Πz dy, which equals the oracle's ρ_0 when the
/// sum is complete. Inner Janossy values use `inner`.
#[allow(clippy::too_many_arguments)]
pub fn janossy_normalization(
    pot: &PairPotential,
    act: &Activity,
    oracle: &dyn CorrelationOracle,
    region: &Region,
    kmax: usize,
    plan: &SamplingPlan,
    inner: &SamplingPlan,
    tol: f64,
) -> Result<McEstimate> {
    let kmax = match region_packing(pot, region) {
        Some(p) => kmax.min(p),
        None => kmax,
    };
    let leb = lebesgue(region)?;
    let mmax_for = |k: usize| kmax.saturating_sub(k);
    let mut terms = vec![janossy_from_correlations(pot, act, oracle, region, &[], mmax_for(0), inner, tol)?];
    for k in 1..=kmax {
        let g = |ys: &[Point]| {
            janossy_from_correlations(pot, act, oracle, region, ys, mmax_for(k), inner, tol).map_or(f64::NAN, |e| e.mean)
        };
        terms.push(coefficient(&leb, k, &g, plan, stream_tag(NS_NORM, k as u64, 0))?);
    }
    Ok(McEstimate::sum(&terms))
}

/// The box of `act` cut down to the interaction range around `x0`.
fn interaction_box(pot: &PairPotential, act: &Activity, x0: &Point) -> Result<Region> {
    let dom = act.domain();
    let Some(r) = pot.range() else {
        return Ok(*dom);
    };
    let lo: Vec<f64> = (0..dom.dim()).map(|i| (x0.coords()[i] - r).max(dom.lower()[i])).collect();
    let hi: Vec<f64> = (0..dom.dim()).map(|i| (x0.coords()[i] + r).min(dom.upper()[i])).collect();
    Region::new(&lo, &hi)
}

/// Right side of the Kirkwood–Salsburg equation at (x₀, x₁..x_n):
/// z(x₀)Π(1 + f(x₀, x_i)) [ρ_n(x) + Σ_{k≤kmax} (1/k!) ∫ Πf(x₀, y_j) ρ_{n+k}(x, y) dy].
#[allow(clippy::too_many_arguments)]
pub fn ks_apply(
    pot: &PairPotential,
    act: &Activity,
    oracle: &dyn CorrelationOracle,
    x0: &Point,
    pts: &[Point],
    kmax: usize,
    plan: &SamplingPlan,
    tol: f64,
) -> Result<McEstimate> {
    let mut pre = act.z(x0);
    for x in pts {
        pre *= 1.0 + pot.mayer_f(x0, x);
    }
    if pre == 0.0 {
        return Ok(McEstimate::exact(0.0));
    }
    let packed = pot.hard_sphere_diameter().is_some() && kmax >= crate::converge::packing_bound(act.dim());
    if !packed {
        let b = offspring_mass(pot, act.dim()).unwrap_or(act.domain().volume());
        let env = pre * activity_product(act, pts);
        let tail = env * poisson_tail(act.z_bound() * b, kmax);
        if tail > tol {
            return Err(Error::TailTooLarge {
                required: required_order(act.z_bound() * b, tol / env, kmax),
                detail: format!("Kirkwood–Salsburg tail bound {tail:.3e} exceeds tolerance {tol:.3e}"),
            });
        }
    }
    let mut terms = vec![oracle.rho(pts)?];
    if kmax == 0 || pot.is_ideal() {
        return Ok(McEstimate::sum(&terms).scaled(pre));
    }
    let near = lebesgue(&interaction_box(pot, act, x0)?)?;
    let mut key_pts = vec![*x0];
    key_pts.extend_from_slice(pts);
    for k in 1..=kmax {
        let g = |ys: &[Point]| {
            let mut w = 1.0;
            for y in ys {
                w *= pot.mayer_f(x0, y);
                if w == 0.0 {
                    return 0.0;
                }
            }
            oracle.rho(&joined(pts, ys)).map_or(f64::NAN, |e| w * e.mean)
        };
        let tag = stream_tag(NS_KS, point_key(&key_pts, k as u64), 0);
        terms.push(coefficient(&near, k, &g, plan, tag)?);
    }
    Ok(McEstimate::sum(&terms).scaled(pre))
}

/// (S_N(z))_k(pts) through the root-removal recursion for ψ; N counts all
/// vertices, so the partial sum integrates up to N − k extra points and is 0
/// when k > N. Uses the sample tuples of [`correlation_expansion`].
pub fn picard_iterate(
    pot: &PairPotential,
    act: &Activity,
    pts: &[Point],
    n_total: usize,
    plan: &SamplingPlan,
) -> Result<ExpansionReport> {
    let k = pts.len();
    if k == 0 {
        return Err(Error::contract("need at least one point"));
    }
    check_order("Picard vertices", n_total, plan)?;
    if k > n_total {
        return Ok(ExpansionReport::assemble(Quantity::Rho, k, Vec::new(), n_total, Some(0.0), plan));
    }
    correlation_series(pot, act, pts, n_total - k, plan, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinat::partitions;
    use crate::oracle::tonks_log_xi;

    fn rods(z: f64, length: f64) -> (PairPotential, Activity) {
        (
            PairPotential::hard_sphere(1.0).unwrap(),
            Activity::constant(z, Region::cube(1, length).unwrap()).unwrap(),
        )
    }

    #[test]
    fn first_order_and_ideal_gas() {
        let act = Activity::constant(0.3, Region::cube(2, 2.0).unwrap()).unwrap();
        let plan = SamplingPlan::new(100, 1);
        let r = log_partition_expansion(&PairPotential::ideal(), &act, 4, &plan).unwrap();
        assert_eq!(r.partial_sum, 0.3 * 4.0);
        assert_eq!(r.std_error, 0.0);
        let r = log_partition_expansion(&PairPotential::hard_sphere(0.1).unwrap(), &act, 1, &plan).unwrap();
        assert_eq!(r.orders.len(), 1);
        assert_eq!(r.partial_sum, 1.2);
        assert!(matches!(
            log_partition_expansion(&PairPotential::ideal(), &act, 8, &plan),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn hard_rod_log_xi_matches_tonks() {
        let (pot, act) = rods(0.05, 10.0);
        let plan = SamplingPlan::new(100_000, 7).with_workers(4);
        let r = log_partition_expansion(&pot, &act, 5, &plan).unwrap();
        let exact = tonks_log_xi(0.05, 1.0, 10.0);
        let tail = r.tail_bound.unwrap();
        assert!((r.partial_sum - exact).abs() <= 4.0 * r.std_error + tail, "{} vs {exact}", r.partial_sum);
    }

    #[test]
    fn xi_bruteforce_ideal_and_tail_error() {
        let act = Activity::constant(0.5, Region::cube(1, 2.0).unwrap()).unwrap();
        let plan = SamplingPlan::new(100, 1);
        let xi = xi_bruteforce(&PairPotential::ideal(), &act, 30, &plan, 1e-12).unwrap();
        assert!((xi.mean - 1f64.exp()).abs() < 1e-12);
        match xi_bruteforce(&PairPotential::ideal(), &act, 3, &plan, 1e-12) {
            Err(Error::TailTooLarge { required, .. }) => assert!(required > 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn correlations_overlap_and_trivial_orders() {
        let (pot, act) = rods(0.1, 10.0);
        let plan = SamplingPlan::new(1000, 1);
        let r = correlation_expansion(&pot, &act, &[Point::on_line(5.0)], 0, &plan).unwrap();
        assert_eq!(r.partial_sum, 0.1);
        let r = correlation_expansion(&pot, &act, &[Point::on_line(5.0), Point::on_line(5.5)], 3, &plan).unwrap();
        assert_eq!(r.partial_sum, 0.0);
        let o = FiniteVolumeOracle::new(&pot, &act, 12, &plan, 1e-6).unwrap();
        assert_eq!(o.rho(&[Point::on_line(5.0), Point::on_line(5.9)]).unwrap().mean, 0.0);
        let ideal = FiniteVolumeOracle::new(&PairPotential::ideal(), &act, 12, &plan, 1e-6).unwrap();
        let rho = ideal.rho(&[Point::on_line(1.0), Point::on_line(1.2)]).unwrap();
        assert!((rho.mean - 0.01).abs() < 1e-12);
    }

    #[test]
    fn picard_matches_direct_sum() {
        let (pot, act) = rods(0.15, 6.0);
        let plan = SamplingPlan::new(4000, 3);
        let pts = [Point::on_line(2.0), Point::on_line(3.4)];
        for n_total in 2..=5 {
            let p = picard_iterate(&pot, &act, &pts, n_total, &plan).unwrap();
            let c = correlation_expansion(&pot, &act, &pts, n_total - 2, &plan).unwrap();
            assert!((p.partial_sum - c.partial_sum).abs() <= 1e-10 * c.partial_sum.abs());
        }
        let one = picard_iterate(&pot, &act, &pts[..1], 1, &plan).unwrap();
        assert_eq!(one.partial_sum, 0.15);
        assert_eq!(picard_iterate(&pot, &act, &pts, 1, &plan).unwrap().partial_sum, 0.0);
    }

    #[test]
    fn truncated_round_trip() {
        let vals = [0.0, 0.3, 0.7, 0.15, 0.45, 0.1, 0.22, 0.04];
        let t = CorrelationTable::from_fn(3, |idx| {
            let mask: usize = idx.iter().map(|i| 1 << i).sum();
            vals[mask]
        })
        .unwrap();
        let tt = truncated_table(&t).unwrap();
        assert!((tt[0b11] - (0.15 - 0.3 * 0.7)).abs() < 1e-15);
        for s in 1u32..8 {
            let idx: Vec<usize> = (0..3).filter(|i| s >> i & 1 == 1).collect();
            let mut back = 0.0;
            for p in partitions(idx.len()).unwrap() {
                back += p
                    .blocks()
                    .iter()
                    .map(|b| tt[b.iter().map(|&i| 1usize << idx[i]).sum::<usize>()])
                    .product::<f64>();
            }
            assert!((back - vals[s as usize]).abs() < 1e-14);
        }
        let mut missing = CorrelationTable::new(2).unwrap();
        missing.set(0b01, 0.2);
        missing.set(0b11, 0.1);
        assert!(matches!(truncated_from_correlations(&missing), Err(Error::Contract(_))));
    }

    #[test]
    fn log_laplace_poisson_and_range() {
        let act = Activity::constant(0.4, Region::cube(1, 3.0).unwrap()).unwrap();
        let plan = SamplingPlan::new(50_000, 2);
        let h = |p: &Point| p.coords()[0] * 0.5;
        let r = log_laplace_expansion(&PairPotential::ideal(), &act, &h, 3, 0.0, &plan).unwrap();
        // ∫_0^3 (e^{−x/2} − 1) 0.4 dx
        let exact = 0.4 * (2.0 * (1.0 - (-1.5f64).exp()) - 3.0);
        assert!(r.orders[0].estimate.z_score(exact).abs() < 4.0);
        assert_eq!(r.orders[1].estimate.mean, 0.0);
        let zero = log_laplace_expansion(&PairPotential::hard_sphere(0.5).unwrap(), &act, &|_| 0.0, 3, 0.0, &plan).unwrap();
        assert_eq!(zero.partial_sum, 0.0);
        let bad = log_laplace_expansion(&PairPotential::ideal(), &act, &|_| -1.0, 2, 0.5, &plan);
        assert!(matches!(bad, Err(Error::Contract(_))));
    }

    #[test]
    fn poisson_void_probability() {
        let act = Activity::constant(0.7, Region::cube(1, 4.0).unwrap()).unwrap();
        let delta = Region::new(&[1.0], &[2.0]).unwrap();
        let oracle = crate::oracle::PoissonOracle { act: act.clone() };
        let plan = SamplingPlan::new(200, 1);
        let j0 = janossy_from_correlations(&PairPotential::ideal(), &act, &oracle, &delta, &[], 30, &plan, 1e-13).unwrap();
        assert!((j0.mean - (-0.7f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn ks_ideal_gas_is_z_rho() {
        let act = Activity::constant(0.7, Region::cube(1, 4.0).unwrap()).unwrap();
        let oracle = crate::oracle::PoissonOracle { act: act.clone() };
        let pot = PairPotential::ideal();
        let plan = SamplingPlan::new(200, 1);
        let pts = [Point::on_line(1.0)];
        let v = ks_apply(&pot, &act, &oracle, &Point::on_line(2.0), &pts, 0, &plan, 1e-9).unwrap();
        assert!((v.mean - 0.49).abs() < 1e-14);
    }
}
