//! Numerical checks of the convergence conditions (KPU_t), (FP_t) and the
//! Procacci–Yuhjtman criterion, with the tree and forest generating functions
//! they bound.
//!
//! Hard spheres use the exclusion distance directly: v = +∞ iff |x − y| ≤ d,
//! so b = ∫|f| = Leb(B(0, d)) and thresholds are quoted as z·b.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::combinat::{self, factorial};
use crate::error::{check_cap, Error, Result};
use crate::model::{Activity, Kernel, PairPotential, Point, PotentialKind, Region};
use crate::quad::{mc_integrate_plan, stream_tag, McEstimate, SamplingPlan};

const NS_FP: u64 = 1;
const NS_OFFSPRING: u64 = 2;
const NS_PY: u64 = 3;

/// Relative part of e^a − 1 that an unresolved FP tail may take before it is an error.
pub const FP_TAIL_TOL: f64 = 1e-3;
/// Iterates above this multiple of z count as divergence.
pub const DIVERGENCE_CEILING: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "KPU")]
    Kpu,
    #[serde(rename = "FP")]
    Fp,
    #[serde(rename = "PY")]
    Py,
}

/// One evaluation of a convergence inequality `lhs ≤ rhs` at (z, a, t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCertificate {
    pub condition: Condition,
    pub z: f64,
    pub t: f64,
    pub a: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// rhs − lhs − tail.
    pub margin: f64,
    pub std_error: f64,
    /// Bound on the series terms beyond `kmax_used`.
    pub tail: f64,
    pub kmax_used: Option<usize>,
    /// b = ∫|f(x₀, y)| dy.
    pub offspring_mass: Option<f64>,
    /// Largest z with a witness on the scanned grid.
    pub critical_z: Option<f64>,
    pub seed: u64,
    pub samples: u64,
}

impl ConvergenceCertificate {
    pub fn satisfied(&self) -> bool {
        self.margin >= 0.0
    }

    /// critical_z · b, the threshold in the units used for hard spheres.
    pub fn critical_zb(&self) -> Option<f64> {
        Some(self.critical_z? * self.offspring_mass?)
    }
}

pub fn ball_volume(dim: usize, r: f64) -> f64 {
    match dim {
        1 => 2.0 * r,
        2 => PI * r * r,
        3 => 4.0 / 3.0 * PI * r * r * r,
        _ => panic!("dimension {dim} outside 1..=3"),
    }
}

fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("dimension {dim} outside 1..=3"),
    }
}

/// Closed-form or quadrature value of b = ∫_{R^d} |f(0, y)| dy.
pub fn offspring_mass(pot: &PairPotential, dim: usize) -> Option<f64> {
    match pot.kind() {
        PotentialKind::Ideal => Some(0.0),
        PotentialKind::HardSphere { diameter } => Some(ball_volume(dim, *diameter)),
        PotentialKind::TabulatedRadial(t) => {
            let beta = pot.beta();
            let g = |r: f64| {
                let v = t.eval(r);
                let f = if v == f64::INFINITY { 1.0 } else { -(-beta * v).exp_m1() };
                f * r.powi(dim as i32 - 1)
            };
            let mut nodes = vec![0.0];
            nodes.extend(t.distances().iter().copied().filter(|d| *d > 0.0));
            let mut total = 0.0;
            for w in nodes.windows(2) {
                total += simpson(&g, w[0], w[1], 64);
            }
            Some(sphere_area(dim) * total)
        }
        PotentialKind::HardSphereMixture | PotentialKind::Callback { .. } => None,
    }
}

fn simpson(g: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = g(lo) + g(hi);
    for i in 1..n {
        let x = lo + i as f64 * h;
        s += if i % 2 == 1 { 4.0 * g(x) } else { 2.0 * g(x) };
    }
    s * h / 3.0
}

fn origin(dim: usize) -> Point {
    Point::new(&vec![0.0; dim]).expect("valid dimension")
}

/// b as an estimate: exact when [`offspring_mass`] applies, otherwise Monte
/// Carlo over the interaction ball.
pub fn offspring_mass_estimate(pot: &PairPotential, dim: usize, plan: &SamplingPlan) -> Result<McEstimate> {
    if let Some(b) = offspring_mass(pot, dim) {
        return Ok(McEstimate::exact(b));
    }
    let r = pot
        .range()
        .ok_or_else(|| Error::Unsupported("offspring mass of a potential without a known range".into()))?;
    let x0 = origin(dim);
    let cube = Activity::constant(1.0, Region::centered_cube(dim, 2.0 * r)?)?;
    mc_integrate_plan(&cube, 1, &|y| pot.mayer_f(&x0, &y[0]).abs(), plan, stream_tag(NS_OFFSPRING, 0, 1))
}

/// Most points that fit in the closed exclusion ball of one point while
/// pairwise excluding each other (1, 2 and 3 dimensions).
pub fn packing_bound(dim: usize) -> usize {
    match dim {
        1 => 2,
        2 => 5,
        3 => 12,
        _ => panic!("dimension {dim} outside 1..=3"),
    }
}

/// Q_k = ∫ Π|f(x₀, y_j)| Π(1 + f(y_i, y_j)) dy for k = 1..kmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpMoments {
    /// `q[k-1]` is Q_k.
    pub q: Vec<McEstimate>,
    pub b: f64,
    /// Q_k = 0 for every k > kmax (hard cores).
    pub exact_beyond: bool,
    pub seed: u64,
    pub samples: u64,
}

impl FpMoments {
    pub fn kmax(&self) -> usize {
        self.q.len()
    }

    /// Q_k, or `None` when k lies past the computed range of a soft potential.
    pub fn get(&self, k: usize) -> Option<f64> {
        if k == 0 {
            return Some(1.0);
        }
        match self.q.get(k - 1) {
            Some(e) => Some(e.mean),
            None if self.exact_beyond => Some(0.0),
            None => None,
        }
    }

    /// Σ_{k≤kmax} e^{tk} z^k e^{ka} Q_k / k!, its standard error and the
    /// envelope Σ_{k>kmax} (e^{t+a} z b)^k / k! of the dropped terms.
    pub fn lhs(&self, z: f64, a: f64, t: f64) -> (f64, f64, f64) {
        let x = z * (t + a).exp();
        let mut value = 0.0;
        let mut var = 0.0;
        let mut xk = 1.0;
        for (i, q) in self.q.iter().enumerate() {
            xk *= x;
            let c = xk / factorial(i + 1);
            value += c * q.mean;
            var += (c * q.std_error).powi(2);
        }
        let tail = if self.exact_beyond {
            0.0
        } else {
            poisson_tail(x * self.b, self.kmax())
        };
        (value, var.sqrt(), tail)
    }

    /// G(w) = 1 + Σ_k Q_k w^k / k! (coefficients up to `degree`).
    fn series(&self, degree: usize) -> Result<Vec<f64>> {
        (0..=degree)
            .map(|k| {
                self.get(k)
                    .map(|q| q / factorial(k))
                    .ok_or_else(|| Error::contract(format!("Q_{k} was not computed")))
            })
            .collect()
    }
}

/// Σ_{k>n} μ^k / k!.
pub fn poisson_tail(mu: f64, n: usize) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    if mu > 30.0 {
        let head: f64 = (0..=n).map(|k| mu.powi(k as i32) / factorial(k)).sum();
        return (mu.exp() - head).max(0.0);
    }
    let mut term = mu.powi(n as i32) / factorial(n);
    let mut sum = 0.0;
    let mut k = n;
    loop {
        k += 1;
        term *= mu / k as f64;
        sum += term;
        if term <= 1e-17 * sum || !sum.is_finite() {
            return sum;
        }
    }
}

/// Monte Carlo Q_k around `x0`; hard spheres stop at the packing bound.
pub fn fp_moments(pot: &PairPotential, x0: &Point, kmax: Option<usize>, plan: &SamplingPlan) -> Result<FpMoments> {
    let dim = x0.dim();
    let b = offspring_mass_estimate(pot, dim, plan)?;
    let hard = pot.hard_sphere_diameter().is_some();
    let (kmax, exact_beyond) = if pot.is_ideal() {
        (0, true)
    } else if hard {
        (kmax.unwrap_or(usize::MAX).min(packing_bound(dim)), kmax.is_none_or(|k| k >= packing_bound(dim)))
    } else {
        let k = kmax.ok_or_else(|| Error::contract("soft potentials need an explicit kmax"))?;
        (k, false)
    };
    let r = pot.range().ok_or_else(|| Error::Unsupported("FP moments need a finite interaction range".into()))?;
    let mut q = Vec::with_capacity(kmax);
    if kmax >= 1 {
        q.push(b);
    }
    let lo: Vec<f64> = x0.coords().iter().map(|c| c - r).collect();
    let hi: Vec<f64> = x0.coords().iter().map(|c| c + r).collect();
    let cube = Activity::constant(1.0, Region::new(&lo, &hi)?)?;
    for k in 2..=kmax {
        let g = |ys: &[Point]| {
            let mut w = 1.0;
            for (j, y) in ys.iter().enumerate() {
                w *= pot.mayer_f(x0, y).abs();
                if w == 0.0 {
                    return 0.0;
                }
                for yi in &ys[..j] {
                    w *= 1.0 + pot.mayer_f(yi, y);
                }
                if w == 0.0 {
                    return 0.0;
                }
            }
            w
        };
        q.push(mc_integrate_plan(&cube, k, &g, plan, stream_tag(NS_FP, 0, k))?);
    }
    Ok(FpMoments {
        q,
        b: b.mean,
        exact_beyond,
        seed: plan.seed,
        samples: plan.samples,
    })
}

fn constant_z(act: &Activity) -> Result<f64> {
    act.constant_value()
        .ok_or_else(|| Error::Unsupported("convergence checks need a constant activity in this version".into()))
}

fn check_witness(a: f64, t: f64) -> Result<()> {
    if !(a >= 0.0 && t >= 0.0 && a.is_finite() && t.is_finite()) {
        return Err(Error::contract("need finite a >= 0 and t >= 0"));
    }
    Ok(())
}

fn kpu_certificate(z: f64, b: &McEstimate, t: f64, a: f64, plan: &SamplingPlan) -> ConvergenceCertificate {
    let c = t.exp() * z * a.exp();
    let lhs = c * b.mean;
    ConvergenceCertificate {
        condition: Condition::Kpu,
        z,
        t,
        a,
        lhs,
        rhs: a,
        margin: a - lhs,
        std_error: c * b.std_error,
        tail: 0.0,
        kmax_used: None,
        offspring_mass: Some(b.mean),
        critical_z: None,
        seed: plan.seed,
        samples: b.samples,
    }
}

/// e^t ∫|f(x₀, y)| e^a dλ_z(y) ≤ a.
pub fn check_kpu(pot: &PairPotential, act: &Activity, t: f64, a: f64, plan: &SamplingPlan) -> Result<ConvergenceCertificate> {
    check_witness(a, t)?;
    let z = constant_z(act)?;
    let b = offspring_mass_estimate(pot, act.dim(), plan)?;
    Ok(kpu_certificate(z, &b, t, a, plan))
}

fn fp_certificate(m: &FpMoments, z: f64, t: f64, a: f64) -> ConvergenceCertificate {
    let (lhs, se, tail) = m.lhs(z, a, t);
    let rhs = a.exp_m1();
    ConvergenceCertificate {
        condition: Condition::Fp,
        z,
        t,
        a,
        lhs,
        rhs,
        margin: rhs - lhs - tail,
        std_error: se,
        tail,
        kmax_used: Some(m.kmax()),
        offspring_mass: Some(m.b),
        critical_z: None,
        seed: m.seed,
        samples: m.samples,
    }
}

/// Σ_k (e^{tk}/k!) ∫ Π|f(x₀, y_j)| Π(1 + f(y_i, y_j)) e^{Σa} dλ_z^k ≤ e^a − 1.
pub fn check_fp(
    pot: &PairPotential,
    act: &Activity,
    t: f64,
    a: f64,
    kmax: Option<usize>,
    plan: &SamplingPlan,
) -> Result<ConvergenceCertificate> {
    check_witness(a, t)?;
    let z = constant_z(act)?;
    let m = fp_moments(pot, &origin(act.dim()), kmax, plan)?;
    let cert = fp_certificate(&m, z, t, a);
    if cert.tail > FP_TAIL_TOL * cert.rhs.max(f64::MIN_POSITIVE) {
        let x = z * (t + a).exp() * m.b;
        let required = (m.kmax()..200)
            .find(|&k| poisson_tail(x, k) <= FP_TAIL_TOL * cert.rhs)
            .unwrap_or(200);
        return Err(Error::TailTooLarge {
            required,
            detail: format!("FP series tail {:.3e} at kmax = {}", cert.tail, m.kmax()),
        });
    }
    Ok(cert)
}

/// Which inequality a witness search evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Checker {
    Kpu,
    Fp { kmax: Option<usize> },
}

/// 200 log-spaced witness values on [0.01, 10].
pub fn default_grid() -> Vec<f64> {
    let n = 200;
    let (lo, hi) = (0.01f64.ln(), 10f64.ln());
    (0..n).map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..100 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
        if hi - lo < 1e-12 * (1.0 + hi.abs()) {
            break;
        }
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Grid maximum of `margin(a)` refined by golden section between the neighbours.
fn best_witness(margin: &dyn Fn(f64) -> f64, grid: &[f64]) -> (f64, f64) {
    let vals: Vec<f64> = grid.iter().map(|&a| margin(a)).collect();
    let (i, _) = vals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    let lo = if i > 0 { grid[i - 1] } else { grid[i] };
    let hi = if i + 1 < grid.len() { grid[i + 1] } else { grid[i] };
    if hi > lo {
        let (a, v) = golden_max(margin, lo, hi);
        if v > vals[i] {
            return (a, v);
        }
    }
    (grid[i], vals[i])
}

/// Largest z for which `ok(z)` holds, by bracketing and bisection.
fn critical_z(ok: &dyn Fn(f64) -> bool, start: f64) -> Option<f64> {
    let mut hi = start;
    let mut lo = 0.0;
    let mut n = 0;
    while ok(hi) {
        lo = hi;
        hi *= 2.0;
        n += 1;
        if n > 200 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Best constant witness a on `grid` at the activity's z, plus the critical z.
pub fn optimize_witness(
    pot: &PairPotential,
    act: &Activity,
    t: f64,
    checker: Checker,
    grid: &[f64],
    plan: &SamplingPlan,
) -> Result<ConvergenceCertificate> {
    if grid.is_empty() {
        return Err(Error::contract("witness grid must be non-empty"));
    }
    check_witness(0.0, t)?;
    let z = constant_z(act)?;
    let dim = act.dim();
    match checker {
        Checker::Kpu => {
            let b = offspring_mass_estimate(pot, dim, plan)?;
            let at = |z: f64, a: f64| kpu_certificate(z, &b, t, a, plan).margin;
            let (a, _) = best_witness(&|a| at(z, a), grid);
            let mut cert = kpu_certificate(z, &b, t, a, plan);
            if b.mean > 0.0 {
                cert.critical_z = critical_z(&|z| best_witness(&|a| at(z, a), grid).1 >= 0.0, 0.01 / b.mean);
            }
            Ok(cert)
        }
        Checker::Fp { kmax } => {
            let m = fp_moments(pot, &origin(dim), kmax, plan)?;
            let at = |z: f64, a: f64| fp_certificate(&m, z, t, a).margin;
            let (a, _) = best_witness(&|a| at(z, a), grid);
            let mut cert = fp_certificate(&m, z, t, a);
            if m.b > 0.0 {
                cert.critical_z = critical_z(&|z| best_witness(&|a| at(z, a), grid).1 >= 0.0, 0.01 / m.b);
            }
            Ok(cert)
        }
    }
}

/// ∫ (1 − e^{−|v(x, y)|}) e^{B(y) + a} dλ_z(y) ≤ a at the centre x of the box.
pub fn check_py(
    kernel: &Kernel,
    act: &Activity,
    stability: &(dyn Fn(&Point) -> f64 + Sync),
    a: f64,
    plan: &SamplingPlan,
) -> Result<ConvergenceCertificate> {
    check_witness(a, 0.0)?;
    let x = act.domain().center();
    let g = |y: &[Point]| {
        let v = kernel.value(&x, &y[0]).abs();
        let w = if v == f64::INFINITY { 1.0 } else { -(-v).exp_m1() };
        if w == 0.0 {
            0.0
        } else {
            w * (stability(&y[0]) + a).exp()
        }
    };
    let lhs = mc_integrate_plan(act, 1, &g, plan, stream_tag(NS_PY, 0, 1))?;
    Ok(ConvergenceCertificate {
        condition: Condition::Py,
        z: act.constant_value().unwrap_or(f64::NAN),
        t: 0.0,
        a,
        lhs: lhs.mean,
        rhs: a,
        margin: a - lhs.mean,
        std_error: lhs.std_error,
        tail: 0.0,
        kmax_used: None,
        offspring_mass: None,
        critical_z: None,
        seed: plan.seed,
        samples: lhs.samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeVariant {
    Plain,
    Fp,
}

/// Outcome of a smallest-solution fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub value: f64,
    pub converged: bool,
    pub diverged: bool,
    pub iterations: usize,
}

/// Iterates T ← z·F(T) from T = 0, asserting monotonicity at every step.
pub fn smallest_fixed_point(z: f64, map: &dyn Fn(f64) -> f64, iterations: usize) -> FixedPoint {
    let mut t = 0.0;
    for i in 1..=iterations {
        let next = z * map(t);
        assert!(next >= t, "fixed-point iterates must be nondecreasing: {next} < {t}");
        if next > DIVERGENCE_CEILING * z || !next.is_finite() {
            return FixedPoint {
                value: next,
                converged: false,
                diverged: true,
                iterations: i,
            };
        }
        if next - t <= 1e-15 * next {
            return FixedPoint {
                value: next,
                converged: true,
                diverged: false,
                iterations: i,
            };
        }
        t = next;
    }
    FixedPoint {
        value: t,
        converged: false,
        diverged: false,
        iterations,
    }
}

/// Tree generating function T_q^• (plain) or T̃_q^• (FP) by fixed-point iteration.
pub fn tree_gf(
    pot: &PairPotential,
    act: &Activity,
    q: &Point,
    variant: TreeVariant,
    iterations: usize,
    plan: &SamplingPlan,
) -> Result<FixedPoint> {
    let z = constant_z(act)?;
    if q.dim() != act.dim() {
        return Err(Error::contract("root point and activity differ in dimension"));
    }
    if z == 0.0 {
        return Ok(FixedPoint {
            value: 0.0,
            converged: true,
            diverged: false,
            iterations: 0,
        });
    }
    match variant {
        TreeVariant::Plain => {
            let b = offspring_mass_estimate(pot, q.dim(), plan)?.mean;
            Ok(smallest_fixed_point(z, &|t| (b * t).exp(), iterations))
        }
        TreeVariant::Fp => {
            let kmax = if pot.hard_sphere_diameter().is_some() { None } else { Some(8) };
            let m = fp_moments(pot, q, kmax, plan)?;
            Ok(tree_gf_fp(&m, z, iterations))
        }
    }
}

/// FP fixed point T = z(1 + Σ_k Q_k T^k / k!) from precomputed moments.
pub fn tree_gf_fp(m: &FpMoments, z: f64, iterations: usize) -> FixedPoint {
    let coef: Vec<f64> = (1..=m.kmax()).map(|k| m.q[k - 1].mean / factorial(k)).collect();
    smallest_fixed_point(
        z,
        &|t| {
            let mut s = 0.0;
            for c in coef.iter().rev() {
                s = (s + c) * t;
            }
            1.0 + s
        },
        iterations,
    )
}

/// Forest partial sums F_k^{(N)} with two independent cross-checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestReport {
    pub roots: usize,
    pub n_max: usize,
    /// Linear forest recursion.
    pub value: f64,
    /// Product of truncated one-tree series.
    pub product_form: f64,
    /// Direct tree enumeration (one root, small N only).
    pub enumeration: Option<f64>,
}

fn poly_mul(a: &[f64], b: &[f64], degree: usize) -> Vec<f64> {
    let mut c = vec![0.0; degree + 1];
    for (i, x) in a.iter().enumerate().take(degree + 1) {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(degree + 1 - i) {
            c[i + j] += x * y;
        }
    }
    c
}

/// F^{(N)} via F_{n+1}^{(N+1)} = z(F_n^{(N)} + Σ_ℓ (Q_ℓ/ℓ!) F_{n+ℓ}^{(N)}) for a
/// homogeneous model; returns the table `f[N][k]`.
pub fn forest_table(m: &FpMoments, z: f64, n_max: usize) -> Result<Vec<Vec<f64>>> {
    let g = m.series(n_max.saturating_sub(1))?;
    let width = n_max + 1;
    let mut f = vec![vec![0.0; width]; n_max + 1];
    f[0][0] = 1.0;
    for n in 1..=n_max {
        f[n][0] = 1.0;
        for k in 1..=n {
            // k roots among at most n vertices; the first root's children join the rest
            let prev = &f[n - 1];
            let mut s = 0.0;
            for (l, gl) in g.iter().enumerate() {
                let idx = k - 1 + l;
                if idx >= width {
                    break;
                }
                s += gl * prev[idx];
            }
            f[n][k] = z * s;
        }
    }
    Ok(f)
}

/// F_k^{(N)} for k roots in a homogeneous model.
pub fn forest_picard(pot: &PairPotential, act: &Activity, roots: &[Point], n_max: usize, plan: &SamplingPlan) -> Result<ForestReport> {
    let z = constant_z(act)?;
    let k = roots.len();
    if k == 0 {
        return Err(Error::contract("need at least one root"));
    }
    let kmax = if pot.hard_sphere_diameter().is_some() {
        None
    } else {
        Some(n_max.saturating_sub(1))
    };
    let m = fp_moments(pot, &roots[0], kmax, plan)?;
    forest_from_moments(&m, z, k, n_max).map(|mut r| {
        r.enumeration = if k == 1 && n_max <= combinat::CAP_CONNECTED {
            forest_enumeration(&m, z, n_max).ok()
        } else {
            None
        };
        r
    })
}

/// Forest sums from shared moments: recursion value and product form.
pub fn forest_from_moments(m: &FpMoments, z: f64, k: usize, n_max: usize) -> Result<ForestReport> {
    let table = forest_table(m, z, n_max)?;
    let value = if k <= n_max { table[n_max][k] } else { 0.0 };
    let t = tree_series(m, z, n_max)?;
    let mut poly = vec![0.0; n_max + 1];
    for (n, tn) in t.iter().enumerate() {
        poly[n + 1] = *tn;
    }
    let mut power = vec![0.0; n_max + 1];
    power[0] = 1.0;
    for _ in 0..k {
        power = poly_mul(&power, &poly, n_max);
    }
    Ok(ForestReport {
        roots: k,
        n_max,
        value,
        product_form: power.iter().sum(),
        enumeration: None,
    })
}

/// t_n z^n for n = 1..N by Lagrange inversion, t_n = (1/n)[w^{n−1}] G(w)^n.
pub fn tree_series(m: &FpMoments, z: f64, n_max: usize) -> Result<Vec<f64>> {
    let deg = n_max.saturating_sub(1);
    let g = m.series(deg)?;
    let mut out = Vec::with_capacity(n_max);
    let mut power = vec![1.0];
    for n in 1..=n_max {
        power = poly_mul(&power, &g, deg);
        out.push(power[n - 1] / n as f64 * z.powi(n as i32));
    }
    Ok(out)
}

/// F_1^{(N)} = Σ_{n≤N} z^n/(n−1)! Σ_T Π_v Q_{outdeg(v)} over labelled trees rooted at 0.
pub fn forest_enumeration(m: &FpMoments, z: f64, n_max: usize) -> Result<f64> {
    check_cap("forest enumeration vertices", n_max, combinat::CAP_CONNECTED, false)?;
    let mut total = 0.0;
    for n in 1..=n_max {
        let mut s = 0.0;
        for t in combinat::trees(n, false)? {
            let children = combinat::tree_children(&t.graph, 0)?;
            let mut w = 1.0;
            for c in children.iter().take(n) {
                w *= m
                    .get(c.count_ones() as usize)
                    .ok_or_else(|| Error::contract("moment outside the computed range"))?;
            }
            s += w;
        }
        total += s * z.powi(n as i32) / factorial(n - 1);
    }
    Ok(total)
}

/// (ℓ!/t^ℓ) ∫_Λ e^a dλ_z.
pub fn cumulant_bound(cert: &ConvergenceCertificate, region_mass: f64, ell: usize) -> Result<f64> {
    if cert.t <= 0.0 {
        return Err(Error::Unsupported("cumulant bound needs t > 0".into()));
    }
    Ok(factorial(ell) / cert.t.powi(ell as i32) * region_mass)
}

/// Tail bound Σ_{n>N} |(1/n!)∫ φ_n^T dλ_z^n| from the best (KPU_t) witness:
/// λ_z(Λ)(e^a − 1) e^{−tN}/(N + 1) with t = log(a/(z b e^a)).
pub fn log_xi_tail_bound(pot: &PairPotential, act: &Activity, n: usize) -> Option<f64> {
    let (mu, mass) = homogeneous_mu(pot, act)?;
    if mu == 0.0 {
        return Some(0.0);
    }
    min_over_a(mu, |a, t| mass * a.exp_m1() * (-t * n as f64).exp() / (n + 1) as f64)
}

/// Tail bound for ρ_k partial sums truncated after N integrated points:
/// Πz Π(1+f) e^{ka} e^{−t(N+1)}; `prefactor` is Πz(x_j)·e^{−H(x)}.
pub fn correlation_tail_bound(pot: &PairPotential, act: &Activity, k: usize, n: usize, prefactor: f64) -> Option<f64> {
    let (mu, _) = homogeneous_mu(pot, act)?;
    if mu == 0.0 || prefactor == 0.0 {
        return Some(0.0);
    }
    min_over_a(mu, |a, t| prefactor * (k as f64 * a).exp() * (-t * (n + 1) as f64).exp())
}

fn homogeneous_mu(pot: &PairPotential, act: &Activity) -> Option<(f64, f64)> {
    if act.marks().is_some() {
        return None;
    }
    let z = act.constant_value()?;
    let b = offspring_mass(pot, act.dim())?;
    Some((z * b, z * act.domain().volume()))
}

fn min_over_a(mu: f64, bound: impl Fn(f64, f64) -> f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    let n = 4000;
    for i in 0..n {
        let a = (1e-4f64.ln() + (20f64.ln() - 1e-4f64.ln()) * i as f64 / (n - 1) as f64).exp();
        let t = (a / (mu * a.exp())).ln();
        if t.is_finite() && t > 0.0 {
            let v = bound(a, t);
            if best.is_none_or(|b| v < b) {
                best = Some(v);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Region;

    fn rods(z: f64, s: f64) -> (PairPotential, Activity) {
        (PairPotential::hard_sphere(s).unwrap(), Activity::constant(z, Region::cube(1, 20.0).unwrap()).unwrap())
    }

    #[test]
    fn kpu_closed_form_and_zero_activity() {
        let (pot, _) = rods(0.0, 1.0);
        let act = Activity::constant(0.0, Region::cube(1, 10.0).unwrap()).unwrap();
        let c = check_kpu(&pot, &act, 0.0, 0.7, &SamplingPlan::default()).unwrap();
        assert_eq!(c.margin, 0.7);
        let (pot, act) = rods(0.1, 1.0);
        let c = check_kpu(&pot, &act, 0.2, 0.5, &SamplingPlan::default()).unwrap();
        assert!((c.lhs - 0.2f64.exp() * 0.1 * 2.0 * 0.5f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn non_constant_activity_is_unsupported() {
        let dom = Region::cube(1, 2.0).unwrap();
        let act = Activity::piecewise(vec![(Region::cube(1, 1.0).unwrap(), 1.0)], dom).unwrap();
        let pot = PairPotential::hard_sphere(1.0).unwrap();
        assert!(matches!(check_kpu(&pot, &act, 0.0, 1.0, &SamplingPlan::default()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn kpu_threshold_is_inverse_e() {
        let pot = PairPotential::hard_sphere(0.5).unwrap();
        let act = Activity::constant(0.1, Region::cube(2, 10.0).unwrap()).unwrap();
        let c = optimize_witness(&pot, &act, 0.0, Checker::Kpu, &default_grid(), &SamplingPlan::default()).unwrap();
        assert!((c.critical_zb().unwrap() - (-1f64).exp()).abs() < 1e-6);
        assert!((c.a - 1.0).abs() < 0.05 || c.satisfied());
    }

    #[test]
    fn one_dimensional_fp_moments_are_exact_geometry() {
        let pot = PairPotential::hard_sphere(1.0).unwrap();
        let m = fp_moments(&pot, &Point::on_line(0.0), None, &SamplingPlan::new(200_000, 3)).unwrap();
        assert_eq!(m.kmax(), 2);
        assert_eq!(m.q[0].mean, 2.0);
        assert!(m.q[1].z_score(1.0).abs() < 4.0);
        assert_eq!(m.get(3), Some(0.0));
    }

    #[test]
    fn hard_rod_fp_critical_value_beats_kpu() {
        // exact: sup s/(1 + 2s + s²/2) = 1/(2 + √2) in units of zσ
        let pot = PairPotential::hard_sphere(1.0).unwrap();
        let act = Activity::constant(0.1, Region::cube(1, 10.0).unwrap()).unwrap();
        let plan = SamplingPlan::new(400_000, 5);
        let c = optimize_witness(&pot, &act, 0.0, Checker::Fp { kmax: None }, &default_grid(), &plan).unwrap();
        let crit = c.critical_z.unwrap();
        assert!((crit - 1.0 / (2.0 + 2f64.sqrt())).abs() < 5e-3, "{crit}");
        assert!(crit * 2.0 > (-1f64).exp());
        let c1 = optimize_witness(&pot, &act, 0.3, Checker::Fp { kmax: None }, &default_grid(), &plan).unwrap();
        assert!(c1.critical_z.unwrap() < crit);
    }

    #[test]
    fn plain_tree_gf_at_boundary_and_series() {
        let (pot, _) = rods(0.0, 0.5);
        let b = 1.0;
        let z = (-1f64).exp() / b;
        let act = Activity::constant(z, Region::cube(1, 10.0).unwrap()).unwrap();
        let r = tree_gf(&pot, &act, &Point::on_line(0.0), TreeVariant::Plain, 2_000_000, &SamplingPlan::default()).unwrap();
        assert!(!r.diverged);
        assert!((r.value - z * 1f64.exp()).abs() < 1e-3 * r.value);
        let z = 0.2;
        let act = Activity::constant(z, Region::cube(1, 10.0).unwrap()).unwrap();
        let r = tree_gf(&pot, &act, &Point::on_line(0.0), TreeVariant::Plain, 100_000, &SamplingPlan::default()).unwrap();
        // T/z = Σ (bn)^{n−1} z^{n−1}/n!
        let mut prev = 0.0;
        for n_max in 1..=30usize {
            let s: f64 = (1..=n_max)
                .map(|n| (b * n as f64 * z).powi(n as i32 - 1) / factorial(n))
                .sum();
            assert!(s >= prev && s * z <= r.value * (1.0 + 1e-12));
            prev = s;
        }
        assert!((prev * z - r.value).abs() < 1e-6);
        let act = Activity::constant(0.5, Region::cube(1, 10.0).unwrap()).unwrap();
        let r = tree_gf(&pot, &act, &Point::on_line(0.0), TreeVariant::Plain, 100_000, &SamplingPlan::default()).unwrap();
        assert!(r.diverged);
    }

    #[test]
    fn forest_small_cases() {
        let pot = PairPotential::hard_sphere(1.0).unwrap();
        let act = Activity::constant(0.1, Region::cube(1, 10.0).unwrap()).unwrap();
        let plan = SamplingPlan::new(10_000, 1);
        let one = forest_picard(&pot, &act, &[Point::on_line(0.0)], 1, &plan).unwrap();
        assert!((one.value - 0.1).abs() < 1e-15);
        let two = forest_picard(&pot, &act, &[Point::on_line(0.0), Point::on_line(1.0)], 1, &plan).unwrap();
        assert_eq!(two.value, 0.0);
        let m = FpMoments {
            q: vec![McEstimate::exact(2.0), McEstimate::exact(1.0)],
            b: 2.0,
            exact_beyond: true,
            seed: 0,
            samples: 0,
        };
        let t = tree_series(&m, 1.0, 3).unwrap();
        assert!((t[2] - 4.5).abs() < 1e-12);
        for n in 1..=6 {
            let r = forest_from_moments(&m, 0.13, 1, n).unwrap();
            let e = forest_enumeration(&m, 0.13, n).unwrap();
            assert!((r.value - e).abs() < 1e-12 * e && (r.product_form - e).abs() < 1e-12 * e);
            let r2 = forest_from_moments(&m, 0.13, 2, n).unwrap();
            assert!((r2.value - r2.product_form).abs() < 1e-12 * r2.value.max(1e-300));
        }
    }

    #[test]
    fn cumulant_bound_plugs_in() {
        let (pot, act) = rods(0.1, 1.0);
        let mut c = check_kpu(&pot, &act, 1.0, 1.0, &SamplingPlan::default()).unwrap();
        assert_eq!(cumulant_bound(&c, 1.0, 1).unwrap(), 1.0);
        let b3 = cumulant_bound(&c, 2.5, 3).unwrap();
        c.t = 2.0;
        assert!((cumulant_bound(&c, 2.5, 3).unwrap() - b3 / 8.0).abs() < 1e-12);
        c.t = 0.0;
        assert!(matches!(cumulant_bound(&c, 1.0, 2), Err(Error::Unsupported(_))));
    }

    #[test]
    fn tabulated_offspring_mass_matches_hard_core_limit() {
        let t = crate::model::RadialTable::new(vec![0.0, 1.0, 1.0 + 1e-9], vec![1e9, 1e9, 0.0]).unwrap();
        let b = offspring_mass(&PairPotential::tabulated(t).unwrap(), 3).unwrap();
        assert!((b - ball_volume(3, 1.0)).abs() < 1e-6);
    }
}
