//! Closed-form references: the Tonks gas, Poisson functionals, disc overlap
//! geometry and scalar root finding.

use crate::combinat::{binomial, factorial, partition_log};
use crate::error::Result;
use crate::expansion::CorrelationOracle;
use crate::model::{Activity, Point};
use crate::quad::McEstimate;

/// Ξ = Σ_n z^n (L − (n−1)σ)_+^n / n! for hard rods of exclusion length σ on [0, L].
pub fn tonks_xi(z: f64, sigma: f64, length: f64) -> f64 {
    let mut total = 1.0;
    for n in 1.. {
        let free = length - (n as f64 - 1.0) * sigma;
        if free <= 0.0 {
            break;
        }
        total += (n as f64 * (z * free).ln() - ln_factorial(n)).exp();
    }
    total
}

pub fn tonks_log_xi(z: f64, sigma: f64, length: f64) -> f64 {
    tonks_xi(z, sigma, length).ln()
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// ∫∫_{[0,L]²} 1{|x − y| ≤ d} dx dy for d ≤ L.
pub fn square_disc_overlap(length: f64, d: f64) -> f64 {
    assert!(d <= length, "closed form needs d <= L");
    std::f64::consts::PI * length * length * d * d - 8.0 / 3.0 * length * d.powi(3) + 0.5 * d.powi(4)
}

/// ∫∫_{[0,L]²} 1{|x − y| ≤ d} dx dy on the line, d ≤ L.
pub fn segment_overlap(length: f64, d: f64) -> f64 {
    assert!(d <= length, "closed form needs d <= L");
    2.0 * d * length - d * d
}

/// Smallest root of p = e^{μ(p−1)} on [0, 1] by bisection.
pub fn extinction_root(mu: f64) -> f64 {
    if mu <= 1.0 {
        return 1.0;
    }
    let g = |p: f64| (mu * (p - 1.0)).exp() - p;
    // g > 0 at 0 and < 0 at the minimiser of g
    bisect(&g, 0.0, 1.0 - mu.ln() / mu)
}

/// Root of a sign-changing function with g(lo) > 0 > g(hi).
pub fn bisect(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Stirling numbers of the second kind S(n, j), j = 0..=n.
pub fn stirling2(n: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for i in 1..=n {
        let mut next = vec![0.0; i + 1];
        for j in 1..=i {
            let keep = if j < i { j as f64 * row[j] } else { 0.0 };
            next[j] = keep + row[j - 1];
        }
        row = next;
    }
    row
}

/// E[N^k] for N ~ Poi(μ).
pub fn poisson_raw_moment(k: usize, mu: f64) -> f64 {
    stirling2(k).iter().enumerate().map(|(j, s)| s * mu.powi(j as i32)).sum()
}

/// E[(N(N−1))^m] for m = 1..=order, N ~ Poi(μ).
pub fn poisson_pair_moments(mu: f64, order: usize) -> Vec<f64> {
    (1..=order)
        .map(|m| {
            (0..=m)
                .map(|j| {
                    let sign = if (m - j) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * binomial(m, j) * poisson_raw_moment(m + j, mu)
                })
                .sum()
        })
        .collect()
}

/// κ_1..κ_order of N(N−1) for N ~ Poi(μ).
pub fn poisson_pair_cumulants(mu: f64, order: usize) -> Vec<f64> {
    let mut m = vec![1.0];
    m.extend(poisson_pair_moments(mu, order));
    partition_log(&m)
}

/// Falling factorial moment E[N(N−1)…(N−n+1)] = μ^n.
pub fn poisson_factorial_moment(n: usize, mu: f64) -> f64 {
    mu.powi(n as i32)
}

/// Borel law P(N = n) = (μn)^{n−1} e^{−μn}/n!, evaluated directly.
pub fn borel_direct(mu: f64, n: usize) -> f64 {
    (mu * n as f64).powi(n as i32 - 1) * (-mu * n as f64).exp() / factorial(n)
}

/// ρ_n = Πz(x_i) for the Poisson process of the activity.
pub struct PoissonOracle {
    pub act: Activity,
}

impl CorrelationOracle for PoissonOracle {
    fn rho(&self, pts: &[Point]) -> Result<McEstimate> {
        Ok(McEstimate::exact(pts.iter().map(|p| self.act.z(p)).product()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tonks_small_cases() {
        // L < σ: at most one rod
        assert!((tonks_xi(0.3, 2.0, 1.5) - 1.45).abs() < 1e-12);
        assert!((tonks_xi(0.3, 1.0, 3.0) - (1.0 + 0.9 + 0.18 + 0.0045)).abs() < 1e-12);
        assert!((tonks_xi(0.3, 2.0, 1.0) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn falling_moments_from_raw() {
        let mu = 1.7;
        let r: Vec<f64> = (0..4).map(|k| poisson_raw_moment(k, mu)).collect();
        assert!((r[2] - r[1] - mu * mu).abs() < 1e-12);
        assert!((r[3] - 3.0 * r[2] + 2.0 * r[1] - mu.powi(3)).abs() < 1e-12);
        let k = poisson_pair_cumulants(mu, 2);
        assert!((k[0] - mu * mu).abs() < 1e-12);
        // Var N(N−1) = 4μ³ + 2μ²
        assert!((k[1] - (4.0 * mu.powi(3) + 2.0 * mu * mu)).abs() < 1e-9);
    }

    #[test]
    fn extinction_root_solves() {
        let p = extinction_root(2.0);
        assert!((p - (2.0 * (p - 1.0)).exp()).abs() < 1e-14);
        assert!(p > 0.2 && p < 0.21);
    }
}
