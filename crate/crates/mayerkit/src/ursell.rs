//! Pointwise graph sums: graph weights, Ursell functions φ_n^T, multirooted
//! sums ψ_{k,n} and tree weights w̃.
//!
//! `ursell` and `psi` enumerate graphs. The `*_fast` variants compute the same
//! polynomials by inclusion–exclusion over vertex subsets in O(3^n) and are the
//! integrands used by the Monte Carlo expansions.

use std::sync::OnceLock;

use crate::combinat::{self, edge_index, pair_count, Graph, MAX_VERTICES};
use crate::error::{check_cap, Error, Result};
use crate::model::{PairPotential, Point};

const KAHAN_THRESHOLD: usize = 10_000;

/// Value of a graph sum with its term count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedSum {
    pub value: f64,
    pub terms: u64,
    pub n: usize,
    pub k: usize,
}

/// Mayer f of every pair, stored in edge-index order.
#[derive(Debug, Clone)]
pub struct MayerMatrix {
    n: usize,
    f: Vec<f64>,
}

impl MayerMatrix {
    pub fn new(pot: &PairPotential, pts: &[Point]) -> Self {
        let n = pts.len();
        let mut f = vec![0.0; pair_count(n)];
        for j in 1..n {
            for i in 0..j {
                f[edge_index(i, j)] = pot.mayer_f(&pts[i], &pts[j]);
            }
        }
        MayerMatrix { n, f }
    }

    pub fn from_values(n: usize, f: Vec<f64>) -> Result<Self> {
        if f.len() != pair_count(n) {
            return Err(Error::contract("f table length must be C(n,2)"));
        }
        Ok(MayerMatrix { n, f })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.f[edge_index(i, j)]
    }

    #[inline]
    fn weight(&self, mut bits: u128) -> f64 {
        let mut w = 1.0;
        while bits != 0 {
            let b = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            w *= self.f[b];
            if w == 0.0 {
                return 0.0;
            }
        }
        w
    }

    /// Π_{i<j} (1 + f) over all pairs.
    pub fn boltzmann(&self) -> f64 {
        self.f.iter().map(|f| 1.0 + f).product()
    }
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

fn sum_weights(m: &MayerMatrix, graphs: &[u32]) -> f64 {
    if graphs.len() > KAHAN_THRESHOLD {
        let mut acc = Compensated::default();
        for &g in graphs {
            acc.add(m.weight(g as u128));
        }
        acc.value()
    } else {
        graphs.iter().map(|&g| m.weight(g as u128)).sum()
    }
}

const CACHE_N: usize = combinat::CAP_CONNECTED + 1;

fn multirooted_cache(k: usize, n: usize) -> &'static [u32] {
    static CACHE: [[OnceLock<Vec<u32>>; CACHE_N]; CACHE_N] =
        [const { [const { OnceLock::new() }; CACHE_N] }; CACHE_N];
    CACHE[k][n].get_or_init(|| {
        combinat::multirooted_graphs(k, n)
            .expect("within cap")
            .map(|g| g.edge_bits() as u32)
            .collect()
    })
}

/// w(G; x) = Π_{edges} f(x_i, x_j).
pub fn graph_weight(pot: &PairPotential, g: &Graph, pts: &[Point]) -> Result<f64> {
    if pts.len() != g.n() {
        return Err(Error::contract(format!(
            "graph has {} vertices but {} points were given",
            g.n(),
            pts.len()
        )));
    }
    let mut w = 1.0;
    for (i, j) in g.edges() {
        w *= pot.mayer_f(&pts[i], &pts[j]);
    }
    Ok(w)
}

/// φ_n^T by summing over the connected graphs on n vertices.
pub fn ursell(pot: &PairPotential, pts: &[Point]) -> Result<WeightedSum> {
    psi(pot, 1, pts)
}

/// ψ_{k,n} by summing over multirooted graphs (k = n uses Π(1+f)).
pub fn psi(pot: &PairPotential, k: usize, pts: &[Point]) -> Result<WeightedSum> {
    let n = pts.len();
    if k == 0 || k > n {
        return Err(Error::contract(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    check_cap("graph-sum vertices", n, combinat::CAP_CONNECTED, false)?;
    let m = MayerMatrix::new(pot, pts);
    Ok(psi_matrix(&m, k))
}

/// Enumeration-based ψ_{k,n} on a precomputed f table.
pub fn psi_matrix(m: &MayerMatrix, k: usize) -> WeightedSum {
    let n = m.n();
    if k == n {
        return WeightedSum {
            value: m.boltzmann(),
            terms: 1u64 << pair_count(n),
            n,
            k,
        };
    }
    let graphs = multirooted_cache(k, n);
    WeightedSum {
        value: sum_weights(m, graphs),
        terms: graphs.len() as u64,
        n,
        k,
    }
}

/// e^{−H(S)} for every vertex subset S.
fn boltzmann_table(m: &MayerMatrix) -> Vec<f64> {
    let n = m.n();
    let mut t = vec![1.0; 1 << n];
    for s in 1usize..(1 << n) {
        let top = usize::BITS as usize - 1 - s.leading_zeros() as usize;
        let rest = s & !(1 << top);
        let mut w = t[rest];
        let mut r = rest;
        while r != 0 && w != 0.0 {
            let i = r.trailing_zeros() as usize;
            r &= r - 1;
            w *= 1.0 + m.get(i, top);
        }
        t[s] = w;
    }
    t
}

/// φ_n^T through e^{−H(V)} = Σ_{B ∋ 0} φ^T(B) e^{−H(V∖B)}.
pub fn ursell_fast(m: &MayerMatrix) -> f64 {
    psi_fast(m, 1)
}

/// ψ_{k,n} through e^{−H(S)} = Σ_{R ⊆ V ⊆ S} ψ(R, V) e^{−H(S∖V)}, R = {0..k}.
pub fn psi_fast(m: &MayerMatrix, k: usize) -> f64 {
    let n = m.n();
    assert!(k >= 1 && k <= n && n <= MAX_VERTICES);
    let boltz = boltzmann_table(m);
    if k == n {
        return boltz[(1 << n) - 1];
    }
    let roots = (1usize << k) - 1;
    let mut psi = vec![0.0; 1 << n];
    let free_all = ((1usize << n) - 1) & !roots;
    // Subsets S ⊇ R enumerated by their free part in increasing order.
    let mut w = 0usize;
    loop {
        let s = roots | w;
        let mut val = boltz[s];
        if w != 0 {
            // proper sub-parts u ⊊ w
            let mut u = (w - 1) & w;
            loop {
                let v = roots | u;
                if psi[v] != 0.0 {
                    val -= psi[v] * boltz[s & !v];
                }
                if u == 0 {
                    break;
                }
                u = (u - 1) & w;
            }
        }
        psi[s] = val;
        if w == free_all {
            break;
        }
        w = (w.wrapping_sub(free_all)) & free_all;
    }
    psi[(1 << n) - 1]
}

/// w̃(T, r; x) for a tree oriented away from `root`.
pub fn fp_tree_weight(pot: &PairPotential, tree: &Graph, root: usize, pts: &[Point]) -> Result<f64> {
    if pts.len() != tree.n() {
        return Err(Error::contract("tree size and point count differ"));
    }
    let children = combinat::tree_children(tree, root)?;
    let m = MayerMatrix::new(pot, pts);
    Ok(tree_weight_oriented(&m, &children))
}

pub(crate) fn tree_weight_oriented(m: &MayerMatrix, children: &[u16; MAX_VERTICES]) -> f64 {
    let mut w = 1.0;
    for (v, &c) in children.iter().enumerate().take(m.n()) {
        let mut a = c;
        while a != 0 {
            let i = a.trailing_zeros() as usize;
            a &= a - 1;
            w *= m.get(v, i).abs();
            let mut b = a;
            while b != 0 {
                let j = b.trailing_zeros() as usize;
                b &= b - 1;
                w *= 1.0 + m.get(i, j);
            }
            if w == 0.0 {
                return 0.0;
            }
        }
    }
    w
}

/// Σ over all labelled trees of w̃(T, root; x).
pub fn fp_tree_sum(pot: &PairPotential, root: usize, pts: &[Point]) -> Result<f64> {
    let n = pts.len();
    if root >= n {
        return Err(Error::contract("root outside the point list"));
    }
    let m = MayerMatrix::new(pot, pts);
    let mut total = 0.0;
    for t in combinat::trees(n, false)? {
        let c = combinat::tree_children(&t.graph, root)?;
        total += tree_weight_oriented(&m, &c);
    }
    Ok(total)
}

/// ψ(I, J) by repeatedly removing the smallest root; J is the whole point list.
pub fn psi_by_recursion(pot: &PairPotential, roots: &[usize], pts: &[Point]) -> Result<f64> {
    let n = pts.len();
    check_cap("recursion vertices", n, combinat::CAP_CONNECTED, false)?;
    if roots.is_empty() {
        return Err(Error::contract("root set must be non-empty"));
    }
    let mut imask = 0u16;
    for &r in roots {
        if r >= n {
            return Err(Error::contract(format!("root {r} outside 0..{n}")));
        }
        imask |= 1 << r;
    }
    let m = MayerMatrix::new(pot, pts);
    Ok(psi_recursive_matrix(&m, imask, ((1u32 << n) - 1) as u16))
}

/// Root-removal recursion on a precomputed f table.
pub fn psi_recursive_matrix(m: &MayerMatrix, roots: u16, all: u16) -> f64 {
    let n = m.n();
    let mut memo = vec![f64::NAN; 1 << (2 * n)];
    psi_rec(m, roots, all, &mut memo)
}

fn psi_rec(m: &MayerMatrix, i: u16, j: u16, memo: &mut [f64]) -> f64 {
    if i == 0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    let n = m.n();
    let key = (i as usize) << n | j as usize;
    if !memo[key].is_nan() {
        return memo[key];
    }
    let iota = i.trailing_zeros() as usize;
    let i_rest = i & !(1 << iota);
    let j_rest = j & !(1 << iota);
    let mut pre = 1.0;
    let mut r = i_rest;
    while r != 0 {
        let a = r.trailing_zeros() as usize;
        r &= r - 1;
        pre *= 1.0 + m.get(iota, a);
    }
    let mut total = 0.0;
    if pre != 0.0 {
        let free = j & !i;
        let mut l = free;
        loop {
            let mut w = 1.0;
            let mut b = l;
            while b != 0 && w != 0.0 {
                let a = b.trailing_zeros() as usize;
                b &= b - 1;
                w *= m.get(iota, a);
            }
            if w != 0.0 {
                total += w * psi_rec(m, i_rest | l, j_rest, memo);
            }
            if l == 0 {
                break;
            }
            l = (l - 1) & free;
        }
    }
    let v = pre * total;
    memo[key] = v;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rods(xs: &[f64]) -> Vec<Point> {
        xs.iter().map(|&x| Point::on_line(x)).collect()
    }

    #[test]
    fn weight_examples() {
        let hs = PairPotential::hard_sphere(1.0).unwrap();
        let pts = rods(&[0.0, 0.3, 0.6]);
        assert_eq!(graph_weight(&hs, &Graph::empty(3), &pts).unwrap(), 1.0);
        assert_eq!(graph_weight(&hs, &Graph::complete(3), &pts).unwrap(), -1.0);
        let edge = Graph::from_edges(2, &[(0, 1)]).unwrap();
        assert_eq!(graph_weight(&hs, &edge, &pts[..2]).unwrap(), -1.0);
        assert!(graph_weight(&hs, &edge, &pts).is_err());
    }

    #[test]
    fn ursell_examples() {
        let hs = PairPotential::hard_sphere(1.0).unwrap();
        assert_eq!(ursell(&hs, &rods(&[0.0])).unwrap().value, 1.0);
        assert_eq!(ursell(&hs, &rods(&[0.0, 0.5])).unwrap().value, -1.0);
        let s = ursell(&hs, &rods(&[0.0, 0.3, 0.6])).unwrap();
        assert_eq!((s.value, s.terms), (2.0, 4));
    }

    #[test]
    fn psi_examples() {
        let hs = PairPotential::hard_sphere(1.0).unwrap();
        let pts = rods(&[0.0, 0.7, 1.5, 3.0]);
        let k1 = psi(&hs, 1, &pts).unwrap();
        assert_eq!(k1.value.to_bits(), ursell(&hs, &pts).unwrap().value.to_bits());
        let two = rods(&[0.0, 0.5]);
        assert_eq!(psi(&hs, 2, &two).unwrap().value, 0.0);
        let apart = rods(&[0.0, 2.0, 4.0]);
        assert_eq!(psi(&hs, 3, &apart).unwrap().value, 1.0);
    }

    #[test]
    fn tree_weight_examples() {
        let hs = PairPotential::hard_sphere(1.0).unwrap();
        assert_eq!(fp_tree_weight(&hs, &Graph::empty(1), 0, &rods(&[0.0])).unwrap(), 1.0);
        let edge = Graph::from_edges(2, &[(0, 1)]).unwrap();
        assert_eq!(fp_tree_weight(&hs, &edge, 0, &rods(&[0.0, 0.4])).unwrap(), 1.0);
        let star = Graph::from_edges(3, &[(0, 1), (0, 2)]).unwrap();
        assert_eq!(fp_tree_weight(&hs, &star, 0, &rods(&[0.0, 0.3, 0.6])).unwrap(), 0.0);
        assert_eq!(fp_tree_weight(&hs, &star, 0, &rods(&[0.0, -0.8, 0.8])).unwrap(), 1.0);
    }

    #[test]
    fn recursion_examples() {
        let hs = PairPotential::hard_sphere(1.0).unwrap();
        assert_eq!(psi_by_recursion(&hs, &[0], &rods(&[0.0])).unwrap(), 1.0);
        assert_eq!(psi_by_recursion(&hs, &[0], &rods(&[0.0, 0.5])).unwrap(), -1.0);
        assert!(psi_by_recursion(&hs, &[], &rods(&[0.0])).is_err());
    }

    #[test]
    fn fast_paths_match_enumeration() {
        let t = crate::model::RadialTable::new(vec![0.0, 1.0, 2.0], vec![2.0, 0.7, 0.0]).unwrap();
        let soft = PairPotential::tabulated(t).unwrap();
        let pts = rods(&[0.0, 0.4, 1.1, 1.7, 2.2, 3.1]);
        let m = MayerMatrix::new(&soft, &pts);
        for k in 1..=pts.len() {
            let e = psi_matrix(&m, k).value;
            let f = psi_fast(&m, k);
            let r = psi_recursive_matrix(&m, ((1u32 << k) - 1) as u16, 0b111111);
            assert!((e - f).abs() < 1e-12 * (1.0 + e.abs()), "k={k}: {e} vs {f}");
            assert!((e - r).abs() < 1e-12 * (1.0 + e.abs()), "k={k}: {e} vs {r}");
        }
    }
}
