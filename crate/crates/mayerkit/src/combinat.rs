//! Exhaustive enumeration of the families the expansions sum over.
//!
//! Vertices are 0-based in code. The edge {i, j} with i < j has bit index
//! `j(j−1)/2 + i`, which is `(J−1)(J−2)/2 + (I−1)` in 1-based labels. Every
//! enumerator is deterministic.

use crate::error::{check_cap, Error, Result};

pub const MAX_VERTICES: usize = 16;
pub const CAP_ALL_GRAPHS: usize = 8;
pub const CAP_CONNECTED: usize = 7;
pub const CAP_TREES: usize = 9;
pub const CAP_PARTITIONS: usize = 12;
pub const CAP_PAIR_ORDER: usize = 5;
pub const CAP_ASSIGNMENTS: u64 = 100_000_000;

/// Largest n whose 2^{C(n,2)} graphs fit a 64-bit counter.
const MAX_ENUMERABLE: usize = 11;

pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

#[inline]
pub fn edge_index(i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    debug_assert!(i != j);
    j * (j - 1) / 2 + i
}

/// Inverse of [`edge_index`].
pub fn edge_endpoints(idx: usize) -> (usize, usize) {
    let mut j = 1;
    while (j + 1) * j / 2 <= idx {
        j += 1;
    }
    (idx - j * (j - 1) / 2, j)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

/// Simple graph on `n ≤ 16` labelled vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Graph {
    n: u8,
    edges: u128,
}

impl Graph {
    pub fn new(n: usize, edges: u128) -> Result<Self> {
        if n == 0 || n > MAX_VERTICES {
            return Err(Error::contract(format!("graph size {n} outside 1..={MAX_VERTICES}")));
        }
        let p = pair_count(n);
        if p < 128 && edges >> p != 0 {
            return Err(Error::contract("edge bits beyond C(n,2) must be zero"));
        }
        Ok(Graph { n: n as u8, edges })
    }

    pub fn empty(n: usize) -> Self {
        Self::new(n, 0).expect("valid size")
    }

    pub fn complete(n: usize) -> Self {
        let p = pair_count(n);
        let bits = if p == 0 { 0 } else { u128::MAX >> (128 - p) };
        Self::new(n, bits).expect("valid size")
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut bits = 0u128;
        for &(i, j) in edges {
            if i == j || i >= n || j >= n {
                return Err(Error::contract(format!("bad edge ({i},{j}) for n={n}")));
            }
            bits |= 1 << edge_index(i, j);
        }
        Self::new(n, bits)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn edge_bits(&self) -> u128 {
        self.edges
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges >> edge_index(i, j) & 1 == 1
    }

    pub fn edge_count(&self) -> usize {
        self.edges.count_ones() as usize
    }

    /// Edges as `(i, j)` with i < j in bit order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut bits = self.edges;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let b = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(edge_endpoints(b))
        })
    }

    /// Neighbour masks, one per vertex.
    pub fn adjacency(&self) -> [u16; MAX_VERTICES] {
        let mut adj = [0u16; MAX_VERTICES];
        for (i, j) in self.edges() {
            adj[i] |= 1 << j;
            adj[j] |= 1 << i;
        }
        adj
    }
}

fn reach(adj: &[u16; MAX_VERTICES], start: u16) -> u16 {
    let mut seen = start;
    let mut frontier = start;
    while frontier != 0 {
        let mut next = 0u16;
        let mut f = frontier;
        while f != 0 {
            let v = f.trailing_zeros() as usize;
            f &= f - 1;
            next |= adj[v];
        }
        frontier = next & !seen;
        seen |= frontier;
    }
    seen
}

fn full_mask(n: usize) -> u16 {
    if n >= 16 {
        u16::MAX
    } else {
        (1u16 << n) - 1
    }
}

/// Whether every vertex is reachable from vertex 0.
pub fn is_connected(g: &Graph) -> bool {
    reach(&g.adjacency(), 1) == full_mask(g.n())
}

/// Whether every vertex in `k..n` has a path to one of the roots `0..k`.
pub fn reaches_roots(g: &Graph, k: usize) -> bool {
    reach(&g.adjacency(), full_mask(k)) == full_mask(g.n())
}

/// Contiguous range of edge bitsets for one vertex count.
#[derive(Debug, Clone)]
pub struct GraphRange {
    n: usize,
    next: u64,
    end: u64,
}

impl GraphRange {
    pub fn len(&self) -> u64 {
        self.end - self.next
    }

    pub fn is_empty(&self) -> bool {
        self.next == self.end
    }

    /// Split into `parts` consecutive ranges (for parallel filtration).
    pub fn split(&self, parts: usize) -> Vec<GraphRange> {
        let parts = parts.max(1) as u64;
        let len = self.len();
        (0..parts)
            .map(|p| GraphRange {
                n: self.n,
                next: self.next + len * p / parts,
                end: self.next + len * (p + 1) / parts,
            })
            .collect()
    }
}

impl Iterator for GraphRange {
    type Item = Graph;

    fn next(&mut self) -> Option<Graph> {
        if self.next >= self.end {
            return None;
        }
        let g = Graph {
            n: self.n as u8,
            edges: self.next as u128,
        };
        self.next += 1;
        Some(g)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let l = self.len() as usize;
        (l, Some(l))
    }
}

pub fn all_graphs(n: usize) -> Result<GraphRange> {
    all_graphs_with(n, false)
}

/// All 2^{C(n,2)} graphs in increasing bitset order; `force` lifts the soft cap.
pub fn all_graphs_with(n: usize, force: bool) -> Result<GraphRange> {
    if n == 0 {
        return Err(Error::contract("graphs need at least one vertex"));
    }
    check_cap("graph vertices", n, CAP_ALL_GRAPHS, force)?;
    check_cap("graph vertices", n, MAX_ENUMERABLE, false)?;
    Ok(GraphRange {
        n,
        next: 0,
        end: 1u64 << pair_count(n),
    })
}

pub fn connected_graphs(n: usize) -> Result<impl Iterator<Item = Graph>> {
    connected_graphs_with(n, false)
}

pub fn connected_graphs_with(n: usize, force: bool) -> Result<impl Iterator<Item = Graph>> {
    check_cap("connected graph vertices", n, CAP_CONNECTED, force)?;
    Ok(all_graphs_with(n, true)?.filter(is_connected))
}

pub fn multirooted_graphs(k: usize, n: usize) -> Result<impl Iterator<Item = Graph>> {
    multirooted_graphs_with(k, n, false)
}

/// Graphs in which every non-root vertex `k..n` reaches a root `0..k`.
pub fn multirooted_graphs_with(k: usize, n: usize, force: bool) -> Result<impl Iterator<Item = Graph>> {
    if k == 0 || k > n {
        return Err(Error::contract(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    check_cap("multirooted graph vertices", n, CAP_CONNECTED, force)?;
    Ok(all_graphs_with(n, true)?.filter(move |g| reaches_roots(g, k)))
}

/// A labelled tree with an optional root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tree {
    pub graph: Graph,
    pub root: Option<usize>,
}

struct PruferIter {
    n: usize,
    seq: Vec<usize>,
    done: bool,
}

impl Iterator for PruferIter {
    type Item = Graph;

    fn next(&mut self) -> Option<Graph> {
        if self.done {
            return None;
        }
        let g = if self.n == 1 {
            Graph::empty(1)
        } else {
            prufer_decode(self.n, &self.seq)
        };
        // Odometer, last position fastest.
        let mut i = self.seq.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.seq[i] += 1;
            if self.seq[i] < self.n {
                break;
            }
            self.seq[i] = 0;
        }
        Some(g)
    }
}

fn prufer_decode(n: usize, seq: &[usize]) -> Graph {
    let mut degree = vec![1usize; n];
    for &x in seq {
        degree[x] += 1;
    }
    let mut bits = 0u128;
    for &x in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf exists");
        bits |= 1 << edge_index(leaf, x);
        degree[leaf] -= 1;
        degree[x] -= 1;
    }
    let mut rest = (0..n).filter(|&v| degree[v] == 1);
    let (u, v) = (rest.next().expect("two leaves"), rest.next().expect("two leaves"));
    bits |= 1 << edge_index(u, v);
    Graph { n: n as u8, edges: bits }
}

/// All labelled trees on n vertices (n^{n−2}), or rooted trees (n^{n−1}),
/// generated from Prüfer sequences.
pub fn trees(n: usize, rooted: bool) -> Result<Box<dyn Iterator<Item = Tree>>> {
    trees_with(n, rooted, false)
}

pub fn trees_with(n: usize, rooted: bool, force: bool) -> Result<Box<dyn Iterator<Item = Tree>>> {
    if n == 0 {
        return Err(Error::contract("trees need at least one vertex"));
    }
    check_cap("tree vertices", n, CAP_TREES, force)?;
    check_cap("tree vertices", n, MAX_VERTICES, false)?;
    let base = PruferIter {
        n,
        seq: vec![0; n.saturating_sub(2)],
        done: false,
    };
    if rooted {
        Ok(Box::new(base.flat_map(move |g| {
            (0..n).map(move |r| Tree {
                graph: g,
                root: Some(r),
            })
        })))
    } else {
        Ok(Box::new(base.map(|g| Tree { graph: g, root: None })))
    }
}

/// Children masks of each vertex when the tree is oriented away from `root`.
pub fn tree_children(g: &Graph, root: usize) -> Result<[u16; MAX_VERTICES]> {
    let n = g.n();
    if root >= n {
        return Err(Error::contract(format!("root {root} outside 0..{n}")));
    }
    if g.edge_count() != n - 1 || !is_connected(g) {
        return Err(Error::contract("input graph is not a tree"));
    }
    let adj = g.adjacency();
    let mut children = [0u16; MAX_VERTICES];
    let mut seen = 1u16 << root;
    let mut queue = vec![root];
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        let c = adj[v] & !seen;
        children[v] = c;
        seen |= c;
        let mut m = c;
        while m != 0 {
            queue.push(m.trailing_zeros() as usize);
            m &= m - 1;
        }
    }
    Ok(children)
}

/// Edge-labelled multigraph γ: [m] → E₂([n]).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Multigraph {
    n: usize,
    labels: Vec<u8>,
}

impl Multigraph {
    pub fn new(n: usize, assignment: &[(usize, usize)]) -> Result<Self> {
        if n < 2 || n > MAX_VERTICES {
            return Err(Error::contract(format!("multigraph size {n} outside 2..={MAX_VERTICES}")));
        }
        let mut labels = Vec::with_capacity(assignment.len());
        for &(i, j) in assignment {
            if i == j || i >= n || j >= n {
                return Err(Error::contract(format!("bad pair ({i},{j}) for n={n}")));
            }
            labels.push(edge_index(i, j) as u8);
        }
        Ok(Multigraph { n, labels })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.labels.len()
    }

    /// Endpoints of label `a`, smaller vertex first.
    pub fn pair(&self, a: usize) -> (usize, usize) {
        edge_endpoints(self.labels[a] as usize)
    }

    pub fn pair_indices(&self) -> &[u8] {
        &self.labels
    }

    /// m_ij for every pair in edge-index order.
    pub fn multiplicities(&self) -> Vec<u8> {
        let mut mult = vec![0u8; pair_count(self.n)];
        for &l in &self.labels {
            mult[l as usize] += 1;
        }
        mult
    }

    fn support(&self) -> Graph {
        let mut bits = 0u128;
        for &l in &self.labels {
            bits |= 1 << l;
        }
        Graph {
            n: self.n as u8,
            edges: bits,
        }
    }

    pub fn is_spanning(&self) -> bool {
        let mut cover = 0u16;
        for a in 0..self.m() {
            let (i, j) = self.pair(a);
            cover |= 1 << i | 1 << j;
        }
        cover == full_mask(self.n)
    }

    pub fn is_connected(&self) -> bool {
        is_connected(&self.support())
    }
}

struct AssignmentIter {
    n: usize,
    pairs: usize,
    digits: Vec<u8>,
    done: bool,
}

impl Iterator for AssignmentIter {
    type Item = Multigraph;

    fn next(&mut self) -> Option<Multigraph> {
        if self.done {
            return None;
        }
        let g = Multigraph {
            n: self.n,
            labels: self.digits.clone(),
        };
        let mut i = self.digits.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.digits[i] += 1;
            if (self.digits[i] as usize) < self.pairs {
                break;
            }
            self.digits[i] = 0;
        }
        Some(g)
    }
}

fn assignments(n: usize, m: usize, force: bool) -> Result<AssignmentIter> {
    if n < 2 || m == 0 {
        return Err(Error::contract(format!("multigraphs need n >= 2 and m >= 1, got n={n}, m={m}")));
    }
    check_cap("multigraph vertices", n, MAX_VERTICES, false)?;
    let pairs = pair_count(n);
    let total = (pairs as f64).powi(m as i32);
    if total > CAP_ASSIGNMENTS as f64 && !force {
        return Err(Error::SizeLimit {
            what: "multigraph assignments C(n,2)^m",
            value: total.min(usize::MAX as f64) as usize,
            cap: CAP_ASSIGNMENTS as usize,
        });
    }
    Ok(AssignmentIter {
        n,
        pairs,
        digits: vec![0; m],
        done: false,
    })
}

/// Every γ: [m] → E₂([n]), label 0 most significant.
pub fn all_multigraphs(n: usize, m: usize) -> Result<impl Iterator<Item = Multigraph>> {
    assignments(n, m, false)
}

pub fn connected_multigraphs(n: usize, m: usize) -> Result<impl Iterator<Item = Multigraph>> {
    connected_multigraphs_with(n, m, false)
}

pub fn connected_multigraphs_with(n: usize, m: usize, force: bool) -> Result<impl Iterator<Item = Multigraph>> {
    Ok(assignments(n, m, force)?.filter(|g| g.is_connected()))
}

pub fn spanning_multigraphs(n: usize, m: usize) -> Result<impl Iterator<Item = Multigraph>> {
    spanning_multigraphs_with(n, m, false)
}

pub fn spanning_multigraphs_with(n: usize, m: usize, force: bool) -> Result<impl Iterator<Item = Multigraph>> {
    Ok(assignments(n, m, force)?.filter(|g| g.is_spanning()))
}

/// Set partition stored as a restricted-growth string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SetPartition {
    rgs: Vec<u8>,
    blocks: usize,
}

impl SetPartition {
    /// From a restricted-growth string (block ids in first-occurrence order).
    pub fn from_rgs(rgs: Vec<u8>) -> Result<Self> {
        let mut next = 0u8;
        for &b in &rgs {
            if b > next {
                return Err(Error::contract("not a restricted-growth string"));
            }
            if b == next {
                next += 1;
            }
        }
        Ok(SetPartition {
            blocks: next as usize,
            rgs,
        })
    }

    /// From arbitrary block labels, renumbered by first occurrence.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map: Vec<(usize, u8)> = Vec::new();
        let mut rgs = Vec::with_capacity(labels.len());
        for &l in labels {
            let id = match map.iter().find(|(k, _)| *k == l) {
                Some((_, id)) => *id,
                None => {
                    let id = map.len() as u8;
                    map.push((l, id));
                    id
                }
            };
            rgs.push(id);
        }
        SetPartition { blocks: map.len(), rgs }
    }

    pub fn singletons(s: usize) -> Self {
        SetPartition {
            rgs: (0..s as u8).collect(),
            blocks: s,
        }
    }

    pub fn one_block(s: usize) -> Self {
        SetPartition {
            rgs: vec![0; s],
            blocks: usize::from(s > 0),
        }
    }

    /// π_m = {{0,1},{2,3},…}.
    pub fn pairing(m: usize) -> Self {
        SetPartition {
            rgs: (0..2 * m).map(|i| (i / 2) as u8).collect(),
            blocks: m,
        }
    }

    pub fn size(&self) -> usize {
        self.rgs.len()
    }

    pub fn block_count(&self) -> usize {
        self.blocks
    }

    #[inline]
    pub fn block_of(&self, i: usize) -> usize {
        self.rgs[i] as usize
    }

    pub fn rgs(&self) -> &[u8] {
        &self.rgs
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.blocks];
        for (i, &b) in self.rgs.iter().enumerate() {
            out[b as usize].push(i);
        }
        out
    }

    pub fn block_masks(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.blocks];
        for (i, &b) in self.rgs.iter().enumerate() {
            out[b as usize] |= 1 << i;
        }
        out
    }
}

/// All Bell(s) partitions of an s-set in lexicographic RGS order.
pub struct PartitionIter {
    rgs: Vec<u8>,
    done: bool,
}

impl Iterator for PartitionIter {
    type Item = SetPartition;

    fn next(&mut self) -> Option<SetPartition> {
        if self.done {
            return None;
        }
        let item = SetPartition::from_rgs(self.rgs.clone()).expect("valid rgs");
        let s = self.rgs.len();
        let mut prefix_max = vec![0u8; s];
        for i in 1..s {
            prefix_max[i] = prefix_max[i - 1].max(self.rgs[i - 1]);
        }
        let mut i = s;
        loop {
            if i <= 1 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.rgs[i] <= prefix_max[i] {
                self.rgs[i] += 1;
                for r in &mut self.rgs[i + 1..] {
                    *r = 0;
                }
                break;
            }
        }
        Some(item)
    }
}

pub fn partitions(s: usize) -> Result<PartitionIter> {
    partitions_with(s, false)
}

pub fn partitions_with(s: usize, force: bool) -> Result<PartitionIter> {
    if s == 0 {
        return Err(Error::contract("partitions need a non-empty ground set"));
    }
    check_cap("partition ground set", s, CAP_PARTITIONS, force)?;
    check_cap("partition ground set", s, 32, false)?;
    Ok(PartitionIter {
        rgs: vec![0; s],
        done: false,
    })
}

/// A pair (π, σ) of partitions of one ground set with cached flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPair {
    pub pi: SetPartition,
    pub sigma: SetPartition,
    pub nonflat: bool,
    pub connected: bool,
}

impl PartitionPair {
    pub fn new(pi: SetPartition, sigma: SetPartition) -> Result<Self> {
        if pi.size() != sigma.size() {
            return Err(Error::contract("partitions live on different ground sets"));
        }
        let nonflat = is_nonflat(&pi, &sigma);
        let connected = join_is_one_block(&pi, &sigma);
        Ok(PartitionPair {
            pi,
            sigma,
            nonflat,
            connected,
        })
    }
}

fn is_nonflat(pi: &SetPartition, sigma: &SetPartition) -> bool {
    let mut seen = std::collections::HashSet::new();
    (0..pi.size()).all(|i| seen.insert((pi.block_of(i), sigma.block_of(i))))
}

fn join_is_one_block(pi: &SetPartition, sigma: &SetPartition) -> bool {
    let s = pi.size();
    if s == 0 {
        return true;
    }
    let pm = pi.block_masks();
    let sm = sigma.block_masks();
    let mut seen = pm[pi.block_of(0)];
    loop {
        let mut grown = seen;
        for m in pm.iter().chain(sm.iter()) {
            if m & seen != 0 {
                grown |= m;
            }
        }
        if grown == seen {
            break;
        }
        seen = grown;
    }
    seen.count_ones() as usize == s
}

/// The dedoubling construction: elements `2a` and `2a+1` are the smaller and
/// larger endpoint of label a, so π is the canonical pairing and σ groups by vertex.
pub fn multigraph_to_partition_pair(g: &Multigraph) -> Result<PartitionPair> {
    if !g.is_spanning() {
        return Err(Error::contract("multigraph is not spanning"));
    }
    let mut vertex = Vec::with_capacity(2 * g.m());
    for a in 0..g.m() {
        let (i, j) = g.pair(a);
        vertex.push(i);
        vertex.push(j);
    }
    PartitionPair::new(SetPartition::pairing(g.m()), SetPartition::from_labels(&vertex))
}

/// σ on {0..2m} with (π_m, σ) non-flat and connected.
pub fn nonflat_connected_pairs(m: usize) -> Result<Vec<SetPartition>> {
    if m == 0 {
        return Err(Error::contract("m must be positive"));
    }
    check_cap("partition-pair order m", m, CAP_PAIR_ORDER, false)?;
    let pi = SetPartition::pairing(m);
    Ok(partitions_with(2 * m, true)?
        .filter(|s| is_nonflat(&pi, s) && join_is_one_block(&pi, s))
        .collect())
}

/// B_n = Σ_{π ∈ 𝒫_n} Π_{blocks} A_{|B|} for n = 0..=a.len(), with `a[k−1] = A_k`.
///
/// This is the coefficient form of the exponential formula and of the
/// moment–cumulant relation.
pub fn partition_sum(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut b = vec![0.0; n + 1];
    b[0] = 1.0;
    for s in 1..=n {
        b[s] = (1..=s).map(|k| binomial(s - 1, k - 1) * a[k - 1] * b[s - k]).sum();
    }
    b
}

/// Inverse of [`partition_sum`]: recovers A_1..A_n from B_0..B_n (B_0 = 1).
pub fn partition_log(b: &[f64]) -> Vec<f64> {
    let n = b.len().saturating_sub(1);
    let mut a = vec![0.0; n];
    for s in 1..=n {
        let rest: f64 = (1..s).map(|k| binomial(s - 1, k - 1) * a[k - 1] * b[s - k]).sum();
        a[s - 1] = b[s] - rest;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_index_convention() {
        assert_eq!(edge_index(0, 1), 0);
        assert_eq!(edge_index(0, 2), 1);
        assert_eq!(edge_index(1, 2), 2);
        assert_eq!(edge_index(2, 3), 5);
        for idx in 0..pair_count(16) {
            let (i, j) = edge_endpoints(idx);
            assert!(i < j);
            assert_eq!(edge_index(i, j), idx);
            let (ii, jj) = (i + 1, j + 1);
            assert_eq!((jj - 1) * (jj - 2) / 2 + (ii - 1), idx);
        }
    }

    #[test]
    fn small_graph_counts() {
        assert_eq!(all_graphs(1).unwrap().count(), 1);
        assert_eq!(all_graphs(3).unwrap().count(), 8);
        assert_eq!(all_graphs(4).unwrap().count(), 64);
        assert_eq!(connected_graphs(2).unwrap().count(), 1);
        assert_eq!(connected_graphs(3).unwrap().count(), 4);
        assert_eq!(connected_graphs(4).unwrap().count(), 38);
        assert_eq!(connected_graphs(5).unwrap().count(), 728);
        assert!(is_connected(&Graph::empty(1)));
        assert!(!is_connected(&Graph::empty(2)));
    }

    #[test]
    fn caps_are_structured_errors() {
        assert!(matches!(all_graphs(9), Err(Error::SizeLimit { .. })));
        assert!(matches!(connected_graphs(8), Err(Error::SizeLimit { .. })));
        assert!(matches!(trees(10, false), Err(Error::SizeLimit { .. })));
        assert!(matches!(partitions(13), Err(Error::SizeLimit { .. })));
        assert!(matches!(nonflat_connected_pairs(6), Err(Error::SizeLimit { .. })));
        assert!(connected_graphs_with(8, true).is_ok());
        assert!(all_graphs_with(12, true).is_err());
    }

    #[test]
    fn multirooted_examples() {
        assert_eq!(multirooted_graphs(3, 3).unwrap().count(), 8);
        assert_eq!(multirooted_graphs(1, 3).unwrap().count(), 4);
        assert_eq!(multirooted_graphs(2, 2).unwrap().count(), 2);
        // n=3, k=2: vertex 2 must touch a root; 8 graphs minus the 2 where it is isolated.
        assert_eq!(multirooted_graphs(2, 3).unwrap().count(), 6);
    }

    #[test]
    fn tree_examples() {
        assert_eq!(trees(1, false).unwrap().count(), 1);
        assert_eq!(trees(2, false).unwrap().count(), 1);
        assert_eq!(trees(4, false).unwrap().count(), 16);
        assert_eq!(trees(3, true).unwrap().count(), 9);
        let distinct: std::collections::HashSet<_> = trees(5, false).unwrap().map(|t| t.graph).collect();
        assert_eq!(distinct.len(), 125);
        for t in trees(5, false).unwrap() {
            assert_eq!(t.graph.edge_count(), 4);
            assert!(is_connected(&t.graph));
        }
    }

    #[test]
    fn orientation() {
        // path 0-1-2 rooted at 1: children of 1 are {0, 2}
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let c = tree_children(&g, 1).unwrap();
        assert_eq!(c[1], 0b101);
        assert_eq!(c[0], 0);
        let c = tree_children(&g, 0).unwrap();
        assert_eq!(c[0], 0b010);
        assert_eq!(c[1], 0b100);
        assert!(tree_children(&Graph::complete(3), 0).is_err());
    }

    #[test]
    fn multigraph_examples() {
        assert_eq!(connected_multigraphs(2, 1).unwrap().count(), 1);
        assert_eq!(connected_multigraphs(2, 2).unwrap().count(), 1);
        assert_eq!(connected_multigraphs(3, 2).unwrap().count(), 6);
        assert_eq!(spanning_multigraphs(4, 2).unwrap().count(), 6);
        assert_eq!(spanning_multigraphs(2, 1).unwrap().count(), 1);
        assert_eq!(spanning_multigraphs(3, 1).unwrap().count(), 0);
    }

    #[test]
    fn bell_numbers() {
        let bell = [1, 2, 5, 15, 52, 203, 877, 4140];
        for (s, b) in bell.iter().enumerate() {
            assert_eq!(partitions(s + 1).unwrap().count(), *b);
        }
        let first: Vec<_> = partitions(3).unwrap().map(|p| p.rgs().to_vec()).collect();
        assert_eq!(
            first,
            vec![vec![0, 0, 0], vec![0, 0, 1], vec![0, 1, 0], vec![0, 1, 1], vec![0, 1, 2]]
        );
    }

    #[test]
    fn dedoubling_examples() {
        let g = Multigraph::new(2, &[(0, 1)]).unwrap();
        let pp = multigraph_to_partition_pair(&g).unwrap();
        assert_eq!(pp.pi.rgs(), &[0, 0]);
        assert_eq!(pp.sigma.rgs(), &[0, 1]);
        let g = Multigraph::new(2, &[(0, 1), (0, 1)]).unwrap();
        let pp = multigraph_to_partition_pair(&g).unwrap();
        assert_eq!(pp.pi.rgs(), &[0, 0, 1, 1]);
        assert_eq!(pp.sigma.blocks(), vec![vec![0, 2], vec![1, 3]]);
        assert!(pp.nonflat && pp.connected);
        let bad = Multigraph::new(3, &[(0, 1)]).unwrap();
        assert!(multigraph_to_partition_pair(&bad).is_err());
    }

    #[test]
    fn nonflat_pair_counts() {
        assert_eq!(nonflat_connected_pairs(1).unwrap(), vec![SetPartition::singletons(2)]);
        assert_eq!(nonflat_connected_pairs(2).unwrap().len(), 6);
        // Σ_n 2^m |ℳ_c([n],[m])| / n! unordered σ's per block count.
        for m in 1..=3 {
            let mut expected = 0.0;
            for n in 2..=2 * m {
                let c = connected_multigraphs(n, m).unwrap().count() as f64;
                expected += 2f64.powi(m as i32) * c / factorial(n);
            }
            assert_eq!(nonflat_connected_pairs(m).unwrap().len() as f64, expected);
        }
    }

    #[test]
    fn partition_sum_round_trip() {
        let a = [0.3, -1.2, 2.5, 0.7, -0.4];
        let b = partition_sum(&a);
        let back = partition_log(&b);
        for (x, y) in a.iter().zip(&back) {
            assert!((x - y).abs() < 1e-12);
        }
        // All A_k = 1 gives the Bell numbers.
        let bell = partition_sum(&[1.0; 6]);
        assert_eq!(bell, vec![1.0, 1.0, 2.0, 5.0, 15.0, 52.0, 203.0]);
    }

    #[test]
    fn graph_range_split_covers() {
        let r = all_graphs(5).unwrap();
        let parts = r.split(7);
        let total: u64 = parts.iter().map(|p| p.len()).sum();
        assert_eq!(total, 1024);
        let joined: Vec<_> = parts.into_iter().flatten().collect();
        let direct: Vec<_> = all_graphs(5).unwrap().collect();
        assert_eq!(joined, direct);
    }
}
