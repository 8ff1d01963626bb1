//! Directed uniform hypergraphs, their adjacency tensors and the exact
//! combinatorial parameters that bound the tensor subranks from below.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::quantum::{sym_quantum_functional, QuantumEstimate, QuantumOptions};
use crate::restrict::{subrank_exact, symsubrank_exact, SearchOptions};
use crate::scalar::{Scalar, ScalarDomain};
use crate::tensor::{multi_indices, Tensor};

/// Largest vertex count for the independence search.
pub const VERTEX_LIMIT: usize = 40;
/// Largest vertex count of a strong power.
pub const POWER_VERTEX_LIMIT: u128 = 1 << 16;
/// Largest `|Φ|^m` enumerated while building a strong power.
pub const POWER_EDGE_LIMIT: u128 = 1 << 22;
/// Largest `|Φ|` searched by plain subset enumeration.
pub const SUBSET_LIMIT: usize = 24;
/// Largest `|Φ|` accepted at all.
pub const MATCHING_LIMIT: usize = 1 << 14;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hypergraph {
    n: usize,
    k: usize,
    edges: BTreeSet<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct HypergraphWire {
    n: usize,
    k: usize,
    edges: Vec<Vec<usize>>,
}

fn is_constant(t: &[usize]) -> bool {
    t.windows(2).all(|w| w[0] == w[1])
}

impl Hypergraph {
    /// Edges are 0-based `k`-tuples; duplicates collapse.
    pub fn new(n: usize, k: usize, edges: impl IntoIterator<Item = Vec<usize>>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidInput("uniformity must be at least 2".into()));
        }
        let mut set = BTreeSet::new();
        for e in edges {
            if e.len() != k || e.iter().any(|&v| v >= n) {
                return Err(Error::InvalidInput(format!("edge {e:?} is not a {k}-tuple over {n} vertices")));
            }
            if is_constant(&e) {
                return Err(Error::InvalidInput(format!("edge {e:?} is constant")));
            }
            set.insert(e);
        }
        Ok(Hypergraph { n, k, edges: set })
    }

    pub fn edgeless(n: usize, k: usize) -> Self {
        Hypergraph { n, k, edges: BTreeSet::new() }
    }

    /// Every non-constant tuple.
    pub fn complete(n: usize, k: usize) -> Self {
        let edges = multi_indices(&vec![n; k]).filter(|t| !is_constant(t)).collect();
        Hypergraph { n, k, edges }
    }

    /// `i -> i+1 mod n`.
    pub fn directed_cycle(n: usize) -> Self {
        Hypergraph::new(n, 2, (0..n).map(|i| vec![i, (i + 1) % n])).expect("cycle is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &BTreeSet<Vec<usize>> {
        &self.edges
    }

    /// Closed under permuting tuple positions.
    pub fn is_symmetric(&self) -> bool {
        self.edges.iter().all(|e| {
            (0..self.k - 1).all(|i| {
                let mut s = e.clone();
                s.swap(i, i + 1);
                self.edges.contains(&s)
            })
        })
    }

    /// Edges together with the constant tuples.
    pub fn phi(&self) -> Vec<Vec<usize>> {
        let mut all: BTreeSet<Vec<usize>> = self.edges.clone();
        all.extend((0..self.n).map(|v| vec![v; self.k]));
        all.into_iter().collect()
    }

    pub fn adjacency_tensor(&self, domain: ScalarDomain) -> Result<Tensor> {
        self.adjacency_tensor_with(domain, |_| domain.one())
    }

    /// Adjacency tensor with chosen coefficients on the edges; the diagonal stays 1.
    pub fn adjacency_tensor_with(&self, domain: ScalarDomain, coef: impl Fn(&[usize]) -> Scalar) -> Result<Tensor> {
        let entries = (0..self.n)
            .map(|v| (vec![v; self.k], domain.one()))
            .chain(self.edges.iter().map(|e| (e.clone(), coef(e))));
        Tensor::from_entries(vec![self.n; self.k], domain, entries)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "k": self.k,
            "edges": self.edges.iter().map(|e| e.iter().map(|v| v + 1).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }

    /// Reads `{n, k, edges}` with 1-based vertices.
    pub fn from_json(v: &Value) -> Result<Self> {
        let wire: HypergraphWire =
            serde_json::from_value(v.clone()).map_err(|e| Error::InvalidInput(format!("hypergraph JSON: {e}")))?;
        let mut edges = Vec::with_capacity(wire.edges.len());
        for e in wire.edges {
            if e.iter().any(|&v| v == 0) {
                return Err(Error::InvalidInput(format!("vertex 0 in edge {e:?}; vertices are 1-based")));
            }
            edges.push(e.into_iter().map(|v| v - 1).collect());
        }
        Hypergraph::new(wire.n, wire.k, edges)
    }
}

fn mask_of(t: &[usize]) -> u64 {
    t.iter().fold(0, |m, &v| m | 1 << v)
}

/// Maximum independent set by branch and bound; roots run in parallel.
pub fn independence_number(h: &Hypergraph) -> Result<(usize, Vec<usize>)> {
    let n = h.n;
    if n > VERTEX_LIMIT {
        return Err(Error::GateExceeded { what: "independence search vertices".into(), size: n as u128, limit: VERTEX_LIMIT as u128 });
    }
    // minimal vertex sets of edges
    let mut sets: Vec<u64> = h.edges.iter().map(|e| mask_of(e)).collect();
    sets.sort_by_key(|m| (m.count_ones(), *m));
    sets.dedup();
    let mut minimal: Vec<u64> = Vec::new();
    for s in sets {
        if !minimal.iter().any(|&m| m & s == m) {
            minimal.push(s);
        }
    }
    let mut degree = vec![0usize; n];
    for &m in &minimal {
        for v in 0..n {
            if m >> v & 1 == 1 {
                degree[v] += 1;
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(degree[v]), v));
    let by_vertex: Vec<Vec<u64>> = (0..n).map(|v| minimal.iter().copied().filter(|m| m >> v & 1 == 1).collect()).collect();

    let ctx = IndCtx { order: &order, by_vertex: &by_vertex };
    let global = AtomicUsize::new(0);
    // root i: order[i] is the first chosen vertex; the first root reaching
    // the maximum supplies the witness, so the output does not depend on timing
    let roots: Vec<(usize, u64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let v = order[i];
            let later: u64 = order[i + 1..].iter().fold(0, |m, &u| m | 1 << u);
            let s = 1u64 << v;
            let mut local = (0, 0);
            if !ctx.blocked(s) {
                ctx.search(s, ctx.filter(s, later), &mut local, &global);
            }
            local
        })
        .collect();
    let best = roots.iter().map(|r| r.0).max().unwrap_or(0);
    let w = roots.iter().find(|r| r.0 == best).map_or(0, |r| r.1);
    let set: Vec<usize> = (0..n).filter(|&v| w >> v & 1 == 1).collect();
    Ok((set.len(), set))
}

struct IndCtx<'a> {
    order: &'a [usize],
    by_vertex: &'a [Vec<u64>],
}

impl IndCtx<'_> {
    /// Some edge lies inside `s`.
    fn blocked(&self, s: u64) -> bool {
        (0..64).filter(|&v| s >> v & 1 == 1).any(|v| self.by_vertex[v].iter().any(|&m| m & s == m))
    }

    /// Candidates `u` for which `s ∪ {u}` still contains no edge.
    fn filter(&self, s: u64, cand: u64) -> u64 {
        let mut out = 0;
        for &u in self.order {
            if cand >> u & 1 == 1 {
                let t = s | 1 << u;
                if !self.by_vertex[u].iter().any(|&m| m & t == m) {
                    out |= 1 << u;
                }
            }
        }
        out
    }

    /// Pruning against other roots is strict, so every set of maximum size
    /// stays reachable; within the root only improvements are kept.
    fn search(&self, s: u64, cand: u64, local: &mut (usize, u64), global: &AtomicUsize) {
        let size = s.count_ones() as usize;
        if cand == 0 {
            if size > local.0 {
                *local = (size, s);
                global.fetch_max(size, Ordering::Relaxed);
            }
            return;
        }
        let bound = size + cand.count_ones() as usize;
        if bound <= local.0 || bound < global.load(Ordering::Relaxed) {
            return;
        }
        let v = *self.order.iter().find(|&&u| cand >> u & 1 == 1).expect("nonempty");
        let rest = cand & !(1 << v);
        let t = s | 1 << v;
        self.search(t, self.filter(t, rest), local, global);
        self.search(s, rest, local, global);
    }
}

/// Exact largest induced matching inside `Φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct InducedMatching {
    pub value: usize,
    pub matching: Vec<Vec<usize>>,
    /// `subset` or `branch-and-bound`.
    pub method: &'static str,
}

struct MatchCtx<'a> {
    phi: &'a [Vec<u64>],
    k: usize,
}

impl MatchCtx<'_> {
    /// `chosen ∪ {a}` is still an induced matching; `used` holds the
    /// coordinates of `chosen` as one-hot masks.
    fn fits(&self, used: &[u64], chosen: &[usize], a: usize) -> bool {
        let e = &self.phi[a];
        if (0..self.k).any(|j| used[j] & e[j] != 0) {
            return false;
        }
        self.phi.iter().enumerate().all(|(b, f)| {
            b == a || chosen.contains(&b) || !(0..self.k).all(|j| (used[j] | e[j]) & f[j] != 0)
        })
    }
}

/// `M ⊆ Φ` with elements disjoint in every coordinate and
/// `Φ ∩ (M_1 × ... × M_k) = M`.
pub fn induced_matching_number(h: &Hypergraph) -> Result<InducedMatching> {
    let phi = h.phi();
    if phi.len() > MATCHING_LIMIT {
        return Err(Error::GateExceeded { what: "induced matching candidates".into(), size: phi.len() as u128, limit: MATCHING_LIMIT as u128 });
    }
    if h.n > 64 {
        return Err(Error::GateExceeded { what: "induced matching vertices".into(), size: h.n as u128, limit: 64 });
    }
    let k = h.k;
    let hot: Vec<Vec<u64>> = phi.iter().map(|e| e.iter().map(|&v| 1u64 << v).collect()).collect();
    let ctx = MatchCtx { phi: &hot, k };
    let exhaustive = phi.len() <= SUBSET_LIMIT;
    let mut best: Vec<usize> = Vec::new();
    let mut chosen = Vec::new();
    let used = vec![0u64; k];
    let cand: Vec<usize> = (0..phi.len()).collect();
    match_search(&ctx, &used, &cand, &mut chosen, &mut best, !exhaustive);
    let matching: Vec<Vec<usize>> = best.iter().map(|&i| phi[i].clone()).collect();
    Ok(InducedMatching {
        value: matching.len(),
        matching,
        method: if exhaustive { "subset" } else { "branch-and-bound" },
    })
}

fn match_search(ctx: &MatchCtx, used: &[u64], cand: &[usize], chosen: &mut Vec<usize>, best: &mut Vec<usize>, bound: bool) {
    if chosen.len() > best.len() {
        *best = chosen.clone();
    }
    if bound && chosen.len() + cand.len() <= best.len() {
        return;
    }
    for (pos, &a) in cand.iter().enumerate() {
        if bound && chosen.len() + cand.len() - pos <= best.len() {
            return;
        }
        let next_used: Vec<u64> = (0..ctx.k).map(|j| used[j] | ctx.phi[a][j]).collect();
        chosen.push(a);
        let rest: Vec<usize> = cand[pos + 1..].iter().copied().filter(|&b| ctx.fits(&next_used, chosen, b)).collect();
        match_search(ctx, &next_used, &rest, chosen, best, bound);
        chosen.pop();
    }
}

/// Vertex `(v_0, ..., v_{m-1})` of the strong power is `Σ v_j n^{m-1-j}`.
pub fn strong_power(h: &Hypergraph, m: usize) -> Result<Hypergraph> {
    if m == 0 {
        return Err(Error::InvalidInput("power must be positive".into()));
    }
    let vertices = (h.n as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if vertices > POWER_VERTEX_LIMIT {
        return Err(Error::GateExceeded { what: "strong power vertices".into(), size: vertices, limit: POWER_VERTEX_LIMIT });
    }
    let phi = h.phi();
    let combos = (phi.len() as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if combos > POWER_EDGE_LIMIT {
        return Err(Error::GateExceeded { what: "strong power tuples".into(), size: combos, limit: POWER_EDGE_LIMIT });
    }
    let mut edges = BTreeSet::new();
    for pick in multi_indices(&vec![phi.len(); m]) {
        let tuple: Vec<usize> = (0..h.k).map(|l| pick.iter().fold(0, |acc, &p| acc * h.n + phi[p][l])).collect();
        if !is_constant(&tuple) {
            edges.insert(tuple);
        }
    }
    Ok(Hypergraph { n: vertices as usize, k: h.k, edges })
}

/// `α(H^{⊠m})^{1/m}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapacityLower {
    pub alpha: usize,
    pub m: usize,
    pub value: f64,
    /// Best `(α, power, value)` over powers `1..=m`.
    pub best: (usize, usize, f64),
}

pub fn capacity_lower(h: &Hypergraph, m: usize) -> Result<CapacityLower> {
    if m == 0 {
        return Err(Error::InvalidInput("power must be positive".into()));
    }
    let mut best = (0, 0, f64::NEG_INFINITY);
    let mut last = (0, 0.0);
    for j in 1..=m {
        let (a, _) = independence_number(&strong_power(h, j)?)?;
        let v = (a as f64).powf(1.0 / j as f64);
        if v > best.2 + 1e-12 {
            best = (a, j, v);
        }
        last = (a, v);
    }
    Ok(CapacityLower { alpha: last.0, m, value: last.1, best })
}

/// The chain `α ≤ Q_s ≤ Q` and `α ≤ β ≤ Q` for one hypergraph.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainReport {
    pub alpha: usize,
    pub alpha_witness: Vec<usize>,
    pub beta: usize,
    pub beta_witness: Vec<Vec<usize>>,
    pub symsubrank: usize,
    pub subrank: usize,
    pub alpha_le_symsubrank: bool,
    pub symsubrank_le_subrank: bool,
    pub alpha_le_beta: bool,
    pub beta_le_subrank: bool,
    /// Symmetric subrank strictly below the induced matching number.
    pub separation: bool,
}

impl ChainReport {
    pub fn holds(&self) -> bool {
        self.alpha_le_symsubrank && self.symsubrank_le_subrank && self.alpha_le_beta && self.beta_le_subrank
    }
}

pub fn alpha_chain_check(h: &Hypergraph, domain: ScalarDomain, opts: &SearchOptions) -> Result<ChainReport> {
    let (alpha, alpha_witness) = independence_number(h)?;
    let beta = induced_matching_number(h)?;
    let f = h.adjacency_tensor(domain)?;
    let symq = symsubrank_exact(&f, opts)?.value;
    let q = subrank_exact(&f, opts)?.value;
    Ok(ChainReport {
        alpha,
        alpha_witness,
        beta: beta.value,
        beta_witness: beta.matching,
        symsubrank: symq,
        subrank: q,
        alpha_le_symsubrank: alpha <= symq,
        symsubrank_le_subrank: symq <= q,
        alpha_le_beta: alpha <= beta.value,
        beta_le_subrank: beta.value <= q,
        separation: symq < beta.value,
    })
}

/// Entropy ascent on the complex adjacency tensor. The capacity is at most
/// the true functional value; the optimizer only reaches a value below that,
/// so the result is an estimate of an upper bound, not a certified one.
pub fn capacity_upper_quantum(h: &Hypergraph, opts: &QuantumOptions) -> Result<QuantumEstimate> {
    if !h.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let f = h.adjacency_tensor(ScalarDomain::complex())?;
    let mut est = sym_quantum_functional(&f, opts)?;
    est.label = "estimate of an upper bound (optimizer dependent)";
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use proptest::prelude::*;

    fn brute_alpha(h: &Hypergraph) -> usize {
        (0u64..1 << h.n)
            .filter(|&s| h.edges.iter().all(|e| mask_of(e) & s != mask_of(e)))
            .map(|s| s.count_ones() as usize)
            .max()
            .unwrap_or(0)
    }

    fn brute_beta(h: &Hypergraph) -> usize {
        let phi = h.phi();
        let mut best = 0;
        for s in 0u64..1 << phi.len() {
            let m: Vec<&Vec<usize>> = (0..phi.len()).filter(|&i| s >> i & 1 == 1).map(|i| &phi[i]).collect();
            let disjoint = m.iter().enumerate().all(|(i, a)| m[i + 1..].iter().all(|b| (0..h.k).all(|j| a[j] != b[j])));
            if !disjoint {
                continue;
            }
            let induced = phi
                .iter()
                .filter(|f| (0..h.k).all(|j| m.iter().any(|a| a[j] == f[j])))
                .all(|f| m.contains(&f));
            if induced {
                best = best.max(m.len());
            }
        }
        best
    }

    #[test]
    fn adjacency_examples() {
        let f2 = ScalarDomain::prime(2).unwrap();
        assert_eq!(Hypergraph::directed_cycle(5).adjacency_tensor(f2).unwrap(), catalog::c5_adjacency(f2));
        assert_eq!(Hypergraph::edgeless(4, 3).adjacency_tensor(f2).unwrap(), Tensor::unit(4, 3, f2).unwrap());
        let one = Hypergraph::new(2, 2, [vec![0, 1]]).unwrap();
        assert_eq!(one.adjacency_tensor(f2).unwrap(), Tensor::from_ints(vec![2, 2], f2, &[1, 1, 0, 1]).unwrap());
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Hypergraph::new(2, 2, [vec![0, 2]]).is_err());
        assert!(Hypergraph::new(2, 2, [vec![1, 1]]).is_err());
        assert!(Hypergraph::from_json(&json!({"n": 2, "k": 2, "edges": [[0, 1]]})).is_err());
        let h = Hypergraph::from_json(&json!({"n": 3, "k": 2, "edges": [[1, 2], [1, 2]]})).unwrap();
        assert_eq!(h.edges().len(), 1);
        assert_eq!(Hypergraph::from_json(&h.to_json()).unwrap(), h);
    }

    #[test]
    fn alpha_examples() {
        let c5 = Hypergraph::directed_cycle(5);
        let (a, w) = independence_number(&c5).unwrap();
        assert_eq!(a, 2);
        assert_eq!(w.len(), 2);
        assert_eq!(a, brute_alpha(&c5));
        assert_eq!(independence_number(&Hypergraph::edgeless(6, 2)).unwrap().0, 6);
        assert_eq!(independence_number(&Hypergraph::complete(3, 2)).unwrap().0, 1);
        assert!(matches!(independence_number(&Hypergraph::edgeless(41, 2)), Err(Error::GateExceeded { .. })));
    }

    #[test]
    fn beta_examples() {
        let c5 = Hypergraph::directed_cycle(5);
        let b = induced_matching_number(&c5).unwrap();
        assert_eq!(b.value, 3);
        assert_eq!(b.method, "subset");
        assert_eq!(brute_beta(&c5), 3);
        assert_eq!(induced_matching_number(&Hypergraph::edgeless(4, 2)).unwrap().value, 4);
        assert_eq!(induced_matching_number(&Hypergraph::edgeless(1, 3)).unwrap().value, 1);
    }

    #[test]
    fn strong_power_examples() {
        let c5 = Hypergraph::directed_cycle(5);
        assert_eq!(strong_power(&c5, 1).unwrap(), c5);
        assert_eq!(strong_power(&Hypergraph::edgeless(3, 2), 3).unwrap(), Hypergraph::edgeless(27, 2));
        let f2 = ScalarDomain::prime(2).unwrap();
        let a = c5.adjacency_tensor(f2).unwrap();
        assert_eq!(strong_power(&c5, 2).unwrap().adjacency_tensor(f2).unwrap(), a.power(2).unwrap());
        let (a1, _) = independence_number(&c5).unwrap();
        let (a2, _) = independence_number(&strong_power(&c5, 2).unwrap()).unwrap();
        assert!(a2 >= a1 * a1);
        assert!(matches!(strong_power(&Hypergraph::edgeless(300, 2), 2), Err(Error::GateExceeded { .. })));
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(capacity_lower(&Hypergraph::directed_cycle(5), 1).unwrap().value, 2.0);
        let e = capacity_lower(&Hypergraph::edgeless(3, 2), 2).unwrap();
        assert!((e.value - 3.0).abs() < 1e-12);
        assert!((capacity_lower(&Hypergraph::complete(3, 2), 2).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chain_examples() {
        let f2 = ScalarDomain::prime(2).unwrap();
        let opts = SearchOptions::default();
        let r = alpha_chain_check(&Hypergraph::directed_cycle(5), f2, &opts).unwrap();
        assert_eq!((r.alpha, r.symsubrank, r.beta, r.subrank), (2, 2, 3, 4));
        assert!(r.separation && r.holds());
        let r = alpha_chain_check(&Hypergraph::edgeless(3, 2), f2, &opts).unwrap();
        assert_eq!((r.alpha, r.symsubrank, r.beta, r.subrank), (3, 3, 3, 3));
        let r = alpha_chain_check(&Hypergraph::complete(2, 2), f2, &opts).unwrap();
        assert_eq!(r.alpha, 1);
        assert!(r.holds());
    }

    #[test]
    fn quantum_capacity_examples() {
        let opts = QuantumOptions { restarts: 2, ..Default::default() };
        let e = capacity_upper_quantum(&Hypergraph::edgeless(3, 2), &opts).unwrap();
        assert!((e.f_lower - 3.0).abs() < 1e-6);
        let k2 = capacity_upper_quantum(&Hypergraph::complete(2, 2), &opts).unwrap();
        assert!((k2.f_lower - 1.0).abs() < 1e-6);
        let tri = Hypergraph::new(3, 3, multi_indices(&[3, 3, 3]).filter(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2])).unwrap();
        let v = capacity_upper_quantum(&tri, &opts).unwrap().f_lower;
        assert!((1.0..=3.0 + 1e-9).contains(&v), "{v}");
        assert_eq!(capacity_upper_quantum(&Hypergraph::directed_cycle(5), &opts).unwrap_err(), Error::NotSymmetric);
    }

    fn digraph(n: usize) -> impl Strategy<Value = Hypergraph> {
        proptest::collection::vec(any::<bool>(), n * n).prop_map(move |bits| {
            let edges = (0..n * n).filter(|&i| bits[i] && i / n != i % n).map(|i| vec![i / n, i % n]);
            Hypergraph::new(n, 2, edges).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn search_matches_brute_force(h in digraph(5)) {
            prop_assert_eq!(independence_number(&h).unwrap().0, brute_alpha(&h));
            let b = induced_matching_number(&h).unwrap().value;
            prop_assert_eq!(b, brute_beta(&h));
            prop_assert!(independence_number(&h).unwrap().0 <= b);
        }
    }
}
