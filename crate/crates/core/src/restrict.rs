//! Exhaustive restriction searches over prime fields, with re-verifiable
//! certificates.
//!
//! Searches extend maps one row at a time in lexicographic candidate order and
//! return the first witness found. The budget counts candidate rows examined
//! (plus one per linear solve); running past it is an error, never a silent
//! "no".

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::scalar::{Scalar, ScalarDomain};
use crate::tensor::{multi_indices, LinearMap, Tensor};

pub const DEFAULT_BUDGET: u64 = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchOptions {
    pub budget: u64,
    /// Worker threads for the top-level branches; results do not depend on it.
    pub workers: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { budget: DEFAULT_BUDGET, workers: 1 }
    }
}

impl SearchOptions {
    pub fn with_budget(budget: u64) -> Self {
        SearchOptions { budget, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    Restriction,
    SymmetricRestriction,
}

/// Witness that `target` is a (symmetric) restriction of `source^{⊗source_power}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub source_id: Option<String>,
    pub source_power: usize,
    pub target: Tensor,
    /// One map per leg, or a single shared map for symmetric restrictions.
    pub maps: Vec<LinearMap>,
    pub verified: bool,
}

impl Certificate {
    pub fn restriction(target: Tensor, maps: Vec<LinearMap>) -> Self {
        Certificate {
            kind: CertificateKind::Restriction,
            source_id: None,
            source_power: 1,
            target,
            maps,
            verified: false,
        }
    }

    pub fn symmetric(target: Tensor, map: LinearMap) -> Self {
        Certificate {
            kind: CertificateKind::SymmetricRestriction,
            source_id: None,
            source_power: 1,
            target,
            maps: vec![map],
            verified: false,
        }
    }

    /// The per-leg maps, repeating the shared map for symmetric certificates.
    pub fn leg_maps(&self) -> Vec<LinearMap> {
        match self.kind {
            CertificateKind::Restriction => self.maps.clone(),
            CertificateKind::SymmetricRestriction => vec![self.maps[0].clone(); self.target.order()],
        }
    }

    /// Checks against `source` and records the outcome in `verified`.
    pub fn verified_against(mut self, source: &Tensor) -> Result<Self> {
        self.verified = verify_certificate(&self, source)?;
        Ok(self)
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "kind": self.kind,
            "sourcePower": self.source_power,
            "target": self.target.to_json(),
            "maps": self.maps.iter().map(LinearMap::to_json).collect::<Vec<_>>(),
            "verified": self.verified,
        });
        if let Some(id) = &self.source_id {
            v["sourceId"] = json!(id);
        }
        v
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |what: &str| Error::InvalidInput(format!("certificate JSON: {what}"));
        let kind: CertificateKind =
            serde_json::from_value(v.get("kind").cloned().ok_or_else(|| bad("missing kind"))?)
                .map_err(|e| bad(&e.to_string()))?;
        let target = Tensor::from_json(v.get("target").ok_or_else(|| bad("missing target"))?)?;
        let maps = v
            .get("maps")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing maps"))?
            .iter()
            .map(|m| LinearMap::from_json(m, target.domain(), None))
            .collect::<Result<Vec<_>>>()?;
        let source_power = v.get("sourcePower").and_then(Value::as_u64).unwrap_or(1) as usize;
        let source_id = v.get("sourceId").and_then(Value::as_str).map(str::to_string);
        Ok(Certificate { kind, source_id, source_power, target, maps, verified: false })
    }
}

/// Re-applies the certificate maps to `source^{⊗power}` and compares with the target.
pub fn verify_certificate(c: &Certificate, source: &Tensor) -> Result<bool> {
    source.domain().ensure_same(&c.target.domain())?;
    if source.order() != c.target.order() {
        return Err(Error::OrderMismatch(source.order(), c.target.order()));
    }
    let expected_maps = match c.kind {
        CertificateKind::Restriction => source.order(),
        CertificateKind::SymmetricRestriction => 1,
    };
    if c.maps.len() != expected_maps {
        return Err(Error::DimensionMismatch(format!("{} maps, expected {expected_maps}", c.maps.len())));
    }
    let powered;
    let src = if c.source_power == 1 {
        source
    } else {
        powered = source.power(c.source_power)?;
        &powered
    };
    let maps = c.leg_maps();
    for (l, m) in maps.iter().enumerate() {
        if m.cols() != src.dims()[l] || m.rows() != c.target.dims()[l] {
            return Err(Error::DimensionMismatch(format!(
                "leg {l}: map is {}x{}, source dimension {}, target dimension {}",
                m.rows(),
                m.cols(),
                src.dims()[l],
                c.target.dims()[l]
            )));
        }
    }
    if c.kind == CertificateKind::SymmetricRestriction {
        src.cubical_dim()?;
    }
    Ok(src.apply(&maps)?.approx_eq(&c.target))
}

/// Result of an exact subrank computation.
#[derive(Clone, Debug, PartialEq)]
pub struct RankCertificate {
    pub value: usize,
    pub certificate: Certificate,
    /// Candidate rows examined over all searches.
    pub examined: u64,
}

fn require_prime(domain: ScalarDomain) -> Result<u32> {
    domain
        .modulus()
        .ok_or_else(|| Error::InvalidInput("exhaustive search needs a prime field".into()))
}

fn infeasible(what: impl Into<String>, budget: u64) -> Error {
    Error::SearchInfeasible { what: what.into(), budget }
}

/// Number of vectors in `F_p^d`, or an error when it exceeds the budget.
fn space_size(p: u32, d: usize, budget: u64, what: &str) -> Result<u64> {
    let mut n: u64 = 1;
    for _ in 0..d {
        n = n.checked_mul(p as u64).filter(|&n| n <= budget).ok_or_else(|| infeasible(what, budget))?;
    }
    Ok(n)
}

/// Vector with index `n` in lexicographic order (coordinate 0 most significant).
fn decode(mut n: u64, p: u32, d: usize, out: &mut [u32]) {
    for i in (0..d).rev() {
        out[i] = (n % p as u64) as u32;
        n /= p as u64;
    }
}

fn is_normalized(v: &[u32]) -> bool {
    v.iter().find(|&&x| x != 0) == Some(&1)
}

fn is_unit(g: &Tensor) -> bool {
    g.is_cubical() && Tensor::unit(g.dims()[0], g.order(), g.domain()).map_or(false, |u| &u == g)
}

struct Branch<T> {
    count: u64,
    found: Option<T>,
}

/// Runs `n` top-level branches and reduces in index order so the outcome and
/// the count are the same for any number of workers. `branch(i, cap, stop)`
/// must report a count above `cap` when it gives up on the budget.
fn run_branches<T: Send>(
    n: usize,
    workers: usize,
    cap: u64,
    branch: impl Fn(usize, u64, &dyn Fn() -> bool) -> Branch<T> + Sync,
) -> (u64, std::result::Result<Option<T>, ()>) {
    if workers <= 1 || n <= 1 {
        let mut total = 0;
        for i in 0..n {
            let b = branch(i, cap - total, &|| false);
            total += b.count;
            if total > cap {
                return (total, Err(()));
            }
            if b.found.is_some() {
                return (total, Ok(b.found));
            }
        }
        return (total, Ok(None));
    }
    let stop_at = AtomicUsize::new(usize::MAX);
    let run = || {
        (0..n)
            .into_par_iter()
            .map(|i| {
                if i > stop_at.load(Ordering::Relaxed) {
                    return Branch { count: 0, found: None };
                }
                let stop = || i > stop_at.load(Ordering::Relaxed);
                let b = branch(i, cap, &stop);
                if b.found.is_some() || b.count > cap {
                    stop_at.fetch_min(i, Ordering::Relaxed);
                }
                b
            })
            .collect::<Vec<_>>()
    };
    let results = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    };
    let mut total = 0;
    for b in results {
        total += b.count;
        if total > cap {
            return (total, Err(()));
        }
        if b.found.is_some() {
            return (total, Ok(b.found));
        }
    }
    (total, Ok(None))
}

/// Sparse multilinear form `f(v_1, ..., v_k)` over `F_p`.
struct SparseForm {
    p: u64,
    entries: Vec<(Vec<usize>, u64)>,
}

impl SparseForm {
    fn new(f: &Tensor, p: u32) -> Self {
        let entries = f
            .nonzeros()
            .map(|(n, v)| (f.unravel(n), v.residue() as u64))
            .collect();
        SparseForm { p: p as u64, entries }
    }

    fn eval(&self, vs: &[&[u32]]) -> u32 {
        let p = self.p;
        let mut acc = 0u64;
        'entry: for (idx, val) in &self.entries {
            let mut prod = *val;
            for (v, &i) in vs.iter().zip(idx) {
                let x = v[i] as u64;
                if x == 0 {
                    continue 'entry;
                }
                prod = prod * x % p;
            }
            acc += prod;
        }
        (acc % p) as u32
    }
}


/// Index tuples in `[m+1]^k` whose largest entry is `m`, diagonal excluded.
fn new_tuples(m: usize, k: usize) -> Vec<Vec<usize>> {
    let dims = vec![m + 1; k];
    multi_indices(&dims)
        .filter(|t| t.iter().any(|&i| i == m) && t.iter().any(|&i| i != m))
        .collect()
}

struct SymState<'a> {
    form: &'a SparseForm,
    vectors: &'a [Vec<u32>],
    target: &'a [u32],
    gstr: &'a [usize],
    tuples: &'a [Vec<Vec<usize>>],
    e: usize,
    unit: bool,
    cands: &'a [&'a [usize]],
    count: u64,
    cap: u64,
    stop: &'a dyn Fn() -> bool,
}

impl SymState<'_> {
    /// Entries of the target block whose largest index is the newest row.
    fn consistent(&self, rows: &[usize]) -> bool {
        let m = rows.len() - 1;
        let mut args: Vec<&[u32]> = Vec::with_capacity(self.gstr.len());
        self.tuples[m].iter().all(|t| {
            args.clear();
            args.extend(t.iter().map(|&j| &self.vectors[rows[j]][..]));
            let want = self.target[t.iter().zip(self.gstr).map(|(i, s)| i * s).sum::<usize>()];
            self.form.eval(&args) == want
        })
    }

    fn dfs(&mut self, rows: &mut Vec<usize>) -> bool {
        let m = rows.len();
        if m == self.e {
            return true;
        }
        let list = self.cands[m];
        let start = if self.unit {
            let last = rows[m - 1];
            list.partition_point(|&c| c <= last)
        } else {
            0
        };
        for &c in &list[start..] {
            if self.count > self.cap || (self.stop)() {
                return false;
            }
            self.count += 1;
            rows.push(c);
            if self.consistent(rows) && self.dfs(rows) {
                return true;
            }
            rows.pop();
        }
        false
    }
}

/// Finds `A` with `A^{⊗k} f = g`, or `None` after an exhaustive search.
pub fn symrestriction_exists(g: &Tensor, f: &Tensor, opts: &SearchOptions) -> Result<Option<Certificate>> {
    Ok(symrestriction_search(g, f, opts)?.0)
}

fn symrestriction_search(g: &Tensor, f: &Tensor, opts: &SearchOptions) -> Result<(Option<Certificate>, u64)> {
    g.domain().ensure_same(&f.domain())?;
    if g.order() != f.order() {
        return Err(Error::OrderMismatch(g.order(), f.order()));
    }
    let e = g.cubical_dim()?;
    let d = f.cubical_dim()?;
    let p = require_prime(f.domain())?;
    let k = f.order();
    let domain = f.domain();
    let what = format!("symmetric restriction search for a {e}x{d} map over F{p}");
    let budget = opts.budget;
    if e == 0 {
        let cert = Certificate::symmetric(g.clone(), LinearMap::zeros(0, d, domain)).verified_against(f)?;
        return Ok((Some(cert), 0));
    }
    let space = space_size(p, d, budget, &what)?;
    let form = SparseForm::new(f, p);
    let target: Vec<u32> = g.data().iter().map(|v| v.residue()).collect();
    let unit = is_unit(g);
    let gstr = g.strides();
    let diag_step: usize = gstr.iter().sum();

    let mut vectors: Vec<Vec<u32>> = Vec::new();
    let mut by_diag: Vec<Vec<usize>> = vec![Vec::new(); p as usize];
    let mut buf = vec![0u32; d];
    for n in 0..space {
        decode(n, p, d, &mut buf);
        let val = form.eval(&vec![&buf[..]; k]);
        by_diag[val as usize].push(vectors.len());
        vectors.push(buf.clone());
    }
    let cands: Vec<&[usize]> = (0..e).map(|j| &by_diag[target[j * diag_step] as usize][..]).collect();
    let tuples: Vec<Vec<Vec<usize>>> = (0..e).map(|m| new_tuples(m, k)).collect();

    let (count, outcome) = run_branches(cands[0].len(), opts.workers, budget - space, |i, cap, stop| {
        let mut st = SymState {
            form: &form,
            vectors: &vectors,
            target: &target,
            gstr: &gstr,
            tuples: &tuples,
            e,
            unit,
            cands: &cands,
            count: 1,
            cap,
            stop,
        };
        let mut rows = vec![cands[0][i]];
        let ok = st.dfs(&mut rows);
        Branch { count: st.count, found: ok.then_some(rows) }
    });
    let used = space + count;
    match outcome {
        Err(()) => Err(infeasible(what, budget)),
        Ok(None) => Ok((None, used)),
        Ok(Some(rows)) => {
            let data: Vec<Scalar> =
                rows.iter().flat_map(|&c| vectors[c].iter().map(|&x| Scalar::Residue(x))).collect();
            let map = LinearMap::new(e, d, domain, data)?;
            let cert = Certificate::symmetric(g.clone(), map).verified_against(f)?;
            if !cert.verified {
                return Err(Error::Numeric("symmetric search produced an unverifiable map".into()));
            }
            Ok((Some(cert), used))
        }
    }
}

/// Shared data for the general restriction search.
struct RestrictSetup {
    p: u32,
    k: usize,
    fdims: Vec<usize>,
    gdims: Vec<usize>,
    spaces: Vec<u64>,
    unit: bool,
    domain: ScalarDomain,
    /// Target restricted to rows `0..=m` of leg `l`, flattened over legs `0..=l`: rank.
    g_ranks: Vec<Vec<usize>>,
    /// Target as a matrix (all legs but the last) x (last leg).
    g_last: LinearMap,
}

struct RestrictState<'a> {
    s: &'a RestrictSetup,
    /// `stages[l]` has maps applied on legs `0..l`.
    stages: Vec<Tensor>,
    rows: Vec<Vec<Vec<Scalar>>>,
    count: u64,
    cap: u64,
    stop: &'a dyn Fn() -> bool,
    solution: Option<Vec<LinearMap>>,
}

impl RestrictState<'_> {
    fn partial_map(&self, l: usize) -> LinearMap {
        LinearMap::from_rows(self.s.domain, &self.rows[l], self.s.fdims[l]).expect("rows have leg width")
    }

    /// Necessary condition on the rows fixed so far.
    fn prune_ok(&self, l: usize) -> bool {
        let s = self.s;
        let m = self.rows[l].len() - 1;
        let block = self.stages[l].apply_leg(l, &self.partial_map(l)).expect("dims agree");
        if l + 2 == s.k {
            // every target column must lie in the column space of the block
            let t = block.flattening(&(0..=l).collect::<Vec<_>>()).expect("proper subset");
            let e_l = s.gdims[l];
            let last = s.gdims[s.k - 1];
            let prefix = t.rows() / (m + 1);
            let mut aug = Vec::with_capacity(t.rows());
            let mut plain = Vec::with_capacity(t.rows());
            for a in 0..prefix {
                for i in 0..=m {
                    let r = a * (m + 1) + i;
                    let mut row = t.row(r).to_vec();
                    plain.push(row.clone());
                    row.extend_from_slice(s.g_last.row(a * e_l + i));
                    aug.push(row);
                }
            }
            let w = t.cols();
            crate::tensor::rank_of_rows(s.domain, plain, w) == crate::tensor::rank_of_rows(s.domain, aug, w + last)
        } else {
            let legs: Vec<usize> = (0..=l).collect();
            block.flattening_rank(&legs).expect("proper subset") >= s.g_ranks[l][m]
        }
    }

    fn dfs(&mut self, l: usize) -> bool {
        let s = self.s;
        if l + 1 == s.k {
            return self.solve_last();
        }
        if self.rows[l].len() == s.gdims[l] {
            let next = self.stages[l].apply_leg(l, &self.partial_map(l)).expect("dims agree");
            self.stages.push(next);
            let ok = self.dfs(l + 1);
            self.stages.pop();
            return ok;
        }
        let d = s.fdims[l];
        let mut buf = vec![0u32; d];
        let start = match (s.unit && l == 0, self.rows[0].last()) {
            (true, Some(prev)) => encode(prev, s.p) + 1,
            _ => 0,
        };
        for n in start..s.spaces[l] {
            decode(n, s.p, d, &mut buf);
            if s.unit {
                if buf.iter().all(|&x| x == 0) || (l == 0 && !is_normalized(&buf)) {
                    continue;
                }
            }
            if self.count > self.cap || (self.stop)() {
                return false;
            }
            self.count += 1;
            self.rows[l].push(buf.iter().map(|&x| Scalar::Residue(x)).collect());
            if self.prune_ok(l) && self.dfs(l) {
                return true;
            }
            self.rows[l].pop();
        }
        false
    }

    fn solve_last(&mut self) -> bool {
        let s = self.s;
        if self.count > self.cap {
            return false;
        }
        self.count += 1;
        let t = self.stages[s.k - 1].flattening(&(0..s.k - 1).collect::<Vec<_>>()).expect("proper subset");
        let last = s.gdims[s.k - 1];
        let mut rows = Vec::with_capacity(last);
        for j in 0..last {
            match t.solve(&s.g_last.column(j)) {
                Some(x) => rows.push(x),
                None => return false,
            }
        }
        let mut maps: Vec<LinearMap> = (0..s.k - 1).map(|l| self.partial_map(l)).collect();
        maps.push(LinearMap::from_rows(s.domain, &rows, s.fdims[s.k - 1]).expect("solution width"));
        self.solution = Some(maps);
        true
    }
}

fn encode(v: &[Scalar], p: u32) -> u64 {
    v.iter().fold(0u64, |acc, x| acc * p as u64 + x.residue() as u64)
}

/// Finds maps with `(A_1 ⊗ ... ⊗ A_k) f = g`, or `None` after an exhaustive search.
pub fn restriction_exists(g: &Tensor, f: &Tensor, opts: &SearchOptions) -> Result<Option<Certificate>> {
    Ok(restriction_search(g, f, opts)?.0)
}

fn restriction_search(g: &Tensor, f: &Tensor, opts: &SearchOptions) -> Result<(Option<Certificate>, u64)> {
    g.domain().ensure_same(&f.domain())?;
    if g.order() != f.order() {
        return Err(Error::OrderMismatch(g.order(), f.order()));
    }
    let p = require_prime(f.domain())?;
    let domain = f.domain();
    let k = f.order();
    let budget = opts.budget;
    let what = format!("restriction search of {:?} into {:?} over F{p}", g.dims(), f.dims());
    if g.is_empty() {
        let maps = g.dims().iter().zip(f.dims()).map(|(&e, &d)| LinearMap::zeros(e, d, domain)).collect();
        return Ok((Some(Certificate::restriction(g.clone(), maps).verified_against(f)?), 0));
    }
    if k == 1 {
        // g = A f for a vector f: any row with a_t = g_j / f_t works
        let found = f.nonzeros().next().map(|(t, v)| {
            let inv = domain.inv(v).expect("nonzero");
            let mut m = LinearMap::zeros(g.dims()[0], f.dims()[0], domain);
            for j in 0..g.dims()[0] {
                m.set(j, t, domain.mul(g.data()[j], inv));
            }
            m
        });
        let cert = match found {
            Some(m) => Some(Certificate::restriction(g.clone(), vec![m])),
            None if g.is_zero() => {
                Some(Certificate::restriction(g.clone(), vec![LinearMap::zeros(g.dims()[0], f.dims()[0], domain)]))
            }
            None => None,
        };
        return Ok((cert.map(|c| c.verified_against(f)).transpose()?, 1));
    }
    let spaces = (0..k - 1)
        .map(|l| space_size(p, f.dims()[l], budget, &what))
        .collect::<Result<Vec<_>>>()?;
    let unit = is_unit(g);
    let mut g_ranks = Vec::with_capacity(k - 1);
    for l in 0..k - 1 {
        let legs: Vec<usize> = (0..=l).collect();
        let ranks = (0..g.dims()[l])
            .map(|m| {
                let sel = LinearMap::selector(&(0..=m).collect::<Vec<_>>(), g.dims()[l], domain).expect("in range");
                g.apply_leg(l, &sel).and_then(|t| t.flattening_rank(&legs))
            })
            .collect::<Result<Vec<_>>>()?;
        g_ranks.push(ranks);
    }
    let setup = RestrictSetup {
        p,
        k,
        fdims: f.dims().to_vec(),
        gdims: g.dims().to_vec(),
        spaces,
        unit,
        domain,
        g_ranks,
        g_last: g.flattening(&(0..k - 1).collect::<Vec<_>>())?,
    };

    // top-level branches: admissible first rows of the first map
    let d0 = f.dims()[0];
    let mut firsts = Vec::new();
    let mut buf = vec![0u32; d0];
    for n in 0..setup.spaces[0] {
        decode(n, p, d0, &mut buf);
        if unit && !is_normalized(&buf) {
            continue;
        }
        firsts.push(buf.iter().map(|&x| Scalar::Residue(x)).collect::<Vec<_>>());
    }
    let (count, outcome) = run_branches(firsts.len(), opts.workers, budget, |i, cap, stop| {
        let mut st = RestrictState {
            s: &setup,
            stages: vec![f.clone()],
            rows: vec![Vec::new(); k - 1],
            count: 1,
            cap,
            stop,
            solution: None,
        };
        st.rows[0].push(firsts[i].clone());
        let ok = st.prune_ok(0) && st.dfs(0);
        Branch { count: st.count, found: if ok { st.solution.take() } else { None } }
    });
    match outcome {
        Err(()) => Err(infeasible(what, budget)),
        Ok(None) => Ok((None, count)),
        Ok(Some(maps)) => {
            let cert = Certificate::restriction(g.clone(), maps).verified_against(f)?;
            if !cert.verified {
                return Err(Error::Numeric("restriction search produced unverifiable maps".into()));
            }
            Ok((Some(cert), count))
        }
    }
}

/// Certificate for `⟨rank⟩ ≤ f` of a matrix over any domain: an invertible
/// `r x r` minor `M` gives `(M^{-1} S_rows) f S_colsᵀ = I`.
pub fn matrix_subrank_certificate(f: &Tensor) -> Result<RankCertificate> {
    let m = f.to_matrix()?;
    let domain = f.domain();
    let mut rows: Vec<usize> = Vec::new();
    for r in 0..m.rows() {
        let mut trial: Vec<Vec<Scalar>> = rows.iter().map(|&i| m.row(i).to_vec()).collect();
        trial.push(m.row(r).to_vec());
        if crate::tensor::rank_of_rows(domain, trial, m.cols()) > rows.len() {
            rows.push(r);
        }
    }
    let sub = LinearMap::selector(&rows, m.rows(), domain)?.compose(&m)?;
    let subt = sub.transpose();
    let mut cols: Vec<usize> = Vec::new();
    for c in 0..subt.rows() {
        let mut trial: Vec<Vec<Scalar>> = cols.iter().map(|&i| subt.row(i).to_vec()).collect();
        trial.push(subt.row(c).to_vec());
        if crate::tensor::rank_of_rows(domain, trial, subt.cols()) > cols.len() {
            cols.push(c);
        }
    }
    let r = rows.len();
    let col_sel = LinearMap::selector(&cols, m.cols(), domain)?;
    let minor = sub.compose(&col_sel.transpose())?;
    let left = minor.inverse()?.compose(&LinearMap::selector(&rows, m.rows(), domain)?)?;
    let target = Tensor::unit(r, 2, domain)?;
    let certificate = Certificate::restriction(target, vec![left, col_sel]).verified_against(f)?;
    Ok(RankCertificate { value: r, certificate, examined: 0 })
}

/// Upper bound from the single-leg flattening ranks.
fn flattening_bound(f: &Tensor) -> usize {
    if f.order() < 2 {
        return f.dims()[0];
    }
    (0..f.order()).map(|l| f.flattening_rank(&[l]).expect("valid leg")).min().unwrap_or(0)
}

/// Largest `r` with `⟨r⟩ ≤_s f`, refuting every larger candidate exhaustively
/// (values above the smallest flattening rank are refuted by rank).
pub fn symsubrank_exact(f: &Tensor, opts: &SearchOptions) -> Result<RankCertificate> {
    let d = f.cubical_dim()?;
    require_prime(f.domain())?;
    let k = f.order();
    let mut examined = 0;
    let top = flattening_bound(f).min(d);
    for r in (1..=top).rev() {
        let remaining = SearchOptions { budget: opts.budget.saturating_sub(examined), ..*opts };
        let (cert, used) = symrestriction_search(&Tensor::unit(r, k, f.domain())?, f, &remaining)
            .map_err(|e| match e {
                Error::SearchInfeasible { what, .. } => infeasible(what, opts.budget),
                e => e,
            })?;
        examined += used;
        if let Some(certificate) = cert {
            return Ok(RankCertificate { value: r, certificate, examined });
        }
    }
    let certificate =
        Certificate::symmetric(Tensor::unit(0, k, f.domain())?, LinearMap::zeros(0, d, f.domain())).verified_against(f)?;
    Ok(RankCertificate { value: 0, certificate, examined })
}

/// Largest `r` with `⟨r⟩ ≤ f`: matrix rank for order 2, exhaustive search otherwise.
pub fn subrank_exact(f: &Tensor, opts: &SearchOptions) -> Result<RankCertificate> {
    if f.order() == 2 {
        return matrix_subrank_certificate(f);
    }
    require_prime(f.domain())?;
    let k = f.order();
    let mut examined = 0;
    let top = flattening_bound(f).min(*f.dims().iter().min().unwrap_or(&0));
    for r in (1..=top).rev() {
        let remaining = SearchOptions { budget: opts.budget.saturating_sub(examined), ..*opts };
        let (cert, used) = restriction_search(&Tensor::unit(r, k, f.domain())?, f, &remaining).map_err(|e| match e {
            Error::SearchInfeasible { what, .. } => infeasible(what, opts.budget),
            e => e,
        })?;
        examined += used;
        if let Some(certificate) = cert {
            return Ok(RankCertificate { value: r, certificate, examined });
        }
    }
    let maps = f.dims().iter().map(|&d| LinearMap::zeros(0, d, f.domain())).collect();
    let certificate = Certificate::restriction(Tensor::unit(0, k, f.domain())?, maps).verified_against(f)?;
    Ok(RankCertificate { value: 0, certificate, examined })
}

/// Outcome of the small symmetric rank search.
#[derive(Clone, Debug, PartialEq)]
pub enum SymRank {
    /// `f` is the sum of the `k`-th powers of these vectors and no fewer suffice.
    Exact { rank: usize, vectors: Vec<Vec<Scalar>> },
    /// The budget ran out; every value below `lower` is refuted.
    Unknown { lower: usize, examined: u64 },
}

/// Values of a symmetric tensor on sorted index multisets.
struct SymCoords {
    tuples: Vec<Vec<usize>>,
}

impl SymCoords {
    fn new(d: usize, k: usize) -> Self {
        let mut tuples = Vec::new();
        let mut cur = vec![0usize; k];
        loop {
            tuples.push(cur.clone());
            // next non-decreasing tuple
            let Some(pos) = (0..k).rev().find(|&i| cur[i] + 1 < d) else { break };
            let v = cur[pos] + 1;
            for x in &mut cur[pos..] {
                *x = v;
            }
        }
        if d == 0 {
            tuples.clear();
        }
        SymCoords { tuples }
    }

    fn power(&self, v: &[u32], p: u64) -> Vec<u32> {
        self.tuples
            .iter()
            .map(|t| (t.iter().fold(1u64, |acc, &i| acc * v[i] as u64 % p)) as u32)
            .collect()
    }
}

/// Least `r` with `f = Σ_{i<r} v_i^{⊗k}` by enumerating multisets of vectors.
pub fn symrank_small(f: &Tensor, opts: &SearchOptions) -> Result<SymRank> {
    let d = f.cubical_dim()?;
    let p = require_prime(f.domain())?;
    if !f.is_symmetric()? {
        return Err(Error::NotSymmetric);
    }
    let k = f.order();
    let domain = f.domain();
    if f.is_zero() {
        return Ok(SymRank::Exact { rank: 0, vectors: Vec::new() });
    }
    let lower = if k >= 2 { f.max_flattening_rank() } else { 1 };
    let budget = opts.budget;
    let space = match space_size(p, d, budget, "symmetric rank search") {
        Ok(s) => s,
        Err(_) => return Ok(SymRank::Unknown { lower, examined: 0 }),
    };
    let coords = SymCoords::new(d, k);
    let pp = p as u64;
    let fvals: Vec<u32> = coords.tuples.iter().map(|t| f.get(t).residue()).collect();
    let mut buf = vec![0u32; d];
    let vectors: Vec<Vec<u32>> = (1..space)
        .map(|n| {
            decode(n, p, d, &mut buf);
            buf.clone()
        })
        .collect();
    let powers: Vec<Vec<u32>> = vectors.iter().map(|v| coords.power(v, pp)).collect();
    // position of the multiset (t, ..., t, i) for the residual test
    let pos_of = |t: usize, i: usize| -> usize {
        let mut key = vec![t; k];
        key[k - 1] = i;
        key.sort_unstable();
        coords.tuples.binary_search(&key).expect("sorted tuple")
    };
    let diag_pos: Vec<usize> = (0..d).map(|t| pos_of(t, t)).collect();
    let mixed_pos: Vec<Vec<usize>> = (0..d).map(|t| (0..d).map(|i| pos_of(t, i)).collect()).collect();
    let mut examined = space;

    // kth root and inverse of its (k-1)th power, per residue
    let roots: Vec<Option<u64>> = (0..p)
        .map(|a| {
            let u = domain.kth_root(Scalar::Residue(a), k as u32)?;
            domain.inv(domain.pow(u, (k - 1) as u64)).ok().map(|x| x.residue() as u64)
        })
        .collect();
    let residual_power = |res: &[u32]| -> Option<Vec<u32>> {
        let t = (0..d).find(|&t| res[diag_pos[t]] != 0)?;
        let denom = roots[res[diag_pos[t]] as usize]?;
        let u: Vec<u32> = (0..d).map(|i| (res[mixed_pos[t][i]] as u64 * denom % pp) as u32).collect();
        (coords.power(&u, pp) == res).then_some(u)
    };

    for r in lower.max(1).. {
        // multisets of r-1 vectors in non-decreasing index order
        let mut stack: Vec<usize> = Vec::with_capacity(r);
        let mut residuals: Vec<Vec<u32>> = vec![fvals.clone()];
        let found = loop_multisets(r - 1, vectors.len(), &mut stack, &mut residuals, &powers, pp, &mut examined, budget, &residual_power);
        match found {
            Err(()) => return Ok(SymRank::Unknown { lower: r, examined }),
            Ok(Some(last)) => {
                let mut out: Vec<Vec<Scalar>> = stack
                    .iter()
                    .map(|&i| vectors[i].iter().map(|&x| Scalar::Residue(x)).collect())
                    .collect();
                out.push(last.iter().map(|&x| Scalar::Residue(x)).collect());
                return Ok(SymRank::Exact { rank: r, vectors: out });
            }
            Ok(None) => {}
        }
    }
    unreachable!("the loop returns")
}

#[allow(clippy::too_many_arguments)]
fn loop_multisets(
    depth: usize,
    n: usize,
    stack: &mut Vec<usize>,
    residuals: &mut Vec<Vec<u32>>,
    powers: &[Vec<u32>],
    p: u64,
    examined: &mut u64,
    budget: u64,
    test: &dyn Fn(&[u32]) -> Option<Vec<u32>>,
) -> std::result::Result<Option<Vec<u32>>, ()> {
    if stack.len() == depth {
        *examined += 1;
        if *examined > budget {
            return Err(());
        }
        return Ok(test(residuals.last().expect("nonempty")));
    }
    let start = stack.last().copied().unwrap_or(0);
    for i in start..n {
        let res: Vec<u32> = residuals
            .last()
            .expect("nonempty")
            .iter()
            .zip(&powers[i])
            .map(|(&a, &b)| ((a as u64 + p - b as u64) % p) as u32)
            .collect();
        stack.push(i);
        residuals.push(res);
        let out = loop_multisets(depth, n, stack, residuals, powers, p, examined, budget, test)?;
        if out.is_some() {
            return Ok(out);
        }
        residuals.pop();
        stack.pop();
    }
    Ok(None)
}
