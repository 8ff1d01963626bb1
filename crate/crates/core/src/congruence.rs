//! Matrix congruence `f -> B f Bᵀ`: lower-triangular forms, symmetric
//! diagonalization, the symmetric subrank of matrices, and diagonal index
//! sets inside tensor powers of triangular matrices.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::restrict::{symsubrank_exact, Certificate, SearchOptions};
use crate::scalar::{Scalar, ScalarDomain};
use crate::tensor::{random_scalar, LinearMap, Tensor};

const RESTARTS: usize = 64;
const NODES_PER_ATTEMPT: usize = 20_000;
const RANDOM_PIVOTS: usize = 32;

/// `L = B f Bᵀ` with `L` zero strictly above the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct CongruenceResult {
    pub b: LinearMap,
    pub l: Tensor,
    pub diag_nonzeros: usize,
}

impl CongruenceResult {
    pub fn to_json(&self) -> Value {
        json!({
            "B": self.b.to_json(),
            "L": self.l.to_matrix().expect("order 2").to_json(),
            "diagNonzeros": self.diag_nonzeros,
        })
    }
}

fn square(f: &Tensor) -> Result<LinearMap> {
    let m = f.to_matrix()?;
    if m.rows() != m.cols() {
        return Err(Error::NonCubical(f.dims().to_vec()));
    }
    Ok(m)
}

fn gram_is_skew_zero_diag(d: ScalarDomain, g: &[Vec<Scalar>]) -> bool {
    let n = g.len();
    (0..n).all(|i| d.is_zero(g[i][i]) && (0..i).all(|j| d.is_zero(d.add(g[i][j], g[j][i]))))
}

/// Zero diagonal and `f_ij = -f_ji`.
pub fn is_skew_zero_diag(f: &Tensor) -> bool {
    let Ok(m) = square(f) else { return false };
    let g: Vec<Vec<Scalar>> = m.row_vecs();
    gram_is_skew_zero_diag(f.domain(), &g)
}

fn bilinear(d: ScalarDomain, f: &LinearMap, x: &[Scalar], y: &[Scalar]) -> Scalar {
    let fy = f.apply_vec(y);
    x.iter().zip(&fy).fold(d.zero(), |acc, (&a, &b)| d.add(acc, d.mul(a, b)))
}

fn gram(d: ScalarDomain, f: &LinearMap, basis: &[Vec<Scalar>]) -> Vec<Vec<Scalar>> {
    basis.iter().map(|x| basis.iter().map(|y| bilinear(d, f, x, y)).collect()).collect()
}

fn is_zero_gram(d: ScalarDomain, g: &[Vec<Scalar>]) -> bool {
    g.iter().all(|r| r.iter().all(|&v| d.is_zero(v)))
}

fn combine(d: ScalarDomain, coeffs: &[Scalar], basis: &[Vec<Scalar>]) -> Vec<Scalar> {
    let n = basis[0].len();
    let mut v = vec![d.zero(); n];
    for (c, b) in coeffs.iter().zip(basis) {
        if d.is_zero(*c) {
            continue;
        }
        for (x, &y) in v.iter_mut().zip(b) {
            *x = d.add(*x, d.mul(*c, y));
        }
    }
    v
}

fn quad(d: ScalarDomain, g: &[Vec<Scalar>], c: &[Scalar]) -> Scalar {
    let mut acc = d.zero();
    for (i, row) in g.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            acc = d.add(acc, d.mul(d.mul(c[i], c[j]), v));
        }
    }
    acc
}

struct Reducer<'a> {
    d: ScalarDomain,
    f: &'a LinearMap,
    rng: ChaCha8Rng,
    nodes: usize,
}

impl Reducer<'_> {
    fn small_scalars(&self) -> Vec<Scalar> {
        let d = self.d;
        match d {
            ScalarDomain::Prime(p) => {
                let mut out: Vec<Scalar> = Vec::new();
                for c in [2, -1, 3, -2] {
                    let s = d.from_int(c);
                    if s.residue() > 1 && !out.contains(&s) && s.residue() < p {
                        out.push(s);
                    }
                }
                out
            }
            ScalarDomain::Complex { .. } => vec![
                d.from_int(-1),
                Scalar::Complex(Complex64::new(0.0, 1.0)),
                Scalar::Complex(Complex64::new(0.0, -1.0)),
                d.from_int(2),
            ],
        }
    }

    /// Pivot coefficient vectors in the order they are tried.
    fn candidates(&mut self, m: usize, g: &[Vec<Scalar>]) -> Vec<Vec<Scalar>> {
        let d = self.d;
        let unit = |i: usize| -> Vec<Scalar> { (0..m).map(|j| if j == i { d.one() } else { d.zero() }).collect() };
        let mut out: Vec<Vec<Scalar>> = (0..m).map(unit).collect();
        for i in 0..m {
            for j in i + 1..m {
                let mut c = unit(i);
                c[j] = d.one();
                out.push(c);
            }
        }
        for s in self.small_scalars() {
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        let mut c = unit(i);
                        c[j] = s;
                        out.push(c);
                    }
                }
            }
        }
        if let ScalarDomain::Complex { .. } = d {
            // largest |q| first for stability
            out.sort_by(|a, b| {
                let qa = quad(d, g, a).complex().norm();
                let qb = quad(d, g, b).complex().norm();
                qb.partial_cmp(&qa).unwrap()
            });
        }
        if let Some(p) = d.modulus() {
            if (p as f64).powi(m as i32) <= 4096.0 {
                let total = (p as u64).pow(m as u32);
                for n in 1..total {
                    let mut c = vec![d.zero(); m];
                    let mut x = n;
                    for slot in c.iter_mut().rev() {
                        *slot = Scalar::Residue((x % p as u64) as u32);
                        x /= p as u64;
                    }
                    out.push(c);
                }
            }
        }
        for _ in 0..RANDOM_PIVOTS {
            out.push((0..m).map(|_| random_scalar(d, &mut self.rng)).collect());
        }
        out
    }

    /// Ordered rows: pivots first, then a basis on which the form vanishes.
    fn reduce(&mut self, basis: Vec<Vec<Scalar>>) -> Option<Vec<Vec<Scalar>>> {
        let d = self.d;
        let g = gram(d, self.f, &basis);
        if is_zero_gram(d, &g) {
            return Some(basis);
        }
        let m = basis.len();
        for c in self.candidates(m, &g) {
            if self.nodes == 0 {
                return None;
            }
            self.nodes -= 1;
            let q = quad(d, &g, &c);
            if d.is_zero(q) {
                continue;
            }
            let v = combine(d, &c, &basis);
            let t = c.iter().position(|&x| !d.is_zero(x)).expect("q != 0");
            let qinv = d.inv(q).expect("nonzero");
            let rest: Vec<Vec<Scalar>> = (0..m)
                .filter(|&i| i != t)
                .map(|i| {
                    let coef = d.mul(bilinear(d, self.f, &v, &basis[i]), qinv);
                    basis[i].iter().zip(&v).map(|(&w, &x)| d.sub(w, d.mul(coef, x))).collect()
                })
                .collect();
            if !rest.is_empty() {
                let g2 = gram(d, self.f, &rest);
                if gram_is_skew_zero_diag(d, &g2) && !is_zero_gram(d, &g2) {
                    continue;
                }
            }
            if let Some(tail) = if rest.is_empty() { Some(rest) } else { self.reduce(rest) } {
                let mut out = vec![v];
                out.extend(tail);
                return Some(out);
            }
        }
        None
    }
}

/// Invertible `B` with `B f Bᵀ` lower triangular and exactly `rank(f)`
/// nonzero diagonal entries, which come first.
pub fn ballantine_reduce(f: &Tensor, seed: u64) -> Result<CongruenceResult> {
    let m = square(f)?;
    let d = f.domain();
    if d.modulus() == Some(2) {
        return Err(Error::DomainTooSmall(d.name()));
    }
    if is_skew_zero_diag(f) && !f.is_zero() {
        return Err(Error::SkewInput);
    }
    let n = m.rows();
    let rank = m.rank();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..=RESTARTS {
        let start = if attempt == 0 {
            LinearMap::identity(n, d).row_vecs()
        } else {
            random_invertible(n, d, &mut rng).row_vecs()
        };
        let mut red = Reducer { d, f: &m, rng: ChaCha8Rng::seed_from_u64(rng.gen()), nodes: NODES_PER_ATTEMPT };
        let Some(rows) = red.reduce(start) else { continue };
        let b = LinearMap::from_rows(d, &rows, n)?;
        if let Some(res) = finish(f, &m, b, rank) {
            return Ok(res);
        }
    }
    Err(Error::PivotSearchExhausted(RESTARTS))
}

fn random_invertible(n: usize, d: ScalarDomain, rng: &mut ChaCha8Rng) -> LinearMap {
    loop {
        let a = LinearMap::random(n, n, d, rng);
        if a.is_invertible() {
            return a;
        }
    }
}

/// Computes `L`, checks the triangular shape and the diagonal count.
fn finish(f: &Tensor, m: &LinearMap, b: LinearMap, rank: usize) -> Option<CongruenceResult> {
    let d = f.domain();
    let mut l = b.compose(m).ok()?.compose(&b.transpose()).ok()?;
    let n = l.rows();
    if let ScalarDomain::Complex { tol } = d {
        let scale = max_abs(m) * max_abs(&b).powi(2) * n as f64;
        let thresh = tol * scale.max(1.0);
        for i in 0..n {
            for j in i + 1..n {
                if l.get(i, j).complex().norm() > thresh {
                    return None;
                }
                l.set(i, j, d.zero());
            }
        }
    } else if (0..n).any(|i| (i + 1..n).any(|j| !d.is_zero(l.get(i, j)))) {
        return None;
    }
    let diag_nonzeros = (0..n).filter(|&i| !d.is_zero(l.get(i, i))).count();
    if diag_nonzeros != rank || !b.is_invertible() {
        return None;
    }
    Some(CongruenceResult { b, l: l.to_tensor().ok()?, diag_nonzeros })
}

fn max_abs(m: &LinearMap) -> f64 {
    m.data().iter().map(|&v| m.domain().to_complex(v).norm()).fold(0.0, f64::max)
}

/// Invertible `B` with `B f Bᵀ = I_r ⊕ 0` for symmetric `f`.
pub fn sym_diagonalize(f: &Tensor, seed: u64) -> Result<(LinearMap, Tensor)> {
    square(f)?;
    if !f.is_symmetric()? {
        return Err(Error::NotSymmetric);
    }
    let d = f.domain();
    let res = ballantine_reduce(f, seed)?;
    let n = res.b.rows();
    let mut b = res.b.clone();
    for i in 0..res.diag_nonzeros {
        let lii = res.l.get(&[i, i]);
        let root = d.square_root_in_field(lii)?.ok_or_else(|| Error::MissingSquareRoot {
            index: i,
            partial: (0..n).map(|j| res.l.get(&[j, j]).to_string()).collect(),
        })?;
        let s = d.inv(root)?;
        for c in 0..n {
            b.set(i, c, d.mul(s, b.get(i, c)));
        }
    }
    let dmat = b.compose(&f.to_matrix()?)?.compose(&b.transpose())?.to_tensor()?;
    Ok((b, dmat))
}

/// Symmetric subrank of a matrix: exact value or bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSymSubrank {
    pub lower: usize,
    pub upper: usize,
    /// Witness for `⟨lower⟩ ≤_s f`.
    pub certificate: Certificate,
    pub method: &'static str,
}

impl MatrixSymSubrank {
    pub fn exact(&self) -> Option<usize> {
        (self.lower == self.upper).then_some(self.lower)
    }
}

pub fn matrix_symsubrank(f: &Tensor, opts: &SearchOptions, seed: u64) -> Result<MatrixSymSubrank> {
    let m = square(f)?;
    let d = f.domain();
    let n = m.rows();
    if is_skew_zero_diag(f) {
        let certificate = Certificate::symmetric(Tensor::unit(0, 2, d)?, LinearMap::zeros(0, n, d)).verified_against(f)?;
        return Ok(MatrixSymSubrank { lower: 0, upper: 0, certificate, method: "skew" });
    }
    let rank = m.rank();
    let symmetric = f.is_symmetric()?;
    if symmetric && d.modulus() != Some(2) {
        match sym_diagonalize(f, seed) {
            Ok((b, _)) => {
                let a = LinearMap::selector(&(0..rank).collect::<Vec<_>>(), n, d)?.compose(&b)?;
                let certificate = Certificate::symmetric(Tensor::unit(rank, 2, d)?, a).verified_against(f)?;
                if certificate.verified {
                    return Ok(MatrixSymSubrank { lower: rank, upper: rank, certificate, method: "diagonalization" });
                }
            }
            Err(Error::MissingSquareRoot { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let upper = if symmetric { rank } else { rank.min(n.saturating_sub(1)) };
    let (lower, certificate) = if d.modulus() == Some(2) {
        let c = Certificate::symmetric(Tensor::unit(0, 2, d)?, LinearMap::zeros(0, n, d)).verified_against(f)?;
        (0, c)
    } else {
        principal_lower_bound(f, seed)?
    };
    if lower < upper && d.is_prime_field() {
        match symsubrank_exact(f, opts) {
            Ok(r) => {
                return Ok(MatrixSymSubrank { lower: r.value, upper: r.value, certificate: r.certificate, method: "exhaustive" })
            }
            Err(e) if e.is_resource_limit() => {}
            Err(e) => return Err(e),
        }
    }
    Ok(MatrixSymSubrank { lower, upper, certificate, method: "bounds" })
}

/// Largest principal set of the triangular form with square nonzero diagonal
/// and vanishing off-diagonal entries, scaled to the identity.
fn principal_lower_bound(f: &Tensor, seed: u64) -> Result<(usize, Certificate)> {
    let d = f.domain();
    let res = ballantine_reduce(f, seed)?;
    let n = res.b.rows();
    let roots: Vec<Option<Scalar>> = (0..n)
        .map(|i| {
            let v = res.l.get(&[i, i]);
            if d.is_zero(v) {
                None
            } else {
                d.square_root_in_field(v).ok().flatten()
            }
        })
        .collect();
    let usable: Vec<usize> = (0..n).filter(|&i| roots[i].is_some()).collect();
    let compatible = |i: usize, j: usize| d.is_zero(res.l.get(&[i, j])) && d.is_zero(res.l.get(&[j, i]));
    let mut best: Vec<usize> = Vec::new();
    if usable.len() <= 16 {
        for mask in 0u32..(1 << usable.len()) {
            if mask.count_ones() as usize <= best.len() {
                continue;
            }
            let set: Vec<usize> = (0..usable.len()).filter(|b| mask >> b & 1 == 1).map(|b| usable[b]).collect();
            if set.iter().enumerate().all(|(a, &i)| set[..a].iter().all(|&j| compatible(i, j))) {
                best = set;
            }
        }
    } else {
        for &i in &usable {
            if best.iter().all(|&j| compatible(i, j)) {
                best.push(i);
            }
        }
    }
    let rows: Vec<Vec<Scalar>> = best
        .iter()
        .map(|&i| {
            let s = d.inv(roots[i].expect("usable")).expect("nonzero root");
            res.b.row(i).iter().map(|&x| d.mul(s, x)).collect()
        })
        .collect();
    let a = LinearMap::from_rows(d, &rows, n)?;
    let cert = Certificate::symmetric(Tensor::unit(best.len(), 2, d)?, a).verified_against(f)?;
    Ok((best.len(), cert))
}

/// Index set of `n`-tuples over the pivots of a lower-triangular `L`, each
/// pivot used `n/r` times, on which `L^{⊗n}` is diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerDiagCertificate {
    pub pivots: Vec<usize>,
    pub tuples: Vec<Vec<usize>>,
    /// Row/column of each tuple in `L^{⊗n}`.
    pub merged: Vec<usize>,
    pub size: usize,
}

pub fn power_diag_certificate(l: &Tensor, n: usize) -> Result<PowerDiagCertificate> {
    let m = square(l)?;
    let d = l.domain();
    let dim = m.rows();
    if (0..dim).any(|i| (i + 1..dim).any(|j| !d.is_zero(m.get(i, j)))) {
        return Err(Error::InvalidInput("matrix is not lower triangular".into()));
    }
    let pivots: Vec<usize> = (0..dim).filter(|&i| !d.is_zero(m.get(i, i))).collect();
    let r = pivots.len();
    if r == 0 || n % r != 0 {
        return Err(Error::InvalidInput(format!("{r} pivots do not divide n = {n}")));
    }
    let each = n / r;
    let mut tuples = Vec::new();
    let mut counts = vec![0usize; r];
    let mut cur = Vec::with_capacity(n);
    typed_tuples(&pivots, each, &mut counts, &mut cur, &mut tuples);
    let merged: Vec<usize> = tuples.iter().map(|t| t.iter().fold(0, |acc, &i| acc * dim + i)).collect();
    for (a, s) in tuples.iter().enumerate() {
        for (b, t) in tuples.iter().enumerate() {
            let v = s.iter().zip(t).fold(d.one(), |acc, (&i, &j)| d.mul(acc, m.get(i, j)));
            if (a == b) == d.is_zero(v) {
                return Err(Error::Numeric(format!("entry ({a}, {b}) of the extracted block breaks diagonality")));
            }
        }
    }
    Ok(PowerDiagCertificate { size: tuples.len(), pivots, tuples, merged })
}

fn typed_tuples(
    pivots: &[usize],
    each: usize,
    counts: &mut [usize],
    cur: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if cur.len() == pivots.len() * each {
        out.push(cur.clone());
        return;
    }
    for (slot, &p) in pivots.iter().enumerate() {
        if counts[slot] < each {
            counts[slot] += 1;
            cur.push(p);
            typed_tuples(pivots, each, counts, cur, out);
            cur.pop();
            counts[slot] -= 1;
        }
    }
}
