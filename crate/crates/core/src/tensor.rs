//! Dense order-k tensors and rectangular linear maps over a [`ScalarDomain`].
//!
//! Indices are 0-based and row-major (last leg fastest). The tensor product
//! merges leg indices lexicographically: `(a, b) -> a * e + b` where `e` is the
//! dimension of the right factor on that leg.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{f2, Scalar, ScalarDomain};

/// Hard cap on the number of stored entries of a dense tensor.
pub const ENTRY_CAP: usize = 1 << 24;

fn checked_size(dims: &[usize]) -> Result<usize> {
    let total: u128 = dims.iter().map(|&d| d as u128).product();
    if total > ENTRY_CAP as u128 {
        return Err(Error::TooLarge { entries: total, cap: ENTRY_CAP });
    }
    Ok(total as usize)
}

fn strides_of(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for l in (0..dims.len().saturating_sub(1)).rev() {
        s[l] = s[l + 1] * dims[l + 1];
    }
    s
}

/// Iterates over all multi-indices of `dims` in row-major order.
pub fn multi_indices(dims: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = dims.iter().product();
    let mut cur = vec![0usize; dims.len()];
    (0..total).map(move |n| {
        if n > 0 {
            for l in (0..dims.len()).rev() {
                cur[l] += 1;
                if cur[l] < dims[l] {
                    break;
                }
                cur[l] = 0;
            }
        }
        cur.clone()
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    domain: ScalarDomain,
    data: Vec<Scalar>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, domain: ScalarDomain, data: Vec<Scalar>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidInput("tensor order must be at least 1".into()));
        }
        let size = checked_size(&dims)?;
        if data.len() != size {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for dims {dims:?}",
                data.len()
            )));
        }
        for &v in &data {
            domain.check(v)?;
        }
        Ok(Tensor { dims, domain, data })
    }

    pub fn zeros(dims: Vec<usize>, domain: ScalarDomain) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidInput("tensor order must be at least 1".into()));
        }
        let size = checked_size(&dims)?;
        Ok(Tensor { data: vec![domain.zero(); size], dims, domain })
    }

    pub fn from_ints(dims: Vec<usize>, domain: ScalarDomain, values: &[i64]) -> Result<Self> {
        let data = values.iter().map(|&v| domain.from_int(v)).collect();
        Tensor::new(dims, domain, data)
    }

    pub fn from_fn(
        dims: Vec<usize>,
        domain: ScalarDomain,
        mut f: impl FnMut(&[usize]) -> Scalar,
    ) -> Result<Self> {
        let mut t = Tensor::zeros(dims, domain)?;
        let dims = t.dims.clone();
        for (n, idx) in multi_indices(&dims).enumerate() {
            t.data[n] = f(&idx);
        }
        Ok(t)
    }

    /// Tensor with the given value on each listed index tuple.
    pub fn from_entries(
        dims: Vec<usize>,
        domain: ScalarDomain,
        entries: impl IntoIterator<Item = (Vec<usize>, Scalar)>,
    ) -> Result<Self> {
        let mut t = Tensor::zeros(dims, domain)?;
        for (idx, v) in entries {
            t.check_index(&idx)?;
            domain.check(v)?;
            let n = t.flat_index(&idx);
            t.data[n] = v;
        }
        Ok(t)
    }

    /// `sum_{i<r} e_i^{⊗k}`; `r = 0` gives the empty tensor with all dims 0.
    pub fn unit(r: usize, k: usize, domain: ScalarDomain) -> Result<Self> {
        let mut t = Tensor::zeros(vec![r; k], domain)?;
        let diag: usize = t.strides().iter().sum();
        for i in 0..r {
            t.data[i * diag] = domain.one();
        }
        Ok(t)
    }

    /// `v ⊗ v ⊗ ... ⊗ v` with `k` factors.
    pub fn rank_one(v: &[Scalar], k: usize, domain: ScalarDomain) -> Result<Self> {
        Tensor::from_fn(vec![v.len(); k], domain, |idx| {
            idx.iter().fold(domain.one(), |acc, &i| domain.mul(acc, v[i]))
        })
    }

    /// Random entries: uniform residues, or real and imaginary parts uniform in [-1, 1].
    pub fn random<R: Rng + ?Sized>(dims: Vec<usize>, domain: ScalarDomain, rng: &mut R) -> Result<Self> {
        Tensor::from_fn(dims, domain, |_| random_scalar(domain, rng))
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn domain(&self) -> ScalarDomain {
        self.domain
    }

    pub fn data(&self) -> &[Scalar] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.dims)
    }

    fn check_index(&self, idx: &[usize]) -> Result<()> {
        if idx.len() != self.order() || idx.iter().zip(&self.dims).any(|(&i, &d)| i >= d) {
            return Err(Error::DimensionMismatch(format!(
                "index {idx:?} outside dims {:?}",
                self.dims
            )));
        }
        Ok(())
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn unravel(&self, mut n: usize) -> Vec<usize> {
        let mut idx = vec![0; self.order()];
        for l in (0..self.order()).rev() {
            idx[l] = n % self.dims[l];
            n /= self.dims[l];
        }
        idx
    }

    pub fn get(&self, idx: &[usize]) -> Scalar {
        self.data[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: Scalar) {
        let n = self.flat_index(idx);
        self.data[n] = v;
    }

    pub fn is_cubical(&self) -> bool {
        self.dims.windows(2).all(|w| w[0] == w[1])
    }

    /// The common dimension of a cubical tensor.
    pub fn cubical_dim(&self) -> Result<usize> {
        if self.is_cubical() {
            Ok(self.dims[0])
        } else {
            Err(Error::NonCubical(self.dims.clone()))
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| self.domain.is_zero(v))
    }

    fn ensure_compatible(&self, other: &Tensor) -> Result<()> {
        self.domain.ensure_same(&other.domain)?;
        if self.order() != other.order() {
            return Err(Error::OrderMismatch(self.order(), other.order()));
        }
        Ok(())
    }

    /// Entrywise equality (complex: within the domain tolerance).
    pub fn approx_eq(&self, other: &Tensor) -> bool {
        self.domain.same_field(&other.domain)
            && self.dims == other.dims
            && self.data.iter().zip(&other.data).all(|(&a, &b)| self.domain.approx_eq(a, b))
    }

    /// Largest absolute entrywise difference (complex modulus; 0/1 for residues).
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| match self.domain {
                ScalarDomain::Prime(_) => (a != b) as u8 as f64,
                ScalarDomain::Complex { .. } => (a.complex() - b.complex()).norm(),
            })
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, c: Scalar) -> Tensor {
        let d = self.domain;
        Tensor { dims: self.dims.clone(), domain: d, data: self.data.iter().map(|&v| d.mul(c, v)).collect() }
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.ensure_compatible(other)?;
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        let d = self.domain;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| d.add(a, b)).collect();
        Ok(Tensor { dims: self.dims.clone(), domain: d, data })
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.add(&other.scale(self.domain.from_int(-1)))
    }

    pub fn tensor_product(&self, other: &Tensor) -> Result<Tensor> {
        self.ensure_compatible(other)?;
        let dims: Vec<usize> = self.dims.iter().zip(&other.dims).map(|(a, b)| a * b).collect();
        let mut out = Tensor::zeros(dims, self.domain)?;
        let ostr = out.strides();
        let d = self.domain;
        let left: Vec<(usize, Scalar)> = self
            .nonzeros()
            .map(|(n, v)| {
                let idx = self.unravel(n);
                let off = idx.iter().enumerate().map(|(l, &a)| a * other.dims[l] * ostr[l]).sum();
                (off, v)
            })
            .collect();
        let right: Vec<(usize, Scalar)> = other
            .nonzeros()
            .map(|(n, v)| {
                let idx = other.unravel(n);
                (idx.iter().enumerate().map(|(l, &b)| b * ostr[l]).sum(), v)
            })
            .collect();
        for &(a, x) in &left {
            for &(b, y) in &right {
                out.data[a + b] = d.mul(x, y);
            }
        }
        Ok(out)
    }

    /// `f^{⊗n}`; `n = 0` gives `⟨1⟩`.
    pub fn power(&self, n: usize) -> Result<Tensor> {
        let mut acc = Tensor::unit(1, self.order(), self.domain)?;
        for _ in 0..n {
            acc = acc.tensor_product(self)?;
        }
        Ok(acc)
    }

    pub fn direct_sum(&self, other: &Tensor) -> Result<Tensor> {
        self.ensure_compatible(other)?;
        let dims: Vec<usize> = self.dims.iter().zip(&other.dims).map(|(a, b)| a + b).collect();
        let mut out = Tensor::zeros(dims, self.domain)?;
        for (n, v) in self.nonzeros() {
            let idx = self.unravel(n);
            out.set(&idx, v);
        }
        for (n, v) in other.nonzeros() {
            let idx: Vec<usize> = other.unravel(n).iter().zip(&self.dims).map(|(i, d)| i + d).collect();
            out.set(&idx, v);
        }
        Ok(out)
    }

    /// Nonzero entries as (flat index, value).
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, Scalar)> + '_ {
        self.data.iter().copied().enumerate().filter(|&(_, v)| !self.domain.is_zero(v))
    }

    /// Sorted list of index tuples with nonzero entry.
    pub fn support(&self) -> Vec<Vec<usize>> {
        self.nonzeros().map(|(n, _)| self.unravel(n)).collect()
    }

    /// Applies `map` on a single leg.
    pub fn apply_leg(&self, leg: usize, map: &LinearMap) -> Result<Tensor> {
        if leg >= self.order() {
            return Err(Error::LegOutOfRange { leg, order: self.order() });
        }
        self.domain.ensure_same(&map.domain)?;
        if map.cols != self.dims[leg] {
            return Err(Error::DimensionMismatch(format!(
                "leg {leg}: map has {} columns, tensor dimension {}",
                map.cols, self.dims[leg]
            )));
        }
        let mut dims = self.dims.clone();
        dims[leg] = map.rows;
        let mut out = Tensor::zeros(dims, self.domain)?;
        let post: usize = self.dims[leg + 1..].iter().product();
        let pre: usize = self.dims[..leg].iter().product();
        let (din, dout) = (self.dims[leg], map.rows);
        let d = self.domain;
        for a in 0..pre {
            for i in 0..din {
                let src = &self.data[(a * din + i) * post..(a * din + i + 1) * post];
                if src.iter().all(|&v| d.is_zero(v)) {
                    continue;
                }
                for j in 0..dout {
                    let m = map.get(j, i);
                    if d.is_zero(m) {
                        continue;
                    }
                    let dst = &mut out.data[(a * dout + j) * post..(a * dout + j + 1) * post];
                    for (o, &s) in dst.iter_mut().zip(src) {
                        *o = d.add(*o, d.mul(m, s));
                    }
                }
            }
        }
        Ok(out)
    }

    /// `(A_1 ⊗ ... ⊗ A_k) f`.
    pub fn apply(&self, maps: &[LinearMap]) -> Result<Tensor> {
        if maps.len() != self.order() {
            return Err(Error::OrderMismatch(maps.len(), self.order()));
        }
        for (l, m) in maps.iter().enumerate() {
            if m.cols != self.dims[l] {
                return Err(Error::DimensionMismatch(format!(
                    "leg {l}: map has {} columns, tensor dimension {}",
                    m.cols, self.dims[l]
                )));
            }
        }
        // contract the most shrinking legs first
        let mut order: Vec<usize> = (0..maps.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = maps[a].rows as f64 / maps[a].cols.max(1) as f64;
            let rb = maps[b].rows as f64 / maps[b].cols.max(1) as f64;
            ra.partial_cmp(&rb).unwrap().then(a.cmp(&b))
        });
        let mut cur = self.clone();
        for l in order {
            cur = cur.apply_leg(l, &maps[l])?;
        }
        Ok(cur)
    }

    /// `A^{⊗k} f`.
    pub fn apply_sym(&self, map: &LinearMap) -> Result<Tensor> {
        self.cubical_dim()?;
        self.apply(&vec![map.clone(); self.order()])
    }

    /// Output satisfies `g[i_{π(0)}, ..., i_{π(k-1)}] = f[i_0, ..., i_{k-1}]`.
    pub fn permute_legs(&self, perm: &[usize]) -> Result<Tensor> {
        let k = self.order();
        let mut seen = vec![false; k];
        if perm.len() != k || perm.iter().any(|&p| p >= k || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidInput(format!("{perm:?} is not a permutation of {k} legs")));
        }
        let dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let mut out = Tensor::zeros(dims, self.domain)?;
        let ostr = out.strides();
        for (n, v) in self.data.iter().enumerate() {
            let idx = self.unravel(n);
            let m: usize = perm.iter().zip(&ostr).map(|(&p, s)| idx[p] * s).sum();
            out.data[m] = *v;
        }
        Ok(out)
    }

    /// Invariance under every leg permutation (adjacent swaps generate them all).
    pub fn is_symmetric(&self) -> Result<bool> {
        self.cubical_dim()?;
        let k = self.order();
        for l in 0..k.saturating_sub(1) {
            let mut perm: Vec<usize> = (0..k).collect();
            perm.swap(l, l + 1);
            if !self.permute_legs(&perm)?.approx_eq(self) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Matrix with rows indexed by the legs in `rows` and columns by the rest.
    pub fn flattening(&self, rows: &[usize]) -> Result<LinearMap> {
        let k = self.order();
        let mut sorted = rows.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.is_empty() || sorted.len() >= k || sorted.len() != rows.len() || sorted[sorted.len() - 1] >= k {
            return Err(Error::InvalidSubset(rows.to_vec()));
        }
        let cols: Vec<usize> = (0..k).filter(|l| !sorted.contains(l)).collect();
        let nr: usize = sorted.iter().map(|&l| self.dims[l]).product();
        let nc: usize = cols.iter().map(|&l| self.dims[l]).product();
        let mut m = LinearMap::zeros(nr, nc, self.domain);
        for (n, v) in self.nonzeros() {
            let idx = self.unravel(n);
            let r = sorted.iter().fold(0, |acc, &l| acc * self.dims[l] + idx[l]);
            let c = cols.iter().fold(0, |acc, &l| acc * self.dims[l] + idx[l]);
            m.set(r, c, v);
        }
        Ok(m)
    }

    pub fn flattening_rank(&self, rows: &[usize]) -> Result<usize> {
        Ok(self.flattening(rows)?.rank())
    }

    /// Maximum rank over all single-leg flattenings.
    pub fn max_flattening_rank(&self) -> usize {
        if self.order() < 2 {
            return usize::from(!self.is_zero());
        }
        (0..self.order()).map(|l| self.flattening_rank(&[l]).unwrap()).max().unwrap_or(0)
    }

    /// Rank of an order-2 tensor.
    pub fn matrix_rank(&self) -> Result<usize> {
        Ok(self.to_matrix()?.rank())
    }

    pub fn to_matrix(&self) -> Result<LinearMap> {
        if self.order() != 2 {
            return Err(Error::OrderMismatch(self.order(), 2));
        }
        Ok(LinearMap { rows: self.dims[0], cols: self.dims[1], domain: self.domain, data: self.data.clone() })
    }

    /// Euclidean norm (complex domain).
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|&v| self.domain.to_complex(v).norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn to_complex_vec(&self) -> Vec<Complex64> {
        self.data.iter().map(|&v| self.domain.to_complex(v)).collect()
    }
}

pub fn random_scalar<R: Rng + ?Sized>(domain: ScalarDomain, rng: &mut R) -> Scalar {
    match domain {
        ScalarDomain::Prime(p) => Scalar::Residue(rng.gen_range(0..p)),
        ScalarDomain::Complex { .. } => {
            Scalar::Complex(Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        }
    }
}

/// Dense `rows x cols` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    rows: usize,
    cols: usize,
    domain: ScalarDomain,
    data: Vec<Scalar>,
}

impl LinearMap {
    pub fn new(rows: usize, cols: usize, domain: ScalarDomain, data: Vec<Scalar>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!("{} entries for a {rows}x{cols} map", data.len())));
        }
        for &v in &data {
            domain.check(v)?;
        }
        Ok(LinearMap { rows, cols, domain, data })
    }

    pub fn zeros(rows: usize, cols: usize, domain: ScalarDomain) -> Self {
        LinearMap { rows, cols, domain, data: vec![domain.zero(); rows * cols] }
    }

    pub fn identity(n: usize, domain: ScalarDomain) -> Self {
        let mut m = LinearMap::zeros(n, n, domain);
        for i in 0..n {
            m.set(i, i, domain.one());
        }
        m
    }

    pub fn from_ints(rows: usize, cols: usize, domain: ScalarDomain, values: &[i64]) -> Result<Self> {
        LinearMap::new(rows, cols, domain, values.iter().map(|&v| domain.from_int(v)).collect())
    }

    pub fn from_rows(domain: ScalarDomain, rows: &[Vec<Scalar>], cols: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!("row of length {} in a map with {cols} columns", r.len())));
            }
            data.extend_from_slice(r);
        }
        LinearMap::new(rows.len(), cols, domain, data)
    }

    /// `rows x n` map with a single one per row at the listed column.
    pub fn selector(columns: &[usize], n: usize, domain: ScalarDomain) -> Result<Self> {
        let mut m = LinearMap::zeros(columns.len(), n, domain);
        for (r, &c) in columns.iter().enumerate() {
            if c >= n {
                return Err(Error::DimensionMismatch(format!("column {c} outside {n}")));
            }
            m.set(r, c, domain.one());
        }
        Ok(m)
    }

    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, domain: ScalarDomain, rng: &mut R) -> Self {
        LinearMap { rows, cols, domain, data: (0..rows * cols).map(|_| random_scalar(domain, rng)).collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn domain(&self) -> ScalarDomain {
        self.domain
    }

    pub fn data(&self) -> &[Scalar] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Scalar {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Scalar) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Scalar] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vec<Scalar>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn column(&self, c: usize) -> Vec<Scalar> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> LinearMap {
        let mut t = LinearMap::zeros(self.cols, self.rows, self.domain);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// Matrix product `self * other`.
    pub fn compose(&self, other: &LinearMap) -> Result<LinearMap> {
        self.domain.ensure_same(&other.domain)?;
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let d = self.domain;
        let mut out = LinearMap::zeros(self.rows, other.cols, d);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if d.is_zero(a) {
                    continue;
                }
                for j in 0..other.cols {
                    let v = d.add(out.get(i, j), d.mul(a, other.get(l, j)));
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// Kronecker product, with the same index merge as [`Tensor::tensor_product`].
    pub fn kron(&self, other: &LinearMap) -> Result<LinearMap> {
        self.domain.ensure_same(&other.domain)?;
        let d = self.domain;
        let mut out = LinearMap::zeros(self.rows * other.rows, self.cols * other.cols, d);
        for a in 0..self.rows {
            for b in 0..self.cols {
                let x = self.get(a, b);
                if d.is_zero(x) {
                    continue;
                }
                for c in 0..other.rows {
                    for e in 0..other.cols {
                        out.set(a * other.rows + c, b * other.cols + e, d.mul(x, other.get(c, e)));
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &LinearMap) -> Result<LinearMap> {
        self.domain.ensure_same(&other.domain)?;
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} plus {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let d = self.domain;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| d.add(a, b)).collect();
        Ok(LinearMap { rows: self.rows, cols: self.cols, domain: d, data })
    }

    pub fn scale(&self, c: Scalar) -> LinearMap {
        let d = self.domain;
        LinearMap { rows: self.rows, cols: self.cols, domain: d, data: self.data.iter().map(|&v| d.mul(c, v)).collect() }
    }

    pub fn apply_vec(&self, v: &[Scalar]) -> Vec<Scalar> {
        let d = self.domain;
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).fold(d.zero(), |acc, (&a, &b)| d.add(acc, d.mul(a, b))))
            .collect()
    }

    pub fn approx_eq(&self, other: &LinearMap) -> bool {
        self.domain.same_field(&other.domain)
            && (self.rows, self.cols) == (other.rows, other.cols)
            && self.data.iter().zip(&other.data).all(|(&a, &b)| self.domain.approx_eq(a, b))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| self.domain.is_zero(v))
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        Tensor::new(vec![self.rows, self.cols], self.domain, self.data.clone())
    }

    pub fn rank(&self) -> usize {
        if self.domain == ScalarDomain::Prime(2) && self.cols <= 64 {
            let mut rows: Vec<u64> = (0..self.rows).map(|r| f2::pack(self.row(r).iter().map(|v| v.residue()))).collect();
            return f2::rank(&mut rows);
        }
        row_echelon(self.domain, self.row_vecs(), self.cols).len()
    }

    pub fn is_invertible(&self) -> bool {
        self.rows == self.cols && self.rank() == self.rows
    }

    /// Inverse of a square map by Gauss-Jordan elimination.
    pub fn inverse(&self) -> Result<LinearMap> {
        if self.rows != self.cols {
            return Err(Error::NotInvertible);
        }
        let n = self.rows;
        let d = self.domain;
        let mut aug: Vec<Vec<Scalar>> = (0..n)
            .map(|r| {
                let mut row = self.row(r).to_vec();
                row.extend((0..n).map(|c| if c == r { d.one() } else { d.zero() }));
                row
            })
            .collect();
        for col in 0..n {
            let piv = pick_pivot(d, &aug, col, col).ok_or(Error::NotInvertible)?;
            aug.swap(col, piv);
            let inv = d.inv(aug[col][col])?;
            for v in aug[col].iter_mut() {
                *v = d.mul(*v, inv);
            }
            let pr = aug[col].clone();
            for (r, row) in aug.iter_mut().enumerate() {
                if r == col || d.is_zero(row[col]) {
                    continue;
                }
                let f = row[col];
                for (v, &p) in row.iter_mut().zip(&pr) {
                    *v = d.sub(*v, d.mul(f, p));
                }
            }
        }
        let rows: Vec<Vec<Scalar>> = aug.into_iter().map(|r| r[n..].to_vec()).collect();
        LinearMap::from_rows(d, &rows, n)
    }

    /// A solution `x` of `self * x = b` with free variables set to zero.
    pub fn solve(&self, b: &[Scalar]) -> Option<Vec<Scalar>> {
        let d = self.domain;
        let mut aug: Vec<Vec<Scalar>> = (0..self.rows)
            .map(|r| {
                let mut row = self.row(r).to_vec();
                row.push(b[r]);
                row
            })
            .collect();
        let pivots = reduce_in_place(d, &mut aug, self.cols);
        let rank = pivots.len();
        if aug[rank..].iter().any(|row| !d.is_zero(row[self.cols])) {
            return None;
        }
        let mut x = vec![d.zero(); self.cols];
        for (r, &c) in pivots.iter().enumerate() {
            x[c] = aug[r][self.cols];
        }
        Some(x)
    }
}

/// Row index of the pivot for column `col` among rows `from..`. Complex
/// entries use partial pivoting with the domain tolerance as threshold.
fn pick_pivot(d: ScalarDomain, rows: &[Vec<Scalar>], from: usize, col: usize) -> Option<usize> {
    match d {
        ScalarDomain::Prime(_) => (from..rows.len()).find(|&r| rows[r][col].residue() != 0),
        ScalarDomain::Complex { tol } => (from..rows.len())
            .map(|r| (r, rows[r][col].complex().norm()))
            .filter(|&(_, n)| n > tol)
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
            .map(|(r, _)| r),
    }
}

/// Reduced row echelon form over the first `ncols` columns; returns pivot columns.
fn reduce_in_place(d: ScalarDomain, rows: &mut [Vec<Scalar>], ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        if r == rows.len() {
            break;
        }
        let Some(p) = pick_pivot(d, rows, r, col) else { continue };
        rows.swap(r, p);
        let inv = d.inv(rows[r][col]).expect("pivot is nonzero");
        for v in rows[r].iter_mut() {
            *v = d.mul(*v, inv);
        }
        let pr = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || d.is_zero(row[col]) {
                continue;
            }
            let f = row[col];
            for (v, &q) in row.iter_mut().zip(&pr) {
                *v = d.sub(*v, d.mul(f, q));
            }
            row[col] = d.zero();
        }
        pivots.push(col);
        r += 1;
    }
    pivots
}

/// Nonzero rows of the reduced row echelon form.
pub fn row_echelon(d: ScalarDomain, mut rows: Vec<Vec<Scalar>>, ncols: usize) -> Vec<Vec<Scalar>> {
    let rank = reduce_in_place(d, &mut rows, ncols).len();
    rows.truncate(rank);
    rows
}

/// Rank of a list of row vectors.
pub fn rank_of_rows(d: ScalarDomain, rows: Vec<Vec<Scalar>>, ncols: usize) -> usize {
    row_echelon(d, rows, ncols).len()
}
