//! Turning restrictions into symmetric restrictions.
//!
//! The pieces are the fully symmetric tensor `h`, its decomposition into
//! `2^{k-1}` powers, the block-diagonal lift `B = Σ_i A_i ⊗ e_i e_iᵀ`, a basis
//! change clearing diagonal support, and a coordinate selection showing
//! `f^{⊗c} ≥_s h`. Chained together they give `⟨r⟩ ≤_s f^{⊗(n+c)}` from
//! `⟨r⟩ ≤ f^{⊗n}`.

use num_complex::Complex64;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::json::scalar_to_json;
use crate::restrict::{verify_certificate, Certificate, CertificateKind};
use crate::scalar::{Scalar, ScalarDomain};
use crate::tensor::{multi_indices, LinearMap, Tensor, ENTRY_CAP};

/// `Σ_π e_{π(0)} ⊗ ... ⊗ e_{π(k-1)}` in `(F^k)^{⊗k}`.
pub fn fully_symmetric(k: usize, domain: ScalarDomain) -> Tensor {
    Tensor::from_fn(vec![k; k], domain, |idx| {
        let mut s = idx.to_vec();
        s.sort_unstable();
        if s.iter().enumerate().all(|(i, &x)| i == x) {
            domain.one()
        } else {
            domain.zero()
        }
    })
    .expect("h fits")
}

/// Weighted powers `Σ coef · v^{⊗k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaringTerm {
    pub coef: Scalar,
    pub vector: Vec<Scalar>,
}

/// `h = Σ_ε (∏ε / 2^{k-1}) (e_0 + ε_1 e_1 + ... + ε_{k-1} e_{k-1})^{⊗k}` over
/// sign vectors `ε ∈ {±1}^{k-1}`.
pub fn waring_h(k: usize, domain: ScalarDomain) -> Result<Vec<WaringTerm>> {
    if k < 2 {
        return Err(Error::InvalidInput("order must be at least 2".into()));
    }
    domain.require_char_exceeds(k)?;
    let scale = domain.inv(domain.pow(domain.from_int(2), (k - 1) as u64))?;
    let mut terms = Vec::with_capacity(1 << (k - 1));
    for mask in 0u32..(1 << (k - 1)) {
        let signs: Vec<i64> = (0..k - 1).map(|b| if mask >> (k - 2 - b) & 1 == 1 { -1 } else { 1 }).collect();
        let prod: i64 = signs.iter().product();
        let mut vector = vec![domain.one()];
        vector.extend(signs.iter().map(|&s| domain.from_int(s)));
        terms.push(WaringTerm { coef: domain.mul(domain.from_int(prod), scale), vector });
    }
    Ok(terms)
}

/// `Σ coef · v^{⊗k}`.
pub fn reconstruct(terms: &[WaringTerm], k: usize, domain: ScalarDomain) -> Result<Tensor> {
    let n = terms.first().map_or(0, |t| t.vector.len());
    let mut acc = Tensor::zeros(vec![n; k], domain)?;
    for t in terms {
        acc = acc.add(&Tensor::rank_one(&t.vector, k, domain)?.scale(t.coef))?;
    }
    Ok(acc)
}

/// `Σ_i A_i ⊗ e_i e_iᵀ`, mapping `F^{d·k}` to `F^{e·k}`.
pub fn block_lift(maps: &[LinearMap]) -> Result<LinearMap> {
    let k = maps.len();
    let first = maps.first().ok_or_else(|| Error::InvalidInput("no maps".into()))?;
    let domain = first.domain();
    let mut b = LinearMap::zeros(first.rows() * k, first.cols() * k, domain);
    for (i, a) in maps.iter().enumerate() {
        if (a.rows(), a.cols()) != (first.rows(), first.cols()) {
            return Err(Error::DimensionMismatch("lift needs maps of equal shape".into()));
        }
        let mut e = LinearMap::zeros(k, k, domain);
        e.set(i, i, domain.one());
        b = b.add(&a.kron(&e)?)?;
    }
    Ok(b)
}

/// Certificate for `g ⊗ h ≤_s f ⊗ h` from maps with `(A_1 ⊗ ... ⊗ A_k) f = g`,
/// `f` and `g` symmetric. The shared map is the block lift itself.
pub fn make_sym(maps: &[LinearMap], f: &Tensor, g: &Tensor) -> Result<Certificate> {
    let k = f.order();
    f.domain().require_char_exceeds(k)?;
    if maps.len() != k {
        return Err(Error::OrderMismatch(maps.len(), k));
    }
    if !f.is_symmetric()? || !g.is_symmetric()? {
        return Err(Error::PremiseFails("source and target must be symmetric".into()));
    }
    if !f.apply(maps)?.approx_eq(g) {
        return Err(Error::PremiseFails("maps do not carry the source to the target".into()));
    }
    let h = fully_symmetric(k, f.domain());
    let b = block_lift(maps)?;
    let mut cert = Certificate::symmetric(g.tensor_product(&h)?, b);
    cert.source_id = Some("source ⊗ h".into());
    let source = f.tensor_product(&h)?;
    let cert = cert.verified_against(&source)?;
    if !cert.verified {
        return Err(Error::Numeric("lifted map failed verification".into()));
    }
    Ok(cert)
}

/// Output of [`remove_powers`]: `g = A^{⊗k} f`.
#[derive(Clone, Debug, PartialEq)]
pub struct RemovePowers {
    pub a: LinearMap,
    pub g: Tensor,
    /// Coordinate swapped into the last position before clearing.
    pub swapped: Option<usize>,
    /// `(i, ε)`: coordinate `i` cleared by `e_last -> e_last + ε e_i`.
    pub epsilons: Vec<(usize, Scalar)>,
}

fn diag_value(t: &Tensor, i: usize) -> Scalar {
    t.get(&vec![i; t.order()])
}

fn swap_map(d: usize, a: usize, b: usize, domain: ScalarDomain) -> LinearMap {
    let mut perm: Vec<usize> = (0..d).collect();
    perm.swap(a, b);
    LinearMap::selector(&perm, d, domain).expect("permutation")
}

/// Invertible `A` such that `A^{⊗k} f` has no diagonal support except
/// possibly at the last coordinate.
pub fn remove_powers(f: &Tensor) -> Result<RemovePowers> {
    let d = f.cubical_dim()?;
    let k = f.order();
    let domain = f.domain();
    domain.require_char_exceeds(k)?;
    if !f.is_symmetric()? {
        return Err(Error::NotSymmetric);
    }
    let mut a = LinearMap::identity(d, domain);
    let mut g = f.clone();
    let Some(pivot) = (0..d).rev().find(|&i| !domain.is_zero(diag_value(f, i))) else {
        return Ok(RemovePowers { a, g, swapped: None, epsilons: Vec::new() });
    };
    let last = d - 1;
    let mut swapped = None;
    if pivot != last {
        let p = swap_map(d, pivot, last, domain);
        g = g.apply_sym(&p)?;
        a = p;
        swapped = Some(pivot);
    }
    let mut epsilons = Vec::new();
    let mut failed = Vec::new();
    for i in (0..last).rev() {
        if domain.is_zero(diag_value(&g, i)) {
            continue;
        }
        // g'_{i..i} = Σ_j c_j ε^j over index tuples in {i, last}^k with j copies of last
        let mut coeffs = vec![domain.zero(); k + 1];
        for t in multi_indices(&vec![2; k]) {
            let idx: Vec<usize> = t.iter().map(|&b| if b == 1 { last } else { i }).collect();
            let j = t.iter().sum::<usize>();
            coeffs[j] = domain.add(coeffs[j], g.get(&idx));
        }
        let Some(eps) = pick_root(domain, &coeffs) else {
            failed.push(i);
            continue;
        };
        let mut m = LinearMap::identity(d, domain);
        m.set(i, last, eps);
        g = g.apply_sym(&m)?;
        a = m.compose(&a)?;
        epsilons.push((i, eps));
    }
    if !failed.is_empty() {
        failed.reverse();
        return Err(Error::MissingKthRoot(failed));
    }
    if let Some(i) = (0..last).find(|&i| !domain.is_zero(diag_value(&g, i))) {
        return Err(Error::Numeric(format!("diagonal entry {i} survived the basis change")));
    }
    Ok(RemovePowers { a, g, swapped, epsilons })
}

/// Root of `Σ c_j x^j`: smallest residue over `F_p`; over the complex
/// numbers the root closest to the real axis, then the largest real part.
fn pick_root(domain: ScalarDomain, coeffs: &[Scalar]) -> Option<Scalar> {
    let eval = |x: Scalar| coeffs.iter().rev().fold(domain.zero(), |acc, &c| domain.add(domain.mul(acc, x), c));
    match domain {
        ScalarDomain::Prime(p) => (0..p).map(Scalar::Residue).find(|&x| domain.is_zero(eval(x))),
        ScalarDomain::Complex { tol } => {
            let cs: Vec<Complex64> = coeffs.iter().map(|c| c.complex()).collect();
            let roots = complex_roots(&cs);
            roots
                .into_iter()
                .filter(|&r| domain.is_zero(eval(Scalar::Complex(r))) || poly_eval(&cs, r).norm() <= tol.sqrt())
                .min_by(|a, b| {
                    let ia = (a.im.abs() / tol).round();
                    let ib = (b.im.abs() / tol).round();
                    ia.partial_cmp(&ib).unwrap().then(b.re.partial_cmp(&a.re).unwrap())
                })
                .map(|r| Scalar::Complex(if r.im.abs() <= tol { Complex64::new(r.re, 0.0) } else { r }))
        }
    }
}

fn poly_eval(c: &[Complex64], x: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * x + a)
}

/// All roots by Durand-Kerner iteration with a Newton polish.
fn complex_roots(c: &[Complex64]) -> Vec<Complex64> {
    let mut c = c.to_vec();
    while c.len() > 1 && c.last().map_or(false, |x| x.norm() == 0.0) {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = c[n];
    let monic: Vec<Complex64> = c.iter().map(|&x| x / lead).collect();
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n).map(|i| seed.powu(i as u32)).collect();
    for _ in 0..2000 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            let step = poly_eval(&monic, z[i]) / denom;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    let deriv: Vec<Complex64> = (1..=n).map(|j| monic[j] * j as f64).collect();
    for r in &mut z {
        for _ in 0..5 {
            let dv = poly_eval(&deriv, *r);
            if dv.norm() == 0.0 {
                break;
            }
            *r -= poly_eval(&monic, *r) / dv;
        }
    }
    z
}

/// Witness that `f^{⊗c}` restricts symmetrically to (a multiple of) `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct CreateTCertificate {
    /// Basis change applied before selecting coordinates: `f' = A^{⊗k} f`.
    pub transform: LinearMap,
    pub remove_powers: RemovePowers,
    /// Coordinate moved to position 0.
    pub relabel: usize,
    pub y: Vec<usize>,
    /// All index tuples of type `y`, lexicographic.
    pub r_tuples: Vec<Vec<usize>>,
    /// The `k` columns of the matrix with rows `r_tuples`, each a `c`-tuple.
    pub columns: Vec<Vec<usize>>,
    pub c: usize,
    /// `λ` with `λ^k f'_y^c = 1`, when such a root exists.
    pub lambda: Option<Scalar>,
    /// `Z^{⊗k} f^{⊗c} = scale · h`.
    pub scale: Scalar,
    /// Selection map `k x d^c`, built when it fits the entry cap.
    pub map: Option<LinearMap>,
    pub sound: bool,
    /// Outcome of applying the map to the materialized power, when it fits.
    pub materialized: Option<bool>,
}

impl CreateTCertificate {
    pub fn to_json(&self) -> Value {
        json!({
            "relabel": self.relabel,
            "type": self.y,
            "R": self.r_tuples.iter().map(|t| t.iter().map(|i| i + 1).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "C": self.columns.iter().map(|t| t.iter().map(|i| i + 1).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "c": self.c,
            "transform": self.transform.to_json(),
            "lambda": self.lambda.map(scalar_to_json),
            "scale": scalar_to_json(self.scale),
            "sound": self.sound,
            "materialized": self.materialized,
            "mapBuilt": self.map.is_some(),
        })
    }
}

fn type_of(t: &[usize], d: usize) -> Vec<usize> {
    let mut y = vec![0; d];
    for &i in t {
        y[i] += 1;
    }
    y
}

/// Row `⊗_t row_{cols[t]}(a)` of length `d^c`, scaled.
fn kron_row(a: &LinearMap, cols: &[usize], s: Scalar) -> Vec<Scalar> {
    let domain = a.domain();
    let mut out = vec![s];
    for &j in cols {
        let row = a.row(j);
        out = out.iter().flat_map(|&x| row.iter().map(move |&y| domain.mul(x, y))).collect();
    }
    out
}

pub fn create_t(f: &Tensor) -> Result<CreateTCertificate> {
    let d = f.cubical_dim()?;
    let k = f.order();
    let domain = f.domain();
    domain.require_char_exceeds(k)?;
    if !f.is_symmetric()? {
        return Err(Error::NotSymmetric);
    }
    if k < 2 || f.max_flattening_rank() < 2 {
        return Err(Error::FlatteningRanksTooSmall);
    }
    let rp = remove_powers(f)?;
    let support = rp.g.support();
    let mut best: Option<(usize, usize)> = None;
    for coord in 0..d {
        let m = support.iter().map(|t| t.iter().filter(|&&i| i == coord).count()).max().unwrap_or(0);
        if (1..k).contains(&m) && best.map_or(true, |(bm, _)| m > bm) {
            best = Some((m, coord));
        }
    }
    let (m, coord) = best.ok_or(Error::NoAdmissibleType)?;
    let swap = swap_map(d, coord, 0, domain);
    let transform = swap.compose(&rp.a)?;
    let g = rp.g.apply_sym(&swap)?;
    let support = g.support();
    let y = support
        .iter()
        .map(|t| type_of(t, d))
        .filter(|y| y[0] == m)
        .min()
        .ok_or(Error::NoAdmissibleType)?;
    let r_tuples: Vec<Vec<usize>> = multi_indices(&vec![d; k]).filter(|t| type_of(t, d) == y).collect();
    let c = r_tuples.len();
    let columns: Vec<Vec<usize>> = (0..k).map(|t| r_tuples.iter().map(|row| row[t]).collect()).collect();

    let in_support = |slice: &[usize]| !domain.is_zero(g.get(slice));
    let mut sound = true;
    for pick in multi_indices(&vec![k; k]) {
        let all_in = (0..c).all(|i| in_support(&pick.iter().map(|&col| columns[col][i]).collect::<Vec<_>>()));
        let mut sorted = pick.clone();
        sorted.sort_unstable();
        let distinct = sorted.windows(2).all(|w| w[0] != w[1]);
        if all_in != distinct {
            sound = false;
            break;
        }
    }
    if !sound {
        return Err(Error::NoAdmissibleType);
    }
    let fy = g.get(&r_tuples[0]);
    let fyc = domain.pow(fy, c as u64);
    let lambda = domain.kth_root(domain.inv(fyc)?, k as u32);
    let scale = match lambda {
        Some(l) => domain.mul(domain.pow(l, k as u64), fyc),
        None => fyc,
    };
    let width = (d as u128).checked_pow(c as u32).unwrap_or(u128::MAX);
    let map = if width.saturating_mul(k as u128) <= ENTRY_CAP as u128 {
        let s = lambda.unwrap_or(domain.one());
        let rows: Vec<Vec<Scalar>> = columns.iter().map(|col| kron_row(&transform, col, s)).collect();
        Some(LinearMap::from_rows(domain, &rows, width as usize)?)
    } else {
        None
    };
    let materialized = match &map {
        Some(z) if width.checked_pow(k as u32).map_or(false, |n| n <= ENTRY_CAP as u128) => {
            let got = f.power(c)?.apply_sym(z)?;
            Some(got.approx_eq(&fully_symmetric(k, domain).scale(scale)))
        }
        _ => None,
    };
    Ok(CreateTCertificate {
        transform,
        remove_powers: rp,
        relabel: coord,
        y,
        r_tuples,
        columns,
        c,
        lambda,
        scale,
        map,
        sound,
        materialized,
    })
}

/// `⟨r⟩ ≤_s f^{⊗(n+c)}` together with the factors it was assembled from.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetrizedCertificate {
    pub certificate: Certificate,
    pub n: usize,
    pub c: usize,
    /// Maps of the input restriction `⟨r⟩ ≤ f^{⊗n}`.
    pub leg_maps: Vec<LinearMap>,
    /// Weights selecting `⟨1⟩` from `scale · h`.
    pub weights: Vec<Scalar>,
    pub create_t: CreateTCertificate,
    pub verified_by: &'static str,
}

impl SymmetrizedCertificate {
    pub fn to_json(&self) -> Value {
        let mut v = self.certificate.to_json();
        v["factorization"] = json!({
            "n": self.n,
            "c": self.c,
            "legMaps": self.leg_maps.iter().map(LinearMap::to_json).collect::<Vec<_>>(),
            "weights": self.weights.iter().map(|&w| scalar_to_json(w)).collect::<Vec<_>>(),
            "transform": self.create_t.transform.to_json(),
            "columns": self.create_t.columns,
            "lambda": self.create_t.lambda.map(scalar_to_json),
        });
        v["verifiedBy"] = json!(self.verified_by);
        v["createT"] = self.create_t.to_json();
        v
    }
}

/// Factors needed to re-check a symmetrized certificate without `f^{⊗(n+c)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Factorization {
    pub n: usize,
    pub leg_maps: Vec<LinearMap>,
    pub weights: Vec<Scalar>,
    pub transform: LinearMap,
    /// 0-based `c`-tuples.
    pub columns: Vec<Vec<usize>>,
    pub lambda: Scalar,
}

impl Factorization {
    pub fn from_json(v: &Value, domain: ScalarDomain) -> Result<Self> {
        let bad = |w: &str| Error::InvalidInput(format!("factorization JSON: {w}"));
        let n = v.get("n").and_then(Value::as_u64).ok_or_else(|| bad("n"))? as usize;
        let leg_maps = v
            .get("legMaps")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("legMaps"))?
            .iter()
            .map(|m| LinearMap::from_json(m, domain, None))
            .collect::<Result<Vec<_>>>()?;
        let weights = v
            .get("weights")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("weights"))?
            .iter()
            .map(|w| crate::json::scalar_from_json(w, domain))
            .collect::<Result<Vec<_>>>()?;
        let transform = LinearMap::from_json(v.get("transform").ok_or_else(|| bad("transform"))?, domain, None)?;
        let columns: Vec<Vec<usize>> =
            serde_json::from_value(v.get("columns").cloned().ok_or_else(|| bad("columns"))?).map_err(|e| bad(&e.to_string()))?;
        let lambda = match v.get("lambda") {
            Some(Value::Null) | None => domain.one(),
            Some(l) => crate::json::scalar_from_json(l, domain)?,
        };
        Ok(Factorization { n, leg_maps, weights, transform, columns, lambda })
    }
}

impl SymmetrizedCertificate {
    pub fn factorization(&self) -> Factorization {
        Factorization {
            n: self.n,
            leg_maps: self.leg_maps.clone(),
            weights: self.weights.clone(),
            transform: self.create_t.transform.clone(),
            columns: self.create_t.columns.clone(),
            lambda: self.create_t.lambda.unwrap_or(self.certificate.target.domain().one()),
        }
    }
}

/// The shared map `Σ_i w_i A_i ⊗ z_i` with `z_i = λ ⊗_t row_{C_i[t]}(transform)`.
fn assemble_map(fz: &Factorization) -> Result<LinearMap> {
    let mut total: Option<LinearMap> = None;
    for (i, a) in fz.leg_maps.iter().enumerate() {
        let z = kron_row(&fz.transform, &fz.columns[i], fz.lambda);
        let zi = LinearMap::from_rows(a.domain(), &[z.clone()], z.len())?;
        let term = a.scale(fz.weights[i]).kron(&zi)?;
        total = Some(match total {
            None => term,
            Some(t) => t.add(&term)?,
        });
    }
    total.ok_or_else(|| Error::InvalidInput("no leg maps".into()))
}

/// Checks `M^{⊗k} f^{⊗(n+c)} = target` through the factors, without the
/// full power: the map must equal `Σ_i w_i A_i ⊗ z_i`, and
/// `(M^{⊗k} f^{⊗(n+c)})_j = Σ_{i ∈ [k]^k} ∏w · ((A_{i_1} ⊗ ...) f^{⊗n})_j · λ^k ∏_t f'(C_{i_1}[t], ...)`.
pub fn verify_factorized(cert: &Certificate, fz: &Factorization, f: &Tensor) -> Result<bool> {
    let k = f.order();
    let domain = f.domain();
    if cert.kind != CertificateKind::SymmetricRestriction || fz.leg_maps.len() != k || fz.columns.len() != k {
        return Ok(false);
    }
    if !assemble_map(fz)?.approx_eq(&cert.maps[0]) {
        return Ok(false);
    }
    let c = fz.columns[0].len();
    if cert.source_power != fz.n + c {
        return Ok(false);
    }
    let base = f.power(fz.n)?;
    let fprime = f.apply_sym(&fz.transform)?;
    let lk = domain.pow(fz.lambda, k as u64);
    let mut total = Tensor::zeros(cert.target.dims().to_vec(), domain)?;
    for pick in multi_indices(&vec![k; k]) {
        let mut s = lk;
        for t in 0..c {
            let idx: Vec<usize> = pick.iter().map(|&i| fz.columns[i][t]).collect();
            s = domain.mul(s, fprime.get(&idx));
        }
        for &i in &pick {
            s = domain.mul(s, fz.weights[i]);
        }
        if domain.is_zero(s) {
            continue;
        }
        let maps: Vec<LinearMap> = pick.iter().map(|&i| fz.leg_maps[i].clone()).collect();
        total = total.add(&base.apply(&maps)?.scale(s))?;
    }
    Ok(total.approx_eq(&cert.target))
}

/// Symmetric certificate `⟨r⟩ ≤_s f^{⊗(n+c)}` from a restriction
/// certificate `⟨r⟩ ≤ f^{⊗n}`.
pub fn symmetrize_certificate(f: &Tensor, rc: &Certificate) -> Result<SymmetrizedCertificate> {
    let k = f.order();
    let domain = f.domain();
    domain.require_char_exceeds(k)?;
    let r = rc.target.dims().first().copied().unwrap_or(0);
    if rc.kind != CertificateKind::Restriction || rc.target != Tensor::unit(r, k, domain)? {
        return Err(Error::PremiseFails("input must be a restriction certificate for a unit tensor".into()));
    }
    let n = rc.source_power;
    if !verify_certificate(rc, f)? {
        return Err(Error::PremiseFails("input restriction does not verify".into()));
    }
    let ct = create_t(f)?;
    let base = f.power(n)?;
    // link: ⟨r⟩ ⊗ h ≤_s f^{⊗n} ⊗ h
    make_sym(&rc.maps, &base, &rc.target)?;
    let kf = domain.factorial(k);
    let mut weights = vec![domain.one(); k];
    weights[0] = domain.inv(domain.mul(kf, ct.scale))?;
    let c = ct.c;
    let fz = Factorization {
        n,
        leg_maps: rc.maps.clone(),
        weights: weights.clone(),
        transform: ct.transform.clone(),
        columns: ct.columns.clone(),
        lambda: ct.lambda.unwrap_or(domain.one()),
    };
    let map = assemble_map(&fz)?;
    let mut certificate = Certificate::symmetric(rc.target.clone(), map);
    certificate.source_power = n + c;
    let side = (f.dims()[0] as u128).checked_pow((n + c) as u32).unwrap_or(u128::MAX);
    let (ok, how) = if side.checked_pow(k as u32).map_or(false, |s| s <= ENTRY_CAP as u128) {
        (verify_certificate(&certificate, f)?, "materialized")
    } else {
        (verify_factorized(&certificate, &fz, f)?, "factorized")
    };
    certificate.verified = ok;
    if !ok {
        return Err(Error::Numeric("assembled symmetric certificate does not verify".into()));
    }
    Ok(SymmetrizedCertificate { certificate, n, c, leg_maps: rc.maps.clone(), weights, create_t: ct, verified_by: how })
}

/// Upper bound on the symmetric rank from `f ≤ ⟨r⟩`, with explicit terms.
#[derive(Clone, Debug, PartialEq)]
pub struct SymRankUpper {
    /// `r · 2^{k-1}`.
    pub from_witness: usize,
    pub bound: usize,
    pub terms: Vec<WaringTerm>,
}

/// `f = (1/k!) Σ_j B_j^{⊗k} h` where column `l` of `B_j` is column `j` of the
/// witness map `A_l`; each `B_j^{⊗k} h` expands through [`waring_h`].
pub fn symrank_upper(f: &Tensor, witness: &Certificate) -> Result<SymRankUpper> {
    let k = f.order();
    let domain = f.domain();
    domain.require_char_exceeds(k)?;
    let d = f.cubical_dim()?;
    if !f.is_symmetric()? {
        return Err(Error::NotSymmetric);
    }
    let r = witness.maps.first().map_or(0, |m| m.cols());
    let unit = Tensor::unit(r, k, domain)?;
    let valid = witness.kind == CertificateKind::Restriction
        && witness.target.approx_eq(f)
        && verify_certificate(witness, &unit).unwrap_or(false);
    if !valid {
        return Err(Error::WitnessInvalid("maps do not carry the unit tensor to the input".into()));
    }
    let wh = waring_h(k, domain)?;
    let kinv = domain.inv(domain.factorial(k))?;
    let mut terms = Vec::with_capacity(r * wh.len());
    for j in 0..r {
        let cols: Vec<Vec<Scalar>> = witness.maps.iter().map(|a| a.column(j)).collect();
        for t in &wh {
            let v: Vec<Scalar> = (0..d)
                .map(|i| (0..k).fold(domain.zero(), |acc, l| domain.add(acc, domain.mul(cols[l][i], t.vector[l]))))
                .collect();
            terms.push(WaringTerm { coef: domain.mul(kinv, t.coef), vector: v });
        }
    }
    if !reconstruct(&terms, k, domain)?.approx_eq(f) {
        return Err(Error::Numeric("assembled decomposition does not reconstruct the input".into()));
    }
    let from_witness = terms.len();
    if d == k && f.approx_eq(&fully_symmetric(k, domain)) && wh.len() < from_witness {
        return Ok(SymRankUpper { from_witness, bound: wh.len(), terms: wh });
    }
    Ok(SymRankUpper { from_witness, bound: from_witness, terms })
}

/// The `k!` permutation maps witnessing `h ≤ ⟨k!⟩`.
pub fn h_trivial_witness(k: usize, domain: ScalarDomain) -> Result<Certificate> {
    let perms: Vec<Vec<usize>> = multi_indices(&vec![k; k])
        .filter(|t| {
            let mut s = t.clone();
            s.sort_unstable();
            s.iter().enumerate().all(|(i, &x)| i == x)
        })
        .collect();
    let maps = (0..k)
        .map(|l| {
            let mut a = LinearMap::zeros(k, perms.len(), domain);
            for (j, p) in perms.iter().enumerate() {
                a.set(p[l], j, domain.one());
            }
            a
        })
        .collect();
    Ok(Certificate::restriction(fully_symmetric(k, domain), maps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::restrict::{restriction_exists, SearchOptions};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fp(p: u64) -> ScalarDomain {
        ScalarDomain::prime(p).unwrap()
    }

    #[test]
    fn fully_symmetric_examples() {
        let d = fp(5);
        assert_eq!(fully_symmetric(2, d), Tensor::from_ints(vec![2, 2], d, &[0, 1, 1, 0]).unwrap());
        assert_eq!(fully_symmetric(3, d).support().len(), 6);
        assert_eq!(fully_symmetric(4, d).support().len(), 24);
    }

    #[test]
    fn waring_examples() {
        let c = ScalarDomain::complex();
        let t = waring_h(2, c).unwrap();
        assert_eq!(t.len(), 2);
        assert!(reconstruct(&t, 2, c).unwrap().approx_eq(&fully_symmetric(2, c)));
        let t = waring_h(3, fp(7)).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(reconstruct(&t, 3, fp(7)).unwrap(), fully_symmetric(3, fp(7)));
        assert!(matches!(waring_h(3, fp(2)), Err(Error::CharacteristicTooSmall { .. })));
        assert!(matches!(waring_h(3, fp(3)), Err(Error::CharacteristicTooSmall { .. })));
    }

    #[test]
    fn make_sym_selecting_one() {
        let d = fp(5);
        let h2 = fully_symmetric(2, d);
        let a1 = LinearMap::from_ints(1, 2, d, &[1, 0]).unwrap();
        let a2 = LinearMap::from_ints(1, 2, d, &[0, 1]).unwrap();
        let g = Tensor::unit(1, 2, d).unwrap();
        let cert = make_sym(&[a1, a2], &h2, &g).unwrap();
        assert!(cert.verified);
        assert_eq!(cert.maps[0].rows(), 2);
        assert_eq!(cert.maps[0].cols(), 4);
        // the lift reproduces g ⊗ h with factor one
        let lifted = h2.tensor_product(&h2).unwrap().apply_sym(&cert.maps[0]).unwrap();
        assert_eq!(lifted, g.tensor_product(&h2).unwrap());
    }

    #[test]
    fn make_sym_guards() {
        let d = fp(2);
        let w = catalog::w_tensor(d);
        let id = LinearMap::identity(2, d);
        assert!(matches!(
            make_sym(&[id.clone(), id.clone(), id], &w, &w),
            Err(Error::CharacteristicTooSmall { .. })
        ));
        let d = fp(5);
        let w = catalog::w_tensor(d);
        let id = LinearMap::identity(2, d);
        let cert = make_sym(&[id.clone(), id.clone(), id.clone()], &w, &w).unwrap();
        assert!(cert.verified);
        let z = LinearMap::zeros(2, 2, d);
        assert!(matches!(make_sym(&[z, id.clone(), id], &w, &w), Err(Error::PremiseFails(_))));
    }

    #[test]
    fn remove_powers_examples() {
        let d = fp(5);
        let w = catalog::w_tensor(d);
        let rp = remove_powers(&w).unwrap();
        assert_eq!(rp.a, LinearMap::identity(2, d));
        assert_eq!(rp.g, w);

        let c = ScalarDomain::complex();
        let u = Tensor::unit(2, 3, c).unwrap();
        let rp = remove_powers(&u).unwrap();
        assert_eq!(rp.epsilons.len(), 1);
        let eps = rp.epsilons[0].1.complex();
        assert!((eps - Complex64::new(-1.0, 0.0)).norm() < 1e-9);
        assert!(rp.g.get(&[0, 0, 0]).complex().norm() < 1e-9);

        let u7 = Tensor::unit(2, 3, fp(7)).unwrap();
        let rp = remove_powers(&u7).unwrap();
        assert_eq!(rp.epsilons, vec![(0, Scalar::Residue(3))]);
        assert_eq!(rp.g.get(&[0, 0, 0]), Scalar::Residue(0));
    }

    #[test]
    fn remove_powers_reports_missing_roots() {
        // x^3 = -2 has no solution mod 7 (cubes are 0, 1, 6)
        let d = fp(7);
        let t = Tensor::from_entries(vec![2, 2, 2], d, [(vec![0, 0, 0], d.from_int(2)), (vec![1, 1, 1], d.one())]).unwrap();
        assert_eq!(remove_powers(&t), Err(Error::MissingKthRoot(vec![0])));
    }

    #[test]
    fn create_t_on_w() {
        let d = fp(5);
        let ct = create_t(&catalog::w_tensor(d)).unwrap();
        assert_eq!(ct.y, vec![2, 1]);
        assert_eq!(ct.r_tuples, vec![vec![0, 0, 1], vec![0, 1, 0], vec![1, 0, 0]]);
        assert_eq!(ct.c, 3);
        assert!(ct.sound);
        assert_eq!(ct.materialized, Some(true));
        assert_eq!(ct.scale, d.one());
    }

    #[test]
    fn create_t_on_h_and_rank_one() {
        let d = fp(7);
        let ct = create_t(&fully_symmetric(3, d)).unwrap();
        assert_eq!(ct.y, vec![1, 1, 1]);
        assert_eq!(ct.c, 6);
        assert!(ct.sound);
        let v = [d.one(), d.from_int(2)];
        let t = Tensor::rank_one(&v, 3, d).unwrap();
        assert_eq!(create_t(&t), Err(Error::FlatteningRanksTooSmall));
    }

    #[test]
    fn symmetrize_w_square() {
        let d = fp(5);
        let w = catalog::w_tensor(d);
        let w2 = w.power(2).unwrap();
        let mut rc = restriction_exists(&Tensor::unit(2, 3, d).unwrap(), &w2, &SearchOptions::default())
            .unwrap()
            .expect("⟨2⟩ ≤ W⊗W");
        rc.source_power = 2;
        let sc = symmetrize_certificate(&w, &rc).unwrap();
        assert_eq!(sc.certificate.source_power, 5);
        assert!(sc.certificate.verified);
        assert_eq!(sc.verified_by, "materialized");
        assert!(verify_factorized(&sc.certificate, &sc.factorization(), &w).unwrap());
    }

    #[test]
    fn symmetrize_h() {
        let d = fp(5);
        let h = fully_symmetric(3, d);
        let rc = restriction_exists(&Tensor::unit(2, 3, d).unwrap(), &h, &SearchOptions::default()).unwrap().unwrap();
        let sc = symmetrize_certificate(&h, &rc).unwrap();
        assert_eq!(sc.certificate.source_power, 7);
        assert_eq!(sc.verified_by, "factorized");
        let mut broken = sc.certificate.clone();
        let m = broken.maps[0].clone();
        broken.maps[0] = m.scale(d.from_int(2));
        assert!(!verify_factorized(&broken, &sc.factorization(), &h).unwrap());
        assert!(matches!(
            symmetrize_certificate(&Tensor::rank_one(&[d.one(), d.one()], 3, d).unwrap(), &rc),
            Err(_)
        ));
    }

    #[test]
    fn symrank_upper_examples() {
        let d = fp(7);
        let h = fully_symmetric(3, d);
        let up = symrank_upper(&h, &h_trivial_witness(3, d).unwrap()).unwrap();
        assert_eq!(up.from_witness, 24);
        assert_eq!(up.bound, 4);
        let v = [d.one(), d.from_int(3)];
        let t = Tensor::rank_one(&v, 3, d).unwrap();
        let a = LinearMap::from_rows(d, &[vec![d.one()], vec![d.from_int(3)]], 1).unwrap();
        let wit = Certificate::restriction(t.clone(), vec![a.clone(), a.clone(), a]);
        assert_eq!(symrank_upper(&t, &wit).unwrap().bound, 4);
        let c = ScalarDomain::complex();
        let m = Tensor::from_ints(vec![2, 2], c, &[1, 2, 2, 1]).unwrap();
        let rk = crate::restrict::matrix_subrank_certificate(&m).unwrap();
        let inv: Vec<LinearMap> = rk.certificate.maps.iter().map(|x| x.inverse().unwrap()).collect();
        let wit = Certificate::restriction(m.clone(), inv);
        assert_eq!(symrank_upper(&m, &wit).unwrap().bound, 4);
        let bad = Certificate::restriction(m.clone(), vec![LinearMap::zeros(2, 2, c), LinearMap::zeros(2, 2, c)]);
        assert!(matches!(symrank_upper(&m, &bad), Err(Error::WitnessInvalid(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn remove_powers_clears_diagonal(seed in any::<u64>(), which in 0usize..2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dom = [ScalarDomain::complex(), fp(7)][which];
            let n = rng.gen_range(2..=3);
            let mut f = Tensor::zeros(vec![n; 3], dom).unwrap();
            for _ in 0..3 {
                let v: Vec<Scalar> = (0..n).map(|_| crate::tensor::random_scalar(dom, &mut rng)).collect();
                f = f.add(&Tensor::rank_one(&v, 3, dom).unwrap()).unwrap();
            }
            match remove_powers(&f) {
                Ok(rp) => {
                    prop_assert!(rp.a.is_invertible());
                    prop_assert!(f.apply_sym(&rp.a).unwrap().approx_eq(&rp.g) || which == 0);
                    for i in 0..n - 1 {
                        prop_assert!(dom.is_zero(rp.g.get(&[i, i, i])));
                    }
                }
                Err(Error::MissingKthRoot(_)) => prop_assert!(which == 1),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
    }
}
