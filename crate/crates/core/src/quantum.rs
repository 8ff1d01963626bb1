//! Density matrices of complex tensors, marginal entropies and numerical
//! maximization of marginal entropy over group orbits.
//!
//! Entropies are in bits. Values returned by the optimizers are lower
//! estimates: the best point found, never a claim about the supremum.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::ScalarDomain;
use crate::tensor::Tensor;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Eigenvalues below this count as zero in entropies.
pub const SPECTRUM_FLOOR: f64 = 1e-14;
/// Weight of `ln |det g|` added to the ascent objective.
pub const BARRIER: f64 = 1e-6;

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CMatrix {
    pub n: usize,
    pub data: Vec<C>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix { n, data: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = CMatrix::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.data[i * values.len() + i] = C::new(v, 0.0);
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> C {
        self.data[r * self.n + c]
    }

    pub fn trace(&self) -> C {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for l in 0..n {
                let a = self.data[i * n + l];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[l * n + j];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        CMatrix { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    pub fn scale(&self, s: C) -> CMatrix {
        CMatrix { n: self.n, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn adjoint(&self) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let (a, b) = (self.n, other.n);
        let n = a * b;
        let mut out = CMatrix::zeros(n);
        for i in 0..a {
            for j in 0..a {
                let s = self.data[i * a + j];
                for p in 0..b {
                    for q in 0..b {
                        out.data[(i * b + p) * n + j * b + q] = s * other.data[p * b + q];
                    }
                }
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// `ln |det|` by partial-pivot elimination; `-inf` when singular.
    pub fn log_abs_det(&self) -> f64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut acc = 0.0;
        for col in 0..n {
            let piv = (col..n).max_by(|&x, &y| a[x * n + col].norm().total_cmp(&a[y * n + col].norm())).expect("rows");
            let p = a[piv * n + col];
            if p.norm() == 0.0 {
                return f64::NEG_INFINITY;
            }
            if piv != col {
                for j in 0..n {
                    a.swap(piv * n + j, col * n + j);
                }
            }
            acc += p.norm().ln();
            for r in col + 1..n {
                let factor = a[r * n + col] / p;
                if factor != ZERO {
                    for j in col..n {
                        let v = a[col * n + j];
                        a[r * n + j] -= factor * v;
                    }
                }
            }
        }
        acc
    }

    /// `exp(self)` by scaling and squaring a Taylor series.
    pub fn expm(&self) -> CMatrix {
        let norm = self.frobenius();
        let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
        let a = self.scale(C::new(0.5f64.powi(squarings as i32), 0.0));
        let mut term = CMatrix::identity(self.n);
        let mut sum = term.clone();
        for j in 1..30 {
            term = term.mul(&a).scale(C::new(1.0 / j as f64, 0.0));
            sum = sum.add(&term);
            if term.frobenius() < 1e-18 {
                break;
            }
        }
        for _ in 0..squarings {
            sum = sum.mul(&sum);
        }
        sum
    }
}

/// Eigenvalues of a Hermitian matrix, non-increasing, by cyclic Jacobi
/// rotations on its real symmetric embedding `[[A, -B], [B, A]]`.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let n = m.n;
    let size = 2 * n;
    let mut a = vec![0.0f64; size * size];
    for i in 0..n {
        for j in 0..n {
            let z = m.get(i, j);
            a[i * size + j] = z.re;
            a[(i + n) * size + j + n] = z.re;
            a[(i + n) * size + j] = z.im;
            a[i * size + j + n] = -z.im;
        }
    }
    jacobi_symmetric(&mut a, size);
    let mut ev: Vec<f64> = (0..size).map(|i| a[i * size + i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev.into_iter().step_by(2).collect()
}

fn jacobi_symmetric(a: &mut [f64], n: usize) {
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    for _sweep in 0..100 {
        if off(a) <= 1e-12 {
            return;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
}

/// Shannon entropy in bits of a probability vector.
pub fn shannon_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > SPECTRUM_FLOOR).map(|&x| x * x.log2()).sum::<f64>()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityMatrix {
    pub matrix: CMatrix,
    /// Non-increasing.
    pub spectrum: Vec<f64>,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.hermitian_defect() > 1e-12 {
            return Err(Error::Numeric(format!("not Hermitian (defect {:e})", matrix.hermitian_defect())));
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > 1e-10 {
            return Err(Error::Numeric(format!("trace {tr} is not 1")));
        }
        let spectrum = hermitian_eigenvalues(&matrix);
        Self::with_spectrum(matrix, spectrum)
    }

    fn with_spectrum(matrix: CMatrix, mut spectrum: Vec<f64>) -> Result<Self> {
        if let Some(&low) = spectrum.last() {
            if low < -1e-10 {
                return Err(Error::Numeric(format!("negative eigenvalue {low:e}")));
            }
        }
        for x in &mut spectrum {
            *x = x.max(0.0);
        }
        Ok(DensityMatrix { matrix, spectrum })
    }

    pub fn dim(&self) -> usize {
        self.matrix.n
    }

    pub fn entropy(&self) -> f64 {
        vn_entropy(self)
    }
}

pub fn vn_entropy(rho: &DensityMatrix) -> f64 {
    shannon_bits(&rho.spectrum)
}

/// Complex tensor data in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct CTensor {
    pub dims: Vec<usize>,
    pub data: Vec<C>,
}

impl CTensor {
    pub fn from_tensor(f: &Tensor) -> Result<Self> {
        if f.domain().is_prime_field() {
            return Err(Error::DomainMismatch("C".into(), f.domain().name()));
        }
        Ok(CTensor { dims: f.dims().to_vec(), data: f.to_complex_vec() })
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        let d = ScalarDomain::complex();
        Tensor::new(self.dims.clone(), d, self.data.iter().map(|&z| crate::scalar::Scalar::Complex(z)).collect())
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroTensor);
        }
        Ok(CTensor { dims: self.dims.clone(), data: self.data.iter().map(|z| z / n).collect() })
    }

    fn split(&self, leg: usize) -> (usize, usize, usize) {
        let outer = self.dims[..leg].iter().product();
        let inner = self.dims[leg + 1..].iter().product();
        (outer, self.dims[leg], inner)
    }

    pub fn apply_leg(&self, leg: usize, g: &CMatrix) -> CTensor {
        let (outer, d, inner) = self.split(leg);
        let mut out = vec![ZERO; self.data.len()];
        for o in 0..outer {
            for a in 0..d {
                let dst = (o * d + a) * inner;
                for b in 0..d {
                    let s = g.data[a * d + b];
                    if s == ZERO {
                        continue;
                    }
                    let src = (o * d + b) * inner;
                    for i in 0..inner {
                        out[dst + i] += s * self.data[src + i];
                    }
                }
            }
        }
        CTensor { dims: self.dims.clone(), data: out }
    }

    pub fn apply(&self, maps: &[CMatrix]) -> CTensor {
        maps.iter().enumerate().fold(self.clone(), |t, (leg, g)| t.apply_leg(leg, g))
    }

    pub fn tensor_product(&self, other: &CTensor) -> CTensor {
        // legs pair up: index (a_l, b_l) -> a_l * e_l + b_l
        let k = self.order();
        let dims: Vec<usize> = self.dims.iter().zip(&other.dims).map(|(a, b)| a * b).collect();
        let mut data = vec![ZERO; self.data.len() * other.data.len()];
        let ta = Tensor::zeros(self.dims.clone(), ScalarDomain::complex()).expect("fits");
        let tb = Tensor::zeros(other.dims.clone(), ScalarDomain::complex()).expect("fits");
        let strides: Vec<usize> = (0..k).map(|l| dims[l + 1..].iter().product()).collect();
        for (i, &x) in self.data.iter().enumerate() {
            if x == ZERO {
                continue;
            }
            let ia = ta.unravel(i);
            for (j, &y) in other.data.iter().enumerate() {
                let ib = tb.unravel(j);
                let pos: usize = (0..k).map(|l| (ia[l] * other.dims[l] + ib[l]) * strides[l]).sum();
                data[pos] = x * y;
            }
        }
        CTensor { dims, data }
    }

    /// Marginal on one leg without normalization.
    fn raw_marginal(&self, leg: usize) -> CMatrix {
        let (outer, d, inner) = self.split(leg);
        let mut m = CMatrix::zeros(d);
        for a in 0..d {
            for b in a..d {
                let mut s = ZERO;
                for o in 0..outer {
                    let ra = (o * d + a) * inner;
                    let rb = (o * d + b) * inner;
                    for i in 0..inner {
                        s += self.data[ra + i] * self.data[rb + i].conj();
                    }
                }
                m.data[a * d + b] = s;
                m.data[b * d + a] = s.conj();
            }
        }
        m
    }
}

/// `ff†/‖f‖²` on the full space; the spectrum of a pure state is `(1, 0, ...)`.
pub fn density(f: &Tensor) -> Result<DensityMatrix> {
    let t = CTensor::from_tensor(f)?.normalized()?;
    let n = t.data.len();
    let mut m = CMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.data[i * n + j] = t.data[i] * t.data[j].conj();
        }
    }
    let mut spectrum = vec![0.0; n];
    spectrum[0] = 1.0;
    DensityMatrix::with_spectrum(m, spectrum)
}

pub fn marginal(f: &Tensor, leg: usize) -> Result<DensityMatrix> {
    if leg >= f.order() {
        return Err(Error::LegOutOfRange { leg, order: f.order() });
    }
    let t = CTensor::from_tensor(f)?.normalized()?;
    DensityMatrix::new(t.raw_marginal(leg))
}

fn marginals_of(t: &CTensor) -> Vec<CMatrix> {
    (0..t.order()).map(|l| t.raw_marginal(l)).collect()
}

/// `Σ_j ρ_j(f)`.
pub fn moment_map(f: &Tensor) -> Result<CMatrix> {
    f.cubical_dim()?;
    let t = CTensor::from_tensor(f)?.normalized()?;
    let ms = marginals_of(&t);
    Ok(ms.iter().skip(1).fold(ms[0].clone(), |acc, m| acc.add(m)))
}

/// `½ ln ‖g^{⊗k} f‖²`.
fn log_norm_objective(t: &CTensor, g: &CMatrix) -> f64 {
    let maps = vec![g.clone(); t.order()];
    t.apply(&maps).norm().ln()
}

/// `tr[μ(f) H]` and the central difference of `t -> ½ ln ‖(e^{tH})^{⊗k} f‖²`
/// at 0 with step `1e-5`.
pub fn directional_derivative_check(f: &Tensor, h: &CMatrix) -> Result<(f64, f64)> {
    let mu = moment_map(f)?;
    if h.n != mu.n {
        return Err(Error::DimensionMismatch(format!("direction is {0}x{0}, tensor legs have {1}", h.n, mu.n)));
    }
    let analytic = mu.mul(h).trace().re;
    let t = CTensor::from_tensor(f)?.normalized()?;
    let step = 1e-5;
    let plus = log_norm_objective(&t, &h.scale(C::new(step, 0.0)).expm());
    let minus = log_norm_objective(&t, &h.scale(C::new(-step, 0.0)).expm());
    Ok((analytic, (plus - minus) / (2.0 * step)))
}

/// Point of an orbit reached by the optimizer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitPoint {
    /// One map for the symmetric orbit, one per leg otherwise.
    pub maps: Vec<CMatrix>,
    /// Unit-norm transformed tensor, row-major.
    #[serde(skip)]
    pub tensor: CTensor,
    /// Spectrum of the average marginal.
    pub spectrum: Vec<f64>,
    /// Per-leg marginal entropies in bits.
    pub leg_entropies: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumOptions {
    /// Random starts in addition to the identity.
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Extra starting maps tried before the random ones.
    pub initial: Vec<Vec<CMatrix>>,
}

impl Default for QuantumOptions {
    fn default() -> Self {
        QuantumOptions { restarts: 8, seed: 0, max_iters: 300, initial: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuantumEstimate {
    /// `2^entropy` at the best point found.
    pub f_lower: f64,
    pub entropy: f64,
    pub label: &'static str,
    pub point: OrbitPoint,
    pub restarts: usize,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Index of the winning start: 0 identity, then `initial`, then random.
    pub start: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Orbit<'a> {
    Symmetric,
    Product(&'a [f64]),
}

struct Problem<'a> {
    base: &'a CTensor,
    d: usize,
    orbit: Orbit<'a>,
}

impl Problem<'_> {
    fn map_count(&self) -> usize {
        match self.orbit {
            Orbit::Symmetric => 1,
            Orbit::Product(_) => self.base.order(),
        }
    }

    fn decode(&self, x: &[f64]) -> Vec<CMatrix> {
        let dd = self.d * self.d;
        (0..self.map_count())
            .map(|m| {
                let data: Vec<C> = (0..dd).map(|i| C::new(x[2 * (m * dd + i)], x[2 * (m * dd + i) + 1])).collect();
                let g = CMatrix { n: self.d, data };
                let s = g.frobenius();
                g.scale(C::new(1.0 / s, 0.0))
            })
            .collect()
    }

    fn encode(&self, maps: &[CMatrix]) -> Vec<f64> {
        maps.iter().flat_map(|g| g.data.iter().flat_map(|z| [z.re, z.im])).collect()
    }

    fn point(&self, maps: &[CMatrix]) -> Option<(f64, OrbitPoint)> {
        let legs = match self.orbit {
            Orbit::Symmetric => vec![maps[0].clone(); self.base.order()],
            Orbit::Product(_) => maps.to_vec(),
        };
        let t = self.base.apply(&legs).normalized().ok()?;
        let ms = marginals_of(&t);
        let k = ms.len();
        let spectra: Vec<Vec<f64>> = ms.iter().map(hermitian_eigenvalues).collect();
        let leg_entropies: Vec<f64> = spectra.iter().map(|s| shannon_bits(s)).collect();
        let avg = ms.iter().skip(1).fold(ms[0].clone(), |a, m| a.add(m)).scale(C::new(1.0 / k as f64, 0.0));
        let spectrum = hermitian_eigenvalues(&avg);
        let value = match self.orbit {
            Orbit::Symmetric => shannon_bits(&spectrum),
            Orbit::Product(theta) => theta.iter().zip(&leg_entropies).map(|(w, h)| w * h).sum(),
        };
        value.is_finite().then(|| (value, OrbitPoint { maps: maps.to_vec(), tensor: t, spectrum, leg_entropies }))
    }

    fn value(&self, x: &[f64]) -> f64 {
        let maps = self.decode(x);
        let barrier: f64 = maps.iter().map(CMatrix::log_abs_det).sum();
        if !barrier.is_finite() {
            return f64::NEG_INFINITY;
        }
        match self.point(&maps) {
            Some((v, _)) => v + BARRIER * barrier,
            None => f64::NEG_INFINITY,
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        let mut y = x.to_vec();
        (0..x.len())
            .map(|i| {
                y[i] = x[i] + h;
                let up = self.value(&y);
                y[i] = x[i] - h;
                let down = self.value(&y);
                y[i] = x[i];
                let g = (up - down) / (2.0 * h);
                if g.is_finite() {
                    g
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Gradient ascent with Armijo backtracking from step 0.5.
    fn ascend(&self, start: &[CMatrix], max_iters: usize) -> Option<(f64, OrbitPoint, usize, f64)> {
        let mut x = self.encode(start);
        let mut fx = self.value(&x);
        if !fx.is_finite() {
            return None;
        }
        let mut iters = 0;
        let mut gnorm = f64::INFINITY;
        while iters < max_iters {
            let g = self.gradient(&x);
            gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gnorm < 1e-9 {
                break;
            }
            let mut step = 0.5;
            let mut moved = false;
            while step > 1e-12 {
                let y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + step * b).collect();
                let fy = self.value(&y);
                if fy.is_finite() && fy >= fx + 1e-4 * step * gnorm * gnorm {
                    x = y;
                    fx = fy;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            iters += 1;
            if !moved {
                break;
            }
        }
        let (v, p) = self.point(&self.decode(&x))?;
        Some((v, p, iters, gnorm))
    }
}

fn random_map<R: Rng>(d: usize, rng: &mut R) -> CMatrix {
    CMatrix { n: d, data: (0..d * d).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect() }
}

fn maximize(f: &Tensor, orbit: Orbit, opts: &QuantumOptions) -> Result<QuantumEstimate> {
    let d = f.cubical_dim()?;
    let k = f.order();
    if d > 6 || k > 4 || k < 2 {
        return Err(Error::GateExceeded { what: "entropy ascent shape (d <= 6, 2 <= k <= 4)".into(), size: (d.max(k)) as u128, limit: 6 });
    }
    let base = CTensor::from_tensor(f)?.normalized()?;
    let problem = Problem { base: &base, d, orbit };
    let count = problem.map_count();
    let mut starts: Vec<Vec<CMatrix>> = vec![vec![CMatrix::identity(d); count]];
    for init in &opts.initial {
        if init.len() != count || init.iter().any(|g| g.n != d) {
            return Err(Error::DimensionMismatch("initial maps do not match the orbit".into()));
        }
        starts.push(init.clone());
    }
    for i in 0..opts.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(i as u64));
        starts.push((0..count).map(|_| random_map(d, &mut rng)).collect());
    }
    let results: Vec<Option<(f64, OrbitPoint, usize, f64)>> =
        starts.par_iter().map(|s| problem.ascend(s, opts.max_iters)).collect();
    let mut best: Option<(usize, (f64, OrbitPoint, usize, f64))> = None;
    for (i, r) in results.into_iter().enumerate() {
        if let Some(r) = r {
            if best.as_ref().map_or(true, |(_, b)| r.0 > b.0) {
                best = Some((i, r));
            }
        }
    }
    let (start, (entropy, point, iterations, gradient_norm)) =
        best.ok_or_else(|| Error::Numeric("every start produced a non-finite objective".into()))?;
    Ok(QuantumEstimate {
        f_lower: entropy.exp2(),
        entropy,
        label: "lower estimate",
        point,
        restarts: opts.restarts,
        iterations,
        gradient_norm,
        start,
    })
}

/// Maximizes the entropy of the average marginal over one shared map.
pub fn sym_quantum_functional(f: &Tensor, opts: &QuantumOptions) -> Result<QuantumEstimate> {
    maximize(f, Orbit::Symmetric, opts)
}

/// Maximizes `Σ θ_i H(ρ_i)` over independent maps on each leg.
pub fn quantum_functional(f: &Tensor, theta: &[f64], opts: &QuantumOptions) -> Result<QuantumEstimate> {
    if theta.len() != f.order() || theta.iter().any(|&w| w < 0.0) || (theta.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput("weights must be a probability vector with one entry per leg".into()));
    }
    maximize(f, Orbit::Product(theta), opts)
}

pub fn uniform_quantum_functional(f: &Tensor, opts: &QuantumOptions) -> Result<QuantumEstimate> {
    let k = f.order();
    quantum_functional(f, &vec![1.0 / k as f64; k], opts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichReport {
    pub entropy_of_average: f64,
    pub average_entropy: f64,
    pub log_k: f64,
    /// `H(avg) - avg H`, at least `-1e-9`.
    pub lower_slack: f64,
    /// `avg H + log k - H(avg)`, at least `-1e-9`.
    pub upper_slack: f64,
}

/// Both pointwise inequalities `avg H ≤ H(avg) ≤ avg H + log₂ k`.
pub fn sandwich_check(point: &CTensor) -> Result<SandwichReport> {
    let t = point.normalized()?;
    let ms = marginals_of(&t);
    let k = ms.len();
    let average_entropy = ms.iter().map(|m| shannon_bits(&hermitian_eigenvalues(m))).sum::<f64>() / k as f64;
    let avg = ms.iter().skip(1).fold(ms[0].clone(), |a, m| a.add(m)).scale(C::new(1.0 / k as f64, 0.0));
    let entropy_of_average = shannon_bits(&hermitian_eigenvalues(&avg));
    let log_k = (k as f64).log2();
    let report = SandwichReport {
        entropy_of_average,
        average_entropy,
        log_k,
        lower_slack: entropy_of_average - average_entropy,
        upper_slack: average_entropy + log_k - entropy_of_average,
    };
    if report.lower_slack < -1e-9 || report.upper_slack < -1e-9 {
        return Err(Error::SandwichViolation(format!(
            "H(avg) = {entropy_of_average}, avg H = {average_entropy}, log k = {log_k}"
        )));
    }
    Ok(report)
}

/// `max_j ‖ρ_j − ρ_1‖_max`.
pub fn marginal_equality_check(f: &Tensor) -> Result<f64> {
    let t = CTensor::from_tensor(f)?.normalized()?;
    let ms = marginals_of(&t);
    if ms.iter().any(|m| m.n != ms[0].n) {
        return Err(Error::NonCubical(f.dims().to_vec()));
    }
    Ok(ms.iter().map(|m| m.max_abs_diff(&ms[0])).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn cx() -> ScalarDomain {
        ScalarDomain::complex()
    }

    fn random_unit<R: Rng>(dims: &[usize], rng: &mut R) -> CTensor {
        let n: usize = dims.iter().product();
        let t = CTensor { dims: dims.to_vec(), data: (0..n).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect() };
        t.normalized().unwrap()
    }

    #[test]
    fn jacobi_matches_known_spectra() {
        let m = CMatrix { n: 2, data: vec![C::new(2.0, 0.0), C::new(0.0, 1.0), C::new(0.0, -1.0), C::new(2.0, 0.0)] };
        let ev = hermitian_eigenvalues(&m);
        assert!((ev[0] - 3.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);
        assert_eq!(hermitian_eigenvalues(&CMatrix::diag(&[0.1, 0.7, 0.2])), vec![0.7, 0.2, 0.1]);
    }

    #[test]
    fn density_examples() {
        let e1 = Tensor::rank_one(&[cx().one(), cx().zero()], 3, cx()).unwrap();
        let rho = density(&e1).unwrap();
        assert_eq!(rho.spectrum[0], 1.0);
        assert_eq!(rho.matrix.get(0, 0), ONE);
        let u = Tensor::unit(2, 2, cx()).unwrap();
        let a = density(&u).unwrap();
        assert!((a.matrix.get(0, 3) - C::new(0.5, 0.0)).norm() < 1e-15);
        let b = density(&u.scale(cx().from_int(7))).unwrap();
        assert!(a.matrix.max_abs_diff(&b.matrix) < 1e-15);
        assert_eq!(density(&Tensor::zeros(vec![2, 2], cx()).unwrap()), Err(Error::ZeroTensor));
    }

    #[test]
    fn marginal_and_entropy_examples() {
        let u = Tensor::unit(2, 2, cx()).unwrap();
        let m = marginal(&u, 0).unwrap();
        assert!(m.matrix.max_abs_diff(&CMatrix::diag(&[0.5, 0.5])) < 1e-15);
        assert!((m.entropy() - 1.0).abs() < 1e-12);
        let w = catalog::w_tensor(cx());
        for j in 0..3 {
            let m = marginal(&w, j).unwrap();
            assert!(m.matrix.max_abs_diff(&CMatrix::diag(&[2.0 / 3.0, 1.0 / 3.0])) < 1e-15);
            let h = -(2.0f64 / 3.0) * (2.0f64 / 3.0).log2() - (1.0f64 / 3.0) * (1.0f64 / 3.0).log2();
            assert!((m.entropy() - h).abs() < 1e-12);
        }
        let e1 = Tensor::rank_one(&[cx().one(), cx().zero()], 3, cx()).unwrap();
        assert_eq!(marginal(&e1, 2).unwrap().entropy(), 0.0);
        assert!(matches!(marginal(&e1, 3), Err(Error::LegOutOfRange { .. })));
    }

    #[test]
    fn moment_map_examples() {
        let u = Tensor::unit(2, 2, cx()).unwrap();
        assert!(moment_map(&u).unwrap().max_abs_diff(&CMatrix::identity(2)) < 1e-15);
        let w = catalog::w_tensor(cx());
        assert!(moment_map(&w).unwrap().max_abs_diff(&CMatrix::diag(&[2.0, 1.0])) < 1e-14);
        let e1 = Tensor::rank_one(&[cx().one(), cx().zero()], 3, cx()).unwrap();
        assert!(moment_map(&e1).unwrap().max_abs_diff(&CMatrix::diag(&[3.0, 0.0])) < 1e-15);
    }

    #[test]
    fn derivative_examples() {
        let e1 = Tensor::rank_one(&[cx().one(), cx().zero()], 2, cx()).unwrap();
        let (a, n) = directional_derivative_check(&e1, &CMatrix::diag(&[1.0, -1.0])).unwrap();
        assert!((a - 2.0).abs() < 1e-12);
        assert!((a - n).abs() < 1e-6);
        let (a, n) = directional_derivative_check(&e1, &CMatrix::zeros(2)).unwrap();
        assert_eq!((a, n), (0.0, 0.0));
        let u = Tensor::unit(2, 2, cx()).unwrap();
        let h = CMatrix { n: 2, data: vec![C::new(0.3, 0.0), C::new(0.1, 0.2), C::new(0.1, -0.2), C::new(-0.3, 0.0)] };
        assert!(directional_derivative_check(&u, &h).unwrap().0.abs() < 1e-15);
    }

    #[test]
    fn expm_of_diagonal() {
        let e = CMatrix::diag(&[1.0, -2.0]).expm();
        assert!((e.get(0, 0).re - 1f64.exp()).abs() < 1e-12);
        assert!((e.get(1, 1).re - (-2f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn functional_on_units_and_products() {
        let opts = QuantumOptions { restarts: 2, ..Default::default() };
        for r in 1..=3 {
            let u = Tensor::unit(r, 3, cx()).unwrap();
            let est = sym_quantum_functional(&u, &opts).unwrap();
            assert!((est.f_lower - r as f64).abs() < 1e-6, "r = {r}: {}", est.f_lower);
            assert_eq!(est.label, "lower estimate");
        }
        let e1 = Tensor::rank_one(&[cx().one(), cx().zero()], 3, cx()).unwrap();
        assert!((sym_quantum_functional(&e1, &opts).unwrap().f_lower - 1.0).abs() < 1e-9);
    }

    #[test]
    fn functional_on_w() {
        let opts = QuantumOptions { restarts: 4, ..Default::default() };
        let w = catalog::w_tensor(cx());
        let target = 3.0 / 2f64.powf(2.0 / 3.0);
        let s = sym_quantum_functional(&w, &opts).unwrap();
        assert!((s.f_lower - target).abs() < 1e-2, "{}", s.f_lower);
        let u = uniform_quantum_functional(&w, &opts).unwrap();
        assert!((u.f_lower - target).abs() < 1e-2, "{}", u.f_lower);
    }

    #[test]
    fn functional_on_matrix_of_rank_two() {
        let m = Tensor::from_ints(vec![3, 3], cx(), &[1, 2, 0, 0, 1, 1, 1, 3, 1]).unwrap();
        assert_eq!(m.matrix_rank().unwrap(), 2);
        let est = uniform_quantum_functional(&m, &QuantumOptions { restarts: 2, ..Default::default() }).unwrap();
        assert!((est.f_lower - 2.0).abs() < 1e-3, "{}", est.f_lower);
    }

    #[test]
    fn sandwich_and_equality_examples() {
        let u = CTensor::from_tensor(&Tensor::unit(2, 2, cx()).unwrap()).unwrap();
        let r = sandwich_check(&u).unwrap();
        assert!((r.entropy_of_average - 1.0).abs() < 1e-12 && (r.average_entropy - 1.0).abs() < 1e-12);
        assert!(marginal_equality_check(&crate::symlift::fully_symmetric(3, cx())).unwrap() <= 1e-12);
        assert!(marginal_equality_check(&catalog::w_tensor(cx())).unwrap() <= 1e-12);
        let e = Tensor::from_entries(vec![2, 2], cx(), [(vec![0, 1], cx().one())]).unwrap();
        assert!((marginal_equality_check(&e).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_prime_domains() {
        let f = Tensor::unit(2, 2, ScalarDomain::prime(5).unwrap()).unwrap();
        assert!(matches!(marginal(&f, 0), Err(Error::DomainMismatch(..))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sandwich_holds(seed in any::<u64>(), k in 2usize..=3, d in 2usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_unit(&vec![d; k], &mut rng);
            prop_assert!(sandwich_check(&t).is_ok());
        }

        #[test]
        fn leg_entropy_is_additive(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_unit(&[2, 2, 2], &mut rng);
            let t = random_unit(&[2, 3, 2], &mut rng);
            let st = s.tensor_product(&t);
            for j in 0..3 {
                let h = |x: &CTensor| shannon_bits(&hermitian_eigenvalues(&x.normalized().unwrap().raw_marginal(j)));
                prop_assert!((h(&st) - h(&s) - h(&t)).abs() < 1e-9);
            }
        }

        #[test]
        fn derivative_agrees(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_unit(&[2, 2, 2], &mut rng).to_tensor().unwrap();
            let g = random_map(2, &mut rng);
            let h = g.add(&g.adjoint()).scale(C::new(0.25, 0.0));
            let (a, n) = directional_derivative_check(&t, &h).unwrap();
            prop_assert!((a - n).abs() <= 1e-5 * a.abs().max(1.0));
        }
    }
}
