//! Scalars over a prime field `F_p` (exact residues) or the complex numbers
//! (floating point with an absolute tolerance).
//!
//! Every other module goes through [`ScalarDomain`] for arithmetic so the same
//! tensor code runs over both kinds of field.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default absolute tolerance for complex comparisons and pivoting.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Primes must stay below this bound so residues fit in `u32` products.
pub const PRIME_LIMIT: u32 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalarDomain {
    Prime(u32),
    Complex { tol: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scalar {
    Residue(u32),
    Complex(Complex64),
}

impl Scalar {
    #[inline]
    pub fn residue(self) -> u32 {
        match self {
            Scalar::Residue(r) => r,
            Scalar::Complex(c) => panic!("expected a residue, found complex {c}"),
        }
    }

    #[inline]
    pub fn complex(self) -> Complex64 {
        match self {
            Scalar::Complex(c) => c,
            Scalar::Residue(r) => panic!("expected a complex value, found residue {r}"),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Residue(r) => write!(f, "{r}"),
            Scalar::Complex(c) => write!(f, "{}{:+}i", c.re, c.im),
        }
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl ScalarDomain {
    pub fn prime(p: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if p >= PRIME_LIMIT as u64 {
            return Err(Error::PrimeOutOfRange(p));
        }
        Ok(ScalarDomain::Prime(p as u32))
    }

    pub fn complex() -> Self {
        ScalarDomain::Complex { tol: DEFAULT_TOLERANCE }
    }

    pub fn complex_with_tolerance(tol: f64) -> Result<Self> {
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
        }
        Ok(ScalarDomain::Complex { tol })
    }

    pub fn name(&self) -> String {
        match self {
            ScalarDomain::Prime(p) => format!("F{p}"),
            ScalarDomain::Complex { .. } => "C".to_string(),
        }
    }

    /// 0 for the complex numbers.
    pub fn characteristic(&self) -> u32 {
        match self {
            ScalarDomain::Prime(p) => *p,
            ScalarDomain::Complex { .. } => 0,
        }
    }

    pub fn modulus(&self) -> Option<u32> {
        match self {
            ScalarDomain::Prime(p) => Some(*p),
            ScalarDomain::Complex { .. } => None,
        }
    }

    pub fn is_prime_field(&self) -> bool {
        matches!(self, ScalarDomain::Prime(_))
    }

    pub fn tolerance(&self) -> f64 {
        match self {
            ScalarDomain::Prime(_) => 0.0,
            ScalarDomain::Complex { tol } => *tol,
        }
    }

    /// Same field, ignoring the complex tolerance.
    pub fn same_field(&self, other: &ScalarDomain) -> bool {
        match (self, other) {
            (ScalarDomain::Prime(p), ScalarDomain::Prime(q)) => p == q,
            (ScalarDomain::Complex { .. }, ScalarDomain::Complex { .. }) => true,
            _ => false,
        }
    }

    pub fn ensure_same(&self, other: &ScalarDomain) -> Result<()> {
        if self.same_field(other) {
            Ok(())
        } else {
            Err(Error::DomainMismatch(self.name(), other.name()))
        }
    }

    /// Characteristic 0 or strictly greater than `k`.
    pub fn char_exceeds(&self, k: usize) -> bool {
        let c = self.characteristic();
        c == 0 || c as usize > k
    }

    pub fn require_char_exceeds(&self, k: usize) -> Result<()> {
        if self.char_exceeds(k) {
            Ok(())
        } else {
            Err(Error::CharacteristicTooSmall { characteristic: self.characteristic(), order: k })
        }
    }

    pub fn contains(&self, a: Scalar) -> bool {
        match (self, a) {
            (ScalarDomain::Prime(p), Scalar::Residue(r)) => r < *p,
            (ScalarDomain::Complex { .. }, Scalar::Complex(c)) => c.re.is_finite() && c.im.is_finite(),
            _ => false,
        }
    }

    pub fn check(&self, a: Scalar) -> Result<Scalar> {
        if self.contains(a) {
            Ok(a)
        } else {
            Err(Error::DomainMismatch(self.name(), format!("value {a}")))
        }
    }

    #[inline]
    pub fn zero(&self) -> Scalar {
        match self {
            ScalarDomain::Prime(_) => Scalar::Residue(0),
            ScalarDomain::Complex { .. } => Scalar::Complex(Complex64::new(0.0, 0.0)),
        }
    }

    #[inline]
    pub fn one(&self) -> Scalar {
        match self {
            ScalarDomain::Prime(_) => Scalar::Residue(1),
            ScalarDomain::Complex { .. } => Scalar::Complex(Complex64::new(1.0, 0.0)),
        }
    }

    pub fn from_int(&self, n: i64) -> Scalar {
        match self {
            ScalarDomain::Prime(p) => Scalar::Residue(n.rem_euclid(*p as i64) as u32),
            ScalarDomain::Complex { .. } => Scalar::Complex(Complex64::new(n as f64, 0.0)),
        }
    }

    pub fn from_complex(&self, re: f64, im: f64) -> Result<Scalar> {
        match self {
            ScalarDomain::Complex { .. } => Ok(Scalar::Complex(Complex64::new(re, im))),
            ScalarDomain::Prime(_) => Err(Error::DomainMismatch(self.name(), "complex value".into())),
        }
    }

    #[inline]
    pub fn add(&self, a: Scalar, b: Scalar) -> Scalar {
        match self {
            ScalarDomain::Prime(p) => Scalar::Residue(((a.residue() + b.residue()) % p) as u32),
            ScalarDomain::Complex { .. } => Scalar::Complex(a.complex() + b.complex()),
        }
    }

    #[inline]
    pub fn sub(&self, a: Scalar, b: Scalar) -> Scalar {
        match self {
            ScalarDomain::Prime(p) => Scalar::Residue((a.residue() + p - b.residue()) % p),
            ScalarDomain::Complex { .. } => Scalar::Complex(a.complex() - b.complex()),
        }
    }

    #[inline]
    pub fn neg(&self, a: Scalar) -> Scalar {
        match self {
            ScalarDomain::Prime(p) => Scalar::Residue((p - a.residue()) % p),
            ScalarDomain::Complex { .. } => Scalar::Complex(-a.complex()),
        }
    }

    #[inline]
    pub fn mul(&self, a: Scalar, b: Scalar) -> Scalar {
        match self {
            ScalarDomain::Prime(p) => {
                Scalar::Residue(((a.residue() as u64 * b.residue() as u64) % *p as u64) as u32)
            }
            ScalarDomain::Complex { .. } => Scalar::Complex(a.complex() * b.complex()),
        }
    }

    pub fn pow(&self, a: Scalar, mut e: u64) -> Scalar {
        let mut base = a;
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    #[inline]
    pub fn is_zero(&self, a: Scalar) -> bool {
        match self {
            ScalarDomain::Prime(_) => a.residue() == 0,
            ScalarDomain::Complex { tol } => a.complex().norm() <= *tol,
        }
    }

    #[inline]
    pub fn approx_eq(&self, a: Scalar, b: Scalar) -> bool {
        self.is_zero(self.sub(a, b))
    }

    /// Multiplicative inverse; fails on zero (complex: within the tolerance).
    pub fn inv(&self, a: Scalar) -> Result<Scalar> {
        if self.is_zero(a) {
            return Err(Error::NotInvertible);
        }
        Ok(match self {
            ScalarDomain::Prime(p) => Scalar::Residue(inv_mod(a.residue(), *p)),
            ScalarDomain::Complex { .. } => Scalar::Complex(a.complex().inv()),
        })
    }

    pub fn div(&self, a: Scalar, b: Scalar) -> Result<Scalar> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// `field_inverse` with a domain check on the input.
    pub fn field_inverse(&self, a: Scalar) -> Result<Scalar> {
        self.inv(self.check(a)?)
    }

    /// A square root of `a`, or `None` when `a` is a non-residue.
    ///
    /// Over `F_p` the smallest residue root is returned; over the complex
    /// numbers the principal root.
    pub fn square_root_in_field(&self, a: Scalar) -> Result<Option<Scalar>> {
        let a = self.check(a)?;
        Ok(match self {
            ScalarDomain::Prime(p) => {
                let a = a.residue() as u64;
                let p = *p as u64;
                (0..p).find(|x| x * x % p == a).map(|x| Scalar::Residue(x as u32))
            }
            ScalarDomain::Complex { .. } => Some(Scalar::Complex(a.complex().sqrt())),
        })
    }

    /// All `k`-th roots of `a` over `F_p` in increasing order; over the
    /// complex numbers the `k` roots ordered by argument starting at the
    /// principal root.
    pub fn kth_roots(&self, a: Scalar, k: u32) -> Vec<Scalar> {
        match self {
            ScalarDomain::Prime(p) => {
                let target = a.residue();
                (0..*p)
                    .filter(|&x| self.pow(Scalar::Residue(x), k as u64).residue() == target)
                    .map(Scalar::Residue)
                    .collect()
            }
            ScalarDomain::Complex { .. } => {
                let c = a.complex();
                if c.norm() == 0.0 {
                    return vec![Scalar::Complex(c)];
                }
                let r = c.norm().powf(1.0 / k as f64);
                let theta = c.arg() / k as f64;
                (0..k)
                    .map(|j| {
                        let t = theta + 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                        Scalar::Complex(Complex64::from_polar(r, t))
                    })
                    .collect()
            }
        }
    }

    /// First root returned by [`Self::kth_roots`].
    pub fn kth_root(&self, a: Scalar, k: u32) -> Option<Scalar> {
        self.kth_roots(a, k).into_iter().next()
    }

    /// All field elements in increasing residue order (prime fields only).
    pub fn elements(&self) -> Option<impl Iterator<Item = Scalar>> {
        self.modulus().map(|p| (0..p).map(Scalar::Residue))
    }

    pub fn size(&self) -> Option<u64> {
        self.modulus().map(u64::from)
    }

    pub fn factorial(&self, n: usize) -> Scalar {
        (1..=n as i64).fold(self.one(), |acc, i| self.mul(acc, self.from_int(i)))
    }

    pub fn to_complex(&self, a: Scalar) -> Complex64 {
        match a {
            Scalar::Complex(c) => c,
            Scalar::Residue(r) => Complex64::new(r as f64, 0.0),
        }
    }
}

pub(crate) fn inv_mod(a: u32, p: u32) -> u32 {
    // extended Euclid on i64
    let (mut t, mut new_t) = (0i64, 1i64);
    let (mut r, mut new_r) = (p as i64, a as i64);
    while new_r != 0 {
        let q = r / new_r;
        (t, new_t) = (new_t, t - q * new_t);
        (r, new_r) = (new_r, r - q * new_r);
    }
    debug_assert_eq!(r, 1, "{a} not invertible mod {p}");
    t.rem_euclid(p as i64) as u32
}

impl fmt::Display for ScalarDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for ScalarDomain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "C" {
            return Ok(ScalarDomain::complex());
        }
        let digits = s
            .strip_prefix('F')
            .ok_or_else(|| Error::InvalidInput(format!("unknown domain {s:?}")))?;
        let p: u64 = digits
            .parse()
            .map_err(|_| Error::InvalidInput(format!("unknown domain {s:?}")))?;
        ScalarDomain::prime(p)
    }
}

impl Serialize for ScalarDomain {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for ScalarDomain {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Bit-packed vectors over `F_2` (at most 64 coordinates per word).
pub mod f2 {
    /// Packs residues (0/1) into a word, coordinate `i` at bit `i`.
    pub fn pack(bits: impl IntoIterator<Item = u32>) -> u64 {
        bits.into_iter()
            .enumerate()
            .fold(0u64, |acc, (i, b)| acc | (((b & 1) as u64) << i))
    }

    pub fn unpack(word: u64, len: usize) -> Vec<u32> {
        (0..len).map(|i| ((word >> i) & 1) as u32).collect()
    }

    #[inline]
    pub fn dot(a: u64, b: u64) -> u32 {
        (a & b).count_ones() & 1
    }

    /// Rank of packed rows by elimination; rows are consumed.
    pub fn rank(rows: &mut [u64]) -> usize {
        let mut rank = 0;
        for bit in 0..64 {
            let mask = 1u64 << bit;
            let Some(pivot) = (rank..rows.len()).find(|&i| rows[i] & mask != 0) else {
                continue;
            };
            rows.swap(rank, pivot);
            let pr = rows[rank];
            for (i, row) in rows.iter_mut().enumerate() {
                if i != rank && *row & mask != 0 {
                    *row ^= pr;
                }
            }
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        rank
    }
}
