#![allow(dead_code)]

use rand::Rng;
use symsub::tensor::random_scalar;
use symsub::{LinearMap, Scalar, ScalarDomain, Tensor};

pub fn fp(p: u64) -> ScalarDomain {
    ScalarDomain::prime(p).unwrap()
}

pub fn report(id: u32, name: &str, ok: bool, detail: &str) {
    println!("[{id:02}] {name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
}

pub fn random_vec<R: Rng>(d: usize, domain: ScalarDomain, rng: &mut R) -> Vec<Scalar> {
    (0..d).map(|_| random_scalar(domain, rng)).collect()
}

/// Sum of `d + 1` weighted random powers.
pub fn random_symmetric<R: Rng>(d: usize, k: usize, domain: ScalarDomain, rng: &mut R) -> Tensor {
    let mut f = Tensor::zeros(vec![d; k], domain).unwrap();
    for _ in 0..=d {
        let v = random_vec(d, domain, rng);
        let c = random_scalar(domain, rng);
        f = f.add(&Tensor::rank_one(&v, k, domain).unwrap().scale(c)).unwrap();
    }
    f
}

pub fn random_invertible<R: Rng>(n: usize, domain: ScalarDomain, rng: &mut R) -> LinearMap {
    loop {
        let a = LinearMap::random(n, n, domain, rng);
        if a.is_invertible() {
            return a;
        }
    }
}

/// Maps `A_1, ..., A_k` that differ from each other and carry a symmetric
/// `f` to a symmetric `g`.
///
/// `f = M^{⊗k} f0` with `M = [M0; W M0]`, and `A_i = A + X_i K` where
/// `K = [-W, I]` kills the image of `M`.
pub fn make_sym_instance<R: Rng>(k: usize, domain: ScalarDomain, rng: &mut R) -> (Vec<LinearMap>, Tensor, Tensor) {
    let d0 = rng.gen_range(1..=2);
    let d = d0 + 1;
    let e = rng.gen_range(1..=3);
    let f0 = random_symmetric(d0, k, domain, rng);
    let m0 = random_invertible(d0, domain, rng);
    let w = LinearMap::random(d - d0, d0, domain, rng);
    let wm0 = w.compose(&m0).unwrap();
    let rows: Vec<Vec<Scalar>> = m0.row_vecs().into_iter().chain(wm0.row_vecs()).collect();
    let m = LinearMap::from_rows(domain, &rows, d0).unwrap();
    let mut kill = LinearMap::zeros(d - d0, d, domain);
    for r in 0..d - d0 {
        for c in 0..d0 {
            kill.set(r, c, domain.neg(w.get(r, c)));
        }
        kill.set(r, d0 + r, domain.one());
    }
    let f = f0.apply_sym(&m).unwrap();
    let a = LinearMap::random(e, d, domain, rng);
    let maps: Vec<LinearMap> = (0..k)
        .map(|_| a.add(&LinearMap::random(e, d - d0, domain, rng).compose(&kill).unwrap()).unwrap())
        .collect();
    let g = f0.apply_sym(&a.compose(&m).unwrap()).unwrap();
    (maps, f, g)
}
