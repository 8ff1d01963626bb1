//! Small named tensors used throughout the tests, benches and CLI.

use crate::scalar::ScalarDomain;
use crate::tensor::Tensor;

pub use crate::symlift::fully_symmetric;

/// `e0⊗e0⊗e1 + e0⊗e1⊗e0 + e1⊗e0⊗e0`.
pub fn w_tensor(domain: ScalarDomain) -> Tensor {
    let one = domain.one();
    Tensor::from_entries(
        vec![2, 2, 2],
        domain,
        [(vec![0, 0, 1], one), (vec![0, 1, 0], one), (vec![1, 0, 0], one)],
    )
    .expect("W fits")
}

/// The fully symmetric tensor on three coordinates plus `e0⊗e0⊗e0`.
pub fn tight_tensor(domain: ScalarDomain) -> Tensor {
    let mut t = fully_symmetric(3, domain);
    t.set(&[0, 0, 0], domain.one());
    t
}

/// Full-rank anti-diagonal matrix with zero diagonal and `f_ij = -f_ji`: row
/// `i` has `-1` at column `d-1-i` for `i < d/2` and `+1` otherwise. `d` must be even.
pub fn skew_matrix(d: usize, domain: ScalarDomain) -> Tensor {
    assert!(d % 2 == 0, "skew example needs even size");
    let entries = (0..d).map(|i| {
        let v = if i < d / 2 { -1 } else { 1 };
        (vec![i, d - 1 - i], domain.from_int(v))
    });
    Tensor::from_entries(vec![d, d], domain, entries).expect("skew matrix fits")
}

/// Adjacency matrix of the directed cycle `0 -> 1 -> ... -> n-1 -> 0`, ones on the diagonal.
pub fn cycle_adjacency(n: usize, domain: ScalarDomain) -> Tensor {
    let one = domain.one();
    let entries = (0..n).flat_map(|i| [(vec![i, i], one), (vec![i, (i + 1) % n], one)]);
    Tensor::from_entries(vec![n, n], domain, entries).expect("cycle fits")
}

pub fn c5_adjacency(domain: ScalarDomain) -> Tensor {
    cycle_adjacency(5, domain)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skew_examples_match_display() {
        let d = ScalarDomain::prime(5).unwrap();
        let s = skew_matrix(2, d);
        assert_eq!(s, Tensor::from_ints(vec![2, 2], d, &[0, -1, 1, 0]).unwrap());
        let s = skew_matrix(4, d);
        let expect = [0, 0, 0, -1, 0, 0, -1, 0, 0, 1, 0, 0, 1, 0, 0, 0];
        assert_eq!(s, Tensor::from_ints(vec![4, 4], d, &expect).unwrap());
    }

    #[test]
    fn c5_matches_display() {
        let d = ScalarDomain::prime(2).unwrap();
        #[rustfmt::skip]
        let expect = [
            1, 1, 0, 0, 0,
            0, 1, 1, 0, 0,
            0, 0, 1, 1, 0,
            0, 0, 0, 1, 1,
            1, 0, 0, 0, 1,
        ];
        assert_eq!(c5_adjacency(d), Tensor::from_ints(vec![5, 5], d, &expect).unwrap());
    }
}
