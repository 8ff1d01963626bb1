//! JSON encodings of scalars, tensors and matrices.
//!
//! Tensors list nonzero entries only, with 1-based indices. Residues are
//! integers; complex values are `[re, im]` pairs (a bare number is read as a
//! real value).

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::scalar::{Scalar, ScalarDomain};
use crate::tensor::{LinearMap, Tensor};

pub fn scalar_to_json(v: Scalar) -> Value {
    match v {
        Scalar::Residue(r) => json!(r),
        Scalar::Complex(c) => json!([c.re, c.im]),
    }
}

pub fn scalar_from_json(v: &Value, domain: ScalarDomain) -> Result<Scalar> {
    let bad = || Error::InvalidInput(format!("bad {} value {v}", domain.name()));
    match domain {
        ScalarDomain::Prime(_) => {
            let n = v.as_i64().ok_or_else(bad)?;
            Ok(domain.from_int(n))
        }
        ScalarDomain::Complex { .. } => match v {
            Value::Number(n) => domain.from_complex(n.as_f64().ok_or_else(bad)?, 0.0),
            Value::Array(a) if a.len() == 2 => {
                let re = a[0].as_f64().ok_or_else(bad)?;
                let im = a[1].as_f64().ok_or_else(bad)?;
                domain.from_complex(re, im)
            }
            _ => Err(bad()),
        },
    }
}

#[derive(Serialize, Deserialize)]
struct TensorWire {
    order: usize,
    dims: Vec<usize>,
    domain: ScalarDomain,
    entries: Vec<EntryWire>,
}

#[derive(Serialize, Deserialize)]
struct EntryWire {
    idx: Vec<usize>,
    val: Value,
}

impl Tensor {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("tensor serializes")
    }

    pub fn from_json(v: &Value) -> Result<Tensor> {
        let wire: TensorWire =
            serde_json::from_value(v.clone()).map_err(|e| Error::InvalidInput(format!("tensor JSON: {e}")))?;
        wire.into_tensor()
    }

    pub fn from_json_str(s: &str) -> Result<Tensor> {
        let v: Value = serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("malformed JSON: {e}")))?;
        Tensor::from_json(&v)
    }
}

impl TensorWire {
    fn into_tensor(self) -> Result<Tensor> {
        if self.order != self.dims.len() {
            return Err(Error::InvalidInput(format!(
                "order {} but {} dims",
                self.order,
                self.dims.len()
            )));
        }
        let domain = self.domain;
        let mut entries = Vec::with_capacity(self.entries.len());
        for e in self.entries {
            if e.idx.len() != self.order || e.idx.iter().zip(&self.dims).any(|(&i, &d)| i == 0 || i > d) {
                return Err(Error::InvalidInput(format!("index {:?} outside dims {:?}", e.idx, self.dims)));
            }
            let idx = e.idx.iter().map(|i| i - 1).collect();
            entries.push((idx, scalar_from_json(&e.val, domain)?));
        }
        Tensor::from_entries(self.dims, domain, entries)
    }
}

impl Serialize for Tensor {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let entries = self
            .nonzeros()
            .map(|(n, v)| EntryWire {
                idx: self.unravel(n).iter().map(|i| i + 1).collect(),
                val: scalar_to_json(v),
            })
            .collect();
        TensorWire { order: self.order(), dims: self.dims().to_vec(), domain: self.domain(), entries }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Tensor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        TensorWire::deserialize(d)?.into_tensor().map_err(D::Error::custom)
    }
}

impl LinearMap {
    /// Nested row arrays.
    pub fn to_json(&self) -> Value {
        Value::Array(
            (0..self.rows())
                .map(|r| Value::Array(self.row(r).iter().map(|&v| scalar_to_json(v)).collect()))
                .collect(),
        )
    }

    /// Reads nested row arrays; `cols` disambiguates maps with no rows.
    pub fn from_json(v: &Value, domain: ScalarDomain, cols: Option<usize>) -> Result<LinearMap> {
        let rows = v.as_array().ok_or_else(|| Error::InvalidInput("matrix must be an array of rows".into()))?;
        let mut out = Vec::with_capacity(rows.len());
        for r in rows {
            let r = r.as_array().ok_or_else(|| Error::InvalidInput("matrix row must be an array".into()))?;
            out.push(r.iter().map(|x| scalar_from_json(x, domain)).collect::<Result<Vec<_>>>()?);
        }
        let ncols = cols.or_else(|| out.first().map(Vec::len)).unwrap_or(0);
        LinearMap::from_rows(domain, &out, ncols)
    }
}

impl Serialize for LinearMap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn tensor_round_trip() {
        let d = ScalarDomain::prime(3).unwrap();
        let w = catalog::w_tensor(d);
        let v = w.to_json();
        assert_eq!(v["domain"], "F3");
        assert_eq!(v["entries"][0]["idx"], json!([1, 1, 2]));
        assert_eq!(Tensor::from_json(&v).unwrap(), w);

        let c = ScalarDomain::complex();
        let t = Tensor::from_entries(vec![2, 2], c, [(vec![0, 1], c.from_complex(0.5, -2.0).unwrap())]).unwrap();
        let v = t.to_json();
        assert_eq!(v["entries"][0]["val"], json!([0.5, -2.0]));
        assert_eq!(Tensor::from_json(&v).unwrap(), t);
    }

    #[test]
    fn rejects_bad_indices() {
        let v = json!({"order": 2, "dims": [2, 2], "domain": "F2", "entries": [{"idx": [0, 1], "val": 1}]});
        assert!(Tensor::from_json(&v).is_err());
        let v = json!({"order": 2, "dims": [2, 2], "domain": "F4", "entries": []});
        assert!(Tensor::from_json(&v).is_err());
    }

    #[test]
    fn matrix_round_trip() {
        let d = ScalarDomain::prime(5).unwrap();
        let m = LinearMap::from_ints(2, 3, d, &[1, 2, 3, 4, 0, -1]).unwrap();
        assert_eq!(LinearMap::from_json(&m.to_json(), d, None).unwrap(), m);
    }
}
