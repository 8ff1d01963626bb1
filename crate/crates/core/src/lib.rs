//! Subrank, symmetric subrank and related tensor parameters over prime fields
//! and the complex numbers, with re-verifiable certificates.

pub mod catalog;
pub mod congruence;
pub mod error;
pub mod hypergraph;
pub mod json;
pub mod quantum;
pub mod restrict;
pub mod scalar;
pub mod symlift;
pub mod tensor;

pub use error::{Error, Result};
pub use restrict::{Certificate, CertificateKind, SearchOptions};
pub use scalar::{Scalar, ScalarDomain};
pub use tensor::{LinearMap, Tensor};
