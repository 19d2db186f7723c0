//! Witnesses and certificates for quantitative stability of the Hilbert inner
//! product and its connectives.

pub mod linalg;
pub mod scalar;
pub mod constructions;
pub mod predicates;
pub mod certify;
pub mod approx;
pub mod vc;
pub mod schema;
