//! Exact symbolic kernel for genus-zero worldsheet algebra: truncated formal
//! Laurent series over exact rationals, a weight-truncated Virasoro PBW
//! algebra with an order-by-order exponential factorizer, canonical moduli
//! elements of spheres with tubes and their sewing, graded map contraction,
//! and coefficientwise checkers for the vertex-operator-coalgebra axioms.

pub mod data;
pub mod graded;
pub mod moduli;
pub mod report;
pub mod ring;
pub mod series;
pub mod suites;
pub mod virasoro;
pub mod voc;
