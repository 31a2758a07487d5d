//! Almost complex curves in S^6 and the associative cones over them.
//!
//! The pipeline runs from octonion arithmetic through the G2 matrix algebra
//! and its order-6 grading to S^1-symmetric solutions of the G2 periodic Toda
//! lattice. Frames are reconstructed from the Adler-Kostant-Symes Lax flow,
//! and the resulting surfaces `f(s, t) = exp(sA) k(t) e1` are checked against
//! the geometric identities they must satisfy.
//!
//! The guide under `book/` walks through each stage; its code listings are
//! compiled as doctests of this crate.

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;

pub mod aks_flow;
pub mod curve_builder;
pub mod export;
pub mod g2_algebra;
pub mod octonion;
pub mod primitive_frame;
pub mod toda_lattice;
pub mod tolerances;

#[cfg(test)]
mod testutil;

pub type Mat7 = SMatrix<f64, 7, 7>;
pub type CMat7 = SMatrix<Complex64, 7, 7>;
pub type Vec7 = SVector<f64, 7>;

/// Promote a real matrix to a complex one.
pub fn complexify(m: &Mat7) -> CMat7 {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Entrywise complex conjugate.
pub fn conj(m: &CMat7) -> CMat7 {
    m.map(|z| z.conj())
}

/// Largest entry modulus of a complex matrix.
pub fn cmax(m: &CMat7) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/octonions.md")]
    pub mod octonions {}
    #[doc = include_str!("../../../book/src/g2-algebra.md")]
    pub mod g2_algebra {}
    #[doc = include_str!("../../../book/src/primitive-frames.md")]
    pub mod primitive_frames {}
    #[doc = include_str!("../../../book/src/toda-lattice.md")]
    pub mod toda_lattice {}
    #[doc = include_str!("../../../book/src/aks-flow.md")]
    pub mod aks_flow {}
    #[doc = include_str!("../../../book/src/curves.md")]
    pub mod curves {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
