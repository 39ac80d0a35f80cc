//! Numerical laboratory for fractional elliptic Dirichlet problems
//! `(-∇·A∇)^s u = f` with exterior data.
//!
//! Three independent routes realise the fractional operator: spectral
//! functional calculus of the discrete elliptic operator ([`spectral`]), the
//! singular-kernel bilinear form ([`kernel`]) and the weighted half-space
//! extension ([`extension`]). The [`homogenize`] and [`perforated`] modules
//! run ε-sweeps on top of the nonlocal solver in [`dirichlet`].
#![no_std]
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dirichlet;
pub mod domain;
pub mod error;
pub mod extension;
pub mod homogenize;
pub mod kernel;
pub mod local_op;
pub mod perforated;
pub mod quad;
pub mod sparse;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
