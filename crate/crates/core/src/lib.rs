//! McKean–Vlasov bridge processes: processes pinned to zero at a horizon `T`
//! whose drift depends on their own moments.
//!
//! The crate provides special functions ([`specfun`]), exact moment formulas
//! ([`closed_form`]), the moment ODEs ([`ode`]), path simulation ([`sde`]) and
//! Monte Carlo validation ([`stats`]).

// `!(a < b)` comparisons deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_form;
pub mod error;
pub mod grid;
pub mod model;
pub mod ode;
pub mod quadrature;
pub mod sde;
pub mod specfun;
pub mod stats;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use model::{CoeffFn, EnvelopeFn, GeneralModelParams, ModelSpec, PowerMeanParams, SecondMomentParams};
