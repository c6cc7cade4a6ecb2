//! Numerical solver for optimal dividend ratcheting in the Cramér–Lundberg
//! risk model.
//!
//! The surplus follows `X_t = x + p t - sum U_i` with Poisson(β) claim
//! arrivals. Dividends are paid at a non-decreasing rate `C_t <= c̄` and the
//! objective is the expected discounted dividend stream up to ruin. The crate
//! approximates the optimal value surface `V(x, c)` by restricting the rate to
//! a finite grid and solving one obstacle problem per rate, from the ceiling
//! downwards.
//!
//! Layout:
//!
//! * [`model`]: premium, intensity, discount and ceiling, plus claim laws.
//! * [`ide`]: the integro-differential operator `L_c`, its quadrature and the
//!   interval solvers that produce [`ide::ValueCurve`]s.
//! * [`ratchet`]: rate grids, the backward obstacle recursion, change regions
//!   and free boundaries.
//! * [`unconstrained`]: the threshold/band benchmark without ratcheting.
//! * [`montecarlo`]: an event-driven simulator of finite ratcheting
//!   strategies.
//! * [`profile`]: derivative profiles and kink detection for value curves.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
#![forbid(unsafe_code)]
// `!(a > b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ide;
pub mod model;
pub mod montecarlo;
pub mod profile;
pub mod ratchet;
pub mod search;
pub mod unconstrained;

pub use ide::{IdeError, IdeSolver, ValueCurve, XGrid};
pub use model::{ClaimDistribution, ModelError, ModelParams, ValidatedModel};
pub use ratchet::{ChangeSet, FiniteStrategy, RatchetError, RateGrid, ValueSurface};
