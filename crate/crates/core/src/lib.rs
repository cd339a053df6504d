//! Optimal performance of coordination through actions.
//!
//! An informed decision-maker knows an i.i.d. state ahead of time and can
//! only inform a second decision-maker through its own actions, which the
//! latter observes over a noisy channel. A joint state/action distribution is
//! achievable exactly when `I(X0; X2) <= I(X1; Y | X0, X2)`; this crate
//! evaluates that constraint, maximizes an expected payoff under it, applies
//! the machinery to on/off power control on a two-pair interference channel,
//! and checks achievability with a block-coding simulator.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coding_sim;
pub mod constraint;
pub mod error;
pub mod icmodel;
pub mod instances;
pub mod optimizer;
pub mod prob;

pub use error::{Error, Result};
