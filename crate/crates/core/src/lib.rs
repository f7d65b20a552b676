//! Solvers for a partially observed mean-field game of epidemic activity
//! decisions.
//!
//! Agents move through the states S, A, I, R, D and choose an activity level
//! `u` in `[0, 1]`. Before symptom onset an agent cannot tell S, A and R
//! apart and acts on a belief `(s, a)`. The crate provides:
//!
//! * [`model`]: parameters, running costs and the closed-form state values;
//! * [`fully_observed`]: the susceptible value ODE, the stationary decision and
//!   the fully observed population dynamics;
//! * [`filter`]: the pre-symptom belief filter;
//! * [`hjb`]: the value function on the belief triangle and its bang-bang policy;
//! * [`fpk`]: forward transport of the population belief density;
//! * [`mfe`]: the damped fixed-point iteration for mean-field equilibria;
//! * [`sim`]: an exact-event Monte Carlo simulator used as an oracle.

// Negated comparisons reject NaN together with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod filter;
pub mod fpk;
pub mod fully_observed;
pub mod grid;
pub mod hjb;
pub mod io;
pub mod mfe;
pub mod model;
pub mod ode;
pub mod path;
pub mod sim;

pub use error::{Error, Result};
pub use model::{phi_bar_a, phi_bar_i, r_nought, running_cost, Attribute, CostTable, EpiState, ModelParams};
pub use path::MeanFieldPath;
