//! Online contention resolution schemes for k-unit and knapsack prophet
//! inequalities, with LP certificates, exact oracles and a Monte Carlo
//! harness.

// Index loops mirror the recurrences; `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod generate;
pub mod instance;
pub mod io;
pub mod knapsack;
pub mod kunit;
pub mod lp;
pub mod numeric;
pub mod ode;
pub mod oracle;
pub mod pmf;
pub mod reproduce;
pub mod unitdensity;

pub use error::{Error, Result};
