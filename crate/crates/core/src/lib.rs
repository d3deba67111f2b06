//! Weighted sample average approximation (wSAA) for contextual stochastic
//! optimization.
//!
//! Given historical pairs `(x_i, y_i)` and a new covariate `x0`, the
//! conditional expected cost `E[F(z; Y) | X = x0]` is approximated by a
//! Nadaraya–Watson weighted average `Σ w_i F(z; y_i)`. The crate solves that
//! problem exactly or under an iteration budget, splits a compute budget
//! between sample size and iterations, and builds normal-approximation
//! confidence intervals for the optimal conditional cost.
//!
//! ```
//! use wsaa::costs::{CostModel, FeasibleBox, WsaaProblem};
//! use wsaa::kernels::{nw_weights, Kernel};
//! use wsaa::solve::solve_exact;
//!
//! let x = [0.0, 0.5, 1.0, 3.0];
//! let y = vec![9.0, 11.0, 10.0, 40.0];
//! let w = nw_weights(&x, &[0.4], Kernel::Gaussian, 0.5).unwrap();
//! let problem = WsaaProblem::new(
//!     y,
//!     w,
//!     CostModel::newsvendor(10.0, 2.0).unwrap(),
//!     FeasibleBox::new(vec![0.0], vec![100.0]).unwrap(),
//! )
//! .unwrap();
//! let sol = solve_exact(&problem).unwrap();
//! assert_eq!(sol.z, vec![11.0]);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod budget;
pub mod costs;
pub mod error;
pub mod harness;
pub mod infer;
pub mod kernels;
pub mod simulate;
pub mod solve;
pub mod stats;
pub mod tune;

pub use error::{Result, WsaaError};
