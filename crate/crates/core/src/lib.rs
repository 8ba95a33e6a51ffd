//! Doubly smoothed gradient descent ascent (DS-GDA) for constrained
//! nonconvex-nonconcave minimax problems
//!
//! ```text
//! min_{x in X} max_{y in Y} f(x, y)
//! ```
//!
//! over boxes `X`, `Y`. The crate bundles:
//!
//! * [`problems`]: the problem abstraction, the doubly regularized function
//!   `F(x, y, z, v) = f(x, y) + r1/2 |x - z|^2 - r2/2 |y - v|^2`, and a
//!   registry of closed-form benchmark problems that trap classical methods
//!   in limit cycles.
//! * [`solvers`]: DS-GDA and the baselines (one-sided smoothed GDA, plain
//!   GDA, extragradient) as deterministic iteration maps.
//! * [`measures`]: game and optimization stationarity residuals, trajectory
//!   outcome classification.
//! * [`oracle`]: brute-force nested grid solvers for the value functions and
//!   Lyapunov functions, used to audit the descent estimate numerically.
//! * [`analysis`]: closed-form constants, step-size admissibility, parameter
//!   feasibility scans and regularity-condition checks.
//! * [`harness`]: config-driven experiment runner, trajectory export and the
//!   `dsgda` command line.

// `!(a > b)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod harness;
pub mod measures;
pub mod oracle;
pub mod problems;
pub mod solvers;

pub use error::{Error, Result};
pub use problems::{builtin, BoxSet, MinimaxProblem, SmoothedState};
pub use solvers::{AlgoParams, StoppingRule, Trajectory};
