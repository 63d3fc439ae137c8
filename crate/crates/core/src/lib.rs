//! Iterated i.i.d. random linear functions on `[0,1]`.
//!
//! A random map `f_{A,B}(x) = A x + B (1 - x)` with `(A, B) ~ μ` can be
//! iterated forwards (an ergodic Markov chain on `[0,1]`) or backwards (a
//! nested interval scheme converging almost surely). Both share the same
//! limit law, which for the families in [`models`] is a beta distribution.
//! The companion chain `X' <- A X' + B V` with gamma innovations converges
//! to the matching gamma law.
//!
//! The crate is organised as:
//!
//! * [`specfun`]: log-gamma, regularized incomplete beta/gamma, complex `2F1`.
//! * [`rngdist`]: counter-based random streams and exact scalar samplers.
//! * [`ifs`]: the forward, backward, gamma-side and matrix-product processes.
//! * [`models`]: the catalog of `μ` constructions with predicted limits.
//! * [`stats`]: KS tests, moments, empirical characteristic functions.
//! * [`identities`]: two-sided checks of distributional identities.
//! * [`verify`]: the fixed acceptance suite behind `betaflow verify`.

// `!(x > 0.0)` is how NaN gets rejected along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::excessive_precision)]

pub mod error;
pub mod identities;
pub mod ifs;
pub mod models;
pub mod rngdist;
pub mod specfun;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use ifs::{AffineState, MuFlags, MuSampler, PairLaw, SchemeClass, StochMat2};
pub use models::{build_case, ModelCase, Params};
pub use rngdist::{DistSpec, StreamKey};
pub use stats::{CfReport, KsReport, MomentReport};
