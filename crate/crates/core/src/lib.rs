//! Bayesian persuaded branching processes.
//!
//! A platform (sender) commits to a tagging policy for posts, a content
//! creator (agent) chooses how much effort to spend on accuracy, and users
//! (receivers) comment according to their posterior belief about the post.
//! Comments then spread through a two-type branching cascade whose limiting
//! share of negative comments is the post's *trend*.
//!
//! * [`game_core`]: beliefs, priors, utilities, tagging policies and their
//!   posterior-space counterparts.
//! * [`policy`]: the named tagging policies, the agent's implementable-effort
//!   bound and best response, and the sender's optimum by enumeration.
//! * [`lagrange`]: supporting-hyperplane certificates for the sender's optimum.
//! * [`branching`]: the wake-up branching process, its mean-field ODE and
//!   fixed points.
//! * [`montecarlo`]: seeded, replication-parallel scenario ensembles.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod branching;
pub mod error;
pub mod exec;
pub mod game_core;
pub mod lagrange;
mod linalg;
pub mod montecarlo;
pub mod policy;

pub use error::{Error, Result};
pub use exec::Execution;
