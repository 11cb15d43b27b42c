//! Persuasion-game primitives for the binary-state model.
//!
//! The state `ω ∈ {0, 1}` says whether a post is misinformation (0) or
//! accurate (1). Beliefs and priors are scalarized by the probability they put
//! on `ω = 1`. The receiver comments with `a = E_μ[ω]`, the agent's reputation
//! is that same expectation, and the sender (platform) values a belief by
//! `v_S(μ) = 2μ² − μ`.

mod cost;
mod posterior;
mod signaling;

pub use cost::CostFunction;
pub use posterior::{
    check_bayes_plausible, expected_ic_residual, expected_sender_value, PosteriorDistribution,
};
pub use signaling::{policy_from_posterior, posterior_from_policy, SignalingPolicy};

use crate::error::{check_unit, Error, Result};

/// Absolute tolerance under which two beliefs are considered the same point.
pub const BELIEF_TOL: f64 = 1e-12;

/// Ground truth of a post.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum State {
    Fake = 0,
    Accurate = 1,
}

impl State {
    pub fn from_index(omega: u8) -> Result<Self> {
        match omega {
            0 => Ok(State::Fake),
            1 => Ok(State::Accurate),
            _ => Err(Error::OutOfRange {
                name: "omega",
                value: omega as f64,
                range: "{0, 1}",
            }),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn value(self) -> f64 {
        self as u8 as f64
    }
}

/// Receiver's posterior probability that the post is accurate.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Belief(f64);

impl Belief {
    pub fn new(mu: f64) -> Result<Self> {
        check_unit("belief", mu).map(Belief)
    }

    pub fn mu(self) -> f64 {
        self.0
    }

    /// Probability the belief assigns to `state`.
    pub fn prob(self, state: State) -> f64 {
        match state {
            State::Fake => 1.0 - self.0,
            State::Accurate => self.0,
        }
    }
}

/// Prior over the state induced by the agent's effort: `p(λ) = (1 − λ, λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prior {
    lambda: f64,
}

impl Prior {
    pub fn new(lambda: f64) -> Result<Self> {
        check_unit("effort", lambda).map(|lambda| Prior { lambda })
    }

    pub fn lambda(self) -> f64 {
        self.lambda
    }

    pub fn prob(self, state: State) -> f64 {
        match state {
            State::Fake => 1.0 - self.lambda,
            State::Accurate => self.lambda,
        }
    }

    pub fn probs(self) -> [f64; 2] {
        [1.0 - self.lambda, self.lambda]
    }

    /// True when one of the states has zero prior probability.
    pub fn is_degenerate(self) -> bool {
        self.lambda <= 0.0 || self.lambda >= 1.0
    }
}

/// Receiver's optimal comment `a*(μ) = E_μ[ω]` under quadratic loss.
pub fn best_response(mu: Belief) -> f64 {
    mu.mu()
}

/// `u_R(ω, a) = −(a − ω)²`.
pub fn receiver_utility(omega: State, a: f64) -> f64 {
    let d = a - omega.value();
    -d * d
}

/// Sender's value of inducing belief `μ`: `μ(μ − 1) + μ² = 2μ² − μ`.
pub fn sender_value(mu: Belief) -> f64 {
    let m = mu.mu();
    2.0 * m * m - m
}

/// Agent's reputation under belief `μ`, i.e. one minus the stationary share of
/// negative comments.
pub fn agent_value(mu: Belief) -> f64 {
    mu.mu()
}

/// Incentive-compatibility integrand `f(μ) = μ(μ − λ)/(λ(1 − λ)) − c'(λ)`.
///
/// Its expectation under a posterior distribution is the gap in the agent's
/// first-order condition; it is undefined for degenerate priors.
pub fn ic_integrand(mu: Belief, lambda: f64, cost: &CostFunction) -> Result<f64> {
    let spread = prior_spread(lambda)?;
    let m = mu.mu();
    Ok(m * (m - lambda) / spread - cost.marginal(lambda))
}

/// `λ(1 − λ)`, rejecting efforts where it vanishes.
pub(crate) fn prior_spread(lambda: f64) -> Result<f64> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(lambda * (1.0 - lambda))
    } else if (0.0..=1.0).contains(&lambda) {
        Err(Error::DegeneratePrior { lambda })
    } else {
        Err(Error::OutOfRange {
            name: "effort",
            value: lambda,
            range: "(0, 1)",
        })
    }
}
