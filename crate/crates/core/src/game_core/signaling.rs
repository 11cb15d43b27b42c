use super::{PosteriorDistribution, Prior, State};
use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-9;
const PLAUSIBILITY_TOL: f64 = 1e-9;

/// Tagging policy `π(s | ω)`: one probability row per state over a finite tag
/// alphabet (binary unless built from a posterior with more support points).
#[derive(Debug, Clone, PartialEq)]
pub struct SignalingPolicy {
    rows: [Vec<f64>; 2],
}

impl SignalingPolicy {
    /// `rows[ω][s] = π(s | ω)`.
    pub fn new(rows: [Vec<f64>; 2]) -> Result<Self> {
        let tags = rows[0].len();
        if tags == 0 || rows[1].len() != tags {
            return Err(Error::InvalidPolicy(format!(
                "rows have {} and {} tags",
                rows[0].len(),
                rows[1].len()
            )));
        }
        for (omega, row) in rows.iter().enumerate() {
            if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidPolicy(format!("entry {p} in row {omega}")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidPolicy(format!("row {omega} sums to {total}")));
            }
        }
        Ok(SignalingPolicy { rows })
    }

    /// Binary policy from the probabilities of the "real" tag in each state.
    pub fn binary(real_given_fake: f64, real_given_accurate: f64) -> Result<Self> {
        Self::new([
            vec![1.0 - real_given_fake, real_given_fake],
            vec![1.0 - real_given_accurate, real_given_accurate],
        ])
    }

    /// Tag equals the state.
    pub fn identity() -> Self {
        SignalingPolicy {
            rows: [vec![1.0, 0.0], vec![0.0, 1.0]],
        }
    }

    /// Tags independent of the state.
    pub fn uniform() -> Self {
        SignalingPolicy {
            rows: [vec![0.5, 0.5], vec![0.5, 0.5]],
        }
    }

    pub fn tag_count(&self) -> usize {
        self.rows[0].len()
    }

    pub fn prob(&self, omega: State, tag: usize) -> f64 {
        self.rows[omega.index()][tag]
    }

    pub fn row(&self, omega: State) -> &[f64] {
        &self.rows[omega.index()]
    }

    /// Marginal tag probability and the Bayes posterior it induces, for each
    /// tag with positive probability under the prior.
    pub fn tag_posteriors(&self, prior: Prior) -> Vec<(usize, f64, f64)> {
        let [p0, p1] = prior.probs();
        (0..self.tag_count())
            .filter_map(|s| {
                let joint_accurate = self.rows[1][s] * p1;
                let marginal = self.rows[0][s] * p0 + joint_accurate;
                (marginal > 0.0).then(|| (s, marginal, (joint_accurate / marginal).clamp(0.0, 1.0)))
            })
            .collect()
    }
}

/// Distribution over posteriors induced by `π` under effort `λ`: each tag with
/// positive marginal contributes its Bayes posterior with weight equal to that
/// marginal; tags inducing the same posterior are merged.
pub fn posterior_from_policy(pi: &SignalingPolicy, lambda: f64) -> Result<PosteriorDistribution> {
    let prior = Prior::new(lambda)?;
    let points = pi
        .tag_posteriors(prior)
        .into_iter()
        .map(|(_, w, mu)| (mu, w))
        .collect();
    PosteriorDistribution::from_points(points)
}

/// Recovers a tagging policy from a Bayes-plausible posterior distribution,
/// one tag per support point: `π(s | ω) = τ(μ_s) μ_s(ω) / p(ω | λ)`.
///
/// Rows of states with zero prior probability are unconstrained and returned
/// uniform.
pub fn policy_from_posterior(tau: &PosteriorDistribution, lambda: f64) -> Result<SignalingPolicy> {
    let prior = Prior::new(lambda)?;
    let mean = tau.mean();
    if (mean - lambda).abs() > PLAUSIBILITY_TOL {
        return Err(Error::NotPlausible { mean, lambda });
    }
    let tags = tau.len();
    let mut rows = [vec![0.0; tags], vec![0.0; tags]];
    for state in [State::Fake, State::Accurate] {
        let p = prior.prob(state);
        let row = &mut rows[state.index()];
        for (s, &(mu, w)) in tau.points().iter().enumerate() {
            let mass = w * super::Belief(mu).prob(state);
            if p > 0.0 {
                row[s] = mass / p;
            } else if mass > 0.0 {
                return Err(Error::DegeneratePrior { lambda });
            }
        }
        if p > 0.0 {
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x = (*x / total).clamp(0.0, 1.0));
        } else {
            row.iter_mut().for_each(|x| *x = 1.0 / tags as f64);
        }
    }
    SignalingPolicy::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_policy_reveals_state() {
        let tau = posterior_from_policy(&SignalingPolicy::identity(), 0.3).unwrap();
        assert_eq!(tau.support(), vec![0.0, 1.0]);
        assert!((tau.weights()[0] - 0.7).abs() < 1e-15);
        assert!((tau.weights()[1] - 0.3).abs() < 1e-15);

        let tau = posterior_from_policy(&SignalingPolicy::identity(), 0.5).unwrap();
        assert_eq!(tau.weights(), vec![0.5, 0.5]);
    }

    #[test]
    fn uniform_policy_leaves_prior() {
        let tau = posterior_from_policy(&SignalingPolicy::uniform(), 0.3).unwrap();
        assert_eq!(tau.len(), 1);
        assert!((tau.support()[0] - 0.3).abs() < 1e-15);
        assert!((tau.weights()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_probability_tags_are_dropped() {
        let tau = posterior_from_policy(&SignalingPolicy::identity(), 0.0).unwrap();
        assert_eq!(tau.points(), &[(0.0, 1.0)]);
    }

    #[test]
    fn fully_informative_round_trip_is_identity() {
        let tau = PosteriorDistribution::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let pi = policy_from_posterior(&tau, 0.5).unwrap();
        assert_eq!(pi, SignalingPolicy::identity());
    }

    #[test]
    fn uninformative_posterior_gives_row_constant_policy() {
        let tau = PosteriorDistribution::degenerate(0.3).unwrap();
        let pi = policy_from_posterior(&tau, 0.3).unwrap();
        assert_eq!(pi.tag_count(), 1);
        assert_eq!(pi.row(State::Fake), pi.row(State::Accurate));
    }

    #[test]
    fn hybrid_posterior_needs_three_tags() {
        // Weights evaluated by hand from the hybrid construction at λ = 0.4, c'(λ) = 0.8.
        let tau = PosteriorDistribution::new(vec![0.0, 0.4, 1.0], vec![0.48, 0.2, 0.32]).unwrap();
        let pi = policy_from_posterior(&tau, 0.4).unwrap();
        assert_eq!(pi.tag_count(), 3);
        // π(s|ω=0) = τ(μ)(1−μ)/0.6, π(s|ω=1) = τ(μ)μ/0.4
        let expect = [[0.8, 0.2, 0.0], [0.0, 0.2, 0.8]];
        for (omega, row) in expect.iter().enumerate() {
            for (s, p) in row.iter().enumerate() {
                let got = pi.prob(State::from_index(omega as u8).unwrap(), s);
                assert!((got - p).abs() < 1e-12, "π({s}|{omega}) = {got}");
            }
        }
        let back = posterior_from_policy(&pi, 0.4).unwrap();
        assert!(back.approx_eq(&tau, 1e-12));
    }

    #[test]
    fn not_plausible_is_rejected() {
        let tau = PosteriorDistribution::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            policy_from_posterior(&tau, 0.4),
            Err(Error::NotPlausible { .. })
        ));
    }

    #[test]
    fn degenerate_prior_with_mass_on_impossible_state() {
        let tau = PosteriorDistribution::new(vec![0.0, 1.0], vec![1.0 - 1e-10, 1e-10]).unwrap();
        assert_eq!(
            policy_from_posterior(&tau, 0.0),
            Err(Error::DegeneratePrior { lambda: 0.0 })
        );
        let tau = PosteriorDistribution::degenerate(0.0).unwrap();
        let pi = policy_from_posterior(&tau, 0.0).unwrap();
        assert_eq!(pi.row(State::Accurate), &[1.0]);
    }

    #[test]
    fn policy_validation() {
        assert!(SignalingPolicy::new([vec![0.5, 0.5], vec![1.0]]).is_err());
        assert!(SignalingPolicy::new([vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(SignalingPolicy::new([vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
        assert!(SignalingPolicy::binary(0.2, 0.9).is_ok());
    }
}
