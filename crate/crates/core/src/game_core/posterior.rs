use super::{ic_integrand, sender_value, Belief, CostFunction, BELIEF_TOL};
use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Finite distribution over receiver posteriors (the sender's policy in
/// belief space).
///
/// Points are kept sorted by belief; beliefs closer than [`BELIEF_TOL`] are
/// merged and zero-weight points are dropped on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDistribution {
    points: Vec<(f64, f64)>,
}

impl PosteriorDistribution {
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::InvalidPosterior(format!(
                "{} support points but {} weights",
                support.len(),
                weights.len()
            )));
        }
        Self::from_points(support.into_iter().zip(weights).collect())
    }

    /// Builds a distribution from `(belief, weight)` pairs.
    pub fn from_points(mut points: Vec<(f64, f64)>) -> Result<Self> {
        for &(mu, w) in &points {
            Belief::new(mu)?;
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidPosterior(format!("weight {w} at belief {mu}")));
            }
        }
        let total: f64 = points.iter().map(|p| p.1).sum();
        if !((total - 1.0).abs() <= WEIGHT_SUM_TOL) {
            return Err(Error::InvalidPosterior(format!("weights sum to {total}")));
        }
        points.retain(|p| p.1 > 0.0);
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(points.len());
        for (mu, w) in points {
            match merged.last_mut() {
                Some(last) if (mu - last.0).abs() <= BELIEF_TOL => last.1 += w,
                _ => merged.push((mu, w)),
            }
        }
        Ok(PosteriorDistribution { points: merged })
    }

    /// Point mass at `mu`.
    pub fn degenerate(mu: f64) -> Result<Self> {
        Self::from_points(vec![(mu, 1.0)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn support(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Weight on `mu` (zero if it is not a support point).
    pub fn weight_at(&self, mu: f64) -> f64 {
        self.points
            .iter()
            .find(|p| (p.0 - mu).abs() <= BELIEF_TOL)
            .map_or(0.0, |p| p.1)
    }

    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.points.iter().map(|&(mu, w)| w * f(mu)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expectation(|mu| mu)
    }

    /// Mass on beliefs strictly inside `(0, 1)`.
    pub fn interior_mass(&self) -> f64 {
        self.points
            .iter()
            .filter(|p| p.0 > BELIEF_TOL && p.0 < 1.0 - BELIEF_TOL)
            .map(|p| p.1)
            .sum()
    }

    /// Drops points with weight below `tol` and renormalizes the rest.
    pub fn pruned(&self, tol: f64) -> Self {
        let kept: Vec<(f64, f64)> = self.points.iter().copied().filter(|p| p.1 >= tol).collect();
        let total: f64 = kept.iter().map(|p| p.1).sum();
        PosteriorDistribution {
            points: kept.into_iter().map(|(mu, w)| (mu, w / total)).collect(),
        }
    }

    /// Same support (within `tol`) and same weights (within `tol`).
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.len() == other.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| (a.0 - b.0).abs() <= tol && (a.1 - b.1).abs() <= tol)
    }
}

/// `E_τ[v_S(μ)]`.
pub fn expected_sender_value(tau: &PosteriorDistribution) -> f64 {
    tau.expectation(|mu| sender_value(Belief(mu)))
}

/// `E_τ[f(μ)]`; zero exactly when `τ` satisfies the agent's first-order
/// condition at effort `λ`.
pub fn expected_ic_residual(
    tau: &PosteriorDistribution,
    lambda: f64,
    cost: &CostFunction,
) -> Result<f64> {
    tau.points
        .iter()
        .map(|&(mu, w)| ic_integrand(Belief(mu), lambda, cost).map(|f| w * f))
        .sum()
}

/// `|E_τ[μ] − λ| ≤ tol`.
pub fn check_bayes_plausible(tau: &PosteriorDistribution, lambda: f64, tol: f64) -> bool {
    (tau.mean() - lambda).abs() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_merges_and_sorts() {
        let tau = PosteriorDistribution::new(vec![1.0, 0.0, 1.0 - 1e-14, 0.5], vec![0.25, 0.5, 0.25, 0.0])
            .unwrap();
        assert_eq!(tau.len(), 2);
        assert_eq!(tau.support()[0], 0.0);
        assert!((tau.weight_at(1.0) - 0.5).abs() < 1e-15);
        assert_eq!(tau.weight_at(0.5), 0.0);
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(PosteriorDistribution::new(vec![0.0, 1.0], vec![0.5]).is_err());
        assert!(PosteriorDistribution::new(vec![0.0, 1.0], vec![0.5, 0.4]).is_err());
        assert!(PosteriorDistribution::new(vec![0.0, 1.0], vec![1.5, -0.5]).is_err());
        assert!(PosteriorDistribution::new(vec![0.0, 1.2], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn fully_informative_sender_value_equals_effort() {
        for lambda in [0.1, 0.3, 0.5, 0.77] {
            let tau = PosteriorDistribution::new(vec![0.0, 1.0], vec![1.0 - lambda, lambda]).unwrap();
            assert!((expected_sender_value(&tau) - lambda).abs() < 1e-15);
        }
    }

    #[test]
    fn fully_informative_residual_is_one_minus_marginal_cost() {
        let cost = CostFunction::quadratic(1.3).unwrap();
        for i in 1..100 {
            let lambda = i as f64 / 100.0;
            let tau = PosteriorDistribution::new(vec![0.0, 1.0], vec![1.0 - lambda, lambda]).unwrap();
            let g = expected_ic_residual(&tau, lambda, &cost).unwrap();
            assert!((g - (1.0 - cost.marginal(lambda))).abs() <= 1e-12);
        }
    }

    #[test]
    fn single_point_is_plausible_for_its_prior() {
        let tau = PosteriorDistribution::degenerate(0.3).unwrap();
        assert!(check_bayes_plausible(&tau, 0.3, 0.0));
        assert!(!check_bayes_plausible(&tau, 0.31, 1e-3));
    }

    #[test]
    fn pruning_renormalizes() {
        let tau = PosteriorDistribution::new(vec![0.0, 0.5, 1.0], vec![0.5, 1e-13, 0.5 - 1e-13]).unwrap();
        let p = tau.pruned(1e-12);
        assert_eq!(p.support(), vec![0.0, 1.0]);
        assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.interior_mass() == 0.0);
    }
}
