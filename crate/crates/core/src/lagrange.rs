//! Supporting-hyperplane certificates for the sender's problem at a fixed
//! effort.
//!
//! A posterior distribution `τ` meeting both constraints is optimal when some
//! multipliers make `L(μ) = v_S(μ) + ψ f(μ) − φ μ` lie below a level `ρ` on
//! all of `[0, 1]` while touching it on every support point of `τ`. In the
//! binary model `L` is a quadratic with constant curvature
//! `4 + 2ψ/(λ(1 − λ))`, so the search is over `ψ` alone; `φ` and `ρ` follow
//! from the contact conditions.

use crate::error::{Error, Result};
use crate::game_core::{
    check_bayes_plausible, expected_ic_residual, ic_integrand, prior_spread, sender_value, Belief,
    CostFunction, PosteriorDistribution,
};
use crate::policy::{fully_informative, CONSTRAINT_TOL, FEASIBILITY_TOL};

/// Grid spacing of the `ψ` scan.
pub const PSI_STEP: f64 = 1e-3;
/// Slack allowed above the hyperplane level.
pub const HYPERPLANE_TOL: f64 = 1e-9;

/// IC multiplier `ψ`, plausibility multiplier `φ` and hyperplane level `ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierSet {
    pub psi: f64,
    pub phi: f64,
    pub rho: f64,
}

/// `L(μ) = 2μ² − μ + ψ f(μ) − φ μ`.
pub fn lagrangian(mu: Belief, m: &MultiplierSet, lambda: f64, cost: &CostFunction) -> Result<f64> {
    Ok(sender_value(mu) + m.psi * ic_integrand(mu, lambda, cost)? - m.phi * mu.mu())
}

/// Second derivative of the Lagrangian in `μ`: `4 + 2ψ/(λ(1 − λ))`.
pub fn lagrangian_curvature(psi: f64, lambda: f64) -> Result<f64> {
    Ok(4.0 + 2.0 * psi / prior_spread(lambda)?)
}

/// Searches `ψ ∈ [−2λ(1 − λ), 0]` (from 0 downward, step [`PSI_STEP`], window
/// endpoint included) for multipliers certifying `τ`.
///
/// Returns `Ok(None)` when no `ψ` in the window works, which certifies that
/// `τ` is not optimal. `grid` is the number of points of the `μ`-grid on which
/// the hyperplane inequality is checked; the analytic vertex of `L` is checked
/// as well.
pub fn find_multipliers(
    tau: &PosteriorDistribution,
    lambda: f64,
    cost: &CostFunction,
    grid: usize,
) -> Result<Option<MultiplierSet>> {
    let spread = prior_spread(lambda)?;
    let plausibility_gap = (tau.mean() - lambda).abs();
    let ic_residual = expected_ic_residual(tau, lambda, cost)?;
    if plausibility_gap > CONSTRAINT_TOL || ic_residual.abs() > CONSTRAINT_TOL {
        return Err(Error::ConstraintViolation {
            plausibility_gap,
            ic_residual,
        });
    }
    if grid < 2 {
        return Err(Error::OutOfRange {
            name: "verification grid size",
            value: grid as f64,
            range: ">= 2",
        });
    }

    let psi_min = -2.0 * spread;
    let mut psis: Vec<f64> = (0..)
        .map(|i| 0.0 - i as f64 * PSI_STEP)
        .take_while(|&p| p > psi_min)
        .collect();
    psis.push(psi_min);

    for psi in psis {
        let m = contact_multipliers(tau, psi, lambda, cost, spread)?;
        if certifies(tau, &m, lambda, cost, grid, spread)? {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

/// `φ`, `ρ` making `L` touch `ρ` at the extreme support points (or tangent at
/// the single support point).
fn contact_multipliers(
    tau: &PosteriorDistribution,
    psi: f64,
    lambda: f64,
    cost: &CostFunction,
    spread: f64,
) -> Result<MultiplierSet> {
    let q = |mu: f64| -> Result<f64> {
        let b = Belief::new(mu)?;
        Ok(sender_value(b) + psi * ic_integrand(b, lambda, cost)?)
    };
    let support = tau.support();
    let (lo, hi) = (support[0], support[support.len() - 1]);
    let phi = if support.len() == 1 {
        4.0 * lo - 1.0 + psi * (2.0 * lo - lambda) / spread
    } else {
        (q(hi)? - q(lo)?) / (hi - lo)
    };
    Ok(MultiplierSet {
        psi,
        phi,
        rho: q(lo)? - phi * lo,
    })
}

fn certifies(
    tau: &PosteriorDistribution,
    m: &MultiplierSet,
    lambda: f64,
    cost: &CostFunction,
    grid: usize,
    spread: f64,
) -> Result<bool> {
    let excess = |mu: f64| -> Result<f64> { Ok(lagrangian(Belief::new(mu)?, m, lambda, cost)? - m.rho) };
    for mu in tau.support() {
        if excess(mu)?.abs() > HYPERPLANE_TOL {
            return Ok(false);
        }
    }
    for i in 0..grid {
        if excess(i as f64 / (grid - 1) as f64)? > HYPERPLANE_TOL {
            return Ok(false);
        }
    }
    // L(μ) = Aμ² + Bμ + const; a concave L peaks at its vertex.
    let a = 2.0 + m.psi / spread;
    let b = -1.0 - m.psi / (1.0 - lambda) - m.phi;
    if a < 0.0 {
        let vertex = -b / (2.0 * a);
        if (0.0..=1.0).contains(&vertex) && excess(vertex)? > HYPERPLANE_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Expected IC residual of the fully informative posterior, in closed form
/// (`1 − c'(λ)`) and by direct evaluation.
pub fn g_check(lambda: f64, cost: &CostFunction) -> Result<(f64, f64)> {
    g_check_with(lambda, cost, ic_integrand)
}

/// [`g_check`] with the numeric side evaluated through a caller-supplied IC
/// integrand.
pub fn g_check_with<F>(lambda: f64, cost: &CostFunction, integrand: F) -> Result<(f64, f64)>
where
    F: Fn(Belief, f64, &CostFunction) -> Result<f64>,
{
    prior_spread(lambda)?;
    if cost.marginal(lambda) > 1.0 + FEASIBILITY_TOL {
        return Err(Error::InfeasibleEffort {
            lambda,
            lambda_bar: crate::policy::lambda_bar(cost),
        });
    }
    let tau = fully_informative(lambda)?;
    debug_assert!(check_bayes_plausible(&tau, lambda, 1e-15));
    let numeric = tau
        .points()
        .iter()
        .map(|&(mu, w)| integrand(Belief::new(mu)?, lambda, cost).map(|f| w * f))
        .sum::<Result<f64>>()?;
    Ok((1.0 - cost.marginal(lambda), numeric))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{hybrid_tagging, lambda_bar, optimize_tau_given_lambda, uninformative};

    fn quad(k: f64) -> CostFunction {
        CostFunction::quadratic(k).unwrap()
    }

    fn b(mu: f64) -> Belief {
        Belief::new(mu).unwrap()
    }

    #[test]
    fn lagrangian_examples() {
        let c = quad(1.0);
        let flat = MultiplierSet { psi: -0.5, phi: 0.0, rho: 0.5 };
        for i in 0..=20 {
            let l = lagrangian(b(i as f64 / 20.0), &flat, 0.5, &c).unwrap();
            assert!((l - 0.5).abs() < 1e-14);
        }
        let m = MultiplierSet { psi: 0.0, phi: 1.0, rho: 0.0 };
        assert_eq!(lagrangian(b(0.0), &m, 0.5, &c).unwrap(), 0.0);
        assert_eq!(lagrangian(b(1.0), &m, 0.5, &c).unwrap(), 0.0);
        assert!(lagrangian(b(0.5), &m, 0.0, &c).is_err());
    }

    #[test]
    fn curvature_examples() {
        assert_eq!(lagrangian_curvature(0.0, 0.5).unwrap(), 4.0);
        assert_eq!(lagrangian_curvature(-0.5, 0.5).unwrap(), 0.0);
        assert_eq!(lagrangian_curvature(-1.0, 0.5).unwrap(), -4.0);
        assert!(matches!(lagrangian_curvature(0.0, 1.0), Err(Error::DegeneratePrior { .. })));
    }

    #[test]
    fn fully_informative_optimum_is_certified() {
        let c = quad(1.0);
        let tau = fully_informative(0.5).unwrap();
        let m = find_multipliers(&tau, 0.5, &c, 10_000).unwrap().unwrap();
        assert_eq!(m, MultiplierSet { psi: 0.0, phi: 1.0, rho: 0.0 });

        for k in [0.6, 0.8, 2.0, 5.0] {
            let c = quad(k);
            let l = lambda_bar(&c);
            let tau = fully_informative(l).unwrap();
            let m = find_multipliers(&tau, l, &c, 10_000).unwrap().expect("certified");
            assert!(m.psi <= 0.0);
            assert!(lagrangian_curvature(m.psi, l).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn interior_optimum_needs_flat_lagrangian() {
        // Three support points on a quadratic force zero curvature, i.e. the
        // window endpoint ψ = −2λ(1−λ).
        let c = quad(1.0);
        let tau = hybrid_tagging(0.4, &c).unwrap();
        let m = find_multipliers(&tau, 0.4, &c, 10_000).unwrap().unwrap();
        assert!((m.psi + 2.0 * 0.4 * 0.6).abs() < 1e-15);
        assert!(lagrangian_curvature(m.psi, 0.4).unwrap().abs() < 1e-12);
    }

    #[test]
    fn oracle_solutions_are_certified() {
        let c = quad(1.0);
        for l in [0.1, 0.25, 0.4, 0.5] {
            let tau = optimize_tau_given_lambda(l, &c, 51).unwrap();
            assert!(find_multipliers(&tau, l, &c, 2_000).unwrap().is_some(), "λ={l}");
        }
    }

    #[test]
    fn infeasible_posterior_is_rejected() {
        let c = quad(1.0);
        let tau = uninformative(0.25).unwrap();
        assert!(matches!(
            find_multipliers(&tau, 0.25, &c, 100),
            Err(Error::ConstraintViolation { .. })
        ));
    }

    #[test]
    fn g_check_examples() {
        let (a, b) = g_check(0.5, &quad(1.0)).unwrap();
        assert!(a.abs() < 1e-15 && b.abs() < 1e-12);
        let (a, b) = g_check(0.25, &quad(1.0)).unwrap();
        assert!((a - 0.5).abs() < 1e-15 && (b - 0.5).abs() < 1e-12);
        let (a, b) = g_check(5.0 / 6.0, &quad(0.6)).unwrap();
        assert!(a.abs() < 1e-12 && b.abs() < 1e-12);
        assert!(g_check(0.0, &quad(1.0)).is_err());
        assert!(matches!(g_check(0.6, &quad(1.0)), Err(Error::InfeasibleEffort { .. })));
    }

    #[test]
    fn flipped_integrand_breaks_g_check() {
        let c = quad(2.0);
        let (closed, numeric) =
            g_check_with(0.1, &c, |mu, l, c| ic_integrand(mu, l, c).map(|f| -f)).unwrap();
        assert!((closed - numeric).abs() > 1e-3);
    }
}
