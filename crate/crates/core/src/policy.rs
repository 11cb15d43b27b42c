//! Named tagging policies, the agent's effort response and the sender's
//! constrained optimum.
//!
//! The sender's problem at a fixed effort `λ` is a linear program over
//! distributions of posteriors with two equality constraints (Bayes
//! plausibility and the agent's first-order condition). An optimum therefore
//! exists on at most three support points, and [`optimize_tau_given_lambda`]
//! finds it by enumerating every triple of a belief grid.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::exec::Execution;
use crate::game_core::{
    expected_ic_residual, expected_sender_value, ic_integrand, posterior_from_policy,
    prior_spread, sender_value, Belief, CostFunction, PosteriorDistribution, Prior,
    SignalingPolicy, State, BELIEF_TOL,
};
use crate::linalg::solve3;

/// Slack allowed on `c'(λ) ≤ 1` before an effort is declared infeasible.
pub const FEASIBILITY_TOL: f64 = 1e-12;
/// Support points lighter than this are dropped from constructed posteriors.
pub const WEIGHT_TOL: f64 = 1e-12;
/// Tolerance on both constraints of an oracle solution.
pub const CONSTRAINT_TOL: f64 = 1e-9;

const EFFORT_SCAN_STEPS: usize = 10_000;
const EFFORT_ROOT_TOL: f64 = 1e-10;
const MIN_GRID: usize = 11;

/// The three tagging policies studied in the cascade experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    FullyInformative,
    Uninformative,
    Hybrid,
}

impl PolicyKind {
    pub fn posterior(self, lambda: f64, cost: &CostFunction) -> Result<PosteriorDistribution> {
        match self {
            PolicyKind::FullyInformative => fully_informative(lambda),
            PolicyKind::Uninformative => uninformative(lambda),
            PolicyKind::Hybrid => hybrid_tagging(lambda, cost),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::FullyInformative => "fully_informative",
            PolicyKind::Uninformative => "uninformative",
            PolicyKind::Hybrid => "hybrid",
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Maximum implementable effort: the root of `c'(λ) = 1`, by bisection on the
/// strictly increasing marginal cost.
pub fn lambda_bar(cost: &CostFunction) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cost.marginal(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (cost.marginal(lo) - 1.0).abs() < (cost.marginal(hi) - 1.0).abs() {
        lo
    } else {
        hi
    }
}

fn check_feasible(lambda: f64, cost: &CostFunction) -> Result<f64> {
    check_unit("effort", lambda)?;
    let dc = cost.marginal(lambda);
    if dc > 1.0 + FEASIBILITY_TOL {
        return Err(Error::InfeasibleEffort {
            lambda,
            lambda_bar: lambda_bar(cost),
        });
    }
    Ok(dc.min(1.0))
}

/// Three-point posterior on `{0, λ, 1}` that makes effort `λ` incentive
/// compatible: `τ(0) = (1−λ)c'(λ)`, `τ(λ) = 1 − c'(λ)`, `τ(1) = λc'(λ)`.
///
/// At `λ = λ̄` the middle weight vanishes and this is the fully informative
/// posterior.
pub fn hybrid_tagging(lambda: f64, cost: &CostFunction) -> Result<PosteriorDistribution> {
    let dc = check_feasible(lambda, cost)?;
    let middle = 1.0 - dc;
    if middle < WEIGHT_TOL {
        return fully_informative(lambda);
    }
    PosteriorDistribution::new(
        vec![0.0, lambda, 1.0],
        vec![(1.0 - lambda) * dc, middle, lambda * dc],
    )
}

/// Tags reveal the state: mass `1 − λ` on belief 0 and `λ` on belief 1.
pub fn fully_informative(lambda: f64) -> Result<PosteriorDistribution> {
    check_unit("effort", lambda)?;
    PosteriorDistribution::new(vec![0.0, 1.0], vec![1.0 - lambda, lambda])
}

/// Tags carry no information: the posterior is the prior.
pub fn uninformative(lambda: f64) -> Result<PosteriorDistribution> {
    check_unit("effort", lambda)?;
    PosteriorDistribution::degenerate(lambda)
}

/// Expected share of negative comments in the long run, `E_τ[1 − μ]`.
pub fn equilibrium_trend(tau: &PosteriorDistribution) -> f64 {
    tau.expectation(|mu| 1.0 - mu)
}

/// Gap in the agent's first-order condition under policy `π` when beliefs are
/// formed with effort `λ`: `v̄_A(1|π) − v̄_A(0|π) − c'(λ)`.
fn effort_foc_gap(pi: &SignalingPolicy, lambda: f64, cost: &CostFunction) -> f64 {
    let prior = Prior::new(lambda).expect("scan stays in [0, 1]");
    let gain: f64 = pi
        .tag_posteriors(prior)
        .into_iter()
        .map(|(s, _, mu)| (pi.prob(State::Accurate, s) - pi.prob(State::Fake, s)) * mu)
        .sum();
    gain - cost.marginal(lambda)
}

/// Effort the agent exerts in equilibrium under a fixed tagging policy.
///
/// Candidates are the fixed points of the first-order condition (beliefs
/// formed with the same effort they respond to) located on a 1e-4 scan and
/// refined by bisection, plus the boundary `λ = 0`. Among candidates the one
/// the sender likes best is returned; remaining ties go to the lower effort.
pub fn agent_best_effort(pi: &SignalingPolicy, cost: &CostFunction) -> f64 {
    let gap = |l: f64| effort_foc_gap(pi, l, cost);
    let grid = |i: usize| i as f64 / EFFORT_SCAN_STEPS as f64;

    let mut candidates = vec![0.0];
    let mut prev = gap(grid(0));
    for i in 1..=EFFORT_SCAN_STEPS {
        let l = grid(i);
        let cur = gap(l);
        if cur == 0.0 {
            candidates.push(l);
        } else if prev != 0.0 && prev.signum() != cur.signum() {
            let (mut lo, mut hi) = (grid(i - 1), l);
            let lo_sign = prev.signum();
            while hi - lo > EFFORT_ROOT_TOL {
                let mid = 0.5 * (lo + hi);
                if gap(mid).signum() == lo_sign {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            candidates.push(0.5 * (lo + hi));
        }
        prev = cur;
    }

    let sender_utility = |l: f64| {
        posterior_from_policy(pi, l)
            .map(|tau| expected_sender_value(&tau))
            .unwrap_or(f64::NEG_INFINITY)
    };
    let mut best = (candidates[0], sender_utility(candidates[0]));
    for &l in &candidates[1..] {
        let u = sender_utility(l);
        if u > best.1 + 1e-12 {
            best = (l, u);
        }
    }
    best.0
}

/// Sender-optimal posterior at a fixed implementable effort, by exhaustive
/// search over support triples of a uniform belief grid (augmented with `λ`).
///
/// For each triple the weights meeting `Σw = 1`, `E[μ] = λ`, `E[f] = 0` are
/// the unique solution of a 3×3 system; nonnegative solutions are feasible
/// and the one with the highest `E[v_S]` wins (earliest triple on ties).
pub fn optimize_tau_given_lambda(
    lambda: f64,
    cost: &CostFunction,
    grid_size: usize,
) -> Result<PosteriorDistribution> {
    optimize_tau_with(lambda, cost, grid_size, Execution::Sequential)
}

/// [`optimize_tau_given_lambda`] with the outer enumeration index spread over
/// `exec`.
pub fn optimize_tau_with(
    lambda: f64,
    cost: &CostFunction,
    grid_size: usize,
    exec: Execution,
) -> Result<PosteriorDistribution> {
    if grid_size < MIN_GRID {
        return Err(Error::OutOfRange {
            name: "belief grid size",
            value: grid_size as f64,
            range: ">= 11",
        });
    }
    prior_spread(lambda)?;
    check_feasible(lambda, cost)?;

    let mut beliefs: Vec<f64> = (0..grid_size)
        .map(|i| i as f64 / (grid_size - 1) as f64)
        .chain(std::iter::once(lambda))
        .collect();
    beliefs.sort_by(f64::total_cmp);
    beliefs.dedup_by(|a, b| (*a - *b).abs() <= BELIEF_TOL);
    let ic: Vec<f64> = beliefs
        .iter()
        .map(|&mu| ic_integrand(Belief::new(mu)?, lambda, cost))
        .collect::<Result<_>>()?;
    let value: Vec<f64> = beliefs
        .iter()
        .map(|&mu| sender_value(Belief::new(mu).expect("grid in [0, 1]")))
        .collect();

    // Any feasible triple must straddle λ, so its lowest point sits at or below it.
    let n = beliefs.len();
    let split = beliefs.partition_point(|&mu| mu <= lambda);

    let per_first = exec.map_indexed(split, |i| {
        let mut best: Option<(f64, [usize; 3], [f64; 3])> = None;
        for j in i + 1..n {
            for l in (j + 1).max(split)..n {
                let (fi, fj, fl) = (ic[i], ic[j], ic[l]);
                if fi.min(fj).min(fl) > 0.0 || fi.max(fj).max(fl) < 0.0 {
                    continue;
                }
                let a = [
                    [1.0, 1.0, 1.0],
                    [beliefs[i], beliefs[j], beliefs[l]],
                    [fi, fj, fl],
                ];
                let Some(w) = solve3(a, [1.0, lambda, 0.0]) else {
                    continue;
                };
                if w.iter().any(|&x| x < -WEIGHT_TOL) {
                    continue;
                }
                let v = w[0] * value[i] + w[1] * value[j] + w[2] * value[l];
                if best.is_none_or(|b| v > b.0 + 1e-12) {
                    best = Some((v, [i, j, l], w));
                }
            }
        }
        best
    });
    let mut best: Option<(f64, [usize; 3], [f64; 3])> = None;
    for cand in per_first.into_iter().flatten() {
        if best.is_none_or(|b| cand.0 > b.0 + 1e-12) {
            best = Some(cand);
        }
    }
    let (_, idx, w) = best.ok_or(Error::NoFeasiblePosterior { lambda })?;

    let total: f64 = w.iter().map(|x| x.max(0.0)).sum();
    let points = idx
        .iter()
        .zip(w)
        .map(|(&i, x)| (beliefs[i], x.max(0.0) / total))
        .collect();
    let tau = PosteriorDistribution::from_points(points)?.pruned(WEIGHT_TOL);

    let plausibility_gap = (tau.mean() - lambda).abs();
    let ic_residual = expected_ic_residual(&tau, lambda, cost)?;
    if plausibility_gap > CONSTRAINT_TOL || ic_residual.abs() > CONSTRAINT_TOL {
        return Err(Error::ConstraintViolation {
            plausibility_gap,
            ic_residual,
        });
    }
    Ok(tau)
}

/// Outcome of the sender's joint optimization over effort and posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub lambda_star: f64,
    pub tau_star: PosteriorDistribution,
    pub sender_value: f64,
    pub ic_residual: f64,
    pub plausibility_gap: f64,
    pub oracle_grid_size: usize,
    pub lambda_bar: f64,
    /// Spacing of the effort sweep.
    pub lambda_step: f64,
    /// `(λ, V^λ)` for every swept effort.
    pub sweep: Vec<(f64, f64)>,
}

/// Sweeps `λ` over `lambda_grid` uniform points of `(0, λ̄]`, solves the
/// sender's problem at each with the enumeration oracle and returns the best
/// pair (lowest `λ` on exact ties).
///
/// Fails with [`Error::OracleMismatch`] unless the winner is within one sweep
/// step of `λ̄` and, when it is `λ̄` itself, fully informative.
pub fn sender_optimal_equilibrium(
    cost: &CostFunction,
    lambda_grid: usize,
    belief_grid: usize,
) -> Result<EquilibriumReport> {
    sender_optimal_equilibrium_with(cost, lambda_grid, belief_grid, Execution::default())
}

pub fn sender_optimal_equilibrium_with(
    cost: &CostFunction,
    lambda_grid: usize,
    belief_grid: usize,
    exec: Execution,
) -> Result<EquilibriumReport> {
    if lambda_grid < MIN_GRID {
        return Err(Error::OutOfRange {
            name: "effort grid size",
            value: lambda_grid as f64,
            range: ">= 11",
        });
    }
    let bar = lambda_bar(cost);
    let step = bar / lambda_grid as f64;
    let efforts: Vec<f64> = (1..=lambda_grid)
        .map(|i| if i == lambda_grid { bar } else { bar * i as f64 / lambda_grid as f64 })
        .collect();

    let solved = exec.try_map_indexed(efforts.len(), |i| {
        optimize_tau_with(efforts[i], cost, belief_grid, Execution::Sequential)
            .map(|tau| (expected_sender_value(&tau), tau))
    })?;

    let mut best = 0;
    for (i, (v, _)) in solved.iter().enumerate() {
        if *v > solved[best].0 {
            best = i;
        }
    }
    let sweep = efforts.iter().zip(&solved).map(|(&l, (v, _))| (l, *v)).collect();
    let lambda_star = efforts[best];
    let (value, tau_star) = solved[best].clone();

    if (lambda_star - bar).abs() > step * (1.0 + 1e-9) {
        return Err(Error::OracleMismatch(format!(
            "optimal effort {lambda_star} is more than one step from {bar}"
        )));
    }
    if best == efforts.len() - 1 && tau_star.interior_mass() > CONSTRAINT_TOL {
        return Err(Error::OracleMismatch(format!(
            "optimum at the maximal effort puts mass {} on interior beliefs",
            tau_star.interior_mass()
        )));
    }

    Ok(EquilibriumReport {
        ic_residual: expected_ic_residual(&tau_star, lambda_star, cost)?,
        plausibility_gap: (tau_star.mean() - lambda_star).abs(),
        lambda_star,
        tau_star,
        sender_value: value,
        oracle_grid_size: belief_grid,
        lambda_bar: bar,
        lambda_step: step,
        sweep,
    })
}
