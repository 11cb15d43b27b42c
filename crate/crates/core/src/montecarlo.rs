//! Scenario ensembles: draw the post's state and tag, map the induced belief
//! to comment probabilities, run the cascade, aggregate trend curves.
//!
//! Replications are processed in fixed-size chunks. Chunks may run in
//! parallel but are merged in index order, so summaries are bit-identical for
//! a given base seed regardless of thread count.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::branching::{replication_rng, simulate_with_rng, BranchingConfig, Trajectory};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::game_core::{CostFunction, State, BELIEF_TOL};
use crate::policy::PolicyKind;

const CHUNK: usize = 32;

/// Which replications enter the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// Draw state and tag from their joint distribution.
    #[default]
    None,
    /// Fix the true state and draw the tag given it.
    State(u8),
    /// Fix the tag, identified by the posterior it induces.
    Tag(f64),
}

/// How tags are assigned to replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagSampling {
    /// Replication `r` draws its uniform from `[r/R, (r+1)/R)`, so each
    /// (state, tag) cell gets its expected share of replications up to
    /// rounding.
    #[default]
    Stratified,
    /// Plain i.i.d. draws.
    Independent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub policy: PolicyKind,
    /// Hessian parameter of the quadratic effort cost.
    pub k: f64,
    pub lambda: f64,
    pub branching: BranchingConfig,
    pub replications: usize,
    pub conditioning: Conditioning,
    pub sampling: TagSampling,
}

impl Scenario {
    pub fn new(policy: PolicyKind, k: f64, lambda: f64, replications: usize) -> Self {
        Scenario {
            policy,
            k,
            lambda,
            branching: BranchingConfig::default(),
            replications,
            conditioning: Conditioning::None,
            sampling: TagSampling::Stratified,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        self.branching.validate()?;
        self.cells().map(|_| ())
    }

    /// Joint `(state, belief, probability)` cells under the scenario's
    /// conditioning, with probabilities summing to one.
    fn cells(&self) -> Result<Vec<Cell>> {
        let cost = CostFunction::quadratic(self.k)?;
        let tau = self.policy.posterior(self.lambda, &cost)?;
        let mut cells: Vec<Cell> = tau
            .points()
            .iter()
            .flat_map(|&(mu, w)| {
                [
                    Cell { state: State::Fake, belief: mu, prob: w * (1.0 - mu) },
                    Cell { state: State::Accurate, belief: mu, prob: w * mu },
                ]
            })
            .filter(|c| c.prob > 0.0)
            .collect();
        match self.conditioning {
            Conditioning::None => {}
            Conditioning::State(omega) => {
                let state = State::from_index(omega)?;
                cells.retain(|c| c.state == state);
                if cells.is_empty() {
                    return Err(Error::ImpossibleCondition { omega });
                }
            }
            Conditioning::Tag(mu) => {
                cells.retain(|c| (c.belief - mu).abs() <= BELIEF_TOL);
                if cells.is_empty() {
                    return Err(Error::InvalidConfig(format!(
                        "no tag of the {} policy induces belief {mu}",
                        self.policy
                    )));
                }
            }
        }
        let total: f64 = cells.iter().map(|c| c.prob).sum();
        cells.iter_mut().for_each(|c| c.prob /= total);
        Ok(cells)
    }

    /// Theoretical mean final trend `E[1 − μ]` under the scenario's
    /// conditioning.
    pub fn predicted_eta(&self) -> Result<f64> {
        Ok(self.cells()?.iter().map(|c| c.prob * (1.0 - c.belief)).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    state: State,
    belief: f64,
    prob: f64,
}

/// Replications that received one tag.
#[derive(Debug, Clone, PartialEq)]
pub struct TagEnsemble {
    /// Posterior induced by the tag.
    pub belief: f64,
    /// Share of replications.
    pub weight: f64,
    pub replications: usize,
    pub mean_eta: Vec<f64>,
}

impl TagEnsemble {
    pub fn final_mean_eta(&self) -> f64 {
        *self.mean_eta.last().expect("nonempty curve")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    /// Per-event mean trend across replications (index = event count).
    pub mean_eta: Vec<f64>,
    /// Per-event sample standard deviation of the trend.
    pub std_eta: Vec<f64>,
    pub mean_zbar: Vec<f64>,
    pub mean_xbar: Vec<f64>,
    /// Sub-ensembles by tag, ordered by induced belief. Empty for fixed-α
    /// ensembles.
    pub per_tag: Vec<TagEnsemble>,
    pub extinction_rate: f64,
    pub final_mean_eta: f64,
    pub final_std_eta: f64,
    /// `E[1 − μ]` for scenarios, the stationary trend for fixed-α ensembles.
    pub predicted_eta: f64,
    pub replications: usize,
}

impl EnsembleSummary {
    /// Standard error of the final mean trend.
    pub fn final_std_error(&self) -> f64 {
        self.final_std_eta / (self.replications as f64).sqrt()
    }
}

/// Running per-event mean and sum of squared deviations (Welford/Chan).
#[derive(Debug, Clone)]
struct CurveStats {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl CurveStats {
    fn new(len: usize) -> Self {
        CurveStats {
            count: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push<I: Iterator<Item = f64>>(&mut self, values: I) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), v) in self.mean.iter_mut().zip(&mut self.m2).zip(values) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    fn merge(&mut self, other: &CurveStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.count += other.count;
    }

    fn std(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.mean.len()];
        }
        self.m2.iter().map(|s| (s / (self.count - 1) as f64).sqrt()).collect()
    }
}

struct ChunkStats {
    eta: CurveStats,
    zbar: CurveStats,
    xbar: CurveStats,
    per_cell: Vec<CurveStats>,
    extinct: usize,
}

impl ChunkStats {
    fn new(len: usize, cells: usize) -> Self {
        ChunkStats {
            eta: CurveStats::new(len),
            zbar: CurveStats::new(len),
            xbar: CurveStats::new(len),
            per_cell: vec![CurveStats::new(len); cells],
            extinct: 0,
        }
    }

    fn push(&mut self, cell: usize, t: &Trajectory, len: usize) {
        self.eta.push((0..len).map(|n| t.at(n).eta));
        self.zbar.push((0..len).map(|n| t.at(n).z_bar));
        self.xbar.push((0..len).map(|n| t.at(n).x_bar));
        if !self.per_cell.is_empty() {
            self.per_cell[cell].push((0..len).map(|n| t.at(n).eta));
        }
        self.extinct += t.extinct as usize;
    }

    fn merge(&mut self, other: &ChunkStats) {
        self.eta.merge(&other.eta);
        self.zbar.merge(&other.zbar);
        self.xbar.merge(&other.xbar);
        for (a, b) in self.per_cell.iter_mut().zip(&other.per_cell) {
            a.merge(b);
        }
        self.extinct += other.extinct;
    }
}

/// Runs `replications` cascades, replication `r` on stream `r` of
/// `base_seed`. `draw` picks the replication's cell index and `(α_xx, α_yx)`
/// from its generator before the cascade starts.
fn run_ensemble<D>(
    branching: &BranchingConfig,
    replications: usize,
    cells: usize,
    base_seed: u64,
    exec: Execution,
    draw: D,
) -> Result<ChunkStats>
where
    D: Fn(usize, &mut rand_chacha::ChaCha8Rng) -> (usize, f64, f64) + Sync,
{
    branching.validate()?;
    let len = branching.n_events as usize + 1;
    let chunks = replications.div_ceil(CHUNK);
    let partial = exec.try_map_indexed(chunks, |c| -> Result<ChunkStats> {
        let mut stats = ChunkStats::new(len, cells);
        for r in c * CHUNK..((c + 1) * CHUNK).min(replications) {
            let mut rng = replication_rng(base_seed, r as u64);
            let (cell, axx, ayx) = draw(r, &mut rng);
            let t = simulate_with_rng(branching, axx, ayx, &mut rng)?;
            stats.push(cell, &t, len);
        }
        Ok(stats)
    })?;
    let mut total = ChunkStats::new(len, cells);
    for p in &partial {
        total.merge(p);
    }
    Ok(total)
}

fn summarize(stats: ChunkStats, per_tag: Vec<TagEnsemble>, predicted_eta: f64) -> EnsembleSummary {
    let replications = stats.eta.count;
    let std_eta = stats.eta.std();
    EnsembleSummary {
        final_mean_eta: *stats.eta.mean.last().expect("nonempty"),
        final_std_eta: *std_eta.last().expect("nonempty"),
        mean_eta: stats.eta.mean,
        std_eta,
        mean_zbar: stats.zbar.mean,
        mean_xbar: stats.xbar.mean,
        per_tag,
        extinction_rate: stats.extinct as f64 / replications as f64,
        predicted_eta,
        replications,
    }
}

/// Runs a scenario with the default execution strategy.
pub fn run_scenario(s: &Scenario, base_seed: u64) -> Result<EnsembleSummary> {
    run_scenario_with(s, base_seed, Execution::default())
}

/// One post per replication: draw (state, tag) from the scenario's policy,
/// set `α_xx = α_yx = 1 − μ` for the induced belief `μ`, and run the cascade.
pub fn run_scenario_with(s: &Scenario, base_seed: u64, exec: Execution) -> Result<EnsembleSummary> {
    s.validate()?;
    let cells = s.cells()?;
    let cumulative: Vec<f64> = cells
        .iter()
        .scan(0.0, |acc, c| {
            *acc += c.prob;
            Some(*acc)
        })
        .collect();
    let r_total = s.replications as f64;
    let sampling = s.sampling;
    let draw = |r: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let u: f64 = rng.random();
        let u = match sampling {
            TagSampling::Stratified => (r as f64 + u) / r_total,
            TagSampling::Independent => u,
        };
        let idx = cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(cells.len() - 1);
        let alpha = 1.0 - cells[idx].belief;
        (idx, alpha, alpha)
    };
    let stats = run_ensemble(&s.branching, s.replications, cells.len(), base_seed, exec, draw)?;

    // Group cells by the tag (belief) they carry.
    let mut per_tag: Vec<TagEnsemble> = Vec::new();
    let mut groups: Vec<CurveStats> = Vec::new();
    for (cell, curve) in cells.iter().zip(&stats.per_cell) {
        match per_tag.iter().position(|t| (t.belief - cell.belief).abs() <= BELIEF_TOL) {
            Some(i) => groups[i].merge(curve),
            None => {
                per_tag.push(TagEnsemble {
                    belief: cell.belief,
                    weight: 0.0,
                    replications: 0,
                    mean_eta: Vec::new(),
                });
                groups.push(curve.clone());
            }
        }
    }
    let per_tag: Vec<TagEnsemble> = per_tag
        .into_iter()
        .zip(groups)
        .filter(|(_, g)| g.count > 0)
        .map(|(t, g)| TagEnsemble {
            weight: g.count as f64 / s.replications as f64,
            replications: g.count,
            mean_eta: g.mean,
            ..t
        })
        .collect();
    let mut per_tag = per_tag;
    per_tag.sort_by(|a, b| a.belief.total_cmp(&b.belief));

    Ok(summarize(stats, per_tag, s.predicted_eta()?))
}

/// Ensemble of cascades at fixed comment probabilities.
pub fn run_branching_ensemble(
    branching: &BranchingConfig,
    alpha_xx: f64,
    alpha_yx: f64,
    replications: usize,
    base_seed: u64,
    exec: Execution,
) -> Result<EnsembleSummary> {
    if replications == 0 {
        return Err(Error::InvalidConfig("replications must be at least 1".into()));
    }
    let predicted = crate::branching::eta_star(alpha_xx, alpha_yx)?;
    let stats = run_ensemble(branching, replications, 0, base_seed, exec, |_, _| {
        (0, alpha_xx, alpha_yx)
    })?;
    Ok(summarize(stats, Vec::new(), predicted))
}

/// One row of a trend-versus-effort sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    /// `1 − λ`.
    pub predicted_eta: f64,
    pub simulated_eta: f64,
    pub std_error: f64,
}

/// Hybrid-tagging ensembles at each effort (common random numbers across
/// efforts). Every effort is checked for feasibility before any simulation.
pub fn trend_vs_effort_sweep(
    k: f64,
    lambdas: &[f64],
    branching: &BranchingConfig,
    replications: usize,
    base_seed: u64,
) -> Result<Vec<SweepRow>> {
    let cost = CostFunction::quadratic(k)?;
    for &l in lambdas {
        PolicyKind::Hybrid.posterior(l, &cost)?;
    }
    lambdas
        .iter()
        .map(|&lambda| {
            let scenario = Scenario {
                branching: branching.clone(),
                ..Scenario::new(PolicyKind::Hybrid, k, lambda, replications)
            };
            let summary = run_scenario(&scenario, base_seed)?;
            Ok(SweepRow {
                lambda,
                predicted_eta: 1.0 - lambda,
                simulated_eta: summary.final_mean_eta,
                std_error: summary.final_std_error(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(policy: PolicyKind, k: f64, lambda: f64, r: usize) -> Scenario {
        Scenario {
            branching: BranchingConfig { n_events: 300, ..BranchingConfig::default() },
            ..Scenario::new(policy, k, lambda, r)
        }
    }

    #[test]
    fn curve_stats_merge_matches_direct() {
        let data: Vec<Vec<f64>> = (0..37).map(|i| vec![i as f64, (i * i) as f64 * 0.1]).collect();
        let mut direct = CurveStats::new(2);
        data.iter().for_each(|d| direct.push(d.iter().copied()));
        let mut merged = CurveStats::new(2);
        for chunk in data.chunks(5) {
            let mut c = CurveStats::new(2);
            chunk.iter().for_each(|d| c.push(d.iter().copied()));
            merged.merge(&c);
        }
        for i in 0..2 {
            assert!((direct.mean[i] - merged.mean[i]).abs() < 1e-12);
            assert!((direct.std()[i] - merged.std()[i]).abs() < 1e-9);
        }
        assert!((direct.mean[0] - 18.0).abs() < 1e-12);
    }

    #[test]
    fn stratified_tags_match_weights() {
        let s = small(PolicyKind::Hybrid, 1.0, 0.4, 500);
        let summary = run_scenario(&s, 3).unwrap();
        let weights: Vec<f64> = summary.per_tag.iter().map(|t| t.weight).collect();
        for (w, want) in weights.iter().zip([0.48, 0.2, 0.32]) {
            assert!((w - want).abs() <= 1.0 / 500.0 + 1e-12, "{weights:?}");
        }
        assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn law_of_total_trend() {
        for sampling in [TagSampling::Stratified, TagSampling::Independent] {
            let s = Scenario { sampling, ..small(PolicyKind::Hybrid, 0.6, 0.7, 200) };
            let summary = run_scenario(&s, 17).unwrap();
            let mix: f64 = summary.per_tag.iter().map(|t| t.weight * t.final_mean_eta()).sum();
            assert!((mix - summary.final_mean_eta).abs() < 1e-12);
        }
    }

    #[test]
    fn reproducible_and_schedule_independent() {
        let s = small(PolicyKind::Hybrid, 1.0, 0.3, 100);
        let a = run_scenario_with(&s, 5, Execution::Parallel).unwrap();
        let b = run_scenario_with(&s, 5, Execution::Sequential).unwrap();
        let c = run_scenario_with(&s, 5, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_ne!(a, run_scenario(&s, 6).unwrap());
    }

    #[test]
    fn conditioning_on_state() {
        let s = Scenario {
            conditioning: Conditioning::State(1),
            ..small(PolicyKind::FullyInformative, 1.0, 0.5, 50)
        };
        let summary = run_scenario(&s, 1).unwrap();
        assert_eq!(summary.predicted_eta, 0.0);
        assert!(summary.final_mean_eta < 0.05);
        assert_eq!(summary.per_tag.len(), 1);

        let s = Scenario {
            conditioning: Conditioning::State(1),
            ..small(PolicyKind::Uninformative, 1.0, 0.0, 10)
        };
        assert_eq!(run_scenario(&s, 1).unwrap_err(), Error::ImpossibleCondition { omega: 1 });
    }

    #[test]
    fn conditioning_on_tag() {
        let s = Scenario {
            conditioning: Conditioning::Tag(0.4),
            ..small(PolicyKind::Hybrid, 1.0, 0.4, 40)
        };
        let summary = run_scenario(&s, 1).unwrap();
        assert!((summary.predicted_eta - 0.6).abs() < 1e-15);
        assert_eq!(summary.per_tag.len(), 1);
        let s = Scenario { conditioning: Conditioning::Tag(0.3), ..s };
        assert!(matches!(run_scenario(&s, 1), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn infeasible_hybrid_is_rejected() {
        let s = small(PolicyKind::Hybrid, 1.0, 0.6, 10);
        assert!(matches!(run_scenario(&s, 0), Err(Error::InfeasibleEffort { .. })));
        assert!(matches!(
            trend_vs_effort_sweep(1.0, &[0.2, 0.7], &BranchingConfig::default(), 10, 0),
            Err(Error::InfeasibleEffort { .. })
        ));
    }

    #[test]
    fn agrees_with_theory_within_standard_error() {
        for (policy, k, l) in [
            (PolicyKind::Hybrid, 1.0, 0.3),
            (PolicyKind::FullyInformative, 1.0, 0.4),
            (PolicyKind::Uninformative, 2.0, 0.2),
        ] {
            let summary = run_scenario(&small(policy, k, l, 200), 23).unwrap();
            let bound = 3.0 * summary.final_std_error() + 0.01;
            assert!(
                (summary.final_mean_eta - summary.predicted_eta).abs() <= bound,
                "{policy}: {} vs {}",
                summary.final_mean_eta,
                summary.predicted_eta
            );
            assert!(summary.mean_eta.iter().all(|e| (0.0..=1.0).contains(e)));
        }
    }

    #[test]
    fn fixed_alpha_ensemble() {
        let b = BranchingConfig { n_events: 500, ..BranchingConfig::default() };
        let s = run_branching_ensemble(&b, 0.5, 0.5, 64, 2, Execution::default()).unwrap();
        assert_eq!(s.mean_eta.len(), 501);
        assert_eq!(s.predicted_eta, 0.5);
        assert!((s.final_mean_eta - 0.5).abs() < 0.02);
        assert!(s.per_tag.is_empty());
        assert!(run_branching_ensemble(&b, 1.0, 0.0, 4, 0, Execution::default()).is_err());
    }
}
