//! Experiment configuration file (TOML).
//!
//! ```toml
//! schema_version = 1
//! seed = 7
//! replications = 1000
//!
//! [scenario]
//! policy = "hybrid"          # fully_informative | uninformative | hybrid
//! k = 1.0
//! lambda = 0.35
//! condition_state = 1        # optional, 0 = fake, 1 = accurate
//! # condition_belief = 0.35  # optional, select one tag by its posterior
//! sampling = "stratified"    # or "independent"
//!
//! [branching]
//! x0 = 50
//! y0 = 50
//! mean_friends = 50.0
//! share_prob = 0.5
//! offspring_model = "fixed_n" # or "poisson_n"
//! n_events = 1500
//!
//! [ensemble]
//! alpha_xx = 0.5
//! alpha_yx = 0.5
//! ode_dt = 0.001
//! # ode_horizon defaults to ln(n_events)
//!
//! [equilibrium]
//! k = 1.0
//! lambda_grid = 200
//! belief_grid = 101
//! verify_grid = 10000
//!
//! [sweep]
//! k = 1.0
//! points = 10                # uniform efforts in (0, lambda_bar]
//! # lambdas = [0.1, 0.2]     # explicit list instead
//!
//! [verify]
//! replications = 200
//! ks = [0.6, 1.0, 2.0]
//!
//! [fixtures]                 # deliberate faults for testing the verifier
//! flip_ic_sign = false
//! # subcritical_m = 0.5
//! ```
//!
//! Every section and field is optional except `schema_version`.

use std::path::Path;

use serde::Deserialize;

use bp2::branching::{BranchingConfig, OffspringModel};
use bp2::game_core::CostFunction;
use bp2::montecarlo::{Conditioning, Scenario, TagSampling};
use bp2::policy::{lambda_bar, PolicyKind};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_REPLICATIONS: usize = 1000;
pub const FAST_REPLICATIONS: usize = 100;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub branching: BranchingSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub equilibrium: EquilibriumSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub fixtures: Fixtures,
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub policy: PolicyKind,
    pub k: f64,
    pub lambda: f64,
    pub condition_state: Option<u8>,
    pub condition_belief: Option<f64>,
    pub sampling: TagSampling,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            policy: PolicyKind::Hybrid,
            k: 1.0,
            lambda: 0.5,
            condition_state: None,
            condition_belief: None,
            sampling: TagSampling::Stratified,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BranchingSection {
    pub x0: u64,
    pub y0: u64,
    pub mean_friends: f64,
    pub share_prob: f64,
    pub offspring_model: OffspringModel,
    pub n_events: u64,
}

impl Default for BranchingSection {
    fn default() -> Self {
        let b = BranchingConfig::default();
        BranchingSection {
            x0: b.x0,
            y0: b.y0,
            mean_friends: b.mean_friends,
            share_prob: b.share_prob,
            offspring_model: b.offspring_model,
            n_events: b.n_events,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub alpha_xx: f64,
    pub alpha_yx: f64,
    pub ode_dt: f64,
    pub ode_horizon: Option<f64>,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            alpha_xx: 0.5,
            alpha_yx: 0.5,
            ode_dt: 1e-3,
            ode_horizon: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumSection {
    pub k: f64,
    pub lambda_grid: usize,
    pub belief_grid: usize,
    pub verify_grid: usize,
}

impl Default for EquilibriumSection {
    fn default() -> Self {
        EquilibriumSection {
            k: 1.0,
            lambda_grid: 200,
            belief_grid: 101,
            verify_grid: 10_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub k: f64,
    pub points: usize,
    pub lambdas: Option<Vec<f64>>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            k: 1.0,
            points: 10,
            lambdas: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub replications: usize,
    pub ks: Vec<f64>,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            replications: 200,
            ks: vec![0.6, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fixtures {
    /// Evaluate the IC integrand with the wrong sign inside the verifier.
    pub flip_ic_sign: bool,
    /// Replace the branching mean offspring in the fixed-point check.
    pub subcritical_m: Option<f64>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub fast: bool,
    pub k: Option<f64>,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {msg}"))
}

fn check_cost(field: &str, k: f64) -> Result<CostFunction, CliError> {
    CostFunction::quadratic(k).map_err(|e| invalid(field, e))
}

impl Default for Config {
    fn default() -> Self {
        Config {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            replications: DEFAULT_REPLICATIONS,
            scenario: ScenarioSection::default(),
            branching: BranchingSection::default(),
            ensemble: EnsembleSection::default(),
            equilibrium: EquilibriumSection::default(),
            sweep: SweepSection::default(),
            verify: VerifySection::default(),
            fixtures: Fixtures::default(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Config =
            toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("{} is not supported (expected {SCHEMA_VERSION})", config.schema_version),
            ));
        }
        Ok(config)
    }

    /// Reads `path`, or returns defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Config::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                Config::parse(&text)
            }
        }
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if o.fast {
            self.replications = FAST_REPLICATIONS;
            self.verify.replications = self.verify.replications.min(FAST_REPLICATIONS);
        }
        if let Some(r) = o.replications {
            self.replications = r;
            self.verify.replications = r;
        }
        if let Some(k) = o.k {
            self.equilibrium.k = k;
            self.sweep.k = k;
        }
    }

    pub fn branching(&self) -> Result<BranchingConfig, CliError> {
        let b = &self.branching;
        let config = BranchingConfig {
            x0: b.x0,
            y0: b.y0,
            mean_friends: b.mean_friends,
            share_prob: b.share_prob,
            offspring_model: b.offspring_model,
            n_events: b.n_events,
            seed: self.seed,
        };
        config.validate().map_err(|e| invalid("branching", e))?;
        Ok(config)
    }

    fn replications(&self) -> Result<usize, CliError> {
        if self.replications == 0 {
            return Err(invalid("replications", "must be at least 1"));
        }
        Ok(self.replications)
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let s = &self.scenario;
        let cost = check_cost("scenario.k", s.k)?;
        if !(0.0..=1.0).contains(&s.lambda) {
            return Err(invalid("scenario.lambda", format!("{} is outside [0, 1]", s.lambda)));
        }
        if s.policy == PolicyKind::Hybrid && s.lambda > lambda_bar(&cost) {
            return Err(invalid(
                "scenario.lambda",
                format!(
                    "{} exceeds lambda_bar = {:.12} for k = {}",
                    s.lambda,
                    lambda_bar(&cost),
                    s.k
                ),
            ));
        }
        let conditioning = match (s.condition_state, s.condition_belief) {
            (Some(_), Some(_)) => {
                return Err(invalid(
                    "scenario.condition_state",
                    "cannot be combined with scenario.condition_belief",
                ))
            }
            (Some(omega), None) if omega > 1 => {
                return Err(invalid("scenario.condition_state", format!("{omega} is not 0 or 1")))
            }
            (Some(omega), None) => Conditioning::State(omega),
            (None, Some(mu)) => Conditioning::Tag(mu),
            (None, None) => Conditioning::None,
        };
        let scenario = Scenario {
            policy: s.policy,
            k: s.k,
            lambda: s.lambda,
            branching: self.branching()?,
            replications: self.replications()?,
            conditioning,
            sampling: s.sampling,
        };
        scenario.validate().map_err(|e| invalid("scenario", e))?;
        Ok(scenario)
    }

    pub fn alphas(&self) -> Result<(f64, f64), CliError> {
        let e = &self.ensemble;
        for (name, a) in [("ensemble.alpha_xx", e.alpha_xx), ("ensemble.alpha_yx", e.alpha_yx)] {
            if !(0.0..=1.0).contains(&a) {
                return Err(invalid(name, format!("{a} is outside [0, 1]")));
            }
        }
        if e.alpha_xx == 1.0 && e.alpha_yx == 0.0 {
            return Err(invalid("ensemble", "alpha_xx = 1 with alpha_yx = 0 has no stationary trend"));
        }
        if !(e.ode_dt > 0.0) {
            return Err(invalid("ensemble.ode_dt", format!("{} must be positive", e.ode_dt)));
        }
        Ok((e.alpha_xx, e.alpha_yx))
    }

    pub fn ensemble_replications(&self) -> Result<usize, CliError> {
        self.replications()
    }

    pub fn ode_horizon(&self) -> Result<f64, CliError> {
        let h = self
            .ensemble
            .ode_horizon
            .unwrap_or_else(|| (self.branching.n_events.max(2) as f64).ln());
        if !(h >= self.ensemble.ode_dt) {
            return Err(invalid("ensemble.ode_horizon", format!("{h} is shorter than one step")));
        }
        Ok(h)
    }

    pub fn equilibrium_cost(&self) -> Result<CostFunction, CliError> {
        let e = &self.equilibrium;
        if e.lambda_grid < 2 {
            return Err(invalid("equilibrium.lambda_grid", "must be at least 2"));
        }
        if e.belief_grid < 11 {
            return Err(invalid("equilibrium.belief_grid", "must be at least 11"));
        }
        if e.verify_grid < 2 {
            return Err(invalid("equilibrium.verify_grid", "must be at least 2"));
        }
        check_cost("equilibrium.k", e.k)
    }

    /// Efforts of the sweep, checked against `lambda_bar`.
    pub fn sweep_lambdas(&self) -> Result<Vec<f64>, CliError> {
        let cost = check_cost("sweep.k", self.sweep.k)?;
        let bar = lambda_bar(&cost);
        let lambdas = match &self.sweep.lambdas {
            Some(l) => l.clone(),
            None => {
                if self.sweep.points == 0 {
                    return Err(invalid("sweep.points", "must be at least 1"));
                }
                let n = self.sweep.points;
                (1..=n).map(|i| bar * i as f64 / n as f64).collect()
            }
        };
        if lambdas.is_empty() {
            return Err(invalid("sweep.lambdas", "is empty"));
        }
        for &l in &lambdas {
            if !(0.0..=bar).contains(&l) {
                return Err(invalid(
                    "sweep.lambdas",
                    format!("{l} is outside [0, lambda_bar = {bar:.12}] for k = {}", self.sweep.k),
                ));
            }
        }
        self.replications()?;
        Ok(lambdas)
    }

    pub fn verify_ks(&self) -> Result<Vec<(f64, CostFunction)>, CliError> {
        if self.verify.replications == 0 {
            return Err(invalid("verify.replications", "must be at least 1"));
        }
        self.verify
            .ks
            .iter()
            .map(|&k| check_cost("verify.ks", k).map(|c| (k, c)))
            .collect()
    }
}
