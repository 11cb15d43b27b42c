//! Two-type wake-up branching process for comment cascades.
//!
//! `X` counts users holding a post with a negative comment, `Y` those holding
//! a positive one. At each wake-up event one holder (chosen proportionally to
//! the counts) becomes active, comments negatively with probability `α_xx`
//! (if it received a negative comment) or `α_yx` (positive), and forwards the
//! post with its own comment to `ξ ~ Bin(N, q)` friends. The trend is
//! `η = X / (X + Y)`.
//!
//! # Randomness
//!
//! Every run draws from a [`ChaCha8Rng`] seeded with `seed_from_u64(seed)`;
//! replication `r` of an ensemble uses stream `r` of that generator
//! ([`replication_rng`]), so each replication is reproducible on its own and
//! independent of scheduling. Binomial draws are sums of Bernoulli trials for
//! `N ≤ 64` and a mode-centred inverse transform above that.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::game_core::Belief;

const BERNOULLI_SUM_MAX: u64 = 64;
/// Below this log-probability the mode of a binomial underflows.
const LN_UNDERFLOW: f64 = -700.0;
const MAX_ODE_SAMPLES: usize = 1000;

/// How the number of friends `N` of a waking user is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffspringModel {
    /// `N = m_N` for every user.
    FixedN,
    /// `N ~ Poisson(m_N)`.
    PoissonN,
}

/// Offspring distribution `ξ ~ Bin(N, q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offspring {
    pub model: OffspringModel,
    pub mean_friends: f64,
    pub share_prob: f64,
}

impl Offspring {
    /// `E[ξ] = m_N · q`.
    pub fn mean(&self) -> f64 {
        self.mean_friends * self.share_prob
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let n = match self.model {
            OffspringModel::FixedN => self.mean_friends as u64,
            OffspringModel::PoissonN => Poisson::new(self.mean_friends)
                .expect("validated positive mean")
                .sample(rng) as u64,
        };
        binomial(n, self.share_prob, rng)
    }
}

/// `Bin(n, p)` draw.
pub fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    if n <= BERNOULLI_SUM_MAX {
        return (0..n).filter(|_| rng.random::<f64>() < p).count() as u64;
    }
    let mode = (((n + 1) as f64 * p).floor() as u64).min(n);
    let ln_mode = ln_choose(n, mode) + mode as f64 * p.ln() + (n - mode) as f64 * (1.0 - p).ln();
    if ln_mode < LN_UNDERFLOW {
        return (0..n).filter(|_| rng.random::<f64>() < p).count() as u64;
    }
    // Inverse transform visiting outcomes outward from the mode.
    let odds = p / (1.0 - p);
    let mut u = rng.random::<f64>();
    let p_mode = ln_mode.exp();
    u -= p_mode;
    if u <= 0.0 {
        return mode;
    }
    let (mut lo, mut hi) = (mode, mode);
    let (mut p_lo, mut p_hi) = (p_mode, p_mode);
    while lo > 0 || hi < n {
        if lo > 0 {
            p_lo *= lo as f64 / ((n - lo + 1) as f64 * odds);
            lo -= 1;
            u -= p_lo;
            if u <= 0.0 {
                return lo;
            }
        }
        if hi < n {
            p_hi *= (n - hi) as f64 * odds / (hi + 1) as f64;
            hi += 1;
            u -= p_hi;
            if u <= 0.0 {
                return hi;
            }
        }
    }
    mode
}

fn ln_choose(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| (((n - k + i) as f64) / i as f64).ln()).sum()
}

/// Generator for replication `index` of an ensemble seeded with `base_seed`.
pub fn replication_rng(base_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchingConfig {
    /// Initial holders of a negative comment.
    pub x0: u64,
    /// Initial holders of a positive comment.
    pub y0: u64,
    /// Mean number of friends `m_N`.
    pub mean_friends: f64,
    /// Sharing probability `q`.
    pub share_prob: f64,
    pub offspring_model: OffspringModel,
    /// Number of wake-up events to simulate.
    pub n_events: u64,
    pub seed: u64,
}

impl Default for BranchingConfig {
    /// 50 + 50 initial holders, 50 friends, sharing probability 1/2, 1500
    /// events.
    fn default() -> Self {
        BranchingConfig {
            x0: 50,
            y0: 50,
            mean_friends: 50.0,
            share_prob: 0.5,
            offspring_model: OffspringModel::FixedN,
            n_events: 1500,
            seed: 0,
        }
    }
}

impl BranchingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.x0 + self.y0 == 0 {
            return Err(Error::InvalidConfig("x0 + y0 must be at least 1".into()));
        }
        if !(self.mean_friends > 0.0) || !self.mean_friends.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "mean_friends = {} must be positive",
                self.mean_friends
            )));
        }
        if self.offspring_model == OffspringModel::FixedN && self.mean_friends.fract() != 0.0 {
            return Err(Error::InvalidConfig(format!(
                "mean_friends = {} must be an integer for the fixed_n model",
                self.mean_friends
            )));
        }
        if !(0.0..=1.0).contains(&self.share_prob) {
            return Err(Error::InvalidConfig(format!(
                "share_prob = {} must lie in [0, 1]",
                self.share_prob
            )));
        }
        Ok(())
    }

    pub fn offspring(&self) -> Offspring {
        Offspring {
            model: self.offspring_model,
            mean_friends: self.mean_friends,
            share_prob: self.share_prob,
        }
    }

    /// Mean offspring `m = m_N · q`.
    pub fn mean_offspring(&self) -> f64 {
        self.offspring().mean()
    }

    pub fn initial_state(&self) -> BranchingState {
        BranchingState {
            x: self.x0,
            y: self.y0,
            n: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchingState {
    pub x: u64,
    pub y: u64,
    /// Wake-up events so far.
    pub n: u64,
}

impl BranchingState {
    pub fn z(&self) -> u64 {
        self.x + self.y
    }

    /// Share of negative-comment holders; `None` once extinct.
    pub fn eta(&self) -> Option<f64> {
        let z = self.z();
        (z > 0).then(|| self.x as f64 / z as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comment {
    Negative,
    Positive,
}

/// One wake-up event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub state: BranchingState,
    /// Comment held by the user who woke up.
    pub woke: Comment,
    /// Comment the user posted (and passed on).
    pub comment: Comment,
    pub offspring: u64,
}

/// Advances the process by one wake-up event.
pub fn step<R: Rng + ?Sized>(
    state: BranchingState,
    alpha_xx: f64,
    alpha_yx: f64,
    offspring: &Offspring,
    rng: &mut R,
) -> Result<Step> {
    let z = state.z();
    if z == 0 {
        return Err(Error::Extinct);
    }
    let mut next = state;
    let woke = if rng.random::<f64>() * (z as f64) < state.x as f64 {
        next.x -= 1;
        Comment::Negative
    } else {
        next.y -= 1;
        Comment::Positive
    };
    let p_negative = match woke {
        Comment::Negative => alpha_xx,
        Comment::Positive => alpha_yx,
    };
    let comment = if rng.random::<f64>() < p_negative {
        Comment::Negative
    } else {
        Comment::Positive
    };
    let xi = offspring.sample(rng);
    match comment {
        Comment::Negative => next.x += xi,
        Comment::Positive => next.y += xi,
    }
    next.n += 1;
    Ok(Step {
        state: next,
        woke,
        comment,
        offspring: xi,
    })
}

/// Snapshot after `n` events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub n: u64,
    pub x: u64,
    pub y: u64,
    pub eta: f64,
    /// `Z_n / n` (`Z_0` at `n = 0`).
    pub z_bar: f64,
    /// `X_n / n` (`X_0` at `n = 0`).
    pub x_bar: f64,
}

impl TrajectoryPoint {
    fn new(state: BranchingState, eta: f64) -> Self {
        let scale = state.n.max(1) as f64;
        TrajectoryPoint {
            n: state.n,
            x: state.x,
            y: state.y,
            eta,
            z_bar: state.z() as f64 / scale,
            x_bar: state.x as f64 / scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    /// Set when the population died out; the last point is the extinct state
    /// and its trend is frozen at the last defined value.
    pub extinct: bool,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory has an initial point")
    }

    /// Point at event `n`, holding the final point after extinction.
    pub fn at(&self, n: usize) -> &TrajectoryPoint {
        self.points.get(n).unwrap_or_else(|| self.last())
    }

    pub fn final_eta(&self) -> f64 {
        self.last().eta
    }
}

/// Probability of a negative comment under belief `μ`: `1 − E_μ[ω]`.
pub fn alpha_from_belief(mu: Belief) -> f64 {
    1.0 - mu.mu()
}

/// Limiting trend `α_yx / (1 − α_xx + α_yx)`.
pub fn eta_star(alpha_xx: f64, alpha_yx: f64) -> Result<f64> {
    check_unit("alpha_xx", alpha_xx)?;
    check_unit("alpha_yx", alpha_yx)?;
    let denom = 1.0 - alpha_xx + alpha_yx;
    if denom <= 0.0 {
        return Err(Error::DegenerateTrend);
    }
    Ok(alpha_yx / denom)
}

/// Runs `config.n_events` events (or until extinction) with the generator
/// seeded from `config.seed`.
pub fn simulate(config: &BranchingConfig, alpha_xx: f64, alpha_yx: f64) -> Result<Trajectory> {
    let mut rng = replication_rng(config.seed, 0);
    simulate_with_rng(config, alpha_xx, alpha_yx, &mut rng)
}

pub fn simulate_with_rng<R: Rng + ?Sized>(
    config: &BranchingConfig,
    alpha_xx: f64,
    alpha_yx: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    config.validate()?;
    check_unit("alpha_xx", alpha_xx)?;
    check_unit("alpha_yx", alpha_yx)?;
    let offspring = config.offspring();
    let mut state = config.initial_state();
    let mut eta = state.eta().expect("validated nonempty start");
    let mut points = Vec::with_capacity(config.n_events as usize + 1);
    points.push(TrajectoryPoint::new(state, eta));
    let mut extinct = false;
    for _ in 0..config.n_events {
        state = step(state, alpha_xx, alpha_yx, &offspring, rng)?.state;
        match state.eta() {
            Some(e) => eta = e,
            None => extinct = true,
        }
        points.push(TrajectoryPoint::new(state, eta));
        if extinct {
            break;
        }
    }
    Ok(Trajectory { points, extinct })
}

/// Sample of the mean-field ODE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdePoint {
    pub t: f64,
    pub z: f64,
    pub x: f64,
    pub eta: f64,
}

/// Mean-field vector field `(ż, ẋ)`; frozen once the population vanishes.
pub fn mean_field(m: f64, alpha_xx: f64, alpha_yx: f64, z: f64, x: f64) -> (f64, f64) {
    if z <= 0.0 {
        return (0.0, 0.0);
    }
    let eta = x / z;
    (
        m - 1.0 - z,
        eta * (alpha_xx * m - 1.0) + (1.0 - eta) * alpha_yx * m - x,
    )
}

/// Integrates the mean-field ODE with classical fixed-step RK4 from `(z0, x0)`
/// up to `horizon`. Returns at most ~1000 evenly spaced samples, always
/// including both endpoints.
pub fn ode_integrate(
    m: f64,
    alpha_xx: f64,
    alpha_yx: f64,
    z0: f64,
    x0: f64,
    horizon: f64,
    dt: f64,
) -> Result<Vec<OdePoint>> {
    if !(z0 > 0.0) {
        return Err(Error::OutOfRange {
            name: "z0",
            value: z0,
            range: "(0, inf)",
        });
    }
    if !(dt > 0.0) || !(horizon >= dt) {
        return Err(Error::OutOfRange {
            name: "horizon/dt",
            value: horizon / dt,
            range: ">= 1",
        });
    }
    check_unit("alpha_xx", alpha_xx)?;
    check_unit("alpha_yx", alpha_yx)?;

    let steps = (horizon / dt).round() as usize;
    let h = horizon / steps as f64;
    let stride = steps.div_ceil(MAX_ODE_SAMPLES).max(1);
    let f = |z: f64, x: f64| mean_field(m, alpha_xx, alpha_yx, z, x);
    let sample = |t: f64, z: f64, x: f64| OdePoint {
        t,
        z,
        x,
        eta: if z > 0.0 { x / z } else { f64::NAN },
    };

    let (mut z, mut x) = (z0, x0);
    let mut out = vec![sample(0.0, z, x)];
    for i in 1..=steps {
        let (k1z, k1x) = f(z, x);
        let (k2z, k2x) = f(z + 0.5 * h * k1z, x + 0.5 * h * k1x);
        let (k3z, k3x) = f(z + 0.5 * h * k2z, x + 0.5 * h * k2x);
        let (k4z, k4x) = f(z + h * k3z, x + h * k3x);
        z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        if i % stride == 0 || i == steps {
            out.push(sample(i as f64 * h, z, x));
        }
    }
    Ok(out)
}

/// Limit of `(Z_n / n, X_n / n)`: `(m − 1, η* (m − 1))`.
pub fn fixed_point(m: f64, alpha_xx: f64, alpha_yx: f64) -> Result<(f64, f64)> {
    if !(m > 1.0) {
        return Err(Error::Subcritical { m });
    }
    let eta = eta_star(alpha_xx, alpha_yx)?;
    Ok((m - 1.0, eta * (m - 1.0)))
}
