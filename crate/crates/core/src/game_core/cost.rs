use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const ASSUMPTION_GRID: usize = 1000;

/// Agent's effort cost `c` with its first and second derivatives.
///
/// Construction checks the regularity conditions the equilibrium analysis
/// relies on: `c(0) = c'(0) = 0`, `c'(1) > 1`, `c'` strictly increasing and
/// `c'' > 0` on the interior, sampled on a 1e-3 grid.
#[derive(Clone)]
pub struct CostFunction {
    value: Scalar,
    marginal: Scalar,
    curvature: Scalar,
    hessian_param: Option<f64>,
}

impl fmt::Debug for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hessian_param {
            Some(k) => write!(f, "CostFunction::quadratic({k})"),
            None => f.write_str("CostFunction::custom"),
        }
    }
}

impl CostFunction {
    pub fn new<C, D, H>(value: C, marginal: D, curvature: H) -> Result<Self>
    where
        C: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        H: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let cost = CostFunction {
            value: Arc::new(value),
            marginal: Arc::new(marginal),
            curvature: Arc::new(curvature),
            hessian_param: None,
        };
        cost.validate()?;
        Ok(cost)
    }

    /// `c(λ) = kλ²`; requires `k > 1/2` so that `c'(1) = 2k > 1`.
    pub fn quadratic(k: f64) -> Result<Self> {
        if !k.is_finite() {
            return Err(Error::InvalidCost(format!("hessian parameter k = {k} is not finite")));
        }
        let mut cost = CostFunction {
            value: Arc::new(move |l| k * l * l),
            marginal: Arc::new(move |l| 2.0 * k * l),
            curvature: Arc::new(move |_| 2.0 * k),
            hessian_param: None,
        };
        cost.validate()?;
        cost.hessian_param = Some(k);
        Ok(cost)
    }

    pub fn value(&self, lambda: f64) -> f64 {
        (self.value)(lambda)
    }

    pub fn marginal(&self, lambda: f64) -> f64 {
        (self.marginal)(lambda)
    }

    pub fn curvature(&self, lambda: f64) -> f64 {
        (self.curvature)(lambda)
    }

    /// `k` for the quadratic family, `None` for custom costs.
    pub fn hessian_param(&self) -> Option<f64> {
        self.hessian_param
    }

    fn validate(&self) -> Result<()> {
        let c0 = self.value(0.0);
        let dc0 = self.marginal(0.0);
        let dc1 = self.marginal(1.0);
        if !(c0.abs() <= 1e-12) {
            return Err(Error::InvalidCost(format!("c(0) = {c0}, must be 0")));
        }
        if !(dc0.abs() <= 1e-12) {
            return Err(Error::InvalidCost(format!("c'(0) = {dc0}, must be 0")));
        }
        if !(dc1 > 1.0) {
            return Err(Error::InvalidCost(format!(
                "marginal cost at full effort c'(1) = {dc1} must exceed 1"
            )));
        }
        let mut prev = dc0;
        for i in 1..=ASSUMPTION_GRID {
            let l = i as f64 / ASSUMPTION_GRID as f64;
            let d = self.marginal(l);
            if !(d > prev) {
                return Err(Error::InvalidCost(format!(
                    "c' is not strictly increasing near {l}"
                )));
            }
            prev = d;
            if i < ASSUMPTION_GRID && !(self.curvature(l) > 0.0) {
                return Err(Error::InvalidCost(format!("c''({l}) is not positive")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_family() {
        let c = CostFunction::quadratic(1.5).unwrap();
        assert_eq!(c.value(0.5), 0.375);
        assert_eq!(c.marginal(0.5), 1.5);
        assert_eq!(c.curvature(0.2), 3.0);
        assert_eq!(c.hessian_param(), Some(1.5));
    }

    #[test]
    fn quadratic_requires_k_above_half() {
        for k in [0.5, 0.4, 0.0, -1.0, f64::NAN] {
            assert!(matches!(CostFunction::quadratic(k), Err(Error::InvalidCost(_))), "k={k}");
        }
        let msg = CostFunction::quadratic(0.4).unwrap_err().to_string();
        assert!(msg.contains("c'(1)"), "{msg}");
    }

    #[test]
    fn custom_cost_checks_assumptions() {
        // Quartic-plus-quadratic cost satisfies everything.
        assert!(CostFunction::new(
            |l| l * l + l.powi(4),
            |l| 2.0 * l + 4.0 * l.powi(3),
            |l| 2.0 + 12.0 * l * l
        )
        .is_ok());
        // Linear cost: c'(0) != 0.
        assert!(CostFunction::new(|l| 2.0 * l, |_| 2.0, |_| 0.0).is_err());
        // Concave marginal cost that later decreases.
        assert!(CostFunction::new(
            |l| 3.0 * l * l - 2.0 * l.powi(3),
            |l| 6.0 * l - 6.0 * l * l,
            |l| 6.0 - 12.0 * l
        )
        .is_err());
    }
}
