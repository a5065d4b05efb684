//! Tipping-point sensitivity analysis: how large the bias bound Δ0 must be
//! before a rejection is lost.

use crate::error::{Error, Result};
use crate::normal;
use crate::testing::{
    combined_p_value, correlation_hat, negate_transform, pooled_se, pooled_statistic,
    t1_statistic, ArmSummary, Direction, TestConfig,
};

/// Smallest Δ0 at which a test stops rejecting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TippingPoint {
    At(f64),
    /// No finite Δ0 removes the rejection.
    Insensitive,
}

impl TippingPoint {
    pub fn value(self) -> Option<f64> {
        match self {
            TippingPoint::At(v) => Some(v),
            TippingPoint::Insensitive => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TippingPoints {
    /// Pooled test T₂,Δ0(w) on its own.
    pub t2: TippingPoint,
    /// Combined max-test.
    pub combined: TippingPoint,
    pub w_used: f64,
    pub rho_hat: f64,
}

/// Tipping points of the pooled and the combined test. `config.delta0` is
/// ignored. A test that does not reject at Δ0 = 0 reports 0.
pub fn tipping_point(
    treated: &ArmSummary,
    internal: &ArmSummary,
    external: &ArmSummary,
    config: &TestConfig,
) -> Result<TippingPoints> {
    let mut cfg = *config;
    cfg.delta0 = 0.0;
    cfg.validate()?;
    let w = cfg.weight.resolve(internal, external)?;
    if w == 1.0 {
        return Err(Error::Configuration(
            "tipping point undefined with w = 1 (external controls carry no weight)".into(),
        ));
    }
    let arms = [*treated, *internal, *external];
    let (arms, theta0) = match cfg.direction {
        Direction::Greater => (arms, cfg.theta0),
        Direction::Less => negate_transform(&arms, cfg.theta0),
        Direction::TwoSided => {
            return Err(Error::Configuration(
                "tipping points are defined for one-sided tests".into(),
            ))
        }
    };
    let [t, i, e] = &arms;
    let alpha = cfg.alpha;

    let se = pooled_se(t, i, e, w)?;
    let t2 = pooled_statistic(t, i, e, theta0, w, 0.0)?;
    let z = normal::quantile(1.0 - alpha);
    let tip_t2 = (se * (t2 - z) / (1.0 - w)).max(0.0);

    let t1 = t1_statistic(t, i, theta0)?;
    let rho = correlation_hat(t, i, e, w)?;
    let adjusted = |delta0: f64| -> Result<f64> {
        let t2 = pooled_statistic(t, i, e, theta0, w, delta0)?;
        Ok(combined_p_value(t1.max(t2), rho))
    };

    let combined = if combined_p_value(t1, rho) <= alpha {
        TippingPoint::Insensitive
    } else if adjusted(0.0)? > alpha {
        TippingPoint::At(0.0)
    } else {
        TippingPoint::At(bisect_crossing(&adjusted, alpha)?)
    };

    Ok(TippingPoints { t2: TippingPoint::At(tip_t2), combined, w_used: w, rho_hat: rho.get() })
}

/// Smallest x ≥ 0 with f(x) > level for a nondecreasing f with f(0) ≤ level.
fn bisect_crossing(f: &dyn Fn(f64) -> Result<f64>, level: f64) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut expansions = 0;
    while f(hi)? <= level {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 1100 || !hi.is_finite() {
            return Err(Error::Computation("tipping point not bracketed".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? > level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
