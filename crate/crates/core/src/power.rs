//! Closed-form asymptotic power and type I error of T1, T₂,Δ0(w) and the
//! combined test, together with the power-maximising weight and the design
//! sensitivity of the pooled test.

use crate::error::{domain, Error, Result};
use crate::normal::{self, Correlation};
use crate::testing::rho_from_terms;

/// Population-level description of a trial with external controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerScenario {
    /// True treatment effect θ*.
    pub theta_star: f64,
    pub theta0: f64,
    /// True bias Δ* = E(Y⁽⁰⁾ | RCT) − E(Y⁽⁰⁾ | external).
    pub delta_star: f64,
    /// Assumed bound Δ0 used by the adjusted test.
    pub delta0: f64,
    /// RCT size n_r = n1 + n0.
    pub n_r: f64,
    /// Treated fraction π1 of the RCT.
    pub pi1: f64,
    pub n_e: f64,
    pub sigma1: f64,
    pub sigma0: f64,
    pub sigma_e: f64,
    pub w: f64,
    pub alpha: f64,
}

impl PowerScenario {
    /// Builds a scenario from explicit arm sizes; n_r = n1 + n0 and π1 = n1/n_r.
    pub fn from_arm_sizes(n1: usize, n0: usize, n_e: usize) -> Self {
        let n_r = (n1 + n0) as f64;
        Self {
            theta_star: 0.0,
            theta0: 0.0,
            delta_star: 0.0,
            delta0: 0.0,
            n_r,
            pi1: n1 as f64 / n_r,
            n_e: n_e as f64,
            sigma1: 1.0,
            sigma0: 1.0,
            sigma_e: 1.0,
            w: 1.0,
            alpha: 0.025,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.theta_star,
            self.theta0,
            self.delta_star,
            self.delta0,
            self.n_r,
            self.n_e,
            self.pi1,
            self.w,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(domain("scenario parameters must be finite"));
        }
        if self.n_r < 1.0 || self.n_e < 1.0 {
            return Err(domain("sample sizes must be at least 1"));
        }
        if !(self.pi1 > 0.0 && self.pi1 < 1.0) {
            return Err(domain("pi1 must lie in (0, 1)"));
        }
        for s in [self.sigma1, self.sigma0, self.sigma_e] {
            if !(s.is_finite() && s > 0.0) {
                return Err(domain("standard deviations must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.w) {
            return Err(domain("w must lie in [0, 1]"));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(domain("alpha must lie in (0, 0.5)"));
        }
        Ok(())
    }

    pub fn n1(&self) -> usize {
        libm::round(self.n_r * self.pi1) as usize
    }

    pub fn n0(&self) -> usize {
        libm::round(self.n_r) as usize - self.n1()
    }

    pub fn with_w(mut self, w: f64) -> Self {
        self.w = w;
        self
    }

    /// (π1⁻¹σ1², π0⁻¹σ0², (n_r/n_e)σe²)
    pub(crate) fn variance_terms(&self) -> (f64, f64, f64) {
        let pi0 = 1.0 - self.pi1;
        (
            self.sigma1 * self.sigma1 / self.pi1,
            self.sigma0 * self.sigma0 / pi0,
            self.n_r / self.n_e * self.sigma_e * self.sigma_e,
        )
    }

    fn z(&self) -> f64 {
        normal::quantile(1.0 - self.alpha)
    }
}

/// Mean shifts (B1, B2) of T1 and T₂,Δ0(w) relative to their null
/// distributions, in standard-deviation units.
pub fn shifts(s: &PowerScenario) -> Result<(f64, f64)> {
    s.validate()?;
    let (c, d, e) = s.variance_terms();
    let root_n = libm::sqrt(s.n_r);
    let b1 = root_n * (s.theta0 - s.theta_star) / libm::sqrt(c + d);
    if s.w == 1.0 {
        return Ok((b1, b1));
    }
    let w = s.w;
    let num = root_n * (s.theta0 - s.theta_star) + root_n * (1.0 - w) * (s.delta0 - s.delta_star);
    let b2 = num / libm::sqrt(c + w * w * d + (1.0 - w) * (1.0 - w) * e);
    Ok((b1, b2))
}

/// Asymptotic power of T1; equals the type I error when θ* = θ0.
pub fn power_t1(s: &PowerScenario) -> Result<f64> {
    let (b1, _) = shifts(s)?;
    Ok(normal::phi_sf(s.z() + b1))
}

/// Asymptotic power of T₂,Δ0(w).
pub fn power_t2(s: &PowerScenario) -> Result<f64> {
    let (_, b2) = shifts(s)?;
    Ok(normal::phi_sf(s.z() + b2))
}

/// Asymptotic correlation of T1 and T₂,Δ*(w).
pub fn rho_theoretical(s: &PowerScenario) -> Result<Correlation> {
    s.validate()?;
    let (c, d, e) = s.variance_terms();
    rho_from_terms(c, d, e, s.w)
}

/// Critical value used by the combined test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Critical {
    /// Equicoordinate bivariate-normal quantile c₁₋α;ρ.
    Corrected,
    /// z₁₋α with no multiplicity correction.
    Naive,
}

/// Asymptotic power of the combined test, 1 − Φ₂,ρ(c + B1, c + B2).
pub fn power_combined(s: &PowerScenario, critical: Critical) -> Result<f64> {
    let (b1, b2) = shifts(s)?;
    let rho = rho_theoretical(s)?;
    let c = match critical {
        Critical::Corrected => normal::equicoordinate_quantile(s.alpha, rho)?,
        Critical::Naive => s.z(),
    };
    Ok(normal::lower_complement(c + b1, c + b2, rho.get()))
}

/// Weight maximising the power of T₂,Δ0(w).
///
/// With κ = π0⁻¹σ0² / (π1⁻¹σ1² + π0⁻¹σ0²): if Δ0 − Δ* ≥ κ(θ* − θ0) the
/// external controls cannot help and the answer is 1; otherwise the
/// stationary point of the standardized shift is interior to (0, 1).
pub fn optimal_w(s: &PowerScenario) -> Result<f64> {
    s.validate()?;
    if !(s.theta_star > s.theta0) {
        return Err(domain("optimal weight requires theta_star > theta0"));
    }
    if s.delta0 < s.delta_star {
        return Err(domain("optimal weight requires delta0 >= delta_star"));
    }
    let (c, d, e) = s.variance_terms();
    let a = s.theta0 - s.theta_star;
    let b = s.delta0 - s.delta_star;
    let kappa = d / (c + d);
    if b >= kappa * (s.theta_star - s.theta0) {
        return Ok(1.0);
    }
    let w = (a * e - b * c) / (a * d + a * e + b * d);
    if !w.is_finite() {
        return Err(Error::Computation("optimal weight is not finite".into()));
    }
    Ok(w.clamp(0.0, 1.0))
}

/// Δ̃(w) = (θ* − θ0)/(1 − w) + Δ*: the pooled test's power tends to 1 for
/// Δ0 below this value and to 0 above it. `s.delta0` is ignored.
pub fn design_sensitivity(s: &PowerScenario) -> Result<f64> {
    if !(s.w >= 0.0 && s.w < 1.0) {
        return Err(domain("design sensitivity requires w in [0, 1)"));
    }
    if !(s.theta_star > s.theta0) {
        return Err(domain("design sensitivity requires theta_star > theta0"));
    }
    Ok((s.theta_star - s.theta0) / (1.0 - s.w) + s.delta_star)
}

/// Upper bound 1 − 2Φ((z₁₋α − c₁₋α;ρ)/2) on how much power the combined
/// test can lose relative to the better component.
pub fn power_gap_bound(alpha: f64, rho: Correlation) -> Result<f64> {
    let c = normal::equicoordinate_quantile(alpha, rho)?;
    let z = normal::quantile(1.0 - alpha);
    Ok((1.0 - 2.0 * normal::phi((z - c) / 2.0)).max(0.0))
}
