//! Data-facing test statistics and the combined decision rule.

use alloc::vec::Vec;

use crate::error::{domain, Error, Result};
use crate::normal::{self, Correlation};

/// Sample size, mean and unbiased variance of one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmSummary {
    pub n: usize,
    pub mean: f64,
    pub var: f64,
}

impl ArmSummary {
    pub fn new(n: usize, mean: f64, var: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: n });
        }
        if !mean.is_finite() || !var.is_finite() {
            return Err(Error::Data("arm summary has a non-finite mean or variance".into()));
        }
        if var < 0.0 {
            return Err(domain("arm variance must be nonnegative"));
        }
        Ok(Self { n, mean, var })
    }

    /// Variance of the arm mean, S²/n.
    #[inline]
    pub fn mean_var(&self) -> f64 {
        self.var / self.n as f64
    }
}

/// Mean and unbiased (n − 1) variance of a sample.
pub fn summarize(values: &[f64]) -> Result<ArmSummary> {
    if values.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: values.len() });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("sample contains a non-finite value".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    ArmSummary::new(values.len(), mean, ss / (n - 1.0))
}

/// Alternative hypothesis direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// H_A: θ > θ0
    Greater,
    /// H_A: θ < θ0, handled by negating outcomes and the margin
    Less,
    /// Both one-sided tests at α/2 with a Bonferroni union
    TwoSided,
}

/// Weight on the internal control mean in the pooled control estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    /// n0 / (n0 + ne)
    Auto,
    Fixed(f64),
}

impl Weight {
    pub fn resolve(self, internal: &ArmSummary, external: &ArmSummary) -> Result<f64> {
        match self {
            Weight::Auto => {
                let n0 = internal.n as f64;
                Ok(n0 / (n0 + external.n as f64))
            }
            Weight::Fixed(w) => {
                check_weight(w)?;
                Ok(w)
            }
        }
    }
}

fn check_weight(w: f64) -> Result<()> {
    if (0.0..=1.0).contains(&w) {
        Ok(())
    } else {
        Err(Error::Domain(alloc::format!("weight {w} outside [0, 1]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestConfig {
    pub alpha: f64,
    pub theta0: f64,
    pub direction: Direction,
    pub weight: Weight,
    /// Upper bound on the internal-minus-external control bias.
    pub delta0: f64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha: 0.025,
            theta0: 0.0,
            direction: Direction::Greater,
            weight: Weight::Auto,
            delta0: 0.0,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Domain(alloc::format!("alpha {} outside (0, 0.5)", self.alpha)));
        }
        if !self.theta0.is_finite() {
            return Err(domain("theta0 must be finite"));
        }
        if !(self.delta0.is_finite() && self.delta0 >= 0.0) {
            return Err(domain("delta0 must be finite and nonnegative"));
        }
        if let Weight::Fixed(w) = self.weight {
            check_weight(w)?;
        }
        Ok(())
    }
}

/// Result of the combined test (and its two components).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub t1: f64,
    /// Bias-adjusted pooled statistic T₂,Δ0(w).
    pub t2_adj: f64,
    pub rho_hat: f64,
    pub critical_value: f64,
    /// 1 − Φ₂,ρ̂(m, m) with m = max(t1, t2_adj); doubled for two-sided tests.
    pub adjusted_p: f64,
    pub reject: bool,
    pub w_used: f64,
    /// Unadjusted one-sided p-value of t1.
    pub p_t1: f64,
    /// Unadjusted one-sided p-value of t2_adj.
    pub p_t2: f64,
    /// Side the reported statistics refer to (Greater or Less).
    pub side: Direction,
}

/// (Ȳ1 − Ȳ0 − θ0) / √(S1²/n1 + S0²/n0)
pub fn t1_statistic(treated: &ArmSummary, internal: &ArmSummary, theta0: f64) -> Result<f64> {
    let var = treated.mean_var() + internal.mean_var();
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance("both RCT arms have zero variance".into()));
    }
    Ok((treated.mean - internal.mean - theta0) / libm::sqrt(var))
}

/// Standard error of Ȳ1 − {wȲ0 + (1 − w)Ȳe}.
pub fn pooled_se(
    treated: &ArmSummary,
    internal: &ArmSummary,
    external: &ArmSummary,
    w: f64,
) -> Result<f64> {
    check_weight(w)?;
    let var = if w == 1.0 {
        treated.mean_var() + internal.mean_var()
    } else {
        treated.mean_var()
            + w * w * internal.mean_var()
            + (1.0 - w) * (1.0 - w) * external.mean_var()
    };
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance("pooled statistic has zero variance".into()));
    }
    Ok(libm::sqrt(var))
}

/// T₂,Δ0(w) = [Ȳ1 − {wȲ0 + (1−w)Ȳe} − θ0 − (1−w)Δ0] / SE.
pub fn pooled_statistic(
    treated: &ArmSummary,
    internal: &ArmSummary,
    external: &ArmSummary,
    theta0: f64,
    w: f64,
    delta0: f64,
) -> Result<f64> {
    check_weight(w)?;
    if !delta0.is_finite() {
        return Err(domain("delta0 must be finite"));
    }
    if w == 1.0 {
        return t1_statistic(treated, internal, theta0);
    }
    let se = pooled_se(treated, internal, external, w)?;
    let pooled = w * internal.mean + (1.0 - w) * external.mean;
    Ok((treated.mean - pooled - theta0 - (1.0 - w) * delta0) / se)
}

/// Plug-in correlation of (T1, T₂(w)) using sample variances and observed counts.
pub fn correlation_hat(
    treated: &ArmSummary,
    internal: &ArmSummary,
    external: &ArmSummary,
    w: f64,
) -> Result<Correlation> {
    check_weight(w)?;
    let (a, b, e) = (treated.mean_var(), internal.mean_var(), external.mean_var());
    rho_from_terms(a, b, e, w)
}

/// ρ = (a + w b) / √[(a + b)(a + w² b + (1 − w)² e)] for the three
/// per-arm variance terms.
pub(crate) fn rho_from_terms(a: f64, b: f64, e: f64, w: f64) -> Result<Correlation> {
    if w == 1.0 {
        if !(a + b > 0.0) {
            return Err(Error::DegenerateVariance("RCT arms have zero variance".into()));
        }
        return Ok(Correlation::ONE);
    }
    let v1 = a + b;
    let v2 = a + w * w * b + (1.0 - w) * (1.0 - w) * e;
    if !(v1 > 0.0 && v2 > 0.0) {
        return Err(Error::DegenerateVariance("correlation undefined for zero variance".into()));
    }
    Correlation::new_clamped((a + w * b) / libm::sqrt(v1 * v2))
}

/// One-sided z-test decision: p = 1 − Φ(t), reject when t ≥ z₁₋α.
pub fn single_test(statistic: f64, alpha: f64) -> Result<(f64, bool)> {
    if !statistic.is_finite() {
        return Err(domain("test statistic must be finite"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain("alpha must lie in (0, 1)"));
    }
    let z = normal::quantile(1.0 - alpha);
    Ok((normal::phi_sf(statistic), statistic >= z))
}

/// Values whose outcome scale can be flipped for a "less than" alternative.
pub trait Negate {
    fn negated(&self) -> Self;
}

impl Negate for f64 {
    fn negated(&self) -> Self {
        -*self
    }
}

impl Negate for ArmSummary {
    fn negated(&self) -> Self {
        ArmSummary { n: self.n, mean: -self.mean, var: self.var }
    }
}

impl<T: Negate> Negate for Vec<T> {
    fn negated(&self) -> Self {
        self.iter().map(Negate::negated).collect()
    }
}

impl<T: Negate, const N: usize> Negate for [T; N] {
    fn negated(&self) -> Self {
        core::array::from_fn(|i| self[i].negated())
    }
}

/// Replaces every outcome Y by −Y and θ0 by −θ0, turning a "less than"
/// alternative into a "greater than" one. Applying it twice is the identity.
pub fn negate_transform<T: Negate>(data: &T, theta0: f64) -> (T, f64) {
    (data.negated(), -theta0)
}

/// Combined test: reject when max(T1, T₂,Δ0(w)) ≥ c₁₋α;ρ̂.
pub fn combined_test(
    treated: &ArmSummary,
    internal: &ArmSummary,
    external: &ArmSummary,
    config: &TestConfig,
) -> Result<TestOutcome> {
    config.validate()?;
    let w = config.weight.resolve(internal, external)?;
    let arms = [*treated, *internal, *external];
    match config.direction {
        Direction::Greater => one_sided(&arms, config.theta0, w, config.delta0, config.alpha, Direction::Greater),
        Direction::Less => {
            let (flipped, theta0) = negate_transform(&arms, config.theta0);
            one_sided(&flipped, theta0, w, config.delta0, config.alpha, Direction::Less)
        }
        Direction::TwoSided => {
            let half = config.alpha / 2.0;
            let up = one_sided(&arms, config.theta0, w, config.delta0, half, Direction::Greater)?;
            let (flipped, theta0) = negate_transform(&arms, config.theta0);
            let down = one_sided(&flipped, theta0, w, config.delta0, half, Direction::Less)?;
            let mut best = if down.adjusted_p < up.adjusted_p { down } else { up };
            best.reject = up.reject || down.reject;
            best.adjusted_p = (2.0 * best.adjusted_p).min(1.0);
            Ok(best)
        }
    }
}

fn one_sided(
    arms: &[ArmSummary; 3],
    theta0: f64,
    w: f64,
    delta0: f64,
    alpha: f64,
    side: Direction,
) -> Result<TestOutcome> {
    let [treated, internal, external] = arms;
    let t1 = t1_statistic(treated, internal, theta0)?;
    let t2_adj = pooled_statistic(treated, internal, external, theta0, w, delta0)?;
    let rho = correlation_hat(treated, internal, external, w)?;
    let critical_value = normal::equicoordinate_quantile(alpha, rho)?;
    let m = t1.max(t2_adj);
    Ok(TestOutcome {
        t1,
        t2_adj,
        rho_hat: rho.get(),
        critical_value,
        adjusted_p: combined_p_value(m, rho),
        reject: m >= critical_value,
        w_used: w,
        p_t1: normal::phi_sf(t1),
        p_t2: normal::phi_sf(t2_adj),
        side,
    })
}

/// 1 − Φ₂,ρ(m, m): probability under H0 that the larger of the two
/// statistics exceeds m.
pub fn combined_p_value(m: f64, rho: Correlation) -> f64 {
    normal::lower_complement(m, m, rho.get())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arm(n: usize, mean: f64, var: f64) -> ArmSummary {
        ArmSummary::new(n, mean, var).unwrap()
    }

    #[test]
    fn summarize_examples() {
        let s = summarize(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.n, s.mean, s.var), (3, 2.0, 1.0));
        assert_eq!(summarize(&[4.5; 5]).unwrap().var, 0.0);
        assert!(matches!(summarize(&[]), Err(Error::InsufficientData { .. })));
        assert!(matches!(summarize(&[1.0]), Err(Error::InsufficientData { .. })));
        assert!(matches!(summarize(&[1.0, f64::NAN]), Err(Error::Data(_))));
    }

    #[test]
    fn arm_summary_invariants() {
        assert!(ArmSummary::new(1, 0.0, 1.0).is_err());
        assert!(ArmSummary::new(3, 0.0, -1.0).is_err());
        assert!(ArmSummary::new(3, f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn t1_examples() {
        let t = t1_statistic(&arm(3, 2.0, 1.0), &arm(3, 1.0, 1.0), 0.0).unwrap();
        assert!((t - 1.0 / (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((t - 1.2247).abs() < 1e-4);
        assert!(t1_statistic(&arm(3, 2.4, 1.0), &arm(3, 2.0, 1.0), 0.4).unwrap().abs() < 1e-15);
        let shifted = t1_statistic(&arm(3, 12.0, 1.0), &arm(3, 11.0, 1.0), 0.0).unwrap();
        assert!((shifted - t).abs() < 1e-12);
        assert!(matches!(
            t1_statistic(&arm(3, 2.0, 0.0), &arm(3, 1.0, 0.0), 0.0),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn pooled_examples() {
        let (t, i, e) = (arm(3, 2.0, 1.0), arm(3, 1.0, 1.0), arm(3, 1.0, 1.0));
        let v = pooled_statistic(&t, &i, &e, 0.0, 0.5, 0.0).unwrap();
        assert!((v - 2.0f64.sqrt()).abs() < 1e-12);

        let ext = arm(40, -7.0, 9.0);
        for d in [0.0, 0.3, 5.0] {
            assert_eq!(
                pooled_statistic(&t, &i, &ext, 0.1, 1.0, d).unwrap(),
                t1_statistic(&t, &i, 0.1).unwrap()
            );
        }

        let w = 0.3;
        let se = pooled_se(&t, &i, &ext, w).unwrap();
        let a = pooled_statistic(&t, &i, &ext, 0.0, w, 0.2).unwrap();
        let b = pooled_statistic(&t, &i, &ext, 0.0, w, 0.45).unwrap();
        assert!(((a - b) - (1.0 - w) * 0.25 / se).abs() < 1e-12);

        assert!(pooled_statistic(&t, &i, &e, 0.0, 1.5, 0.0).is_err());
        assert!(pooled_statistic(&t, &i, &e, 0.0, 0.5, f64::INFINITY).is_err());
    }

    #[test]
    fn correlation_examples() {
        let (t, i, e) = (arm(30, 0.0, 2.0), arm(15, 0.0, 1.3), arm(50, 0.0, 0.7));
        assert_eq!(correlation_hat(&t, &i, &e, 1.0).unwrap().get(), 1.0);

        // equal per-arm variance terms, w = 0
        let (t, i, e) = (arm(10, 0.0, 1.0), arm(10, 0.0, 1.0), arm(10, 0.0, 1.0));
        assert!((correlation_hat(&t, &i, &e, 0.0).unwrap().get() - 0.5).abs() < 1e-15);

        // π1⁻¹σ1² = 1.5, π0⁻¹σ0² = 3, (n_r/n_e)σe² = 1 with n_r = 75
        let (t, i, e) = (arm(50, 0.0, 1.0), arm(25, 0.0, 1.0), arm(75, 0.0, 1.0));
        assert!((correlation_hat(&t, &i, &e, 0.25).unwrap().get() - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4);
    }

    #[test]
    fn single_test_examples() {
        let z = normal::quantile(0.975);
        assert!(single_test(z, 0.025).unwrap().1);
        assert_eq!(single_test(0.0, 0.025).unwrap().0, 0.5);
        let (p, reject) = single_test(4.80, 0.025).unwrap();
        assert!(reject);
        assert!((p - 7.92e-7).abs() < 0.05e-7, "p = {p}");
    }

    #[test]
    fn negate_examples() {
        let a = arm(5, 2.0, 0.7);
        let (neg, th) = negate_transform(&a, 0.4);
        assert_eq!((neg.mean, neg.var, th), (-2.0, 0.7, -0.4));
        let (back, th2) = negate_transform(&neg, th);
        assert_eq!((back, th2), (a, 0.4));

        let (t, i) = (summarize(&[1.0, 2.5, 4.0]).unwrap(), summarize(&[0.5, 1.0, 3.0]).unwrap());
        let theta0 = 0.3;
        let direct = t1_statistic(&t, &i, theta0).unwrap();
        let ([tn, in_], th) = negate_transform(&[t, i], theta0);
        let flipped = t1_statistic(&tn, &in_, th).unwrap();
        assert!((flipped + direct).abs() < 1e-12);

        let raw = alloc::vec![1.0, -2.0, 3.5];
        let (neg_raw, _) = negate_transform(&raw, 0.0);
        assert_eq!(neg_raw, alloc::vec![-1.0, 2.0, -3.5]);
    }

    #[test]
    fn combined_rejects_whenever_t1_clears_critical_value() {
        let (t, i, e) = (arm(100, 1.0, 1.0), arm(50, 0.0, 1.0), arm(150, 0.3, 1.0));
        for delta0 in [0.0, 0.5, 1.0, 10.0, 1e6] {
            let cfg = TestConfig { delta0, weight: Weight::Fixed(0.25), ..Default::default() };
            let out = combined_test(&t, &i, &e, &cfg).unwrap();
            assert!(out.t1 >= out.critical_value);
            assert!(out.reject);
        }
    }

    #[test]
    fn adjusted_p_between_orthant_bounds() {
        let rho = Correlation::new(0.7).unwrap();
        let p = combined_p_value(2.5, rho);
        let single = normal::phi_sf(2.5);
        assert!(p >= single && p <= 2.0 * single);
    }

    #[test]
    fn adjusted_p_plateaus_as_delta0_grows() {
        let (t, i, e) = (arm(100, 0.7, 1.0), arm(50, 0.0, 1.0), arm(150, 0.1, 1.0));
        let cfg = |delta0| TestConfig { delta0, ..Default::default() };
        let out = combined_test(&t, &i, &e, &cfg(1e4)).unwrap();
        let rho = Correlation::new(out.rho_hat).unwrap();
        let plateau = combined_p_value(out.t1, rho);
        assert!(out.t2_adj < -100.0);
        assert!((out.adjusted_p - plateau).abs() < 1e-15);
        let mut prev = 0.0;
        for d in [0.0, 0.1, 0.2, 0.4, 0.8, 1.6] {
            let p = combined_test(&t, &i, &e, &cfg(d)).unwrap().adjusted_p;
            assert!(p >= prev - 1e-15 && p <= plateau + 1e-15);
            prev = p;
        }
    }

    #[test]
    fn less_direction_matches_manual_negation() {
        let (t, i, e) = (arm(40, -0.9, 1.2), arm(20, 0.0, 0.8), arm(60, 0.2, 1.1));
        let cfg = TestConfig { theta0: 0.4, direction: Direction::Less, ..Default::default() };
        let out = combined_test(&t, &i, &e, &cfg).unwrap();
        let manual = combined_test(
            &t.negated(),
            &i.negated(),
            &e.negated(),
            &TestConfig { theta0: -0.4, ..Default::default() },
        )
        .unwrap();
        assert_eq!(out.t1, manual.t1);
        assert_eq!(out.adjusted_p, manual.adjusted_p);
        assert_eq!(out.side, Direction::Less);
    }

    #[test]
    fn two_sided_is_bonferroni_union() {
        let (t, i, e) = (arm(40, -0.9, 1.2), arm(20, 0.0, 0.8), arm(60, 0.2, 1.1));
        let two = TestConfig { direction: Direction::TwoSided, alpha: 0.05, ..Default::default() };
        let out = combined_test(&t, &i, &e, &two).unwrap();
        let less = combined_test(
            &t,
            &i,
            &e,
            &TestConfig { direction: Direction::Less, alpha: 0.025, ..Default::default() },
        )
        .unwrap();
        assert_eq!(out.side, Direction::Less);
        assert_eq!(out.reject, less.reject);
        assert!((out.adjusted_p - 2.0 * less.adjusted_p).abs() < 1e-15);
        assert_eq!(out.reject, out.adjusted_p <= 0.05);
    }

    #[test]
    fn auto_weight_is_internal_share() {
        let (t, i, e) = (arm(159, 0.0, 1.0), arm(150, 0.0, 1.0), arm(159, 0.0, 1.0));
        let out = combined_test(&t, &i, &e, &TestConfig::default()).unwrap();
        assert!((out.w_used - 150.0 / 309.0).abs() < 1e-15);
        assert!((out.w_used - 0.485).abs() < 5e-4);
    }

    #[test]
    fn config_validation() {
        let bad = [
            TestConfig { alpha: 0.5, ..Default::default() },
            TestConfig { alpha: 0.0, ..Default::default() },
            TestConfig { delta0: -0.1, ..Default::default() },
            TestConfig { weight: Weight::Fixed(1.2), ..Default::default() },
            TestConfig { theta0: f64::NAN, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
