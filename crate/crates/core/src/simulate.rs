//! Monte Carlo estimation of rejection rates under the normal
//! data-generating model, and the resampling power study on a matched trial.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use crate::error::{domain, Error, Result};
use crate::normal;
use crate::power::PowerScenario;
use crate::rng::Stream;
use crate::testing::{
    correlation_hat, pooled_statistic, summarize, t1_statistic, ArmSummary, Weight,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestKind {
    T1,
    T2,
    /// max(T1, T2) against the equicoordinate critical value.
    Combined,
    /// max(T1, T2) against z₁₋α.
    Naive,
}

impl TestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::T1 => "t1",
            TestKind::T2 => "t2",
            TestKind::Combined => "tc",
            TestKind::Naive => "naive",
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t1" => Ok(TestKind::T1),
            "t2" => Ok(TestKind::T2),
            "tc" | "combined" => Ok(TestKind::Combined),
            "naive" => Ok(TestKind::Naive),
            other => Err(Error::Configuration(alloc::format!("unknown test '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestSpec {
    pub kind: TestKind,
    pub weight: Weight,
    pub delta0: f64,
}

impl TestSpec {
    pub fn new(kind: TestKind, weight: Weight, delta0: f64) -> Self {
        Self { kind, weight, delta0 }
    }

    pub fn label(&self) -> String {
        let w = match self.weight {
            Weight::Auto => String::from("auto"),
            Weight::Fixed(w) => alloc::format!("{w}"),
        };
        match self.kind {
            TestKind::T1 => String::from("t1"),
            k => alloc::format!("{k}(w={w},delta0={})", self.delta0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub scenario: PowerScenario,
    pub n_reps: u64,
    pub seed: u64,
    pub tests: Vec<TestSpec>,
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.n_reps == 0 {
            return Err(domain("n_reps must be at least 1"));
        }
        validate_tests(&self.tests)?;
        let (n1, n0, ne) = arm_sizes(&self.scenario);
        if n1 < 2 || n0 < 2 || ne < 2 {
            return Err(Error::InsufficientData { needed: 2, got: n1.min(n0).min(ne) });
        }
        Ok(())
    }
}

fn validate_tests(tests: &[TestSpec]) -> Result<()> {
    if tests.is_empty() {
        return Err(domain("no tests requested"));
    }
    for t in tests {
        if let Weight::Fixed(w) = t.weight {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Domain(alloc::format!("weight {w} outside [0, 1]")));
            }
        }
        if !(t.delta0.is_finite() && t.delta0 >= 0.0) {
            return Err(domain("delta0 must be finite and nonnegative"));
        }
    }
    Ok(())
}

fn arm_sizes(s: &PowerScenario) -> (usize, usize, usize) {
    (s.n1(), s.n0(), libm::round(s.n_e) as usize)
}

/// Empirical rejection frequency with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RejectionEstimate {
    pub rate: f64,
    /// √(p(1 − p)/R)
    pub mc_se: f64,
    pub n_reps: u64,
}

impl RejectionEstimate {
    pub fn from_counts(rejections: u64, n_reps: u64) -> Self {
        let rate = if n_reps == 0 { 0.0 } else { rejections as f64 / n_reps as f64 };
        let mc_se = if n_reps == 0 { 0.0 } else { libm::sqrt(rate * (1.0 - rate) / n_reps as f64) };
        Self { rate, mc_se, n_reps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestEstimate {
    pub test: TestSpec,
    pub estimate: RejectionEstimate,
}

/// Raw outcomes of one simulated trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub treated: Vec<f64>,
    pub internal: Vec<f64>,
    pub external: Vec<f64>,
}

/// Treated ~ N(0, σ1²), internal controls ~ N(−θ*, σ0²), external controls
/// ~ N(−θ* − Δ*, σe²), drawn in that order from `stream`.
pub fn draw_dataset(s: &PowerScenario, stream: &mut Stream) -> Dataset {
    let (n1, n0, ne) = arm_sizes(s);
    let mut draw = |n: usize, mean: f64, sd: f64| -> Vec<f64> {
        (0..n).map(|_| stream.normal(mean, sd)).collect()
    };
    let treated = draw(n1, 0.0, s.sigma1);
    let internal = draw(n0, -s.theta_star, s.sigma0);
    let external = draw(ne, -s.theta_star - s.delta_star, s.sigma_e);
    Dataset { treated, internal, external }
}

/// Decision of one test on summarized arms.
pub fn decide(
    test: &TestSpec,
    arms: &[ArmSummary; 3],
    theta0: f64,
    alpha: f64,
) -> Result<bool> {
    let [t, i, e] = arms;
    let z = normal::quantile(1.0 - alpha);
    let t1 = t1_statistic(t, i, theta0)?;
    if test.kind == TestKind::T1 {
        return Ok(t1 >= z);
    }
    let w = test.weight.resolve(i, e)?;
    let t2 = pooled_statistic(t, i, e, theta0, w, test.delta0)?;
    Ok(match test.kind {
        TestKind::T1 => unreachable!(),
        TestKind::T2 => t2 >= z,
        TestKind::Naive => t1.max(t2) >= z,
        TestKind::Combined => {
            let rho = correlation_hat(t, i, e, w)?;
            t1.max(t2) >= normal::equicoordinate_quantile(alpha, rho)?
        }
    })
}

/// Decisions of every test in `spec` on replication `rep`.
pub fn replicate(spec: &SimSpec, rep: u64) -> Result<Vec<bool>> {
    let mut stream = Stream::new(spec.seed, rep);
    let data = draw_dataset(&spec.scenario, &mut stream);
    let arms = [summarize(&data.treated)?, summarize(&data.internal)?, summarize(&data.external)?];
    spec.tests
        .iter()
        .map(|t| decide(t, &arms, spec.scenario.theta0, spec.scenario.alpha))
        .collect()
}

/// Rejection counts per test over replications `reps`. Counts over disjoint
/// ranges add up to the counts over their union, so the work can be split
/// across threads without changing the result.
pub fn rejection_counts(spec: &SimSpec, reps: Range<u64>) -> Result<Vec<u64>> {
    let mut counts = alloc::vec![0u64; spec.tests.len()];
    for rep in reps {
        for (c, reject) in counts.iter_mut().zip(replicate(spec, rep)?) {
            *c += reject as u64;
        }
    }
    Ok(counts)
}

pub fn estimates_from_counts(tests: &[TestSpec], counts: &[u64], n_reps: u64) -> Vec<TestEstimate> {
    tests
        .iter()
        .zip(counts)
        .map(|(t, &k)| TestEstimate { test: *t, estimate: RejectionEstimate::from_counts(k, n_reps) })
        .collect()
}

/// Empirical rejection rates, in the order of `spec.tests`.
pub fn estimate_rejection(spec: &SimSpec) -> Result<Vec<TestEstimate>> {
    spec.validate()?;
    let counts = rejection_counts(spec, 0..spec.n_reps)?;
    Ok(estimates_from_counts(&spec.tests, &counts, spec.n_reps))
}

/// RCT outcomes plus the external control matched to each treated subject.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedTrial {
    pub treated: Vec<f64>,
    pub internal: Vec<f64>,
    /// `matched_external[k]` belongs to `treated[k]`; `None` if unmatched.
    pub matched_external: Vec<Option<f64>>,
}

impl MatchedTrial {
    pub fn validate(&self) -> Result<()> {
        if self.treated.len() != self.matched_external.len() {
            return Err(Error::Data("every treated subject needs a match slot".into()));
        }
        if self.treated.is_empty() || self.internal.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let all = self.treated.iter().chain(&self.internal).chain(self.matched_external.iter().flatten());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite outcome".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// RCT subjects drawn per repetition.
    pub n_sub: usize,
    /// Probability that a draw comes from the treated arm.
    pub treated_ratio: f64,
    pub n_reps: u64,
    pub seed: u64,
    pub alpha: f64,
    pub theta0: f64,
    pub tests: Vec<TestSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub estimates: Vec<TestEstimate>,
    /// Resamples discarded because an arm had fewer than two subjects.
    pub redraws: u64,
}

pub const MAX_REDRAWS: u32 = 100;

/// Resampling power study: each repetition draws `n_sub` RCT subjects with
/// replacement (treated with probability `treated_ratio`), carries along the
/// external controls matched to the sampled treated subjects, and applies
/// every test with the weight re-resolved on the subsample.
pub fn subsample_power_study(trial: &MatchedTrial, cfg: &StudyConfig) -> Result<StudyResult> {
    trial.validate()?;
    validate_tests(&cfg.tests)?;
    if !(0.0..=1.0).contains(&cfg.treated_ratio) {
        return Err(domain("treated_ratio must lie in [0, 1]"));
    }
    if cfg.n_reps == 0 || cfg.n_sub == 0 {
        return Err(domain("n_sub and n_reps must be positive"));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 0.5) {
        return Err(domain("alpha must lie in (0, 0.5)"));
    }

    let mut counts = alloc::vec![0u64; cfg.tests.len()];
    let mut redraws = 0u64;
    for rep in 0..cfg.n_reps {
        let mut stream = Stream::new(cfg.seed, rep);
        let mut attempt = 0;
        let arms = loop {
            if let Some(arms) = resample(trial, cfg, &mut stream) {
                break arms;
            }
            attempt += 1;
            redraws += 1;
            if attempt >= MAX_REDRAWS {
                return Err(Error::Configuration(alloc::format!(
                    "{MAX_REDRAWS} consecutive resamples left an arm with fewer than 2 subjects"
                )));
            }
        };
        for (c, t) in counts.iter_mut().zip(&cfg.tests) {
            *c += decide(t, &arms, cfg.theta0, cfg.alpha)? as u64;
        }
    }
    Ok(StudyResult { estimates: estimates_from_counts(&cfg.tests, &counts, cfg.n_reps), redraws })
}

fn resample(trial: &MatchedTrial, cfg: &StudyConfig, stream: &mut Stream) -> Option<[ArmSummary; 3]> {
    let (mut t, mut i, mut e) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..cfg.n_sub {
        if stream.uniform() < cfg.treated_ratio {
            let k = stream.index(trial.treated.len());
            t.push(trial.treated[k]);
            if let Some(y) = trial.matched_external[k] {
                e.push(y);
            }
        } else {
            i.push(trial.internal[stream.index(trial.internal.len())]);
        }
    }
    if t.len() < 2 || i.len() < 2 || e.len() < 2 {
        return None;
    }
    Some([summarize(&t).ok()?, summarize(&i).ok()?, summarize(&e).ok()?])
}
