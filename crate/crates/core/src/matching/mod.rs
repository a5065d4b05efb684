//! Construction of a matched external control arm: propensity caliper,
//! rank-based robust Mahalanobis distance, optimal pair matching and
//! balance diagnostics.

mod assignment;
mod balance;
mod benchmark;
mod distance;
mod linalg;
mod propensity;

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{domain, Error, Result};

pub use assignment::{greedy_pair_match, optimal_pair_match, solve_assignment};
pub use balance::standardized_mean_difference;
pub use benchmark::{benchmark_without, omit_one_benchmark, BenchmarkEntry};
pub use distance::{apply_caliper, robust_mahalanobis, DistanceMatrix};
pub use propensity::{fit_propensity, LogitScores, PropensityModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    /// Treated subject of the RCT.
    Treated,
    /// Candidate external control.
    External,
}

/// Numeric baseline covariates of RCT-treated subjects and the external pool.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    names: Vec<String>,
    ids: Vec<String>,
    groups: Vec<Group>,
    /// Row-major, `ids.len()` × `names.len()`.
    values: Vec<f64>,
}

impl CovariateMatrix {
    pub fn new(
        names: Vec<String>,
        ids: Vec<String>,
        groups: Vec<Group>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if names.is_empty() {
            return Err(domain("at least one covariate is required"));
        }
        if ids.len() != groups.len() || values.len() != ids.len() * names.len() {
            return Err(Error::Data("covariate matrix dimensions disagree".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("covariates must be finite".into()));
        }
        let treated = groups.iter().filter(|g| **g == Group::Treated).count();
        let external = groups.len() - treated;
        if treated < 2 || external < 2 {
            return Err(Error::InsufficientData { needed: 2, got: treated.min(external) });
        }
        Ok(Self { names, ids, groups, values })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.values[i * self.n_cols() + j]).collect()
    }

    pub fn rows_in(&self, group: Group) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.groups[i] == group).collect()
    }

    /// Copy with the named covariates removed.
    pub fn without(&self, omit: &[&str]) -> Result<Self> {
        for name in omit {
            if !self.names.iter().any(|n| n == name) {
                return Err(Error::Configuration(alloc::format!("unknown covariate '{name}'")));
            }
        }
        let keep: Vec<usize> =
            (0..self.n_cols()).filter(|&j| !omit.contains(&self.names[j].as_str())).collect();
        let names = keep.iter().map(|&j| self.names[j].clone()).collect();
        let values = (0..self.n_rows())
            .flat_map(|i| keep.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.values[i * self.n_cols() + j])
            .collect();
        Self::new(names, self.ids.clone(), self.groups.clone(), values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOptions {
    /// Caliper width in standard deviations of the logit propensity score.
    pub caliper_sd: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self { caliper_sd: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// (treated row, external row), row indices into the covariate matrix,
    /// in treated-row order.
    pub pairs: Vec<(usize, usize)>,
    pub total_distance: f64,
    /// Treated rows whose partner lies outside the caliper. They are still
    /// matched (soft caliper).
    pub unmatched_treated: Vec<usize>,
    /// Per-covariate SMD of treated versus matched external rows; empty
    /// when produced from a bare distance matrix.
    pub balance: Vec<f64>,
}

impl MatchResult {
    pub fn id_pairs<'a>(&self, data: &'a CovariateMatrix) -> Vec<(&'a str, &'a str)> {
        self.pairs.iter().map(|&(t, e)| (data.ids[t].as_str(), data.ids[e].as_str())).collect()
    }
}

/// Full pipeline: propensity fit, robust distance, caliper, optimal match
/// and post-match balance.
pub fn match_covariates(data: &CovariateMatrix, options: &MatchOptions) -> Result<MatchResult> {
    let model = fit_propensity(data)?;
    let dist = robust_mahalanobis(data)?;
    let penalized = apply_caliper(&dist, &model.scores(data), options.caliper_sd)?;
    let mut result = optimal_pair_match(&penalized)?;
    let treated: Vec<&[f64]> = result.pairs.iter().map(|&(t, _)| data.row(t)).collect();
    let matched: Vec<&[f64]> = result.pairs.iter().map(|&(_, e)| data.row(e)).collect();
    result.balance = standardized_mean_difference(&treated, &matched)?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CovariateMatrix {
        CovariateMatrix::new(
            alloc::vec!["age".into(), "bmi".into()],
            (0..4).map(|i| alloc::format!("s{i}")).collect(),
            alloc::vec![Group::Treated, Group::Treated, Group::External, Group::External],
            alloc::vec![50.0, 30.0, 60.0, 28.0, 55.0, 31.0, 40.0, 22.0],
        )
        .unwrap()
    }

    #[test]
    fn accessors() {
        let m = small();
        assert_eq!(m.row(2), &[55.0, 31.0]);
        assert_eq!(m.column(1), alloc::vec![30.0, 28.0, 31.0, 22.0]);
        assert_eq!(m.rows_in(Group::External), alloc::vec![2, 3]);
        let w = m.without(&["age"]).unwrap();
        assert_eq!(w.names(), &["bmi".to_string()]);
        assert_eq!(w.row(3), &[22.0]);
        assert!(m.without(&["nope"]).is_err());
        assert!(m.without(&["age", "bmi"]).is_err());
    }

    #[test]
    fn validation() {
        let bad = CovariateMatrix::new(
            alloc::vec!["x".into()],
            alloc::vec!["a".into(), "b".into(), "c".into()],
            alloc::vec![Group::Treated, Group::External, Group::External],
            alloc::vec![1.0, 2.0, 3.0],
        );
        assert!(matches!(bad, Err(Error::InsufficientData { .. })));
    }
}
