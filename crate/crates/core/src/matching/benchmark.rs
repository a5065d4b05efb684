use alloc::string::String;
use alloc::vec::Vec;

use super::{match_covariates, CovariateMatrix, Group, MatchOptions};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkEntry {
    pub covariate: String,
    /// Ȳ0 − Ȳe with the covariate left out of the match.
    pub difference: f64,
}

/// Ȳ0 − Ȳe after re-running the match without the `omit` covariates.
///
/// `outcomes` is indexed by covariate-matrix row; only external rows are
/// read. `internal_mean` is the internal control mean Ȳ0.
pub fn benchmark_without(
    data: &CovariateMatrix,
    outcomes: &[f64],
    internal_mean: f64,
    omit: &[&str],
    options: &MatchOptions,
) -> Result<f64> {
    if outcomes.len() != data.n_rows() {
        return Err(Error::Data("one outcome per covariate row is required".into()));
    }
    if !internal_mean.is_finite() {
        return Err(Error::Data("internal control mean must be finite".into()));
    }
    if data.rows_in(Group::External).iter().any(|&i| !outcomes[i].is_finite()) {
        return Err(Error::Data("external outcomes must be finite".into()));
    }
    let reduced;
    let data = if omit.is_empty() {
        data
    } else {
        reduced = data.without(omit)?;
        &reduced
    };
    let result = match_covariates(data, options)?;
    let ye = result.pairs.iter().map(|&(_, e)| outcomes[e]).sum::<f64>() / result.pairs.len() as f64;
    Ok(internal_mean - ye)
}

/// Leave-one-covariate-out benchmark for the size of residual bias.
pub fn omit_one_benchmark(
    data: &CovariateMatrix,
    outcomes: &[f64],
    internal_mean: f64,
    covariates: &[&str],
    options: &MatchOptions,
) -> Result<Vec<BenchmarkEntry>> {
    covariates
        .iter()
        .map(|name| {
            Ok(BenchmarkEntry {
                covariate: (*name).into(),
                difference: benchmark_without(data, outcomes, internal_mean, &[name], options)?,
            })
        })
        .collect()
}
