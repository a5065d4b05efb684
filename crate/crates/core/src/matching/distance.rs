use alloc::vec::Vec;

use super::linalg::{cholesky, cholesky_inverse, Square};
use super::propensity::LogitScores;
use super::{CovariateMatrix, Group};
use crate::error::{domain, Error, Result};

/// Treated × external cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub n_treated: usize,
    pub n_external: usize,
    /// Row-major costs.
    pub costs: Vec<f64>,
    /// Covariate-matrix row of each treated unit.
    pub treated_rows: Vec<usize>,
    /// Covariate-matrix row of each external unit.
    pub external_rows: Vec<usize>,
    /// Entries that violate the caliper.
    pub violations: Vec<bool>,
}

impl DistanceMatrix {
    /// Wraps raw costs; rows and columns are numbered from zero.
    pub fn from_costs(n_treated: usize, n_external: usize, costs: Vec<f64>) -> Result<Self> {
        if costs.len() != n_treated * n_external {
            return Err(Error::Data("cost matrix has the wrong number of entries".into()));
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Data("costs must be finite".into()));
        }
        Ok(Self {
            n_treated,
            n_external,
            treated_rows: (0..n_treated).collect(),
            external_rows: (0..n_external).collect(),
            violations: alloc::vec![false; costs.len()],
            costs,
        })
    }

    #[inline]
    pub fn get(&self, t: usize, e: usize) -> f64 {
        self.costs[t * self.n_external + e]
    }
}

/// Average ranks (1-based) of `values`, ties sharing the mean of their ranks.
pub(crate) fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Inverse of the tie-adjusted covariance of column ranks, with a ridge of
/// 1e-8 × trace/p added when the covariance is (near) singular.
fn rank_precision(ranks: &[Vec<f64>], n: usize) -> Result<Square> {
    let p = ranks.len();
    let means: Vec<f64> = ranks.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let mut cov = Square::zeros(p);
    for a in 0..p {
        for b in 0..=a {
            let s: f64 = (0..n).map(|i| (ranks[a][i] - means[a]) * (ranks[b][i] - means[b])).sum();
            let v = s / (n as f64 - 1.0);
            *cov.at_mut(a, b) = v;
            *cov.at_mut(b, a) = v;
        }
    }
    // rescale so every column has the variance of untied ranks 1..n
    let untied = (n * (n + 1)) as f64 / 12.0;
    let ratio: Vec<f64> = (0..p)
        .map(|a| if cov.at(a, a) > 0.0 { libm::sqrt(untied / cov.at(a, a)) } else { 1.0 })
        .collect();
    for a in 0..p {
        for b in 0..p {
            *cov.at_mut(a, b) *= ratio[a] * ratio[b];
        }
    }
    let scale = cov.trace() / p as f64;
    if let Some(l) = cholesky(&cov, 1e-10 * scale) {
        return Ok(cholesky_inverse(&l));
    }
    let ridge = 1e-8 * scale;
    for a in 0..p {
        *cov.at_mut(a, a) += ridge;
    }
    cholesky(&cov, 0.0)
        .map(|l| cholesky_inverse(&l))
        .ok_or_else(|| Error::Numerical("rank covariance is singular even after ridge".into()))
}

fn quad_form(prec: &Square, d: &[f64]) -> f64 {
    let p = prec.n;
    let mut q = 0.0;
    for a in 0..p {
        for b in 0..p {
            q += d[a] * prec.at(a, b) * d[b];
        }
    }
    libm::sqrt(q.max(0.0))
}

/// Rank-based robust Mahalanobis distances between every pair of rows of a
/// row-major n × p block.
pub(crate) fn rank_distances(values: &[f64], n: usize, p: usize) -> Result<Square> {
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let ranks: Vec<Vec<f64>> = (0..p)
        .map(|j| average_ranks(&(0..n).map(|i| values[i * p + j]).collect::<Vec<_>>()))
        .collect();
    let prec = rank_precision(&ranks, n)?;
    let mut out = Square::zeros(n);
    let mut d = alloc::vec![0.0; p];
    for i in 0..n {
        for k in 0..i {
            for j in 0..p {
                d[j] = ranks[j][i] - ranks[j][k];
            }
            let v = quad_form(&prec, &d);
            *out.at_mut(i, k) = v;
            *out.at_mut(k, i) = v;
        }
    }
    Ok(out)
}

/// Robust Mahalanobis distance between each treated and each external row.
/// Ranks are computed over the pooled sample.
pub fn robust_mahalanobis(data: &CovariateMatrix) -> Result<DistanceMatrix> {
    let (n, p) = (data.n_rows(), data.n_cols());
    let values: Vec<f64> = (0..n).flat_map(|i| data.row(i).iter().copied()).collect();
    let all = rank_distances(&values, n, p)?;
    let treated_rows = data.rows_in(Group::Treated);
    let external_rows = data.rows_in(Group::External);
    let costs: Vec<f64> = treated_rows
        .iter()
        .flat_map(|&t| external_rows.iter().map(move |&e| (t, e)))
        .map(|(t, e)| all.at(t, e))
        .collect();
    Ok(DistanceMatrix {
        n_treated: treated_rows.len(),
        n_external: external_rows.len(),
        violations: alloc::vec![false; costs.len()],
        costs,
        treated_rows,
        external_rows,
    })
}

/// Soft propensity caliper: pairs whose logit scores differ by more than
/// `caliper_sd` standard deviations (of all logit scores) get an additive
/// penalty of 1000 × the largest distance. Pairs exactly at the boundary
/// are kept.
pub fn apply_caliper(
    dist: &DistanceMatrix,
    scores: &LogitScores,
    caliper_sd: f64,
) -> Result<DistanceMatrix> {
    if !(caliper_sd > 0.0) {
        return Err(domain("caliper width must be positive"));
    }
    if scores.treated.len() != dist.n_treated || scores.external.len() != dist.n_external {
        return Err(Error::Data("propensity scores do not fit the distance matrix".into()));
    }
    let mut out = dist.clone();
    if caliper_sd.is_infinite() {
        return Ok(out);
    }
    let all: Vec<f64> = scores.treated.iter().chain(&scores.external).copied().collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let sd = libm::sqrt(
        all.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (all.len() as f64 - 1.0),
    );
    let width = caliper_sd * sd;
    let max = dist.costs.iter().copied().fold(0.0, f64::max);
    let penalty = 1000.0 * if max > 0.0 { max } else { 1.0 };
    for t in 0..dist.n_treated {
        for e in 0..dist.n_external {
            if (scores.treated[t] - scores.external[e]).abs() > width {
                let k = t * dist.n_external + e;
                out.costs[k] += penalty;
                out.violations[k] = true;
            }
        }
    }
    Ok(out)
}
