use alloc::string::String;
use alloc::vec::Vec;

use super::linalg::{cholesky, cholesky_inverse, cholesky_solve, Square};
use super::{CovariateMatrix, Group};
use crate::error::{Error, Result};

const MAX_ITER: usize = 50;
const TOL: f64 = 1e-8;
/// A standardized coefficient this large means the likelihood is running off
/// to its supremum.
const DIVERGED: f64 = 40.0;

/// Main-effects logistic model of P(treated | x).
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityModel {
    pub intercept: f64,
    /// On the original covariate scale, in column order.
    pub coefficients: Vec<f64>,
    /// Asymptotic standard errors of `coefficients`.
    pub std_errors: Vec<f64>,
    pub converged: bool,
    pub n_iterations: usize,
    /// Log-likelihood after each Newton step, starting with the initial value.
    pub log_likelihoods: Vec<f64>,
}

/// Logit propensity scores split by group, in row order.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitScores {
    pub treated: Vec<f64>,
    pub external: Vec<f64>,
}

impl PropensityModel {
    pub fn logit(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn scores(&self, data: &CovariateMatrix) -> LogitScores {
        let by = |g| data.rows_in(g).into_iter().map(|i| self.logit(data.row(i))).collect();
        LogitScores { treated: by(Group::Treated), external: by(Group::External) }
    }
}

fn log1p_exp(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-x.abs()))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

struct Design {
    /// Row-major n × (p + 1), first column the intercept.
    x: Vec<f64>,
    y: Vec<f64>,
    k: usize,
}

impl Design {
    fn eta(&self, beta: &[f64], i: usize) -> f64 {
        self.x[i * self.k..(i + 1) * self.k].iter().zip(beta).map(|(a, b)| a * b).sum()
    }

    fn log_lik(&self, beta: &[f64]) -> f64 {
        (0..self.y.len())
            .map(|i| {
                let eta = self.eta(beta, i);
                self.y[i] * eta - log1p_exp(eta)
            })
            .sum()
    }

    fn gradient_hessian(&self, beta: &[f64]) -> (Vec<f64>, Square) {
        let k = self.k;
        let mut g = alloc::vec![0.0; k];
        let mut h = Square::zeros(k);
        for i in 0..self.y.len() {
            let row = &self.x[i * k..(i + 1) * k];
            let mu = sigmoid(self.eta(beta, i));
            let wt = mu * (1.0 - mu);
            for a in 0..k {
                g[a] += row[a] * (self.y[i] - mu);
                for b in 0..=a {
                    *h.at_mut(a, b) += wt * row[a] * row[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                *h.at_mut(b, a) = h.at(a, b);
            }
        }
        (g, h)
    }
}

/// Fits the propensity model by Newton's method with step-halving on
/// standardized covariates.
pub fn fit_propensity(data: &CovariateMatrix) -> Result<PropensityModel> {
    let (n, p) = (data.n_rows(), data.n_cols());
    let name = |j: usize| -> String { data.names()[j].clone() };
    let mut centers = Vec::with_capacity(p);
    let mut scales = Vec::with_capacity(p);
    for j in 0..p {
        let col = data.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = libm::sqrt(col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64);
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            return Err(Error::Collinearity(alloc::format!(
                "covariate '{}' is constant",
                name(j)
            )));
        }
        centers.push(mean);
        scales.push(sd);
    }
    for j in 0..p {
        let (mut t_lo, mut t_hi, mut e_lo, mut e_hi) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let v = data.row(i)[j];
            if data.groups()[i] == Group::Treated {
                t_lo = t_lo.min(v);
                t_hi = t_hi.max(v);
            } else {
                e_lo = e_lo.min(v);
                e_hi = e_hi.max(v);
            }
        }
        if t_hi <= e_lo || e_hi <= t_lo {
            return Err(Error::Separation { covariate: name(j) });
        }
    }

    let k = p + 1;
    let mut x = Vec::with_capacity(n * k);
    for i in 0..n {
        x.push(1.0);
        for (j, v) in data.row(i).iter().enumerate() {
            x.push((v - centers[j]) / scales[j]);
        }
    }
    let y: Vec<f64> =
        data.groups().iter().map(|g| if *g == Group::Treated { 1.0 } else { 0.0 }).collect();
    let design = Design { x, y, k };

    let ybar = design.y.iter().sum::<f64>() / n as f64;
    let mut beta = alloc::vec![0.0; k];
    beta[0] = libm::log(ybar / (1.0 - ybar));
    let mut ll = design.log_lik(&beta);
    let mut trace = alloc::vec![ll];
    let mut converged = false;
    let mut iterations = 0;

    let largest = |beta: &[f64]| -> usize {
        (1..k).max_by(|&a, &b| beta[a].abs().total_cmp(&beta[b].abs())).unwrap_or(1) - 1
    };

    while iterations < MAX_ITER {
        iterations += 1;
        let (g, h) = design.gradient_hessian(&beta);
        let max_diag = (0..k).map(|a| h.at(a, a)).fold(0.0, f64::max);
        let Some(l) = cholesky(&h, 1e-10 * max_diag) else {
            if beta[1..].iter().any(|b| b.abs() > DIVERGED / 4.0) {
                return Err(Error::Separation { covariate: name(largest(&beta)) });
            }
            return Err(Error::Collinearity("covariate design matrix is rank deficient".into()));
        };
        let step = cholesky_solve(&l, &g);

        let mut scale = 1.0;
        let mut candidate: Vec<f64>;
        let mut cand_ll;
        let mut halvings = 0;
        loop {
            candidate = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            cand_ll = design.log_lik(&candidate);
            if cand_ll >= ll - 1e-12 * ll.abs() || halvings >= 30 {
                break;
            }
            scale *= 0.5;
            halvings += 1;
        }
        if cand_ll < ll {
            // no ascent along the Newton direction; stay put
            candidate = beta.clone();
            cand_ll = ll;
        }
        let change = step.iter().map(|s| (scale * s).abs()).fold(0.0, f64::max);
        beta = candidate;
        ll = cand_ll;
        trace.push(ll);
        if beta[1..].iter().any(|b| b.abs() > DIVERGED) {
            return Err(Error::Separation { covariate: name(largest(&beta)) });
        }
        if change < TOL {
            converged = true;
            break;
        }
    }

    let (_, h) = design.gradient_hessian(&beta);
    let max_diag = (0..k).map(|a| h.at(a, a)).fold(0.0, f64::max);
    let cov = cholesky(&h, 1e-14 * max_diag)
        .map(|l| cholesky_inverse(&l))
        .ok_or_else(|| Error::Numerical("information matrix is singular at the optimum".into()))?;

    let coefficients: Vec<f64> = (0..p).map(|j| beta[j + 1] / scales[j]).collect();
    let std_errors = (0..p).map(|j| libm::sqrt(cov.at(j + 1, j + 1)) / scales[j]).collect();
    let intercept = beta[0] - (0..p).map(|j| coefficients[j] * centers[j]).sum::<f64>();
    if converged && (!intercept.is_finite() || coefficients.iter().any(|c| !c.is_finite())) {
        return Err(Error::Numerical("non-finite propensity coefficients".into()));
    }
    Ok(PropensityModel {
        intercept,
        coefficients,
        std_errors,
        converged,
        n_iterations: iterations,
        log_likelihoods: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn matrix(rows: &[(Group, [f64; 2])]) -> CovariateMatrix {
        CovariateMatrix::new(
            alloc::vec!["x1".into(), "x2".into()],
            (0..rows.len()).map(|i| alloc::format!("r{i}")).collect(),
            rows.iter().map(|r| r.0).collect(),
            rows.iter().flat_map(|r| r.1).collect(),
        )
        .unwrap()
    }

    fn log_lik(rows: &[(Group, [f64; 2])], b: [f64; 3]) -> f64 {
        rows.iter()
            .map(|(g, x)| {
                let eta = b[0] + b[1] * x[0] + b[2] * x[1];
                let y = if *g == Group::Treated { 1.0 } else { 0.0 };
                y * eta - (1.0 + eta.exp()).ln()
            })
            .sum()
    }

    fn twenty_rows() -> Vec<(Group, [f64; 2])> {
        let mut s = Stream::new(314, 0);
        (0..20)
            .map(|i| {
                let g = if i % 2 == 0 { Group::Treated } else { Group::External };
                let shift = if g == Group::Treated { 0.6 } else { 0.0 };
                (g, [s.normal(shift, 1.0), s.normal(-shift / 2.0, 1.5)])
            })
            .collect()
    }

    #[test]
    fn matches_grid_search_of_likelihood() {
        let rows = twenty_rows();
        let model = fit_propensity(&matrix(&rows)).unwrap();
        assert!(model.converged);

        // successively refined 3-D grid around the best point
        let mut center = [0.0; 3];
        let mut half = 6.0;
        while half > 1e-5 {
            let mut best = (f64::NEG_INFINITY, center);
            let m = 20;
            for a in -m..=m {
                for b in -m..=m {
                    for c in -m..=m {
                        let p = [
                            center[0] + half * a as f64 / m as f64,
                            center[1] + half * b as f64 / m as f64,
                            center[2] + half * c as f64 / m as f64,
                        ];
                        let ll = log_lik(&rows, p);
                        if ll > best.0 {
                            best = (ll, p);
                        }
                    }
                }
            }
            center = best.1;
            half /= 4.0;
        }
        assert!((model.intercept - center[0]).abs() < 1e-3, "{model:?} vs {center:?}");
        assert!((model.coefficients[0] - center[1]).abs() < 1e-3);
        assert!((model.coefficients[1] - center[2]).abs() < 1e-3);
    }

    #[test]
    fn likelihood_never_decreases() {
        let model = fit_propensity(&matrix(&twenty_rows())).unwrap();
        assert!(model.log_likelihoods.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn uninformative_covariate_near_zero() {
        let mut s = Stream::new(21, 0);
        let rows: Vec<_> = (0..400)
            .map(|i| {
                let g = if i < 150 { Group::Treated } else { Group::External };
                let shift = if g == Group::Treated { 0.5 } else { 0.0 };
                (g, [s.normal(shift, 1.0), s.normal(0.0, 1.0)])
            })
            .collect();
        let model = fit_propensity(&matrix(&rows)).unwrap();
        assert!(model.coefficients[1].abs() < 3.0 * model.std_errors[1], "{model:?}");
        assert!(model.coefficients[0] > 3.0 * model.std_errors[0]);
    }

    #[test]
    fn perfect_predictor_is_separation() {
        let mut s = Stream::new(5, 0);
        let rows: Vec<_> = (0..30)
            .map(|i| {
                let g = if i < 10 { Group::Treated } else { Group::External };
                let x2 = if g == Group::Treated { 1.0 } else { 0.0 };
                (g, [s.normal(0.0, 1.0), x2])
            })
            .collect();
        match fit_propensity(&matrix(&rows)) {
            Err(Error::Separation { covariate }) => assert_eq!(covariate, "x2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn joint_separation_detected() {
        // x1 + x2 separates the groups although neither does alone
        let rows: Vec<_> = (0..40)
            .map(|i| {
                let a = (i % 10) as f64 / 10.0;
                let (g, x) = if i < 20 {
                    (Group::Treated, [a, 1.2 - a])
                } else {
                    (Group::External, [a + 0.05, 0.9 - a])
                };
                (g, x)
            })
            .collect();
        assert!(matches!(fit_propensity(&matrix(&rows)), Err(Error::Separation { .. })));
    }

    #[test]
    fn duplicated_column_is_collinear() {
        let mut s = Stream::new(8, 0);
        let rows: Vec<_> = (0..30)
            .map(|i| {
                let g = if i % 3 == 0 { Group::Treated } else { Group::External };
                let v = s.normal(0.0, 1.0);
                (g, [v, 2.0 * v + 1.0])
            })
            .collect();
        assert!(matches!(fit_propensity(&matrix(&rows)), Err(Error::Collinearity(_))));
    }
}
