use alloc::vec::Vec;

use super::distance::DistanceMatrix;
use super::MatchResult;
use crate::error::{Error, Result};

/// Minimum-cost assignment of each of `n` rows to a distinct column out of
/// `m ≥ n` (shortest augmenting paths with potentials, O(n²m)). Returns the
/// column of every row.
pub fn solve_assignment(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Result<Vec<usize>> {
    if m < n {
        return Err(Error::Infeasible { treated: n, external: m });
    }
    // 1-based arrays; index 0 is the virtual column/row
    let mut u = alloc::vec![0.0f64; n + 1];
    let mut v = alloc::vec![0.0f64; m + 1];
    let mut row_of = alloc::vec![0usize; m + 1];
    let mut way = alloc::vec![0usize; m + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = alloc::vec![f64::INFINITY; m + 1];
        let mut used = alloc::vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if j1 == 0 {
                return Err(Error::Numerical("assignment costs are not finite".into()));
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = alloc::vec![0usize; n];
    for j in 1..=m {
        if row_of[j] != 0 {
            col_of[row_of[j] - 1] = j - 1;
        }
    }
    Ok(col_of)
}

fn result_from(dist: &DistanceMatrix, cols: &[usize]) -> MatchResult {
    let mut total = 0.0;
    let mut pairs = Vec::with_capacity(cols.len());
    let mut unmatched = Vec::new();
    for (t, &e) in cols.iter().enumerate() {
        total += dist.get(t, e);
        pairs.push((dist.treated_rows[t], dist.external_rows[e]));
        if dist.violations[t * dist.n_external + e] {
            unmatched.push(dist.treated_rows[t]);
        }
    }
    MatchResult { pairs, total_distance: total, unmatched_treated: unmatched, balance: Vec::new() }
}

/// Optimal one-to-one match of every treated unit to a distinct external unit.
pub fn optimal_pair_match(dist: &DistanceMatrix) -> Result<MatchResult> {
    if dist.n_external < dist.n_treated {
        return Err(Error::Infeasible { treated: dist.n_treated, external: dist.n_external });
    }
    if dist.costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Data("distances must be finite".into()));
    }
    let cols = solve_assignment(dist.n_treated, dist.n_external, |t, e| dist.get(t, e))?;
    Ok(result_from(dist, &cols))
}

/// Greedy nearest-neighbour matching in treated order; a baseline only.
pub fn greedy_pair_match(dist: &DistanceMatrix) -> Result<MatchResult> {
    if dist.n_external < dist.n_treated {
        return Err(Error::Infeasible { treated: dist.n_treated, external: dist.n_external });
    }
    let mut used = alloc::vec![false; dist.n_external];
    let mut cols = Vec::with_capacity(dist.n_treated);
    for t in 0..dist.n_treated {
        let mut best = None;
        for e in (0..dist.n_external).filter(|&e| !used[e]) {
            if best.map_or(true, |b| dist.get(t, e) < dist.get(t, b)) {
                best = Some(e);
            }
        }
        let e = best.expect("enough external units");
        used[e] = true;
        cols.push(e);
    }
    Ok(result_from(dist, &cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(n: usize, m: usize, c: &[f64]) -> DistanceMatrix {
        DistanceMatrix::from_costs(n, m, c.to_vec()).unwrap()
    }

    #[test]
    fn trivial_cases() {
        let r = optimal_pair_match(&matrix(1, 1, &[3.5])).unwrap();
        assert_eq!((r.pairs, r.total_distance), (alloc::vec![(0, 0)], 3.5));
        let r = optimal_pair_match(&matrix(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert_eq!((r.pairs, r.total_distance), (alloc::vec![(0, 0), (1, 1)], 2.0));
        assert!(matches!(
            optimal_pair_match(&matrix(2, 1, &[1.0, 2.0])),
            Err(Error::Infeasible { treated: 2, external: 1 })
        ));
    }

    #[test]
    fn greedy_can_be_suboptimal() {
        // greedy grabs column 0 for row 0 and pays 10 for row 1
        let d = matrix(2, 2, &[1.0, 2.0, 1.5, 10.0]);
        assert_eq!(greedy_pair_match(&d).unwrap().total_distance, 11.0);
        assert_eq!(optimal_pair_match(&d).unwrap().total_distance, 3.5);
    }

    #[test]
    fn ties_are_deterministic() {
        let d = matrix(2, 3, &[1.0; 6]);
        let a = optimal_pair_match(&d).unwrap();
        assert_eq!(a, optimal_pair_match(&d).unwrap());
        assert_eq!(a.total_distance, 2.0);
    }
}
