use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Per-covariate (mean_t − mean_c) / √((s_t² + s_c²)/2).
///
/// A covariate constant at the same value on both sides gives 0; a zero
/// pooled SD with different means gives ±∞.
pub fn standardized_mean_difference(treated: &[&[f64]], control: &[&[f64]]) -> Result<Vec<f64>> {
    if treated.len() < 2 || control.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: treated.len().min(control.len()) });
    }
    let p = treated[0].len();
    if treated.iter().chain(control).any(|r| r.len() != p) {
        return Err(Error::Data("rows have different numbers of covariates".into()));
    }
    let moments = |rows: &[&[f64]], j: usize| {
        let n = rows.len() as f64;
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<f64>() / (n - 1.0);
        (mean, var)
    };
    Ok((0..p)
        .map(|j| {
            let (mt, vt) = moments(treated, j);
            let (mc, vc) = moments(control, j);
            let diff = mt - mc;
            let sd = libm::sqrt((vt + vc) / 2.0);
            if sd > 0.0 {
                diff / sd
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY.copysign(diff)
            }
        })
        .collect())
}
