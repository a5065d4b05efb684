//! Thread-parallel drivers. Work is cut into fixed-size blocks and reduced
//! with integer sums, so results never depend on the thread count.

use anyhow::Result;
use extcontrol_core::simulate::{estimates_from_counts, rejection_counts, SimSpec, TestEstimate};
use extcontrol_core::table::{generate_table, Table, TableColumn};
use extcontrol_core::PowerScenario;
use rayon::prelude::*;

const BLOCK: u64 = 250;

/// Parallel `estimate_rejection`; bit-identical to the sequential version.
pub fn estimate_rejection(spec: &SimSpec) -> Result<Vec<TestEstimate>> {
    spec.validate()?;
    let blocks: Vec<(u64, u64)> =
        (0..spec.n_reps.div_ceil(BLOCK)).map(|b| (b * BLOCK, ((b + 1) * BLOCK).min(spec.n_reps))).collect();
    let partial: Vec<Vec<u64>> = blocks
        .par_iter()
        .map(|&(lo, hi)| rejection_counts(spec, lo..hi))
        .collect::<extcontrol_core::Result<_>>()?;
    let mut counts = vec![0u64; spec.tests.len()];
    for p in &partial {
        for (c, v) in counts.iter_mut().zip(p) {
            *c += v;
        }
    }
    Ok(estimates_from_counts(&spec.tests, &counts, spec.n_reps))
}

/// Table rows evaluated in parallel, returned in grid order.
pub fn table(grid: &[PowerScenario], columns: &[TableColumn]) -> Result<Table> {
    let rows = grid
        .par_iter()
        .map(|s| generate_table(std::slice::from_ref(s), columns).map(|t| t.rows.into_iter().next().unwrap()))
        .collect::<extcontrol_core::Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Ok(generate_table(grid, columns)?);
    }
    Ok(Table { columns: columns.to_vec(), rows })
}

/// Runs `f` on a pool with `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use extcontrol_core::simulate::{TestKind, TestSpec};
    use extcontrol_core::Weight;

    #[test]
    fn matches_sequential_for_any_thread_count() {
        let spec = SimSpec {
            scenario: PowerScenario {
                theta_star: 0.2,
                delta_star: 0.2,
                ..PowerScenario::from_arm_sizes(50, 25, 75)
            },
            n_reps: 777,
            seed: 9,
            tests: vec![
                TestSpec::new(TestKind::T1, Weight::Fixed(0.25), 0.2),
                TestSpec::new(TestKind::Combined, Weight::Fixed(0.25), 0.2),
            ],
        };
        let seq = extcontrol_core::simulate::estimate_rejection(&spec).unwrap();
        for threads in [1, 3, 8] {
            let par = with_threads(threads, || estimate_rejection(&spec)).unwrap().unwrap();
            assert_eq!(par, seq);
        }
    }
}
