//! Theoretical power / type I error tables over a grid of scenarios.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{domain, Result};
use crate::power::{self, Critical, PowerScenario};

/// How a column chooses the pooling weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightRule {
    Fixed(f64),
    /// The power-maximising weight of the row's scenario.
    Optimal,
}

impl WeightRule {
    pub fn resolve(self, s: &PowerScenario) -> Result<f64> {
        match self {
            WeightRule::Fixed(w) => Ok(w),
            WeightRule::Optimal => power::optimal_w(s),
        }
    }
}

impl fmt::Display for WeightRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightRule::Fixed(w) => write!(f, "{w}"),
            WeightRule::Optimal => f.write_str("w_opt"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TableColumn {
    T1,
    T2(WeightRule),
    Combined(WeightRule),
    /// Combined test compared against z₁₋α (no multiplicity correction).
    Naive(WeightRule),
}

impl TableColumn {
    pub fn label(&self) -> String {
        match self {
            TableColumn::T1 => "T1".into(),
            TableColumn::T2(w) => alloc::format!("T2({w})"),
            TableColumn::Combined(w) => alloc::format!("Tc({w})"),
            TableColumn::Naive(w) => alloc::format!("naive_Tc({w})"),
        }
    }

    /// Probability that this test rejects under scenario `s` (its own `w`
    /// is replaced by the column's rule).
    pub fn evaluate(&self, s: &PowerScenario) -> Result<f64> {
        match *self {
            TableColumn::T1 => power::power_t1(s),
            TableColumn::T2(rule) => power::power_t2(&s.with_w(rule.resolve(s)?)),
            TableColumn::Combined(rule) => {
                power::power_combined(&s.with_w(rule.resolve(s)?), Critical::Corrected)
            }
            TableColumn::Naive(rule) => {
                power::power_combined(&s.with_w(rule.resolve(s)?), Critical::Naive)
            }
        }
    }
}

/// Columns of the published power table: T1, T2(1/4), T2(w_opt), Tc(1/4), Tc(w_opt).
pub fn power_table_columns() -> Vec<TableColumn> {
    use TableColumn::*;
    use WeightRule::*;
    alloc::vec![T1, T2(Fixed(0.25)), T2(Optimal), Combined(Fixed(0.25)), Combined(Optimal)]
}

/// Columns of the type I error table: T1, T2(1/4), Tc(1/4), naive Tc(1/4).
pub fn type1_table_columns() -> Vec<TableColumn> {
    use TableColumn::*;
    use WeightRule::*;
    alloc::vec![T1, T2(Fixed(0.25)), Combined(Fixed(0.25)), Naive(Fixed(0.25))]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub delta0: f64,
    pub n1: usize,
    pub theta_star: f64,
    /// Rejection probabilities (not percentages), one per column.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<TableColumn>,
    pub rows: Vec<TableRow>,
}

/// Evaluates every column on every scenario, in grid order.
pub fn generate_table(grid: &[PowerScenario], columns: &[TableColumn]) -> Result<Table> {
    if grid.is_empty() {
        return Err(domain("scenario grid is empty"));
    }
    if columns.is_empty() {
        return Err(domain("no table columns requested"));
    }
    let rows = grid
        .iter()
        .map(|s| {
            let values = columns.iter().map(|c| c.evaluate(s)).collect::<Result<Vec<_>>>()?;
            Ok(TableRow { delta0: s.delta0, n1: s.n1(), theta_star: s.theta_star, values })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table { columns: columns.to_vec(), rows })
}

/// Probability → percent, rounded half-up to one decimal.
pub fn percent_one_decimal(p: f64) -> f64 {
    // the 1e-9 absorbs binary representation error of exact halves
    libm::floor(p * 1000.0 + 0.5 + 1e-9) / 10.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(percent_one_decimal(0.12642), 12.6);
        assert_eq!(percent_one_decimal(0.12650), 12.7);
        assert_eq!(percent_one_decimal(0.0), 0.0);
        assert_eq!(percent_one_decimal(0.99996), 100.0);
    }

    #[test]
    fn null_row_gives_alpha() {
        let s = PowerScenario {
            theta_star: 0.0,
            delta_star: 0.2,
            delta0: 0.2,
            ..PowerScenario::from_arm_sizes(100, 50, 150)
        };
        let cols = [
            TableColumn::T1,
            TableColumn::T2(WeightRule::Fixed(0.25)),
            TableColumn::Combined(WeightRule::Fixed(0.25)),
        ];
        let table = generate_table(&[s], &cols).unwrap();
        assert_eq!(table.rows.len(), 1);
        for v in &table.rows[0].values {
            assert!((v - 0.025).abs() < 1e-9);
            assert_eq!(percent_one_decimal(*v), 2.5);
        }
        assert_eq!(table.rows[0].n1, 100);
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(generate_table(&[], &power_table_columns()).is_err());
    }

    #[test]
    fn labels() {
        let labels: Vec<_> = power_table_columns().iter().map(|c| c.label()).collect();
        assert_eq!(labels, ["T1", "T2(0.25)", "T2(w_opt)", "Tc(0.25)", "Tc(w_opt)"]);
    }
}
