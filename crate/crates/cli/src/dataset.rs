//! Trial data in CSV form: `subject_id,source,arm,outcome,<covariate...>`.

use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use extcontrol_core::matching::{CovariateMatrix, Group};
use extcontrol_core::{summarize, ArmSummary};

pub const REQUIRED_COLUMNS: [&str; 4] = ["subject_id", "source", "arm", "outcome"];

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}")]
    Io { path: String, source: std::io::Error },
    #[error("empty file: no header row")]
    Empty,
    #[error("bad header: {0}")]
    Header(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Internal,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    Treated,
    Control,
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "internal" => Ok(Source::Internal),
            "external" => Ok(Source::External),
            other => Err(format!("source must be internal or external, got '{other}'")),
        }
    }
}

impl FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "treated" => Ok(Arm::Treated),
            "control" => Ok(Arm::Control),
            other => Err(format!("arm must be treated or control, got '{other}'")),
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Internal => "internal",
            Source::External => "external",
        })
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Treated => "treated",
            Arm::Control => "control",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub subject_id: String,
    pub source: Source,
    pub arm: Arm,
    pub outcome: f64,
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    pub covariate_names: Vec<String>,
    pub records: Vec<Record>,
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<TrialDataset, LoadError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
    parse_dataset(file)
}

pub fn parse_dataset(reader: impl Read) -> Result<TrialDataset, LoadError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut rows = rdr.records();
    let header = match rows.next() {
        None => return Err(LoadError::Empty),
        Some(Err(e)) => return Err(LoadError::Header(e.to_string())),
        Some(Ok(h)) => h,
    };
    if header.len() < REQUIRED_COLUMNS.len()
        || header.iter().zip(REQUIRED_COLUMNS).any(|(got, want)| got != want)
    {
        return Err(LoadError::Header(format!(
            "expected columns {} first, got {}",
            REQUIRED_COLUMNS.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let covariate_names: Vec<String> = header.iter().skip(4).map(str::to_string).collect();
    let mut seen = HashSet::new();
    for name in &covariate_names {
        if name.is_empty() || !seen.insert(name.clone()) {
            return Err(LoadError::Header(format!("covariate name '{name}' is empty or repeated")));
        }
    }

    let mut ids = HashSet::new();
    let mut records = Vec::new();
    for row in rows {
        let row = row.map_err(|e| LoadError::Row {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let fail = |message: String| LoadError::Row { line, message };
        if row.len() != header.len() {
            return Err(fail(format!("expected {} fields, found {}", header.len(), row.len())));
        }
        let subject_id = row[0].trim().to_string();
        if subject_id.is_empty() {
            return Err(fail("empty subject_id".into()));
        }
        if !ids.insert(subject_id.clone()) {
            return Err(fail(format!("duplicate subject_id '{subject_id}'")));
        }
        let source: Source = row[1].parse().map_err(fail)?;
        let arm: Arm = row[2].parse().map_err(fail)?;
        if source == Source::External && arm == Arm::Treated {
            return Err(fail(format!("external subject '{subject_id}' cannot be treated")));
        }
        let number = |field: &str, column: &str| -> Result<f64, LoadError> {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| fail(format!("{column} '{field}' is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(fail(format!("{column} must be finite")))
            }
        };
        let outcome = number(&row[3], "outcome")?;
        let covariates = covariate_names
            .iter()
            .enumerate()
            .map(|(j, name)| number(&row[4 + j], name))
            .collect::<Result<Vec<_>, _>>()?;
        records.push(Record { subject_id, source, arm, outcome, covariates });
    }
    if records.is_empty() {
        return Err(LoadError::Invalid("file has a header but no data rows".into()));
    }
    Ok(TrialDataset { covariate_names, records })
}

impl TrialDataset {
    pub fn outcomes(&self, source: Source, arm: Arm) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.source == source && r.arm == arm)
            .map(|r| r.outcome)
            .collect()
    }

    /// Summaries of (internal treated, internal control, external control).
    pub fn arm_summaries(&self) -> anyhow::Result<[ArmSummary; 3]> {
        let arm = |source, a, label: &str| {
            summarize(&self.outcomes(source, a)).map_err(|e| anyhow::anyhow!("{label} arm: {e}"))
        };
        Ok([
            arm(Source::Internal, Arm::Treated, "treated")?,
            arm(Source::Internal, Arm::Control, "internal control")?,
            arm(Source::External, Arm::Control, "external control")?,
        ])
    }

    /// Indices of the records entering the match (internal treated and all
    /// external), in file order.
    pub fn matching_rows(&self) -> Vec<usize> {
        (0..self.records.len())
            .filter(|&i| {
                let r = &self.records[i];
                r.source == Source::External || r.arm == Arm::Treated
            })
            .collect()
    }

    /// Covariates of the matching rows; row k of the matrix is record
    /// `matching_rows()[k]`.
    pub fn covariate_matrix(&self) -> anyhow::Result<CovariateMatrix> {
        let rows = self.matching_rows();
        let ids = rows.iter().map(|&i| self.records[i].subject_id.clone()).collect();
        let groups = rows
            .iter()
            .map(|&i| match self.records[i].source {
                Source::Internal => Group::Treated,
                Source::External => Group::External,
            })
            .collect();
        let values = rows.iter().flat_map(|&i| self.records[i].covariates.iter().copied()).collect();
        Ok(CovariateMatrix::new(self.covariate_names.clone(), ids, groups, values)?)
    }

    /// Writes the dataset back out in the input format.
    pub fn write_csv(&self, out: impl std::io::Write) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
        header.extend(self.covariate_names.iter().map(String::as_str));
        w.write_record(&header)?;
        for r in &self.records {
            let mut fields =
                vec![r.subject_id.clone(), r.source.to_string(), r.arm.to_string(), r.outcome.to_string()];
            fields.extend(r.covariates.iter().map(f64::to_string));
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }
}
