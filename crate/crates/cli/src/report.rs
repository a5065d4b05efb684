//! Run reports and their text, JSON and TSV renderings.

use std::fmt::Write as _;

use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
    Tsv,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    /// Fixed number of decimals in text/TSV, full precision in JSON.
    Fixed(f64, usize),
    /// Three significant digits in scientific notation in text/TSV.
    Sci(f64),
    /// A probability shown as a percentage with one decimal, rounded half-up.
    Pct(f64),
    Bool(bool),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            Cell::Fixed(v, d) if v.is_finite() => format!("{v:.d$}", d = *d),
            Cell::Sci(v) if v.is_finite() => format!("{v:.2e}"),
            Cell::Fixed(v, _) | Cell::Sci(v) => non_finite(*v).into(),
            Cell::Pct(p) => format!("{:.1}", extcontrol_core::table::percent_one_decimal(*p)),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> serde_json::Value {
        use serde_json::Value;
        match self {
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Int(v) => Value::from(*v),
            Cell::Fixed(v, _) | Cell::Sci(v) if !v.is_finite() => Value::from(non_finite(*v)),
            Cell::Fixed(v, _) | Cell::Sci(v) => Value::from(*v),
            Cell::Pct(p) => Value::from(extcontrol_core::table::percent_one_decimal(*p)),
            Cell::Bool(b) => Value::from(*b),
        }
    }
}

fn non_finite(v: f64) -> &'static str {
    if v.is_nan() {
        "nan"
    } else if v > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Section {
    pub fn new(title: impl Into<String>, columns: &[&str]) -> Self {
        Self { title: title.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![] }
    }

    pub fn with_columns(title: impl Into<String>, columns: Vec<String>) -> Self {
        Self { title: title.into(), columns, rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Two-column key/value section.
    pub fn key_values(title: impl Into<String>, pairs: Vec<(&str, Cell)>) -> Self {
        let mut s = Self::new(title, &["key", "value"]);
        for (k, v) in pairs {
            s.push(vec![Cell::Text(k.into()), v]);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub command: String,
    pub seed: Option<u64>,
    /// Echo of every input that determines the numbers, in a stable order.
    pub inputs: Vec<(String, String)>,
    pub sections: Vec<Section>,
}

#[derive(Serialize)]
struct JsonInput<'a> {
    key: &'a str,
    value: &'a str,
}

#[derive(Serialize)]
struct JsonSection<'a> {
    title: &'a str,
    columns: &'a [String],
    rows: Vec<Vec<serde_json::Value>>,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    command: &'a str,
    version: &'a str,
    seed: Option<u64>,
    inputs: Vec<JsonInput<'a>>,
    sections: Vec<JsonSection<'a>>,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        Self { command: command.into(), seed: None, inputs: vec![], sections: vec![] }
    }

    pub fn input(&mut self, key: &str, value: impl ToString) {
        self.inputs.push((key.into(), value.to_string()));
    }

    pub fn input_value(&self, key: &str) -> Option<&str> {
        self.inputs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.text(),
            Format::Tsv => self.tsv(),
            Format::Json => self.json(),
        }
    }

    fn text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "extcontrol {} {}", VERSION, self.command);
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed: {seed}");
        }
        for (k, v) in &self.inputs {
            if v.contains('\n') {
                let _ = writeln!(out, "{k}:");
                for line in v.lines() {
                    let _ = writeln!(out, "  | {line}");
                }
            } else {
                let _ = writeln!(out, "{k}: {v}");
            }
        }
        for s in &self.sections {
            let _ = writeln!(out, "\n== {} ==", s.title);
            let cells: Vec<Vec<String>> =
                s.rows.iter().map(|r| r.iter().map(Cell::render).collect()).collect();
            let widths: Vec<usize> = (0..s.columns.len())
                .map(|j| {
                    cells.iter().map(|r| r[j].chars().count()).chain([s.columns[j].chars().count()]).max().unwrap_or(0)
                })
                .collect();
            let line = |fields: &[String]| -> String {
                let padded: Vec<String> = fields
                    .iter()
                    .zip(&widths)
                    .map(|(f, w)| format!("{f:>w$}", w = *w))
                    .collect();
                padded.join("  ").trim_end().to_string()
            };
            let _ = writeln!(out, "{}", line(&s.columns));
            for r in &cells {
                let _ = writeln!(out, "{}", line(r));
            }
        }
        out
    }

    fn tsv(&self) -> String {
        let mut out = String::new();
        let single = self.sections.len() == 1;
        for s in &self.sections {
            if !single {
                let _ = writeln!(out, "# {}", s.title);
            }
            let _ = writeln!(out, "{}", s.columns.join("\t"));
            for r in &s.rows {
                let fields: Vec<String> = r.iter().map(Cell::render).collect();
                let _ = writeln!(out, "{}", fields.join("\t"));
            }
        }
        out
    }

    fn json(&self) -> String {
        let report = JsonReport {
            command: &self.command,
            version: VERSION,
            seed: self.seed,
            inputs: self.inputs.iter().map(|(k, v)| JsonInput { key: k, value: v }).collect(),
            sections: self
                .sections
                .iter()
                .map(|s| JsonSection {
                    title: &s.title,
                    columns: &s.columns,
                    rows: s.rows.iter().map(|r| r.iter().map(Cell::json).collect()).collect(),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        let mut r = RunReport::new("demo");
        r.seed = Some(7);
        r.input("alpha", 0.025);
        let mut s = Section::new("table", &["name", "p", "power"]);
        s.push(vec![Cell::Text("a".into()), Cell::Sci(7.92e-7), Cell::Pct(0.12642)]);
        s.push(vec![Cell::Text("bb".into()), Cell::Fixed(f64::INFINITY, 2), Cell::Pct(0.5)]);
        r.sections.push(s);
        r
    }

    #[test]
    fn cell_rendering() {
        assert_eq!(Cell::Pct(0.12642).render(), "12.6");
        assert_eq!(Cell::Pct(0.0).render(), "0.0");
        assert_eq!(Cell::Sci(7.92e-7).render(), "7.92e-7");
        assert_eq!(Cell::Fixed(-0.004, 2).render(), "-0.00");
        assert_eq!(Cell::Fixed(f64::NEG_INFINITY, 2).render(), "-inf");
    }

    #[test]
    fn formats_are_stable() {
        let r = sample();
        let text = r.render(Format::Text);
        assert!(text.contains("name        p  power\n   a  7.92e-7   12.6\n  bb      inf   50.0\n"), "{text}");
        assert_eq!(r.render(Format::Tsv), "name\tp\tpower\na\t7.92e-7\t12.6\nbb\tinf\t50.0\n");
        let json: serde_json::Value = serde_json::from_str(&r.render(Format::Json)).unwrap();
        assert_eq!(json["seed"], 7);
        assert_eq!(json["sections"][0]["rows"][1][1], "inf");
        assert_eq!(json["sections"][0]["rows"][0][2], 12.6);
        let json = r.render(Format::Json);
        let keys: Vec<&str> = json.lines().filter_map(|l| l.trim().split('"').nth(1)).take(3).collect();
        assert_eq!(keys, ["command", "version", "seed"]);
    }
}
