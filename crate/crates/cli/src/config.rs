//! Flat key-value scenario grids.
//!
//! ```text
//! # comment
//! alpha = 0.025
//! columns = t1, t2(0.25), t2(opt), tc(0.25), tc(opt)
//!
//! [scenario]
//! delta0 = 0.2, 0.3
//! n1 = 50, 100
//! theta_star = 0.2, 0.3, 0.4
//! delta_star = 0.2
//! ratio = 2:1:3
//! ```
//!
//! Top-level keys apply to every scenario. Inside a `[scenario]` block every
//! comma-separated list is expanded as a cartesian product, the first listed
//! key varying slowest.

use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use extcontrol_core::table::{TableColumn, WeightRule};
use extcontrol_core::PowerScenario;

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub alpha: f64,
    pub theta0: f64,
    /// `None` means the subcommand's default columns.
    pub columns: Option<Vec<TableColumn>>,
    pub reps: Option<u64>,
    pub seed: Option<u64>,
    pub scenarios: Vec<PowerScenario>,
}

const GLOBAL_KEYS: [&str; 5] = ["alpha", "theta0", "columns", "reps", "seed"];
const BLOCK_KEYS: [&str; 11] = [
    "theta_star", "delta_star", "delta0", "n1", "n0", "ne", "ratio", "sigma", "sigma1", "sigma0",
    "sigma_e",
];

pub fn parse_column(text: &str) -> Result<TableColumn> {
    let t = text.trim().to_ascii_lowercase();
    if t == "t1" {
        return Ok(TableColumn::T1);
    }
    let (kind, rest) = t.split_once('(').ok_or_else(|| anyhow!("bad column '{text}'"))?;
    let arg = rest.strip_suffix(')').ok_or_else(|| anyhow!("bad column '{text}'"))?.trim();
    let rule = if arg == "opt" {
        WeightRule::Optimal
    } else {
        let w: f64 = arg.parse().with_context(|| format!("bad weight in column '{text}'"))?;
        if !(0.0..=1.0).contains(&w) {
            bail!("weight in column '{text}' outside [0, 1]");
        }
        WeightRule::Fixed(w)
    };
    Ok(match kind.trim() {
        "t2" => TableColumn::T2(rule),
        "tc" => TableColumn::Combined(rule),
        "naive" => TableColumn::Naive(rule),
        _ => bail!("unknown column '{text}'"),
    })
}

pub fn column_key(c: &TableColumn) -> String {
    let rule = |r: &WeightRule| match r {
        WeightRule::Fixed(w) => format!("{w}"),
        WeightRule::Optimal => "opt".into(),
    };
    match c {
        TableColumn::T1 => "t1".into(),
        TableColumn::T2(r) => format!("t2({})", rule(r)),
        TableColumn::Combined(r) => format!("tc({})", rule(r)),
        TableColumn::Naive(r) => format!("naive({})", rule(r)),
    }
}

fn split_list(value: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for ch in value.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    out.push(cur.trim().to_string());
    out
}

fn number<T: std::str::FromStr>(key: &str, v: &str, line: usize) -> Result<T> {
    v.parse().map_err(|_| anyhow!("line {line}: {key} value '{v}' is not valid"))
}

struct Block {
    line: usize,
    entries: Vec<(String, Vec<String>, usize)>,
}

pub fn parse_config(text: &str) -> Result<GridConfig> {
    let mut cfg =
        GridConfig { alpha: 0.025, theta0: 0.0, columns: None, reps: None, seed: None, scenarios: vec![] };
    let mut blocks: Vec<Block> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            if content != "[scenario]" {
                bail!("line {line}: unknown section {content}");
            }
            blocks.push(Block { line, entries: Vec::new() });
            continue;
        }
        let (key, value) =
            content.split_once('=').ok_or_else(|| anyhow!("line {line}: expected key = value"))?;
        let (key, value) = (key.trim().to_ascii_lowercase(), value.trim());
        if value.is_empty() {
            bail!("line {line}: {key} has no value");
        }
        match blocks.last_mut() {
            None => {
                if !GLOBAL_KEYS.contains(&key.as_str()) {
                    bail!("line {line}: unknown key '{key}' outside a [scenario] block");
                }
                match key.as_str() {
                    "alpha" => cfg.alpha = number(&key, value, line)?,
                    "theta0" => cfg.theta0 = number(&key, value, line)?,
                    "reps" => cfg.reps = Some(number(&key, value, line)?),
                    "seed" => cfg.seed = Some(number(&key, value, line)?),
                    _ => {
                        let cols = split_list(value)
                            .iter()
                            .map(|c| parse_column(c))
                            .collect::<Result<Vec<_>>>()
                            .with_context(|| format!("line {line}"))?;
                        cfg.columns = Some(cols);
                    }
                }
            }
            Some(block) => {
                if !BLOCK_KEYS.contains(&key.as_str()) {
                    bail!("line {line}: unknown scenario key '{key}'");
                }
                if block.entries.iter().any(|(k, _, _)| *k == key) {
                    bail!("line {line}: {key} given twice in one block");
                }
                block.entries.push((key, split_list(value), line));
            }
        }
    }
    if blocks.is_empty() {
        bail!("config has no [scenario] block");
    }
    for block in &blocks {
        expand(block, &mut cfg)?;
    }
    Ok(cfg)
}

fn expand(block: &Block, cfg: &mut GridConfig) -> Result<()> {
    let lens: Vec<usize> = block.entries.iter().map(|(_, v, _)| v.len()).collect();
    let total: usize = lens.iter().product();
    for mut k in 0..total {
        // mixed-radix index, last key fastest
        let mut pick = vec![0; lens.len()];
        for (slot, len) in pick.iter_mut().zip(&lens).rev() {
            *slot = k % len;
            k /= len;
        }
        let picked = Picked { block, pick: &pick };
        let s = build_scenario(&picked, cfg, block.line)?;
        cfg.scenarios.push(s);
    }
    Ok(())
}

struct Picked<'a> {
    block: &'a Block,
    pick: &'a [usize],
}

impl Picked<'_> {
    /// Chosen value of `name` in this product cell, with its line.
    fn get(&self, name: &str) -> Option<(&str, usize)> {
        self.block
            .entries
            .iter()
            .zip(self.pick)
            .find(|((k, _, _), _)| k == name)
            .map(|((_, v, line), &i)| (v[i].as_str(), *line))
    }
}

fn build_scenario(
    picked: &Picked<'_>,
    cfg: &GridConfig,
    block_line: usize,
) -> Result<PowerScenario> {
    let get = |name: &str| picked.get(name);
    let f = |key: &str, default: f64| -> Result<f64> {
        match get(key) {
            Some((v, line)) => number(key, v, line),
            None => Ok(default),
        }
    };
    let (n1_text, n1_line) =
        get("n1").ok_or_else(|| anyhow!("block at line {block_line}: n1 is required"))?;
    let n1: usize = number("n1", n1_text, n1_line)?;
    let (n0, ne) = match (get("ratio"), get("n0"), get("ne")) {
        (Some((r, line)), None, None) => {
            let parts: Vec<f64> = r
                .split(':')
                .map(|p| number::<f64>("ratio", p.trim(), line))
                .collect::<Result<_>>()?;
            if parts.len() != 3 || parts.iter().any(|p| !(*p > 0.0)) {
                bail!("line {line}: ratio must look like a:b:c with positive parts");
            }
            let scale = n1 as f64 / parts[0];
            let size = |p: f64| -> Result<usize> {
                let v = p * scale;
                if (v - v.round()).abs() > 1e-9 {
                    bail!("line {line}: ratio {r} gives a non-integer arm size for n1 = {n1}");
                }
                Ok(v.round() as usize)
            };
            (size(parts[1])?, size(parts[2])?)
        }
        (None, Some((a, la)), Some((b, lb))) => (number("n0", a, la)?, number("ne", b, lb)?),
        _ => bail!("block at line {block_line}: give either ratio or both n0 and ne"),
    };
    if n1 == 0 || n0 == 0 || ne == 0 {
        bail!("block at line {block_line}: arm sizes must be positive");
    }
    let sigma = f("sigma", 1.0)?;
    let s = PowerScenario {
        theta_star: f("theta_star", cfg.theta0)?,
        theta0: cfg.theta0,
        delta_star: f("delta_star", 0.0)?,
        delta0: f("delta0", 0.0)?,
        sigma1: f("sigma1", sigma)?,
        sigma0: f("sigma0", sigma)?,
        sigma_e: f("sigma_e", sigma)?,
        alpha: cfg.alpha,
        ..PowerScenario::from_arm_sizes(n1, n0, ne)
    };
    s.validate().with_context(|| format!("block at line {block_line}"))?;
    Ok(s)
}

/// Canonical text form; parsing it gives back an identical config.
pub fn to_config_text(cfg: &GridConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "alpha = {}", cfg.alpha);
    let _ = writeln!(out, "theta0 = {}", cfg.theta0);
    if let Some(cols) = &cfg.columns {
        let keys: Vec<String> = cols.iter().map(column_key).collect();
        let _ = writeln!(out, "columns = {}", keys.join(", "));
    }
    if let Some(r) = cfg.reps {
        let _ = writeln!(out, "reps = {r}");
    }
    if let Some(s) = cfg.seed {
        let _ = writeln!(out, "seed = {s}");
    }
    for s in &cfg.scenarios {
        let _ = writeln!(out, "\n[scenario]");
        let _ = writeln!(out, "theta_star = {}", s.theta_star);
        let _ = writeln!(out, "delta_star = {}", s.delta_star);
        let _ = writeln!(out, "delta0 = {}", s.delta0);
        let _ = writeln!(out, "n1 = {}", s.n1());
        let _ = writeln!(out, "n0 = {}", s.n0());
        let _ = writeln!(out, "ne = {}", s.n_e.round() as usize);
        let _ = writeln!(out, "sigma1 = {}", s.sigma1);
        let _ = writeln!(out, "sigma0 = {}", s.sigma0);
        let _ = writeln!(out, "sigma_e = {}", s.sigma_e);
    }
    out
}
