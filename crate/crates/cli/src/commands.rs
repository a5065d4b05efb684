//! Subcommand implementations; each returns a report and never prints.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use extcontrol_core::matching::{
    apply_caliper, fit_propensity, omit_one_benchmark, optimal_pair_match, robust_mahalanobis,
    standardized_mean_difference, BenchmarkEntry, MatchOptions, benchmark_without,
};
use extcontrol_core::simulate::{
    subsample_power_study, MatchedTrial, SimSpec, StudyConfig, TestKind, TestSpec,
};
use extcontrol_core::table::{power_table_columns, type1_table_columns, TableColumn, WeightRule};
use extcontrol_core::testing::{combined_p_value, pooled_statistic, single_test, t1_statistic};
use extcontrol_core::{
    combined_test, negate_transform, tipping_point, ArmSummary, Correlation, Direction,
    PowerScenario, TestConfig, TippingPoint, Weight,
};

use crate::cli::{TestMethod, TestOptions, TipMethod};
use crate::config::{parse_config, to_config_text, GridConfig};
use crate::dataset::{load_dataset, Arm, Source, TrialDataset};
use crate::parallel;
use crate::report::{Cell, RunReport, Section};

fn weight_text(w: Weight) -> String {
    match w {
        Weight::Auto => "auto".into(),
        Weight::Fixed(v) => v.to_string(),
    }
}

fn direction_text(d: Direction) -> &'static str {
    match d {
        Direction::Greater => "greater",
        Direction::Less => "less",
        Direction::TwoSided => "two-sided",
    }
}

fn arms_section(arms: &[ArmSummary; 3]) -> Section {
    let mut s = Section::new("arms", &["arm", "n", "mean", "variance"]);
    for (name, a) in ["treated", "internal_control", "external_control"].iter().zip(arms) {
        s.push(vec![
            Cell::Text((*name).into()),
            Cell::Int(a.n as i64),
            Cell::Fixed(a.mean, 4),
            Cell::Fixed(a.var, 4),
        ]);
    }
    s
}

fn echo_test_options(r: &mut RunReport, o: &TestOptions) {
    r.input("data", o.data.display());
    r.input("direction", direction_text(o.direction.into()));
    r.input("w", weight_text(o.w));
    r.input("theta0", o.theta0);
    r.input("alpha", o.alpha);
}

/// (statistic, one-sided p) of T1 or T₂,Δ0(w) on the "greater" scale.
fn single_stat(
    method: TestMethod,
    arms: &[ArmSummary; 3],
    theta0: f64,
    w: f64,
    delta0: f64,
) -> Result<(f64, f64)> {
    let [t, i, e] = arms;
    let stat = match method {
        TestMethod::T1 => t1_statistic(t, i, theta0)?,
        _ => pooled_statistic(t, i, e, theta0, w, delta0)?,
    };
    Ok((stat, single_test(stat, 0.25)?.0))
}

pub fn test(opts: &TestOptions, method: TestMethod, delta0: f64) -> Result<RunReport> {
    let data = load_dataset(&opts.data)?;
    let arms = data.arm_summaries()?;
    let direction: Direction = opts.direction.into();
    let cfg = TestConfig { alpha: opts.alpha, theta0: opts.theta0, direction, weight: opts.w, delta0 };
    cfg.validate()?;

    let mut r = RunReport::new("test");
    echo_test_options(&mut r, opts);
    r.input("method", format!("{method:?}").to_lowercase());
    r.input("delta0", delta0);
    r.sections.push(arms_section(&arms));

    if method == TestMethod::Combined {
        let out = combined_test(&arms[0], &arms[1], &arms[2], &cfg)?;
        r.sections.push(Section::key_values(
            "combined test",
            vec![
                ("side", Cell::Text(direction_text(out.side).into())),
                ("w", Cell::Fixed(out.w_used, 4)),
                ("t1", Cell::Fixed(out.t1, 4)),
                ("p_t1", Cell::Sci(out.p_t1)),
                ("t2", Cell::Fixed(out.t2_adj, 4)),
                ("p_t2", Cell::Sci(out.p_t2)),
                ("rho_hat", Cell::Fixed(out.rho_hat, 4)),
                ("critical_value", Cell::Fixed(out.critical_value, 4)),
                ("adjusted_p", Cell::Sci(out.adjusted_p)),
                ("reject", Cell::Bool(out.reject)),
            ],
        ));
        return Ok(r);
    }

    let w = opts.w.resolve(&arms[1], &arms[2])?;
    let greater = single_stat(method, &arms, opts.theta0, w, delta0)?;
    let (flipped, theta0_neg) = negate_transform(&arms, opts.theta0);
    let less = single_stat(method, &flipped, theta0_neg, w, delta0)?;
    let (side, (stat, p), reject) = match direction {
        Direction::Greater => (Direction::Greater, greater, single_test(greater.0, opts.alpha)?.1),
        Direction::Less => (Direction::Less, less, single_test(less.0, opts.alpha)?.1),
        Direction::TwoSided => {
            let half = opts.alpha / 2.0;
            let reject = single_test(greater.0, half)?.1 || single_test(less.0, half)?.1;
            let (side, best) =
                if less.1 < greater.1 { (Direction::Less, less) } else { (Direction::Greater, greater) };
            (side, (best.0, (2.0 * best.1).min(1.0)), reject)
        }
    };
    let title = if method == TestMethod::T1 { "t1 test" } else { "pooled test" };
    r.sections.push(Section::key_values(
        title,
        vec![
            ("side", Cell::Text(direction_text(side).into())),
            ("w", Cell::Fixed(if method == TestMethod::T1 { 1.0 } else { w }, 4)),
            ("statistic", Cell::Fixed(stat, 4)),
            ("p", Cell::Sci(p)),
            ("reject", Cell::Bool(reject)),
        ],
    ));
    Ok(r)
}

fn tip_cell(t: TippingPoint) -> Cell {
    match t {
        TippingPoint::At(v) => Cell::Fixed(v, 4),
        TippingPoint::Insensitive => Cell::Text("insensitive".into()),
    }
}

pub fn tipping(opts: &TestOptions, method: TipMethod) -> Result<RunReport> {
    let data = load_dataset(&opts.data)?;
    let arms = data.arm_summaries()?;
    let direction: Direction = opts.direction.into();
    let cfg = TestConfig { alpha: opts.alpha, theta0: opts.theta0, direction, weight: opts.w, delta0: 0.0 };
    let tips = tipping_point(&arms[0], &arms[1], &arms[2], &cfg)?;

    let (side_arms, theta0) = match direction {
        Direction::Less => negate_transform(&arms, opts.theta0),
        _ => (arms, opts.theta0),
    };
    let t1 = t1_statistic(&side_arms[0], &side_arms[1], theta0)?;
    let plateau = combined_p_value(t1, Correlation::new(tips.rho_hat)?);

    let mut r = RunReport::new("tipping");
    echo_test_options(&mut r, opts);
    r.input("method", format!("{method:?}").to_lowercase());
    r.sections.push(arms_section(&arms));
    let mut kv = vec![("w", Cell::Fixed(tips.w_used, 4)), ("rho_hat", Cell::Fixed(tips.rho_hat, 4))];
    if method != TipMethod::Combined {
        kv.push(("tipping_t2", tip_cell(tips.t2)));
    }
    if method != TipMethod::T2 {
        kv.push(("tipping_combined", tip_cell(tips.combined)));
        kv.push(("plateau_p", Cell::Sci(plateau)));
    }
    r.sections.push(Section::key_values("tipping points", kv));
    Ok(r)
}

fn load_grid(path: &Path) -> Result<GridConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

fn table_header(columns: &[TableColumn]) -> Vec<String> {
    let mut h: Vec<String> = ["delta0", "n1", "theta_star"].map(String::from).to_vec();
    h.extend(columns.iter().map(TableColumn::label));
    h
}

fn row_keys(s: &PowerScenario) -> Vec<Cell> {
    vec![Cell::Fixed(s.delta0, 2), Cell::Int(s.n1() as i64), Cell::Fixed(s.theta_star, 2)]
}

pub fn power_table(config: &Path, type1: bool) -> Result<RunReport> {
    let mut cfg = load_grid(config)?;
    if type1 {
        for s in &mut cfg.scenarios {
            s.theta_star = s.theta0;
        }
    }
    let columns = cfg.columns.clone().unwrap_or_else(|| {
        if type1 { type1_table_columns() } else { power_table_columns() }
    });
    let table = parallel::table(&cfg.scenarios, &columns)?;

    let mut r = RunReport::new(if type1 { "type1-table" } else { "power-table" });
    r.input("config", to_config_text(&GridConfig { columns: Some(columns.clone()), ..cfg.clone() }));
    let mut s = Section::with_columns(if type1 { "type I error (%)" } else { "power (%)" }, table_header(&columns));
    for (scenario, row) in cfg.scenarios.iter().zip(&table.rows) {
        let mut cells = row_keys(scenario);
        cells.extend(row.values.iter().map(|v| Cell::Pct(*v)));
        s.push(cells);
    }
    r.sections.push(s);
    Ok(r)
}

fn test_spec(column: &TableColumn, s: &PowerScenario) -> Result<TestSpec> {
    let resolve = |rule: &WeightRule| -> Result<Weight> { Ok(Weight::Fixed(rule.resolve(s)?)) };
    Ok(match column {
        TableColumn::T1 => TestSpec::new(TestKind::T1, Weight::Fixed(1.0), s.delta0),
        TableColumn::T2(rule) => TestSpec::new(TestKind::T2, resolve(rule)?, s.delta0),
        TableColumn::Combined(rule) => TestSpec::new(TestKind::Combined, resolve(rule)?, s.delta0),
        TableColumn::Naive(rule) => TestSpec::new(TestKind::Naive, resolve(rule)?, s.delta0),
    })
}

/// Simulation spec for one grid row; every row uses the same master seed.
pub fn grid_spec(s: &PowerScenario, columns: &[TableColumn], n_reps: u64, seed: u64) -> Result<SimSpec> {
    let tests = columns.iter().map(|c| test_spec(c, s)).collect::<Result<Vec<_>>>()?;
    Ok(SimSpec { scenario: *s, n_reps, seed, tests })
}

pub fn simulate_grid(config: &Path, seed: u64, reps: Option<u64>, threads: usize) -> Result<RunReport> {
    let mut cfg = load_grid(config)?;
    let n_reps = reps.or(cfg.reps).unwrap_or(10_000);
    cfg.reps = Some(n_reps);
    cfg.seed = Some(seed);
    let columns = cfg.columns.clone().unwrap_or_else(power_table_columns);
    cfg.columns = Some(columns.clone());

    let mut r = RunReport::new("simulate");
    r.seed = Some(seed);
    r.input("config", to_config_text(&cfg));
    let mut header = ["delta0", "n1", "theta_star"].map(String::from).to_vec();
    for c in &columns {
        let l = c.label();
        header.extend([l.clone(), format!("{l}_se"), format!("{l}_theory")]);
    }
    let mut s = Section::with_columns("empirical rejection rate (%)", header);
    for scenario in &cfg.scenarios {
        let spec = grid_spec(scenario, &columns, n_reps, seed)?;
        let est = parallel::with_threads(threads, || parallel::estimate_rejection(&spec))??;
        let mut cells = row_keys(scenario);
        for (c, e) in columns.iter().zip(&est) {
            cells.push(Cell::Pct(e.estimate.rate));
            cells.push(Cell::Fixed(100.0 * e.estimate.mc_se, 2));
            cells.push(Cell::Pct(c.evaluate(scenario)?));
        }
        s.push(cells);
    }
    r.sections.push(s);
    Ok(r)
}

pub struct StudyArgs {
    pub seed: u64,
    pub reps: u64,
    pub n_sub: usize,
    pub treated_ratio: f64,
    pub delta0: Vec<f64>,
    pub theta0: f64,
    pub alpha: f64,
    pub caliper: f64,
}

struct Matched {
    /// Pairs as record indices into the dataset.
    pairs: Vec<(usize, usize)>,
    /// Robust distance of each pair, before any caliper penalty.
    distances: Vec<f64>,
    within_caliper: Vec<bool>,
    balance: Vec<f64>,
    converged: bool,
    iterations: usize,
}

fn run_match(data: &TrialDataset, caliper: f64) -> Result<Matched> {
    if data.covariate_names.is_empty() {
        bail!("matching needs at least one covariate column");
    }
    let m = data.covariate_matrix()?;
    let rows = data.matching_rows();
    let model = fit_propensity(&m)?;
    let dist = robust_mahalanobis(&m)?;
    let penalized = apply_caliper(&dist, &model.scores(&m), caliper)?;
    let result = optimal_pair_match(&penalized)?;
    let t_pos: HashMap<usize, usize> = dist.treated_rows.iter().enumerate().map(|(k, &r)| (r, k)).collect();
    let e_pos: HashMap<usize, usize> = dist.external_rows.iter().enumerate().map(|(k, &r)| (r, k)).collect();
    let distances = result.pairs.iter().map(|(t, e)| dist.get(t_pos[t], e_pos[e])).collect();
    let within = result.pairs.iter().map(|(t, _)| !result.unmatched_treated.contains(t)).collect();
    let treated: Vec<&[f64]> = result.pairs.iter().map(|&(t, _)| m.row(t)).collect();
    let matched: Vec<&[f64]> = result.pairs.iter().map(|&(_, e)| m.row(e)).collect();
    let balance = standardized_mean_difference(&treated, &matched)?;
    Ok(Matched {
        pairs: result.pairs.iter().map(|&(t, e)| (rows[t], rows[e])).collect(),
        distances,
        within_caliper: within,
        balance,
        converged: model.converged,
        iterations: model.n_iterations,
    })
}

pub fn simulate_study(path: &Path, a: &StudyArgs) -> Result<RunReport> {
    let data = load_dataset(path)?;
    let matched = run_match(&data, a.caliper)?;
    let partner: HashMap<usize, usize> = matched.pairs.iter().copied().collect();
    let treated_rows: Vec<usize> = (0..data.records.len())
        .filter(|&i| data.records[i].source == Source::Internal && data.records[i].arm == Arm::Treated)
        .collect();
    let trial = MatchedTrial {
        treated: treated_rows.iter().map(|&i| data.records[i].outcome).collect(),
        internal: data.outcomes(Source::Internal, Arm::Control),
        matched_external: treated_rows.iter().map(|i| partner.get(i).map(|&e| data.records[e].outcome)).collect(),
    };
    let mut tests = vec![TestSpec::new(TestKind::T1, Weight::Auto, 0.0)];
    for &d in &a.delta0 {
        tests.push(TestSpec::new(TestKind::T2, Weight::Auto, d));
        tests.push(TestSpec::new(TestKind::Combined, Weight::Auto, d));
    }
    let cfg = StudyConfig {
        n_sub: a.n_sub,
        treated_ratio: a.treated_ratio,
        n_reps: a.reps,
        seed: a.seed,
        alpha: a.alpha,
        theta0: a.theta0,
        tests,
    };
    let result = subsample_power_study(&trial, &cfg)?;

    let mut r = RunReport::new("simulate");
    r.seed = Some(a.seed);
    r.input("data", path.display());
    r.input("reps", a.reps);
    r.input("n_sub", a.n_sub);
    r.input("treated_ratio", a.treated_ratio);
    r.input("delta0", a.delta0.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
    r.input("theta0", a.theta0);
    r.input("alpha", a.alpha);
    r.input("caliper", a.caliper);
    let mut s = Section::new("rejection rate (%)", &["test", "delta0", "rate", "se"]);
    for e in &result.estimates {
        s.push(vec![
            Cell::Text(e.test.kind.to_string()),
            Cell::Fixed(e.test.delta0, 2),
            Cell::Pct(e.estimate.rate),
            Cell::Fixed(100.0 * e.estimate.mc_se, 2),
        ]);
    }
    r.sections.push(s);
    r.sections.push(Section::key_values("resampling", vec![("redraws", Cell::Int(result.redraws as i64))]));
    Ok(r)
}

fn balance_section(data: &TrialDataset, treated: &[usize], control: &[usize], smd: &[f64]) -> Section {
    let mut s = Section::new("balance", &["covariate", "mean_treated", "mean_external", "smd"]);
    let mean = |rows: &[usize], j: usize| rows.iter().map(|&i| data.records[i].covariates[j]).sum::<f64>() / rows.len() as f64;
    for (j, name) in data.covariate_names.iter().enumerate() {
        s.push(vec![
            Cell::Text(name.clone()),
            Cell::Fixed(mean(treated, j), 2),
            Cell::Fixed(mean(control, j), 2),
            Cell::Fixed(smd[j], 2),
        ]);
    }
    s
}

pub fn match_cmd(path: &Path, caliper: f64, pairs_out: Option<&Path>, matched_out: Option<&Path>) -> Result<RunReport> {
    let data = load_dataset(path)?;
    let m = run_match(&data, caliper)?;
    let id = |i: usize| data.records[i].subject_id.clone();

    let mut r = RunReport::new("match");
    r.input("data", path.display());
    r.input("caliper", caliper);
    let outside = m.within_caliper.iter().filter(|w| !**w).count();
    r.sections.push(Section::key_values(
        "summary",
        vec![
            ("pairs", Cell::Int(m.pairs.len() as i64)),
            ("total_distance", Cell::Fixed(m.distances.iter().sum(), 4)),
            ("outside_caliper", Cell::Int(outside as i64)),
            ("propensity_converged", Cell::Bool(m.converged)),
            ("propensity_iterations", Cell::Int(m.iterations as i64)),
        ],
    ));
    let mut s = Section::new("pairs", &["treated_id", "external_id", "distance", "within_caliper"]);
    for ((&(t, e), d), w) in m.pairs.iter().zip(&m.distances).zip(&m.within_caliper) {
        s.push(vec![Cell::Text(id(t)), Cell::Text(id(e)), Cell::Fixed(*d, 4), Cell::Bool(*w)]);
    }
    r.sections.push(s);
    let treated: Vec<usize> = m.pairs.iter().map(|p| p.0).collect();
    let external: Vec<usize> = m.pairs.iter().map(|p| p.1).collect();
    r.sections.push(balance_section(&data, &treated, &external, &m.balance));

    if let Some(p) = pairs_out {
        let mut w = csv::Writer::from_path(p).with_context(|| format!("cannot write {}", p.display()))?;
        w.write_record(["treated_id", "external_id"])?;
        for &(t, e) in &m.pairs {
            w.write_record([id(t), id(e)])?;
        }
        w.flush()?;
    }
    if let Some(p) = matched_out {
        let keep: std::collections::HashSet<usize> = external.iter().copied().collect();
        let records = data
            .records
            .iter()
            .enumerate()
            .filter(|(i, rec)| rec.source == Source::Internal || keep.contains(i))
            .map(|(_, rec)| rec.clone())
            .collect();
        let subset = TrialDataset { covariate_names: data.covariate_names.clone(), records };
        let file = std::fs::File::create(p).with_context(|| format!("cannot write {}", p.display()))?;
        subset.write_csv(file)?;
    }
    Ok(r)
}

pub fn balance(path: &Path, pairs: Option<&Path>) -> Result<RunReport> {
    let data = load_dataset(path)?;
    if data.covariate_names.is_empty() {
        bail!("balance needs at least one covariate column");
    }
    let (treated, control): (Vec<usize>, Vec<usize>) = match pairs {
        None => {
            let rows = data.matching_rows();
            rows.iter().partition(|&&i| data.records[i].source == Source::Internal)
        }
        Some(p) => {
            let index: HashMap<&str, usize> =
                data.records.iter().enumerate().map(|(i, r)| (r.subject_id.as_str(), i)).collect();
            let mut rdr = csv::Reader::from_path(p).with_context(|| format!("cannot read {}", p.display()))?;
            let mut t = Vec::new();
            let mut c = Vec::new();
            for (k, rec) in rdr.records().enumerate() {
                let rec = rec?;
                let line = k + 2;
                if rec.len() != 2 {
                    bail!("{} line {line}: expected treated_id,external_id", p.display());
                }
                let look = |s: &str| index.get(s).copied().with_context(|| format!("{} line {line}: unknown subject '{s}'", p.display()));
                let (ti, ei) = (look(&rec[0])?, look(&rec[1])?);
                let (tr, er) = (&data.records[ti], &data.records[ei]);
                if tr.source != Source::Internal || tr.arm != Arm::Treated || er.source != Source::External {
                    bail!("{} line {line}: pair must be (internal treated, external)", p.display());
                }
                t.push(ti);
                c.push(ei);
            }
            (t, c)
        }
    };
    let rows = |idx: &[usize]| -> Vec<&[f64]> { idx.iter().map(|&i| data.records[i].covariates.as_slice()).collect() };
    let smd = standardized_mean_difference(&rows(&treated), &rows(&control))?;

    let mut r = RunReport::new("balance");
    r.input("data", path.display());
    r.input("pairs", pairs.map_or("none".to_string(), |p| p.display().to_string()));
    r.sections.push(balance_section(&data, &treated, &control, &smd));
    Ok(r)
}

pub fn benchmark_omit(path: &Path, covariates: &[String], caliper: f64) -> Result<RunReport> {
    let data = load_dataset(path)?;
    let m = data.covariate_matrix()?;
    let rows = data.matching_rows();
    let outcomes: Vec<f64> = rows.iter().map(|&i| data.records[i].outcome).collect();
    let internal = data.outcomes(Source::Internal, Arm::Control);
    if internal.is_empty() {
        bail!("dataset has no internal control rows");
    }
    let y0 = internal.iter().sum::<f64>() / internal.len() as f64;
    let names: Vec<&str> = if covariates.is_empty() {
        data.covariate_names.iter().map(String::as_str).collect()
    } else {
        covariates.iter().map(String::as_str).collect()
    };
    let options = MatchOptions { caliper_sd: caliper };
    let baseline = benchmark_without(&m, &outcomes, y0, &[], &options)?;
    let entries: Vec<BenchmarkEntry> = omit_one_benchmark(&m, &outcomes, y0, &names, &options)?;

    let mut r = RunReport::new("benchmark-omit");
    r.input("data", path.display());
    r.input("caliper", caliper);
    r.input("covariates", names.join(","));
    let mut s = Section::new("internal minus matched external control mean", &["omitted", "difference"]);
    s.push(vec![Cell::Text("(none)".into()), Cell::Fixed(baseline, 4)]);
    for e in entries {
        s.push(vec![Cell::Text(e.covariate), Cell::Fixed(e.difference, 4)]);
    }
    r.sections.push(s);
    Ok(r)
}
