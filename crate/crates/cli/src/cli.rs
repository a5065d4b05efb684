use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use extcontrol_core::{Direction, Weight};

use crate::commands;
use crate::report::{Format, RunReport};

#[derive(Debug, Parser)]
#[command(name = "extcontrol", version, about = "Treatment-effect tests that borrow external controls")]
pub struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
    /// Worker threads for simulations (0 = one per core).
    #[arg(long, default_value_t = 0, global = true)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Greater,
    Less,
    TwoSided,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Greater => Direction::Greater,
            DirectionArg::Less => Direction::Less,
            DirectionArg::TwoSided => Direction::TwoSided,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestMethod {
    T1,
    T2,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TipMethod {
    T2,
    Combined,
    Both,
}

pub fn parse_weight(s: &str) -> Result<Weight, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Weight::Auto);
    }
    let w: f64 = s.parse().map_err(|_| format!("expected 'auto' or a number, got '{s}'"))?;
    if (0.0..=1.0).contains(&w) {
        Ok(Weight::Fixed(w))
    } else {
        Err(format!("weight {w} outside [0, 1]"))
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct TestOptions {
    /// Trial CSV (subject_id,source,arm,outcome,<covariates>).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = DirectionArg::Greater)]
    pub direction: DirectionArg,
    /// Internal-control weight: `auto` (n0/(n0+ne)) or a number in [0, 1].
    #[arg(long, default_value = "auto", value_parser = parse_weight)]
    pub w: Weight,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta0: f64,
    #[arg(long, default_value_t = 0.025)]
    pub alpha: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run T1, the bias-adjusted pooled test or the combined test.
    Test {
        #[command(flatten)]
        opts: TestOptions,
        #[arg(long, value_enum, default_value_t = TestMethod::Combined)]
        method: TestMethod,
        /// Assumed bound on the internal-minus-external control bias.
        #[arg(long, default_value_t = 0.0)]
        delta0: f64,
    },
    /// Smallest bias bound at which the rejection is lost.
    Tipping {
        #[command(flatten)]
        opts: TestOptions,
        #[arg(long, value_enum, default_value_t = TipMethod::Both)]
        method: TipMethod,
    },
    /// Theoretical power table for a scenario grid.
    PowerTable {
        #[arg(long)]
        config: PathBuf,
    },
    /// Theoretical type I error table (true effect set to the margin).
    Type1Table {
        #[arg(long)]
        config: PathBuf,
    },
    /// Monte Carlo rejection rates for a scenario grid, or a resampling
    /// power study on a trial CSV.
    #[command(group(ArgGroup::new("input").required(true).args(["config", "data"])))]
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        /// Replications (overrides the config's `reps`).
        #[arg(long)]
        reps: Option<u64>,
        /// Study mode: RCT subjects drawn per repetition.
        #[arg(long, default_value_t = 100, requires = "data")]
        n_sub: usize,
        /// Study mode: probability that a draw is a treated subject.
        #[arg(long, default_value_t = 0.8, requires = "data")]
        treated_ratio: f64,
        /// Study mode: bias bounds to evaluate.
        #[arg(long, value_delimiter = ',', default_value = "0", requires = "data")]
        delta0: Vec<f64>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta0: f64,
        #[arg(long, default_value_t = 0.025)]
        alpha: f64,
        #[arg(long, default_value_t = 0.2)]
        caliper: f64,
    },
    /// Optimal pair matching of external controls to treated subjects.
    Match {
        #[arg(long)]
        data: PathBuf,
        /// Caliper width in SDs of the logit propensity score.
        #[arg(long, default_value_t = 0.2)]
        caliper: f64,
        /// Write treated_id,external_id pairs here.
        #[arg(long)]
        pairs_out: Option<PathBuf>,
        /// Write the RCT rows plus the matched external rows here.
        #[arg(long)]
        matched_out: Option<PathBuf>,
    },
    /// Standardized mean differences between treated and external subjects.
    Balance {
        #[arg(long)]
        data: PathBuf,
        /// Restrict to the pairs in this CSV (treated_id,external_id).
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Internal-minus-matched-external control mean with each covariate
    /// left out of the match.
    BenchmarkOmit {
        #[arg(long)]
        data: PathBuf,
        /// Covariates to omit one at a time (default: all).
        #[arg(long, value_delimiter = ',')]
        covariates: Vec<String>,
        #[arg(long, default_value_t = 0.2)]
        caliper: f64,
    },
}

pub fn run(cli: &Cli) -> anyhow::Result<RunReport> {
    match &cli.command {
        Command::Test { opts, method, delta0 } => commands::test(opts, *method, *delta0),
        Command::Tipping { opts, method } => commands::tipping(opts, *method),
        Command::PowerTable { config } => commands::power_table(config, false),
        Command::Type1Table { config } => commands::power_table(config, true),
        Command::Simulate {
            config,
            data,
            seed,
            reps,
            n_sub,
            treated_ratio,
            delta0,
            theta0,
            alpha,
            caliper,
        } => {
            let threads = cli.threads;
            match (config, data) {
                (Some(c), _) => commands::simulate_grid(c, *seed, *reps, threads),
                (None, Some(d)) => commands::simulate_study(
                    d,
                    &commands::StudyArgs {
                        seed: *seed,
                        reps: reps.unwrap_or(1000),
                        n_sub: *n_sub,
                        treated_ratio: *treated_ratio,
                        delta0: delta0.clone(),
                        theta0: *theta0,
                        alpha: *alpha,
                        caliper: *caliper,
                    },
                ),
                (None, None) => unreachable!("clap requires one input"),
            }
        }
        Command::Match { data, caliper, pairs_out, matched_out } => {
            commands::match_cmd(data, *caliper, pairs_out.as_deref(), matched_out.as_deref())
        }
        Command::Balance { data, pairs } => commands::balance(data, pairs.as_deref()),
        Command::BenchmarkOmit { data, covariates, caliper } => {
            commands::benchmark_omit(data, covariates, *caliper)
        }
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(report) => {
            print!("{}", report.render(cli.format));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
