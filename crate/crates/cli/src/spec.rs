//! Command-line arguments. The same types serialize to `spec.json`, so a
//! saved spec replays the experiment exactly.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use cupgame::invariants::{applicable, default_suite, CheckParams, Checker};
use cupgame::{EmptierSpec, Error, FillerSpec, Rational, Result, Trace, Visibility};

pub const SPEC_FILE: &str = "spec.json";

#[derive(Parser, Debug)]
#[command(
    name = "cupgame",
    version,
    about = "Simulate and verify p-processor cup games"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Play one game per seed and write its trace and summary.
    Run(RunArgs),
    /// Run invariant checkers on a saved trace.
    Check(CheckArgs),
    /// Max backlog over a grid of (n, p, seed), with a fit against ln n.
    Sweep(SweepArgs),
    /// Drive the growth filler to its guaranteed backlog.
    Lowerbound(LowerBoundArgs),
    /// Monte Carlo frequency experiments.
    Montecarlo(MonteCarloArgs),
    /// Re-execute a saved spec.json.
    Replay(ReplayArgs),
}

/// Everything needed to reproduce one invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(flatten)]
    pub command: Command,
}

/// Seeds as a comma-separated mix of values and ranges: `1,4,10..20,30..=32`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeedList(pub Vec<u64>);

impl FromStr for SeedList {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = |part: &str| Error::Parse(format!("bad seed item {part:?}"));
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if let Some((a, b)) = part.split_once("..") {
                let (b, inclusive) = match b.strip_prefix('=') {
                    Some(b) => (b, true),
                    None => (b, false),
                };
                let a: u64 = a.trim().parse().map_err(|_| bad(part))?;
                let b: u64 = b.trim().parse().map_err(|_| bad(part))?;
                let end = if inclusive {
                    b.checked_add(1).ok_or_else(|| bad(part))?
                } else {
                    b
                };
                if end <= a {
                    return Err(bad(part));
                }
                out.extend(a..end);
            } else {
                out.push(part.parse().map_err(|_| bad(part))?);
            }
        }
        if out.is_empty() {
            return Err(Error::Parse("empty seed list".into()));
        }
        Ok(SeedList(out))
    }
}

impl fmt::Display for SeedList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckOpts {
    /// Comma-separated checker names, `all` for every checker whose
    /// hypotheses the trace meets, or `default`.
    #[arg(long)]
    pub checkers: Option<String>,
    /// Longest interval the working-set scan looks at; 0 scans everything.
    #[arg(long)]
    pub window: Option<usize>,
    /// Constant in the progress bound.
    #[arg(long)]
    pub d: Option<Rational>,
    /// Greedy-like threshold.
    #[arg(long)]
    pub ell: Option<Rational>,
    /// Greedy-like slack.
    #[arg(long)]
    pub c: Option<Rational>,
    /// Levels for the level checkers (default: every level reached).
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
}

impl CheckOpts {
    pub fn params(&self) -> CheckParams {
        let mut p = CheckParams::default();
        if let Some(w) = self.window {
            p.window = w;
        }
        if let Some(d) = &self.d {
            p.d = d.clone();
        }
        p.ell = self.ell.clone();
        if let Some(c) = &self.c {
            p.c = c.clone();
        }
        p.levels = self.levels.clone();
        p
    }

    pub fn selection(&self) -> Result<Selection> {
        match self.checkers.as_deref().map(str::trim) {
            None | Some("default") => Ok(Selection::Default),
            Some("all") => Ok(Selection::All),
            Some(list) => Checker::parse_list(list).map(Selection::List),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Selection {
    /// Applicable checkers minus the bounds greedy traces are known to break.
    Default,
    /// Every applicable checker.
    All,
    List(Vec<Checker>),
}

impl Selection {
    pub fn resolve(&self, trace: &Trace) -> Vec<Checker> {
        match self {
            Selection::Default => default_suite(trace),
            Selection::All => applicable(trace),
            Selection::List(list) => list.clone(),
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunArgs {
    /// Config file with [game], [filler] and [emptier] sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub filler: Option<FillerSpec>,
    #[arg(long)]
    pub emptier: Option<EmptierSpec>,
    /// Cap on any fill the filler may produce.
    #[arg(long)]
    pub truncate: Option<Rational>,
    #[arg(long)]
    pub visibility: Option<Visibility>,
    /// One run per seed; several seeds write to `seed-<s>` subdirectories.
    #[arg(long)]
    pub seeds: Option<SeedList>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write backlog.svg.
    #[arg(long)]
    pub svg: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub check: CheckOpts,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckArgs {
    /// A run directory or a trace.csv file.
    pub trace: PathBuf,
    /// Where to write report.json (default: next to the trace).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub check: CheckOpts,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long = "n", value_delimiter = ',', required = true)]
    pub ns: Vec<usize>,
    #[arg(long = "p", value_delimiter = ',', default_value = "1")]
    pub ps: Vec<usize>,
    #[arg(long, default_value = "0")]
    pub seeds: SeedList,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    /// Repeat for several fillers.
    #[arg(long = "filler", default_value = "growth")]
    pub fillers: Vec<FillerSpec>,
    #[arg(long, default_value = "greedy")]
    pub emptier: EmptierSpec,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value = "greedy")]
    pub emptier: EmptierSpec,
    #[arg(long, default_value = "0")]
    pub seeds: SeedList,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    CrossingProb,
    AnchorSwapBacklog,
    AntiGreedyBacklog,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloArgs {
    #[arg(value_enum)]
    pub experiment: Experiment,
    /// At least 100 seeds.
    #[arg(long, default_value = "0..1000")]
    pub seeds: SeedList,
    /// Designated deposit for crossing-prob.
    #[arg(long, default_value = "1/2")]
    pub y: Rational,
    #[arg(long, default_value_t = 24)]
    pub n: usize,
    #[arg(long, default_value_t = 8)]
    pub p: usize,
    /// Backlog threshold for anchor-swap-backlog.
    #[arg(long, default_value_t = 1.0)]
    pub threshold: f64,
    /// Phase count (anchor-swap defaults to p, anti-greedy to 400).
    #[arg(long)]
    pub phases: Option<usize>,
    /// Rounds per anchor-swap phase (default p^3).
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Steps per anchor-swap round (default max(2, ceil(log2 p) - 1)).
    #[arg(long)]
    pub round_len: Option<usize>,
    /// Anti-greedy working-set size.
    #[arg(long, default_value_t = 16)]
    pub ell: usize,
    /// Anti-greedy width factor.
    #[arg(long, default_value = "1/2")]
    pub c: Rational,
    /// Greedy-like diagnostics use the level `ln ell - q`.
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    #[arg(long, default_value = "smoothed-greedy")]
    pub emptier: EmptierSpec,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub spec: PathBuf,
    /// Overrides the output directory stored in the spec.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn out_dir(&self) -> Option<&PathBuf> {
        match self {
            Command::Run(a) => Some(&a.out),
            Command::Check(a) => a.out.as_ref(),
            Command::Sweep(a) => a.out.as_ref(),
            Command::Lowerbound(a) => a.out.as_ref(),
            Command::Montecarlo(a) => a.out.as_ref(),
            Command::Replay(a) => a.out.as_ref(),
        }
    }

    pub fn set_out_dir(&mut self, dir: PathBuf) {
        match self {
            Command::Run(a) => a.out = dir,
            Command::Check(a) => a.out = Some(dir),
            Command::Sweep(a) => a.out = Some(dir),
            Command::Lowerbound(a) => a.out = Some(dir),
            Command::Montecarlo(a) => a.out = Some(dir),
            Command::Replay(a) => a.out = Some(dir),
        }
    }
}
