//! Per-trace checkers. Each one is a pure function of the trace and its
//! parameters and reports the number of violated instances together with the
//! first violation found.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::levels::{level_series, top_level, LevelStats};
use crate::emptiers::{is_greedy_like_step, EmptierSpec};
use crate::engine::Trace;
use crate::error::{Error, Result};
use crate::rational::{harmonic_range, Rational};
use crate::state::{harmonic_tail, CupId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Checker {
    /// Skewed averages of a truncated greedy game stay below the harmonic tail.
    Truncated,
    /// A rank that grows pulls the ranks below it to within one unit.
    CupReset,
    /// Averaging and gap constraints at record-setting steps.
    Record,
    /// Single-processor bound `av_k <= 1/(k+1) + ... + 1/n`.
    AvSingle,
    /// The same bound loosened by one unit.
    AvSingleRelaxed,
    /// Crossings needed to build up integer fill.
    Progress,
    /// Size of the crossing set and the water it must receive.
    WorkingSet,
    /// Integer fill changes by crossings minus drains of tall cups.
    Conservation,
    /// `fill - offset - deposits` stays integral under unit removals.
    Fractional,
    /// Every step satisfies the greedy-like condition.
    GreedyLike,
}

impl Checker {
    pub const ALL: [Checker; 10] = [
        Checker::Truncated,
        Checker::CupReset,
        Checker::Record,
        Checker::AvSingle,
        Checker::AvSingleRelaxed,
        Checker::Progress,
        Checker::WorkingSet,
        Checker::Conservation,
        Checker::Fractional,
        Checker::GreedyLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Checker::Truncated => "truncated",
            Checker::CupReset => "cup-reset",
            Checker::Record => "record",
            Checker::AvSingle => "av-single",
            Checker::AvSingleRelaxed => "av-single-relaxed",
            Checker::Progress => "progress",
            Checker::WorkingSet => "working-set",
            Checker::Conservation => "conservation",
            Checker::Fractional => "fractional",
            Checker::GreedyLike => "greedy-like",
        }
    }

    /// Parses a comma-separated list; `all` selects every checker that
    /// applies to the trace at hand and is resolved by the caller.
    pub fn parse_list(s: &str) -> Result<Vec<Checker>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let c: Checker = part.parse()?;
            if !out.contains(&c) {
                out.push(c);
            }
        }
        if out.is_empty() {
            return Err(Error::Parse("empty checker list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Checker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Checker {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Checker::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| Error::Parse(format!("unknown checker {s:?}")))
    }
}

impl TryFrom<String> for Checker {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Checker> for String {
    fn from(c: Checker) -> String {
        c.name().to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckParams {
    /// Constant in the progress bound.
    pub d: Rational,
    /// Longest interval scanned by the working-set check; 0 scans all.
    pub window: usize,
    /// Greedy-like threshold; defaults to 2.
    pub ell: Option<Rational>,
    pub c: Rational,
    /// Levels for the level checks; defaults to every level the trace reaches.
    pub levels: Option<Vec<usize>>,
}

impl Default for CheckParams {
    fn default() -> Self {
        CheckParams {
            d: Rational::from(4i64),
            window: 256,
            ell: None,
            c: Rational::one(),
            levels: None,
        }
    }
}

impl CheckParams {
    fn ell(&self) -> Rational {
        self.ell.clone().unwrap_or_else(|| Rational::from(2i64))
    }

    fn levels(&self, trace: &Trace) -> Vec<usize> {
        self.levels
            .clone()
            .unwrap_or_else(|| (1..=top_level(trace)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub t: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    /// Rank or `k` the failing instance refers to.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub cups: Vec<CupId>,
    pub lhs: Rational,
    pub relation: String,
    pub rhs: Rational,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub check: Checker,
    pub passed: bool,
    pub params: BTreeMap<String, String>,
    pub instances: u64,
    pub violations: u64,
    pub witness: Option<Witness>,
}

struct Tally {
    instances: u64,
    violations: u64,
    witness: Option<Witness>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            instances: 0,
            violations: 0,
            witness: None,
        }
    }

    /// Counts one instance; `ok == false` records a violation.
    fn check(&mut self, ok: bool, witness: impl FnOnce() -> Witness) {
        self.instances += 1;
        if !ok {
            self.violations += 1;
            if self.witness.is_none() {
                self.witness = Some(witness());
            }
        }
    }

    fn report(self, check: Checker, params: BTreeMap<String, String>) -> InvariantReport {
        InvariantReport {
            check,
            passed: self.violations == 0,
            params,
            instances: self.instances,
            violations: self.violations,
            witness: self.witness,
        }
    }
}

fn witness(t: usize, lhs: Rational, relation: &str, rhs: Rational, detail: String) -> Witness {
    Witness {
        t,
        t_end: None,
        level: None,
        index: None,
        cups: Vec::new(),
        lhs,
        relation: relation.to_string(),
        rhs,
        detail,
    }
}

fn precondition(ok: bool, check: Checker, why: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{check}: {why}")))
    }
}

/// Fails unless the checker's hypotheses hold for this trace.
pub fn check_precondition(check: Checker, trace: &Trace) -> Result<()> {
    let cfg = &trace.config;
    let greedy = cfg.emptier == EmptierSpec::Greedy;
    match check {
        Checker::Truncated => {
            precondition(
                cfg.truncation.is_some(),
                check,
                "trace was not run with truncation",
            )?;
            precondition(greedy, check, "needs the greedy emptier")
        }
        Checker::CupReset | Checker::Progress => precondition(
            cfg.emptier.is_greedy_family(),
            check,
            "needs a greedy or smoothed greedy emptier",
        ),
        Checker::Record => precondition(greedy, check, "needs the greedy emptier"),
        Checker::AvSingle | Checker::AvSingleRelaxed => {
            precondition(cfg.p == 1, check, "needs p = 1")?;
            precondition(greedy, check, "needs the greedy emptier")?;
            precondition(
                trace.initial.fills().iter().all(Rational::is_zero),
                check,
                "needs an empty initial state",
            )
        }
        Checker::Fractional => precondition(
            trace.records.iter().all(|r| r.empty.skip_under_one),
            check,
            "needs unit removals (skip-under-one policy) at every step",
        ),
        Checker::WorkingSet | Checker::Conservation | Checker::GreedyLike => Ok(()),
    }
}

/// Checkers whose hypotheses this trace meets, except `greedy-like`, which
/// describes the emptier rather than a theorem.
pub fn applicable(trace: &Trace) -> Vec<Checker> {
    Checker::ALL
        .iter()
        .copied()
        .filter(|&c| c != Checker::GreedyLike && check_precondition(c, trace).is_ok())
        .collect()
}

/// `applicable` minus the two bounds that legal greedy traces break:
/// `av-single` (water left in cups under one unit) and the averaging part of
/// `record` (rank `p + 1` is not controlled by a record in `av_p`).
pub fn default_suite(trace: &Trace) -> Vec<Checker> {
    applicable(trace)
        .into_iter()
        .filter(|c| !matches!(c, Checker::AvSingle | Checker::Record))
        .collect()
}

pub fn run_check(check: Checker, trace: &Trace, params: &CheckParams) -> Result<InvariantReport> {
    check_precondition(check, trace)?;
    Ok(match check {
        Checker::Truncated => check_truncated_invariant(trace),
        Checker::CupReset => check_cup_reset(trace),
        Checker::Record => check_record_constraints(trace),
        Checker::AvSingle => check_av_invariant_single(trace, false),
        Checker::AvSingleRelaxed => check_av_invariant_single(trace, true),
        Checker::Progress => check_filler_progress(trace, params)?,
        Checker::WorkingSet => check_working_set(trace, params)?,
        Checker::Conservation => check_level_conservation(trace, params)?,
        Checker::Fractional => check_fractional(trace),
        Checker::GreedyLike => check_greedy_like(trace, params),
    })
}

/// Runs several checkers in parallel; reports keep the requested order.
pub fn run_checks(
    checks: &[Checker],
    trace: &Trace,
    params: &CheckParams,
) -> Result<Vec<InvariantReport>> {
    checks
        .par_iter()
        .map(|&c| run_check(c, trace, params))
        .collect()
}

pub fn check_truncated_invariant(trace: &Trace) -> InvariantReport {
    let cfg = &trace.config;
    let (n, p) = (cfg.n, cfg.p);
    let cap = cfg.truncation.clone().expect("checked precondition");
    let mut tally = Tally::new();
    if p < n {
        let bounds: Vec<Rational> = (1..=n - p).map(|k| harmonic_tail(k, n).unwrap()).collect();
        for t in 0..=trace.len() {
            let ranked = trace.state(t).ranked();
            for k in 1..=n - p {
                let f = ranked.skewed_average(k, &cap, p).expect("k within range");
                let bound = &bounds[k - 1];
                tally.check(f <= *bound, || Witness {
                    index: Some(k),
                    cups: ranked.order()[..p + k].to_vec(),
                    ..witness(
                        t,
                        f.clone(),
                        "<=",
                        bound.clone(),
                        format!("skewed average f_{k} at step {t}"),
                    )
                });
            }
        }
    }
    let params = BTreeMap::from([("N".to_string(), cap.to_string())]);
    tally.report(Checker::Truncated, params)
}

pub fn check_cup_reset(trace: &Trace) -> InvariantReport {
    let (n, p) = (trace.config.n, trace.config.p);
    let mut tally = Tally::new();
    let mut prev = trace.state(0).ranked();
    for t in 1..=trace.len() {
        let cur = trace.state(t).ranked();
        for j in 1..=p.min(n) {
            if cur.rank_fill(j) <= prev.rank_fill(j) {
                continue;
            }
            let floor = cur.rank_fill(j) - &Rational::one();
            for r in j + 1..=(p + 1).min(n) {
                let below = cur.rank_fill(r);
                tally.check(*below >= floor, || Witness {
                    index: Some(j),
                    cups: vec![cur.order()[j - 1], cur.order()[r - 1]],
                    ..witness(
                        t,
                        below.clone(),
                        ">=",
                        floor.clone(),
                        format!("rank {j} grew at step {t}; rank {r} must stay within one unit"),
                    )
                });
            }
        }
        prev = cur;
    }
    tally.report(Checker::CupReset, BTreeMap::new())
}

/// Steps whose `av_p` strictly exceeds that of every earlier state,
/// including the initial one.
pub fn record_setting_steps(trace: &Trace) -> Vec<usize> {
    let p = trace.config.p;
    let mut best = &trace.initial.top_total(p) / &Rational::from(p);
    let mut out = Vec::new();
    for (idx, av) in trace.derived.av_p.iter().enumerate() {
        if *av > best {
            out.push(idx + 1);
            best = av.clone();
        }
    }
    out
}

pub fn check_record_constraints(trace: &Trace) -> InvariantReport {
    let (n, p) = (trace.config.n, trace.config.p);
    let gap_bound = harmonic_range(1, p);
    let mut tally = Tally::new();
    for t in record_setting_steps(trace) {
        let ranked = trace.state(t).ranked();
        let top = (p + 1).min(n);
        for i in 1..=p {
            if i + 1 > top {
                continue;
            }
            let mean = &ranked.range_total(i + 1, top) / &Rational::from(top - i);
            let need = ranked.rank_fill(i) - &Rational::one();
            tally.check(mean >= need, || Witness {
                index: Some(i),
                cups: ranked.order()[i - 1..top].to_vec(),
                ..witness(
                    t,
                    mean.clone(),
                    ">=",
                    need.clone(),
                    format!("mean of ranks {}..={top} against rank {i} minus one", i + 1),
                )
            });
        }
        if p < n {
            let gap = ranked.rank_fill(1) - ranked.rank_fill(p + 1);
            tally.check(gap <= gap_bound, || Witness {
                index: Some(p + 1),
                cups: vec![ranked.order()[0], ranked.order()[p]],
                ..witness(
                    t,
                    gap.clone(),
                    "<=",
                    gap_bound.clone(),
                    format!("gap between ranks 1 and {}", p + 1),
                )
            });
        }
    }
    tally.report(Checker::Record, BTreeMap::new())
}

pub fn check_av_invariant_single(trace: &Trace, relaxed: bool) -> InvariantReport {
    let n = trace.config.n;
    let slack = if relaxed {
        Rational::one()
    } else {
        Rational::zero()
    };
    let bounds: Vec<Rational> = (1..=n)
        .map(|k| &slack + &harmonic_range(k + 1, n))
        .collect();
    let mut tally = Tally::new();
    for t in 0..=trace.len() {
        let ranked = trace.state(t).ranked();
        for k in 1..=n {
            let av = ranked.av(k);
            let bound = &bounds[k - 1];
            tally.check(av <= *bound, || Witness {
                index: Some(k),
                cups: ranked.order()[..k].to_vec(),
                ..witness(
                    t,
                    av.clone(),
                    "<=",
                    bound.clone(),
                    format!("average of the {k} fullest cups"),
                )
            });
        }
    }
    let check = if relaxed {
        Checker::AvSingleRelaxed
    } else {
        Checker::AvSingle
    };
    tally.report(check, BTreeMap::new())
}

/// `log2 n`, exact when `n` is a power of two.
fn log2(n: usize) -> Rational {
    if n.is_power_of_two() {
        Rational::from(n.trailing_zeros() as usize)
    } else {
        Rational::from_f64((n as f64).log2()).expect("finite logarithm")
    }
}

fn level_stats(trace: &Trace, params: &CheckParams) -> Result<Vec<LevelStats>> {
    params
        .levels(trace)
        .into_iter()
        .map(|i| level_series(trace, i))
        .collect()
}

fn level_params(params: &CheckParams, trace: &Trace) -> BTreeMap<String, String> {
    let levels: Vec<String> = params.levels(trace).iter().map(usize::to_string).collect();
    BTreeMap::from([("levels".to_string(), levels.join(","))])
}

pub fn check_filler_progress(trace: &Trace, params: &CheckParams) -> Result<InvariantReport> {
    let (n, p) = (trace.config.n, trace.config.p);
    let dlog = &params.d * &log2(n);
    let t0_bound = &dlog * &Rational::from(p - 1);
    let slack = &dlog * &Rational::from(p);
    let mut tally = Tally::new();
    for stats in level_stats(trace, params)? {
        let mut cum = vec![0u64; stats.steps() + 1];
        for t in 1..=stats.steps() {
            cum[t] = cum[t - 1] + stats.crossings[t];
        }
        let mut t0 = 1;
        for t1 in 1..=stats.steps() {
            if Rational::from(stats.integer_fill[t1 - 1] as usize) <= t0_bound {
                t0 = t1;
            }
            let crossed = Rational::from((cum[t1] - cum[t0 - 1]) as usize);
            let need =
                &Rational::from(p * (t1 - t0 + 1) + stats.integer_fill[t1] as usize) - &slack;
            tally.check(crossed >= need, || Witness {
                t_end: Some(t1),
                level: Some(stats.level),
                ..witness(
                    t0,
                    crossed.clone(),
                    ">=",
                    need.clone(),
                    format!("crossings over steps {t0}..={t1}"),
                )
            });
        }
    }
    let mut out = level_params(params, trace);
    out.insert("d".into(), params.d.to_string());
    out.insert("log".into(), "2".into());
    Ok(tally.report(Checker::Progress, out))
}

pub fn check_working_set(trace: &Trace, params: &CheckParams) -> Result<InvariantReport> {
    let (n, p) = (trace.config.n, trace.config.p);
    let len = trace.len();
    let window = if params.window == 0 {
        len.max(1)
    } else {
        params.window
    };
    // deposits[c][t]: total poured into cup c during steps 1..=t.
    let mut deposits = vec![vec![Rational::zero(); len + 1]; n + 1];
    for (idx, rec) in trace.records.iter().enumerate() {
        let t = idx + 1;
        for c in 1..=n {
            deposits[c][t] = deposits[c][t - 1].clone();
        }
        for (&c, f) in &rec.fill.amounts {
            deposits[c][t] += f;
        }
    }
    let mut tally = Tally::new();
    for stats in level_stats(trace, params)? {
        for t0 in 1..=len {
            let mut in_set = vec![false; n + 1];
            let mut set: Vec<CupId> = Vec::new();
            let mut count = 0u64;
            let allowed = 2 * stats.active[t0 - 1];
            for t1 in t0..=len.min(t0 + window - 1) {
                count += stats.crossings[t1];
                for &c in &stats.crossing_cups[t1] {
                    if !std::mem::replace(&mut in_set[c], true) {
                        set.push(c);
                    }
                }
                let need = p * (t1 - t0 + 1);
                if count < need as u64 {
                    continue;
                }
                let mk = |lhs: Rational, rel: &str, rhs: Rational, detail: String| Witness {
                    t_end: Some(t1),
                    level: Some(stats.level),
                    cups: {
                        let mut s = set.clone();
                        s.sort_unstable();
                        s
                    },
                    ..witness(t0, lhs, rel, rhs, detail)
                };
                tally.check(set.len() <= allowed, || {
                    mk(
                        Rational::from(set.len()),
                        "<=",
                        Rational::from(allowed),
                        format!(
                            "crossing set over steps {t0}..={t1} against twice the active cups"
                        ),
                    )
                });
                let water: Rational = set
                    .iter()
                    .map(|&c| &deposits[c][t1] - &deposits[c][t0 - 1])
                    .sum();
                let floor = Rational::from(need as i64 - set.len() as i64);
                tally.check(water >= floor, || {
                    mk(
                        water.clone(),
                        ">=",
                        floor.clone(),
                        format!("water poured into the crossing set over steps {t0}..={t1}"),
                    )
                });
            }
        }
    }
    let mut out = level_params(params, trace);
    out.insert("window".into(), window.to_string());
    Ok(tally.report(Checker::WorkingSet, out))
}

pub fn check_level_conservation(trace: &Trace, params: &CheckParams) -> Result<InvariantReport> {
    let mut tally = Tally::new();
    for stats in level_stats(trace, params)? {
        for t in 1..=stats.steps() {
            let lhs = stats.integer_fill[t] as i64;
            let rhs = stats.integer_fill[t - 1] as i64 + stats.crossings[t] as i64
                - stats.active_drains[t] as i64;
            tally.check(lhs == rhs, || Witness {
                level: Some(stats.level),
                ..witness(
                    t,
                    Rational::from(lhs),
                    "=",
                    Rational::from(rhs),
                    format!(
                        "integer fill {} + {} crossings - {} drains",
                        stats.integer_fill[t - 1],
                        stats.crossings[t],
                        stats.active_drains[t]
                    ),
                )
            });
        }
    }
    Ok(tally.report(Checker::Conservation, level_params(params, trace)))
}

pub fn check_fractional(trace: &Trace) -> InvariantReport {
    let n = trace.config.n;
    let offsets = trace.initial.fills();
    let mut poured = vec![Rational::zero(); n];
    let mut tally = Tally::new();
    for rec in &trace.records {
        for (&c, f) in &rec.fill.amounts {
            poured[c - 1] += f;
        }
        for c in 1..=n {
            let rest = &(&rec.post.fills()[c - 1] - &offsets[c - 1]) - &poured[c - 1];
            tally.check(rest.is_integer(), || Witness {
                cups: vec![c],
                ..witness(
                    rec.t,
                    rest.fract(),
                    "=",
                    Rational::zero(),
                    format!("fractional part of fill minus offset minus deposits for cup {c}"),
                )
            });
        }
    }
    tally.report(Checker::Fractional, BTreeMap::new())
}

pub fn check_greedy_like(trace: &Trace, params: &CheckParams) -> InvariantReport {
    let ell = params.ell();
    let mut tally = Tally::new();
    for rec in &trace.records {
        let ok = is_greedy_like_step(&rec.intermediate, &rec.empty, &ell, &params.c);
        tally.check(ok, || Witness {
            cups: rec.empty.cups.clone(),
            ..witness(
                rec.t,
                Rational::zero(),
                "=",
                Rational::zero(),
                format!(
                    "move does not drain two cups holding at least {}",
                    &ell / &params.c
                ),
            )
        });
    }
    let out = BTreeMap::from([
        ("ell".to_string(), ell.to_string()),
        ("c".to_string(), params.c.to_string()),
    ]);
    tally.report(Checker::GreedyLike, out)
}

/// Running maximum of `av_p` over the trace: a lower estimate of the
/// supremum over all fillers, for diagnostics only.
pub fn empirical_m(trace: &Trace) -> Rational {
    trace
        .derived
        .running_max_av_p
        .last()
        .cloned()
        .unwrap_or_default()
}
