//! Step semantics of the p-processor cup game.
//!
//! Each step the filler deposits water (at most 1 unit per cup, at most `p`
//! units in total), producing the intermediate state; the emptier then picks
//! up to `p` distinct cups and removes water from them. The engine checks
//! every move, aborts the run on the first illegal one and records the full
//! history in a [`Trace`]. Strategy logic (phases, restarts, offsets) lives in
//! the strategies, never here.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::emptiers::{self, EmptierSpec};
use crate::error::{Error, Result};
use crate::fillers::{self, FillerSpec};
use crate::rational::Rational;
use crate::state::{CupId, CupState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    /// The filler sees the whole trace so far.
    Adaptive,
    /// The filler sees only its own earlier moves.
    Oblivious,
}

impl fmt::Display for Visibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Visibility::Adaptive => "adaptive",
            Visibility::Oblivious => "oblivious",
        })
    }
}

impl FromStr for Visibility {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "adaptive" => Ok(Visibility::Adaptive),
            "oblivious" => Ok(Visibility::Oblivious),
            other => Err(Error::Parse(format!("unknown visibility {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    pub n: usize,
    pub p: usize,
    pub steps: usize,
    /// When set, the filler may never raise a cup above this fill.
    pub truncation: Option<Rational>,
    pub seed: u64,
    pub filler: FillerSpec,
    pub emptier: EmptierSpec,
    pub visibility: Visibility,
}

impl GameConfig {
    /// Seed 0, no truncation, and the filler's natural visibility.
    pub fn new(n: usize, p: usize, steps: usize, filler: FillerSpec, emptier: EmptierSpec) -> Self {
        let visibility = filler.default_visibility();
        GameConfig {
            n,
            p,
            steps,
            truncation: None,
            seed: 0,
            filler,
            emptier,
            visibility,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_truncation(mut self, cap: Rational) -> Self {
        self.truncation = Some(cap);
        self
    }

    pub fn with_visibility(mut self, visibility: Visibility) -> Self {
        self.visibility = visibility;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.p == 0 || self.p > self.n {
            return Err(Error::Config(format!(
                "p = {} must lie in 1..={}",
                self.p, self.n
            )));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if let Some(cap) = &self.truncation {
            if *cap <= Rational::one() {
                return Err(Error::Config(format!("truncation {cap} must exceed 1")));
            }
        }
        Ok(())
    }
}

/// Water deposited by the filler in one step, keyed by cup id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FillMove {
    pub amounts: BTreeMap<CupId, Rational>,
}

impl FillMove {
    pub fn new() -> Self {
        FillMove::default()
    }

    /// Builds a move, dropping zero amounts.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (CupId, Rational)>) -> Self {
        let mut mv = FillMove::new();
        for (id, amt) in pairs {
            mv.add(id, amt);
        }
        mv
    }

    pub fn add(&mut self, id: CupId, amount: Rational) {
        if amount.is_zero() {
            return;
        }
        let slot = self.amounts.entry(id).or_default();
        *slot += &amount;
    }

    pub fn amount(&self, id: CupId) -> Rational {
        self.amounts.get(&id).cloned().unwrap_or_default()
    }

    pub fn total(&self) -> Rational {
        self.amounts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.amounts.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmptyMove {
    /// Selected cups, in the order the emptier ranked them.
    pub cups: Vec<CupId>,
    /// Selected cups holding less than one unit are left untouched.
    pub skip_under_one: bool,
}

impl EmptyMove {
    pub fn plain(cups: Vec<CupId>) -> Self {
        EmptyMove {
            cups,
            skip_under_one: false,
        }
    }

    pub fn skipping(cups: Vec<CupId>) -> Self {
        EmptyMove {
            cups,
            skip_under_one: true,
        }
    }

    /// Amount this move takes from a cup currently holding `fill`.
    pub fn removal_for(&self, fill: &Rational) -> Rational {
        let one = Rational::one();
        if *fill >= one {
            one
        } else if self.skip_under_one {
            Rational::zero()
        } else {
            fill.clone()
        }
    }
}

/// A broken game rule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UnknownCup {
        cup: CupId,
    },
    NegativeAmount {
        cup: CupId,
        amount: Rational,
    },
    PerCupOverfill {
        cup: CupId,
        amount: Rational,
    },
    TotalOverfill {
        total: Rational,
        limit: usize,
    },
    TruncationBreach {
        cup: CupId,
        resulting: Rational,
        limit: Rational,
    },
    TooManyCups {
        count: usize,
        limit: usize,
    },
    DuplicateCup {
        cup: CupId,
    },
}

/// Checks a fill move against the per-cup, total and truncation rules.
pub fn validate_fill(
    mv: &FillMove,
    config: &GameConfig,
    state: &CupState,
) -> std::result::Result<(), Vec<Violation>> {
    let one = Rational::one();
    let mut out = Vec::new();
    for (&cup, amount) in &mv.amounts {
        if cup == 0 || cup > state.n() {
            out.push(Violation::UnknownCup { cup });
            continue;
        }
        if amount.is_negative() {
            out.push(Violation::NegativeAmount {
                cup,
                amount: amount.clone(),
            });
        }
        if *amount > one {
            out.push(Violation::PerCupOverfill {
                cup,
                amount: amount.clone(),
            });
        }
        if let Some(cap) = &config.truncation {
            let resulting = &state.fills()[cup - 1] + amount;
            if resulting > *cap {
                out.push(Violation::TruncationBreach {
                    cup,
                    resulting,
                    limit: cap.clone(),
                });
            }
        }
    }
    let total = mv.total();
    if total > Rational::from(config.p) {
        out.push(Violation::TotalOverfill {
            total,
            limit: config.p,
        });
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

fn validate_empty(mv: &EmptyMove, p: usize, n: usize) -> std::result::Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if mv.cups.len() > p {
        out.push(Violation::TooManyCups {
            count: mv.cups.len(),
            limit: p,
        });
    }
    let mut seen = vec![false; n];
    for &cup in &mv.cups {
        if cup == 0 || cup > n {
            out.push(Violation::UnknownCup { cup });
        } else if std::mem::replace(&mut seen[cup - 1], true) {
            out.push(Violation::DuplicateCup { cup });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Componentwise sum. The move must already be validated.
pub fn apply_fill(state: &CupState, mv: &FillMove) -> CupState {
    let mut next = state.clone();
    for (&cup, amount) in &mv.amounts {
        let fills = next.fills_mut();
        fills[cup - 1] = &fills[cup - 1] + amount;
    }
    next
}

/// Removes water from the selected cups, returning the new state and the
/// amount actually taken from each selected cup.
pub fn apply_empty(
    state: &CupState,
    mv: &EmptyMove,
) -> Result<(CupState, BTreeMap<CupId, Rational>)> {
    let mut next = state.clone();
    let mut removed = BTreeMap::new();
    for &cup in &mv.cups {
        state.check_id(cup)?;
        if removed.contains_key(&cup) {
            return Err(Error::Argument(format!("cup {cup} selected twice")));
        }
        let fills = next.fills_mut();
        let take = mv.removal_for(&fills[cup - 1]);
        fills[cup - 1] = &fills[cup - 1] - &take;
        removed.insert(cup, take);
    }
    Ok((next, removed))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub fill: FillMove,
    /// State after the deposit, before the emptier acts.
    pub intermediate: CupState,
    pub empty: EmptyMove,
    /// State at the end of the step.
    pub post: CupState,
    pub removed: BTreeMap<CupId, Rational>,
}

impl StepRecord {
    /// Selected cups that actually lost water.
    pub fn drained(&self) -> impl Iterator<Item = CupId> + '_ {
        self.removed
            .iter()
            .filter(|(_, r)| !r.is_zero())
            .map(|(&c, _)| c)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbortReport {
    pub t: usize,
    pub offender: String,
    pub violations: Vec<Violation>,
}

/// Per-step summaries over `S_1..S_T`, index `t - 1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedSeries {
    /// `S_t(1)`.
    pub backlog: Vec<Rational>,
    /// `av_p(S_t)`.
    pub av_p: Vec<Rational>,
    /// Running maximum of `av_p`, an empirical lower estimate of its supremum.
    pub running_max_av_p: Vec<Rational>,
}

impl DerivedSeries {
    fn push(&mut self, post: &CupState, p: usize) {
        let backlog = post.max_fill().clone();
        let av = &post.top_total(p) / &Rational::from(p);
        let run = match self.running_max_av_p.last() {
            Some(m) if *m >= av => m.clone(),
            _ => av.clone(),
        };
        self.backlog.push(backlog);
        self.av_p.push(av);
        self.running_max_av_p.push(run);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub config: GameConfig,
    /// `S_0`; non-zero when the emptier deposits random offsets.
    pub initial: CupState,
    pub records: Vec<StepRecord>,
    pub derived: DerivedSeries,
    pub abort: Option<AbortReport>,
}

impl Trace {
    /// Assembles a trace without any legality checks. Used to build
    /// deliberately broken fixtures for the checkers.
    #[doc(hidden)]
    pub fn from_parts_unchecked(
        config: GameConfig,
        initial: CupState,
        records: Vec<StepRecord>,
    ) -> Trace {
        let mut derived = DerivedSeries::default();
        for r in &records {
            derived.push(&r.post, config.p);
        }
        Trace {
            config,
            initial,
            records,
            derived,
            abort: None,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `S_t` for `t` in `0..=len`.
    pub fn state(&self, t: usize) -> &CupState {
        if t == 0 {
            &self.initial
        } else {
            &self.records[t - 1].post
        }
    }

    pub fn max_backlog(&self) -> Rational {
        self.derived
            .backlog
            .iter()
            .max()
            .cloned()
            .unwrap_or_default()
    }

    pub fn final_backlog(&self) -> Rational {
        self.derived.backlog.last().cloned().unwrap_or_default()
    }

    pub fn recompute_derived(&self) -> DerivedSeries {
        let mut d = DerivedSeries::default();
        for r in &self.records {
            d.push(&r.post, self.config.p);
        }
        d
    }

    /// True when the stored summaries equal a fresh recomputation.
    pub fn derived_consistent(&self) -> bool {
        self.recompute_derived() == self.derived
    }

    pub fn fill_moves(&self) -> Vec<FillMove> {
        self.records.iter().map(|r| r.fill.clone()).collect()
    }
}

/// What a filler may look at when choosing its next move.
pub enum FillerView<'a> {
    Adaptive {
        /// Step about to be played.
        t: usize,
        initial: &'a CupState,
        state: &'a CupState,
        /// Earlier steps; under [`History::LastOnly`] just the latest one.
        history: &'a [StepRecord],
    },
    Oblivious {
        t: usize,
        own_moves: &'a [FillMove],
    },
}

impl FillerView<'_> {
    pub fn t(&self) -> usize {
        match self {
            FillerView::Adaptive { t, .. } | FillerView::Oblivious { t, .. } => *t,
        }
    }

    pub fn state(&self) -> Option<&CupState> {
        match self {
            FillerView::Adaptive { state, .. } => Some(state),
            FillerView::Oblivious { .. } => None,
        }
    }

    pub fn last_step(&self) -> Option<&StepRecord> {
        match self {
            FillerView::Adaptive { history, .. } => history.last(),
            FillerView::Oblivious { .. } => None,
        }
    }
}

pub trait Filler: Send {
    /// The least information this filler needs.
    fn visibility(&self) -> Visibility;
    fn next_fill(&mut self, view: &FillerView<'_>) -> Result<FillMove>;
    fn uses_randomness(&self) -> bool {
        false
    }
}

pub trait Emptier: Send {
    /// `S_0`, before the first step.
    fn initial_state(&mut self, n: usize) -> CupState {
        CupState::zeros(n)
    }
    fn select(&mut self, intermediate: &CupState, p: usize) -> EmptyMove;
    fn uses_randomness(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum History {
    Full,
    /// Keep only the latest record; for long runs that need summaries only.
    LastOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Played,
    Finished,
    Aborted,
}

/// A game in progress.
pub struct Game {
    filler: Box<dyn Filler>,
    emptier: Box<dyn Emptier>,
    trace: Trace,
    own_moves: Vec<FillMove>,
    history: History,
    played: usize,
}

impl Game {
    pub fn new(config: GameConfig) -> Result<Game> {
        config.validate()?;
        let filler = fillers::build(&config)?;
        let emptier = emptiers::build(&config)?;
        Game::with_strategies(config, filler, emptier)
    }

    pub fn with_strategies(
        config: GameConfig,
        filler: Box<dyn Filler>,
        mut emptier: Box<dyn Emptier>,
    ) -> Result<Game> {
        config.validate()?;
        if filler.visibility() == Visibility::Adaptive && config.visibility == Visibility::Oblivious
        {
            return Err(Error::Config(format!(
                "filler {} needs adaptive visibility",
                config.filler
            )));
        }
        let initial = emptier.initial_state(config.n);
        if initial.n() != config.n {
            return Err(Error::Config(
                "emptier produced a state of the wrong size".into(),
            ));
        }
        Ok(Game {
            filler,
            emptier,
            trace: Trace {
                config,
                initial,
                records: Vec::new(),
                derived: DerivedSeries::default(),
                abort: None,
            },
            own_moves: Vec::new(),
            history: History::Full,
            played: 0,
        })
    }

    pub fn history(mut self, history: History) -> Self {
        self.history = history;
        self
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn played(&self) -> usize {
        self.played
    }

    pub fn current(&self) -> &CupState {
        self.trace
            .records
            .last()
            .map(|r| &r.post)
            .unwrap_or(&self.trace.initial)
    }

    pub fn step(&mut self) -> Result<StepOutcome> {
        if self.trace.abort.is_some() {
            return Ok(StepOutcome::Aborted);
        }
        if self.played >= self.trace.config.steps {
            return Ok(StepOutcome::Finished);
        }
        let t = self.played + 1;
        let (n, p) = (self.trace.config.n, self.trace.config.p);
        let visibility = self.trace.config.visibility;
        let prev = self
            .trace
            .records
            .last()
            .map(|r| &r.post)
            .unwrap_or(&self.trace.initial);
        let fill = {
            let view = match visibility {
                Visibility::Adaptive => FillerView::Adaptive {
                    t,
                    initial: &self.trace.initial,
                    state: prev,
                    history: &self.trace.records,
                },
                Visibility::Oblivious => FillerView::Oblivious {
                    t,
                    own_moves: &self.own_moves,
                },
            };
            self.filler.next_fill(&view)?
        };
        if let Err(violations) = validate_fill(&fill, &self.trace.config, prev) {
            self.trace.abort = Some(AbortReport {
                t,
                offender: format!("filler {}", self.trace.config.filler),
                violations,
            });
            return Ok(StepOutcome::Aborted);
        }
        let intermediate = apply_fill(prev, &fill);
        let empty = self.emptier.select(&intermediate, p);
        if let Err(violations) = validate_empty(&empty, p, n) {
            self.trace.abort = Some(AbortReport {
                t,
                offender: format!("emptier {}", self.trace.config.emptier),
                violations,
            });
            return Ok(StepOutcome::Aborted);
        }
        let (post, removed) = apply_empty(&intermediate, &empty)?;
        self.trace.derived.push(&post, p);
        if visibility == Visibility::Oblivious {
            self.own_moves.push(fill.clone());
        }
        let record = StepRecord {
            t,
            fill,
            intermediate,
            empty,
            post,
            removed,
        };
        if self.history == History::LastOnly {
            self.trace.records.clear();
        }
        self.trace.records.push(record);
        self.played = t;
        Ok(StepOutcome::Played)
    }

    /// Plays until the horizon or an abort.
    pub fn run(mut self) -> Result<Trace> {
        while self.step()? == StepOutcome::Played {}
        Ok(self.trace)
    }

    /// Plays until `stop` holds for the latest post state, the horizon, or an
    /// abort. Returns the step at which `stop` first held.
    pub fn run_until(&mut self, mut stop: impl FnMut(&CupState) -> bool) -> Result<Option<usize>> {
        while self.step()? == StepOutcome::Played {
            if stop(self.current()) {
                return Ok(Some(self.played));
            }
        }
        Ok(None)
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }
}

/// Runs a game whose strategies are built from the config's spec strings.
pub fn run_game(config: &GameConfig) -> Result<Trace> {
    Game::new(config.clone())?.run()
}

/// Runs a game with caller-supplied strategies.
pub fn run_game_with(
    config: &GameConfig,
    filler: Box<dyn Filler>,
    emptier: Box<dyn Emptier>,
) -> Result<Trace> {
    Game::with_strategies(config.clone(), filler, emptier)?.run()
}
