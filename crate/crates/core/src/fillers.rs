//! Filler strategies: the harmonic and growth constructions, the two
//! randomized oblivious constructions, and simple fuzzing fillers.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{FillMove, Filler, FillerView, GameConfig, Visibility};
use crate::error::{Error, Result};
use crate::rational::{harmonic_range, Rational};
use crate::rng::{self, GameRng, StreamLabel};
use crate::state::{CupId, CupState};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FillerSpec {
    Zero,
    /// `p / n` into every cup.
    Uniform,
    /// Harmonic subprocedure over all cups, without anchors.
    Harmonic,
    /// Anchors `1..p-1` plus the harmonic subprocedure over the rest.
    Growth,
    /// Phases, rounds per phase and steps per round; `None` means defaults.
    AnchorSwap {
        params: Option<(usize, usize, usize)>,
    },
    AntiGreedy {
        ell: usize,
        c: Rational,
        phases: usize,
    },
    /// Each cup joins the support with probability `density`; `budget`
    /// caps the per-step total below `p`.
    Random {
        density: Rational,
        budget: Option<Rational>,
    },
    Custom(String),
}

impl FillerSpec {
    pub fn default_visibility(&self) -> Visibility {
        match self {
            FillerSpec::Harmonic
            | FillerSpec::Growth
            | FillerSpec::Random { .. }
            | FillerSpec::Custom(_) => Visibility::Adaptive,
            FillerSpec::Zero
            | FillerSpec::Uniform
            | FillerSpec::AnchorSwap { .. }
            | FillerSpec::AntiGreedy { .. } => Visibility::Oblivious,
        }
    }

    pub fn uses_randomness(&self) -> bool {
        matches!(
            self,
            FillerSpec::AnchorSwap { .. }
                | FillerSpec::AntiGreedy { .. }
                | FillerSpec::Random { .. }
        )
    }
}

impl fmt::Display for FillerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FillerSpec::Zero => f.write_str("zero"),
            FillerSpec::Uniform => f.write_str("uniform"),
            FillerSpec::Harmonic => f.write_str("harmonic"),
            FillerSpec::Growth => f.write_str("growth"),
            FillerSpec::AnchorSwap { params: None } => f.write_str("anchor-swap"),
            FillerSpec::AnchorSwap {
                params: Some((p, r, l)),
            } => write!(f, "anchor-swap:{p},{r},{l}"),
            FillerSpec::AntiGreedy { ell, c, phases } => {
                write!(f, "anti-greedy:{ell},{},{phases}", c.to_compact_string())
            }
            FillerSpec::Random {
                density,
                budget: None,
            } => write!(f, "random:{}", density.to_compact_string()),
            FillerSpec::Random {
                density,
                budget: Some(b),
            } => write!(
                f,
                "random:{},{}",
                density.to_compact_string(),
                b.to_compact_string()
            ),
            FillerSpec::Custom(name) => write!(f, "custom:{name}"),
        }
    }
}

fn parse_count(s: &str, what: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{what} must be a non-negative integer, got {s:?}")))
}

impl FromStr for FillerSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let parts: Vec<&str> = args.map(|a| a.split(',').collect()).unwrap_or_default();
        let no_args = |spec: FillerSpec| {
            if parts.is_empty() {
                Ok(spec)
            } else {
                Err(Error::Parse(format!("filler {name} takes no parameters")))
            }
        };
        match name {
            "zero" => no_args(FillerSpec::Zero),
            "uniform" => no_args(FillerSpec::Uniform),
            "harmonic" => no_args(FillerSpec::Harmonic),
            "growth" => no_args(FillerSpec::Growth),
            "anchor-swap" => match parts.as_slice() {
                [] => Ok(FillerSpec::AnchorSwap { params: None }),
                [p, r, l] => {
                    let params = (
                        parse_count(p, "phases")?,
                        parse_count(r, "rounds")?,
                        parse_count(l, "round length")?,
                    );
                    if params.0 == 0 || params.1 == 0 || params.2 == 0 {
                        return Err(Error::Parse(
                            "anchor-swap parameters must be positive".into(),
                        ));
                    }
                    Ok(FillerSpec::AnchorSwap {
                        params: Some(params),
                    })
                }
                _ => Err(Error::Parse("anchor-swap takes P,R,L".into())),
            },
            "anti-greedy" => {
                if parts.is_empty() || parts.len() > 3 {
                    return Err(Error::Parse("anti-greedy takes ell[,c[,phases]]".into()));
                }
                let ell = parse_count(parts[0], "ell")?;
                let c = match parts.get(1) {
                    Some(c) => c.parse()?,
                    None => Rational::new(1, 2),
                };
                let phases = match parts.get(2) {
                    Some(x) => parse_count(x, "phases")?,
                    None => 1,
                };
                if c <= Rational::zero() || phases == 0 {
                    return Err(Error::Parse(
                        "anti-greedy needs c > 0 and phases >= 1".into(),
                    ));
                }
                Ok(FillerSpec::AntiGreedy { ell, c, phases })
            }
            "random" => {
                if parts.is_empty() || parts.len() > 2 {
                    return Err(Error::Parse("random takes density[,budget]".into()));
                }
                let density: Rational = parts[0].parse()?;
                if density.is_negative() || density > Rational::one() {
                    return Err(Error::Parse(format!("density {density} not in [0, 1]")));
                }
                let budget = match parts.get(1) {
                    Some(b) => {
                        let b: Rational = b.parse()?;
                        if b.is_negative() {
                            return Err(Error::Parse("budget must be non-negative".into()));
                        }
                        Some(b)
                    }
                    None => None,
                };
                Ok(FillerSpec::Random { density, budget })
            }
            "custom" => Ok(FillerSpec::Custom(args.unwrap_or("").to_string())),
            other => Err(Error::Parse(format!("unknown filler {other:?}"))),
        }
    }
}

impl TryFrom<String> for FillerSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FillerSpec> for String {
    fn from(s: FillerSpec) -> String {
        s.to_string()
    }
}

pub fn build(config: &GameConfig) -> Result<Box<dyn Filler>> {
    let (n, p) = (config.n, config.p);
    Ok(match &config.filler {
        FillerSpec::Zero => Box::new(ZeroFiller),
        FillerSpec::Uniform => Box::new(UniformFiller::new(n, p)),
        FillerSpec::Harmonic => Box::new(GrowthFiller::harmonic(n)?),
        FillerSpec::Growth => Box::new(GrowthFiller::new(n, p)?),
        FillerSpec::AnchorSwap { params } => {
            let params = params.map(|(ph, r, l)| AnchorSwapParams {
                phases: ph,
                rounds: r,
                round_len: l,
            });
            Box::new(AnchorSwapFiller::new(n, p, params, config.seed)?)
        }
        FillerSpec::AntiGreedy { ell, c, phases } => Box::new(AntiGreedyFiller::new(
            n,
            p,
            *ell,
            c.clone(),
            *phases,
            config.seed,
        )?),
        FillerSpec::Random { density, budget } => Box::new(RandomFiller::new(
            n,
            p,
            density.clone(),
            budget.clone(),
            config.truncation.clone(),
            config.seed,
        )),
        FillerSpec::Custom(name) => {
            return Err(Error::Config(format!(
                "filler custom:{name} has no spec-based constructor"
            )))
        }
    })
}

/// Bookkeeping shared by the phased constructions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseState {
    pub phase: usize,
    pub round: usize,
    pub step_in_round: usize,
    /// Cups topped up with one unit every step.
    pub anchors: Vec<CupId>,
    /// The cups the current phase or round works on.
    pub working: Vec<CupId>,
    /// Working cups still receiving deposits.
    pub unemptied: Vec<CupId>,
}

/// One unit spread evenly over `unemptied`; `None` once fewer than two remain.
pub fn harmonic_step(unemptied: &[CupId]) -> Option<FillMove> {
    if unemptied.len() < 2 {
        return None;
    }
    let share = Rational::recip_int(unemptied.len());
    Some(FillMove::from_pairs(
        unemptied.iter().map(|&c| (c, share.clone())),
    ))
}

fn spread(mv: &mut FillMove, cups: &[CupId]) {
    if cups.is_empty() {
        return;
    }
    let share = Rational::recip_int(cups.len());
    for &c in cups {
        mv.add(c, share.clone());
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthStats {
    pub growth_steps: usize,
    pub completed_phases: usize,
    pub restarts: usize,
}

/// Adaptive filler: one unit into each anchor, and the harmonic
/// subprocedure over the remaining cups. A step in which the emptier drains
/// two or more non-anchor cups is a growth step; the subprocedure then
/// restarts on the next step.
#[derive(Clone, Debug)]
pub struct GrowthFiller {
    state: PhaseState,
    stats: GrowthStats,
}

impl GrowthFiller {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if p == 0 || p > n {
            return Err(Error::Config(format!("p = {p} must lie in 1..={n}")));
        }
        if n - (p - 1) < 2 {
            return Err(Error::Config(format!(
                "growth filler needs n > p (n = {n}, p = {p})"
            )));
        }
        let anchors: Vec<CupId> = (1..p).collect();
        let working: Vec<CupId> = (p..=n).collect();
        Ok(GrowthFiller {
            state: PhaseState {
                anchors,
                unemptied: working.clone(),
                working,
                ..PhaseState::default()
            },
            stats: GrowthStats::default(),
        })
    }

    /// The harmonic construction over all `n` cups.
    pub fn harmonic(n: usize) -> Result<Self> {
        GrowthFiller::new(n, 1)
    }

    pub fn phase_state(&self) -> &PhaseState {
        &self.state
    }

    pub fn stats(&self) -> GrowthStats {
        self.stats
    }

    fn restart(&mut self) {
        self.state.unemptied = self.state.working.clone();
        self.state.phase += 1;
        self.state.step_in_round = 0;
    }

    fn observe(&mut self, drained: &[CupId], state: &CupState) {
        let st = &mut self.state;
        let drained_working: Vec<CupId> = drained
            .iter()
            .copied()
            .filter(|c| st.working.contains(c))
            .collect();
        if drained_working.len() >= 2 {
            self.stats.growth_steps += 1;
            self.stats.restarts += 1;
            self.restart();
            return;
        }
        let hit = drained_working
            .first()
            .and_then(|c| st.unemptied.iter().position(|u| u == c));
        match hit {
            Some(pos) => {
                st.unemptied.remove(pos);
            }
            None => {
                // Nothing left the set, so drop its lowest cup to keep the
                // schedule one cup shorter per step.
                let fills = state.fills();
                let pos = (0..st.unemptied.len())
                    .min_by(|&a, &b| {
                        let (ca, cb) = (st.unemptied[a], st.unemptied[b]);
                        fills[ca - 1].cmp(&fills[cb - 1]).then(cb.cmp(&ca))
                    })
                    .expect("unemptied set is non-empty");
                st.unemptied.remove(pos);
            }
        }
        st.step_in_round += 1;
        if st.unemptied.len() < 2 {
            self.stats.completed_phases += 1;
            self.restart();
        }
    }
}

impl Filler for GrowthFiller {
    fn visibility(&self) -> Visibility {
        Visibility::Adaptive
    }

    fn next_fill(&mut self, view: &FillerView<'_>) -> Result<FillMove> {
        let state = view
            .state()
            .ok_or_else(|| Error::Config("growth filler needs adaptive visibility".into()))?;
        if let Some(last) = view.last_step() {
            let drained: Vec<CupId> = last.drained().collect();
            self.observe(&drained, state);
        }
        let mut mv = harmonic_step(&self.state.unemptied).expect("at least two cups after restart");
        for &a in &self.state.anchors {
            mv.add(a, Rational::one());
        }
        Ok(mv)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorSwapParams {
    pub phases: usize,
    pub rounds: usize,
    /// Steps per round; the working set has one more cup than this.
    pub round_len: usize,
}

impl AnchorSwapParams {
    /// `P = p`, `R = p^3`, `L = max(2, ceil(log2 p) - 1)`.
    pub fn defaults(p: usize) -> Self {
        let log = (p as f64).log2().ceil() as usize;
        AnchorSwapParams {
            phases: p,
            rounds: p.pow(3),
            round_len: log.saturating_sub(1).max(2),
        }
    }

    pub fn total_steps(&self) -> usize {
        self.phases * self.rounds * self.round_len
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLog {
    pub phase: usize,
    pub round: usize,
    pub new_anchor_round: bool,
    pub survivor: CupId,
    /// Anchor set in force after the round.
    pub anchors: Vec<CupId>,
}

/// Oblivious filler that keeps `p - 1` anchors topped up while running
/// random-deletion rounds over a small working set; once per phase the
/// round's survivor replaces a random anchor.
#[derive(Clone, Debug)]
pub struct AnchorSwapFiller {
    n: usize,
    params: AnchorSwapParams,
    state: PhaseState,
    new_anchor_round: usize,
    rng: GameRng,
    log: Vec<RoundLog>,
    done: bool,
}

impl AnchorSwapFiller {
    pub fn new(n: usize, p: usize, params: Option<AnchorSwapParams>, seed: u64) -> Result<Self> {
        let params = params.unwrap_or_else(|| AnchorSwapParams::defaults(p));
        let width = params.round_len + 1;
        if p == 0 || n < p - 1 + width || n < p + width {
            return Err(Error::Config(format!(
                "anchor-swap needs n >= p + {width} (n = {n}, p = {p})"
            )));
        }
        let mut f = AnchorSwapFiller {
            n,
            params,
            state: PhaseState {
                anchors: (1..p).collect(),
                ..PhaseState::default()
            },
            new_anchor_round: 0,
            rng: rng::stream(seed, StreamLabel::Filler),
            log: Vec::new(),
            done: false,
        };
        f.start_phase();
        f.reset_working();
        Ok(f)
    }

    pub fn params(&self) -> AnchorSwapParams {
        self.params
    }

    pub fn phase_state(&self) -> &PhaseState {
        &self.state
    }

    pub fn rounds_log(&self) -> &[RoundLog] {
        &self.log
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    fn start_phase(&mut self) {
        self.new_anchor_round = rng::index(&mut self.rng, self.params.rounds);
    }

    fn reset_working(&mut self) {
        let anchors = &self.state.anchors;
        self.state.working = (1..=self.n)
            .filter(|c| !anchors.contains(c))
            .take(self.params.round_len + 1)
            .collect();
        self.state.unemptied = self.state.working.clone();
        self.state.step_in_round = 0;
    }

    fn finish_round(&mut self) {
        let survivor = self.state.unemptied[0];
        let is_new = self.state.round == self.new_anchor_round;
        if is_new && !self.state.anchors.is_empty() {
            let k = rng::index(&mut self.rng, self.state.anchors.len());
            self.state.anchors.remove(k);
            self.state.anchors.push(survivor);
            self.state.anchors.sort_unstable();
        }
        self.log.push(RoundLog {
            phase: self.state.phase,
            round: self.state.round,
            new_anchor_round: is_new,
            survivor,
            anchors: self.state.anchors.clone(),
        });
        self.state.round += 1;
        if self.state.round == self.params.rounds {
            self.state.round = 0;
            self.state.phase += 1;
            if self.state.phase == self.params.phases {
                self.done = true;
                return;
            }
            self.start_phase();
        }
        self.reset_working();
    }
}

impl Filler for AnchorSwapFiller {
    fn visibility(&self) -> Visibility {
        Visibility::Oblivious
    }

    fn next_fill(&mut self, _view: &FillerView<'_>) -> Result<FillMove> {
        if self.done {
            return Ok(FillMove::new());
        }
        let mut mv = FillMove::new();
        for &a in &self.state.anchors {
            mv.add(a, Rational::one());
        }
        spread(&mut mv, &self.state.unemptied);
        let k = rng::index(&mut self.rng, self.state.unemptied.len());
        self.state.unemptied.remove(k);
        self.state.step_in_round += 1;
        if self.state.step_in_round == self.params.round_len {
            self.finish_round();
        }
        Ok(mv)
    }
}

/// Oblivious filler whose phases each top up anchors `1..p-1` and run one
/// random-deletion round over `floor(c * ell)` fresh cups.
#[derive(Clone, Debug)]
pub struct AntiGreedyFiller {
    p: usize,
    width: usize,
    phases: usize,
    state: PhaseState,
    rng: GameRng,
    done: bool,
}

impl AntiGreedyFiller {
    pub fn new(
        n: usize,
        p: usize,
        ell: usize,
        c: Rational,
        phases: usize,
        seed: u64,
    ) -> Result<Self> {
        if p < 2 {
            return Err(Error::Config("anti-greedy filler needs p >= 2".into()));
        }
        if ell == 0 || ell > n.saturating_sub(p) {
            return Err(Error::Config(format!(
                "ell = {ell} must lie in 1..={}",
                n.saturating_sub(p)
            )));
        }
        let width = (&c * &Rational::from(ell)).floor_i128();
        if width < 2 {
            return Err(Error::Config(format!(
                "c * ell = {} leaves fewer than 2 cups",
                &c * &Rational::from(ell)
            )));
        }
        let width = width as usize;
        if p + width - 1 > n {
            return Err(Error::Config(format!(
                "working set {}..={} exceeds n = {n}",
                p,
                p + width - 1
            )));
        }
        if phases == 0 {
            return Err(Error::Config("anti-greedy needs at least one phase".into()));
        }
        let mut f = AntiGreedyFiller {
            p,
            width,
            phases,
            state: PhaseState {
                anchors: (1..p).collect(),
                ..PhaseState::default()
            },
            rng: rng::stream(seed, StreamLabel::Filler),
            done: false,
        };
        f.reset();
        Ok(f)
    }

    /// `floor(c * ell)`, the working-set size.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn phase_len(&self) -> usize {
        self.width - 1
    }

    pub fn total_steps(&self) -> usize {
        self.phases * self.phase_len()
    }

    pub fn phase_state(&self) -> &PhaseState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    fn reset(&mut self) {
        self.state.working = (self.p..self.p + self.width).collect();
        self.state.unemptied = self.state.working.clone();
        self.state.step_in_round = 0;
    }
}

impl Filler for AntiGreedyFiller {
    fn visibility(&self) -> Visibility {
        Visibility::Oblivious
    }

    fn next_fill(&mut self, _view: &FillerView<'_>) -> Result<FillMove> {
        if self.done {
            return Ok(FillMove::new());
        }
        let mut mv = FillMove::new();
        for &a in &self.state.anchors {
            mv.add(a, Rational::one());
        }
        spread(&mut mv, &self.state.unemptied);
        let k = rng::index(&mut self.rng, self.state.unemptied.len());
        self.state.unemptied.remove(k);
        self.state.step_in_round += 1;
        if self.state.step_in_round == self.phase_len() {
            self.state.phase += 1;
            if self.state.phase == self.phases {
                self.done = true;
            } else {
                self.reset();
            }
        }
        Ok(mv)
    }
}

/// Fill threshold `-1.5 + ln(ell / c)` used by the anti-greedy experiment.
pub fn anti_greedy_threshold(ell: usize, c: &Rational) -> f64 {
    -1.5 + (ell as f64 / c.to_f64()).ln()
}

/// `1/2 + 1/3 + ... + 1/(n - p + 1)`, the growth filler's guaranteed backlog.
pub fn growth_threshold(n: usize, p: usize) -> Rational {
    harmonic_range(2, n - p + 1)
}

const DENOMINATORS: [i64; 9] = [1, 2, 3, 4, 5, 6, 8, 10, 12];

/// Fuzzing filler with random support and small-denominator amounts.
#[derive(Clone, Debug)]
pub struct RandomFiller {
    n: usize,
    budget: Rational,
    density: f64,
    truncation: Option<Rational>,
    rng: GameRng,
}

impl RandomFiller {
    pub fn new(
        n: usize,
        p: usize,
        density: Rational,
        budget: Option<Rational>,
        truncation: Option<Rational>,
        seed: u64,
    ) -> Self {
        let cap = Rational::from(p);
        let budget = budget.map_or(cap.clone(), |b| b.min(cap));
        RandomFiller {
            n,
            budget,
            density: density.to_f64(),
            truncation,
            rng: rng::stream(seed, StreamLabel::Filler),
        }
    }

    fn draw(&mut self) -> Rational {
        let d = DENOMINATORS[rng::index(&mut self.rng, DENOMINATORS.len())];
        let k = self.rng.gen_range(1..=d);
        Rational::new(k, d)
    }
}

impl Filler for RandomFiller {
    fn visibility(&self) -> Visibility {
        if self.truncation.is_some() {
            Visibility::Adaptive
        } else {
            Visibility::Oblivious
        }
    }

    fn next_fill(&mut self, view: &FillerView<'_>) -> Result<FillMove> {
        let state = view.state();
        if self.truncation.is_some() && state.is_none() {
            return Err(Error::Config(
                "truncated random filler needs adaptive visibility".into(),
            ));
        }
        let n = self.n;
        let mut order: Vec<CupId> = (1..=n).collect();
        order.shuffle(&mut self.rng);
        let mut left = self.budget.clone();
        let mut mv = FillMove::new();
        for cup in order {
            if left.is_zero() {
                break;
            }
            if !self.rng.gen_bool(self.density.clamp(0.0, 1.0)) {
                continue;
            }
            let mut amt = self.draw().min(left.clone());
            if let (Some(cap), Some(state)) = (&self.truncation, state) {
                let room = cap - &state.fills()[cup - 1];
                if !room.is_negative() {
                    amt = amt.min(room);
                } else {
                    amt = Rational::zero();
                }
            }
            if amt.is_zero() {
                continue;
            }
            left -= &amt;
            mv.add(cup, amt);
        }
        Ok(mv)
    }

    fn uses_randomness(&self) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroFiller;

impl Filler for ZeroFiller {
    fn visibility(&self) -> Visibility {
        Visibility::Oblivious
    }

    fn next_fill(&mut self, _view: &FillerView<'_>) -> Result<FillMove> {
        Ok(FillMove::new())
    }
}

#[derive(Clone, Debug)]
pub struct UniformFiller {
    mv: FillMove,
}

impl UniformFiller {
    pub fn new(n: usize, p: usize) -> Self {
        let share = &Rational::from(p) / &Rational::from(n);
        UniformFiller {
            mv: FillMove::from_pairs((1..=n).map(|c| (c, share.clone()))),
        }
    }
}

impl Filler for UniformFiller {
    fn visibility(&self) -> Visibility {
        Visibility::Oblivious
    }

    fn next_fill(&mut self, _view: &FillerView<'_>) -> Result<FillMove> {
        Ok(self.mv.clone())
    }
}

/// Replays a fixed list of moves, then deposits nothing.
#[derive(Clone, Debug)]
pub struct ScriptFiller {
    moves: Vec<FillMove>,
}

impl ScriptFiller {
    pub fn new(moves: Vec<FillMove>) -> Self {
        ScriptFiller { moves }
    }
}

impl Filler for ScriptFiller {
    fn visibility(&self) -> Visibility {
        Visibility::Oblivious
    }

    fn next_fill(&mut self, view: &FillerView<'_>) -> Result<FillMove> {
        Ok(self.moves.get(view.t() - 1).cloned().unwrap_or_default())
    }
}
