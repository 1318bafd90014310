//! Emptier strategies and the greedy-like predicate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::{Emptier, EmptyMove, GameConfig, Trace};
use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::rng::{self, GameRng, StreamLabel};
use crate::state::CupState;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EmptierSpec {
    /// Drain the `p` fullest cups, taking `min(1, fill)` from each.
    Greedy,
    /// Like `Greedy`, but selected cups under one unit are left alone.
    GreedySkip,
    /// Random initial offsets, then `GreedySkip`.
    SmoothedGreedy,
    /// Drains the fullest cup and the `p - 1` emptiest cups.
    ThresholdBlind { ell: Rational, c: Rational },
    /// A strategy supplied in code; cannot be built from the spec.
    Custom(String),
}

impl EmptierSpec {
    /// True for the strategies whose traces the greedy lemmas cover.
    pub fn is_greedy_family(&self) -> bool {
        matches!(
            self,
            EmptierSpec::Greedy | EmptierSpec::GreedySkip | EmptierSpec::SmoothedGreedy
        )
    }

    pub fn is_smoothed(&self) -> bool {
        matches!(self, EmptierSpec::SmoothedGreedy)
    }

    pub fn uses_randomness(&self) -> bool {
        self.is_smoothed()
    }
}

impl fmt::Display for EmptierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmptierSpec::Greedy => f.write_str("greedy"),
            EmptierSpec::GreedySkip => f.write_str("greedy-skip"),
            EmptierSpec::SmoothedGreedy => f.write_str("smoothed-greedy"),
            EmptierSpec::ThresholdBlind { ell, c } => write!(
                f,
                "threshold-blind:{},{}",
                ell.to_compact_string(),
                c.to_compact_string()
            ),
            EmptierSpec::Custom(name) => write!(f, "custom:{name}"),
        }
    }
}

impl FromStr for EmptierSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let no_args = |spec: EmptierSpec| match args {
            None => Ok(spec),
            Some(_) => Err(Error::Parse(format!("emptier {name} takes no parameters"))),
        };
        match name {
            "greedy" => no_args(EmptierSpec::Greedy),
            "greedy-skip" => no_args(EmptierSpec::GreedySkip),
            "smoothed-greedy" => no_args(EmptierSpec::SmoothedGreedy),
            "threshold-blind" => {
                let args =
                    args.ok_or_else(|| Error::Parse("threshold-blind needs ell,c".into()))?;
                let parts: Vec<&str> = args.split(',').collect();
                if parts.len() != 2 {
                    return Err(Error::Parse(format!(
                        "threshold-blind needs ell,c, got {args:?}"
                    )));
                }
                let ell: Rational = parts[0].parse()?;
                let c: Rational = parts[1].parse()?;
                if ell <= Rational::zero() || c < Rational::one() {
                    return Err(Error::Parse(
                        "threshold-blind needs ell > 0 and c >= 1".into(),
                    ));
                }
                Ok(EmptierSpec::ThresholdBlind { ell, c })
            }
            "custom" => Ok(EmptierSpec::Custom(args.unwrap_or("").to_string())),
            other => Err(Error::Parse(format!("unknown emptier {other:?}"))),
        }
    }
}

impl TryFrom<String> for EmptierSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EmptierSpec> for String {
    fn from(s: EmptierSpec) -> String {
        s.to_string()
    }
}

pub fn build(config: &GameConfig) -> Result<Box<dyn Emptier>> {
    Ok(match &config.emptier {
        EmptierSpec::Greedy => Box::new(Greedy),
        EmptierSpec::GreedySkip => Box::new(GreedySkip),
        EmptierSpec::SmoothedGreedy => Box::new(SmoothedGreedy::new(config.seed)),
        EmptierSpec::ThresholdBlind { .. } => Box::new(ThresholdBlind),
        EmptierSpec::Custom(name) => {
            return Err(Error::Config(format!(
                "emptier custom:{name} has no spec-based constructor"
            )))
        }
    })
}

/// The `p` fullest cups, ties by ascending id, plain removal.
pub fn greedy_select(intermediate: &CupState, p: usize) -> EmptyMove {
    EmptyMove::plain(intermediate.top(p))
}

/// The `p` fullest cups; those under one unit are selected but not drained.
pub fn smoothed_select(intermediate: &CupState, p: usize) -> EmptyMove {
    EmptyMove::skipping(intermediate.top(p))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothedOffsets {
    pub r: Vec<Rational>,
}

impl SmoothedOffsets {
    pub fn as_state(&self) -> CupState {
        CupState::from_fills(self.r.clone()).expect("offsets are non-negative")
    }
}

/// `n` independent uniform dyadic offsets in `[0, 1)`.
pub fn smoothed_init(n: usize, rng: &mut GameRng) -> SmoothedOffsets {
    SmoothedOffsets {
        r: (0..n).map(|_| rng::dyadic_unit(rng)).collect(),
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Greedy;

impl Emptier for Greedy {
    fn select(&mut self, intermediate: &CupState, p: usize) -> EmptyMove {
        greedy_select(intermediate, p)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GreedySkip;

impl Emptier for GreedySkip {
    fn select(&mut self, intermediate: &CupState, p: usize) -> EmptyMove {
        smoothed_select(intermediate, p)
    }
}

#[derive(Clone, Debug)]
pub struct SmoothedGreedy {
    rng: GameRng,
}

impl SmoothedGreedy {
    pub fn new(seed: u64) -> Self {
        SmoothedGreedy {
            rng: rng::stream(seed, StreamLabel::Offsets),
        }
    }
}

impl Emptier for SmoothedGreedy {
    fn initial_state(&mut self, n: usize) -> CupState {
        smoothed_init(n, &mut self.rng).as_state()
    }

    fn select(&mut self, intermediate: &CupState, p: usize) -> EmptyMove {
        smoothed_select(intermediate, p)
    }

    fn uses_randomness(&self) -> bool {
        true
    }
}

/// Ignores every cup but the fullest and spends its remaining `p - 1`
/// removals on the emptiest cups. Not greedy-like once two cups are tall.
#[derive(Clone, Copy, Debug, Default)]
pub struct ThresholdBlind;

impl Emptier for ThresholdBlind {
    fn select(&mut self, intermediate: &CupState, p: usize) -> EmptyMove {
        let ranking = intermediate.ranking();
        let mut cups = vec![ranking[0]];
        cups.extend(ranking[1..].iter().rev().take(p - 1));
        EmptyMove::plain(cups)
    }
}

/// One step of the `ell`-greedy-like condition: either fewer than two cups
/// hold at least `ell`, or the move drains at least two cups holding at least
/// `ell / c`.
pub fn is_greedy_like_step(
    intermediate: &CupState,
    mv: &EmptyMove,
    ell: &Rational,
    c: &Rational,
) -> bool {
    let fills = intermediate.fills();
    let tall = fills.iter().filter(|f| *f >= ell).count();
    if tall < 2 {
        return true;
    }
    let low = ell / c;
    let drained_tall = mv
        .cups
        .iter()
        .filter(|&&id| {
            let f = &fills[id - 1];
            !mv.removal_for(f).is_zero() && *f >= low
        })
        .count();
    drained_tall >= 2
}

/// First step at which the trace breaks the greedy-like condition.
pub fn first_non_greedy_like_step(trace: &Trace, ell: &Rational, c: &Rational) -> Option<usize> {
    trace
        .records
        .iter()
        .find(|r| !is_greedy_like_step(&r.intermediate, &r.empty, ell, c))
        .map(|r| r.t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::apply_empty;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn st(f: &[&str]) -> CupState {
        CupState::parse(f).unwrap()
    }

    #[test]
    fn greedy_select_examples() {
        assert_eq!(
            greedy_select(&st(&["2", "2", "1/2", "1"]), 2).cups,
            vec![1, 2]
        );
        assert_eq!(greedy_select(&st(&["1", "2", "2"]), 1).cups, vec![2]);
        let z = CupState::zeros(4);
        let mv = greedy_select(&z, 2);
        assert_eq!(mv.cups, vec![1, 2]);
        assert_eq!(apply_empty(&z, &mv).unwrap().0, z);
    }

    #[test]
    fn smoothed_select_examples() {
        let s = st(&["23/10", "7/10", "11/10"]);
        let (post, removed) = apply_empty(&s, &smoothed_select(&s, 2)).unwrap();
        assert_eq!(post, st(&["13/10", "7/10", "1/10"]));
        assert_eq!(removed.len(), 2);

        let s = st(&["23/10", "7/10", "2/5"]);
        let mv = smoothed_select(&s, 2);
        assert_eq!(mv.cups, vec![1, 2]);
        let (post, removed) = apply_empty(&s, &mv).unwrap();
        assert_eq!(post, st(&["13/10", "7/10", "2/5"]));
        assert!(removed[&2].is_zero());

        let z = CupState::zeros(3);
        assert_eq!(apply_empty(&z, &smoothed_select(&z, 2)).unwrap().0, z);
    }

    #[test]
    fn smoothed_init_reproducible() {
        let a = smoothed_init(4, &mut rng::stream(9, StreamLabel::Offsets));
        let b = smoothed_init(4, &mut rng::stream(9, StreamLabel::Offsets));
        assert_eq!(a, b);
        assert!(a.r.iter().all(|r| !r.is_negative() && *r < Rational::one()));
        let one = smoothed_init(1, &mut rng::stream(9, StreamLabel::Offsets));
        assert_eq!(one.r.len(), 1);
        for s in 0..100u64 {
            let x = smoothed_init(4, &mut rng::stream(2 * s, StreamLabel::Offsets));
            let y = smoothed_init(4, &mut rng::stream(2 * s + 1, StreamLabel::Offsets));
            assert_ne!(x, y);
        }
    }

    #[test]
    fn greedy_like_examples() {
        let s = st(&["5", "5", "0"]);
        let (ell, c) = (q("4"), q("2"));
        assert!(is_greedy_like_step(
            &s,
            &EmptyMove::plain(vec![1, 2]),
            &ell,
            &c
        ));
        assert!(!is_greedy_like_step(
            &s,
            &EmptyMove::plain(vec![1, 3]),
            &ell,
            &c
        ));
        let s = st(&["5", "1"]);
        assert!(is_greedy_like_step(
            &s,
            &EmptyMove::plain(vec![]),
            &ell,
            &q("1")
        ));
    }

    #[test]
    fn threshold_blind_picks_fullest_and_emptiest() {
        let s = st(&["5", "5", "0", "1/2"]);
        assert_eq!(ThresholdBlind.select(&s, 2).cups, vec![1, 3]);
        assert!(!is_greedy_like_step(
            &s,
            &ThresholdBlind.select(&s, 2),
            &q("4"),
            &q("1")
        ));
    }

    #[test]
    fn spec_round_trip() {
        for s in [
            "greedy",
            "greedy-skip",
            "smoothed-greedy",
            "threshold-blind:4,2",
            "custom:x",
        ] {
            assert_eq!(s.parse::<EmptierSpec>().unwrap().to_string(), s);
        }
        assert!("greedy:1".parse::<EmptierSpec>().is_err());
        assert!("threshold-blind:4".parse::<EmptierSpec>().is_err());
        assert!("lazy".parse::<EmptierSpec>().is_err());
    }
}
