//! Hand-built traces that break one invariant each. They bypass the engine's
//! legality checks, so most of them describe games no legal player produces.

use super::checks::{CheckParams, Checker};
use crate::emptiers::EmptierSpec;
use crate::engine::{EmptyMove, FillMove, GameConfig, StepRecord, Trace};
use crate::fillers::FillerSpec;
use crate::rational::Rational;
use crate::state::CupState;

fn q(s: &str) -> Rational {
    s.parse().expect("fixture literal")
}

fn st(fills: &[&str]) -> CupState {
    CupState::parse(fills).expect("fixture literal")
}

/// Builds a trace from `(fill, intermediate, empty, post)` steps; removals
/// are read off as `intermediate - post` on the selected cups.
pub fn trace_from_steps(
    config: GameConfig,
    initial: CupState,
    steps: Vec<(FillMove, CupState, EmptyMove, CupState)>,
) -> Trace {
    let records = steps
        .into_iter()
        .enumerate()
        .map(|(idx, (fill, intermediate, empty, post))| {
            let removed = empty
                .cups
                .iter()
                .map(|&c| (c, &intermediate.fills()[c - 1] - &post.fills()[c - 1]))
                .collect();
            StepRecord {
                t: idx + 1,
                fill,
                intermediate,
                empty,
                post,
                removed,
            }
        })
        .collect();
    Trace::from_parts_unchecked(config, initial, records)
}

fn config(n: usize, p: usize, emptier: EmptierSpec) -> GameConfig {
    GameConfig::new(n, p, 1, FillerSpec::Custom("fixture".into()), emptier)
}

/// A single step in which nothing is poured or removed but the post state is
/// `post`.
fn jump(n: usize, p: usize, emptier: EmptierSpec, post: &[&str]) -> Trace {
    let post = st(post);
    trace_from_steps(
        config(n, p, emptier),
        CupState::zeros(n),
        vec![(
            FillMove::new(),
            post.clone(),
            EmptyMove::plain(vec![]),
            post,
        )],
    )
}

/// A trace (and parameters) on which `check` must report a violation.
pub fn violation(check: Checker) -> (Trace, CheckParams) {
    let params = CheckParams::default();
    match check {
        Checker::Truncated => {
            // f_1 = (5/2 + 5/2 - 2) / 1 = 3 > 11/6.
            let mut t = jump(3, 1, EmptierSpec::Greedy, &["5/2", "5/2", "0"]);
            t.config.truncation = Some(q("2"));
            (t, params)
        }
        Checker::CupReset | Checker::Record | Checker::Conservation => {
            (jump(2, 1, EmptierSpec::Greedy, &["3", "0"]), params)
        }
        Checker::AvSingle | Checker::AvSingleRelaxed => {
            (jump(2, 1, EmptierSpec::Greedy, &["2", "0"]), params)
        }
        Checker::Progress => (
            jump(2, 1, EmptierSpec::Greedy, &["10", "0"]),
            CheckParams {
                d: Rational::one(),
                ..params
            },
        ),
        Checker::WorkingSet => {
            let pour = FillMove::from_pairs((1..=3).map(|c| (c, q("9/2"))));
            let s = st(&["9/2", "9/2", "9/2"]);
            let t = trace_from_steps(
                config(3, 1, EmptierSpec::Greedy),
                CupState::zeros(3),
                vec![(pour, s.clone(), EmptyMove::plain(vec![]), s)],
            );
            (
                t,
                CheckParams {
                    levels: Some(vec![2]),
                    ..params
                },
            )
        }
        Checker::Fractional => {
            let s0 = st(&["1/2", "0"]);
            let t = trace_from_steps(
                config(2, 1, EmptierSpec::SmoothedGreedy),
                s0.clone(),
                vec![(
                    FillMove::new(),
                    s0,
                    EmptyMove::skipping(vec![1]),
                    st(&["1/4", "0"]),
                )],
            );
            (t, params)
        }
        Checker::GreedyLike => {
            let t = trace_from_steps(
                config(3, 2, EmptierSpec::Custom("fixture".into())),
                st(&["5", "5", "0"]),
                vec![(
                    FillMove::new(),
                    st(&["5", "5", "0"]),
                    EmptyMove::plain(vec![1, 3]),
                    st(&["4", "5", "0"]),
                )],
            );
            (
                t,
                CheckParams {
                    ell: Some(q("4")),
                    c: q("2"),
                    ..params
                },
            )
        }
    }
}
