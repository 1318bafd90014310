//! Simulation and verification of the p-processor cup game.
//!
//! Each step a filler pours up to `p` units of water into `n` cups (at most
//! one unit per cup) and an emptier then removes up to one unit from each of
//! up to `p` cups. Every quantity is an exact rational, so the checkers in
//! [`invariants`] compare bounds with zero tolerance.

pub mod emptiers;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod fillers;
pub mod invariants;
pub mod io;
pub mod rational;
pub mod rng;
pub mod state;

pub use emptiers::EmptierSpec;
pub use engine::{
    run_game, run_game_with, EmptyMove, FillMove, Game, GameConfig, StepRecord, Trace, Visibility,
};
pub use error::{Error, Result};
pub use fillers::FillerSpec;
pub use rational::{Fill, Rational};
pub use state::{harmonic_tail, CupId, CupState};
