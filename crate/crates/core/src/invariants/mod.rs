//! Executable forms of the per-trace invariants, the level accounting they
//! rest on, and the crossing-probability experiment.

mod checks;
mod crossing;
pub mod fixtures;
mod levels;

pub use checks::{
    applicable, check_av_invariant_single, check_cup_reset, check_filler_progress,
    check_fractional, check_greedy_like, check_level_conservation, check_precondition,
    check_record_constraints, check_truncated_invariant, check_working_set, default_suite,
    empirical_m, record_setting_steps, run_check, run_checks, CheckParams, Checker,
    InvariantReport, Witness,
};
pub use crossing::{crossing_probability_experiment, CrossingResult, CrossingScript, MIN_SEEDS};
pub use levels::{
    bolus, bolus_from, count_crossings, crossings_between, integer_part, is_active, level_fill,
    level_series, top_level, LevelStats,
};
