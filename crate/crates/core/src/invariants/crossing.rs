//! Monte Carlo estimate of how often a single deposit crosses an integer
//! threshold when the emptier uses random initial offsets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emptiers::{EmptierSpec, SmoothedGreedy};
use crate::engine::{run_game_with, FillMove, GameConfig};
use crate::error::{Error, Result};
use crate::fillers::{FillerSpec, ScriptFiller};
use crate::rational::Rational;

pub const MIN_SEEDS: usize = 100;

/// Deposits `prefix[t]` into cup 1 of a two-cup, one-processor game, then
/// the designated deposit `y`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossingScript {
    pub prefix: Vec<Rational>,
    pub y: Rational,
}

impl CrossingScript {
    pub fn new(y: Rational) -> Self {
        CrossingScript {
            prefix: ["1/3", "3/4", "2/5", "1", "5/6"]
                .iter()
                .map(|s| s.parse().unwrap())
                .collect(),
            y,
        }
    }

    pub fn moves(&self) -> Vec<FillMove> {
        self.prefix
            .iter()
            .chain(std::iter::once(&self.y))
            .map(|a| FillMove::from_pairs([(1, a.clone())]))
            .collect()
    }

    fn config(&self, seed: u64) -> GameConfig {
        GameConfig::new(
            2,
            1,
            self.prefix.len() + 1,
            FillerSpec::Custom("crossing-script".into()),
            EmptierSpec::SmoothedGreedy,
        )
        .with_seed(seed)
    }

    /// Whether the designated deposit crosses an integer in the given run.
    pub fn crosses(&self, seed: u64) -> Result<bool> {
        let cfg = self.config(seed);
        let trace = run_game_with(
            &cfg,
            Box::new(ScriptFiller::new(self.moves())),
            Box::new(SmoothedGreedy::new(seed)),
        )?;
        let h = &trace.state(self.prefix.len()).fills()[0];
        Ok((h + &self.y).floor_i128() > h.floor_i128())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingResult {
    pub y: Rational,
    pub seeds: usize,
    pub hits: usize,
    pub frequency: f64,
    /// `4 * sqrt(y (1 - y) / K)`.
    pub tolerance: f64,
    pub within: bool,
}

pub fn crossing_probability_experiment(
    script: &CrossingScript,
    seeds: &[u64],
) -> Result<CrossingResult> {
    if seeds.len() < MIN_SEEDS {
        return Err(Error::Argument(format!(
            "{} seeds is too few; need at least {MIN_SEEDS}",
            seeds.len()
        )));
    }
    if script.y.is_negative() || script.y > Rational::one() {
        return Err(Error::Argument(format!(
            "deposit {} not in [0, 1]",
            script.y
        )));
    }
    let hits = seeds
        .par_iter()
        .map(|&s| script.crosses(s))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&b| b)
        .count();
    let k = seeds.len() as f64;
    let y = script.y.to_f64();
    let frequency = hits as f64 / k;
    let tolerance = 4.0 * (y * (1.0 - y) / k).sqrt();
    Ok(CrossingResult {
        y: script.y.clone(),
        seeds: seeds.len(),
        hits,
        frequency,
        tolerance,
        within: (frequency - y).abs() <= tolerance,
    })
}
