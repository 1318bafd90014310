//! Batch experiments: parameter sweeps, lower-bound reproduction and the
//! Monte Carlo harnesses. Runs fan out over rayon and results are sorted
//! before they are returned, so output never depends on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emptiers::{first_non_greedy_like_step, EmptierSpec};
use crate::engine::{Game, GameConfig, History};
use crate::error::{Error, Result};
use crate::fillers::{anti_greedy_threshold, growth_threshold, AnchorSwapParams, FillerSpec};
use crate::invariants::MIN_SEEDS;
use crate::io::ExactValue;
use crate::rational::Rational;

pub const MIN_SWEEP_POINTS: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub ns: Vec<usize>,
    pub ps: Vec<usize>,
    pub seeds: Vec<u64>,
    pub steps: usize,
    pub fillers: Vec<FillerSpec>,
    pub emptier: EmptierSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub p: usize,
    pub filler: FillerSpec,
    pub seed: u64,
    pub max_backlog: ExactValue,
    /// `4 (1 + ln n)`.
    pub bound: f64,
    pub within_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub filler: FillerSpec,
    /// `None` pools every processor count.
    pub p: Option<usize>,
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
    /// Least-squares fits of max backlog against `ln n`.
    pub fits: Vec<Fit>,
    pub all_within_bound: bool,
}

impl SweepResult {
    pub fn fit(&self, filler: &FillerSpec, p: Option<usize>) -> Option<&Fit> {
        self.fits.iter().find(|f| &f.filler == filler && f.p == p)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "n",
            "p",
            "filler",
            "seed",
            "max_backlog",
            "max_backlog_decimal",
            "bound",
            "within_bound",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.p.to_string(),
                r.filler.to_string(),
                r.seed.to_string(),
                r.max_backlog.exact.to_string(),
                r.max_backlog.decimal.clone(),
                format!("{:.6}", r.bound),
                r.within_bound.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Least-squares line through `(x, y)`; `None` when the `x` values coincide.
pub fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let k = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

pub fn upper_gate(n: usize) -> f64 {
    4.0 * (1.0 + (n as f64).ln())
}

fn max_backlog(config: GameConfig) -> Result<Rational> {
    let mut game = Game::new(config)?.history(History::LastOnly);
    let mut max = game.current().max_fill().clone();
    while game.step()? == crate::engine::StepOutcome::Played {
        let m = game.current().max_fill();
        if *m > max {
            max = m.clone();
        }
    }
    if let Some(abort) = &game.trace().abort {
        return Err(Error::Config(format!(
            "run aborted at step {}: {:?}",
            abort.t, abort.violations
        )));
    }
    Ok(max)
}

/// Runs every `(n, p, filler, seed)` combination with `p <= n`. When neither
/// strategy uses randomness the seed cannot matter, so one run per
/// `(n, p, filler)` serves all seeds.
pub fn sweep(spec: &SweepSpec) -> Result<SweepResult> {
    let mut ns = spec.ns.clone();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < MIN_SWEEP_POINTS {
        return Err(Error::Argument(format!(
            "sweep needs at least {MIN_SWEEP_POINTS} distinct n values, got {}",
            ns.len()
        )));
    }
    if spec.seeds.is_empty() || spec.ps.is_empty() || spec.fillers.is_empty() {
        return Err(Error::Argument(
            "sweep needs seeds, p values and fillers".into(),
        ));
    }
    let mut jobs = Vec::new();
    for &n in &ns {
        for &p in &spec.ps {
            if p == 0 || p > n {
                continue;
            }
            for (fi, filler) in spec.fillers.iter().enumerate() {
                let random = filler.uses_randomness() || spec.emptier.uses_randomness();
                let seeds: &[u64] = if random {
                    &spec.seeds
                } else {
                    &spec.seeds[..1]
                };
                for &seed in seeds {
                    jobs.push((n, p, fi, seed));
                }
            }
        }
    }
    let results: Vec<((usize, usize, usize, u64), Rational)> = jobs
        .into_par_iter()
        .map(|(n, p, fi, seed)| {
            let cfg = GameConfig::new(
                n,
                p,
                spec.steps,
                spec.fillers[fi].clone(),
                spec.emptier.clone(),
            )
            .with_seed(seed);
            max_backlog(cfg).map(|m| ((n, p, fi, seed), m))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for ((n, p, fi, seed), m) in results {
        let filler = &spec.fillers[fi];
        let random = filler.uses_randomness() || spec.emptier.uses_randomness();
        let seeds: Vec<u64> = if random {
            vec![seed]
        } else {
            spec.seeds.clone()
        };
        for s in seeds {
            let bound = upper_gate(n);
            rows.push((
                fi,
                SweepRow {
                    n,
                    p,
                    filler: filler.clone(),
                    seed: s,
                    max_backlog: (&m).into(),
                    bound,
                    within_bound: m.to_f64() <= bound,
                },
            ));
        }
    }
    rows.sort_by(|a, b| (a.1.n, a.1.p, a.0, a.1.seed).cmp(&(b.1.n, b.1.p, b.0, b.1.seed)));
    let rows: Vec<SweepRow> = rows.into_iter().map(|r| r.1).collect();
    let mut fits = Vec::new();
    for filler in &spec.fillers {
        let mut groups: Vec<Option<usize>> = spec.ps.iter().map(|&p| Some(p)).collect();
        groups.push(None);
        for p in groups {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| &r.filler == filler && p.is_none_or(|p| r.p == p))
                .map(|r| ((r.n as f64).ln(), r.max_backlog.exact.to_f64()))
                .collect();
            if let Some((slope, intercept)) = least_squares(&pts) {
                fits.push(Fit {
                    filler: filler.clone(),
                    p,
                    slope,
                    intercept,
                    points: pts.len(),
                });
            }
        }
    }
    Ok(SweepResult {
        spec: spec.clone(),
        all_within_bound: rows.iter().all(|r| r.within_bound),
        rows,
        fits,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LowerBoundResult {
    pub n: usize,
    pub p: usize,
    pub emptier: EmptierSpec,
    pub seed: u64,
    /// `1/2 + ... + 1/(n - p + 1)`.
    pub threshold: ExactValue,
    /// `20 n (n - p)` steps.
    pub budget: usize,
    pub reached_at: Option<usize>,
    pub backlog_at_stop: ExactValue,
}

impl LowerBoundResult {
    pub fn reached(&self) -> bool {
        self.reached_at.is_some()
    }
}

/// Plays the growth filler against `emptier` until some cup holds the
/// threshold or the step budget runs out.
pub fn lowerbound(
    n: usize,
    p: usize,
    emptier: &EmptierSpec,
    seed: u64,
) -> Result<LowerBoundResult> {
    if p == 0 || n <= p {
        return Err(Error::Argument(format!(
            "lower bound needs 1 <= p < n (n = {n}, p = {p})"
        )));
    }
    let threshold = growth_threshold(n, p);
    let budget = 20 * n * (n - p);
    let cfg = GameConfig::new(n, p, budget, FillerSpec::Growth, emptier.clone()).with_seed(seed);
    let mut game = Game::new(cfg)?.history(History::LastOnly);
    let reached_at = game.run_until(|s| *s.max_fill() >= threshold)?;
    if let Some(abort) = &game.trace().abort {
        return Err(Error::Config(format!(
            "run aborted at step {}: {:?}",
            abort.t, abort.violations
        )));
    }
    Ok(LowerBoundResult {
        n,
        p,
        emptier: emptier.clone(),
        seed,
        threshold: (&threshold).into(),
        budget,
        reached_at,
        backlog_at_stop: game.current().max_fill().into(),
    })
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.len() < MIN_SEEDS {
        return Err(Error::Argument(format!(
            "{} seeds is too few; need at least {MIN_SEEDS}",
            seeds.len()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BacklogFrequency {
    pub experiment: String,
    pub config: GameConfig,
    pub threshold: f64,
    pub seeds: usize,
    pub hits: usize,
    pub frequency: f64,
    /// Mean over seeds of the run's largest backlog.
    pub mean_max_backlog: f64,
    /// Fraction of runs in which the emptier stayed greedy-like at the
    /// level recorded in `greedy_like_level`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub greedy_like_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub greedy_like_level: Option<f64>,
}

struct RunStats {
    max_backlog: Rational,
    greedy_like: Option<bool>,
}

fn frequency_runs(
    experiment: &str,
    base: &GameConfig,
    seeds: &[u64],
    threshold: f64,
    greedy_like: Option<(Rational, Rational)>,
) -> Result<BacklogFrequency> {
    check_seeds(seeds)?;
    let mut stats: Vec<(u64, RunStats)> = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = base.clone().with_seed(seed);
            let history = if greedy_like.is_some() {
                History::Full
            } else {
                History::LastOnly
            };
            let mut game = Game::new(cfg)?.history(history);
            let mut max = game.current().max_fill().clone();
            while game.step()? == crate::engine::StepOutcome::Played {
                let m = game.current().max_fill();
                if *m > max {
                    max = m.clone();
                }
            }
            if let Some(abort) = &game.trace().abort {
                return Err(Error::Config(format!("run aborted at step {}", abort.t)));
            }
            let gl = greedy_like
                .as_ref()
                .map(|(ell, c)| first_non_greedy_like_step(game.trace(), ell, c).is_none());
            Ok((
                seed,
                RunStats {
                    max_backlog: max,
                    greedy_like: gl,
                },
            ))
        })
        .collect::<Result<_>>()?;
    stats.sort_by_key(|s| s.0);
    let k = stats.len() as f64;
    let hits = stats
        .iter()
        .filter(|s| s.1.max_backlog.to_f64() >= threshold)
        .count();
    let mean = stats.iter().map(|s| s.1.max_backlog.to_f64()).sum::<f64>() / k;
    let greedy_like_fraction = greedy_like.as_ref().map(|_| {
        stats
            .iter()
            .filter(|s| s.1.greedy_like == Some(true))
            .count() as f64
            / k
    });
    Ok(BacklogFrequency {
        experiment: experiment.to_string(),
        config: base.clone(),
        threshold,
        seeds: seeds.len(),
        hits,
        frequency: hits as f64 / k,
        mean_max_backlog: mean,
        greedy_like_fraction,
        greedy_like_level: greedy_like.map(|(ell, _)| ell.to_f64()),
    })
}

/// How often the anchor-swap filler drives some cup to `threshold`.
pub fn anchor_swap_backlog(
    n: usize,
    p: usize,
    params: Option<AnchorSwapParams>,
    emptier: &EmptierSpec,
    threshold: f64,
    seeds: &[u64],
) -> Result<BacklogFrequency> {
    let resolved = params.unwrap_or_else(|| AnchorSwapParams::defaults(p));
    let filler = FillerSpec::AnchorSwap {
        params: Some((resolved.phases, resolved.rounds, resolved.round_len)),
    };
    let cfg = GameConfig::new(n, p, resolved.total_steps(), filler, emptier.clone());
    frequency_runs("anchor-swap-backlog", &cfg, seeds, threshold, None)
}

/// How often the anti-greedy filler drives some cup to `-1.5 + ln(ell / c)`.
/// Also reports how often the emptier stayed greedy-like at level
/// `ln ell - q`.
pub fn anti_greedy_backlog(
    n: usize,
    p: usize,
    ell: usize,
    c: &Rational,
    phases: usize,
    q: f64,
    emptier: &EmptierSpec,
    seeds: &[u64],
) -> Result<BacklogFrequency> {
    let filler = FillerSpec::AntiGreedy {
        ell,
        c: c.clone(),
        phases,
    };
    let width = (c * &Rational::from(ell)).floor_i128().max(0) as usize;
    let steps = phases * width.saturating_sub(1).max(1);
    let cfg = GameConfig::new(n, p, steps, filler, emptier.clone());
    let level = (ell as f64).ln() - q;
    let greedy_like = if level > 0.0 {
        Rational::from_f64(level).map(|l| (l, Rational::one()))
    } else {
        None
    };
    frequency_runs(
        "anti-greedy-backlog",
        &cfg,
        seeds,
        anti_greedy_threshold(ell, c),
        greedy_like,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_line() {
        let pts = [(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)];
        let (m, b) = least_squares(&pts).unwrap();
        assert!((m - 2.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
        assert!(least_squares(&[(1.0, 1.0), (1.0, 2.0)]).is_none());
    }

    #[test]
    fn lowerbound_small_cases() {
        let r = lowerbound(4, 1, &EmptierSpec::Greedy, 0).unwrap();
        assert_eq!(r.threshold.exact, "13/12".parse().unwrap());
        assert!(r.reached());
        let r = lowerbound(8, 4, &EmptierSpec::Greedy, 0).unwrap();
        assert_eq!(r.threshold.exact, "77/60".parse().unwrap());
        assert!(r.reached());
        let r = lowerbound(3, 2, &EmptierSpec::Greedy, 0).unwrap();
        assert_eq!(r.threshold.exact, "1/2".parse().unwrap());
        assert!(r.reached());
        assert!(lowerbound(3, 3, &EmptierSpec::Greedy, 0).is_err());
    }

    #[test]
    fn sweep_rejects_small_grid() {
        let spec = SweepSpec {
            ns: vec![8, 16, 32],
            ps: vec![1],
            seeds: vec![0],
            steps: 10,
            fillers: vec![FillerSpec::Growth],
            emptier: EmptierSpec::Greedy,
        };
        assert!(sweep(&spec).is_err());
    }

    #[test]
    fn zero_filler_sweep_is_flat() {
        let spec = SweepSpec {
            ns: vec![4, 8, 16, 32],
            ps: vec![1, 2],
            seeds: vec![0, 1, 2],
            steps: 20,
            fillers: vec![FillerSpec::Zero],
            emptier: EmptierSpec::Greedy,
        };
        let r = sweep(&spec).unwrap();
        assert_eq!(r.rows.len(), 4 * 2 * 3);
        assert!(r.rows.iter().all(|row| row.max_backlog.exact.is_zero()));
        assert_eq!(r.fit(&FillerSpec::Zero, None).unwrap().slope, 0.0);
    }

    #[test]
    fn monte_carlo_needs_enough_seeds() {
        let seeds: Vec<u64> = (0..99).collect();
        assert!(
            anchor_swap_backlog(16, 4, None, &EmptierSpec::SmoothedGreedy, 1.0, &seeds).is_err()
        );
    }
}
