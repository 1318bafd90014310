//! Level-`i` accounting: active cups, integer fill and threshold crossings.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::engine::Trace;
use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::state::CupId;

/// `h^(i) = max(fill - 2(i - 1), 0)`.
pub fn level_fill(fill: &Rational, i: usize) -> Rational {
    let h = fill - &Rational::from(2 * (i - 1));
    if h.is_negative() {
        Rational::zero()
    } else {
        h
    }
}

/// A cup's share of the integer fill, `max(floor(h - 1), 0)`.
pub fn integer_part(h: &Rational) -> u64 {
    (h.floor_i128() - 1).max(0) as u64
}

/// Integers `s >= 2` with `h < s <= h + f`.
pub fn crossings_between(h: &Rational, f: &Rational) -> u64 {
    let top = (h + f).floor_i128();
    let bottom = h.floor_i128().max(1);
    (top - bottom).max(0) as u64
}

pub fn is_active(fill: &Rational, i: usize) -> bool {
    *fill >= Rational::from(2 * (i - 1))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: usize,
    /// `A(t)` for `t = 0..=T`.
    pub active: Vec<usize>,
    /// `T(t)` for `t = 0..=T`.
    pub integer_fill: Vec<u64>,
    /// Crossings during step `t`; index 0 is unused and zero.
    pub crossings: Vec<u64>,
    /// Cups crossing at least once during step `t`.
    pub crossing_cups: Vec<Vec<CupId>>,
    /// Drained cups whose intermediate level fill was at least 2.
    pub active_drains: Vec<u64>,
    /// Running maximum of `A(t)`.
    pub max_active: usize,
}

impl LevelStats {
    pub fn steps(&self) -> usize {
        self.crossings.len() - 1
    }

    /// Crossings over steps `t0..=t1`.
    pub fn crossings_in(&self, t0: usize, t1: usize) -> u64 {
        self.crossings[t0..=t1].iter().sum()
    }
}

fn check_level(i: usize) -> Result<()> {
    if i == 0 {
        return Err(Error::range("level", 0, 1, usize::MAX));
    }
    Ok(())
}

pub fn level_series(trace: &Trace, i: usize) -> Result<LevelStats> {
    check_level(i)?;
    let len = trace.len();
    let mut stats = LevelStats {
        level: i,
        active: Vec::with_capacity(len + 1),
        integer_fill: Vec::with_capacity(len + 1),
        crossings: vec![0; len + 1],
        crossing_cups: vec![Vec::new(); len + 1],
        active_drains: vec![0; len + 1],
        max_active: 0,
    };
    let summarize = |stats: &mut LevelStats, fills: &[Rational]| {
        let mut a = 0;
        let mut tf = 0;
        for f in fills {
            if is_active(f, i) {
                a += 1;
                tf += integer_part(&level_fill(f, i));
            }
        }
        stats.max_active = stats.max_active.max(a);
        stats.active.push(a);
        stats.integer_fill.push(tf);
    };
    summarize(&mut stats, trace.initial.fills());
    for (idx, rec) in trace.records.iter().enumerate() {
        let t = idx + 1;
        let prev = trace.state(t - 1).fills();
        for (&cup, f) in &rec.fill.amounts {
            let c = crossings_between(&level_fill(&prev[cup - 1], i), f);
            if c > 0 {
                stats.crossings[t] += c;
                stats.crossing_cups[t].push(cup);
            }
        }
        let two = Rational::from(2);
        stats.active_drains[t] = rec
            .drained()
            .filter(|&c| level_fill(&rec.intermediate.fills()[c - 1], i) >= two)
            .count() as u64;
        summarize(&mut stats, rec.post.fills());
    }
    Ok(stats)
}

/// Highest level at which any state of the trace has a non-zero level fill.
pub fn top_level(trace: &Trace) -> usize {
    let mut max = trace.initial.max_fill().clone();
    for r in &trace.records {
        for m in [r.intermediate.max_fill(), r.post.max_fill()] {
            if *m > max {
                max = m.clone();
            }
        }
    }
    (max.floor_i128().max(0) as usize) / 2 + 1
}

fn check_interval(trace: &Trace, t0: usize, t1: usize) -> Result<()> {
    if t0 == 0 || t0 > t1 || t1 > trace.len() {
        return Err(Error::Argument(format!(
            "interval [{t0}, {t1}] not within steps 1..={}",
            trace.len()
        )));
    }
    Ok(())
}

/// Crossings over steps `t0..=t1` and the cups they occurred in.
pub fn count_crossings(
    trace: &Trace,
    i: usize,
    t0: usize,
    t1: usize,
) -> Result<(u64, BTreeSet<CupId>)> {
    check_level(i)?;
    check_interval(trace, t0, t1)?;
    let mut count = 0;
    let mut cups = BTreeSet::new();
    for t in t0..=t1 {
        let prev = trace.state(t - 1).fills();
        for (&cup, f) in &trace.records[t - 1].fill.amounts {
            let c = crossings_between(&level_fill(&prev[cup - 1], i), f);
            if c > 0 {
                count += c;
                cups.insert(cup);
            }
        }
    }
    Ok((count, cups))
}

/// `max(crossings - p * (t1 - t0 + 1), 0)`.
pub fn bolus(trace: &Trace, i: usize, t0: usize, t1: usize) -> Result<u64> {
    let (count, _) = count_crossings(trace, i, t0, t1)?;
    Ok(bolus_from(count, trace.config.p, t1 - t0 + 1))
}

pub fn bolus_from(crossings: u64, p: usize, len: usize) -> u64 {
    crossings.saturating_sub((p * len) as u64)
}
