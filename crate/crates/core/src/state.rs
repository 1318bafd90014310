//! Cup states and the rank statistics computed from them.
//!
//! Cups are identified by 1-based ids. Ranks order cups by descending fill,
//! breaking ties by ascending id, so rank 1 is the fullest cup.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{harmonic_range, Fill, Rational};

/// 1-based cup identifier.
pub type CupId = usize;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Rational>", into = "Vec<Rational>")]
pub struct CupState {
    fills: Vec<Fill>,
}

impl TryFrom<Vec<Rational>> for CupState {
    type Error = Error;
    fn try_from(v: Vec<Rational>) -> Result<Self> {
        CupState::from_fills(v)
    }
}

impl From<CupState> for Vec<Rational> {
    fn from(s: CupState) -> Self {
        s.fills
    }
}

/// Rank order between two cups: fuller first, then lower id.
#[inline]
fn rank_order(fills: &[Fill], a: usize, b: usize) -> Ordering {
    fills[b].cmp(&fills[a]).then(a.cmp(&b))
}

impl CupState {
    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "a cup state needs at least one cup");
        CupState {
            fills: vec![Rational::zero(); n],
        }
    }

    pub fn from_fills(fills: Vec<Fill>) -> Result<Self> {
        if fills.is_empty() {
            return Err(Error::Argument("a cup state needs at least one cup".into()));
        }
        if let Some(pos) = fills.iter().position(Rational::is_negative) {
            return Err(Error::Argument(format!(
                "cup {} has negative fill {}",
                pos + 1,
                fills[pos]
            )));
        }
        Ok(CupState { fills })
    }

    /// Parses fills given as text, e.g. `["1", "5/2"]`.
    pub fn parse(fills: &[&str]) -> Result<Self> {
        CupState::from_fills(
            fills
                .iter()
                .map(|s| s.parse())
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn n(&self) -> usize {
        self.fills.len()
    }

    /// Fills indexed by `id - 1`.
    pub fn fills(&self) -> &[Fill] {
        &self.fills
    }

    pub fn fill(&self, id: CupId) -> Result<&Fill> {
        self.check_id(id)?;
        Ok(&self.fills[id - 1])
    }

    pub(crate) fn check_id(&self, id: CupId) -> Result<()> {
        if id == 0 || id > self.n() {
            return Err(Error::range("cup id", id, 1, self.n()));
        }
        Ok(())
    }

    /// Only the engine mutates states, and only with non-negative results.
    pub(crate) fn fills_mut(&mut self) -> &mut [Fill] {
        &mut self.fills
    }

    pub fn total(&self) -> Fill {
        self.fills.iter().sum()
    }

    pub fn max_fill(&self) -> &Fill {
        self.fills.iter().max().expect("non-empty state")
    }

    /// All cup ids in rank order.
    pub fn ranking(&self) -> Vec<CupId> {
        let mut idx: Vec<usize> = (0..self.n()).collect();
        idx.sort_by(|&a, &b| rank_order(&self.fills, a, b));
        idx.into_iter().map(|i| i + 1).collect()
    }

    /// Ids of the `k` fullest cups in rank order, without sorting the rest.
    pub fn top(&self, k: usize) -> Vec<CupId> {
        let k = k.min(self.n());
        if k == 0 {
            return Vec::new();
        }
        let mut idx: Vec<usize> = (0..self.n()).collect();
        if k < idx.len() {
            idx.select_nth_unstable_by(k - 1, |&a, &b| rank_order(&self.fills, a, b));
            idx.truncate(k);
        }
        idx.sort_by(|&a, &b| rank_order(&self.fills, a, b));
        idx.into_iter().map(|i| i + 1).collect()
    }

    /// Total fill of the `k` fullest cups.
    pub fn top_total(&self, k: usize) -> Fill {
        self.top(k).into_iter().map(|id| &self.fills[id - 1]).sum()
    }

    pub fn ranked(&self) -> Ranked {
        let order = self.ranking();
        let sorted: Vec<Fill> = order.iter().map(|&id| self.fills[id - 1].clone()).collect();
        let mut prefix = Vec::with_capacity(sorted.len() + 1);
        prefix.push(Rational::zero());
        for f in &sorted {
            let next = prefix.last().unwrap() + f;
            prefix.push(next);
        }
        Ranked {
            order,
            sorted,
            prefix,
        }
    }

    /// `S(i)`, the fill of the rank-`i` cup.
    pub fn rank_fill(&self, i: usize) -> Result<Fill> {
        self.check_rank(i)?;
        let id = *self.top(i).last().unwrap();
        Ok(self.fills[id - 1].clone())
    }

    /// `(tot_i, av_i)` over the `i` fullest cups.
    pub fn prefix_stats(&self, i: usize) -> Result<(Fill, Rational)> {
        self.check_rank(i)?;
        let tot = self.top_total(i);
        let av = &tot / &Rational::from(i);
        Ok((tot, av))
    }

    /// `(tot_X, av_X)` over an explicit set of cups.
    pub fn subset_stats(&self, cups: &[CupId]) -> Result<(Fill, Rational)> {
        if cups.is_empty() {
            return Err(Error::Argument("empty cup subset".into()));
        }
        let mut seen = vec![false; self.n()];
        let mut tot = Rational::zero();
        for &id in cups {
            self.check_id(id)
                .map_err(|_| Error::Argument(format!("cup id {id} not in 1..={}", self.n())))?;
            if std::mem::replace(&mut seen[id - 1], true) {
                return Err(Error::Argument(format!("cup id {id} repeated")));
            }
            tot += &self.fills[id - 1];
        }
        let av = &tot / &Rational::from(cups.len());
        Ok((tot, av))
    }

    /// The `N`-skewed average `max((tot_{p+k} - p*N) / k, 0)`.
    pub fn skewed_average(&self, k: usize, cap: &Rational, p: usize) -> Result<Rational> {
        self.ranked().skewed_average(k, cap, p)
    }

    fn check_rank(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.n() {
            return Err(Error::range("rank", i, 1, self.n()));
        }
        Ok(())
    }
}

/// A state sorted once, for repeated rank queries.
#[derive(Clone, Debug)]
pub struct Ranked {
    order: Vec<CupId>,
    sorted: Vec<Fill>,
    prefix: Vec<Fill>,
}

impl Ranked {
    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    /// Cup ids in rank order.
    pub fn order(&self) -> &[CupId] {
        &self.order
    }

    /// Fills in rank order (index 0 is rank 1).
    pub fn sorted(&self) -> &[Fill] {
        &self.sorted
    }

    /// `S(i)` for 1-based rank `i`.
    pub fn rank_fill(&self, i: usize) -> &Fill {
        &self.sorted[i - 1]
    }

    /// `tot_i`, with `tot_0 = 0`.
    pub fn tot(&self, i: usize) -> &Fill {
        &self.prefix[i]
    }

    pub fn av(&self, i: usize) -> Rational {
        &self.prefix[i] / &Rational::from(i)
    }

    /// Sum of fills for ranks `from..=to`.
    pub fn range_total(&self, from: usize, to: usize) -> Rational {
        &self.prefix[to] - &self.prefix[from - 1]
    }

    pub fn skewed_average(&self, k: usize, cap: &Rational, p: usize) -> Result<Rational> {
        if p == 0 || p >= self.n() {
            return Err(Error::range("processor count", p, 1, self.n() - 1));
        }
        if k == 0 || k > self.n() - p {
            return Err(Error::range("k", k, 1, self.n() - p));
        }
        let excess = self.tot(p + k) - &(&Rational::from(p) * cap);
        if excess.is_negative() {
            return Ok(Rational::zero());
        }
        Ok(&excess / &Rational::from(k))
    }
}

/// `1 + 1/(k+1) + ... + 1/n`.
pub fn harmonic_tail(k: usize, n: usize) -> Result<Rational> {
    if k == 0 || k > n {
        return Err(Error::range("k", k, 1, n));
    }
    Ok(&Rational::one() + &harmonic_range(k + 1, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn s(f: &[&str]) -> CupState {
        CupState::parse(f).unwrap()
    }

    #[test]
    fn rank_fill_examples() {
        let st = s(&["1", "5", "2"]);
        assert_eq!(st.rank_fill(1).unwrap(), q("5"));
        assert_eq!(st.rank_fill(3).unwrap(), q("1"));
        assert!(matches!(st.rank_fill(0), Err(Error::Range { .. })));
        assert!(matches!(st.rank_fill(4), Err(Error::Range { .. })));
        let z = CupState::zeros(4);
        for i in 1..=4 {
            assert_eq!(z.rank_fill(i).unwrap(), Rational::zero());
        }
    }

    #[test]
    fn ties_break_by_lower_id() {
        let st = s(&["1", "2", "2"]);
        assert_eq!(st.ranking(), vec![2, 3, 1]);
        assert_eq!(st.top(1), vec![2]);
    }

    #[test]
    fn prefix_stats_examples() {
        assert_eq!(
            s(&["1", "5", "2"]).prefix_stats(2).unwrap(),
            (q("7"), q("7/2"))
        );
        assert_eq!(
            CupState::zeros(3).prefix_stats(3).unwrap(),
            (q("0"), q("0"))
        );
        assert_eq!(
            s(&["4", "3", "2", "1"]).prefix_stats(4).unwrap(),
            (q("10"), q("5/2"))
        );
    }

    #[test]
    fn subset_stats_examples() {
        let st = s(&["1", "5", "2"]);
        assert_eq!(st.subset_stats(&[1, 3]).unwrap(), (q("3"), q("3/2")));
        assert_eq!(st.subset_stats(&[2]).unwrap(), (q("5"), q("5")));
        assert_eq!(
            CupState::zeros(3).subset_stats(&[1, 2, 3]).unwrap(),
            (q("0"), q("0"))
        );
        assert!(matches!(st.subset_stats(&[]), Err(Error::Argument(_))));
        assert!(matches!(st.subset_stats(&[4]), Err(Error::Argument(_))));
        assert!(matches!(st.subset_stats(&[1, 1]), Err(Error::Argument(_))));
    }

    #[test]
    fn skewed_average_examples() {
        let st = s(&["4", "3", "2", "1"]);
        assert_eq!(st.skewed_average(2, &q("3"), 2).unwrap(), q("2"));
        assert_eq!(st.skewed_average(2, &q("6"), 2).unwrap(), q("0"));
        let z = CupState::zeros(5);
        for k in 1..=3 {
            assert_eq!(z.skewed_average(k, &q("0"), 2).unwrap(), q("0"));
        }
        assert!(matches!(
            st.skewed_average(3, &q("3"), 2),
            Err(Error::Range { .. })
        ));
        assert!(matches!(
            st.skewed_average(0, &q("3"), 2),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn harmonic_tail_examples() {
        assert_eq!(harmonic_tail(1, 3).unwrap(), q("11/6"));
        assert_eq!(harmonic_tail(4, 4).unwrap(), q("1"));
        assert_eq!(harmonic_tail(2, 4).unwrap(), q("19/12"));
        assert!(harmonic_tail(5, 4).is_err());
    }

    #[test]
    fn negative_fill_rejected() {
        assert!(CupState::parse(&["1", "-1/2"]).is_err());
    }
}
