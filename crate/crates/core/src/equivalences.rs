//! k-bisimilarity by iterated partition refinement, the `dist` and `dirdist`
//! measures, and the splitter-pair sets built on them.

use std::collections::HashMap;
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Serialize, Serializer};

use crate::lts::{ActionId, Lts, StateId};

/// A natural number or ∞; ∞ compares above every finite value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtNat {
    Finite(u32),
    Infinite,
}

impl ExtNat {
    pub fn finite(self) -> Option<u32> {
        match self {
            ExtNat::Finite(n) => Some(n),
            ExtNat::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == ExtNat::Infinite
    }
}

impl From<u32> for ExtNat {
    fn from(n: u32) -> Self {
        ExtNat::Finite(n)
    }
}

impl fmt::Display for ExtNat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtNat::Finite(n) => write!(f, "{n}"),
            ExtNat::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtNat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtNat::Finite(n) => serializer.serialize_u32(*n),
            ExtNat::Infinite => serializer.serialize_str("inf"),
        }
    }
}

/// `spl_a(U, V)`: the states of `u` with an `a`-transition into `v`.
pub fn split_on(lts: &Lts, u: &FixedBitSet, a: ActionId, v: &FixedBitSet) -> FixedBitSet {
    let mut out = lts.empty_set();
    for s in u.ones() {
        if lts.successors(StateId::from(s), a).any(|t| v.contains(t.index())) {
            out.insert(s);
        }
    }
    out
}

/// The partitions π_0 … π_K, where π_i induces i-bisimilarity and π_K is
/// stable. Each level maps a state to its block id; ids are numbered by
/// first occurrence in state order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionSequence {
    levels: Vec<Vec<u32>>,
    block_counts: Vec<usize>,
}

/// Working partition for one `Refine` round.
struct Working {
    block_of: Vec<u32>,
    members: Vec<Vec<StateId>>,
}

impl Working {
    fn from_level(level: &[u32], count: usize) -> Self {
        let mut members = vec![Vec::new(); count];
        for (s, &b) in level.iter().enumerate() {
            members[b as usize].push(StateId::from(s));
        }
        Working {
            block_of: level.to_vec(),
            members,
        }
    }
}

fn canonical(block_of: &[u32]) -> (Vec<u32>, usize) {
    let mut rename: HashMap<u32, u32> = HashMap::new();
    let level = block_of
        .iter()
        .map(|b| {
            let next = rename.len() as u32;
            *rename.entry(*b).or_insert(next)
        })
        .collect();
    (level, rename.len())
}

/// One `Refine` round over the partition `prev`. For every action in id
/// order and every old block in id order, each current block is split by
/// `spl_a(B, B')`. `observe` sees the working block assignment after every
/// split.
pub fn refine_step_observed(lts: &Lts, prev: &[u32], mut observe: impl FnMut(&[u32])) -> Vec<u32> {
    let old_count = prev.iter().map(|&b| b as usize + 1).max().unwrap_or(0);
    let old = Working::from_level(prev, old_count);
    let mut cur = Working::from_level(prev, old_count);
    let n = lts.num_states();
    let mut mark = vec![u32::MAX; n];
    let mut stamp = 0u32;
    let mut hits: HashMap<u32, Vec<StateId>> = HashMap::new();

    for a in lts.actions() {
        for splitter in &old.members {
            stamp += 1;
            hits.clear();
            for &v in splitter {
                for p in lts.predecessors(v, a) {
                    if mark[p.index()] != stamp {
                        mark[p.index()] = stamp;
                        hits.entry(cur.block_of[p.index()]).or_default().push(p);
                    }
                }
            }
            let mut touched: Vec<u32> = hits.keys().copied().collect();
            touched.sort_unstable();
            for b in touched {
                let c = &hits[&b];
                if c.len() == cur.members[b as usize].len() {
                    continue;
                }
                let fresh = cur.members.len() as u32;
                for &s in c {
                    cur.block_of[s.index()] = fresh;
                }
                let rest: Vec<StateId> = cur.members[b as usize]
                    .iter()
                    .copied()
                    .filter(|s| cur.block_of[s.index()] == b)
                    .collect();
                cur.members[b as usize] = rest;
                cur.members.push(c.clone());
                observe(&cur.block_of);
            }
        }
    }
    canonical(&cur.block_of).0
}

/// One `Refine` round.
pub fn refine_step(lts: &Lts, prev: &[u32]) -> Vec<u32> {
    refine_step_observed(lts, prev, |_| {})
}

/// Runs refinement from `{S}` until a round no longer splits anything.
pub fn refine_sequence(lts: &Lts) -> PartitionSequence {
    let n = lts.num_states();
    let mut levels = vec![vec![0u32; n]];
    let mut block_counts = vec![usize::from(n > 0)];
    loop {
        let next = refine_step(lts, levels.last().unwrap());
        let count = next.iter().map(|&b| b as usize + 1).max().unwrap_or(0);
        if count == *block_counts.last().unwrap() {
            break;
        }
        levels.push(next);
        block_counts.push(count);
    }
    PartitionSequence { levels, block_counts }
}

impl PartitionSequence {
    /// The level K at which the sequence is stable.
    pub fn stable_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn num_states(&self) -> usize {
        self.levels[0].len()
    }

    /// π_i as a state-to-block map; levels beyond K give π_K.
    pub fn level(&self, i: usize) -> &[u32] {
        &self.levels[i.min(self.stable_level())]
    }

    pub fn num_blocks(&self, i: usize) -> usize {
        self.block_counts[i.min(self.stable_level())]
    }

    pub fn block(&self, i: usize, s: StateId) -> u32 {
        self.level(i)[s.index()]
    }

    /// `s ∼_{π_i} t`.
    pub fn related(&self, i: usize, s: StateId, t: StateId) -> bool {
        self.block(i, s) == self.block(i, t)
    }

    /// Least `i` with `s ≁_{π_i} t`, or ∞.
    pub fn dist(&self, s: StateId, t: StateId) -> ExtNat {
        let k = self.stable_level();
        if self.related(k, s, t) {
            return ExtNat::Infinite;
        }
        // related at 0, unrelated at k, and once apart never together again
        let (mut lo, mut hi) = (0, k);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.related(mid, s, t) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        ExtNat::Finite(hi as u32)
    }

    /// Level `i` as a list of blocks, each a sorted list of state indices,
    /// in block-id order.
    pub fn blocks(&self, i: usize) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.num_blocks(i)];
        for (s, &b) in self.level(i).iter().enumerate() {
            out[b as usize].push(s as u32);
        }
        out
    }

    /// Every level as `[level][block][state]`.
    pub fn dump(&self) -> Vec<Vec<Vec<u32>>> {
        (0..=self.stable_level()).map(|i| self.blocks(i)).collect()
    }
}

/// `splpairs_i(s, t)`: the `a`-successors of `s` that are at most
/// `(i-1)`-bisimilar to every `a`-successor of `t`.
pub fn splpairs(lts: &Lts, seq: &PartitionSequence, i: usize, s: StateId, t: StateId) -> Vec<(ActionId, StateId)> {
    assert!(i >= 1, "splpairs is defined for levels i >= 1");
    lts.outgoing(s)
        .iter()
        .copied()
        .filter(|&(a, s2)| lts.successors(t, a).all(|t2| !seq.related(i - 1, s2, t2)))
        .collect()
}

/// Memo table for `dirdist`, filled on demand.
pub struct DirDistTable<'a> {
    lts: &'a Lts,
    seq: &'a PartitionSequence,
    memo: HashMap<(u32, u32, u32), ExtNat>,
}

impl<'a> DirDistTable<'a> {
    pub fn new(lts: &'a Lts, seq: &'a PartitionSequence) -> Self {
        DirDistTable {
            lts,
            seq,
            memo: HashMap::new(),
        }
    }

    pub fn lts(&self) -> &'a Lts {
        self.lts
    }

    pub fn seq(&self) -> &'a PartitionSequence {
        self.seq
    }

    /// Number of memoized entries.
    pub fn len(&self) -> usize {
        self.memo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memo.is_empty()
    }

    /// `dirdist_i(s, t)`: the least `j` with `s` not `j`-nested
    /// `i`-similar to `t`, or ∞ when `s ≃_i t`.
    pub fn dirdist(&mut self, i: usize, s: StateId, t: StateId) -> ExtNat {
        if self.seq.related(i, s, t) {
            return ExtNat::Infinite;
        }
        let key = (i as u32, s.0, t.0);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let lts = self.lts;
        let mut best: Option<u32> = None;
        for (a, s2) in splpairs(lts, self.seq, i, s, t) {
            let mut x = 0;
            for t2 in lts.successors(t, a) {
                x = x.max(self.finite_below(i, s2, t2));
            }
            best = Some(best.map_or(x, |b| b.min(x)));
        }
        for (a, t2) in splpairs(lts, self.seq, i, t, s) {
            let mut x = 1;
            for s2 in lts.successors(s, a) {
                x = x.max(self.finite_below(i, t2, s2) + 1);
            }
            best = Some(best.map_or(x, |b| b.min(x)));
        }
        let value = ExtNat::Finite(best.expect("states apart at level i have a splitting pair"));
        self.memo.insert(key, value);
        value
    }

    fn finite_below(&mut self, i: usize, s: StateId, t: StateId) -> u32 {
        self.dirdist(i - 1, s, t)
            .finite()
            .expect("splitting pairs are apart one level down")
    }

    /// `ĥat-splpairs_i^j(s, t)`.
    pub fn hat_splpairs(&mut self, i: usize, j: u32, s: StateId, t: StateId) -> Vec<(ActionId, StateId)> {
        let lts = self.lts;
        splpairs(lts, self.seq, i, s, t)
            .into_iter()
            .filter(|&(a, s2)| {
                lts.successors(t, a)
                    .all(|t2| self.dirdist(i - 1, s2, t2) <= ExtNat::Finite(j))
            })
            .collect()
    }

    /// `s ⊑_i^m t`, decided as `dirdist_i(s, t) > m`.
    pub fn nested_sim_holds(&mut self, i: usize, m: u32, s: StateId, t: StateId) -> bool {
        self.dirdist(i, s, t) > ExtNat::Finite(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::{gen_chain_a, gen_figure_m, gen_ladder_b, ladder_x, ladder_y, LtsBuilder};

    fn set(lts: &Lts, states: &[u32]) -> FixedBitSet {
        let mut s = lts.empty_set();
        for &x in states {
            s.insert(x as usize);
        }
        s
    }

    fn x(i: u32) -> StateId {
        StateId(i)
    }

    #[test]
    fn split_on_examples() {
        let lts = gen_chain_a(3);
        let a = lts.action_id("a").unwrap();
        let empty = lts.empty_set();
        assert!(split_on(&lts, &empty, a, &lts.full_set()).is_clear());
        let got = split_on(&lts, &set(&lts, &[1, 0]), a, &set(&lts, &[0]));
        assert_eq!(got.ones().collect::<Vec<_>>(), vec![1]);
        let all = split_on(&lts, &lts.full_set(), a, &lts.full_set());
        assert_eq!(all.ones().collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn chain_levels() {
        let lts = gen_chain_a(3);
        let seq = refine_sequence(&lts);
        assert_eq!(seq.stable_level(), 3);
        assert_eq!(seq.blocks(1), vec![vec![0], vec![1, 2, 3]]);
        assert_eq!(seq.num_blocks(3), 4);
        assert_eq!(seq.dump().len(), 4);
    }

    #[test]
    fn single_state_is_stable_at_zero() {
        let lts = LtsBuilder::new(1).build();
        let seq = refine_sequence(&lts);
        assert_eq!(seq.stable_level(), 0);
        assert_eq!(seq.blocks(0), vec![vec![0]]);
    }

    #[test]
    fn chain_dist() {
        for n in 1..=12u32 {
            let lts = gen_chain_a(n as usize);
            let seq = refine_sequence(&lts);
            assert_eq!(seq.dist(x(n), x(n - 1)), ExtNat::Finite(n));
            assert_eq!(seq.dist(x(n), x(n)), ExtNat::Infinite);
        }
    }

    #[test]
    fn figure_m_dist_and_splpairs() {
        let lts = gen_figure_m();
        let seq = refine_sequence(&lts);
        assert_eq!(seq.dist(x(0), x(1)), ExtNat::Finite(1));
        let b = lts.action_id("b").unwrap();
        assert!(splpairs(&lts, &seq, 1, x(1), x(0)).contains(&(b, x(0))));
        assert!(splpairs(&lts, &seq, 1, x(0), x(1)).is_empty());
    }

    #[test]
    fn chain_splpairs_and_dirdist() {
        let lts = gen_chain_a(3);
        let seq = refine_sequence(&lts);
        let a = lts.action_id("a").unwrap();
        assert_eq!(splpairs(&lts, &seq, 3, x(3), x(2)), vec![(a, x(2))]);
        let mut dd = DirDistTable::new(&lts, &seq);
        assert_eq!(dd.dirdist(3, x(3), x(2)), ExtNat::Finite(0));
        assert_eq!(dd.dirdist(3, x(2), x(3)), ExtNat::Finite(1));
        for s in lts.states() {
            for t in lts.states() {
                assert_eq!(dd.dirdist(0, s, t), ExtNat::Infinite);
                assert!(dd.nested_sim_holds(0, 5, s, t));
            }
        }
    }

    #[test]
    fn ladder_dirdist() {
        let n = 3;
        let lts = gen_ladder_b(n);
        let seq = refine_sequence(&lts);
        let (xs, ys) = (ladder_x(n), ladder_y(n, n));
        let i = seq.dist(xs, ys).finite().unwrap() as usize;
        let mut dd = DirDistTable::new(&lts, &seq);
        assert_eq!(dd.dirdist(i, xs, ys), ExtNat::Finite(3));
        assert!(!dd.hat_splpairs(i, 3, xs, ys).is_empty());
        let k = seq.stable_level();
        assert!(dd.nested_sim_holds(k, 2, xs, ys));
        assert!(!dd.nested_sim_holds(k, 3, xs, ys));
    }

    #[test]
    fn ext_nat_order_and_json() {
        assert!(ExtNat::Finite(u32::MAX) < ExtNat::Infinite);
        assert_eq!(serde_json::to_string(&ExtNat::Finite(3)).unwrap(), "3");
        assert_eq!(serde_json::to_string(&ExtNat::Infinite).unwrap(), "\"inf\"");
    }
}
