//! Baseline distinguishing formulas from a logged partition refinement.
//!
//! The refinement keeps a worklist of splitter blocks. Every split is
//! recorded, and the records form a tree of blocks rooted at `S`. A formula
//! for `s` and `t` is read off the split that first separated them: if `s`
//! is on the side with an `a`-step into the splitter block, the formula is
//! `<a>` applied to the conjunction of the formulas separating that
//! `a`-successor from every `a`-successor of `t`; otherwise it is the
//! negation of the formula for `t` and `s`.

use std::collections::{HashMap, VecDeque};

use fixedbitset::FixedBitSet;
use serde::Serialize;
use thiserror::Error;

use crate::hml::{reduce_irreducible_with, Evaluator, FormulaNode, FormulaStore, NodeId};
use crate::lts::{ActionId, Lts, StateId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SplitterStrategy {
    /// Most recently created block first.
    #[default]
    Latest,
    /// Blocks in creation order.
    Oldest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SplitRecord {
    /// Position of the record in the log.
    pub order: usize,
    pub parent: u32,
    /// States of `parent` with an `action`-step into `splitter`.
    pub marked: u32,
    pub unmarked: u32,
    pub action: ActionId,
    pub splitter: u32,
}

#[derive(Clone, Debug)]
struct BlockNode {
    parent: Option<u32>,
    depth: usize,
    split: Option<usize>,
    members: Vec<StateId>,
}

#[derive(Clone, Debug)]
pub struct SplitLog {
    records: Vec<SplitRecord>,
    blocks: Vec<BlockNode>,
    leaf_of: Vec<u32>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CleavelandError {
    #[error("states {s} and {t} are bisimilar")]
    Bisimilar { s: StateId, t: StateId },
}

/// Partition refinement from `{S}` that records every split.
pub fn cleaveland_refine(lts: &Lts, strategy: SplitterStrategy) -> SplitLog {
    let n = lts.num_states();
    let mut blocks = vec![BlockNode {
        parent: None,
        depth: 0,
        split: None,
        members: lts.states().collect(),
    }];
    let mut leaf_of = vec![0u32; n];
    let mut records = Vec::new();
    let mut work: VecDeque<u32> = VecDeque::from([0]);

    while let Some(splitter) = match strategy {
        SplitterStrategy::Latest => work.pop_back(),
        SplitterStrategy::Oldest => work.pop_front(),
    } {
        for a in lts.actions() {
            let mut pre: Vec<StateId> = Vec::new();
            let mut in_pre = FixedBitSet::with_capacity(n);
            for &v in &blocks[splitter as usize].members {
                for p in lts.predecessors(v, a) {
                    if !in_pre.put(p.index()) {
                        pre.push(p);
                    }
                }
            }
            let mut touched: Vec<u32> = pre.iter().map(|p| leaf_of[p.index()]).collect();
            touched.sort_unstable();
            touched.dedup();
            for b in touched {
                let members = &blocks[b as usize].members;
                let marked: Vec<StateId> = members.iter().copied().filter(|s| in_pre.contains(s.index())).collect();
                if marked.len() == members.len() {
                    continue;
                }
                let unmarked: Vec<StateId> = members
                    .iter()
                    .copied()
                    .filter(|s| !in_pre.contains(s.index()))
                    .collect();
                let depth = blocks[b as usize].depth + 1;
                let (m_id, u_id) = (blocks.len() as u32, blocks.len() as u32 + 1);
                for (id, part) in [(m_id, marked), (u_id, unmarked)] {
                    for s in &part {
                        leaf_of[s.index()] = id;
                    }
                    blocks.push(BlockNode {
                        parent: Some(b),
                        depth,
                        split: None,
                        members: part,
                    });
                    work.push_back(id);
                }
                blocks[b as usize].split = Some(records.len());
                records.push(SplitRecord {
                    order: records.len(),
                    parent: b,
                    marked: m_id,
                    unmarked: u_id,
                    action: a,
                    splitter,
                });
            }
        }
    }
    SplitLog {
        records,
        blocks,
        leaf_of,
    }
}

impl SplitLog {
    pub fn records(&self) -> &[SplitRecord] {
        &self.records
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// The final partition, numbered by first occurrence in state order.
    pub fn final_partition(&self) -> Vec<u32> {
        canonical(&self.leaf_of)
    }

    /// Applies the records to `{S}` again, recomputing every split from the
    /// transitions, and returns the resulting partition numbered like
    /// [`final_partition`](Self::final_partition). Panics if a record does
    /// not describe a proper split.
    pub fn replay(&self, lts: &Lts) -> Vec<u32> {
        let n = lts.num_states();
        let mut members: HashMap<u32, FixedBitSet> = HashMap::new();
        members.insert(0, lts.full_set());
        let mut leaf_of = vec![0u32; n];
        for r in &self.records {
            let parent = members[&r.parent].clone();
            let target = &members[&r.splitter];
            let mut marked = FixedBitSet::with_capacity(n);
            for s in parent.ones() {
                if lts
                    .successors(StateId::from(s), r.action)
                    .any(|t| target.contains(t.index()))
                {
                    marked.insert(s);
                }
            }
            let mut unmarked = parent.clone();
            unmarked.difference_with(&marked);
            assert!(
                !marked.is_clear() && !unmarked.is_clear(),
                "record {} is not a proper split",
                r.order
            );
            for s in marked.ones() {
                leaf_of[s] = r.marked;
            }
            for s in unmarked.ones() {
                leaf_of[s] = r.unmarked;
            }
            members.insert(r.marked, marked);
            members.insert(r.unmarked, unmarked);
        }
        canonical(&leaf_of)
    }

    /// The split that separated `s` and `t`, or `None` if they share a
    /// final block.
    pub fn separating_split(&self, s: StateId, t: StateId) -> Option<&SplitRecord> {
        let (mut x, mut y) = (self.leaf_of[s.index()], self.leaf_of[t.index()]);
        if x == y {
            return None;
        }
        let up = |b: u32| self.blocks[b as usize].parent.expect("non-root block");
        while self.blocks[x as usize].depth > self.blocks[y as usize].depth {
            x = up(x);
        }
        while self.blocks[y as usize].depth > self.blocks[x as usize].depth {
            y = up(y);
        }
        while up(x) != up(y) {
            x = up(x);
            y = up(y);
        }
        let split = self.blocks[up(x) as usize].split.expect("split parent");
        Some(&self.records[split])
    }

    fn in_block(&self, block: u32, s: StateId) -> bool {
        let mut b = self.leaf_of[s.index()];
        loop {
            if b == block {
                return true;
            }
            match self.blocks[b as usize].parent {
                Some(p) if self.blocks[p as usize].depth >= self.blocks[block as usize].depth => b = p,
                _ => return false,
            }
        }
    }
}

fn canonical(block_of: &[u32]) -> Vec<u32> {
    let mut rename: HashMap<u32, u32> = HashMap::new();
    block_of
        .iter()
        .map(|b| {
            let next = rename.len() as u32;
            *rename.entry(*b).or_insert(next)
        })
        .collect()
}

/// Formula synthesis by back-tracking a [`SplitLog`].
pub struct CleavelandGenerator<'a> {
    lts: &'a Lts,
    log: &'a SplitLog,
    store: FormulaStore,
    memo: HashMap<(StateId, StateId), NodeId>,
    calls: u64,
}

impl<'a> CleavelandGenerator<'a> {
    pub fn new(lts: &'a Lts, log: &'a SplitLog) -> Self {
        CleavelandGenerator {
            lts,
            log,
            store: FormulaStore::with_actions_of(lts),
            memo: HashMap::new(),
            calls: 0,
        }
    }

    pub fn store(&self) -> &FormulaStore {
        &self.store
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    /// The unreduced formula for `s` and `t`; it holds in `s` only.
    pub fn raw(&mut self, s: StateId, t: StateId) -> Result<NodeId, CleavelandError> {
        if let Some(&f) = self.memo.get(&(s, t)) {
            return Ok(f);
        }
        let rec = *self
            .log
            .separating_split(s, t)
            .ok_or(CleavelandError::Bisimilar { s, t })?;
        self.calls += 1;
        let f = if self.log.in_block(rec.marked, s) {
            let s2 = self
                .lts
                .successors(s, rec.action)
                .find(|&x| self.log.in_block(rec.splitter, x))
                .expect("marked states step into the splitter");
            let targets: Vec<StateId> = self.lts.successors(t, rec.action).collect();
            let mut conj = Vec::with_capacity(targets.len());
            for t2 in targets {
                conj.push(self.raw(s2, t2)?);
            }
            let body = self.store.conjoin(conj);
            self.store.mk_diamond(rec.action, body)
        } else {
            let g = self.raw(t, s)?;
            self.store.mk_neg(g)
        };
        self.memo.insert((s, t), f);
        Ok(f)
    }

    pub fn into_store(self) -> FormulaStore {
        self.store
    }
}

/// Irreducible baseline formula for `s` and `t` that holds in `s`, with the
/// store it lives in and the number of synthesis steps.
pub fn cleaveland_formula(
    lts: &Lts,
    log: &SplitLog,
    s: StateId,
    t: StateId,
) -> Result<(FormulaStore, NodeId, u64), CleavelandError> {
    let mut gen = CleavelandGenerator::new(lts, log);
    let raw = gen.raw(s, t)?;
    let calls = gen.calls();
    let mut store = gen.into_store();
    let mut eval = Evaluator::new(lts);
    let reduced = reduce_irreducible_with(&mut store, &mut eval, raw, s, t).expect("raw formula distinguishes");
    let oriented = if eval.contains(&store, reduced, s) {
        reduced
    } else if let FormulaNode::Neg(inner) = *store.node(reduced) {
        inner
    } else {
        store.mk_neg(reduced)
    };
    Ok((store, oriented, calls))
}
