//! Brute-force reference implementations for small inputs. Everything here
//! follows the textbook definitions directly and may be exponential.

use std::collections::{HashMap, HashSet};

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::hml::{FormulaNode, FormulaStore, NodeId};
use crate::lts::{Lts, StateId};
use crate::reduction::CnfInstance;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("oracle limited to {limit} states, got {got}")]
    TooManyStates { limit: usize, got: usize },
    #[error("oracle limited to depth {limit}, got {got}")]
    DepthTooLarge { limit: usize, got: usize },
}

/// A binary relation on the states of one LTS.
#[derive(Clone, PartialEq, Eq)]
pub struct Relation {
    n: usize,
    bits: FixedBitSet,
}

impl std::fmt::Debug for Relation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.pairs()).finish()
    }
}

impl Relation {
    pub fn full(n: usize) -> Self {
        let mut bits = FixedBitSet::with_capacity(n * n);
        bits.insert_range(..);
        Relation { n, bits }
    }

    pub fn empty(n: usize) -> Self {
        Relation {
            n,
            bits: FixedBitSet::with_capacity(n * n),
        }
    }

    pub fn holds(&self, s: StateId, t: StateId) -> bool {
        self.bits.contains(s.index() * self.n + t.index())
    }

    pub fn set(&mut self, s: StateId, t: StateId, value: bool) {
        self.bits.set(s.index() * self.n + t.index(), value);
    }

    pub fn pairs(&self) -> Vec<(u32, u32)> {
        self.bits
            .ones()
            .map(|k| ((k / self.n) as u32, (k % self.n) as u32))
            .collect()
    }

    /// `R ∩ R⁻¹`.
    pub fn symmetric_part(&self) -> Relation {
        let mut out = Relation::empty(self.n);
        for (s, t) in self.pairs() {
            if self.holds(StateId(t), StateId(s)) {
                out.set(StateId(s), StateId(t), true);
            }
        }
        out
    }

    /// Equivalence classes, assuming the relation is an equivalence.
    pub fn classes(&self) -> Vec<Vec<u32>> {
        let mut out: Vec<Vec<u32>> = Vec::new();
        'states: for s in 0..self.n as u32 {
            for class in out.iter_mut() {
                if self.holds(StateId(class[0]), StateId(s)) {
                    class.push(s);
                    continue 'states;
                }
            }
            out.push(vec![s]);
        }
        out
    }
}

/// Every `s → s'` is matched by some `t → t'` with the same label and
/// `rel(s', t')`.
fn matched(lts: &Lts, s: StateId, t: StateId, rel: impl Fn(StateId, StateId) -> bool) -> bool {
    lts.outgoing(s)
        .iter()
        .all(|&(a, s2)| lts.successors(t, a).any(|t2| rel(s2, t2)))
}

/// `≃_0 … ≃_k`, each level from the previous by the two-sided successor
/// condition.
pub fn naive_kbisim(lts: &Lts, k: usize) -> Vec<Relation> {
    let n = lts.num_states();
    let mut levels = vec![Relation::full(n)];
    for _ in 0..k {
        let prev = levels.last().unwrap();
        let mut next = Relation::empty(n);
        for s in lts.states() {
            for t in lts.states() {
                let ok = matched(lts, s, t, |x, y| prev.holds(x, y)) && matched(lts, t, s, |x, y| prev.holds(x, y));
                next.set(s, t, ok);
            }
        }
        levels.push(next);
    }
    levels
}

/// Largest relation inside `start` that is closed under the one-sided
/// simulation step.
fn simulation_gfp(lts: &Lts, start: Relation) -> Relation {
    let mut rel = start;
    loop {
        let mut changed = false;
        for (s, t) in rel.pairs() {
            let (s, t) = (StateId(s), StateId(t));
            if !matched(lts, s, t, |x, y| rel.holds(x, y)) {
                rel.set(s, t, false);
                changed = true;
            }
        }
        if !changed {
            return rel;
        }
    }
}

/// Similarity `⊑`, as a greatest fixpoint.
pub fn naive_similarity(lts: &Lts) -> Relation {
    simulation_gfp(lts, Relation::full(lts.num_states()))
}

/// m-nested similarity inclusion `⊑^m`: `⊑^0` is similarity and `⊑^{m+1}`
/// is the largest simulation inside `⊑^m ∩ (⊑^m)⁻¹`.
pub fn naive_nested_similarity(lts: &Lts, m: usize) -> Relation {
    let mut rel = naive_similarity(lts);
    for _ in 0..m {
        rel = simulation_gfp(lts, rel.symmetric_part());
    }
    rel
}

/// m-nested k-similarity inclusion `⊑_k^m` by direct recursion on `(k, m)`.
pub fn naive_nested_sim(lts: &Lts, k: usize, m: usize) -> Relation {
    let n = lts.num_states();
    // table[m'] holds ⊑_{k'}^{m'} for the current k'
    let mut table: Vec<Relation> = vec![Relation::full(n); m + 1];
    for _ in 0..k {
        let prev = table.clone();
        for (mm, slot) in table.iter_mut().enumerate() {
            let mut next = Relation::empty(n);
            for s in lts.states() {
                for t in lts.states() {
                    let forth = matched(lts, s, t, |x, y| prev[mm].holds(x, y));
                    let back = mm == 0 || matched(lts, t, s, |y, x| prev[mm - 1].holds(y, x));
                    next.set(s, t, forth && back);
                }
            }
            *slot = next;
        }
    }
    table.pop().unwrap()
}

/// Reference evaluator: walks the unfolded formula tree without memoization.
pub fn naive_evaluate(store: &FormulaStore, node: NodeId, lts: &Lts) -> FixedBitSet {
    match store.node(node) {
        FormulaNode::True => lts.full_set(),
        FormulaNode::Diamond(a, c) => {
            let inner = naive_evaluate(store, *c, lts);
            let mut out = lts.empty_set();
            if let Some(a) = lts.action_id(store.action_label(*a)) {
                for s in lts.states() {
                    if lts.successors(s, a).any(|t| inner.contains(t.index())) {
                        out.insert(s.index());
                    }
                }
            }
            out
        }
        FormulaNode::Neg(c) => {
            let mut out = naive_evaluate(store, *c, lts);
            out.toggle_range(..);
            out
        }
        FormulaNode::And(cs) => {
            let mut out = lts.full_set();
            for c in cs.iter() {
                out.intersect_with(&naive_evaluate(store, *c, lts));
            }
            out
        }
    }
}

/// State limit of [`enumerate_formulas`].
pub const ENUM_MAX_STATES: usize = 8;
/// Depth limit of [`enumerate_formulas`].
pub const ENUM_MAX_DEPTH: usize = 8;

/// Per-action predecessor masks: `pre[a][s]` is the successor mask of `s`.
fn successor_masks(lts: &Lts) -> Vec<Vec<u64>> {
    lts.actions()
        .map(|a| {
            lts.states()
                .map(|s| lts.successors(s, a).fold(0u64, |m, t| m | 1 << t.index()))
                .collect()
        })
        .collect()
}

fn diamond_mask(succ: &[u64], x: u64) -> u64 {
    succ.iter()
        .enumerate()
        .fold(0, |m, (s, &out)| if out & x != 0 { m | 1 << s } else { m })
}

fn and_closure(mut set: HashSet<u64>) -> HashSet<u64> {
    let mut work: Vec<u64> = set.iter().copied().collect();
    while let Some(x) = work.pop() {
        let current: Vec<u64> = set.iter().copied().collect();
        for y in current {
            let z = x & y;
            if set.insert(z) {
                work.push(z);
            }
        }
    }
    set
}

/// Denotations of all formulas with depth at most `k` and negation depth at
/// most `m`, as state masks.
fn fragment_denotations(lts: &Lts, k: usize, m: u32) -> HashSet<u64> {
    let n = lts.num_states();
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let succ = successor_masks(lts);
    // by_depth[k'] = D(k', current m)
    let mut prev_m: Option<Vec<HashSet<u64>>> = None;
    let mut mm = 0;
    loop {
        let mut by_depth: Vec<HashSet<u64>> = Vec::with_capacity(k + 1);
        for kk in 0..=k {
            let mut gens = HashSet::from([full]);
            if kk > 0 {
                for pre in &succ {
                    for &x in &by_depth[kk - 1] {
                        gens.insert(diamond_mask(pre, x));
                    }
                }
            }
            if let Some(prev) = &prev_m {
                for &x in &prev[kk] {
                    gens.insert(!x & full);
                }
            }
            by_depth.push(and_closure(gens));
        }
        let stable = prev_m.as_ref() == Some(&by_depth);
        if stable || mm == m {
            return by_depth.pop().unwrap();
        }
        prev_m = Some(by_depth);
        mm += 1;
    }
}

fn check_bounds(lts: &Lts, depth: usize) -> Result<(), OracleError> {
    if lts.num_states() > ENUM_MAX_STATES {
        return Err(OracleError::TooManyStates {
            limit: ENUM_MAX_STATES,
            got: lts.num_states(),
        });
    }
    if depth > ENUM_MAX_DEPTH {
        return Err(OracleError::DepthTooLarge {
            limit: ENUM_MAX_DEPTH,
            got: depth,
        });
    }
    Ok(())
}

/// Whether some formula of depth at most `depth_bound` and negation depth
/// at most `neg_bound` holds in `s` but not in `t`.
pub fn enumerate_formulas(
    lts: &Lts,
    s: StateId,
    t: StateId,
    depth_bound: usize,
    neg_bound: u32,
) -> Result<bool, OracleError> {
    check_bounds(lts, depth_bound)?;
    let (sb, tb) = (1u64 << s.index(), 1u64 << t.index());
    Ok(fragment_denotations(lts, depth_bound, neg_bound)
        .into_iter()
        .any(|d| d & sb != 0 && d & tb == 0))
}

/// Whether some formula of depth at most `depth_bound`, with any number of
/// negations, tells `s` and `t` apart.
pub fn depth_distinguishable(lts: &Lts, s: StateId, t: StateId, depth_bound: usize) -> Result<bool, OracleError> {
    check_bounds(lts, depth_bound)?;
    let (sb, tb) = (1u64 << s.index(), 1u64 << t.index());
    Ok(fragment_denotations(lts, depth_bound, u32::MAX)
        .into_iter()
        .any(|d| (d & sb == 0) != (d & tb == 0)))
}

/// State limit of [`enumerate_min_formula`].
pub const MIN_FORMULA_MAX_STATES: usize = 64;

#[derive(Clone, Copy)]
enum Recipe {
    True,
    Diamond(usize, u64),
    Neg(u64),
    And(u64, u64),
}

/// A distinguishing formula of least size (number of modalities) not
/// exceeding `max_size`, built into `store`, or `None` when there is none.
/// Sizes are searched in increasing order over denotations, so the first
/// hit is minimal.
pub fn enumerate_min_formula(
    store: &mut FormulaStore,
    lts: &Lts,
    s: StateId,
    t: StateId,
    max_size: usize,
) -> Result<Option<NodeId>, OracleError> {
    let n = lts.num_states();
    if n > MIN_FORMULA_MAX_STATES {
        return Err(OracleError::TooManyStates {
            limit: MIN_FORMULA_MAX_STATES,
            got: n,
        });
    }
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let (sb, tb) = (1u64 << s.index(), 1u64 << t.index());
    let splits = |d: u64| (d & sb == 0) != (d & tb == 0);
    let succ = successor_masks(lts);

    let mut recipes: HashMap<u64, Recipe> = HashMap::new();
    let mut by_size: Vec<Vec<u64>> = Vec::new();
    recipes.insert(full, Recipe::True);
    recipes.insert(0, Recipe::Neg(full));
    by_size.push(vec![full, 0]);

    let mut found = None;
    for size in 1..=max_size {
        let mut fresh = Vec::new();
        let mut add = |d: u64, r: Recipe, fresh: &mut Vec<u64>| {
            if let std::collections::hash_map::Entry::Vacant(e) = recipes.entry(d) {
                e.insert(r);
                fresh.push(d);
            }
        };
        for (a, pre) in succ.iter().enumerate() {
            for &x in &by_size[size - 1] {
                add(diamond_mask(pre, x), Recipe::Diamond(a, x), &mut fresh);
            }
        }
        for i in 1..=size / 2 {
            for &x in &by_size[i] {
                for &y in &by_size[size - i] {
                    add(x & y, Recipe::And(x, y), &mut fresh);
                }
            }
        }
        let positive = fresh.len();
        for k in 0..positive {
            let d = fresh[k];
            add(!d & full, Recipe::Neg(d), &mut fresh);
        }
        if let Some(&d) = fresh.iter().find(|&&d| splits(d)) {
            found = Some(d);
        }
        by_size.push(fresh);
        if found.is_some() {
            break;
        }
    }
    let Some(d) = found else {
        return Ok(None);
    };

    fn build(store: &mut FormulaStore, lts: &Lts, recipes: &HashMap<u64, Recipe>, d: u64) -> NodeId {
        match recipes[&d] {
            Recipe::True => store.mk_true(),
            Recipe::Diamond(a, x) => {
                let c = build(store, lts, recipes, x);
                let a = store.action(lts.action_label(crate::lts::ActionId(a as u32)));
                store.mk_diamond(a, c)
            }
            Recipe::Neg(x) => {
                let c = build(store, lts, recipes, x);
                store.mk_neg(c)
            }
            Recipe::And(x, y) => {
                let l = build(store, lts, recipes, x);
                let r = build(store, lts, recipes, y);
                store.conjoin([l, r])
            }
        }
    }
    Ok(Some(build(store, lts, &recipes, d)))
}

/// A satisfying assignment found by trying all `2^k` assignments.
pub fn truth_table_sat(cnf: &CnfInstance) -> Option<Vec<bool>> {
    let k = cnf.num_props;
    assert!(k < 32, "truth tables are limited to 31 propositions");
    (0..1u32 << k)
        .map(|bits| (0..k).map(|i| bits >> i & 1 == 1).collect::<Vec<bool>>())
        .find(|rho| cnf.satisfied_by(rho))
}
