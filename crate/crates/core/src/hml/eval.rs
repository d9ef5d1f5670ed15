use std::collections::HashSet;

use fixedbitset::FixedBitSet;

use super::{FormulaNode, FormulaStore, NodeId};
use crate::lts::{ActionId, Lts, StateId};

/// Memoizing evaluator of the formulas of one store over one LTS.
///
/// Store actions are matched to LTS actions by label; a diamond on a label
/// the LTS does not have denotes the empty set.
pub struct Evaluator<'a> {
    lts: &'a Lts,
    store_uid: Option<u64>,
    action_map: Vec<Option<ActionId>>,
    cache: Vec<Option<FixedBitSet>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(lts: &'a Lts) -> Self {
        Evaluator {
            lts,
            store_uid: None,
            action_map: Vec::new(),
            cache: Vec::new(),
        }
    }

    pub fn lts(&self) -> &'a Lts {
        self.lts
    }

    fn bind(&mut self, store: &FormulaStore) {
        match self.store_uid {
            None => self.store_uid = Some(store.uid()),
            Some(uid) => assert_eq!(uid, store.uid(), "evaluator used with a different formula store"),
        }
        while self.action_map.len() < store.labels().len() {
            let label = &store.labels()[self.action_map.len()];
            self.action_map.push(self.lts.action_id(label));
        }
        if self.cache.len() < store.len() {
            self.cache.resize(store.len(), None);
        }
    }

    /// `⟦node⟧` as a bitset over states.
    pub fn eval(&mut self, store: &FormulaStore, node: NodeId) -> &FixedBitSet {
        self.bind(store);
        if self.cache[node.index()].is_none() {
            let mut pending = Vec::new();
            let mut seen = HashSet::new();
            let mut stack = vec![node];
            while let Some(n) = stack.pop() {
                if self.cache[n.index()].is_some() || !seen.insert(n) {
                    continue;
                }
                pending.push(n);
                stack.extend_from_slice(store.node(n).children());
            }
            // children have smaller ids than parents
            pending.sort_unstable();
            for n in pending {
                let set = self.compute(store, n);
                self.cache[n.index()] = Some(set);
            }
        }
        self.cache[node.index()].as_ref().unwrap()
    }

    fn compute(&self, store: &FormulaStore, n: NodeId) -> FixedBitSet {
        let get = |c: &NodeId| self.cache[c.index()].as_ref().unwrap();
        match store.node(n) {
            FormulaNode::True => self.lts.full_set(),
            FormulaNode::Diamond(a, c) => {
                let mut set = self.lts.empty_set();
                if let Some(a) = self.action_map[a.index()] {
                    for u in get(c).ones() {
                        for p in self.lts.predecessors(StateId::from(u), a) {
                            set.insert(p.index());
                        }
                    }
                }
                set
            }
            FormulaNode::Neg(c) => {
                let mut set = get(c).clone();
                set.toggle_range(..);
                set
            }
            FormulaNode::And(cs) => {
                let mut set = get(&cs[0]).clone();
                for c in cs[1..].iter() {
                    set.intersect_with(get(c));
                }
                set
            }
        }
    }

    pub fn contains(&mut self, store: &FormulaStore, node: NodeId, s: StateId) -> bool {
        self.eval(store, node).contains(s.index())
    }
}

/// `⟦node⟧` over `lts`, as a fresh bitset.
pub fn evaluate(store: &FormulaStore, node: NodeId, lts: &Lts) -> FixedBitSet {
    Evaluator::new(lts).eval(store, node).clone()
}
