//! Hennessy–Milner logic formulas as hash-consed shared terms.
//!
//! Every formula lives in a [`FormulaStore`]. Structurally equal formulas get
//! the same [`NodeId`], children are always created before their parents, and
//! conjunctions are kept n-ary, flattened, sorted and duplicate free. Double
//! negation is left alone so that metrics of generated formulas are exactly
//! those of the construction.

mod eval;
mod reduce;
mod text;

pub use eval::{evaluate, Evaluator};
pub use reduce::{reduce_irreducible, reduce_irreducible_with};
pub use text::{parse_formula, render, RenderStyle};

#[cfg(test)]
pub(crate) use reduce::tests::single_replacements;

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::lts::{ActionId, Lts, StateId, TraceWord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct NodeId(u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum FormulaNode {
    True,
    Diamond(ActionId, NodeId),
    Neg(NodeId),
    /// At least two conjuncts, sorted, distinct, none of them `True` or `And`.
    And(Box<[NodeId]>),
}

impl FormulaNode {
    pub fn children(&self) -> &[NodeId] {
        match self {
            FormulaNode::True => &[],
            FormulaNode::Diamond(_, c) | FormulaNode::Neg(c) => std::slice::from_ref(c),
            FormulaNode::And(cs) => cs,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HmlError {
    #[error("empty conjunction; use `true` explicitly")]
    EmptyConjunction,
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unfolded formula has more than {limit} nodes; use the equations style")]
    TooLarge { limit: u64 },
    #[error("formula does not distinguish the given states")]
    NotDistinguishing,
}

/// Formula metrics. `size` counts modalities of the unfolded tree and can be
/// exponential in the number of stored nodes; `dag_size` counts distinct
/// diamond nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Metrics {
    #[serde(serialize_with = "serialize_decimal")]
    pub size: BigUint,
    pub dag_size: usize,
    pub depth: usize,
    pub negdepth: usize,
}

fn serialize_decimal<S: Serializer>(value: &BigUint, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_str(&value.to_string())
}

#[derive(Clone, Debug)]
struct NodeStats {
    size: BigUint,
    depth: usize,
    negdepth: usize,
    /// Saturating node count of the unfolded tree.
    tree_nodes: u64,
}

static NEXT_STORE_UID: AtomicU64 = AtomicU64::new(1);

/// Hash-consed table of formula nodes with its own action-label table.
#[derive(Debug)]
pub struct FormulaStore {
    uid: u64,
    labels: Vec<String>,
    label_index: HashMap<String, ActionId>,
    nodes: Vec<FormulaNode>,
    index: HashMap<FormulaNode, NodeId>,
    stats: RefCell<Vec<NodeStats>>,
}

impl Default for FormulaStore {
    fn default() -> Self {
        Self::new()
    }
}

impl FormulaStore {
    pub fn new() -> Self {
        let mut store = FormulaStore {
            uid: NEXT_STORE_UID.fetch_add(1, Ordering::Relaxed),
            labels: Vec::new(),
            label_index: HashMap::new(),
            nodes: Vec::new(),
            index: HashMap::new(),
            stats: RefCell::new(Vec::new()),
        };
        store.intern(FormulaNode::True);
        store
    }

    /// A store whose action ids coincide with those of `lts`.
    pub fn with_actions_of(lts: &Lts) -> Self {
        let mut store = Self::new();
        for label in lts.labels() {
            store.action(label);
        }
        store
    }

    pub(crate) fn uid(&self) -> u64 {
        self.uid
    }

    /// Interns an action label.
    pub fn action(&mut self, label: &str) -> ActionId {
        if let Some(&a) = self.label_index.get(label) {
            return a;
        }
        let a = ActionId(self.labels.len() as u32);
        self.labels.push(label.to_string());
        self.label_index.insert(label.to_string(), a);
        a
    }

    pub fn action_label(&self, a: ActionId) -> &str {
        &self.labels[a.index()]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &FormulaNode {
        &self.nodes[id.index()]
    }

    fn intern(&mut self, node: FormulaNode) -> NodeId {
        if let Some(&id) = self.index.get(&node) {
            return id;
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(node.clone());
        self.index.insert(node, id);
        id
    }

    pub fn mk_true(&mut self) -> NodeId {
        NodeId(0)
    }

    pub fn is_true(&self, id: NodeId) -> bool {
        id == NodeId(0)
    }

    pub fn mk_diamond(&mut self, a: ActionId, child: NodeId) -> NodeId {
        self.intern(FormulaNode::Diamond(a, child))
    }

    pub fn mk_neg(&mut self, child: NodeId) -> NodeId {
        self.intern(FormulaNode::Neg(child))
    }

    /// Conjunction of `children`, flattened and deduplicated. A single
    /// conjunct is returned as is; `true` conjuncts are dropped.
    pub fn mk_and(&mut self, children: impl IntoIterator<Item = NodeId>) -> Result<NodeId, HmlError> {
        let children: Vec<NodeId> = children.into_iter().collect();
        if children.is_empty() {
            return Err(HmlError::EmptyConjunction);
        }
        Ok(self.conjoin(children))
    }

    /// Like [`mk_and`](Self::mk_and) but the empty conjunction is `true`.
    pub fn conjoin(&mut self, children: impl IntoIterator<Item = NodeId>) -> NodeId {
        let mut flat = Vec::new();
        for c in children {
            match &self.nodes[c.index()] {
                FormulaNode::True => {}
                FormulaNode::And(cs) => flat.extend_from_slice(cs),
                _ => flat.push(c),
            }
        }
        flat.sort_unstable();
        flat.dedup();
        match flat.len() {
            0 => self.mk_true(),
            1 => flat[0],
            _ => self.intern(FormulaNode::And(flat.into_boxed_slice())),
        }
    }

    /// Nodes reachable from `root`, each once, children before parents.
    pub fn reachable(&self, root: NodeId) -> Vec<NodeId> {
        let mut seen = HashSet::new();
        let mut stack = vec![root];
        let mut out = Vec::new();
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                out.push(n);
                stack.extend_from_slice(self.node(n).children());
            }
        }
        out.sort_unstable();
        out
    }

    fn stats(&self, id: NodeId) -> NodeStats {
        let mut stats = self.stats.borrow_mut();
        // ids are topologically ordered, so filling the prefix in order
        // always finds children already computed.
        while stats.len() <= id.index() {
            let next = match &self.nodes[stats.len()] {
                FormulaNode::True => NodeStats {
                    size: BigUint::zero(),
                    depth: 0,
                    negdepth: 0,
                    tree_nodes: 1,
                },
                FormulaNode::Diamond(_, c) => {
                    let c = &stats[c.index()];
                    NodeStats {
                        size: &c.size + BigUint::one(),
                        depth: c.depth + 1,
                        negdepth: c.negdepth,
                        tree_nodes: c.tree_nodes.saturating_add(1),
                    }
                }
                FormulaNode::Neg(c) => {
                    let c = &stats[c.index()];
                    NodeStats {
                        size: c.size.clone(),
                        depth: c.depth,
                        negdepth: c.negdepth + 1,
                        tree_nodes: c.tree_nodes.saturating_add(1),
                    }
                }
                FormulaNode::And(cs) => {
                    let mut acc = NodeStats {
                        size: BigUint::zero(),
                        depth: 0,
                        negdepth: 0,
                        // binary tree: k conjuncts need k - 1 connectives
                        tree_nodes: cs.len() as u64 - 1,
                    };
                    for c in cs.iter() {
                        let c = &stats[c.index()];
                        acc.size += &c.size;
                        acc.depth = acc.depth.max(c.depth);
                        acc.negdepth = acc.negdepth.max(c.negdepth);
                        acc.tree_nodes = acc.tree_nodes.saturating_add(c.tree_nodes);
                    }
                    acc
                }
            };
            stats.push(next);
        }
        stats[id.index()].clone()
    }

    pub fn metrics(&self, id: NodeId) -> Metrics {
        let st = self.stats(id);
        let dag_size = self
            .reachable(id)
            .into_iter()
            .filter(|&n| matches!(self.node(n), FormulaNode::Diamond(..)))
            .count();
        Metrics {
            size: st.size,
            dag_size,
            depth: st.depth,
            negdepth: st.negdepth,
        }
    }

    pub fn depth(&self, id: NodeId) -> usize {
        self.stats(id).depth
    }

    pub fn negdepth(&self, id: NodeId) -> usize {
        self.stats(id).negdepth
    }

    /// Number of nodes of the unfolded syntax tree, saturating at `u64::MAX`.
    pub fn tree_nodes(&self, id: NodeId) -> u64 {
        self.stats(id).tree_nodes
    }

    /// The trace formula `<a1><a2>…<an>true` of `w`, where the labels of `w`
    /// are taken from `lts`.
    pub fn trace_formula(&mut self, lts: &Lts, w: &TraceWord) -> NodeId {
        let mut node = self.mk_true();
        for &a in w.0.iter().rev() {
            let a = self.action(lts.action_label(a));
            node = self.mk_diamond(a, node);
        }
        node
    }

    /// Rewrites every `!!φ` to `φ`.
    pub fn collapse_double_negations(&mut self, root: NodeId) -> NodeId {
        let mut done: HashMap<NodeId, NodeId> = HashMap::new();
        for n in self.reachable(root) {
            let new = match self.node(n).clone() {
                FormulaNode::True => n,
                FormulaNode::Diamond(a, c) => {
                    let c = done[&c];
                    self.mk_diamond(a, c)
                }
                FormulaNode::Neg(c) => {
                    let c = done[&c];
                    match *self.node(c) {
                        FormulaNode::Neg(inner) => inner,
                        _ => self.mk_neg(c),
                    }
                }
                FormulaNode::And(cs) => {
                    let cs: Vec<_> = cs.iter().map(|c| done[c]).collect();
                    self.conjoin(cs)
                }
            };
            done.insert(n, new);
        }
        done[&root]
    }

    /// Traces of the formula of length at most `bound`, over the store's
    /// action ids.
    pub fn formula_traces(&self, root: NodeId, bound: usize) -> BTreeSet<TraceWord> {
        let mut memo = HashMap::new();
        self.traces_rec(root, bound, &mut memo)
    }

    fn traces_rec(
        &self,
        node: NodeId,
        bound: usize,
        memo: &mut HashMap<(NodeId, usize), BTreeSet<TraceWord>>,
    ) -> BTreeSet<TraceWord> {
        if let Some(r) = memo.get(&(node, bound)) {
            return r.clone();
        }
        let result = match self.node(node) {
            FormulaNode::True => BTreeSet::from([TraceWord::empty()]),
            FormulaNode::Neg(c) => self.traces_rec(*c, bound, memo),
            FormulaNode::And(cs) => {
                let mut acc = BTreeSet::new();
                for &c in cs.iter() {
                    acc.extend(self.traces_rec(c, bound, memo));
                }
                acc
            }
            FormulaNode::Diamond(a, c) => {
                if bound == 0 {
                    BTreeSet::new()
                } else {
                    let mut acc = BTreeSet::from([TraceWord(vec![*a])]);
                    for w in self.traces_rec(*c, bound - 1, memo) {
                        let mut v = Vec::with_capacity(w.len() + 1);
                        v.push(*a);
                        v.extend(w.0);
                        acc.insert(TraceWord(v));
                    }
                    acc
                }
            }
        };
        memo.insert((node, bound), result.clone());
        result
    }
}

/// Whether `phi` distinguishes `s` and `t` in either direction.
pub fn distinguishes(store: &FormulaStore, eval: &mut Evaluator<'_>, phi: NodeId, s: StateId, t: StateId) -> bool {
    eval.contains(store, phi, s) != eval.contains(store, phi, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::{gen_chain_a, gen_figure_m};

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    #[test]
    fn hash_consing() {
        let mut st = FormulaStore::new();
        let a = st.action("a");
        let tt = st.mk_true();
        let x = st.mk_diamond(a, tt);
        assert_eq!(st.mk_diamond(a, tt), x);
        assert_eq!(st.mk_and([x]).unwrap(), x);
        let b = st.action("b");
        let y = st.mk_diamond(b, tt);
        assert_eq!(st.mk_and([x, y]).unwrap(), st.mk_and([y, x]).unwrap());
        assert_eq!(st.mk_and([]), Err(HmlError::EmptyConjunction));
    }

    #[test]
    fn conjunctions_flatten() {
        let mut st = FormulaStore::new();
        let tt = st.mk_true();
        let ids: Vec<_> = ["a", "b", "c"]
            .iter()
            .map(|l| {
                let a = st.action(l);
                st.mk_diamond(a, tt)
            })
            .collect();
        let ab = st.mk_and([ids[0], ids[1]]).unwrap();
        let abc = st.mk_and([ab, ids[2], ids[0], tt]).unwrap();
        match st.node(abc) {
            FormulaNode::And(cs) => assert_eq!(cs.len(), 3),
            other => panic!("{other:?}"),
        }
        assert_eq!(abc, st.mk_and([ids[2], ids[1], ids[0]]).unwrap());
    }

    #[test]
    fn double_negation_is_kept() {
        let mut st = FormulaStore::new();
        let tt = st.mk_true();
        let n1 = st.mk_neg(tt);
        let n2 = st.mk_neg(n1);
        assert_ne!(n2, tt);
        assert_eq!(st.metrics(n2).negdepth, 2);
        assert_eq!(st.collapse_double_negations(n2), tt);
    }

    #[test]
    fn metric_equations() {
        let mut st = FormulaStore::new();
        let tt = st.mk_true();
        assert_eq!(
            st.metrics(tt),
            Metrics {
                size: big(0),
                dag_size: 0,
                depth: 0,
                negdepth: 0
            }
        );
        let a = st.action("a");
        let aa = {
            let x = st.mk_diamond(a, tt);
            st.mk_diamond(a, x)
        };
        let m = st.metrics(aa);
        assert_eq!((m.size, m.depth, m.negdepth), (big(2), 2, 0));

        // <a>!<a>!<a>!<a>true
        let mut f = st.mk_diamond(a, tt);
        for _ in 0..3 {
            let n = st.mk_neg(f);
            f = st.mk_diamond(a, n);
        }
        let m = st.metrics(f);
        assert_eq!((m.size, m.depth, m.negdepth), (big(4), 4, 3));
    }

    #[test]
    fn shared_term_metrics() {
        // <a>X && X with X = <b><c>true
        let mut st = FormulaStore::new();
        let (a, b, c) = (st.action("a"), st.action("b"), st.action("c"));
        let tt = st.mk_true();
        let ct = st.mk_diamond(c, tt);
        let x = st.mk_diamond(b, ct);
        let ax = st.mk_diamond(a, x);
        let root = st.mk_and([ax, x]).unwrap();
        let m = st.metrics(root);
        assert_eq!(m.size, big(5));
        assert_eq!(m.dag_size, 3);
        assert_eq!(m.depth, 3);
    }

    #[test]
    fn size_does_not_overflow() {
        let mut st = FormulaStore::new();
        let a = st.action("a");
        let b = st.action("b");
        let mut f = st.mk_true();
        for _ in 0..200 {
            let l = st.mk_diamond(a, f);
            let r = st.mk_diamond(b, f);
            f = st.mk_and([l, r]).unwrap();
        }
        let m = st.metrics(f);
        // size(n) = 2 size(n-1) + 2, size(0) = 0  =>  2^(n+1) - 2
        assert_eq!(m.size, (BigUint::one() << 201u32) - big(2));
        assert_eq!(m.dag_size, 400);
        assert_eq!(st.tree_nodes(f), u64::MAX);
    }

    #[test]
    fn trace_formulas() {
        let lts = gen_chain_a(3);
        let mut st = FormulaStore::with_actions_of(&lts);
        let tt = st.mk_true();
        assert_eq!(st.trace_formula(&lts, &TraceWord::empty()), tt);
        let a = lts.action_id("a").unwrap();
        let w = TraceWord(vec![a, a, a]);
        let f = st.trace_formula(&lts, &w);
        let m = st.metrics(f);
        assert_eq!((m.size, m.depth, m.negdepth), (big(3), 3, 0));
    }

    #[test]
    fn traces_of_formulas() {
        let m = gen_figure_m();
        let mut st = FormulaStore::with_actions_of(&m);
        let a = m.action_id("a").unwrap();
        let tt = st.mk_true();
        assert_eq!(st.formula_traces(tt, 5), BTreeSet::from([TraceWord::empty()]));
        let at = st.mk_diamond(a, tt);
        assert_eq!(st.formula_traces(at, 5), BTreeSet::from([TraceWord(vec![a])]));
        let nat = st.mk_neg(at);
        assert_eq!(st.formula_traces(nat, 5), st.formula_traces(at, 5));
        let aat = st.mk_diamond(a, at);
        assert_eq!(
            st.formula_traces(aat, 5),
            BTreeSet::from([TraceWord(vec![a]), TraceWord(vec![a, a])])
        );
        assert_eq!(st.formula_traces(aat, 1), BTreeSet::from([TraceWord(vec![a])]));
    }
}
