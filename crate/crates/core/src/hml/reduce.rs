use super::{distinguishes, Evaluator, FormulaNode, FormulaStore, HmlError, NodeId};
use crate::lts::{ActionId, Lts, StateId};

/// One step of the path from the root down to the current position.
#[derive(Clone, Debug)]
enum Frame {
    Diamond(ActionId),
    Neg,
    And { left: Vec<NodeId>, right: Vec<NodeId> },
}

struct Pass<'e, 'a> {
    store: &'e mut FormulaStore,
    eval: &'e mut Evaluator<'a>,
    s: StateId,
    t: StateId,
    frames: Vec<Frame>,
    changed: bool,
}

impl Pass<'_, '_> {
    fn plug(&mut self, mut node: NodeId) -> NodeId {
        for frame in self.frames.iter().rev() {
            node = match frame {
                Frame::Diamond(a) => self.store.mk_diamond(*a, node),
                Frame::Neg => self.store.mk_neg(node),
                Frame::And { left, right } => {
                    let all = left.iter().copied().chain([node]).chain(right.iter().copied());
                    self.store.conjoin(all.collect::<Vec<_>>())
                }
            };
        }
        node
    }

    /// Post-order, leftmost first. Returns what now stands at this position.
    fn visit(&mut self, node: NodeId) -> NodeId {
        let rebuilt = match self.store.node(node).clone() {
            FormulaNode::True => return node,
            FormulaNode::Diamond(a, c) => {
                self.frames.push(Frame::Diamond(a));
                let c = self.visit(c);
                self.frames.pop();
                self.store.mk_diamond(a, c)
            }
            FormulaNode::Neg(c) => {
                self.frames.push(Frame::Neg);
                let c = self.visit(c);
                self.frames.pop();
                self.store.mk_neg(c)
            }
            FormulaNode::And(cs) => {
                let mut left = Vec::with_capacity(cs.len());
                for (k, &c) in cs.iter().enumerate() {
                    self.frames.push(Frame::And {
                        left: left.clone(),
                        right: cs[k + 1..].to_vec(),
                    });
                    let c = self.visit(c);
                    self.frames.pop();
                    left.push(c);
                }
                self.store.conjoin(left)
            }
        };
        if self.store.is_true(rebuilt) {
            return rebuilt;
        }
        let tt = self.store.mk_true();
        let candidate = self.plug(tt);
        if distinguishes(self.store, self.eval, candidate, self.s, self.t) {
            self.changed = true;
            tt
        } else {
            rebuilt
        }
    }
}

/// Replaces subformulas by `true` for as long as the result still
/// distinguishes `s` and `t`. The result is irreducible: no single further
/// replacement keeps it distinguishing.
pub fn reduce_irreducible_with(
    store: &mut FormulaStore,
    eval: &mut Evaluator<'_>,
    node: NodeId,
    s: StateId,
    t: StateId,
) -> Result<NodeId, HmlError> {
    if !distinguishes(store, eval, node, s, t) {
        return Err(HmlError::NotDistinguishing);
    }
    let mut current = node;
    loop {
        let mut pass = Pass {
            store,
            eval,
            s,
            t,
            frames: Vec::new(),
            changed: false,
        };
        current = pass.visit(current);
        if !pass.changed {
            return Ok(current);
        }
    }
}

pub fn reduce_irreducible(
    store: &mut FormulaStore,
    node: NodeId,
    lts: &Lts,
    s: StateId,
    t: StateId,
) -> Result<NodeId, HmlError> {
    let mut eval = Evaluator::new(lts);
    reduce_irreducible_with(store, &mut eval, node, s, t)
}
