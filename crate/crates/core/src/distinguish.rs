//! Distinguishing formulas of minimal observation depth (`phi`) and of
//! minimal observation depth with minimal negation depth (`psi`).

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::equivalences::{refine_sequence, splpairs, DirDistTable, ExtNat, PartitionSequence};
use crate::hml::{render, Evaluator, FormulaStore, Metrics, NodeId, RenderStyle};
use crate::lts::{ActionId, Lts, StateId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DistinguishError {
    #[error("states {s} and {t} are bisimilar")]
    Bisimilar { s: StateId, t: StateId },
    #[error("states {s} and {t} are {level}-bisimilar")]
    NotApartAt { s: StateId, t: StateId, level: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Minimal observation depth.
    DepthOnly,
    /// Minimal observation depth, then minimal negation depth.
    DepthAndNegation,
}

/// How a splitting pair is picked when several qualify.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    /// Smallest action id, then smallest sum of `dist(s', t')` over the
    /// `a`-successors `t'` of `t`, then smallest state id.
    Deterministic,
    /// Uniformly at random from a ChaCha8 stream with this seed.
    Seeded(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WitnessRequest {
    pub s: StateId,
    pub t: StateId,
    pub mode: Mode,
}

/// Formula generator over one LTS and its partition sequence. Formulas of
/// all calls share one store and one memo.
pub struct Distinguisher<'a> {
    lts: &'a Lts,
    seq: &'a PartitionSequence,
    dd: DirDistTable<'a>,
    store: FormulaStore,
    eval: Evaluator<'a>,
    phi_memo: HashMap<(StateId, StateId), NodeId>,
    psi_memo: HashMap<(StateId, StateId, usize), NodeId>,
    memoize: bool,
    calls: u64,
    rng: Option<ChaCha8Rng>,
}

impl<'a> Distinguisher<'a> {
    pub fn new(lts: &'a Lts, seq: &'a PartitionSequence) -> Self {
        Distinguisher {
            lts,
            seq,
            dd: DirDistTable::new(lts, seq),
            store: FormulaStore::with_actions_of(lts),
            eval: Evaluator::new(lts),
            phi_memo: HashMap::new(),
            psi_memo: HashMap::new(),
            memoize: true,
            calls: 0,
            rng: None,
        }
    }

    pub fn with_selection(mut self, selection: Selection) -> Self {
        self.rng = match selection {
            Selection::Deterministic => None,
            Selection::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        self
    }

    /// Turns the formula memo off; every call recomputes its result.
    pub fn with_memo(mut self, memoize: bool) -> Self {
        self.memoize = memoize;
        self
    }

    pub fn store(&self) -> &FormulaStore {
        &self.store
    }

    pub fn into_store(self) -> FormulaStore {
        self.store
    }

    pub fn dirdist_table(&mut self) -> &mut DirDistTable<'a> {
        &mut self.dd
    }

    /// Number of `phi`/`psi` invocations that were not answered by the memo.
    pub fn calls(&self) -> u64 {
        self.calls
    }

    fn select(&mut self, pairs: Vec<(ActionId, StateId)>, t: StateId) -> (ActionId, StateId) {
        debug_assert!(!pairs.is_empty());
        if let Some(rng) = self.rng.as_mut() {
            return *pairs.choose(rng).unwrap();
        }
        let (lts, seq) = (self.lts, self.seq);
        pairs
            .into_iter()
            .min_by_key(|&(a, s2)| {
                let sum: u64 = lts
                    .successors(t, a)
                    .map(|t2| seq.dist(s2, t2).finite().unwrap_or(u32::MAX) as u64)
                    .sum();
                (a, sum, s2)
            })
            .unwrap()
    }

    /// A formula of depth `dist(s, t)` that holds in `s` and not in `t`.
    pub fn phi(&mut self, s: StateId, t: StateId) -> Result<NodeId, DistinguishError> {
        if let Some(&f) = self.phi_memo.get(&(s, t)) {
            return Ok(f);
        }
        let i = self
            .seq
            .dist(s, t)
            .finite()
            .ok_or(DistinguishError::Bisimilar { s, t })? as usize;
        self.calls += 1;
        let pairs = splpairs(self.lts, self.seq, i, s, t);
        let f = if pairs.is_empty() {
            let g = self.phi(t, s)?;
            self.store.mk_neg(g)
        } else {
            let (a, s2) = self.select(pairs, t);
            let targets: Vec<StateId> = self.lts.successors(t, a).collect();
            let mut conj = Vec::with_capacity(targets.len());
            for t2 in targets {
                conj.push(self.phi(s2, t2)?);
            }
            let body = self.store.conjoin(conj);
            self.store.mk_diamond(a, body)
        };
        if self.memoize {
            self.phi_memo.insert((s, t), f);
        }
        Ok(f)
    }

    /// A formula of depth at most `i` and negation depth `dirdist_i(s, t)`
    /// that holds in `s` and not in `t`.
    pub fn psi(&mut self, i: usize, s: StateId, t: StateId) -> Result<NodeId, DistinguishError> {
        self.psi_inner(i, s, t, false)
    }

    fn psi_inner(&mut self, i: usize, s: StateId, t: StateId, flipped: bool) -> Result<NodeId, DistinguishError> {
        if let Some(&f) = self.psi_memo.get(&(s, t, i)) {
            return Ok(f);
        }
        let j = self
            .dd
            .dirdist(i, s, t)
            .finite()
            .ok_or(DistinguishError::NotApartAt { s, t, level: i })?;
        self.calls += 1;
        let pairs = self.dd.hat_splpairs(i, j, s, t);
        let f = if pairs.is_empty() {
            assert!(
                !flipped,
                "no splitting pair in either direction for {s}, {t} at level {i}"
            );
            let g = self.psi_inner(i, t, s, true)?;
            self.store.mk_neg(g)
        } else {
            let (a, s2) = self.select(pairs, t);
            let mut remaining: Vec<StateId> = self.lts.successors(t, a).collect();
            let mut conj = Vec::new();
            while !remaining.is_empty() {
                let mut best = remaining[0];
                let mut best_d = self.dd.dirdist(i - 1, s2, best);
                for &t2 in &remaining[1..] {
                    let d = self.dd.dirdist(i - 1, s2, t2);
                    if d > best_d || (d == best_d && t2 < best) {
                        best = t2;
                        best_d = d;
                    }
                }
                let g = self.psi_inner(i - 1, s2, best, false)?;
                conj.push(g);
                let sat = self.eval.eval(&self.store, g);
                remaining.retain(|x| sat.contains(x.index()));
            }
            let body = self.store.conjoin(conj);
            self.store.mk_diamond(a, body)
        };
        if self.memoize {
            self.psi_memo.insert((s, t, i), f);
        }
        Ok(f)
    }

    /// `phi` or `psi` at level `dist(s, t)`, depending on `mode`.
    pub fn witness(&mut self, mode: Mode, s: StateId, t: StateId) -> Result<NodeId, DistinguishError> {
        match mode {
            Mode::DepthOnly => self.phi(s, t),
            Mode::DepthAndNegation => {
                let i = self
                    .seq
                    .dist(s, t)
                    .finite()
                    .ok_or(DistinguishError::Bisimilar { s, t })?;
                self.psi(i as usize, s, t)
            }
        }
    }
}

/// A distinguishing formula with the measures of the pair it separates.
#[derive(Debug)]
pub struct Witness {
    pub store: FormulaStore,
    pub formula: NodeId,
    pub metrics: Metrics,
    /// The state of the pair in which the formula holds.
    pub holds_in: StateId,
    pub dist: u32,
    /// `dirdist_dist` from `holds_in` to the other state.
    pub dirdist: u32,
    pub calls: u64,
}

#[derive(Debug)]
pub enum Verdict {
    Equivalent,
    Distinguished(Box<Witness>),
}

/// Decides whether `s` and `t` are bisimilar and, if not, builds a witness
/// in the requested mode.
///
/// With [`Mode::DepthOnly`] the formula holds in `s`. With
/// [`Mode::DepthAndNegation`] it holds in whichever state needs fewer
/// nested negations (`s` on a tie), so that it is minimal among all
/// formulas telling the two apart.
pub fn distinguish(lts: &Lts, request: WitnessRequest) -> Verdict {
    distinguish_with(lts, request, Selection::Deterministic)
}

pub fn distinguish_with(lts: &Lts, request: WitnessRequest, selection: Selection) -> Verdict {
    let seq = refine_sequence(lts);
    distinguish_in(lts, &seq, request, selection)
}

/// Like [`distinguish_with`] for a partition sequence computed beforehand.
pub fn distinguish_in(lts: &Lts, seq: &PartitionSequence, request: WitnessRequest, selection: Selection) -> Verdict {
    let WitnessRequest { s, t, mode } = request;
    let ExtNat::Finite(dist) = seq.dist(s, t) else {
        return Verdict::Equivalent;
    };
    let i = dist as usize;
    let mut d = Distinguisher::new(lts, seq).with_selection(selection);
    let forward = d.dirdist_table().dirdist(i, s, t);
    let backward = d.dirdist_table().dirdist(i, t, s);
    let (p, q) = match mode {
        Mode::DepthAndNegation if backward < forward => (t, s),
        _ => (s, t),
    };
    let formula = match mode {
        Mode::DepthOnly => d.phi(p, q),
        Mode::DepthAndNegation => d.psi(i, p, q),
    }
    .expect("states are apart");
    let dirdist = if p == s { forward } else { backward };
    let calls = d.calls();
    let store = d.into_store();
    let metrics = store.metrics(formula);
    Verdict::Distinguished(Box::new(Witness {
        store,
        formula,
        metrics,
        holds_in: p,
        dist,
        dirdist: dirdist.finite().expect("states are apart"),
        calls,
    }))
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Machine-readable result of one distinguishing run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub method: String,
    pub verdict: String,
    pub formula_inline: Option<String>,
    pub formula_equations: Option<String>,
    pub size: Option<String>,
    pub dag_size: Option<usize>,
    pub depth: Option<usize>,
    pub negdepth: Option<usize>,
    pub dist: Option<u32>,
    pub dirdist: Option<u32>,
    pub holds_in: Option<u32>,
    pub calls: Option<u64>,
}

impl Report {
    pub fn bisimilar(method: &str) -> Self {
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            method: method.to_string(),
            verdict: "bisimilar".to_string(),
            formula_inline: None,
            formula_equations: None,
            size: None,
            dag_size: None,
            depth: None,
            negdepth: None,
            dist: None,
            dirdist: None,
            holds_in: None,
            calls: None,
        }
    }

    /// `formula_inline` is left out when the unfolded formula is too large
    /// to print.
    pub fn distinguished(
        method: &str,
        store: &FormulaStore,
        formula: NodeId,
        holds_in: StateId,
        dist: u32,
        dirdist: u32,
        calls: u64,
    ) -> Self {
        let metrics = store.metrics(formula);
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            method: method.to_string(),
            verdict: "distinguishable".to_string(),
            formula_inline: render(store, formula, RenderStyle::Inline).ok(),
            formula_equations: render(store, formula, RenderStyle::Equations).ok(),
            size: Some(metrics.size.to_string()),
            dag_size: Some(metrics.dag_size),
            depth: Some(metrics.depth),
            negdepth: Some(metrics.negdepth),
            dist: Some(dist),
            dirdist: Some(dirdist),
            holds_in: Some(holds_in.0),
            calls: Some(calls),
        }
    }

    pub fn from_witness(method: &str, w: &Witness) -> Self {
        Self::distinguished(method, &w.store, w.formula, w.holds_in, w.dist, w.dirdist, w.calls)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hml::{distinguishes, parse_formula};
    use crate::lts::{gen_chain_a, gen_figure_m, gen_ladder_b, ladder_x, ladder_y};
    use crate::reduction::{build_lts, parse_dimacs};

    fn witness(lts: &Lts, s: StateId, t: StateId, mode: Mode) -> Witness {
        match distinguish(lts, WitnessRequest { s, t, mode }) {
            Verdict::Distinguished(w) => *w,
            Verdict::Equivalent => panic!("expected a witness"),
        }
    }

    fn holds(lts: &Lts, w: &Witness, s: StateId) -> bool {
        Evaluator::new(lts).contains(&w.store, w.formula, s)
    }

    #[test]
    fn chain_phi_is_trace_formula() {
        let lts = gen_chain_a(3);
        let mut w = witness(&lts, StateId(3), StateId(2), Mode::DepthOnly);
        let expected = parse_formula(&mut w.store, "<a><a><a>true").unwrap();
        assert_eq!(w.formula, expected);
        assert_eq!(w.metrics.depth, 3);
    }

    #[test]
    fn figure_m_phi_negates() {
        let lts = gen_figure_m();
        let mut w = witness(&lts, StateId(0), StateId(1), Mode::DepthOnly);
        let expected = parse_formula(&mut w.store, "!<b>true").unwrap();
        assert_eq!(w.formula, expected);
        assert!(holds(&lts, &w, StateId(0)));
        assert!(!holds(&lts, &w, StateId(1)));
    }

    #[test]
    fn ladder_psi_minimizes_negations() {
        let lts = gen_ladder_b(3);
        let (x, y) = (ladder_x(3), ladder_y(3, 3));
        let w = witness(&lts, x, y, Mode::DepthAndNegation);
        assert_eq!((w.metrics.depth, w.metrics.negdepth), (4, 3));
        assert_eq!(w.dirdist, 3);
        assert!(holds(&lts, &w, x) && !holds(&lts, &w, y));
    }

    #[test]
    fn ladder_orientation_follows_parity() {
        for n in 1..=6 {
            let lts = gen_ladder_b(n);
            let (x, y) = (ladder_x(n), ladder_y(n, n));
            let w = witness(&lts, x, y, Mode::DepthAndNegation);
            assert_eq!((w.metrics.depth, w.metrics.negdepth), (n + 1, n), "n = {n}");
            assert_eq!(w.holds_in, if n % 2 == 1 { x } else { y });
            let other = if w.holds_in == x { y } else { x };
            assert!(holds(&lts, &w, w.holds_in) && !holds(&lts, &w, other));
        }
    }

    #[test]
    fn chain_psi_has_no_negation() {
        for n in 1..=12 {
            let lts = gen_chain_a(n);
            let (s, t) = (StateId::from(n), StateId::from(n - 1));
            let w = witness(&lts, s, t, Mode::DepthAndNegation);
            assert_eq!((w.metrics.depth, w.metrics.negdepth), (n, 0));
        }
    }

    #[test]
    fn deterministic_pairs_get_single_conjuncts() {
        let lts = gen_chain_a(5);
        let seq = refine_sequence(&lts);
        let mut d = Distinguisher::new(&lts, &seq);
        let f = d.psi(5, StateId(5), StateId(4)).unwrap();
        let store = d.store();
        for n in store.reachable(f) {
            assert!(!matches!(store.node(n), crate::hml::FormulaNode::And(_)));
        }
    }

    #[test]
    fn same_state_is_equivalent() {
        let lts = gen_figure_m();
        let req = WitnessRequest {
            s: StateId(1),
            t: StateId(1),
            mode: Mode::DepthAndNegation,
        };
        assert!(matches!(distinguish(&lts, req), Verdict::Equivalent));
        let seq = refine_sequence(&lts);
        let mut d = Distinguisher::new(&lts, &seq);
        assert_eq!(
            d.phi(StateId(1), StateId(1)),
            Err(DistinguishError::Bisimilar {
                s: StateId(1),
                t: StateId(1)
            })
        );
    }

    #[test]
    fn figure_m_psi_has_depth_one() {
        let lts = gen_figure_m();
        let mut w = witness(&lts, StateId(0), StateId(1), Mode::DepthAndNegation);
        assert_eq!(w.metrics.depth, 1);
        assert_eq!((w.holds_in, w.metrics.negdepth), (StateId(1), 0));
        assert_eq!(w.formula, parse_formula(&mut w.store, "<b>true").unwrap());
    }

    #[test]
    fn reduction_pair_needs_depth_two() {
        let red = build_lts(&parse_dimacs("p cnf 3 2\n-1 -2 0\n2 3 0\n").unwrap());
        for mode in [Mode::DepthOnly, Mode::DepthAndNegation] {
            let w = witness(&red.lts, red.s, red.t, mode);
            assert!(w.metrics.depth >= 2);
            let mut ev = Evaluator::new(&red.lts);
            assert!(distinguishes(&w.store, &mut ev, w.formula, red.s, red.t));
        }
    }

    #[test]
    fn seeded_selection_is_reproducible_and_sound() {
        let lts = gen_ladder_b(4);
        let (x, y) = (ladder_x(4), ladder_y(4, 4));
        let run = |seed| {
            let req = WitnessRequest {
                s: x,
                t: y,
                mode: Mode::DepthAndNegation,
            };
            match distinguish_with(&lts, req, Selection::Seeded(seed)) {
                Verdict::Distinguished(w) => w,
                Verdict::Equivalent => unreachable!(),
            }
        };
        let (a, b) = (run(9), run(9));
        assert_eq!(
            render(&a.store, a.formula, RenderStyle::Equations).unwrap(),
            render(&b.store, b.formula, RenderStyle::Equations).unwrap()
        );
        assert_eq!(a.holds_in, y);
        assert!(holds(&lts, &a, y) && !holds(&lts, &a, x));
        assert_eq!((a.metrics.depth, a.metrics.negdepth), (5, 4));
    }

    #[test]
    fn report_json() {
        let lts = gen_chain_a(2);
        let w = witness(&lts, StateId(2), StateId(1), Mode::DepthAndNegation);
        let v = serde_json::to_value(Report::from_witness("ours", &w)).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["verdict"], "distinguishable");
        assert_eq!(v["formula_inline"], "<a><a>true");
        assert_eq!(v["size"], "2");
        assert_eq!(v["dist"], 2);
        let b = serde_json::to_value(Report::bisimilar("ours")).unwrap();
        assert_eq!(b["verdict"], "bisimilar");
        assert!(b["depth"].is_null());
    }
}
