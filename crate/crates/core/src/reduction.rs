//! CNF satisfiability as a distinguishing-trace problem.
//!
//! For a CNF `C` over `p_1 … p_k` with clauses `C_1 … C_n`, [`build_lts`]
//! constructs an LTS with two states `s` and `t` such that a trace of length
//! `k + 2` tells them apart exactly when `C` is satisfiable. Such a trace has
//! the shape `init · a_1 … a_k · flag` with `a_i ∈ {p_i, ~p_i}`, and the
//! middle part is a satisfying assignment.

use std::collections::{HashSet, VecDeque};
use std::fmt::Write;

use fixedbitset::FixedBitSet;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::lts::{ActionId, Lts, LtsBuilder, StateId, TraceWord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    /// 1-based proposition index.
    pub prop: u32,
    pub positive: bool,
}

impl Literal {
    pub fn holds(self, assignment: &[bool]) -> bool {
        assignment[self.prop as usize - 1] == self.positive
    }

    fn dimacs(self) -> i64 {
        if self.positive {
            self.prop as i64
        } else {
            -(self.prop as i64)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfInstance {
    pub num_props: usize,
    pub clauses: Vec<Vec<Literal>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReductionError {
    #[error("DIMACS line {line}: {message}")]
    Dimacs { line: usize, message: String },
    #[error("malformed truth trace: {0}")]
    MalformedTrace(String),
}

fn dimacs_err(line: usize, message: impl Into<String>) -> ReductionError {
    ReductionError::Dimacs {
        line,
        message: message.into(),
    }
}

/// Parses DIMACS `cnf`. Clauses may span lines and must end with `0`; a
/// final clause missing its `0` is accepted.
pub fn parse_dimacs(text: &str) -> Result<CnfInstance, ReductionError> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(dimacs_err(line_no, "duplicate header"));
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "p" || fields[1] != "cnf" {
                return Err(dimacs_err(line_no, "expected `p cnf <props> <clauses>`"));
            }
            let k = fields[2]
                .parse()
                .map_err(|_| dimacs_err(line_no, "bad proposition count"))?;
            let n = fields[3].parse().map_err(|_| dimacs_err(line_no, "bad clause count"))?;
            if k == 0 {
                return Err(dimacs_err(line_no, "at least one proposition is required"));
            }
            header = Some((k, n, line_no));
            continue;
        }
        let Some((k, _, _)) = header else {
            return Err(dimacs_err(line_no, "clause before header"));
        };
        for tok in line.split_whitespace() {
            let v: i64 = tok
                .parse()
                .map_err(|_| dimacs_err(line_no, format!("bad literal `{tok}`")))?;
            if v == 0 {
                clauses.push(std::mem::take(&mut current));
                continue;
            }
            let prop = v.unsigned_abs();
            if prop > k as u64 {
                return Err(dimacs_err(line_no, format!("literal {v} out of range 1..={k}")));
            }
            current.push(Literal {
                prop: prop as u32,
                positive: v > 0,
            });
        }
    }
    if !current.is_empty() {
        clauses.push(current);
    }
    let Some((k, n, _)) = header else {
        return Err(dimacs_err(last_line.max(1), "missing `p cnf` header"));
    };
    if clauses.len() != n {
        return Err(dimacs_err(
            last_line.max(1),
            format!("header declares {n} clauses, found {}", clauses.len()),
        ));
    }
    Ok(CnfInstance { num_props: k, clauses })
}

pub fn write_dimacs(cnf: &CnfInstance) -> String {
    let mut out = format!("p cnf {} {}\n", cnf.num_props, cnf.clauses.len());
    for clause in &cnf.clauses {
        for lit in clause {
            let _ = write!(out, "{} ", lit.dimacs());
        }
        out.push_str("0\n");
    }
    out
}

impl CnfInstance {
    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        assert_eq!(assignment.len(), self.num_props);
        self.clauses.iter().all(|c| c.iter().any(|l| l.holds(assignment)))
    }
}

/// `n` clauses over `k` propositions, each with 1 to `min(k, 3)` literals
/// of uniform proposition and polarity.
pub fn gen_random_cnf<R: Rng + ?Sized>(rng: &mut R, k: usize, n: usize) -> CnfInstance {
    let clauses = (0..n)
        .map(|_| {
            let width = rng.gen_range(1..=k.min(3));
            (0..width)
                .map(|_| Literal {
                    prop: rng.gen_range(1..=k as u32),
                    positive: rng.gen_bool(0.5),
                })
                .collect()
        })
        .collect();
    CnfInstance { num_props: k, clauses }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "role", rename_all = "lowercase")]
pub enum StateRole {
    /// Clause index is 1-based.
    Unsat {
        clause: usize,
        layer: usize,
    },
    Sat {
        layer: usize,
    },
    Bot {
        layer: usize,
    },
    S,
    T,
    Delta,
}

#[derive(Clone, Debug)]
pub struct ReductionLts {
    pub lts: Lts,
    pub s: StateId,
    pub t: StateId,
    pub roles: Vec<StateRole>,
    num_props: usize,
    num_clauses: usize,
}

impl ReductionLts {
    pub fn unsat(&self, clause: usize, layer: usize) -> StateId {
        assert!((1..=self.num_clauses).contains(&clause) && layer <= self.num_props);
        StateId::from((clause - 1) * (self.num_props + 1) + layer)
    }

    pub fn sat(&self, layer: usize) -> StateId {
        StateId::from(self.num_clauses * (self.num_props + 1) + layer)
    }

    pub fn bot(&self, layer: usize) -> StateId {
        StateId::from((self.num_clauses + 1) * (self.num_props + 1) + layer)
    }

    pub fn delta(&self) -> StateId {
        StateId::from(self.lts.num_states() - 1)
    }

    /// The role map as JSON: one `{state, role, …}` object per state.
    pub fn roles_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Entry<'r> {
            state: usize,
            #[serde(flatten)]
            role: &'r StateRole,
        }
        let entries: Vec<Entry> = self
            .roles
            .iter()
            .enumerate()
            .map(|(state, role)| Entry { state, role })
            .collect();
        serde_json::to_value(entries).expect("role map serializes")
    }
}

/// Action id of `p_i` (or `~p_i` when `positive` is false).
pub fn prop_action(prop: usize, positive: bool) -> ActionId {
    ActionId((2 * (prop - 1) + usize::from(!positive)) as u32)
}

pub fn init_action(cnf: &CnfInstance) -> ActionId {
    ActionId(2 * cnf.num_props as u32)
}

pub fn flag_action(cnf: &CnfInstance) -> ActionId {
    ActionId(2 * cnf.num_props as u32 + 1)
}

pub fn build_lts(cnf: &CnfInstance) -> ReductionLts {
    let k = cnf.num_props;
    let n = cnf.clauses.len();
    let layer = k + 1;
    let num_states = (n + 2) * layer + 3;
    let mut b = LtsBuilder::new(num_states);
    for i in 1..=k {
        b.action(&format!("p{i}"));
        b.action(&format!("~p{i}"));
    }
    let init = b.action("init");
    let flag = b.action("flag");

    let unsat = |j: usize, i: usize| j * layer + i;
    let sat = |i: usize| n * layer + i;
    let bot = |i: usize| (n + 1) * layer + i;
    let (s, t, delta) = (num_states - 3, num_states - 2, num_states - 1);

    let mut roles = vec![StateRole::Delta; num_states];
    let add = |b: &mut LtsBuilder, src: usize, a: ActionId, dst: usize| {
        b.transition(src, a, dst).expect("states are in range");
    };
    for (j, clause) in cnf.clauses.iter().enumerate() {
        for i in 0..=k {
            roles[unsat(j, i)] = StateRole::Unsat {
                clause: j + 1,
                layer: i,
            };
        }
        for i in 1..=k {
            for positive in [true, false] {
                let hit = clause.contains(&Literal {
                    prop: i as u32,
                    positive,
                });
                let dst = if hit { sat(i) } else { unsat(j, i) };
                add(&mut b, unsat(j, i - 1), prop_action(i, positive), dst);
            }
        }
        add(&mut b, unsat(j, k), flag, delta);
        add(&mut b, t, init, unsat(j, 0));
    }
    for i in 0..=k {
        roles[sat(i)] = StateRole::Sat { layer: i };
        roles[bot(i)] = StateRole::Bot { layer: i };
    }
    for i in 1..=k {
        for positive in [true, false] {
            add(&mut b, sat(i - 1), prop_action(i, positive), sat(i));
            add(&mut b, bot(i - 1), prop_action(i, positive), bot(i));
        }
    }
    add(&mut b, bot(k), flag, delta);
    add(&mut b, t, init, sat(0));
    add(&mut b, s, init, sat(0));
    add(&mut b, s, init, bot(0));
    roles[s] = StateRole::S;
    roles[t] = StateRole::T;

    ReductionLts {
        lts: b.initial(s).build(),
        s: StateId::from(s),
        t: StateId::from(t),
        roles,
        num_props: k,
        num_clauses: n,
    }
}

/// The truth word `a_1 … a_k` of an assignment, `a_i = p_i` when `p_i`
/// is true and `~p_i` otherwise.
pub fn assignment_to_trace(cnf: &CnfInstance, assignment: &[bool]) -> TraceWord {
    assert_eq!(assignment.len(), cnf.num_props);
    TraceWord(
        assignment
            .iter()
            .enumerate()
            .map(|(i, &v)| prop_action(i + 1, v))
            .collect(),
    )
}

pub fn trace_to_assignment(cnf: &CnfInstance, w: &TraceWord) -> Result<Vec<bool>, ReductionError> {
    if w.len() != cnf.num_props {
        return Err(ReductionError::MalformedTrace(format!(
            "expected {} actions, got {}",
            cnf.num_props,
            w.len()
        )));
    }
    w.0.iter()
        .enumerate()
        .map(|(i, &a)| {
            if a == prop_action(i + 1, true) {
                Ok(true)
            } else if a == prop_action(i + 1, false) {
                Ok(false)
            } else {
                Err(ReductionError::MalformedTrace(format!(
                    "position {} must be p{} or ~p{}",
                    i + 1,
                    i + 1,
                    i + 1
                )))
            }
        })
        .collect()
}

/// Shortest word of length at most `max_len` that is a trace of exactly one
/// of `s` and `t`, by breadth-first search over pairs of reachable state
/// sets.
pub fn trace_dist_search(lts: &Lts, s: StateId, t: StateId, max_len: usize) -> Option<TraceWord> {
    let single = |x: StateId| {
        let mut set = lts.empty_set();
        set.insert(x.index());
        set
    };
    let start = (single(s), single(t));
    let mut seen: HashSet<(FixedBitSet, FixedBitSet)> = HashSet::new();
    seen.insert(start.clone());
    let mut queue = VecDeque::from([(start, Vec::<ActionId>::new())]);
    while let Some(((left, right), word)) = queue.pop_front() {
        if word.len() >= max_len || left == right {
            continue;
        }
        for a in lts.actions() {
            let step = |from: &FixedBitSet| {
                let mut next = lts.empty_set();
                for x in from.ones() {
                    for y in lts.successors(StateId::from(x), a) {
                        next.insert(y.index());
                    }
                }
                next
            };
            let (l2, r2) = (step(&left), step(&right));
            let (le, re) = (l2.is_clear(), r2.is_clear());
            if le && re {
                continue;
            }
            let mut w2 = word.clone();
            w2.push(a);
            if le != re {
                return Some(TraceWord(w2));
            }
            let key = (l2, r2);
            if seen.insert(key.clone()) {
                queue.push_back((key, w2));
            }
        }
    }
    None
}

/// Decides `cnf` by searching a distinguishing trace of length `k + 2`
/// between `s` and `t` of its reduction LTS, and decodes the assignment.
pub fn sat_via_traces(cnf: &CnfInstance) -> Result<Option<Vec<bool>>, ReductionError> {
    let red = build_lts(cnf);
    let Some(w) = trace_dist_search(&red.lts, red.s, red.t, cnf.num_props + 2) else {
        return Ok(None);
    };
    let (first, last) = (w.0.first().copied(), w.0.last().copied());
    if w.len() != cnf.num_props + 2 || first != Some(init_action(cnf)) || last != Some(flag_action(cnf)) {
        return Err(ReductionError::MalformedTrace(w.display(&red.lts)));
    }
    let middle = TraceWord(w.0[1..w.len() - 1].to_vec());
    trace_to_assignment(cnf, &middle).map(Some)
}
