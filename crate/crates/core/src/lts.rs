//! Labelled transition systems: representation, `.aut` I/O, example families
//! and trace queries.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use fixedbitset::FixedBitSet;
use rand::Rng;
use thiserror::Error;

/// Dense index of a state in an [`Lts`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(transparent)]
pub struct StateId(pub u32);

impl StateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for StateId {
    fn from(i: usize) -> Self {
        StateId(i as u32)
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Interned action label. Ids are dense in `0..num_actions`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(transparent)]
pub struct ActionId(pub u32);

impl ActionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A finite word over action labels. The empty word is the empty trace.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TraceWord(pub Vec<ActionId>);

impl TraceWord {
    pub fn empty() -> Self {
        TraceWord(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Renders the word with the labels of `lts`, `ε` for the empty word.
    pub fn display(&self, lts: &Lts) -> String {
        if self.0.is_empty() {
            return "ε".to_string();
        }
        self.0
            .iter()
            .map(|&a| lts.action_label(a))
            .collect::<Vec<_>>()
            .join("·")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LtsError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("state {state} out of range for {num_states} states")]
    StateOutOfRange { state: usize, num_states: usize },
    #[error("action label must not be empty")]
    EmptyLabel,
}

fn parse_err(line: usize, message: impl Into<String>) -> LtsError {
    LtsError::Parse {
        line,
        message: message.into(),
    }
}

/// Immutable labelled transition system with interned action labels.
///
/// Outgoing and incoming transitions are kept in compressed rows sorted by
/// `(action, other endpoint)`, so all successor lists are deterministic.
#[derive(Clone, Debug)]
pub struct Lts {
    num_states: usize,
    initial: StateId,
    labels: Vec<String>,
    label_index: HashMap<String, ActionId>,
    out_start: Vec<usize>,
    out: Vec<(ActionId, StateId)>,
    in_start: Vec<usize>,
    inc: Vec<(ActionId, StateId)>,
}

impl PartialEq for Lts {
    fn eq(&self, other: &Self) -> bool {
        self.num_states == other.num_states
            && self.initial == other.initial
            && self.labelled_triples() == other.labelled_triples()
    }
}

impl Eq for Lts {}

/// Incrementally collects states, labels and transitions for an [`Lts`].
#[derive(Clone, Debug, Default)]
pub struct LtsBuilder {
    num_states: usize,
    initial: usize,
    labels: Vec<String>,
    label_index: HashMap<String, ActionId>,
    transitions: Vec<(StateId, ActionId, StateId)>,
}

impl LtsBuilder {
    pub fn new(num_states: usize) -> Self {
        LtsBuilder {
            num_states,
            ..Default::default()
        }
    }

    pub fn initial(mut self, initial: usize) -> Self {
        self.initial = initial;
        self
    }

    /// Interns `label`, returning its id.
    pub fn action(&mut self, label: &str) -> ActionId {
        if let Some(&id) = self.label_index.get(label) {
            return id;
        }
        let id = ActionId(self.labels.len() as u32);
        self.labels.push(label.to_string());
        self.label_index.insert(label.to_string(), id);
        id
    }

    pub fn transition(&mut self, src: usize, action: ActionId, dst: usize) -> Result<(), LtsError> {
        for state in [src, dst] {
            if state >= self.num_states {
                return Err(LtsError::StateOutOfRange {
                    state,
                    num_states: self.num_states,
                });
            }
        }
        self.transitions.push((StateId::from(src), action, StateId::from(dst)));
        Ok(())
    }

    pub fn labelled(&mut self, src: usize, label: &str, dst: usize) -> Result<(), LtsError> {
        if label.is_empty() {
            return Err(LtsError::EmptyLabel);
        }
        let a = self.action(label);
        self.transition(src, a, dst)
    }

    pub fn build(self) -> Lts {
        let n = self.num_states;
        let mut triples = self.transitions;
        triples.sort_unstable();
        triples.dedup();

        let mut out_start = vec![0usize; n + 1];
        let mut in_start = vec![0usize; n + 1];
        for &(s, _, t) in &triples {
            out_start[s.index() + 1] += 1;
            in_start[t.index() + 1] += 1;
        }
        for i in 0..n {
            out_start[i + 1] += out_start[i];
            in_start[i + 1] += in_start[i];
        }
        // triples are sorted by (src, action, dst), so rows come out sorted.
        let out = triples.iter().map(|&(_, a, t)| (a, t)).collect();
        let mut by_target: Vec<_> = triples.iter().map(|&(s, a, t)| (t, a, s)).collect();
        by_target.sort_unstable();
        let inc = by_target.iter().map(|&(_, a, s)| (a, s)).collect();

        Lts {
            num_states: n,
            initial: StateId::from(self.initial.min(n.saturating_sub(1))),
            labels: self.labels,
            label_index: self.label_index,
            out_start,
            out,
            in_start,
            inc,
        }
    }
}

fn action_range(row: &[(ActionId, StateId)], a: ActionId) -> &[(ActionId, StateId)] {
    let lo = row.partition_point(|&(b, _)| b < a);
    let hi = row.partition_point(|&(b, _)| b <= a);
    &row[lo..hi]
}

impl Lts {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_transitions(&self) -> usize {
        self.out.len()
    }

    pub fn num_actions(&self) -> usize {
        self.labels.len()
    }

    /// Initial state from the `.aut` header. Algorithms never consult it.
    pub fn initial_state(&self) -> StateId {
        self.initial
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + Clone {
        (0..self.num_states as u32).map(StateId)
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionId> + Clone {
        (0..self.labels.len() as u32).map(ActionId)
    }

    pub fn action_label(&self, a: ActionId) -> &str {
        &self.labels[a.index()]
    }

    pub fn action_id(&self, label: &str) -> Option<ActionId> {
        self.label_index.get(label).copied()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// All outgoing `(action, target)` pairs of `s`, sorted.
    pub fn outgoing(&self, s: StateId) -> &[(ActionId, StateId)] {
        &self.out[self.out_start[s.index()]..self.out_start[s.index() + 1]]
    }

    /// All incoming `(action, source)` pairs of `t`, sorted.
    pub fn incoming(&self, t: StateId) -> &[(ActionId, StateId)] {
        &self.inc[self.in_start[t.index()]..self.in_start[t.index() + 1]]
    }

    /// Sorted `a`-successors of `s`.
    pub fn successors(&self, s: StateId, a: ActionId) -> impl Iterator<Item = StateId> + Clone + '_ {
        action_range(self.outgoing(s), a).iter().map(|&(_, t)| t)
    }

    /// Sorted `a`-predecessors of `t`.
    pub fn predecessors(&self, t: StateId, a: ActionId) -> impl Iterator<Item = StateId> + Clone + '_ {
        action_range(self.incoming(t), a).iter().map(|&(_, s)| s)
    }

    pub fn has_successor(&self, s: StateId, a: ActionId) -> bool {
        !action_range(self.outgoing(s), a).is_empty()
    }

    /// Transition triples in `(source, action, target)` order.
    pub fn transitions(&self) -> impl Iterator<Item = (StateId, ActionId, StateId)> + '_ {
        self.states()
            .flat_map(move |s| self.outgoing(s).iter().map(move |&(a, t)| (s, a, t)))
    }

    /// Triple set with labels spelled out, independent of label interning order.
    pub fn labelled_triples(&self) -> BTreeSet<(u32, &str, u32)> {
        self.transitions()
            .map(|(s, a, t)| (s.0, self.action_label(a), t.0))
            .collect()
    }

    pub fn empty_set(&self) -> FixedBitSet {
        FixedBitSet::with_capacity(self.num_states)
    }

    pub fn full_set(&self) -> FixedBitSet {
        let mut set = FixedBitSet::with_capacity(self.num_states);
        set.insert_range(..);
        set
    }
}

// ---------------------------------------------------------------------------
// Aldebaran format

fn parse_usize(text: &str, line: usize, what: &str) -> Result<usize, LtsError> {
    text.trim()
        .parse::<usize>()
        .map_err(|_| parse_err(line, format!("invalid {what} `{}`", text.trim())))
}

/// Parses an Aldebaran `.aut` file: a `des (initial, transitions, states)`
/// header followed by one `(src, label, dst)` line per transition.
pub fn parse_aut(text: &str) -> Result<Lts, LtsError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (header_line, header) = lines.next().ok_or_else(|| parse_err(1, "missing `des` header"))?;
    let inner = header
        .strip_prefix("des")
        .map(str::trim)
        .and_then(|h| h.strip_prefix('('))
        .and_then(|h| h.strip_suffix(')'))
        .ok_or_else(|| parse_err(header_line, "expected header `des (initial, transitions, states)`"))?;
    let fields: Vec<&str> = inner.split(',').collect();
    if fields.len() != 3 {
        return Err(parse_err(header_line, "header needs three fields"));
    }
    let initial = parse_usize(fields[0], header_line, "initial state")?;
    let num_transitions = parse_usize(fields[1], header_line, "transition count")?;
    let num_states = parse_usize(fields[2], header_line, "state count")?;
    if num_states > 0 && initial >= num_states {
        return Err(parse_err(header_line, format!("initial state {initial} out of range")));
    }

    let mut builder = LtsBuilder::new(num_states).initial(initial);
    let mut seen = 0usize;
    for (line, body) in lines {
        let inner = body
            .strip_prefix('(')
            .and_then(|b| b.strip_suffix(')'))
            .ok_or_else(|| parse_err(line, "expected `(src, label, dst)`"))?;
        let first = inner.find(',').ok_or_else(|| parse_err(line, "missing `,`"))?;
        let last = inner.rfind(',').unwrap();
        if first == last {
            return Err(parse_err(line, "expected three fields"));
        }
        let src = parse_usize(&inner[..first], line, "source state")?;
        let dst = parse_usize(&inner[last + 1..], line, "target state")?;
        let raw = inner[first + 1..last].trim();
        let label = match raw.strip_prefix('"') {
            Some(rest) => rest
                .strip_suffix('"')
                .ok_or_else(|| parse_err(line, "unterminated quoted label"))?,
            None => raw,
        };
        if label.is_empty() {
            return Err(parse_err(line, "empty action label"));
        }
        for state in [src, dst] {
            if state >= num_states {
                return Err(parse_err(
                    line,
                    format!("state {state} out of range for {num_states} states"),
                ));
            }
        }
        builder.labelled(src, label, dst)?;
        seen += 1;
    }
    if seen != num_transitions {
        return Err(parse_err(
            header_line,
            format!("header declares {num_transitions} transitions, found {seen}"),
        ));
    }
    Ok(builder.build())
}

fn needs_quotes(label: &str) -> bool {
    !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Writes `lts` in `.aut` format. Labels with non-alphanumeric characters are
/// quoted.
pub fn write_aut(lts: &Lts) -> String {
    let mut out = format!(
        "des ({},{},{})\n",
        lts.initial_state(),
        lts.num_transitions(),
        lts.num_states()
    );
    for (s, a, t) in lts.transitions() {
        let label = lts.action_label(a);
        if needs_quotes(label) {
            out.push_str(&format!("({s},\"{label}\",{t})\n"));
        } else {
            out.push_str(&format!("({s},{label},{t})\n"));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Example families

/// The chain `x_n → x_{n-1} → … → x_0` on a single action `a`. State `x_i` has
/// index `i`.
pub fn gen_chain_a(n: usize) -> Lts {
    let mut b = LtsBuilder::new(n + 1);
    let a = b.action("a");
    for i in 1..=n {
        b.transition(i, a, i - 1).unwrap();
    }
    b.build()
}

/// Index of `x_i` in [`gen_ladder_b`].
pub fn ladder_x(i: usize) -> StateId {
    StateId::from(i)
}

/// Index of `y_i` in [`gen_ladder_b`]`(n)`.
pub fn ladder_y(n: usize, i: usize) -> StateId {
    StateId::from(n + 1 + i)
}

/// Two interleaved `a`-chains `x_n … x_0` and `y_n … y_0` with crossing edges
/// `y_i → x_{i-1}` for even `i`, `x_i → y_{i-1}` for odd `i`, and the
/// self-loop `y_0 → y_0`. Separating `x_n` from `y_n` needs `n` nested
/// negations.
pub fn gen_ladder_b(n: usize) -> Lts {
    let mut b = LtsBuilder::new(2 * (n + 1));
    let a = b.action("a");
    let x = |i: usize| ladder_x(i).index();
    let y = |i: usize| ladder_y(n, i).index();
    b.transition(y(0), a, y(0)).unwrap();
    for i in 1..=n {
        b.transition(y(i), a, y(i - 1)).unwrap();
        b.transition(x(i), a, x(i - 1)).unwrap();
        if i % 2 == 0 {
            b.transition(y(i), a, x(i - 1)).unwrap();
        } else {
            b.transition(x(i), a, y(i - 1)).unwrap();
        }
    }
    b.build()
}

/// Three states: `s0 -a-> s1`, `s1 -a-> s2`, `s1 -b-> s0`.
pub fn gen_figure_m() -> Lts {
    let mut b = LtsBuilder::new(3);
    let a = b.action("a");
    let bb = b.action("b");
    b.transition(0, a, 1).unwrap();
    b.transition(1, a, 2).unwrap();
    b.transition(1, bb, 0).unwrap();
    b.build()
}

/// Seeded random LTS: `round(density * states)` transitions drawn uniformly
/// over `(source, action, target)` with replacement, duplicates dropped.
/// Action labels are `a`, `b`, `c`, … (then `a26`, `a27`, …).
pub fn gen_random<R: Rng + ?Sized>(rng: &mut R, states: usize, actions: usize, density: f64) -> Lts {
    let mut b = LtsBuilder::new(states);
    let ids: Vec<ActionId> = (0..actions)
        .map(|i| {
            if i < 26 {
                b.action(&((b'a' + i as u8) as char).to_string())
            } else {
                b.action(&format!("a{i}"))
            }
        })
        .collect();
    if states == 0 || actions == 0 {
        return b.build();
    }
    let count = (density * states as f64).round() as usize;
    for _ in 0..count {
        let s = rng.gen_range(0..states);
        let a = ids[rng.gen_range(0..actions)];
        let t = rng.gen_range(0..states);
        b.transition(s, a, t).unwrap();
    }
    b.build()
}

// ---------------------------------------------------------------------------
// Traces

/// All traces of `s` of length at most `max_len`.
///
/// Explores words breadth-first together with the set of states reachable by
/// each word, so every word is produced once even on diamond-shaped systems.
pub fn traces_up_to(lts: &Lts, s: StateId, max_len: usize) -> BTreeSet<TraceWord> {
    let mut result = BTreeSet::new();
    let mut frontier: Vec<(TraceWord, BTreeSet<StateId>)> = vec![(TraceWord::empty(), BTreeSet::from([s]))];
    result.insert(TraceWord::empty());
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (word, reached) in &frontier {
            let mut by_action: BTreeMap<ActionId, BTreeSet<StateId>> = BTreeMap::new();
            for &u in reached {
                for &(a, v) in lts.outgoing(u) {
                    by_action.entry(a).or_default().insert(v);
                }
            }
            for (a, targets) in by_action {
                let mut w = word.clone();
                w.0.push(a);
                result.insert(w.clone());
                next.push((w, targets));
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    result
}

/// Whether `w` is a trace of `s`, by a forward walk over reachable state sets.
pub fn has_trace(lts: &Lts, s: StateId, w: &TraceWord) -> bool {
    let mut current = lts.empty_set();
    current.insert(s.index());
    for &a in &w.0 {
        let mut next = lts.empty_set();
        for u in current.ones() {
            for v in lts.successors(StateId::from(u), a) {
                next.insert(v.index());
            }
        }
        if next.is_clear() {
            return false;
        }
        current = next;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word(lts: &Lts, labels: &[&str]) -> TraceWord {
        TraceWord(labels.iter().map(|l| lts.action_id(l).unwrap()).collect())
    }

    #[test]
    fn parses_minimal_files() {
        let lts = parse_aut("des (0,1,2)\n(0,\"a\",1)\n").unwrap();
        assert_eq!(lts.num_states(), 2);
        assert_eq!(lts.num_transitions(), 1);
        let a = lts.action_id("a").unwrap();
        assert_eq!(lts.successors(StateId(0), a).collect::<Vec<_>>(), vec![StateId(1)]);

        let empty = parse_aut("des (0,0,1)").unwrap();
        assert_eq!(empty.num_states(), 1);
        assert_eq!(empty.num_transitions(), 0);
    }

    #[test]
    fn parses_unquoted_labels_with_commas() {
        let lts = parse_aut("des (1, 2, 3)\n(0, send(1,2), 1)\n(1, tau, 2)\n").unwrap();
        assert_eq!(lts.initial_state(), StateId(1));
        assert!(lts.action_id("send(1,2)").is_some());
        assert!(lts.action_id("tau").is_some());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_aut("des (0,1,2)\n(0,\"a\",2)\n").unwrap_err();
        assert!(matches!(err, LtsError::Parse { line: 2, .. }), "{err}");
        let err = parse_aut("des (0,2,2)\n(0,\"a\",1)\n").unwrap_err();
        assert!(matches!(err, LtsError::Parse { line: 1, .. }), "{err}");
        let err = parse_aut("bogus").unwrap_err();
        assert!(matches!(err, LtsError::Parse { line: 1, .. }));
        let err = parse_aut("des (0,1,2)\n\n(0 \"a\" 1)\n").unwrap_err();
        assert!(matches!(err, LtsError::Parse { line: 3, .. }));
    }

    #[test]
    fn writes_aut() {
        assert_eq!(write_aut(&LtsBuilder::new(1).build()), "des (0,0,1)\n");
        let text = write_aut(&gen_chain_a(3));
        assert!(text.starts_with("des (0,3,4)\n"));
        assert_eq!(text.lines().count(), 4);
        assert_eq!(parse_aut(&text).unwrap(), gen_chain_a(3));

        let mut b = LtsBuilder::new(2);
        b.labelled(0, "p1'", 1).unwrap();
        let lts = b.build();
        let text = write_aut(&lts);
        assert!(text.contains("\"p1'\""));
        assert_eq!(parse_aut(&text).unwrap(), lts);
    }

    #[test]
    fn chain_family() {
        let a3 = gen_chain_a(3);
        assert_eq!((a3.num_states(), a3.num_transitions()), (4, 3));
        let a0 = gen_chain_a(0);
        assert_eq!((a0.num_states(), a0.num_transitions()), (1, 0));
        let a10 = gen_chain_a(10);
        let a = a10.action_id("a").unwrap();
        assert_eq!(a10.successors(StateId(10), a).count(), 1);
    }

    #[test]
    fn ladder_family() {
        let b3 = gen_ladder_b(3);
        assert_eq!((b3.num_states(), b3.num_transitions()), (8, 10));
        let b0 = gen_ladder_b(0);
        assert_eq!((b0.num_states(), b0.num_transitions()), (2, 1));
        let a = b3.action_id("a").unwrap();
        let succ: Vec<_> = b3.successors(ladder_x(1), a).collect();
        assert_eq!(succ, vec![ladder_x(0), ladder_y(3, 0)]);
        // y_2 -> x_1 (even), x_3 -> y_2 (odd)
        assert!(b3.successors(ladder_y(3, 2), a).any(|t| t == ladder_x(1)));
        assert!(b3.successors(ladder_x(3), a).any(|t| t == ladder_y(3, 2)));
    }

    #[test]
    fn figure_m() {
        let m = gen_figure_m();
        assert_eq!((m.num_states(), m.num_transitions()), (3, 3));
        let a = m.action_id("a").unwrap();
        let b = m.action_id("b").unwrap();
        assert!(!m.has_successor(StateId(0), b));
        assert!(m.has_successor(StateId(1), a) && m.has_successor(StateId(1), b));
    }

    #[test]
    fn traces_of_examples() {
        let m = gen_figure_m();
        assert_eq!(traces_up_to(&m, StateId(2), 5), BTreeSet::from([TraceWord::empty()]));

        let a3 = gen_chain_a(3);
        let expected: BTreeSet<_> = (0..=3).map(|i| word(&a3, &vec!["a"; i])).collect();
        assert_eq!(traces_up_to(&a3, StateId(3), 3), expected);

        let b1 = gen_ladder_b(1);
        let expected: BTreeSet<_> = (0..=2).map(|i| word(&b1, &vec!["a"; i])).collect();
        assert_eq!(traces_up_to(&b1, ladder_y(1, 0), 2), expected);
    }

    #[test]
    fn has_trace_walks() {
        let a3 = gen_chain_a(3);
        assert!(has_trace(&a3, StateId(0), &TraceWord::empty()));
        assert!(!has_trace(&a3, StateId(2), &word(&a3, &["a", "a", "a"])));
        assert!(has_trace(&a3, StateId(3), &word(&a3, &["a", "a", "a"])));
    }

    #[test]
    fn chain_traces_exhaustive() {
        for n in 0..=12 {
            let lts = gen_chain_a(n);
            for i in 0..=n {
                let expected: BTreeSet<_> = (0..=i).map(|j| word(&lts, &vec!["a"; j])).collect();
                assert_eq!(traces_up_to(&lts, StateId::from(i), n + 2), expected);
            }
        }
    }

    #[test]
    fn builder_rejects_out_of_range() {
        let mut b = LtsBuilder::new(2);
        let a = b.action("a");
        assert_eq!(
            b.transition(0, a, 2),
            Err(LtsError::StateOutOfRange {
                state: 2,
                num_states: 2
            })
        );
        assert_eq!(b.labelled(0, "", 1), Err(LtsError::EmptyLabel));
    }

    #[test]
    fn duplicate_triples_collapse() {
        let lts = parse_aut("des (0,2,2)\n(0,a,1)\n(0,\"a\",1)\n").unwrap();
        assert_eq!(lts.num_transitions(), 1);
    }
}
