//! Formula text syntax.
//!
//! ```text
//! φ ::= true | false | <label>φ | [label]φ | !φ | φ && φ | φ || φ | (φ) | name
//! ```
//!
//! `false`, `[a]φ` and `||` are sugar for `!true`, `!<a>!φ` and
//! `!(!φ && !ψ)`. A text whose first line has the shape `name = φ` is an
//! equation block: one equation per line, the first one is the root, and
//! names may be referenced before they are defined.

use std::collections::HashMap;
use std::fmt::Write;

use super::{FormulaNode, FormulaStore, HmlError, NodeId};

/// Largest unfolded tree that [`RenderStyle::Inline`] prints.
pub const INLINE_LIMIT: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenderStyle {
    Inline,
    Equations,
}

fn label_text(label: &str) -> String {
    let plain = !label.is_empty()
        && !label
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '<' | '>' | '[' | ']' | '"' | '\\'));
    if plain {
        label.to_string()
    } else {
        let escaped = label.replace('\\', "\\\\").replace('"', "\\\"");
        format!("\"{escaped}\"")
    }
}

fn write_node(store: &FormulaStore, node: NodeId, names: &HashMap<NodeId, String>, top: bool, out: &mut String) {
    if !top {
        if let Some(name) = names.get(&node) {
            out.push_str(name);
            return;
        }
    }
    match store.node(node) {
        FormulaNode::True => out.push_str("true"),
        FormulaNode::Diamond(a, c) => {
            let _ = write!(out, "<{}>", label_text(store.action_label(*a)));
            write_operand(store, *c, names, out);
        }
        FormulaNode::Neg(c) => {
            out.push('!');
            write_operand(store, *c, names, out);
        }
        FormulaNode::And(cs) => {
            for (k, c) in cs.iter().enumerate() {
                if k > 0 {
                    out.push_str(" && ");
                }
                write_node(store, *c, names, false, out);
            }
        }
    }
}

fn write_operand(store: &FormulaStore, node: NodeId, names: &HashMap<NodeId, String>, out: &mut String) {
    let wrap = matches!(store.node(node), FormulaNode::And(_)) && !names.contains_key(&node);
    if wrap {
        out.push('(');
    }
    write_node(store, node, names, false, out);
    if wrap {
        out.push(')');
    }
}

/// Renders `node`. The inline style unfolds all sharing and refuses trees
/// larger than [`INLINE_LIMIT`] nodes; the equations style names the root
/// `phi1` and every non-trivial node referenced at least twice.
pub fn render(store: &FormulaStore, node: NodeId, style: RenderStyle) -> Result<String, HmlError> {
    match style {
        RenderStyle::Inline => {
            if store.tree_nodes(node) > INLINE_LIMIT {
                return Err(HmlError::TooLarge { limit: INLINE_LIMIT });
            }
            let mut out = String::new();
            write_node(store, node, &HashMap::new(), true, &mut out);
            Ok(out)
        }
        RenderStyle::Equations => Ok(render_equations(store, node)),
    }
}

fn render_equations(store: &FormulaStore, root: NodeId) -> String {
    let mut refs: HashMap<NodeId, usize> = HashMap::new();
    for n in store.reachable(root) {
        for c in store.node(n).children() {
            *refs.entry(*c).or_default() += 1;
        }
    }
    // names in order of first appearance, depth first, left to right
    let mut order = vec![root];
    let mut names = HashMap::from([(root, "phi1".to_string())]);
    let mut stack = vec![root];
    let mut visited = std::collections::HashSet::new();
    while let Some(n) = stack.pop() {
        if !visited.insert(n) {
            continue;
        }
        for &c in store.node(n).children() {
            if !store.is_true(c) && refs[&c] >= 2 && !names.contains_key(&c) {
                names.insert(c, format!("phi{}", order.len() + 1));
                order.push(c);
            }
        }
        stack.extend(store.node(n).children().iter().rev());
    }
    let mut out = String::new();
    for n in order {
        let _ = write!(out, "{} = ", names[&n]);
        write_node(store, n, &names, true, &mut out);
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    True,
    False,
    Ident(String),
    Diamond(String),
    Box(String),
    Not,
    And,
    Or,
    LParen,
    RParen,
    End,
}

#[derive(Clone, Debug)]
enum Ast {
    True,
    Name(String, usize, usize),
    Diamond(String, Box<Ast>),
    Neg(Box<Ast>),
    And(Box<Ast>, Box<Ast>),
}

struct Lexer<'t> {
    text: &'t str,
    pos: usize,
    line: usize,
    col_base: usize,
}

impl<'t> Lexer<'t> {
    fn error(&self, at: usize, message: impl Into<String>) -> HmlError {
        HmlError::Syntax {
            line: self.line,
            column: self.col_base + self.text[..at].chars().count() + 1,
            message: message.into(),
        }
    }

    fn label(&mut self, close: char) -> Result<String, HmlError> {
        let start = self.pos;
        let rest = &self.text[self.pos..];
        let trimmed = rest.trim_start();
        self.pos += rest.len() - trimmed.len();
        if let Some(body) = trimmed.strip_prefix('"') {
            let mut label = String::new();
            let mut chars = body.char_indices();
            loop {
                match chars.next() {
                    None => return Err(self.error(start, "unterminated quoted label")),
                    Some((_, '\\')) => match chars.next() {
                        Some((_, c)) => label.push(c),
                        None => return Err(self.error(start, "unterminated quoted label")),
                    },
                    Some((i, '"')) => {
                        self.pos += 1 + i + 1;
                        break;
                    }
                    Some((_, c)) => label.push(c),
                }
            }
            let rest = &self.text[self.pos..];
            let trimmed = rest.trim_start();
            self.pos += rest.len() - trimmed.len();
            if !trimmed.starts_with(close) {
                return Err(self.error(self.pos, format!("expected `{close}` after label")));
            }
            self.pos += 1;
            Ok(label)
        } else {
            let end = trimmed
                .find(close)
                .ok_or_else(|| self.error(start, format!("missing `{close}`")))?;
            let label = trimmed[..end].trim().to_string();
            if label.is_empty() {
                return Err(self.error(start, "empty action label"));
            }
            self.pos += end + 1;
            Ok(label)
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), HmlError> {
        let rest = &self.text[self.pos..];
        let trimmed = rest.trim_start();
        self.pos += rest.len() - trimmed.len();
        let at = self.pos;
        let Some(c) = trimmed.chars().next() else {
            return Ok((Tok::End, at));
        };
        let tok = match c {
            '(' => {
                self.pos += 1;
                Tok::LParen
            }
            ')' => {
                self.pos += 1;
                Tok::RParen
            }
            '!' => {
                self.pos += 1;
                Tok::Not
            }
            '<' => {
                self.pos += 1;
                Tok::Diamond(self.label('>')?)
            }
            '[' => {
                self.pos += 1;
                Tok::Box(self.label(']')?)
            }
            '&' if trimmed.starts_with("&&") => {
                self.pos += 2;
                Tok::And
            }
            '|' if trimmed.starts_with("||") => {
                self.pos += 2;
                Tok::Or
            }
            c if c.is_alphabetic() || c == '_' => {
                let len = trimmed
                    .find(|ch: char| !(ch.is_alphanumeric() || ch == '_'))
                    .unwrap_or(trimmed.len());
                self.pos += len;
                match &trimmed[..len] {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    word => Tok::Ident(word.to_string()),
                }
            }
            other => return Err(self.error(at, format!("unexpected character `{other}`"))),
        };
        Ok((tok, at))
    }
}

struct Parser<'t> {
    lexer: Lexer<'t>,
    peeked: (Tok, usize),
}

impl<'t> Parser<'t> {
    fn new(text: &'t str, line: usize, col_base: usize) -> Result<Self, HmlError> {
        let mut lexer = Lexer {
            text,
            pos: 0,
            line,
            col_base,
        };
        let peeked = lexer.next()?;
        Ok(Parser { lexer, peeked })
    }

    fn bump(&mut self) -> Result<(Tok, usize), HmlError> {
        let next = self.lexer.next()?;
        Ok(std::mem::replace(&mut self.peeked, next))
    }

    fn formula(&mut self) -> Result<Ast, HmlError> {
        let mut lhs = self.conjunction()?;
        while self.peeked.0 == Tok::Or {
            self.bump()?;
            let rhs = self.conjunction()?;
            let both = Ast::And(Box::new(Ast::Neg(Box::new(lhs))), Box::new(Ast::Neg(Box::new(rhs))));
            lhs = Ast::Neg(Box::new(both));
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Ast, HmlError> {
        let mut lhs = self.unary()?;
        while self.peeked.0 == Tok::And {
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Ast::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Ast, HmlError> {
        let (tok, at) = self.bump()?;
        Ok(match tok {
            Tok::True => Ast::True,
            Tok::False => Ast::Neg(Box::new(Ast::True)),
            Tok::Not => Ast::Neg(Box::new(self.unary()?)),
            Tok::Diamond(label) => Ast::Diamond(label, Box::new(self.unary()?)),
            Tok::Box(label) => {
                let body = Ast::Neg(Box::new(self.unary()?));
                Ast::Neg(Box::new(Ast::Diamond(label, Box::new(body))))
            }
            Tok::Ident(name) => {
                let column = self.lexer.col_base + self.lexer.text[..at].chars().count() + 1;
                Ast::Name(name, self.lexer.line, column)
            }
            Tok::LParen => {
                let inner = self.formula()?;
                let (close, at) = self.bump()?;
                if close != Tok::RParen {
                    return Err(self.lexer.error(at, "expected `)`"));
                }
                inner
            }
            other => return Err(self.lexer.error(at, format!("unexpected {other:?}"))),
        })
    }

    fn finish(mut self) -> Result<(), HmlError> {
        let (tok, at) = self.bump()?;
        if tok != Tok::End {
            return Err(self.lexer.error(at, format!("unexpected {tok:?}")));
        }
        Ok(())
    }
}

fn equation_head(line: &str) -> Option<(&str, usize)> {
    let trimmed = line.trim_start();
    let len = trimmed.find(|c: char| !(c.is_alphanumeric() || c == '_'))?;
    let name = &trimmed[..len];
    if name.is_empty() || !name.starts_with(|c: char| c.is_alphabetic() || c == '_') {
        return None;
    }
    if name == "true" || name == "false" {
        return None;
    }
    let after = trimmed[len..].trim_start();
    let body = after.strip_prefix('=')?;
    if body.starts_with('=') {
        return None;
    }
    Some((name, line.len() - body.len()))
}

struct Resolver<'s> {
    store: &'s mut FormulaStore,
    equations: HashMap<String, Ast>,
    done: HashMap<String, NodeId>,
    active: Vec<String>,
}

impl Resolver<'_> {
    fn build(&mut self, ast: &Ast) -> Result<NodeId, HmlError> {
        Ok(match ast {
            Ast::True => self.store.mk_true(),
            Ast::Neg(c) => {
                let c = self.build(c)?;
                self.store.mk_neg(c)
            }
            Ast::Diamond(label, c) => {
                let c = self.build(c)?;
                let a = self.store.action(label);
                self.store.mk_diamond(a, c)
            }
            Ast::And(l, r) => {
                let l = self.build(l)?;
                let r = self.build(r)?;
                self.store.conjoin([l, r])
            }
            Ast::Name(name, line, column) => self.name(name, *line, *column)?,
        })
    }

    fn name(&mut self, name: &str, line: usize, column: usize) -> Result<NodeId, HmlError> {
        if let Some(&id) = self.done.get(name) {
            return Ok(id);
        }
        let err = |message: String| HmlError::Syntax { line, column, message };
        if self.active.iter().any(|n| n == name) {
            return Err(err(format!("cyclic definition of `{name}`")));
        }
        let ast = self
            .equations
            .get(name)
            .cloned()
            .ok_or_else(|| err(format!("undefined name `{name}`")))?;
        self.active.push(name.to_string());
        let id = self.build(&ast)?;
        self.active.pop();
        self.done.insert(name.to_string(), id);
        Ok(id)
    }
}

/// Parses a formula or an equation block into `store`.
pub fn parse_formula(store: &mut FormulaStore, text: &str) -> Result<NodeId, HmlError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .collect();
    let block = lines.first().is_some_and(|(_, l)| equation_head(l).is_some());

    if !block {
        let mut parser = Parser::new(text, 1, 0)?;
        let ast = parser.formula()?;
        parser.finish()?;
        let mut resolver = Resolver {
            store,
            equations: HashMap::new(),
            done: HashMap::new(),
            active: Vec::new(),
        };
        return resolver.build(&ast);
    }

    let mut equations = HashMap::new();
    let mut root = None;
    for (line_no, line) in lines {
        let (name, offset) = equation_head(line).ok_or_else(|| HmlError::Syntax {
            line: line_no,
            column: 1,
            message: "expected `name = formula`".into(),
        })?;
        let body = &line[offset..];
        let mut parser = Parser::new(body, line_no, line[..offset].chars().count())?;
        let ast = parser.formula()?;
        parser.finish()?;
        if equations.insert(name.to_string(), ast).is_some() {
            return Err(HmlError::Syntax {
                line: line_no,
                column: 1,
                message: format!("`{name}` defined twice"),
            });
        }
        root.get_or_insert((name.to_string(), line_no));
    }
    let (root, line) = root.unwrap();
    let mut resolver = Resolver {
        store,
        equations,
        done: HashMap::new(),
        active: Vec::new(),
    };
    resolver.name(&root, line, 1)
}
