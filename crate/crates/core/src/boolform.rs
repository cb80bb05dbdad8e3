//! Propositional formulas over closed questions.
//!
//! A [`Formula`] is a tree over atom indices. Atom `0` is the first question
//! mentioned in surface order. Binary connectives fold to the left, so
//! `Q1 AND Q2 OR Q3` reads as `(Q1 AND Q2) OR Q3`.
//!
//! Two text forms exist:
//!
//! * the prefix form `AND(Q1,NOT(Q2))` used in dataset records, where `Qk`
//!   names atom `k - 1`;
//! * the infix catalog label `Q1 AND NOT Q2`, where operand names (`Q1`, `Q`,
//!   `B`, `C`, `anto(B)`, ...) are numbered by first appearance.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest atom count accepted by [`truth_table`].
pub const MAX_TRUTH_TABLE_ATOMS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("arity mismatch: formula has {expected} atoms, got {actual}")]
    Arity { expected: usize, actual: usize },
    #[error("formula has {0} atoms; truth tables are limited to {MAX_TRUTH_TABLE_ATOMS}")]
    Capacity(usize),
    #[error("atom indices are not contiguous: atom {0} is missing")]
    NonContiguous(usize),
    #[error("formula is not in negation normal form")]
    NotNnf,
    #[error("formula is not a left-folded chain of literals")]
    NotChain,
    #[error("cannot parse formula `{input}` at byte {pos}: {msg}")]
    Syntax {
        input: String,
        pos: usize,
        msg: String,
    },
}

/// Propositional formula over atom indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(usize),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

/// Binary connective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Connective {
    And,
    Or,
}

impl Connective {
    pub fn word(self) -> &'static str {
        match self {
            Connective::And => "and",
            Connective::Or => "or",
        }
    }

    pub fn apply(self, left: Formula, right: Formula) -> Formula {
        match self {
            Connective::And => Formula::and(left, right),
            Connective::Or => Formula::or(left, right),
        }
    }
}

/// A possibly negated atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Literal {
    pub atom: usize,
    pub negated: bool,
}

impl Literal {
    pub fn to_formula(self) -> Formula {
        let atom = Formula::Atom(self.atom);
        if self.negated {
            Formula::not(atom)
        } else {
            atom
        }
    }
}

/// Flat view of a left-folded chain `l0 c1 l1 c2 l2 ...`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub literals: Vec<Literal>,
    /// `connectives[i]` joins everything before literal `i + 1` with it.
    pub connectives: Vec<Connective>,
}

impl Chain {
    pub fn to_formula(&self) -> Formula {
        let mut iter = self.literals.iter();
        let first = iter.next().expect("chain has at least one literal").to_formula();
        iter.zip(&self.connectives)
            .fold(first, |acc, (lit, conn)| conn.apply(acc, lit.to_formula()))
    }
}

impl Formula {
    pub fn atom(i: usize) -> Self {
        Formula::Atom(i)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(l: Formula, r: Formula) -> Self {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Self {
        Formula::Or(Box::new(l), Box::new(r))
    }

    /// Left fold of `items` under one connective.
    pub fn fold_left(conn: Connective, items: impl IntoIterator<Item = Formula>) -> Option<Self> {
        items.into_iter().reduce(|acc, f| conn.apply(acc, f))
    }

    /// Number of atoms, i.e. one past the largest atom index.
    pub fn atom_count(&self) -> usize {
        match self {
            Formula::Atom(i) => i + 1,
            Formula::Not(f) => f.atom_count(),
            Formula::And(l, r) | Formula::Or(l, r) => l.atom_count().max(r.atom_count()),
        }
    }

    /// Atom indices in left-to-right leaf order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            Formula::Atom(i) => out.push(*i),
            Formula::Not(f) => f.collect_leaves(out),
            Formula::And(l, r) | Formula::Or(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    /// Checks that atom indices cover `0..atom_count()` without gaps.
    pub fn validate(&self) -> Result<(), FormulaError> {
        let n = self.atom_count();
        let mut seen = vec![false; n];
        for i in self.leaves() {
            seen[i] = true;
        }
        match seen.iter().position(|s| !s) {
            Some(missing) => Err(FormulaError::NonContiguous(missing)),
            None => Ok(()),
        }
    }

    /// Number of NOT/AND/OR nodes.
    pub fn connective_count(&self) -> usize {
        match self {
            Formula::Atom(_) => 0,
            Formula::Not(f) => 1 + f.connective_count(),
            Formula::And(l, r) | Formula::Or(l, r) => 1 + l.connective_count() + r.connective_count(),
        }
    }

    /// Number of AND/OR nodes.
    pub fn binary_count(&self) -> usize {
        match self {
            Formula::Atom(_) => 0,
            Formula::Not(f) => f.binary_count(),
            Formula::And(l, r) | Formula::Or(l, r) => 1 + l.binary_count() + r.binary_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Atom(_) => 1,
            Formula::Not(f) => 1 + f.depth(),
            Formula::And(l, r) | Formula::Or(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// True when negations only wrap atoms.
    pub fn is_nnf(&self) -> bool {
        match self {
            Formula::Atom(_) => true,
            Formula::Not(f) => matches!(**f, Formula::Atom(_)),
            Formula::And(l, r) | Formula::Or(l, r) => l.is_nnf() && r.is_nnf(),
        }
    }

    /// Views the formula as a left-folded chain of literals, if it is one.
    pub fn as_chain(&self) -> Result<Chain, FormulaError> {
        fn literal(f: &Formula) -> Option<Literal> {
            match f {
                Formula::Atom(i) => Some(Literal { atom: *i, negated: false }),
                Formula::Not(inner) => match **inner {
                    Formula::Atom(i) => Some(Literal { atom: i, negated: true }),
                    _ => None,
                },
                _ => None,
            }
        }
        let mut literals = Vec::new();
        let mut connectives = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Formula::And(l, r) | Formula::Or(l, r) => {
                    let lit = literal(r).ok_or(FormulaError::NotChain)?;
                    literals.push(lit);
                    connectives.push(if matches!(cur, Formula::And(..)) {
                        Connective::And
                    } else {
                        Connective::Or
                    });
                    cur = l;
                }
                other => {
                    let lit = literal(other).ok_or_else(|| {
                        if other.is_nnf() {
                            FormulaError::NotChain
                        } else {
                            FormulaError::NotNnf
                        }
                    })?;
                    literals.push(lit);
                    break;
                }
            }
        }
        literals.reverse();
        connectives.reverse();
        Ok(Chain {
            literals,
            connectives,
        })
    }

    /// Renames every atom `i` to `map[i]`.
    pub fn relabel(&self, map: &[usize]) -> Formula {
        match self {
            Formula::Atom(i) => Formula::Atom(map[*i]),
            Formula::Not(f) => Formula::not(f.relabel(map)),
            Formula::And(l, r) => Formula::and(l.relabel(map), r.relabel(map)),
            Formula::Or(l, r) => Formula::or(l.relabel(map), r.relabel(map)),
        }
    }

    /// Swaps the children of every binary node.
    pub fn mirror(&self) -> Formula {
        match self {
            Formula::Atom(i) => Formula::Atom(*i),
            Formula::Not(f) => Formula::not(f.mirror()),
            Formula::And(l, r) => Formula::and(r.mirror(), l.mirror()),
            Formula::Or(l, r) => Formula::or(r.mirror(), l.mirror()),
        }
    }

    /// Prefix serialization, e.g. `AND(Q1,NOT(Q2))`.
    pub fn to_prefix(&self) -> String {
        match self {
            Formula::Atom(i) => format!("Q{}", i + 1),
            Formula::Not(f) => format!("NOT({})", f.to_prefix()),
            Formula::And(l, r) => format!("AND({},{})", l.to_prefix(), r.to_prefix()),
            Formula::Or(l, r) => format!("OR({},{})", l.to_prefix(), r.to_prefix()),
        }
    }

    /// Infix rendering with equal-precedence, left-associative connectives.
    pub fn to_infix(&self) -> String {
        self.infix_with(&|i| format!("Q{}", i + 1))
    }

    /// Infix rendering with caller-chosen operand names.
    pub fn infix_with(&self, name: &dyn Fn(usize) -> String) -> String {
        match self {
            Formula::Atom(i) => name(*i),
            Formula::Not(f) => match **f {
                Formula::Atom(_) | Formula::Not(_) => format!("NOT {}", f.infix_with(name)),
                _ => format!("NOT ({})", f.infix_with(name)),
            },
            Formula::And(l, r) | Formula::Or(l, r) => {
                let op = if matches!(self, Formula::And(..)) { "AND" } else { "OR" };
                let right = match **r {
                    Formula::And(..) | Formula::Or(..) => format!("({})", r.infix_with(name)),
                    _ => r.infix_with(name),
                };
                format!("{} {} {}", l.infix_with(name), op, right)
            }
        }
    }

    /// Parses the prefix form produced by [`Formula::to_prefix`].
    /// Whitespace is ignored.
    pub fn parse_prefix(input: &str) -> Result<Formula, FormulaError> {
        let compact: String = input.chars().filter(|c| !c.is_whitespace()).collect();
        let mut p = PrefixParser {
            src: &compact,
            pos: 0,
            orig: input,
        };
        let f = p.expr()?;
        if p.pos != compact.len() {
            return Err(p.err("trailing input"));
        }
        Ok(f)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_prefix())
    }
}

impl Serialize for Formula {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_prefix())
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Formula::parse_prefix(&s).map_err(serde::de::Error::custom)
    }
}

struct PrefixParser<'a> {
    src: &'a str,
    pos: usize,
    orig: &'a str,
}

impl PrefixParser<'_> {
    fn err(&self, msg: &str) -> FormulaError {
        FormulaError::Syntax {
            input: self.orig.to_string(),
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.src[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), FormulaError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{s}`")))
        }
    }

    fn expr(&mut self) -> Result<Formula, FormulaError> {
        if self.eat("NOT(") {
            let f = self.expr()?;
            self.expect(")")?;
            Ok(Formula::not(f))
        } else if self.eat("AND(") {
            let (l, r) = self.pair()?;
            Ok(Formula::and(l, r))
        } else if self.eat("OR(") {
            let (l, r) = self.pair()?;
            Ok(Formula::or(l, r))
        } else if self.eat("Q") {
            let start = self.pos;
            while self.src[self.pos..].starts_with(|c: char| c.is_ascii_digit()) {
                self.pos += 1;
            }
            let k: usize = self.src[start..self.pos]
                .parse()
                .map_err(|_| self.err("expected atom number"))?;
            if k == 0 {
                return Err(self.err("atoms are numbered from Q1"));
            }
            Ok(Formula::Atom(k - 1))
        } else {
            Err(self.err("expected NOT(, AND(, OR( or Qk"))
        }
    }

    fn pair(&mut self) -> Result<(Formula, Formula), FormulaError> {
        let l = self.expr()?;
        self.expect(",")?;
        let r = self.expr()?;
        self.expect(")")?;
        Ok((l, r))
    }
}

/// Parses an infix catalog label such as `Q1 AND NOT Q2` or
/// `NOT Q AND anto(B)`.
///
/// Operand names are numbered by first appearance, so `NOT Q2` parses to
/// `NOT(Q1)` and `Q2 OR Q1` to `OR(Q1,Q2)`. The operand names in order of
/// first appearance are returned alongside the formula.
pub fn parse_label(label: &str) -> Result<(Formula, Vec<String>), FormulaError> {
    let tokens = tokenize_label(label)?;
    let mut p = LabelParser {
        tokens,
        pos: 0,
        names: Vec::new(),
        orig: label,
    };
    let f = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(p.err("trailing input"));
    }
    Ok((f, p.names))
}

fn tokenize_label(label: &str) -> Result<Vec<String>, FormulaError> {
    let mut out = Vec::new();
    let bytes = label.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c == '(' || c == ')' {
            out.push(c.to_string());
            i += 1;
        } else if label[i..].starts_with("anto(") {
            let end = label[i..].find(')').ok_or_else(|| FormulaError::Syntax {
                input: label.to_string(),
                pos: i,
                msg: "unterminated anto(".into(),
            })?;
            out.push(label[i..i + end + 1].to_string());
            i += end + 1;
        } else if c.is_ascii_alphanumeric() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(label[start..i].to_string());
        } else {
            return Err(FormulaError::Syntax {
                input: label.to_string(),
                pos: i,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct LabelParser<'a> {
    tokens: Vec<String>,
    pos: usize,
    names: Vec<String>,
    orig: &'a str,
}

impl LabelParser<'_> {
    fn err(&self, msg: &str) -> FormulaError {
        FormulaError::Syntax {
            input: self.orig.to_string(),
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(String::as_str)
    }

    fn expr(&mut self) -> Result<Formula, FormulaError> {
        let mut acc = self.term()?;
        while let Some(op) = self.peek() {
            let conn = match op {
                "AND" => Connective::And,
                "OR" => Connective::Or,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            acc = conn.apply(acc, rhs);
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Formula, FormulaError> {
        match self.peek() {
            Some("NOT") => {
                self.pos += 1;
                Ok(Formula::not(self.term()?))
            }
            Some("(") => {
                self.pos += 1;
                let f = self.expr()?;
                if self.peek() != Some(")") {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(f)
            }
            Some("AND") | Some("OR") | Some(")") | None => Err(self.err("expected operand")),
            Some(name) => {
                let name = name.to_string();
                self.pos += 1;
                let idx = match self.names.iter().position(|n| *n == name) {
                    Some(i) => i,
                    None => {
                        self.names.push(name);
                        self.names.len() - 1
                    }
                };
                Ok(Formula::Atom(idx))
            }
        }
    }
}

/// Evaluates `f` under `assignment` (`true` = "yes").
pub fn eval(f: &Formula, assignment: &[bool]) -> Result<bool, FormulaError> {
    let n = f.atom_count();
    if assignment.len() != n {
        return Err(FormulaError::Arity {
            expected: n,
            actual: assignment.len(),
        });
    }
    Ok(eval_unchecked(f, assignment))
}

pub(crate) fn eval_unchecked(f: &Formula, a: &[bool]) -> bool {
    match f {
        Formula::Atom(i) => a[*i],
        Formula::Not(g) => !eval_unchecked(g, a),
        Formula::And(l, r) => eval_unchecked(l, a) && eval_unchecked(r, a),
        Formula::Or(l, r) => eval_unchecked(l, a) || eval_unchecked(r, a),
    }
}

/// Assignment for row `k` of a truth table: atom 0 is the low bit.
pub fn assignment_for_row(k: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| (k >> i) & 1 == 1).collect()
}

/// Truth table in binary counting order with atom 0 as the least significant bit.
pub fn truth_table(f: &Formula) -> Result<Vec<bool>, FormulaError> {
    let n = f.atom_count();
    if n > MAX_TRUTH_TABLE_ATOMS {
        return Err(FormulaError::Capacity(n));
    }
    Ok((0..1usize << n)
        .map(|k| eval_unchecked(f, &assignment_for_row(k, n)))
        .collect())
}

/// Truth-table equivalence of two formulas over the same atoms.
pub fn equivalent(f: &Formula, g: &Formula) -> Result<bool, FormulaError> {
    let (nf, ng) = (f.atom_count(), g.atom_count());
    if nf != ng {
        return Err(FormulaError::Arity {
            expected: nf,
            actual: ng,
        });
    }
    Ok(truth_table(f)? == truth_table(g)?)
}

/// Pushes negations down to the atoms with De Morgan's laws and removes
/// double negations.
pub fn demorgan_nnf(f: &Formula) -> Formula {
    fn pos(f: &Formula) -> Formula {
        match f {
            Formula::Atom(i) => Formula::Atom(*i),
            Formula::Not(g) => neg(g),
            Formula::And(l, r) => Formula::and(pos(l), pos(r)),
            Formula::Or(l, r) => Formula::or(pos(l), pos(r)),
        }
    }
    fn neg(f: &Formula) -> Formula {
        match f {
            Formula::Atom(i) => Formula::not(Formula::Atom(*i)),
            Formula::Not(g) => pos(g),
            Formula::And(l, r) => Formula::or(neg(l), neg(r)),
            Formula::Or(l, r) => Formula::and(neg(l), neg(r)),
        }
    }
    pos(f)
}

/// Where an operand of a catalog formula comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Vqa,
    Object,
    Caption,
    Antonym,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Vqa => "vqa",
            Source::Object => "object",
            Source::Caption => "caption",
            Source::Antonym => "antonym",
        }
    }
}

/// One row of a formula catalog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormulaCatalogEntry {
    pub label: String,
    pub formula: Formula,
    pub connective_count: usize,
    pub operand_roles: Vec<Source>,
    /// Counted among the twenty additional supplement formulas.
    pub supplemental: bool,
}

impl FormulaCatalogEntry {
    fn from_label(label: &str, supplemental: bool) -> Self {
        let (formula, names) = parse_label(label).expect("catalog labels are well formed");
        let operand_roles = names
            .iter()
            .map(|n| match n.as_str() {
                "B" => Source::Object,
                "C" => Source::Caption,
                "anto(B)" => Source::Antonym,
                _ => Source::Vqa,
            })
            .collect();
        FormulaCatalogEntry {
            label: label.to_string(),
            connective_count: formula.connective_count(),
            formula,
            operand_roles,
            supplemental,
        }
    }

    pub fn atom_count(&self) -> usize {
        self.formula.atom_count()
    }
}

const COMPOSE_LABELS: [&str; 10] = [
    "NOT Q1",
    "NOT Q2",
    "Q1 AND Q2",
    "Q1 OR Q2",
    "Q1 AND NOT Q2",
    "Q1 OR NOT Q2",
    "NOT Q1 AND Q2",
    "NOT Q1 OR Q2",
    "NOT Q1 AND NOT Q2",
    "NOT Q1 OR NOT Q2",
];

const SUPPLEMENT_LABELS: [&str; 22] = [
    "Q",
    "NOT Q",
    "Q AND B",
    "Q OR B",
    "Q AND anto(B)",
    "Q OR anto(B)",
    "Q AND C",
    "Q OR C",
    "Q AND NOT B",
    "Q OR NOT B",
    "NOT Q AND B",
    "NOT Q OR B",
    "NOT Q AND NOT B",
    "NOT Q OR NOT B",
    "NOT Q AND anto(B)",
    "NOT Q OR anto(B)",
    "Q AND NOT C",
    "Q OR NOT C",
    "NOT Q AND C",
    "NOT Q OR C",
    "NOT Q AND NOT C",
    "NOT Q OR NOT C",
];

/// The ten formulas composed from a pair of closed questions, in table order.
pub fn compose_catalog() -> Vec<FormulaCatalogEntry> {
    COMPOSE_LABELS
        .iter()
        .map(|l| FormulaCatalogEntry::from_label(l, false))
        .collect()
}

/// The 22 supplement templates; all but `Q` and `NOT Q` are supplemental.
pub fn supplement_catalog() -> Vec<FormulaCatalogEntry> {
    SUPPLEMENT_LABELS
        .iter()
        .map(|l| FormulaCatalogEntry::from_label(l, *l != "Q" && *l != "NOT Q"))
        .collect()
}
