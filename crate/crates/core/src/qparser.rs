//! Rule-based decomposition of composed questions and parser metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boolform::{Chain, Connective, Formula, Literal};
use crate::textgen::{self, SurfaceQuestion};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("component `{component}` not found in `{text}`")]
    Alignment { component: String, text: String },
    #[error("gold has {gold} items, prediction has {pred}")]
    Length { gold: usize, pred: usize },
    #[error("token count differs between gold ({gold}) and prediction ({pred}) for `{text}`")]
    TokenMismatch { gold: usize, pred: usize, text: String },
}

/// Noun compounds that must not be split at their connective.
pub const STOP_PHRASES: &[&str] = &[
    "black and white",
    "salt and pepper",
    "fish and chips",
    "peanut butter and jelly",
    "bread and butter",
    "rock and roll",
    "macaroni and cheese",
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Component {
    /// Base question with the negation removed.
    pub text: String,
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseResult {
    /// Input question, whitespace-normalized.
    pub text: String,
    pub components: Vec<Component>,
    /// Surface span of each component as it appears in `text`.
    pub segments: Vec<String>,
    pub formula: Formula,
    pub confidence: f64,
}

impl ParseResult {
    /// Gold decomposition of a realized question, taken from the realizer's
    /// recorded connective offsets.
    pub fn from_surface(surface: &SurfaceQuestion, atoms: &[&str]) -> ParseResult {
        let formula = Formula::parse_prefix(&surface.formula).expect("realizer emits valid prefix");
        let chain = formula.as_chain().expect("realized formulas are chains");
        let mut segments = Vec::new();
        let mut start = 0;
        for &off in &surface.split_offsets {
            segments.push(surface.text[start..off - 1].to_string());
            // skip "and " / "or "
            let word_len = surface.text[off..].find(' ').unwrap_or(0);
            start = off + word_len + 1;
        }
        segments.push(surface.text[start..].trim_end_matches('?').to_string());
        // atoms relabeled to surface order
        let components = chain
            .literals
            .iter()
            .map(|l| Component {
                text: atoms[l.atom].to_string(),
                negated: l.negated,
            })
            .collect();
        let surface_order = Chain {
            literals: chain
                .literals
                .iter()
                .enumerate()
                .map(|(i, l)| Literal {
                    atom: i,
                    negated: l.negated,
                })
                .collect(),
            connectives: chain.connectives.clone(),
        };
        ParseResult {
            text: surface.text.clone(),
            components,
            segments,
            formula: surface_order.to_formula(),
            confidence: 1.0,
        }
    }

    /// Gold decomposition of `text`, a realization of the chain `formula`
    /// over `atoms`. Each negated operand is matched against every legal
    /// negation of its atom, so the realizer's seed need not be known.
    pub fn gold(text: &str, formula: &Formula, atoms: &[&str]) -> Result<ParseResult, ParseError> {
        let misaligned = || ParseError::Alignment {
            component: formula.to_prefix(),
            text: text.to_string(),
        };
        let chain = formula.as_chain().map_err(|_| misaligned())?;
        let mut options: Vec<Vec<String>> = Vec::new();
        for (k, l) in chain.literals.iter().enumerate() {
            let base = *atoms.get(l.atom).ok_or_else(misaligned)?;
            let variants: Vec<String> = if l.negated {
                textgen::negation_candidates(base)
                    .map_err(|_| misaligned())?
                    .into_iter()
                    .map(|e| e.negated_text)
                    .collect()
            } else {
                vec![base.to_string()]
            };
            options.push(
                variants
                    .iter()
                    .map(|v| {
                        let v = v.trim_end_matches('?').trim_end();
                        if k == 0 {
                            v.to_string()
                        } else {
                            textgen::lowercase_first(v)
                        }
                    })
                    .collect(),
            );
        }
        let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
        fn walk(rest: &str, k: usize, options: &[Vec<String>], conns: &[Connective], acc: &mut Vec<String>) -> bool {
            if k == options.len() {
                return rest == "?";
            }
            for o in &options[k] {
                let Some(after) = rest.strip_prefix(o.as_str()) else { continue };
                let after = match conns.get(k) {
                    Some(c) => match after.strip_prefix(&format!(" {} ", c.word())) {
                        Some(a) => a,
                        None => continue,
                    },
                    None => after,
                };
                acc.push(o.clone());
                if walk(after, k + 1, options, conns, acc) {
                    return true;
                }
                acc.pop();
            }
            false
        }
        let mut segments = Vec::new();
        if !walk(&normalized, 0, &options, &chain.connectives, &mut segments) {
            return Err(misaligned());
        }
        Ok(ParseResult {
            components: chain
                .literals
                .iter()
                .map(|l| Component {
                    text: atoms[l.atom].to_string(),
                    negated: l.negated,
                })
                .collect(),
            segments,
            formula: Chain {
                literals: chain
                    .literals
                    .iter()
                    .enumerate()
                    .map(|(i, l)| Literal { atom: i, negated: l.negated })
                    .collect(),
                connectives: chain.connectives.clone(),
            }
            .to_formula(),
            text: normalized,
            confidence: 1.0,
        })
    }

    pub fn operand_count(&self) -> usize {
        self.components.len()
    }
}

fn clean(tok: &str) -> String {
    tok.trim_end_matches('?').to_ascii_lowercase()
}

fn in_stop_phrase(words: &[String], i: usize) -> bool {
    STOP_PHRASES.iter().any(|phrase| {
        let p: Vec<&str> = phrase.split(' ').collect();
        let Some(k) = p.iter().position(|w| *w == "and" || *w == "or") else {
            return false;
        };
        if i < k || i + (p.len() - k) > words.len() {
            return false;
        }
        p.iter().enumerate().all(|(j, w)| words[i - k + j] == *w)
    })
}

/// False when joining `question` to a neighbour with a connective could form
/// a stop phrase across the boundary.
pub fn boundary_safe(question: &str) -> bool {
    let words: Vec<String> = question.split_whitespace().map(clean).collect();
    let (Some(first), Some(last)) = (words.first(), words.last()) else {
        return false;
    };
    STOP_PHRASES.iter().all(|phrase| {
        let p: Vec<&str> = phrase.split(' ').collect();
        match p.iter().position(|w| *w == "and" || *w == "or") {
            Some(k) if k > 0 && k + 1 < p.len() => p[k - 1] != last && p[k + 1] != first,
            _ => true,
        }
    })
}

/// Removes the negation marker from one component's tokens.
fn strip_component(tokens: &[&str]) -> (String, bool) {
    let words: Vec<String> = tokens.iter().map(|t| clean(t)).collect();
    let mut out: Vec<String> = tokens
        .iter()
        .map(|t| t.trim_end_matches('?').to_string())
        .collect();
    let mut negated = false;
    if words.len() >= 3 && textgen::is_existential_aux(&words[0]) && words[1] == "there" && words[2] == "no" {
        negated = true;
        match textgen::restored_article(&words[3..]) {
            Some(article) => out[2] = article.to_string(),
            None => {
                out.remove(2);
            }
        }
    } else if let Some(k) = words.iter().skip(1).position(|w| w == "not") {
        negated = true;
        out.remove(k + 1);
    }
    let joined = out.join(" ");
    (format!("{}?", textgen::uppercase_first(&joined)), negated)
}

/// Splits a composed question at its top-level connectives and recovers the
/// base question and negation flag of every component.
pub fn parse_composed(text: &str) -> ParseResult {
    let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let tokens: Vec<&str> = normalized
        .split(' ')
        .filter(|t| !t.is_empty() && *t != "?")
        .collect();
    let words: Vec<String> = tokens.iter().map(|t| clean(t)).collect();

    let mut groups: Vec<Vec<&str>> = vec![Vec::new()];
    let mut connectives = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        let conn = match words[i].as_str() {
            "and" if !tok.ends_with('?') => Some(Connective::And),
            "or" if !tok.ends_with('?') => Some(Connective::Or),
            _ => None,
        };
        let splittable = conn.is_some()
            && i + 1 < tokens.len()
            && !groups.last().unwrap().is_empty()
            && !in_stop_phrase(&words, i);
        if splittable {
            connectives.push(conn.unwrap());
            groups.push(Vec::new());
        } else {
            groups.last_mut().unwrap().push(tok);
        }
    }

    let mut components = Vec::new();
    let mut segments = Vec::new();
    let mut literals = Vec::new();
    for (i, g) in groups.iter().enumerate() {
        let (base, negated) = strip_component(g);
        segments.push(g.iter().map(|t| t.trim_end_matches('?')).collect::<Vec<_>>().join(" "));
        components.push(Component { text: base, negated });
        literals.push(Literal { atom: i, negated });
    }
    let formula = if tokens.is_empty() {
        Formula::Atom(0)
    } else {
        Chain {
            literals,
            connectives,
        }
        .to_formula()
    };
    ParseResult {
        text: normalized,
        components,
        segments,
        formula,
        confidence: 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BioTag {
    #[serde(rename = "B-Const")]
    B,
    #[serde(rename = "I-Const")]
    I,
    #[serde(rename = "O")]
    O,
}

pub type BioTags = Vec<BioTag>;

/// Tags the whitespace tokens of `text` against in-order component spans.
///
/// Component tokens are B-Const/I-Const (negation markers stay inside their
/// constituent as I-Const), everything else is O.
pub fn to_bio(text: &str, components: &[&str]) -> Result<BioTags, ParseError> {
    let toks: Vec<String> = text.split_whitespace().map(clean).filter(|t| !t.is_empty()).collect();
    let mut tags = vec![BioTag::O; toks.len()];
    let mut cursor = 0;
    for comp in components {
        let ctoks: Vec<String> = comp.split_whitespace().map(clean).filter(|t| !t.is_empty()).collect();
        let found = if ctoks.is_empty() {
            None
        } else {
            toks.windows(ctoks.len())
                .enumerate()
                .skip(cursor)
                .find_map(|(s, w)| (w == ctoks.as_slice()).then_some(s))
        };
        let Some(start) = found else {
            return Err(ParseError::Alignment {
                component: comp.to_string(),
                text: text.to_string(),
            });
        };
        tags[start] = BioTag::B;
        for t in &mut tags[start + 1..start + ctoks.len()] {
            *t = BioTag::I;
        }
        cursor = start + ctoks.len();
    }
    Ok(tags)
}

/// Scores for one group of parses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParserScores {
    pub items: usize,
    pub exact_match: f64,
    pub operand_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    items: usize,
    exact: usize,
    operands: usize,
    tp: usize,
    pred_pos: usize,
    gold_pos: usize,
}

impl Tally {
    fn scores(&self) -> Option<ParserScores> {
        if self.items == 0 {
            return None;
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.tp, self.pred_pos);
        let recall = ratio(self.tp, self.gold_pos);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Some(ParserScores {
            items: self.items,
            exact_match: ratio(self.exact, self.items),
            operand_accuracy: ratio(self.operands, self.items),
            precision,
            recall,
            f1,
        })
    }

    fn add(&mut self, other: &Tally) {
        self.items += other.items;
        self.exact += other.exact;
        self.operands += other.operands;
        self.tp += other.tp;
        self.pred_pos += other.pred_pos;
        self.gold_pos += other.gold_pos;
    }
}

/// Overall scores plus one row per gold operand count.
///
/// Rows for 2 to 5 operands are always present (`None` when empty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParserMetrics {
    pub overall: Option<ParserScores>,
    pub by_operands: BTreeMap<usize, Option<ParserScores>>,
}

pub fn parser_metrics(gold: &[ParseResult], pred: &[ParseResult]) -> Result<ParserMetrics, ParseError> {
    if gold.len() != pred.len() {
        return Err(ParseError::Length {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut rows: BTreeMap<usize, Tally> = (2..=5).map(|k| (k, Tally::default())).collect();
    for (g, p) in gold.iter().zip(pred) {
        let gold_tags = to_bio(&g.text, &g.segments.iter().map(String::as_str).collect::<Vec<_>>())?;
        let pred_tags = to_bio(&p.text, &p.segments.iter().map(String::as_str).collect::<Vec<_>>())?;
        if gold_tags.len() != pred_tags.len() {
            return Err(ParseError::TokenMismatch {
                gold: gold_tags.len(),
                pred: pred_tags.len(),
                text: g.text.clone(),
            });
        }
        let mut t = Tally {
            items: 1,
            exact: usize::from(g.components == p.components && g.formula == p.formula),
            operands: usize::from(g.operand_count() == p.operand_count()),
            ..Tally::default()
        };
        for (gt, pt) in gold_tags.iter().zip(&pred_tags) {
            t.gold_pos += usize::from(*gt != BioTag::O);
            t.pred_pos += usize::from(*pt != BioTag::O);
            t.tp += usize::from(*gt != BioTag::O && gt == pt);
        }
        rows.entry(g.operand_count()).or_default().add(&t);
    }
    let mut total = Tally::default();
    for t in rows.values() {
        total.add(t);
    }
    Ok(ParserMetrics {
        overall: total.scores(),
        by_operands: rows.into_iter().map(|(k, t)| (k, t.scores())).collect(),
    })
}
