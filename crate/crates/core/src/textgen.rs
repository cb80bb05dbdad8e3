//! Surface realization of composed questions.
//!
//! Negation is template based: "no" replaces the article of an existential
//! question ("Is there a chair?" -> "Is there no chair?"), otherwise "not" goes
//! before the first participle or preposition after the subject, or before a
//! predicate noun phrase, or right after the auxiliary. Every edit records
//! enough to be undone exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boolform::{Connective, Formula, FormulaError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("empty question text")]
    Empty,
    #[error("negation edit is corrupt: expected `{expected}` at token {index} of `{text}`")]
    Corrupt {
        expected: String,
        index: usize,
        text: String,
    },
    #[error("`{0}` does not open with an auxiliary verb")]
    NoAuxiliary(String),
    #[error("formula has {expected} atoms but {actual} texts were given")]
    AtomCount { expected: usize, actual: usize },
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

/// Which template produced a negation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegationRule {
    Existential,
    Verb,
    Preposition,
    NounPhrase,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Marker {
    No,
    Not,
}

impl Marker {
    pub fn as_str(self) -> &'static str {
        match self {
            Marker::No => "no",
            Marker::Not => "not",
        }
    }
}

/// A single recorded negation.
///
/// Token indices refer to the negated text split on single spaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegationEdit {
    pub original_text: String,
    pub negated_text: String,
    pub marker: Marker,
    pub insertion_token_index: usize,
    pub rule_id: NegationRule,
    /// Article replaced by the marker (existential rule only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replaced_article: Option<String>,
}

/// A realized composed question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceQuestion {
    pub text: String,
    /// Atom indices in surface order.
    pub atom_ids: Vec<usize>,
    /// Prefix form of the realized formula.
    pub formula: String,
    /// Byte offsets of each connective word in `text`.
    pub split_offsets: Vec<usize>,
    pub edits: Vec<NegationEdit>,
}

const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "am", "do", "does", "did", "can", "could", "will", "would", "has",
    "have", "had", "should", "shall", "may", "might", "must",
];

const EXISTENTIAL_AUX: &[&str] = &["is", "are", "was", "were"];

const PREPOSITIONS: &[&str] = &[
    "in", "on", "near", "at", "by", "under", "over", "behind", "inside", "with", "of",
];

const PRONOUNS: &[&str] = &[
    "this", "that", "it", "these", "those", "he", "she", "they", "you", "we", "i",
];

const NON_PARTICIPLES: &[&str] = &[
    "thing", "something", "anything", "nothing", "everything", "ceiling", "building", "clothing",
    "ring", "king", "wing", "string", "spring", "morning", "evening", "painting", "railing",
    "awning", "icing", "frosting", "topping", "bedding", "pudding", "dumpling", "stuffing",
    "lighting", "parking", "swing", "sibling", "sing",
];

const ARTICLES: &[&str] = &["a", "an"];

/// Nouns that take no article after "there is".
const ARTICLELESS: &[&str] = &[
    "beer", "water", "snow", "grass", "food", "milk", "coffee", "tea", "wine", "juice", "sand",
    "rain", "ice", "meat", "bread", "cheese", "rice", "soup", "sauce", "fruit", "broccoli",
    "lettuce", "furniture", "traffic", "smoke", "fire", "sunlight", "dirt", "mud",
    "graffiti", "writing", "text", "people", "men", "women", "children", "sheep", "fish", "mice", "skis",
    "geese", "teeth", "feet", "police", "cattle", "anyone", "anything", "someone", "something",
    "nobody", "everyone", "more", "enough", "much", "many",
];

fn word(tok: &str) -> String {
    tok.trim_end_matches('?').to_ascii_lowercase()
}

pub(crate) fn is_aux(w: &str) -> bool {
    AUXILIARIES.contains(&w)
}

pub(crate) fn is_existential_aux(w: &str) -> bool {
    EXISTENTIAL_AUX.contains(&w)
}

pub(crate) fn is_preposition(w: &str) -> bool {
    PREPOSITIONS.contains(&w)
}

pub(crate) fn is_pronoun(w: &str) -> bool {
    PRONOUNS.contains(&w)
}

pub(crate) fn is_participle(w: &str) -> bool {
    w.len() >= 5 && w.ends_with("ing") && !NON_PARTICIPLES.contains(&w)
}

fn is_contraction(w: &str) -> bool {
    w.len() > 2 && (w.ends_with("'s") || w.ends_with("'re") || w.ends_with("'m"))
}

fn looks_plural(w: &str) -> bool {
    w.len() > 2
        && w.ends_with('s')
        && !w.ends_with("ss")
        && !w.ends_with("us")
        && !w.ends_with("is")
}

pub(crate) fn takes_no_article(head: &str) -> bool {
    ARTICLELESS.contains(&head) || looks_plural(head)
}

/// "a" or "an" by the leading letter of `next`.
pub fn article_for(next: &str) -> &'static str {
    match next.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// Article to restore after stripping "no" from `there no <words...>`.
///
/// `words` are the lowercased words following the marker.
pub(crate) fn restored_article(words: &[String]) -> Option<&'static str> {
    let first = words.first()?;
    let end = words
        .iter()
        .position(|w| is_preposition(w) || is_participle(w) || is_contraction(w))
        .unwrap_or(words.len())
        .max(1);
    let head = &words[end - 1];
    if takes_no_article(head) {
        None
    } else {
        Some(article_for(first))
    }
}

/// Trims, collapses whitespace runs and attaches a terminal "?".
pub fn normalize_question(text: &str) -> String {
    let mut s = text.split_whitespace().collect::<Vec<_>>().join(" ");
    while s.ends_with('?') || s.ends_with(' ') {
        s.pop();
    }
    let s = s.trim_end().to_string();
    if s.is_empty() {
        s
    } else {
        format!("{s}?")
    }
}

fn make_edit(
    original: &str,
    toks: &[&str],
    index: usize,
    marker: Marker,
    rule: NegationRule,
    replace: bool,
) -> NegationEdit {
    let mut out: Vec<String> = toks.iter().map(|t| t.to_string()).collect();
    let replaced_article = if replace {
        Some(std::mem::replace(&mut out[index], marker.as_str().to_string()))
    } else {
        out.insert(index, marker.as_str().to_string());
        None
    };
    NegationEdit {
        original_text: original.to_string(),
        negated_text: out.join(" "),
        marker,
        insertion_token_index: index,
        rule_id: rule,
        replaced_article,
    }
}

/// Every negation the templates allow for `q`, ordered by insertion index.
///
/// Existential questions and questions without a choice yield one edit.
pub fn negation_candidates(q: &str) -> Result<Vec<NegationEdit>, TextError> {
    if q.trim().is_empty() {
        return Err(TextError::Empty);
    }
    let toks: Vec<&str> = q.split(' ').collect();
    // word positions: (raw token index, cleaned lowercase word)
    let words: Vec<(usize, String)> = toks
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.is_empty() && **t != "?")
        .map(|(i, t)| (i, word(t)))
        .collect();
    if words.is_empty() {
        return Err(TextError::Empty);
    }
    if !is_aux(&words[0].1) {
        return Err(TextError::NoAuxiliary(q.to_string()));
    }
    // insertion before the token that ends the question text
    let end_index = match toks.last() {
        Some(&"?") => toks.len() - 1,
        _ => toks.len(),
    };
    let raw = |k: usize| words.get(k).map(|(i, _)| *i).unwrap_or(end_index);

    if words.len() >= 3 && is_existential_aux(&words[0].1) && words[1].1 == "there" {
        let (idx, next) = (&words[2].0, words[2].1.as_str());
        let edit = if ARTICLES.contains(&next) {
            make_edit(q, &toks, *idx, Marker::No, NegationRule::Existential, true)
        } else if matches!(next, "any" | "the" | "this" | "that" | "these" | "those" | "some") {
            make_edit(q, &toks, *idx, Marker::Not, NegationRule::Existential, false)
        } else {
            make_edit(q, &toks, *idx, Marker::No, NegationRule::Existential, false)
        };
        return Ok(vec![edit]);
    }

    let pronoun_subject = words.len() >= 2 && is_pronoun(&words[1].1);
    // caption frame "does this seem like ...": negate the frame, not the caption
    if pronoun_subject && words[0].1 == "does" && words.get(2).is_some_and(|w| w.1 == "seem") {
        return Ok(vec![make_edit(q, &toks, raw(2), Marker::Not, NegationRule::Verb, false)]);
    }
    let mut out = Vec::new();
    if pronoun_subject && words.len() >= 3 && matches!(words[2].1.as_str(), "a" | "an" | "the") {
        out.push(make_edit(q, &toks, words[2].0, Marker::Not, NegationRule::NounPhrase, false));
    }
    let first_marked = words.iter().enumerate().skip(2).find_map(|(k, (_, w))| {
        if is_participle(w) {
            Some((k, NegationRule::Verb))
        } else if is_preposition(w) {
            Some((k, NegationRule::Preposition))
        } else if is_contraction(w) && k + 1 < words.len() {
            Some((k + 1, NegationRule::Verb))
        } else {
            None
        }
    });
    if let Some((k, rule)) = first_marked {
        out.push(make_edit(q, &toks, raw(k), Marker::Not, rule, false));
    }
    if out.is_empty() {
        let k = if pronoun_subject { 2 } else { 1 };
        out.push(make_edit(q, &toks, raw(k), Marker::Not, NegationRule::Fallback, false));
    }
    out.sort_by_key(|e| e.insertion_token_index);
    out.dedup_by_key(|e| e.insertion_token_index);
    Ok(out)
}

/// Negates a closed question; a seeded uniform choice picks among several
/// legal insertion points.
pub fn negate_question(q: &str, seed: u64) -> Result<NegationEdit, TextError> {
    let mut candidates = negation_candidates(q)?;
    let pick = if candidates.len() == 1 {
        0
    } else {
        ChaCha8Rng::seed_from_u64(seed).gen_range(0..candidates.len())
    };
    Ok(candidates.swap_remove(pick))
}

/// Undoes a negation edit.
pub fn strip_negation(e: &NegationEdit) -> Result<String, TextError> {
    let mut toks: Vec<&str> = e.negated_text.split(' ').collect();
    let corrupt = || TextError::Corrupt {
        expected: e.marker.as_str().to_string(),
        index: e.insertion_token_index,
        text: e.negated_text.clone(),
    };
    if toks.get(e.insertion_token_index) != Some(&e.marker.as_str()) {
        return Err(corrupt());
    }
    match &e.replaced_article {
        Some(article) => toks[e.insertion_token_index] = article,
        None => {
            toks.remove(e.insertion_token_index);
        }
    }
    Ok(toks.join(" "))
}

/// "Is there a {name}?" with "an" before a vowel.
pub fn object_to_question(object_name: &str) -> String {
    let name = object_name.split_whitespace().collect::<Vec<_>>().join(" ");
    let head = name.rsplit(' ').next().unwrap_or_default().to_ascii_lowercase();
    if !takes_no_article(&head) {
        format!("Is there {} {}?", article_for(&name), name)
    } else if head.ends_with('s') {
        format!("Are there {name}?")
    } else {
        format!("Is there {name}?")
    }
}

/// "Does this seem like {caption}?" with the terminal period removed and the
/// first letter lowercased.
pub fn caption_to_question(caption: &str) -> String {
    let mut c = caption.split_whitespace().collect::<Vec<_>>().join(" ");
    if c.ends_with('.') {
        c.pop();
        c = c.trim_end().to_string();
    }
    format!("Does this seem like {}?", lowercase_first(&c))
}

pub(crate) fn lowercase_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

pub(crate) fn uppercase_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn strip_qmark(s: &str) -> &str {
    s.trim_end().trim_end_matches('?').trim_end()
}

/// Seed for the negation of the literal in surface position `position`.
fn literal_seed(seed: u64, position: usize) -> u64 {
    seed ^ (position as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Renders a left-folded NNF chain over `atoms` as one question.
///
/// Components are joined in reading order with " and " / " or ", every
/// component after the first is lowercased at its first character, and only
/// one terminal "?" remains.
pub fn realize(f: &Formula, atoms: &[&str], seed: u64) -> Result<SurfaceQuestion, TextError> {
    if !f.is_nnf() {
        return Err(FormulaError::NotNnf.into());
    }
    if f.atom_count() != atoms.len() {
        return Err(TextError::AtomCount {
            expected: f.atom_count(),
            actual: atoms.len(),
        });
    }
    let chain = f.as_chain()?;
    let mut text = String::new();
    let mut edits = Vec::new();
    let mut split_offsets = Vec::new();
    for (pos, lit) in chain.literals.iter().enumerate() {
        let base = atoms[lit.atom];
        let rendered = if lit.negated {
            let edit = negate_question(base, literal_seed(seed, pos))?;
            let t = edit.negated_text.clone();
            edits.push(edit);
            t
        } else {
            if base.trim().is_empty() {
                return Err(TextError::Empty);
            }
            base.to_string()
        };
        let body = strip_qmark(&rendered);
        if pos == 0 {
            text.push_str(body);
        } else {
            let conn: Connective = chain.connectives[pos - 1];
            text.push(' ');
            split_offsets.push(text.len());
            text.push_str(conn.word());
            text.push(' ');
            text.push_str(&lowercase_first(body));
        }
    }
    text.push('?');
    Ok(SurfaceQuestion {
        text,
        atom_ids: chain.literals.iter().map(|l| l.atom).collect(),
        formula: f.to_prefix(),
        split_offsets,
        edits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolform::parse_label;

    #[test]
    fn existential_article_replaced() {
        let e = negate_question("Is there a chair?", 0).unwrap();
        assert_eq!(e.negated_text, "Is there no chair?");
        assert_eq!(e.rule_id, NegationRule::Existential);
        assert_eq!(e.replaced_article.as_deref(), Some("a"));
        assert_eq!(strip_negation(&e).unwrap(), "Is there a chair?");
    }

    #[test]
    fn existential_without_article() {
        let e = negate_question("Is there beer?", 3).unwrap();
        assert_eq!(e.negated_text, "Is there no beer?");
        assert_eq!(e.replaced_article, None);
    }

    #[test]
    fn participle_rule() {
        let e = negate_question("Are all the men wearing ties?", 0).unwrap();
        assert_eq!(e.negated_text, "Are all the men not wearing ties?");
        assert_eq!(e.rule_id, NegationRule::Verb);
    }

    #[test]
    fn contraction_rule() {
        let q = "Do you think it's gonna rain?";
        let e = negate_question(q, 0).unwrap();
        assert_eq!(e.negated_text, "Do you think it's not gonna rain?");
        assert_eq!(strip_negation(&e).unwrap(), q);
    }

    #[test]
    fn two_insertion_points_depend_on_seed() {
        let q = "Is this an area near the city?";
        let outs: std::collections::BTreeSet<String> =
            (0..32).map(|s| negate_question(q, s).unwrap().negated_text).collect();
        let expected: std::collections::BTreeSet<String> = [
            "Is this not an area near the city?".to_string(),
            "Is this an area not near the city?".to_string(),
        ]
        .into();
        assert_eq!(outs, expected);
        for s in 0..8 {
            assert_eq!(negate_question(q, s).unwrap(), negate_question(q, s).unwrap());
        }
    }

    #[test]
    fn spaced_question_mark_round_trips() {
        let q = "Is this an area near the city ?";
        for e in negation_candidates(q).unwrap() {
            assert!(e.negated_text.ends_with("city ?"));
            assert_eq!(strip_negation(&e).unwrap(), q);
        }
    }

    #[test]
    fn fallback_rule() {
        let e = negate_question("Is it sunny?", 0).unwrap();
        assert_eq!(e.negated_text, "Is it not sunny?");
        assert_eq!(e.rule_id, NegationRule::Fallback);
        let e = negate_question("Is the sky blue?", 0).unwrap();
        assert_eq!(e.negated_text, "Is not the sky blue?");
    }

    #[test]
    fn empty_input() {
        assert_eq!(negate_question("", 0), Err(TextError::Empty));
        assert_eq!(negate_question("  ", 0), Err(TextError::Empty));
    }

    #[test]
    fn corrupt_edit_detected() {
        let mut e = negate_question("Is there a chair?", 0).unwrap();
        e.insertion_token_index = 0;
        assert!(matches!(strip_negation(&e), Err(TextError::Corrupt { .. })));
        let mut e = negate_question("Are all the men wearing ties?", 0).unwrap();
        e.negated_text = e.original_text.clone();
        assert!(matches!(strip_negation(&e), Err(TextError::Corrupt { .. })));
    }

    #[test]
    fn object_questions() {
        assert_eq!(object_to_question("bottle"), "Is there a bottle?");
        assert_eq!(object_to_question("orange"), "Is there an orange?");
        assert_eq!(object_to_question("wine glass"), "Is there a wine glass?");
        assert_eq!(object_to_question("broccoli"), "Is there broccoli?");
        assert_eq!(object_to_question("scissors"), "Are there scissors?");
        assert_eq!(object_to_question("skis"), "Are there skis?");
        assert_eq!(object_to_question("traffic light"), "Is there a traffic light?");
    }

    #[test]
    fn caption_questions() {
        assert_eq!(
            caption_to_question("A man bending over to look inside the fridge."),
            "Does this seem like a man bending over to look inside the fridge?"
        );
        assert_eq!(
            caption_to_question("two dogs on a couch"),
            "Does this seem like two dogs on a couch?"
        );
        assert_eq!(
            caption_to_question("A sign reads St. Mark Ave."),
            "Does this seem like a sign reads St. Mark Ave?"
        );
        let q = caption_to_question("A man barefoot next to a dining table.");
        let c = negation_candidates(&q).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].negated_text, "Does this not seem like a man barefoot next to a dining table?");
    }

    #[test]
    fn realize_table_row() {
        let f = parse_label("NOT Q1 OR Q2").unwrap().0;
        let s = realize(&f, &["Is there beer?", "Is the man wearing shoes?"], 0).unwrap();
        assert_eq!(s.text, "Is there no beer or is the man wearing shoes?");
        assert_eq!(s.split_offsets, vec![17]);
        assert_eq!(&s.text[17..19], "or");
        assert_eq!(s.edits.len(), 1);
    }

    #[test]
    fn realize_all_compose_rows() {
        let atoms = ["Is there beer?", "Is the man wearing shoes?"];
        let expected = [
            "Is there no beer?",
            "Is the man not wearing shoes?",
            "Is there beer and is the man wearing shoes?",
            "Is there beer or is the man wearing shoes?",
            "Is there beer and is the man not wearing shoes?",
            "Is there beer or is the man not wearing shoes?",
            "Is there no beer and is the man wearing shoes?",
            "Is there no beer or is the man wearing shoes?",
            "Is there no beer and is the man not wearing shoes?",
            "Is there no beer or is the man not wearing shoes?",
        ];
        for (entry, want) in crate::boolform::compose_catalog().iter().zip(expected) {
            let texts: Vec<&str> = match entry.label.as_str() {
                "NOT Q1" => vec![atoms[0]],
                "NOT Q2" => vec![atoms[1]],
                _ => atoms.to_vec(),
            };
            assert_eq!(realize(&entry.formula, &texts, 1).unwrap().text, want);
        }
    }

    #[test]
    fn realize_atom_and_chain() {
        let s = realize(&Formula::atom(0), &["Is it raining?"], 0).unwrap();
        assert_eq!(s.text, "Is it raining?");
        let f = parse_label("Q1 AND Q2 AND Q3").unwrap().0;
        let s = realize(&f, &["Is it day?", "Is the dog asleep?", "Are there clouds?"], 0).unwrap();
        assert_eq!(s.text, "Is it day and is the dog asleep and are there clouds?");
        assert_eq!(s.text.matches(" and ").count(), 2);
        assert_eq!(s.text.matches('?').count(), 1);
    }

    #[test]
    fn realize_errors() {
        let f = parse_label("NOT (Q1 AND Q2)").unwrap().0;
        assert!(matches!(
            realize(&f, &["Is it?", "Is it?"], 0),
            Err(TextError::Formula(FormulaError::NotNnf))
        ));
        let f = parse_label("Q1 AND Q2").unwrap().0;
        assert!(matches!(
            realize(&f, &["Is it?"], 0),
            Err(TextError::AtomCount { .. })
        ));
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_question("  Is this an area near the city ? "), "Is this an area near the city?");
        assert_eq!(normalize_question("Is it   red"), "Is it red?");
        assert_eq!(normalize_question("   "), "");
    }

    #[test]
    fn article_restoration() {
        let w = |s: &str| s.split(' ').map(str::to_string).collect::<Vec<_>>();
        assert_eq!(restored_article(&w("chair")), Some("a"));
        assert_eq!(restored_article(&w("old man on the bench")), Some("an"));
        assert_eq!(restored_article(&w("beer")), None);
        assert_eq!(restored_article(&w("red wine")), None);
        assert_eq!(restored_article(&w("two dogs sitting")), None);
        assert_eq!(restored_article(&w("bus")), Some("a"));
    }
}
