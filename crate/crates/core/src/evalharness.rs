//! Scoring answerers against generated datasets.
//!
//! A prediction is "yes" when `p_yes > threshold` (strict). Samples an
//! answerer declines are counted as unanswered and left out of every
//! accuracy denominator.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boolform::{self, compose_catalog, demorgan_nnf, supplement_catalog, Formula, FormulaError};
use crate::datagen::{self, ComposedSample, DataError};
use crate::lossmath::{fc_loss, frechet_for_formula, LossError, Probability};
use crate::qparser::parse_composed;
use crate::util::derive_seed;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("answerer declined `{sample_id}`: {reason}")]
    Rejected { sample_id: String, reason: String },
    #[error("dataset is empty")]
    Empty,
    #[error("predictions line {line}: {msg}")]
    Predictions { line: usize, msg: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

/// What an answerer sees for one question.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub sample_id: &'a str,
    pub text: &'a str,
    pub image_id: u64,
}

impl<'a> Query<'a> {
    pub fn of(s: &'a ComposedSample) -> Self {
        Query {
            sample_id: &s.sample_id,
            text: &s.text,
            image_id: s.image_id,
        }
    }
}

pub trait Answerer: Sync {
    fn name(&self) -> String;
    fn answer(&self, q: &Query<'_>) -> Result<Probability, EvalError>;
}

fn certain(b: bool) -> Probability {
    Probability::new(if b { 1.0 } else { 0.0 }).expect("0 and 1 are probabilities")
}

fn rejected(q: &Query<'_>, reason: &str) -> EvalError {
    EvalError::Rejected {
        sample_id: q.sample_id.to_string(),
        reason: reason.to_string(),
    }
}

/// Ground truth: composed samples by id, atomic questions by image and text.
#[derive(Debug, Clone, Default)]
pub struct Oracle {
    samples: HashMap<String, bool>,
    /// `None` marks an (image, text) pair recorded with both answers.
    atoms: HashMap<(u64, String), Option<bool>>,
}

impl Oracle {
    /// Indexes `samples`; each sample's truth is recomputed from its formula.
    pub fn new(samples: &[ComposedSample]) -> Result<Self, EvalError> {
        let mut o = Oracle::default();
        for s in samples {
            let f = s.parsed_formula()?;
            o.samples.insert(s.sample_id.clone(), boolform::eval(&f, &s.atom_answers())?);
            for a in &s.atoms {
                o.atoms
                    .entry((s.image_id, a.text.clone()))
                    .and_modify(|v| {
                        if *v != Some(a.answer) {
                            *v = None;
                        }
                    })
                    .or_insert(Some(a.answer));
            }
        }
        Ok(o)
    }
}

impl Answerer for Oracle {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn answer(&self, q: &Query<'_>) -> Result<Probability, EvalError> {
        if let Some(&b) = self.samples.get(q.sample_id) {
            return Ok(certain(b));
        }
        match self.atoms.get(&(q.image_id, q.text.to_string())) {
            Some(Some(b)) => Ok(certain(*b)),
            Some(None) => Err(rejected(q, "question has conflicting recorded answers")),
            None => Err(rejected(q, "unknown question")),
        }
    }
}

/// Uniform `p_yes` drawn from a generator seeded by the sample id, so answers
/// do not depend on evaluation order.
#[derive(Debug, Clone, Copy)]
pub struct RandomAnswerer {
    pub seed: u64,
}

impl Answerer for RandomAnswerer {
    fn name(&self) -> String {
        format!("random(seed={})", self.seed)
    }

    fn answer(&self, q: &Query<'_>) -> Result<Probability, EvalError> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, q.sample_id));
        Ok(Probability::new(rng.gen::<f64>())?)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantYes;

impl Answerer for ConstantYes {
    fn name(&self) -> String {
        "constant-yes".into()
    }

    fn answer(&self, _q: &Query<'_>) -> Result<Probability, EvalError> {
        Ok(certain(true))
    }
}

#[derive(Deserialize)]
struct PredictionRecord {
    sample_id: String,
    #[serde(default)]
    p_yes: Option<f64>,
    #[serde(default)]
    answer: Option<String>,
}

/// Predictions read from a JSONL file of `{sample_id, p_yes}` or
/// `{sample_id, answer: "yes"|"no"}` records.
#[derive(Debug, Clone, Default)]
pub struct ExternalFile {
    predictions: HashMap<String, Probability>,
}

impl ExternalFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, EvalError> {
        let mut predictions = HashMap::new();
        for (n, line) in reader.lines().enumerate() {
            let err = |msg: String| EvalError::Predictions { line: n + 1, msg };
            let line = line.map_err(|e| err(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: PredictionRecord = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
            let p = match (rec.p_yes, rec.answer.as_deref()) {
                (Some(p), None) => Probability::new(p).map_err(|e| err(e.to_string()))?,
                (None, Some("yes")) => certain(true),
                (None, Some("no")) => certain(false),
                (None, Some(other)) => return Err(err(format!("answer must be yes or no, got `{other}`"))),
                (Some(_), Some(_)) => return Err(err("give either p_yes or answer, not both".into())),
                (None, None) => return Err(err("record has neither p_yes nor answer".into())),
            };
            if predictions.insert(rec.sample_id.clone(), p).is_some() {
                return Err(err(format!("duplicate sample_id `{}`", rec.sample_id)));
            }
        }
        Ok(ExternalFile { predictions })
    }

    pub fn from_map(predictions: HashMap<String, Probability>) -> Self {
        ExternalFile { predictions }
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }
}

impl Answerer for ExternalFile {
    fn name(&self) -> String {
        "external-file".into()
    }

    fn answer(&self, q: &Query<'_>) -> Result<Probability, EvalError> {
        self.predictions
            .get(q.sample_id)
            .copied()
            .ok_or_else(|| rejected(q, "no prediction for this sample_id"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecombineMode {
    /// Threshold each component, then evaluate the parsed formula.
    Hard,
    /// Fréchet mean of the parsed formula over component probabilities.
    Frechet,
}

/// Id under which component `k` of a sample is put to an atomic answerer.
pub fn component_id(sample_id: &str, k: usize) -> String {
    format!("{sample_id}/c{k}")
}

/// Parses `q.text`, answers every component with `atomic` and combines the
/// answers according to the parsed formula.
pub fn recombine_answer(q: &Query<'_>, atomic: &dyn Answerer, mode: RecombineMode) -> Result<Probability, EvalError> {
    let parsed = parse_composed(q.text);
    let mut probs = Vec::with_capacity(parsed.components.len());
    for (k, c) in parsed.components.iter().enumerate() {
        let id = component_id(q.sample_id, k);
        let p = atomic.answer(&Query {
            sample_id: &id,
            text: &c.text,
            image_id: q.image_id,
        })?;
        probs.push(p.get());
    }
    match mode {
        RecombineMode::Hard => {
            let bits: Vec<bool> = probs.iter().map(|p| *p > DEFAULT_THRESHOLD).collect();
            Ok(certain(boolform::eval(&parsed.formula, &bits)?))
        }
        RecombineMode::Frechet => Ok(Probability::new(frechet_for_formula(&parsed.formula, &probs)?.mean)?),
    }
}

/// The recombination baseline as an answerer.
pub struct Recombiner<'a> {
    pub atomic: &'a dyn Answerer,
    pub mode: RecombineMode,
}

impl Answerer for Recombiner<'_> {
    fn name(&self) -> String {
        let mode = match self.mode {
            RecombineMode::Hard => "hard",
            RecombineMode::Frechet => "frechet",
        };
        format!("recombine({}, {mode})", self.atomic.name())
    }

    fn answer(&self, q: &Query<'_>) -> Result<Probability, EvalError> {
        recombine_answer(q, self.atomic, self.mode)
    }
}

/// Counts for one report cell; `absent` cells have no samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub count: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
    pub absent: bool,
}

impl Cell {
    fn add(&mut self, correct: bool) {
        self.count += 1;
        self.correct += usize::from(correct);
    }

    fn finish(mut self) -> Self {
        self.absent = self.count == 0;
        self.accuracy = (self.count > 0).then(|| 100.0 * self.correct as f64 / self.count as f64);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCell {
    pub label: String,
    #[serde(flatten)]
    pub cell: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutativityReport {
    pub pairs: usize,
    pub consistent: usize,
    pub consistency_rate: Option<f64>,
    /// Accuracy on the stated order, Q1∘Q2.
    pub original: Cell,
    /// Accuracy on the swapped order, Q2∘Q1.
    pub mirrored: Cell,
    /// Mirrored samples whose original is missing or unanswered.
    pub unpaired: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcReport {
    pub records: usize,
    pub compatible: usize,
    pub rate: Option<f64>,
    pub mean_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub answerer: String,
    pub threshold: f64,
    pub total: usize,
    pub answered: usize,
    pub unanswered: usize,
    pub unanswered_ids: Vec<String>,
    pub overall: Cell,
    pub per_category: Vec<CategoryCell>,
    pub single_connective: Cell,
    pub multi_connective: Cell,
    pub per_operand_count: BTreeMap<usize, Cell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commutativity: Option<CommutativityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fc: Option<FcReport>,
}

impl EvalReport {
    pub fn category(&self, label: &str) -> Option<&Cell> {
        self.per_category.iter().find(|c| c.label == label).map(|c| &c.cell)
    }

    /// Overall accuracy in percent, if anything was answered.
    pub fn accuracy(&self) -> Option<f64> {
        self.overall.accuracy
    }
}

/// Thresholded predictions in dataset order; `None` for declined samples.
fn predictions(samples: &[ComposedSample], a: &dyn Answerer, threshold: f64) -> Vec<Option<bool>> {
    samples
        .par_iter()
        .map(|s| a.answer(&Query::of(s)).ok().map(|p| p.get() > threshold))
        .collect()
}

/// Category rows: labels of every catalog the dataset draws from, in catalog
/// order, then any other labels sorted.
fn category_order(samples: &[ComposedSample]) -> Vec<String> {
    let present: BTreeSet<&str> = samples.iter().map(|s| s.category.as_str()).collect();
    let mut order = Vec::new();
    for catalog in [compose_catalog(), supplement_catalog()] {
        if catalog.iter().any(|e| present.contains(e.label.as_str())) {
            order.extend(catalog.into_iter().map(|e| e.label));
        }
    }
    let listed: BTreeSet<String> = order.iter().cloned().collect();
    order.extend(present.iter().filter(|l| !listed.contains(**l)).map(|l| l.to_string()));
    order
}

/// Scores `a` on `samples`; prediction is `p_yes > threshold`.
pub fn evaluate(samples: &[ComposedSample], a: &dyn Answerer, threshold: f64) -> Result<EvalReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::Empty);
    }
    let preds = predictions(samples, a, threshold);
    let mut overall = Cell::default();
    let mut per_category: BTreeMap<&str, Cell> = BTreeMap::new();
    let mut single = Cell::default();
    let mut multi = Cell::default();
    let mut per_operand: BTreeMap<usize, Cell> = BTreeMap::new();
    let mut unanswered_ids = Vec::new();
    for (s, p) in samples.iter().zip(&preds) {
        let Some(p) = p else {
            unanswered_ids.push(s.sample_id.clone());
            continue;
        };
        let ok = *p == s.answer;
        overall.add(ok);
        per_category.entry(s.category.as_str()).or_default().add(ok);
        if s.connective_count <= 1 { &mut single } else { &mut multi }.add(ok);
        per_operand.entry(s.operand_count()).or_default().add(ok);
    }
    let per_category = category_order(samples)
        .into_iter()
        .map(|label| CategoryCell {
            cell: per_category.get(label.as_str()).copied().unwrap_or_default().finish(),
            label,
        })
        .collect();
    Ok(EvalReport {
        answerer: a.name(),
        threshold,
        total: samples.len(),
        answered: overall.count,
        unanswered: unanswered_ids.len(),
        unanswered_ids,
        overall: overall.finish(),
        per_category,
        single_connective: single.finish(),
        multi_connective: multi.finish(),
        per_operand_count: per_operand.into_iter().map(|(k, c)| (k, c.finish())).collect(),
        commutativity: None,
        fc: None,
    })
}

/// Agreement between each mirrored sample and the sample it mirrors.
pub fn commutativity_check(samples: &[ComposedSample], a: &dyn Answerer, threshold: f64) -> CommutativityReport {
    let by_id: HashMap<&str, usize> = samples.iter().enumerate().map(|(i, s)| (s.sample_id.as_str(), i)).collect();
    let preds = predictions(samples, a, threshold);
    let mut report = CommutativityReport {
        pairs: 0,
        consistent: 0,
        consistency_rate: None,
        original: Cell::default(),
        mirrored: Cell::default(),
        unpaired: Vec::new(),
    };
    for (i, s) in samples.iter().enumerate() {
        let Some(orig_id) = &s.mirror_of else { continue };
        let pair = by_id.get(orig_id.as_str()).and_then(|&j| Some((j, preds[j]?, preds[i]?)));
        let Some((j, po, pm)) = pair else {
            log::warn!("mirrored sample {} has no answered original", s.sample_id);
            report.unpaired.push(s.sample_id.clone());
            continue;
        };
        report.pairs += 1;
        report.consistent += usize::from(po == pm);
        report.original.add(po == samples[j].answer);
        report.mirrored.add(pm == s.answer);
    }
    report.consistency_rate = (report.pairs > 0).then(|| report.consistent as f64 / report.pairs as f64);
    report.original = report.original.finish();
    report.mirrored = report.mirrored.finish();
    report
}

/// Partitions samples into at most one connective and two or more.
pub fn generalization_split(samples: &[ComposedSample]) -> (Vec<&ComposedSample>, Vec<&ComposedSample>) {
    samples.iter().partition(|s| s.connective_count <= 1)
}

/// A composed-question probability with its component probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    /// Prefix form over the components, atom 0 first.
    pub formula: String,
    pub p_yes: f64,
    pub p_yes_components: Vec<f64>,
}

pub fn read_triplets(path: impl AsRef<Path>) -> Result<Vec<Triplet>, EvalError> {
    Ok(datagen::read_jsonl(path)?)
}

/// Fraction of triplets whose thresholded composed answer equals the
/// Fréchet-mean indicator, and their mean FC loss.
pub fn fc_compatibility_rate(triplets: &[Triplet]) -> Result<FcReport, EvalError> {
    let mut compatible = 0;
    let mut loss = 0.0;
    for t in triplets {
        let p = Probability::new(t.p_yes)?.get();
        let f = demorgan_nnf(&Formula::parse_prefix(&t.formula)?);
        let bounds = frechet_for_formula(&f, &t.p_yes_components)?;
        compatible += usize::from((p > DEFAULT_THRESHOLD) == (bounds.indicator() == 1.0));
        loss += fc_loss(p, &bounds);
    }
    let n = triplets.len();
    Ok(FcReport {
        records: n,
        compatible,
        rate: (n > 0).then(|| compatible as f64 / n as f64),
        mean_loss: (n > 0).then(|| loss / n as f64),
    })
}

/// Triplets from one answerer: the composed answer plus the answer to each
/// recorded atom, queried as `{sample_id}/c{k}`. Declined samples are skipped.
pub fn collect_triplets(samples: &[ComposedSample], a: &dyn Answerer) -> Vec<Triplet> {
    samples
        .par_iter()
        .filter_map(|s| {
            let p = a.answer(&Query::of(s)).ok()?.get();
            let comps = s
                .atoms
                .iter()
                .enumerate()
                .map(|(k, atom)| {
                    let id = component_id(&s.sample_id, k);
                    a.answer(&Query {
                        sample_id: &id,
                        text: &atom.text,
                        image_id: s.image_id,
                    })
                    .ok()
                    .map(Probability::get)
                })
                .collect::<Option<Vec<f64>>>()?;
            Some(Triplet {
                sample_id: Some(s.sample_id.clone()),
                formula: s.formula.clone(),
                p_yes: p,
                p_yes_components: comps,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

fn pct(c: &Cell) -> String {
    match c.accuracy {
        Some(a) => format!("{a:.2}"),
        None => "absent".into(),
    }
}

pub fn emit_report(r: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(r).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Markdown => markdown(r),
    }
}

fn markdown(r: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Evaluation: {}\n", r.answerer);
    let _ = writeln!(
        out,
        "Samples: {} (answered {}, unanswered {}), threshold {}\n",
        r.total, r.answered, r.unanswered, r.threshold
    );
    let _ = writeln!(out, "| Split | Count | Accuracy (%) |\n|---|---:|---:|");
    for (name, c) in [
        ("Overall", &r.overall),
        ("Single", &r.single_connective),
        ("Multiple", &r.multi_connective),
    ] {
        let _ = writeln!(out, "| {name} | {} | {} |", c.count, pct(c));
    }
    let _ = writeln!(out, "\n## Per category\n\n| Category | Count | Accuracy (%) |\n|---|---:|---:|");
    let mut absent = Vec::new();
    for c in &r.per_category {
        if c.cell.absent {
            absent.push(c.label.as_str());
        } else {
            let _ = writeln!(out, "| {} | {} | {} |", c.label, c.cell.count, pct(&c.cell));
        }
    }
    if !absent.is_empty() {
        let _ = writeln!(out, "\nAbsent: {}", absent.join("; "));
    }
    let _ = writeln!(out, "\n## Per operand count\n\n| Operands | Count | Accuracy (%) |\n|---:|---:|---:|");
    for (k, c) in &r.per_operand_count {
        let _ = writeln!(out, "| {k} | {} | {} |", c.count, pct(c));
    }
    if let Some(cm) = &r.commutativity {
        let rate = cm.consistency_rate.map_or("absent".into(), |x| format!("{:.2}", 100.0 * x));
        let _ = writeln!(
            out,
            "\n## Commutativity\n\n| Pairs | Q1∘Q2 (%) | Q2∘Q1 (%) | Consistent (%) |\n|---:|---:|---:|---:|\n| {} | {} | {} | {rate} |",
            cm.pairs,
            pct(&cm.original),
            pct(&cm.mirrored),
        );
        if !cm.unpaired.is_empty() {
            let _ = writeln!(out, "\nUnpaired: {}", cm.unpaired.len());
        }
    }
    if let Some(fc) = &r.fc {
        let rate = fc.rate.map_or("absent".into(), |x| format!("{:.2}", 100.0 * x));
        let loss = fc.mean_loss.map_or("absent".into(), |x| format!("{x:.6}"));
        let _ = writeln!(
            out,
            "\n## Fréchet compatibility\n\n| Records | Compatible (%) | Mean FC loss |\n|---:|---:|---:|\n| {} | {rate} | {loss} |",
            fc.records
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolform::Source;
    use crate::datagen::{AtomRef, Split};

    fn atom(id: &str, text: &str, answer: bool) -> AtomRef {
        AtomRef {
            question_id: id.into(),
            text: text.into(),
            answer,
            source: Source::Vqa,
        }
    }

    fn sample(id: &str, text: &str, formula: &str, atoms: Vec<AtomRef>, category: &str) -> ComposedSample {
        let f = Formula::parse_prefix(formula).unwrap();
        let answers: Vec<bool> = atoms.iter().map(|a| a.answer).collect();
        ComposedSample {
            sample_id: id.into(),
            image_id: 1,
            text: text.into(),
            formula: formula.into(),
            answer: boolform::eval(&f, &answers).unwrap(),
            category: category.into(),
            connective_count: f.connective_count(),
            atoms,
            split: Split::Train,
            mirror_of: None,
        }
    }

    fn beer_shoes() -> Vec<ComposedSample> {
        let a = || atom("1", "Is there beer?", true);
        let b = || atom("2", "Is the man wearing shoes?", false);
        vec![
            sample("s0", "Is there beer and is the man not wearing shoes?", "AND(Q1,NOT(Q2))", vec![a(), b()], "Q1 AND NOT Q2"),
            sample("s1", "Is there beer or is the man wearing shoes?", "OR(Q1,Q2)", vec![a(), b()], "Q1 OR Q2"),
            sample("s2", "Is there no beer?", "NOT(Q1)", vec![a()], "NOT Q1"),
        ]
    }

    #[test]
    fn oracle_is_perfect() {
        let data = beer_shoes();
        let o = Oracle::new(&data).unwrap();
        let r = evaluate(&data, &o, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(r.accuracy(), Some(100.0));
        assert_eq!(r.single_connective.count, 2);
        assert_eq!(r.multi_connective.count, 1);
        assert!(r.category("Q1 AND Q2").unwrap().absent);
        assert_eq!(r.per_category.len(), 10);
    }

    #[test]
    fn recombine_examples() {
        let mut m = HashMap::new();
        m.insert("x/c0".to_string(), Probability::new(1.0).unwrap());
        m.insert("x/c1".to_string(), Probability::new(0.0).unwrap());
        let file = ExternalFile::from_map(m);
        let q = Query {
            sample_id: "x",
            text: "Is there beer and is the man not wearing shoes?",
            image_id: 1,
        };
        for mode in [RecombineMode::Hard, RecombineMode::Frechet] {
            assert_eq!(recombine_answer(&q, &file, mode).unwrap().get(), 1.0);
        }

        let mut m = HashMap::new();
        m.insert("y/c0".to_string(), Probability::new(0.7).unwrap());
        m.insert("y/c1".to_string(), Probability::new(0.6).unwrap());
        let file = ExternalFile::from_map(m);
        let q = Query {
            sample_id: "y",
            text: "Is there beer or is the man wearing shoes?",
            image_id: 1,
        };
        let p = recombine_answer(&q, &file, RecombineMode::Frechet).unwrap().get();
        assert!((p - 0.85).abs() < 1e-12);
    }

    #[test]
    fn recombiner_over_oracle() {
        let data = beer_shoes();
        let o = Oracle::new(&data).unwrap();
        let r = Recombiner { atomic: &o, mode: RecombineMode::Hard };
        assert_eq!(evaluate(&data, &r, DEFAULT_THRESHOLD).unwrap().accuracy(), Some(100.0));
    }

    #[test]
    fn external_file_parsing() {
        let src = "{\"sample_id\": \"s0\", \"p_yes\": 0.9}\n{\"sample_id\": \"s1\", \"answer\": \"no\"}\n";
        let f = ExternalFile::from_reader(src.as_bytes()).unwrap();
        assert_eq!(f.len(), 2);
        let r = evaluate(&beer_shoes(), &f, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(r.answered, 2);
        assert_eq!(r.unanswered_ids, ["s2"]);
        assert_eq!(r.overall.correct, 1);

        let bad = "{\"sample_id\": \"s0\", \"p_yes\": 1.5}\n";
        assert!(matches!(ExternalFile::from_reader(bad.as_bytes()), Err(EvalError::Predictions { line: 1, .. })));
        let bad = "{\"sample_id\": \"s0\", \"answer\": \"maybe\"}\n";
        assert!(ExternalFile::from_reader(bad.as_bytes()).is_err());
    }

    #[test]
    fn asymmetric_predictions_break_commutativity() {
        let mut data = beer_shoes();
        let mut m = sample(
            "s0-m",
            "Is the man not wearing shoes and is there beer?",
            "AND(NOT(Q1),Q2)",
            vec![atom("2", "Is the man wearing shoes?", false), atom("1", "Is there beer?", true)],
            "Q1 AND NOT Q2",
        );
        m.mirror_of = Some("s0".into());
        data.push(m);
        let o = Oracle::new(&data).unwrap();
        let c = commutativity_check(&data, &o, DEFAULT_THRESHOLD);
        assert_eq!((c.pairs, c.consistent), (1, 1));

        let src = "{\"sample_id\": \"s0\", \"p_yes\": 0.9}\n{\"sample_id\": \"s0-m\", \"p_yes\": 0.2}\n";
        let f = ExternalFile::from_reader(src.as_bytes()).unwrap();
        let c = commutativity_check(&data, &f, DEFAULT_THRESHOLD);
        assert_eq!(c.consistency_rate, Some(0.0));
        assert_eq!(c.original.accuracy, Some(100.0));
        assert_eq!(c.mirrored.accuracy, Some(0.0));
    }

    #[test]
    fn generalization_partition() {
        let data = beer_shoes();
        let (single, multi) = generalization_split(&data);
        let ids: Vec<&str> = single.iter().map(|s| s.sample_id.as_str()).collect();
        assert_eq!(ids, ["s1", "s2"]);
        assert_eq!(multi[0].sample_id, "s0");
    }

    #[test]
    fn fc_rates() {
        let t = Triplet {
            sample_id: None,
            formula: "AND(Q1,Q2)".into(),
            p_yes: 0.9,
            p_yes_components: vec![0.9, 0.1],
        };
        let r = fc_compatibility_rate(std::slice::from_ref(&t)).unwrap();
        assert_eq!(r.rate, Some(0.0));
        assert!((r.mean_loss.unwrap() - 0.81).abs() < 1e-12);

        let data = beer_shoes();
        let o = Oracle::new(&data).unwrap();
        let trips = collect_triplets(&data, &o);
        assert_eq!(trips.len(), 3);
        let r = fc_compatibility_rate(&trips).unwrap();
        assert_eq!((r.rate, r.mean_loss), (Some(1.0), Some(0.0)));

        let bad = Triplet { p_yes: 1.2, ..t };
        assert!(matches!(fc_compatibility_rate(&[bad]), Err(EvalError::Loss(_))));
    }

    #[test]
    fn reports_render() {
        let data = beer_shoes();
        let o = Oracle::new(&data).unwrap();
        let r = evaluate(&data, &o, DEFAULT_THRESHOLD).unwrap();
        let json = emit_report(&r, ReportFormat::Json);
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(emit_report(&back, ReportFormat::Json), json);

        let md = emit_report(&r, ReportFormat::Markdown);
        let rows = md.lines().filter(|l| l.starts_with("| Q") || l.starts_with("| NOT")).count();
        assert_eq!(rows, 3);
        assert!(md.contains("Absent: "));
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(matches!(evaluate(&[], &ConstantYes, DEFAULT_THRESHOLD), Err(EvalError::Empty)));
    }
}
