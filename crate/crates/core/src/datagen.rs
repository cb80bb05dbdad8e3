//! Dataset generation from VQA-v2 questions/annotations and COCO
//! instances/captions.
//!
//! Closed questions (yes/no, unanimously annotated) are the atoms. Pairs of
//! atoms about one image feed the ten compose formulas; each atom together
//! with object, caption and antonym questions feeds the supplement
//! templates; random left-folded chains over `n` atoms give the inductive
//! set. Output order is the sorted order of sample ids, so results do not
//! depend on worker scheduling.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::antonyms::{adversarial_antonym, ClassVocabulary};
use crate::boolform::{self, compose_catalog, supplement_catalog, Chain, Connective, Formula, FormulaError, Literal, Source};
use crate::qparser::{self, parse_composed};
use crate::textgen::{self, caption_to_question, negation_candidates, object_to_question, realize, TextError};
use crate::util::derive_seed;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("ingestion error: {0}")]
    Ingestion(String),
    #[error("line {line}: {msg}")]
    Jsonl { line: usize, msg: String },
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error("worker pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    /// Maps a VQA/COCO subtype such as `train2014` to its split.
    pub fn from_subtype(s: &str) -> Split {
        if s.starts_with("val") {
            Split::Val
        } else if s.starts_with("test") {
            Split::Test
        } else {
            Split::Train
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Serializes booleans as "yes"/"no".
pub mod yes_no {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(if *v { "yes" } else { "no" })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match String::deserialize(d)?.as_str() {
            "yes" => Ok(true),
            "no" => Ok(false),
            other => Err(serde::de::Error::custom(format!("expected yes/no, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaAnswer {
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_confidence: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_id: Option<u64>,
}

/// A VQA question joined with its annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaRecord {
    pub question_id: u64,
    pub image_id: u64,
    pub question: String,
    pub answers: Vec<VqaAnswer>,
    pub answer_type: String,
    pub split: Split,
}

#[derive(Deserialize)]
struct VqaQuestionsFile {
    #[serde(default)]
    data_subtype: Option<String>,
    questions: Vec<VqaQuestion>,
}

#[derive(Deserialize)]
struct VqaQuestion {
    image_id: u64,
    question: String,
    question_id: u64,
}

#[derive(Deserialize)]
struct VqaAnnotationsFile {
    annotations: Vec<VqaAnnotation>,
}

#[derive(Deserialize)]
struct VqaAnnotation {
    question_id: u64,
    answers: Vec<VqaAnswer>,
    answer_type: String,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, DataError> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|source| DataError::Json {
        path: path.display().to_string(),
        source,
    })
}

fn parse_json<T: DeserializeOwned>(name: &str, src: &str) -> Result<T, DataError> {
    serde_json::from_str(src).map_err(|source| DataError::Json {
        path: name.to_string(),
        source,
    })
}

/// Reads VQA-v2 question and annotation files and joins them on `question_id`.
pub fn load_vqa(questions_path: impl AsRef<Path>, annotations_path: impl AsRef<Path>) -> Result<Vec<VqaRecord>, DataError> {
    let q: VqaQuestionsFile = read_json(questions_path.as_ref())?;
    let a: VqaAnnotationsFile = read_json(annotations_path.as_ref())?;
    join_vqa(q, a)
}

/// [`load_vqa`] over in-memory JSON text.
pub fn load_vqa_str(questions_json: &str, annotations_json: &str) -> Result<Vec<VqaRecord>, DataError> {
    join_vqa(parse_json("questions", questions_json)?, parse_json("annotations", annotations_json)?)
}

fn join_vqa(q: VqaQuestionsFile, a: VqaAnnotationsFile) -> Result<Vec<VqaRecord>, DataError> {
    let split = q.data_subtype.as_deref().map(Split::from_subtype).unwrap_or(Split::Train);
    let mut annotations: BTreeMap<u64, VqaAnnotation> = BTreeMap::new();
    for ann in a.annotations {
        annotations.insert(ann.question_id, ann);
    }
    let question_ids: BTreeSet<u64> = q.questions.iter().map(|q| q.question_id).collect();
    let orphans: Vec<String> = annotations
        .keys()
        .filter(|id| !question_ids.contains(id))
        .map(u64::to_string)
        .collect();
    if !orphans.is_empty() {
        return Err(DataError::Ingestion(format!(
            "annotations without questions: {}",
            orphans.join(", ")
        )));
    }
    let missing: Vec<String> = question_ids
        .iter()
        .filter(|id| !annotations.contains_key(id))
        .map(u64::to_string)
        .collect();
    if !missing.is_empty() {
        return Err(DataError::Ingestion(format!(
            "questions without annotations: {}",
            missing.join(", ")
        )));
    }
    let mut out: Vec<VqaRecord> = q
        .questions
        .into_iter()
        .map(|qq| {
            let ann = annotations.remove(&qq.question_id).expect("checked above");
            VqaRecord {
                question_id: qq.question_id,
                image_id: qq.image_id,
                question: qq.question,
                answers: ann.answers,
                answer_type: ann.answer_type,
                split,
            }
        })
        .collect();
    out.sort_by_key(|r| r.question_id);
    Ok(out)
}

/// A closed question usable as a formula operand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicQuestion {
    pub question_id: String,
    pub image_id: u64,
    pub text: String,
    #[serde(with = "yes_no")]
    pub answer: bool,
    pub source: Source,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub total: usize,
    pub yes_no: usize,
    pub dropped_not_yes_no: usize,
    pub dropped_ambiguous: usize,
    pub kept: usize,
}

impl FilterReport {
    pub fn kept_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.kept as f64 / self.total as f64
        }
    }
}

/// Keeps yes/no questions whose annotators all gave the same yes/no answer.
pub fn filter_closed(records: &[VqaRecord]) -> (Vec<AtomicQuestion>, FilterReport) {
    let mut report = FilterReport {
        total: records.len(),
        ..FilterReport::default()
    };
    let mut out = Vec::new();
    for r in records {
        if r.answer_type != "yes/no" {
            report.dropped_not_yes_no += 1;
            continue;
        }
        report.yes_no += 1;
        let answers: BTreeSet<String> = r.answers.iter().map(|a| a.answer.trim().to_lowercase()).collect();
        let unanimous = match answers.iter().next() {
            Some(a) if answers.len() == 1 && (a == "yes" || a == "no") => Some(a == "yes"),
            _ => None,
        };
        match unanimous {
            Some(answer) => {
                report.kept += 1;
                out.push(AtomicQuestion {
                    question_id: r.question_id.to_string(),
                    image_id: r.image_id,
                    text: textgen::normalize_question(&r.question),
                    answer,
                    source: Source::Vqa,
                    split: r.split,
                });
            }
            None => report.dropped_ambiguous += 1,
        }
    }
    (out, report)
}

/// Objects and captions of one COCO image.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CocoImage {
    pub objects: BTreeSet<String>,
    pub captions: Vec<String>,
}

#[derive(Deserialize)]
struct CocoInstancesFile {
    #[serde(default)]
    images: Vec<CocoImageEntry>,
    #[serde(default)]
    annotations: Vec<CocoInstance>,
    categories: Vec<CocoCategory>,
}

#[derive(Deserialize)]
struct CocoImageEntry {
    id: u64,
}

#[derive(Deserialize)]
struct CocoInstance {
    image_id: u64,
    category_id: u64,
}

#[derive(Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

#[derive(Deserialize)]
struct CocoCaptionsFile {
    annotations: Vec<CocoCaption>,
}

#[derive(Deserialize)]
struct CocoCaption {
    image_id: u64,
    caption: String,
}

/// Reads COCO instances and captions files into per-image object sets and
/// caption lists.
pub fn load_coco(instances_path: impl AsRef<Path>, captions_path: impl AsRef<Path>) -> Result<BTreeMap<u64, CocoImage>, DataError> {
    join_coco(read_json(instances_path.as_ref())?, read_json(captions_path.as_ref())?)
}

pub fn load_coco_str(instances_json: &str, captions_json: &str) -> Result<BTreeMap<u64, CocoImage>, DataError> {
    join_coco(parse_json("instances", instances_json)?, parse_json("captions", captions_json)?)
}

fn join_coco(inst: CocoInstancesFile, caps: CocoCaptionsFile) -> Result<BTreeMap<u64, CocoImage>, DataError> {
    let names: BTreeMap<u64, String> = inst.categories.into_iter().map(|c| (c.id, c.name)).collect();
    let mut out: BTreeMap<u64, CocoImage> = BTreeMap::new();
    for img in inst.images {
        out.entry(img.id).or_default();
    }
    for ann in inst.annotations {
        let name = names.get(&ann.category_id).ok_or_else(|| {
            DataError::Ingestion(format!(
                "unknown category_id {} on image {}",
                ann.category_id, ann.image_id
            ))
        })?;
        out.entry(ann.image_id).or_default().objects.insert(name.clone());
    }
    for cap in caps.annotations {
        out.entry(cap.image_id).or_default().captions.push(cap.caption);
    }
    Ok(out)
}

/// One operand as recorded in a sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomRef {
    pub question_id: String,
    pub text: String,
    #[serde(with = "yes_no")]
    pub answer: bool,
    pub source: Source,
}

impl From<&AtomicQuestion> for AtomRef {
    fn from(a: &AtomicQuestion) -> Self {
        AtomRef {
            question_id: a.question_id.clone(),
            text: a.text.clone(),
            answer: a.answer,
            source: a.source,
        }
    }
}

/// One dataset record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposedSample {
    pub sample_id: String,
    pub image_id: u64,
    pub text: String,
    /// Prefix form over `atoms`, atom 0 first in surface order.
    pub formula: String,
    pub atoms: Vec<AtomRef>,
    #[serde(with = "yes_no")]
    pub answer: bool,
    pub category: String,
    pub connective_count: usize,
    pub split: Split,
    /// Sample whose operands this one states in the opposite order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirror_of: Option<String>,
}

impl ComposedSample {
    pub fn parsed_formula(&self) -> Result<Formula, FormulaError> {
        Formula::parse_prefix(&self.formula)
    }

    pub fn atom_answers(&self) -> Vec<bool> {
        self.atoms.iter().map(|a| a.answer).collect()
    }

    pub fn operand_count(&self) -> usize {
        self.atoms.len()
    }
}

/// Generation knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    /// Pairs per image for compose; compositions per image for inductive.
    /// `None` disables the cap.
    pub max_pairs_per_image: Option<usize>,
    /// Emit each question's negation once instead of once per pair.
    pub dedup_negations: bool,
    /// Also emit every two-operand compose sample with its operands swapped.
    pub mirror: bool,
    /// Emit the plain `Q` and `NOT Q` supplement templates.
    pub include_plain: bool,
    pub single_connective_only: bool,
    /// Operand count for inductive generation.
    pub operands: usize,
    /// Down-sample to this many samples, weighted by category.
    pub target_size: Option<usize>,
    /// Per-category sampling weights; missing categories weigh 1.
    pub weights: BTreeMap<String, f64>,
    /// Worker threads; 1 is the sequential reference path.
    pub jobs: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            max_pairs_per_image: Some(10),
            dedup_negations: true,
            mirror: false,
            include_plain: false,
            single_connective_only: false,
            operands: 3,
            target_size: None,
            weights: BTreeMap::new(),
            jobs: 1,
        }
    }
}

impl GenConfig {
    fn weight(&self, category: &str) -> f64 {
        self.weights.get(category).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if let Some((k, w)) = self.weights.iter().find(|(_, w)| **w < 0.0 || !w.is_finite()) {
            return Err(DataError::Ingestion(format!("weight for `{k}` must be non-negative, got {w}")));
        }
        if self.jobs == 0 {
            return Err(DataError::Pool("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Counters reported next to generated samples.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenReport {
    pub images: usize,
    pub atoms_used: usize,
    /// Atoms whose text does not survive negation and parsing unchanged.
    pub atoms_rejected: usize,
    pub images_missing_coco: usize,
    pub entries_skipped: usize,
    pub samples: usize,
}

impl GenReport {
    fn merge(&mut self, o: &GenReport) {
        self.images += o.images;
        self.atoms_used += o.atoms_used;
        self.atoms_rejected += o.atoms_rejected;
        self.images_missing_coco += o.images_missing_coco;
        self.entries_skipped += o.entries_skipped;
        self.samples += o.samples;
    }
}

/// Whether `text` can appear as an operand: it parses back to itself, every
/// legal negation parses back to it with the negation flag set, and it cannot
/// fuse with a neighbour through a stop phrase.
pub fn is_composable(text: &str) -> bool {
    if text != textgen::normalize_question(text) || !text.starts_with(|c: char| c.is_ascii_uppercase()) {
        return false;
    }
    if !qparser::boundary_safe(text) {
        return false;
    }
    let single = |t: &str, negated: bool| {
        let r = parse_composed(t);
        r.components.len() == 1 && r.components[0].text == text && r.components[0].negated == negated
    };
    if !single(text, false) {
        return false;
    }
    // lowercased as a non-initial component
    if !single(&textgen::lowercase_first(text), false) {
        return false;
    }
    match negation_candidates(text) {
        Ok(cands) => cands.iter().all(|e| single(&e.negated_text, true)),
        Err(_) => false,
    }
}

fn sample_seed(cfg: &GenConfig, sample_id: &str) -> u64 {
    derive_seed(cfg.seed, sample_id)
}

struct SampleSpec<'a> {
    id: String,
    formula: Formula,
    atoms: Vec<&'a AtomicQuestion>,
    category: String,
    mirror_of: Option<String>,
}

fn build_sample(spec: SampleSpec<'_>, cfg: &GenConfig) -> Result<ComposedSample, DataError> {
    let texts: Vec<&str> = spec.atoms.iter().map(|a| a.text.as_str()).collect();
    let surface = realize(&spec.formula, &texts, sample_seed(cfg, &spec.id))?;
    let answers: Vec<bool> = spec.atoms.iter().map(|a| a.answer).collect();
    let answer = boolform::eval(&spec.formula, &answers)?;
    let first = spec.atoms[0];
    Ok(ComposedSample {
        sample_id: spec.id,
        image_id: first.image_id,
        text: surface.text,
        formula: spec.formula.to_prefix(),
        atoms: spec.atoms.iter().map(|a| AtomRef::from(*a)).collect(),
        answer,
        category: spec.category,
        connective_count: spec.formula.connective_count(),
        split: first.split,
        mirror_of: spec.mirror_of,
    })
}

/// Swaps the operand order of a two-literal chain and renumbers atoms to
/// surface order.
fn mirrored<'a>(formula: &Formula, atoms: &[&'a AtomicQuestion]) -> (Formula, Vec<&'a AtomicQuestion>) {
    let m = formula.mirror();
    let leaves = m.leaves();
    let mut map = vec![0; leaves.len()];
    for (pos, &old) in leaves.iter().enumerate() {
        map[old] = pos;
    }
    (m.relabel(&map), leaves.iter().map(|&i| atoms[i]).collect())
}

fn vqa_id_key(a: &AtomicQuestion) -> (usize, &str) {
    (a.question_id.len(), a.question_id.as_str())
}

fn padded(id: &str) -> String {
    format!("{id:0>12}")
}

/// Eligible VQA atoms grouped by image, ordered by question id.
fn group_by_image<'a>(atoms: &'a [AtomicQuestion], report: &mut GenReport) -> BTreeMap<u64, Vec<&'a AtomicQuestion>> {
    let mut groups: BTreeMap<u64, Vec<&AtomicQuestion>> = BTreeMap::new();
    let mut seen = HashSet::new();
    for a in atoms.iter().filter(|a| a.source == Source::Vqa) {
        if !seen.insert((a.image_id, a.question_id.as_str())) {
            continue;
        }
        if is_composable(&a.text) {
            report.atoms_used += 1;
            groups.entry(a.image_id).or_default().push(a);
        } else {
            report.atoms_rejected += 1;
        }
    }
    for g in groups.values_mut() {
        g.sort_by(|a, b| vqa_id_key(a).cmp(&vqa_id_key(b)));
    }
    report.images = groups.len();
    groups
}

fn run_parallel<T, F>(items: Vec<T>, jobs: usize, f: F) -> Result<Vec<(Vec<ComposedSample>, GenReport)>, DataError>
where
    T: Send,
    F: Fn(T) -> Result<(Vec<ComposedSample>, GenReport), DataError> + Sync + Send,
{
    if jobs <= 1 {
        return items.into_iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| DataError::Pool(e.to_string()))?;
    pool.install(|| items.into_par_iter().map(f).collect())
}

/// Generated samples with their counters.
#[derive(Debug, Clone, Default)]
pub struct Generated {
    pub samples: Vec<ComposedSample>,
    pub report: GenReport,
}

fn finish(parts: Vec<(Vec<ComposedSample>, GenReport)>, mut report: GenReport, cfg: &GenConfig) -> Generated {
    let mut samples = Vec::new();
    for (s, r) in parts {
        samples.extend(s);
        report.merge(&r);
    }
    if cfg.single_connective_only {
        samples.retain(|s| s.connective_count <= 1);
    }
    samples.retain(|s| cfg.weight(&s.category) > 0.0);
    samples.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    if let Some(target) = cfg.target_size {
        samples = weighted_subsample(samples, target, cfg);
    }
    report.samples = samples.len();
    Generated { samples, report }
}

/// Weighted sampling without replacement (exponential keys), then restored
/// to sample-id order.
fn weighted_subsample(samples: Vec<ComposedSample>, target: usize, cfg: &GenConfig) -> Vec<ComposedSample> {
    if samples.len() <= target {
        return samples;
    }
    let mut keyed: Vec<(f64, ComposedSample)> = samples
        .into_iter()
        .map(|s| {
            let u: f64 = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed ^ 0x5eed, &s.sample_id)).gen_range(f64::EPSILON..1.0);
            (u.ln() / cfg.weight(&s.category), s)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.sample_id.cmp(&b.1.sample_id)));
    keyed.truncate(target);
    let mut out: Vec<ComposedSample> = keyed.into_iter().map(|(_, s)| s).collect();
    out.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    out
}

/// Compose samples from pairs of closed questions about the same image.
pub fn gen_compose(atoms: &[AtomicQuestion], cfg: &GenConfig) -> Result<Generated, DataError> {
    cfg.validate()?;
    let mut report = GenReport::default();
    let groups: Vec<(u64, Vec<&AtomicQuestion>)> = group_by_image(atoms, &mut report).into_iter().collect();
    let catalog = compose_catalog();
    let parts = run_parallel(groups, cfg.jobs, |(image, qs)| compose_image(image, &qs, &catalog, cfg))?;
    Ok(finish(parts, report, cfg))
}

fn compose_image(
    image: u64,
    qs: &[&AtomicQuestion],
    catalog: &[boolform::FormulaCatalogEntry],
    cfg: &GenConfig,
) -> Result<(Vec<ComposedSample>, GenReport), DataError> {
    let mut pairs: Vec<(usize, usize)> = (0..qs.len())
        .flat_map(|i| (i + 1..qs.len()).map(move |j| (i, j)))
        .collect();
    if let Some(cap) = cfg.max_pairs_per_image {
        pairs.truncate(cap);
    }
    let mut out = Vec::new();
    // role ("NOT Q1"/"NOT Q2") under which each question's negation is emitted
    let mut negation_role: BTreeMap<usize, &str> = BTreeMap::new();
    for &(i, j) in &pairs {
        let (q1, q2) = (qs[i], qs[j]);
        let base = format!("compose-{:012}-{}-{}", image, padded(&q1.question_id), padded(&q2.question_id));
        for (k, entry) in catalog.iter().enumerate() {
            let operands: Vec<&AtomicQuestion> = match entry.label.as_str() {
                "NOT Q1" | "NOT Q2" => {
                    let (idx, role) = if entry.label == "NOT Q1" { (i, "NOT Q1") } else { (j, "NOT Q2") };
                    if cfg.dedup_negations {
                        negation_role.entry(idx).or_insert(role);
                        continue;
                    }
                    vec![qs[idx]]
                }
                _ => vec![q1, q2],
            };
            let id = format!("{base}-{k:02}");
            if operands.len() == 2 && cfg.mirror {
                let (mf, ma) = mirrored(&entry.formula, &operands);
                out.push(build_sample(
                    SampleSpec {
                        id: format!("{id}-m"),
                        formula: mf,
                        atoms: ma,
                        category: entry.label.clone(),
                        mirror_of: Some(id.clone()),
                    },
                    cfg,
                )?);
            }
            out.push(build_sample(
                SampleSpec {
                    id,
                    formula: entry.formula.clone(),
                    atoms: operands,
                    category: entry.label.clone(),
                    mirror_of: None,
                },
                cfg,
            )?);
        }
    }
    let paired: BTreeSet<usize> = pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
    for (idx, q) in qs.iter().enumerate() {
        let role = match negation_role.get(&idx) {
            Some(r) => *r,
            None if !paired.contains(&idx) => "NOT Q1",
            None => continue,
        };
        out.push(build_sample(
            SampleSpec {
                id: format!("compose-{:012}-{}-neg", image, padded(&q.question_id)),
                formula: Formula::not(Formula::atom(0)),
                atoms: vec![q],
                category: role.to_string(),
                mirror_of: None,
            },
            cfg,
        )?);
    }
    Ok((out, GenReport::default()))
}

fn question_atom(image: u64, split: Split, id: String, text: String, answer: bool, source: Source) -> Option<AtomicQuestion> {
    is_composable(&text).then_some(AtomicQuestion {
        question_id: id,
        image_id: image,
        text,
        answer,
        source,
        split,
    })
}

/// Object, caption and antonym operands for one image.
struct SupplementOperands {
    object: Option<AtomicQuestion>,
    caption: Option<AtomicQuestion>,
    antonym: Option<AtomicQuestion>,
}

fn supplement_operands(image: u64, split: Split, coco: &CocoImage, vocab: Option<&ClassVocabulary>) -> SupplementOperands {
    let object = coco.objects.iter().find_map(|name| {
        question_atom(image, split, format!("obj:{image}:{name}"), object_to_question(name), true, Source::Object)
    });
    let mut captions: Vec<&String> = coco.captions.iter().collect();
    captions.sort();
    let caption = captions.iter().enumerate().find_map(|(k, c)| {
        question_atom(image, split, format!("cap:{image}:{k}"), caption_to_question(c), true, Source::Caption)
    });
    let antonym = vocab.and_then(|v| {
        let present: Vec<&str> = coco.objects.iter().map(String::as_str).collect();
        match adversarial_antonym(&present, v) {
            Ok(name) => question_atom(image, split, format!("anto:{image}:{name}"), object_to_question(&name), false, Source::Antonym),
            Err(e) => {
                log::warn!("image {image}: {e}");
                None
            }
        }
    });
    SupplementOperands { object, caption, antonym }
}

/// Supplement samples: every closed question combined with an object
/// question, a caption question and an adversarial-antonym question.
///
/// Without a class vocabulary the antonym-bearing templates are skipped.
pub fn gen_supplement(
    atoms: &[AtomicQuestion],
    coco: &BTreeMap<u64, CocoImage>,
    vocab: Option<&ClassVocabulary>,
    cfg: &GenConfig,
) -> Result<Generated, DataError> {
    cfg.validate()?;
    let mut report = GenReport::default();
    let groups: Vec<(u64, Vec<&AtomicQuestion>)> = group_by_image(atoms, &mut report).into_iter().collect();
    let catalog = supplement_catalog();
    let parts = run_parallel(groups, cfg.jobs, |(image, qs)| {
        let mut rep = GenReport::default();
        let Some(img) = coco.get(&image) else {
            log::warn!("image {image} has no COCO annotations; skipped");
            rep.images_missing_coco += 1;
            return Ok((Vec::new(), rep));
        };
        let ops = supplement_operands(image, qs[0].split, img, vocab);
        let mut out = Vec::new();
        for q in &qs {
            for (k, entry) in catalog.iter().enumerate() {
                if !entry.supplemental && !cfg.include_plain {
                    continue;
                }
                let mut operands = vec![*q];
                if let Some(role) = entry.operand_roles.get(1) {
                    let extra = match role {
                        Source::Object => ops.object.as_ref(),
                        Source::Caption => ops.caption.as_ref(),
                        Source::Antonym => ops.antonym.as_ref(),
                        Source::Vqa => None,
                    };
                    match extra {
                        Some(a) => operands.push(a),
                        None => {
                            rep.entries_skipped += 1;
                            continue;
                        }
                    }
                }
                out.push(build_sample(
                    SampleSpec {
                        id: format!("supp-{:012}-{}-{k:02}", image, padded(&q.question_id)),
                        formula: entry.formula.clone(),
                        atoms: operands,
                        category: entry.label.clone(),
                        mirror_of: None,
                    },
                    cfg,
                )?);
            }
        }
        Ok((out, rep))
    })?;
    Ok(finish(parts, report, cfg))
}

/// Random left-folded chains over `cfg.operands` distinct atoms per image;
/// each atom is negated with probability one half and each connective is
/// AND or OR with equal probability.
pub fn gen_inductive(atoms: &[AtomicQuestion], cfg: &GenConfig) -> Result<Generated, DataError> {
    cfg.validate()?;
    let n = cfg.operands.max(1);
    let mut report = GenReport::default();
    let groups: Vec<(u64, Vec<&AtomicQuestion>)> = group_by_image(atoms, &mut report)
        .into_iter()
        .filter(|(_, qs)| qs.len() >= n)
        .collect();
    let per_image = cfg.max_pairs_per_image.unwrap_or(10);
    let parts = run_parallel(groups, cfg.jobs, |(image, qs)| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("inductive-{n}-{image}")));
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let mut attempts = 0;
        while out.len() < per_image && attempts < per_image * 8 {
            attempts += 1;
            let mut picks: Vec<usize> = (0..qs.len()).collect::<Vec<_>>().choose_multiple(&mut rng, n).copied().collect();
            picks.sort_unstable();
            let chain = Chain {
                literals: (0..n).map(|i| Literal { atom: i, negated: rng.gen_bool(0.5) }).collect(),
                connectives: (1..n)
                    .map(|_| if rng.gen_bool(0.5) { Connective::And } else { Connective::Or })
                    .collect(),
            };
            let formula = chain.to_formula();
            let key = (picks.clone(), formula.to_prefix());
            if !seen.insert(key) {
                continue;
            }
            let draw = out.len();
            out.push(build_sample(
                SampleSpec {
                    id: format!("ind{n}-{image:012}-{draw:03}"),
                    category: formula.to_infix(),
                    formula,
                    atoms: picks.iter().map(|&i| qs[i]).collect(),
                    mirror_of: None,
                },
                cfg,
            )?);
        }
        Ok((out, GenReport::default()))
    })?;
    Ok(finish(parts, report, cfg))
}

/// Writes one JSON object per line with keys in sorted order.
pub fn write_jsonl<T: Serialize>(records: &[T], path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_jsonl_to(records, &mut w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn write_jsonl_to<T: Serialize, W: Write>(records: &[T], w: &mut W) -> std::io::Result<()> {
    for r in records {
        // Value maps are BTreeMaps, which gives sorted keys
        let v: Value = serde_json::to_value(r).map_err(std::io::Error::other)?;
        serde_json::to_writer(&mut *w, &v).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    read_jsonl_from(BufReader::new(file))
}

pub fn read_jsonl_from<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>, DataError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| DataError::Jsonl {
            line: n + 1,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DataError::Jsonl {
            line: n + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub count: usize,
    pub yes: usize,
}

/// Aggregate counts over a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total: usize,
    pub yes: usize,
    pub no: usize,
    pub yes_fraction: f64,
    pub per_category: BTreeMap<String, CategoryCount>,
    pub per_split: BTreeMap<String, usize>,
    pub connective_histogram: BTreeMap<usize, usize>,
    pub operand_histogram: BTreeMap<usize, usize>,
    /// Images that occur in more than one split.
    pub split_violations: Vec<u64>,
}

pub fn dataset_stats(samples: &[ComposedSample]) -> DatasetStats {
    let mut s = DatasetStats::default();
    let mut image_splits: BTreeMap<u64, BTreeSet<Split>> = BTreeMap::new();
    for x in samples {
        s.total += 1;
        if x.answer {
            s.yes += 1;
        } else {
            s.no += 1;
        }
        let c = s.per_category.entry(x.category.clone()).or_default();
        c.count += 1;
        c.yes += usize::from(x.answer);
        *s.per_split.entry(x.split.as_str().to_string()).or_default() += 1;
        *s.connective_histogram.entry(x.connective_count).or_default() += 1;
        *s.operand_histogram.entry(x.operand_count()).or_default() += 1;
        image_splits.entry(x.image_id).or_default().insert(x.split);
    }
    s.yes_fraction = if s.total == 0 { 0.0 } else { s.yes as f64 / s.total as f64 };
    s.split_violations = image_splits
        .into_iter()
        .filter(|(_, v)| v.len() > 1)
        .map(|(k, _)| k)
        .collect();
    s
}
