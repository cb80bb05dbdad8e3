//! Seeded synthetic corpora in VQA-v2 and COCO file layout.
//!
//! Real VQA/COCO annotations are large and licensed separately; these small
//! corpora exercise the same loaders and generators. In image `i` the closed
//! answers are the bits of `i mod 2^q`, so over every run of `2^q`
//! consecutive images each truth assignment appears exactly once.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::antonyms::COCO_CLASSES;
use crate::datagen::{self, is_composable, CocoImage, DataError, VqaRecord};
use crate::textgen::{article_for, object_to_question};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthConfig {
    pub images: usize,
    /// Closed, unanimously answered questions per image.
    pub questions_per_image: usize,
    pub seed: u64,
    pub data_subtype: String,
    /// Adds an open question and a split-vote yes/no question per image.
    pub noise: bool,
    pub first_image_id: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            images: 8,
            questions_per_image: 2,
            seed: 0,
            data_subtype: "train2014".into(),
            noise: false,
            first_image_id: 1,
        }
    }
}

/// The four annotation documents.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub questions: Value,
    pub annotations: Value,
    pub instances: Value,
    pub captions: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthPaths {
    pub questions: PathBuf,
    pub annotations: PathBuf,
    pub instances: PathBuf,
    pub captions: PathBuf,
}

impl SynthCorpus {
    pub fn records(&self) -> Result<Vec<VqaRecord>, DataError> {
        datagen::load_vqa_str(&self.questions.to_string(), &self.annotations.to_string())
    }

    pub fn coco(&self) -> Result<std::collections::BTreeMap<u64, CocoImage>, DataError> {
        datagen::load_coco_str(&self.instances.to_string(), &self.captions.to_string())
    }

    /// Writes `questions.json`, `annotations.json`, `instances.json` and
    /// `captions.json` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<SynthPaths, DataError> {
        let dir = dir.as_ref();
        let write = |name: &str, v: &Value| -> Result<PathBuf, DataError> {
            let p = dir.join(name);
            let text = serde_json::to_string_pretty(v).expect("JSON value serializes");
            std::fs::write(&p, text).map_err(|source| DataError::Io {
                path: p.display().to_string(),
                source,
            })?;
            Ok(p)
        };
        Ok(SynthPaths {
            questions: write("questions.json", &self.questions)?,
            annotations: write("annotations.json", &self.annotations)?,
            instances: write("instances.json", &self.instances)?,
            captions: write("captions.json", &self.captions)?,
        })
    }
}

const PEOPLE: &[&str] = &["man", "woman", "boy", "girl", "player", "child"];

const ACTIVITIES: &[&str] = &[
    "wearing a hat",
    "wearing glasses",
    "holding an umbrella",
    "holding a phone",
    "smiling",
    "standing",
    "sitting",
    "looking at the camera",
    "eating",
    "riding a bike",
];

const ANIMALS: &[&str] = &["dog", "cat", "horse", "bird", "cow"];

const ANIMAL_STATES: &[&str] = &["sleeping", "running", "on the grass", "near the fence", "eating"];

const WEATHER: &[&str] = &["sunny", "raining", "snowing", "cloudy", "daytime"];

const PLACES: &[&str] = &["kitchen", "beach", "office", "street", "park", "airport", "bathroom"];

const CAPTION_PLACES: &[&str] = &["kitchen", "park", "street", "living room", "beach", "field"];

/// Every open template instantiated, in a fixed order.
fn closed_question_pool() -> Vec<String> {
    let mut out = Vec::new();
    for p in PEOPLE {
        for a in ACTIVITIES {
            out.push(format!("Is the {p} {a}?"));
        }
    }
    for an in ANIMALS {
        for s in ANIMAL_STATES {
            out.push(format!("Is the {an} {s}?"));
        }
    }
    for w in WEATHER {
        out.push(format!("Is it {w}?"));
    }
    for pl in PLACES {
        out.push(format!("Is this {} {pl}?", article_for(pl)));
    }
    out.push("Are the lights on?".into());
    out.retain(|q| is_composable(q));
    out
}

fn existential(class: &str) -> String {
    object_to_question(class)
}

fn answer_list(words: &[&str]) -> Value {
    Value::Array(
        words
            .iter()
            .enumerate()
            .map(|(i, w)| json!({"answer": w, "answer_confidence": "yes", "answer_id": i + 1}))
            .collect(),
    )
}

/// Builds a corpus; equal configs give equal corpora.
pub fn synth_corpus(cfg: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pool = closed_question_pool();
    let object_classes: Vec<&str> = COCO_CLASSES.iter().copied().filter(|c| is_composable(&existential(c))).collect();
    let q = cfg.questions_per_image;

    let mut questions = Vec::new();
    let mut annotations = Vec::new();
    let mut images = Vec::new();
    let mut instances = Vec::new();
    let mut captions = Vec::new();
    let mut next_qid = 0u64;
    let mut next_ann = 0u64;

    for i in 0..cfg.images {
        let image_id = cfg.first_image_id + i as u64;
        images.push(json!({"id": image_id, "file_name": format!("synthetic_{image_id:012}.jpg")}));
        let mut present: BTreeSet<&str> = BTreeSet::new();
        let mut absent: BTreeSet<&str> = BTreeSet::new();
        // one or two background objects
        for _ in 0..rng.gen_range(1..=2) {
            present.insert(object_classes.choose(&mut rng).expect("classes"));
        }
        let mut texts: BTreeSet<String> = BTreeSet::new();
        let pattern = if q >= 64 { rng.gen::<u64>() } else { (i as u64) % (1u64 << q) };
        let mut closed = Vec::new();
        for j in 0..q {
            let answer = (pattern >> (q - 1 - j)) & 1 == 1;
            let text = loop {
                let t = if rng.gen_bool(0.3) {
                    let class = *object_classes.choose(&mut rng).expect("classes");
                    let clash = if answer { absent.contains(class) } else { present.contains(class) };
                    if clash {
                        continue;
                    }
                    if answer {
                        present.insert(class);
                    } else {
                        absent.insert(class);
                    }
                    existential(class)
                } else {
                    pool.choose(&mut rng).expect("pool").clone()
                };
                if texts.insert(t.clone()) {
                    break t;
                }
            };
            closed.push((text, answer));
        }
        for (text, answer) in closed {
            next_qid += 1;
            let word = if answer { "yes" } else { "no" };
            questions.push(json!({"image_id": image_id, "question": text, "question_id": next_qid}));
            annotations.push(json!({
                "question_id": next_qid, "image_id": image_id, "answer_type": "yes/no",
                "question_type": "is the", "multiple_choice_answer": word,
                "answers": answer_list(&[word; 10]),
            }));
        }
        if cfg.noise {
            next_qid += 1;
            questions.push(json!({"image_id": image_id, "question": "What color is the wall?", "question_id": next_qid}));
            annotations.push(json!({
                "question_id": next_qid, "image_id": image_id, "answer_type": "other",
                "question_type": "what color is the", "multiple_choice_answer": "white",
                "answers": answer_list(&["white"; 10]),
            }));
            next_qid += 1;
            let votes = ["yes", "yes", "yes", "yes", "yes", "yes", "yes", "yes", "yes", "no"];
            questions.push(json!({"image_id": image_id, "question": "Is the photo old?", "question_id": next_qid}));
            annotations.push(json!({
                "question_id": next_qid, "image_id": image_id, "answer_type": "yes/no",
                "question_type": "is the", "multiple_choice_answer": "yes",
                "answers": answer_list(&votes),
            }));
        }
        for class in &present {
            let cat = COCO_CLASSES.iter().position(|c| c == class).expect("coco class") + 1;
            for _ in 0..rng.gen_range(1..=2) {
                next_ann += 1;
                instances.push(json!({"id": next_ann, "image_id": image_id, "category_id": cat, "iscrowd": 0}));
            }
        }
        for k in 0..5 {
            let person = PEOPLE.choose(&mut rng).expect("people");
            let activity = ACTIVITIES.choose(&mut rng).expect("activities");
            let place = CAPTION_PLACES.choose(&mut rng).expect("places");
            let text = if k == 0 && rng.gen_bool(0.5) {
                format!("A {person} and a dog in the {place}.")
            } else {
                format!("{} {person} {activity} in the {place}.", if rng.gen_bool(0.5) { "A" } else { "The" })
            };
            next_ann += 1;
            captions.push(json!({"id": next_ann, "image_id": image_id, "caption": text}));
        }
    }
    let categories: Vec<Value> = COCO_CLASSES
        .iter()
        .enumerate()
        .map(|(i, c)| json!({"id": i + 1, "name": c, "supercategory": "object"}))
        .collect();
    SynthCorpus {
        questions: json!({
            "info": {"description": "synthetic"}, "task_type": "Open-Ended", "data_type": "mscoco",
            "data_subtype": cfg.data_subtype, "questions": questions,
        }),
        annotations: json!({
            "info": {"description": "synthetic"}, "data_type": "mscoco",
            "data_subtype": cfg.data_subtype, "annotations": annotations,
        }),
        instances: json!({"images": images.clone(), "annotations": instances, "categories": categories}),
        captions: json!({"images": images, "annotations": captions}),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::filter_closed;

    #[test]
    fn deterministic() {
        let cfg = SynthConfig::default();
        assert_eq!(synth_corpus(&cfg), synth_corpus(&cfg));
        let other = SynthConfig { seed: 1, ..cfg.clone() };
        assert_ne!(synth_corpus(&cfg), synth_corpus(&other));
    }

    #[test]
    fn closed_questions_all_survive() {
        let cfg = SynthConfig { images: 40, questions_per_image: 3, noise: true, ..SynthConfig::default() };
        let c = synth_corpus(&cfg);
        let (atoms, report) = filter_closed(&c.records().unwrap());
        assert_eq!(report.dropped_not_yes_no, 40);
        assert_eq!(report.dropped_ambiguous, 40);
        assert!(atoms.iter().all(|a| is_composable(&a.text)), "every closed synthetic question is composable");
        assert_eq!(atoms.len(), 40 * 3);
    }

    #[test]
    fn assignments_cycle() {
        let cfg = SynthConfig { images: 4, ..SynthConfig::default() };
        let (atoms, _) = filter_closed(&synth_corpus(&cfg).records().unwrap());
        let answers: Vec<bool> = atoms.iter().map(|a| a.answer).collect();
        assert_eq!(answers, [false, false, false, true, true, false, true, true]);
    }

    #[test]
    fn existential_answers_agree_with_objects() {
        let c = synth_corpus(&SynthConfig { images: 60, ..SynthConfig::default() });
        let coco = c.coco().unwrap();
        let (atoms, _) = filter_closed(&c.records().unwrap());
        for a in atoms.iter().filter(|a| a.text.starts_with("Is there")) {
            let present = coco[&a.image_id].objects.iter().any(|o| existential(o) == a.text);
            assert_eq!(present, a.answer, "{}", a.text);
        }
    }
}
