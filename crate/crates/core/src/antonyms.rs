//! Adversarial antonyms: the absent object class closest in embedding space
//! to an object that is present.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AntonymError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("class `{0}` has no word in the embedding vocabulary")]
    UnusableClass(String),
    #[error("antonym selection failed: {0}")]
    Selection(String),
}

/// Word vectors keyed by lowercased token.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    vectors: Vec<Vec<f32>>,
    duplicates: Vec<String>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Tokens that appeared more than once while loading; the last row won.
    pub fn duplicates(&self) -> &[String] {
        &self.duplicates
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index
            .get(&token.to_lowercase())
            .map(|&i| self.vectors[i].as_slice())
    }

    /// Parses whitespace-separated `token v1 ... vd` rows.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, AntonymError> {
        let mut table = EmbeddingTable::default();
        for (n, line) in reader.lines().enumerate() {
            let line_no = n + 1;
            let line = line.map_err(|e| AntonymError::Format {
                line: line_no,
                msg: e.to_string(),
            })?;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values = parts
                .map(|v| v.parse::<f32>())
                .collect::<Result<Vec<f32>, _>>()
                .map_err(|e| AntonymError::Format {
                    line: line_no,
                    msg: e.to_string(),
                })?;
            if values.is_empty() {
                return Err(AntonymError::Format {
                    line: line_no,
                    msg: format!("token `{token}` has no vector"),
                });
            }
            if table.dim == 0 {
                table.dim = values.len();
            } else if values.len() != table.dim {
                return Err(AntonymError::Format {
                    line: line_no,
                    msg: format!("expected {} values, found {}", table.dim, values.len()),
                });
            }
            let key = token.to_lowercase();
            match table.index.get(&key) {
                Some(&i) => {
                    log::warn!("line {line_no}: duplicate token `{key}`, keeping the later vector");
                    table.duplicates.push(key);
                    table.vectors[i] = values;
                }
                None => {
                    table.index.insert(key, table.vectors.len());
                    table.vectors.push(values);
                }
            }
        }
        Ok(table)
    }
}

/// Loads a text embedding file; `.gz` files are decompressed on the fly.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable, AntonymError> {
    let path = path.as_ref();
    let io_err = |source| AntonymError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    EmbeddingTable::from_reader(BufReader::new(reader))
}

/// Mean of the in-vocabulary word vectors of a class name. Hyphens split
/// words like spaces.
pub fn class_vector(name: &str, table: &EmbeddingTable) -> Result<Vec<f64>, AntonymError> {
    let mut sum = vec![0.0f64; table.dim()];
    let mut hits = 0usize;
    for w in name.split(|c: char| c.is_whitespace() || c == '-').filter(|w| !w.is_empty()) {
        if let Some(v) = table.get(w) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += f64::from(*x);
            }
            hits += 1;
        }
    }
    if hits == 0 {
        return Err(AntonymError::UnusableClass(name.to_string()));
    }
    Ok(sum.into_iter().map(|s| s / hits as f64).collect())
}

/// Object classes with precomputed vectors.
#[derive(Debug, Clone)]
pub struct ClassVocabulary {
    classes: Vec<(String, Option<Vec<f64>>)>,
}

impl ClassVocabulary {
    pub fn new<S: AsRef<str>>(names: &[S], table: &EmbeddingTable) -> Self {
        let mut classes: Vec<(String, Option<Vec<f64>>)> = names
            .iter()
            .map(|n| (n.as_ref().to_string(), class_vector(n.as_ref(), table).ok()))
            .collect();
        classes.sort_by(|a, b| a.0.cmp(&b.0));
        classes.dedup_by(|a, b| a.0 == b.0);
        ClassVocabulary { classes }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(|(n, _)| n.as_str())
    }

    pub fn unusable(&self) -> impl Iterator<Item = &str> {
        self.classes
            .iter()
            .filter(|(_, v)| v.is_none())
            .map(|(n, _)| n.as_str())
    }

    pub fn vector(&self, name: &str) -> Option<&[f64]> {
        self.classes
            .binary_search_by(|(n, _)| n.as_str().cmp(name))
            .ok()
            .and_then(|i| self.classes[i].1.as_deref())
    }
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Absent class minimizing the l2 distance to any present class; ties go to
/// the lexicographically smaller name.
pub fn adversarial_antonym<S: AsRef<str>>(
    present_objects: &[S],
    vocab: &ClassVocabulary,
) -> Result<String, AntonymError> {
    let present: BTreeSet<&str> = present_objects.iter().map(|s| s.as_ref()).collect();
    if present.is_empty() {
        return Err(AntonymError::Selection("no objects are present".into()));
    }
    let present_vecs: Vec<&[f64]> = present.iter().filter_map(|p| vocab.vector(p)).collect();
    if present_vecs.is_empty() {
        return Err(AntonymError::Selection(
            "no present object has an embedding".into(),
        ));
    }
    let mut best: Option<(f64, &str)> = None;
    for (name, vec) in &vocab.classes {
        let Some(v) = vec else { continue };
        if present.contains(name.as_str()) {
            continue;
        }
        let d = present_vecs.iter().map(|p| l2(p, v)).fold(f64::INFINITY, f64::min);
        // classes iterate in name order, so strict < keeps the smaller name on ties
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, name));
        }
    }
    best.map(|(_, n)| n.to_string())
        .ok_or_else(|| AntonymError::Selection("every usable class is present".into()))
}

/// The 80 COCO object categories.
pub const COCO_CLASSES: [&str; 80] = [
    "person", "bicycle", "car", "motorcycle", "airplane", "bus", "train", "truck", "boat",
    "traffic light", "fire hydrant", "stop sign", "parking meter", "bench", "bird", "cat", "dog",
    "horse", "sheep", "cow", "elephant", "bear", "zebra", "giraffe", "backpack", "umbrella",
    "handbag", "tie", "suitcase", "frisbee", "skis", "snowboard", "sports ball", "kite",
    "baseball bat", "baseball glove", "skateboard", "surfboard", "tennis racket", "bottle",
    "wine glass", "cup", "fork", "knife", "spoon", "bowl", "banana", "apple", "sandwich", "orange",
    "broccoli", "carrot", "hot dog", "pizza", "donut", "cake", "chair", "couch", "potted plant",
    "bed", "dining table", "toilet", "tv", "laptop", "mouse", "remote", "keyboard", "cell phone",
    "microwave", "oven", "toaster", "sink", "refrigerator", "book", "clock", "vase", "scissors",
    "teddy bear", "hair drier", "toothbrush",
];
