//! Nearest absent object class in embedding space.

use std::error::Error;
use std::path::Path;

use vqa_logic::antonyms::{adversarial_antonym, load_embeddings, ClassVocabulary, COCO_CLASSES};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/embeddings-synthetic.txt");
    let table = load_embeddings(&path)?;
    let vocab = ClassVocabulary::new(&COCO_CLASSES, &table);
    println!("{} words, {} dimensions", table.len(), table.dim());
    for present in [&["bottle"][..], &["cup"], &["surfboard", "person"], &["motorcycle"]] {
        println!("{present:?} -> {}", adversarial_antonym(present, &vocab)?);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
