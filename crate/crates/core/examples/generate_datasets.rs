//! Compose, supplement and inductive datasets from a small annotation set.

use std::error::Error;
use std::path::Path;

use vqa_logic::antonyms::{load_embeddings, ClassVocabulary, COCO_CLASSES};
use vqa_logic::datagen::{
    dataset_stats, filter_closed, gen_compose, gen_inductive, gen_supplement, load_coco, load_vqa, GenConfig,
};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let mini = data.join("mini");
    let records = load_vqa(mini.join("questions.json"), mini.join("annotations.json"))?;
    let (atoms, filter) = filter_closed(&records);
    println!("{} questions, {} closed and unanimous", filter.total, filter.kept);

    let cfg = GenConfig { seed: 1, ..GenConfig::default() };
    let compose = gen_compose(&atoms, &cfg)?;
    for s in compose.samples.iter().take(4) {
        println!("  [{}] {} -> {}", s.category, s.text, if s.answer { "yes" } else { "no" });
    }

    let coco = load_coco(mini.join("instances.json"), mini.join("captions.json"))?;
    let table = load_embeddings(data.join("embeddings-synthetic.txt"))?;
    let vocab = ClassVocabulary::new(&COCO_CLASSES, &table);
    let supplement = gen_supplement(&atoms, &coco, Some(&vocab), &cfg)?;
    let inductive = gen_inductive(&atoms, &GenConfig { operands: 3, ..cfg.clone() })?;
    if let Some(s) = inductive.samples.first() {
        println!("  [{}] {}", s.category, s.text);
    }

    for (name, g) in [("compose", &compose), ("supplement", &supplement), ("inductive", &inductive)] {
        let st = dataset_stats(&g.samples);
        println!("{name:<11} {:>4} samples, yes fraction {:.3}", st.total, st.yes_fraction);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
