//! Scoring answerers per category, including the recombination baseline.

use std::error::Error;

use vqa_logic::datagen::{filter_closed, gen_compose, GenConfig};
use vqa_logic::evalharness::{
    collect_triplets, commutativity_check, emit_report, evaluate, fc_compatibility_rate, Answerer, ConstantYes, Oracle,
    RandomAnswerer, RecombineMode, Recombiner, ReportFormat, DEFAULT_THRESHOLD,
};
use vqa_logic::synth::{synth_corpus, SynthConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let corpus = synth_corpus(&SynthConfig { images: 64, questions_per_image: 3, ..SynthConfig::default() });
    let (atoms, _) = filter_closed(&corpus.records()?);
    let cfg = GenConfig { mirror: true, ..GenConfig::default() };
    let samples = gen_compose(&atoms, &cfg)?.samples;

    let oracle = Oracle::new(&samples)?;
    let random = RandomAnswerer { seed: 0 };
    let frechet = Recombiner { atomic: &random, mode: RecombineMode::Frechet };
    let answerers: [&dyn Answerer; 4] = [&oracle, &random, &ConstantYes, &frechet];
    for a in answerers {
        let r = evaluate(&samples, a, DEFAULT_THRESHOLD)?;
        let comm = commutativity_check(&samples, a, DEFAULT_THRESHOLD);
        println!(
            "{:<28} {:>6.2}%  commutative pairs {:.3}",
            r.answerer,
            r.accuracy().unwrap_or(0.0),
            comm.consistency_rate.unwrap_or(0.0)
        );
    }

    let fc = fc_compatibility_rate(&collect_triplets(&samples, &random))?;
    println!("random answerer FC rate {:.3}", fc.rate.unwrap_or(0.0));

    let report = evaluate(&samples, &Recombiner { atomic: &oracle, mode: RecombineMode::Hard }, DEFAULT_THRESHOLD)?;
    print!("\n{}", emit_report(&report, ReportFormat::Markdown));
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
