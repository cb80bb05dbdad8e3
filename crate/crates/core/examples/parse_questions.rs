//! Splitting composed questions and scoring the splits as BIO tags.

use std::error::Error;

use vqa_logic::boolform::Formula;
use vqa_logic::qparser::{parse_composed, parser_metrics, to_bio, ParseResult};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let questions = [
        "Is there beer and is the man not wearing shoes?",
        "Is it sunny or is there no umbrella?",
        "Is it black and white?",
        "Is the dog sleeping and is it raining or is there a car?",
    ];
    for q in questions {
        let r = parse_composed(q);
        println!("{q}\n    {}  {:?}", r.formula.to_prefix(), r.components);
        let segs: Vec<&str> = r.segments.iter().map(String::as_str).collect();
        println!("    {:?}", to_bio(&r.text, &segs)?);
    }

    let text = "Is there beer and is the man not wearing shoes?";
    let gold = ParseResult::gold(
        text,
        &Formula::parse_prefix("AND(Q1,NOT(Q2))")?,
        &["Is there beer?", "Is the man wearing shoes?"],
    )?;
    let m = parser_metrics(&[gold], &[parse_composed(text)])?;
    println!("\n{}", serde_json::to_string_pretty(&m)?);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
