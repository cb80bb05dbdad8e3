//! Negating closed questions and realizing composed ones.

use std::error::Error;

use vqa_logic::boolform::Formula;
use vqa_logic::textgen::{caption_to_question, negate_question, negation_candidates, object_to_question, realize};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    for q in [
        "Is there a chair?",
        "Is the man wearing shoes?",
        "Is this an area near the city?",
        "Do you think it's gonna rain?",
    ] {
        println!("{q}");
        for edit in negation_candidates(q)? {
            println!("    {:<12} {}", format!("{:?}", edit.rule_id), edit.negated_text);
        }
        println!("    seed 3 picks: {}", negate_question(q, 3)?.negated_text);
    }

    println!("\n{}", object_to_question("wine glass"));
    println!("{}", caption_to_question("A dog sleeping on a couch."));

    let f = Formula::parse_prefix("OR(AND(Q1,NOT(Q2)),Q3)")?;
    let atoms = ["Is it sunny?", "Is there a dog?", "Is the woman smiling?"];
    let s = realize(&f, &atoms, 7)?;
    println!("\n{}  ->  {}", f.to_infix(), s.text);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
