//! Fréchet bounds, the compatibility loss and the joint objective.

use std::error::Error;

use vqa_logic::boolform::Formula;
use vqa_logic::lossmath::{fc_loss, frechet_and, frechet_for_formula, frechet_or, joint_loss, LossWeights};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    for (p1, p2) in [(0.7, 0.6), (0.9, 0.2), (0.5, 0.5)] {
        let a = frechet_and(p1, p2)?;
        let o = frechet_or(p1, p2)?;
        println!(
            "p=({p1}, {p2})  AND [{:.2}, {:.2}] mean {:.3}   OR [{:.2}, {:.2}] mean {:.3}",
            a.lower, a.upper, a.mean, o.lower, o.upper, o.mean
        );
    }

    // "Is the man wearing a hat and is it not raining?"
    let f = Formula::parse_prefix("AND(Q1,NOT(Q2))")?;
    let bounds = frechet_for_formula(&f, &[0.9, 0.3])?;
    for p_yes in [0.1, 0.5, 0.8] {
        println!("model says {p_yes:.1}: FC loss {:.3} (indicator {})", fc_loss(p_yes, &bounds), bounds.indicator());
    }

    let w = LossWeights::new(0.2, 0.2, 0.5)?;
    println!("joint loss: {:.4}", joint_loss(0.7, 0.1, 0.3, fc_loss(0.1, &bounds), &w)?);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
