//! Formula catalogs, truth tables and De Morgan rewriting.

use std::error::Error;

use vqa_logic::boolform::{compose_catalog, demorgan_nnf, equivalent, parse_label, truth_table, Formula};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    println!("{:<20} {:<22} table (row k = bits of k, Q1 lowest)", "label", "prefix");
    for entry in compose_catalog() {
        let rows: String = truth_table(&entry.formula)?
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect();
        println!("{:<20} {:<22} {rows}", entry.label, entry.formula.to_prefix());
    }

    let f = Formula::parse_prefix("NOT(OR(Q1,AND(Q2,NOT(Q3))))")?;
    let nnf = demorgan_nnf(&f);
    println!("\n{}  =>  {}", f.to_infix(), nnf.to_infix());
    assert!(equivalent(&f, &nnf)?);

    let (g, names) = parse_label("NOT Q AND anto(B)")?;
    println!("{} over {names:?}: {}", g.to_prefix(), g.to_infix());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
