//! Every example runs to completion.

macro_rules! example {
    ($name:ident, $file:literal) => {
        #[allow(dead_code)]
        #[path = $file]
        mod $name;
    };
}

example!(formulas, "../examples/formulas.rs");
example!(frechet_loss, "../examples/frechet_loss.rs");
example!(negation, "../examples/negation.rs");
example!(parse_questions, "../examples/parse_questions.rs");
example!(adversarial_antonyms, "../examples/adversarial_antonyms.rs");
example!(generate_datasets, "../examples/generate_datasets.rs");
example!(evaluate_answerers, "../examples/evaluate_answerers.rs");

#[test]
fn examples_run() {
    formulas::run_example().unwrap();
    frechet_loss::run_example().unwrap();
    negation::run_example().unwrap();
    parse_questions::run_example().unwrap();
    adversarial_antonyms::run_example().unwrap();
    generate_datasets::run_example().unwrap();
    evaluate_answerers::run_example().unwrap();
}
