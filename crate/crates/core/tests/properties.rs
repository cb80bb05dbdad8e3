use std::collections::HashMap;
use std::sync::OnceLock;

use proptest::prelude::*;

use vqa_logic::boolform::{demorgan_nnf, equivalent, eval, truth_table, Chain, Connective, Formula, Literal};
use vqa_logic::datagen::{filter_closed, gen_compose, ComposedSample, GenConfig};
use vqa_logic::evalharness::{evaluate, ExternalFile};
use vqa_logic::lossmath::{frechet_for_formula, Probability};
use vqa_logic::qparser::parse_composed;
use vqa_logic::synth::{synth_corpus, SynthConfig};
use vqa_logic::textgen::{negation_candidates, realize, strip_negation};

const ATOMS: usize = 4;

fn formula() -> impl Strategy<Value = Formula> {
    let leaf = (0..ATOMS).prop_map(Formula::atom);
    leaf.prop_recursive(6, 64, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::and(l, r)),
            (inner.clone(), inner).prop_map(|(l, r)| Formula::or(l, r)),
        ]
    })
}

// Reference semantics over a fixed-width assignment; independent of the
// library's evaluator.
fn reference(f: &Formula, row: usize) -> bool {
    match f {
        Formula::Atom(i) => (row >> i) & 1 == 1,
        Formula::Not(g) => !reference(g, row),
        Formula::And(l, r) => reference(l, row) && reference(r, row),
        Formula::Or(l, r) => reference(l, row) || reference(r, row),
    }
}

/// Pads `f` so that every atom below ATOMS occurs, keeping it a function of
/// the same rows.
fn full_width(f: Formula) -> Formula {
    (0..ATOMS).fold(f, |acc, i| Formula::or(acc, Formula::and(Formula::atom(i), Formula::not(Formula::atom(i)))))
}

fn chain(n: usize) -> impl Strategy<Value = Chain> {
    (prop::collection::vec(any::<bool>(), n), prop::collection::vec(any::<bool>(), n - 1)).prop_map(|(neg, conn)| Chain {
        literals: neg.into_iter().enumerate().map(|(atom, negated)| Literal { atom, negated }).collect(),
        connectives: conn.into_iter().map(|a| if a { Connective::And } else { Connective::Or }).collect(),
    })
}

fn pool() -> &'static [String] {
    static POOL: OnceLock<Vec<String>> = OnceLock::new();
    POOL.get_or_init(build_pool)
}

fn build_pool() -> Vec<String> {
    let c = synth_corpus(&SynthConfig { images: 200, questions_per_image: 3, ..SynthConfig::default() });
    let (atoms, _) = filter_closed(&c.records().unwrap());
    let mut texts: Vec<String> = atoms.into_iter().map(|a| a.text).collect();
    texts.sort();
    texts.dedup();
    texts
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn nnf_is_equivalent_and_normal(f in formula()) {
        let g = demorgan_nnf(&f);
        prop_assert!(g.is_nnf());
        prop_assert!(equivalent(&f, &g).unwrap());
    }

    #[test]
    fn eval_matches_reference(f in formula()) {
        let f = full_width(f);
        let table = truth_table(&f).unwrap();
        for (row, v) in table.iter().enumerate() {
            prop_assert_eq!(*v, reference(&f, row));
        }
    }

    #[test]
    fn prefix_round_trips(f in formula()) {
        prop_assert_eq!(Formula::parse_prefix(&f.to_prefix()).unwrap(), f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn frechet_bounds_are_ordered(c in (2usize..6).prop_flat_map(chain), probs in prop::collection::vec(0.0f64..=1.0, 5)) {
        let f = c.to_formula();
        let b = frechet_for_formula(&f, &probs[..f.atom_count()]).unwrap();
        prop_assert!(0.0 <= b.lower && b.lower <= b.mean && b.mean <= b.upper && b.upper <= 1.0);
    }

    #[test]
    fn realized_questions_parse_back(
        c in (2usize..6).prop_flat_map(chain),
        picks in prop::sample::subsequence((0..60).collect::<Vec<usize>>(), 5),
        seed in any::<u64>(),
    ) {
        let pool = pool();
        let f = c.to_formula();
        let n = f.atom_count();
        let atoms: Vec<&str> = picks.iter().take(n).map(|&i| pool[i % pool.len()].as_str()).collect();
        prop_assume!(atoms.iter().collect::<std::collections::HashSet<_>>().len() == n);
        let s = realize(&f, &atoms, seed).unwrap();
        let parsed = parse_composed(&s.text);
        prop_assert_eq!(&parsed.formula, &f, "{}", s.text);
        let texts: Vec<&str> = parsed.components.iter().map(|c| c.text.as_str()).collect();
        prop_assert_eq!(texts, atoms);
    }
}

#[test]
fn negations_strip_back_for_every_pool_question() {
    for q in pool() {
        let q = q.as_str();
        for e in negation_candidates(q).unwrap() {
            assert_eq!(strip_negation(&e).unwrap(), q);
            assert_eq!(e.negated_text.split(' ').count(), q.split(' ').count() + usize::from(e.replaced_article.is_none()));
        }
    }
}

fn compose_samples() -> &'static [ComposedSample] {
    static SAMPLES: OnceLock<Vec<ComposedSample>> = OnceLock::new();
    SAMPLES.get_or_init(build_compose)
}

fn build_compose() -> Vec<ComposedSample> {
    let c = synth_corpus(&SynthConfig { images: 48, questions_per_image: 3, ..SynthConfig::default() });
    let (atoms, _) = filter_closed(&c.records().unwrap());
    gen_compose(&atoms, &GenConfig::default()).unwrap().samples
}

fn predictions(samples: &[ComposedSample], seed: u64) -> ExternalFile {
    let mut state = seed;
    let map: HashMap<String, Probability> = samples
        .iter()
        .map(|s| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s.sample_id.clone(), Probability::new((state >> 11) as f64 / (1u64 << 53) as f64).unwrap())
        })
        .collect();
    ExternalFile::from_map(map)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn raising_the_threshold_only_helps_on_no_answers(seed in any::<u64>(), lo in 0.0f64..1.0, d in 0.0f64..0.5) {
        let all = compose_samples();
        let file = predictions(all, seed);
        let hi = (lo + d).min(1.0);
        for want in [false, true] {
            let subset: Vec<ComposedSample> = all.iter().filter(|s| s.answer == want).cloned().collect();
            let a = evaluate(&subset, &file, lo).unwrap().overall.correct;
            let b = evaluate(&subset, &file, hi).unwrap().overall.correct;
            if want { prop_assert!(b <= a) } else { prop_assert!(b >= a) }
        }
    }

    #[test]
    fn overall_is_count_weighted_mean_of_categories(seed in any::<u64>()) {
        let all = compose_samples();
        let r = evaluate(all, &predictions(all, seed), 0.5).unwrap();
        let cells: Vec<_> = r.per_category.iter().filter(|c| !c.cell.absent).map(|c| c.cell).collect();
        let count: usize = cells.iter().map(|c| c.count).sum();
        let weighted: f64 = cells.iter().map(|c| c.accuracy.unwrap() * c.count as f64).sum::<f64>() / count as f64;
        prop_assert_eq!(count, r.overall.count);
        prop_assert!((weighted - r.overall.accuracy.unwrap()).abs() < 1e-9);
    }
}

#[test]
fn answers_follow_formulas() {
    for s in compose_samples() {
        let f = s.parsed_formula().unwrap();
        assert_eq!(eval(&f, &s.atom_answers()).unwrap(), s.answer, "{}", s.sample_id);
    }
}
