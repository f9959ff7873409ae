use dsner_core::corpus::{parse_conll, ClassId, ConllOptions, LabeledSpan};
use dsner_core::metrics::{entity_f1, noisy_candidates, observed_vs_gold, optimal_tau, NoisyCandidate};
use dsner_core::selection::PositiveScore;

const GOLD: &str = "\
Peter B-PER\nBlackburn I-PER\nvisited O\nBonn B-LOC\n\n\
EU B-ORG\nand O\nUK B-LOC\nagree O\n\n\
Germany B-LOC\nwins O\n";

const PRED: &str = "\
Peter B-PER\nBlackburn I-PER\nvisited O\nBonn B-LOC\n\n\
EU B-LOC\nand O\nUK B-LOC\nagree O\n\n\
Germany O\nwins O\n";

#[test]
fn hand_counted_fixture() {
    let labels = parse_conll(GOLD, ConllOptions::default()).unwrap().dataset.labels;
    let parse = |t: &str| {
        dsner_core::corpus::parse_conll_with_labels(t, ConllOptions::default(), Some(&labels))
            .unwrap()
            .dataset
            .sentences
            .into_iter()
            .map(|s| s.observed)
            .collect::<Vec<_>>()
    };
    // Hits: Peter Blackburn, Bonn, UK. Wrong type: EU. Missed: EU, Germany.
    let p = entity_f1(&parse(PRED), &parse(GOLD)).unwrap();
    assert_eq!((p.tp, p.fp, p.fn_), (3, 1, 2));
    assert!((p.precision - 0.75).abs() < 1e-12);
    assert!((p.recall - 0.6).abs() < 1e-12);
    assert!((p.f1 - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-12);
}

#[test]
fn direct_f1_of_observed_column() {
    let text = "EU B-ORG B-ORG\nGerman O B-MISC\n\nBonn B-PER B-LOC\n";
    let opts = ConllOptions { has_gold_column: true, repair: false };
    let p = observed_vs_gold(&parse_conll(text, opts).unwrap().dataset).unwrap();
    assert_eq!((p.tp, p.fp, p.fn_), (1, 1, 2));
}

#[test]
fn noisy_flags_follow_gold() {
    let text = "EU B-ORG B-ORG\nGerman B-PER B-MISC\n";
    let opts = ConllOptions { has_gold_column: true, repair: false };
    let data = parse_conll(text, opts).unwrap().dataset;
    let org = data.labels.class_of("ORG").unwrap();
    let per = data.labels.class_of("PER").unwrap();
    let scores = [
        PositiveScore { sentence_id: 0, span: LabeledSpan::new(0, 0, org), confidence: 0.9 },
        PositiveScore { sentence_id: 0, span: LabeledSpan::new(1, 1, per), confidence: 0.2 },
    ];
    let c = noisy_candidates(&data, &scores).unwrap();
    assert_eq!(c.iter().map(|c| c.noisy).collect::<Vec<_>>(), vec![false, true]);
    let best = optimal_tau(&c).unwrap();
    // Anything in (0.2, 0.9] separates them; the smallest grid point is 0.201.
    assert_eq!(best.tau, 0.201);
    assert_eq!(best.f1, 1.0);
}

#[test]
fn tau_needs_noisy_positives() {
    let c = [NoisyCandidate { label: ClassId(1), confidence: 0.5, noisy: false }];
    assert!(optimal_tau(&c).is_err());
}
