use dsner_core::corpus::{bio_to_spans, parse_conll, write_conll, ConllOptions, Dataset};
use dsner_core::noise_lab::{corrupt_labels, decompose_areas, export_matrix_csv, mask_entities, transition_matrix, Granularity};
use dsner_core::synth::{generate, SynthConfig};

const FIXTURE: &str = include_str!("fixtures/audit.conll");

fn fixture() -> Dataset {
    let opts = ConllOptions {
        has_gold_column: true,
        repair: false,
    };
    parse_conll(FIXTURE, opts).unwrap().dataset
}

#[test]
fn span_matrix_matches_golden_csv() {
    let m = transition_matrix(&fixture(), Granularity::Span).unwrap();
    assert_eq!(export_matrix_csv(&m), include_str!("fixtures/audit_span.csv"));
    let areas = decompose_areas(&m);
    assert_eq!((areas.correct, areas.uep, areas.nep, areas.total), (2, 1, 1, 4));
    assert!((areas.uep_mass - 0.25).abs() < 1e-15);
}

#[test]
fn token_matrix_hand_counts() {
    let m = transition_matrix(&fixture(), Granularity::Token).unwrap();
    let areas = decompose_areas(&m);
    assert_eq!((areas.correct, areas.uep, areas.nep, areas.total), (6, 1, 1, 8));
    assert_eq!(m.counts[0][0], 3);
    assert_eq!(m.counts[4][4], 2);
}

#[test]
fn conll_round_trip_is_byte_identical() {
    assert_eq!(write_conll(&fixture(), true), FIXTURE.trim_end_matches('\n').to_string() + "\n");
}

#[test]
fn twenty_sentence_tally_matches_oracle() {
    let clean = generate(&SynthConfig::default(), 20, 0, 3).unwrap();
    let mut masked = mask_entities(&clean, 0.4, 3).unwrap();
    for s in &mut masked.sentences {
        s.gold = None;
    }
    let mut noisy = corrupt_labels(&masked, 0.5, 4).unwrap();
    for (s, c) in noisy.sentences.iter_mut().zip(&clean.sentences) {
        s.gold = Some(c.observed.clone());
    }
    let k = noisy.labels.num_classes();

    let mut token = vec![vec![0u64; k]; k];
    let mut span = vec![vec![0u64; k]; k];
    for s in &noisy.sentences {
        let gold = s.gold.as_ref().unwrap();
        for i in 0..s.len() {
            token[s.observed[i].class().0][gold[i].class().0] += 1;
        }
        let obs = bio_to_spans(&s.observed);
        let gs = bio_to_spans(gold);
        for g in &gs {
            let o = obs.iter().find(|o| o.bounds() == g.bounds()).map_or(0, |o| o.label.0);
            span[o][g.label.0] += 1;
        }
        for o in obs.iter().filter(|o| gs.iter().all(|g| g.bounds() != o.bounds())) {
            span[o.label.0][0] += 1;
        }
    }
    assert_eq!(transition_matrix(&noisy, Granularity::Token).unwrap().counts, token);
    assert_eq!(transition_matrix(&noisy, Granularity::Span).unwrap().counts, span);
    let areas = decompose_areas(&transition_matrix(&noisy, Granularity::Span).unwrap());
    assert!(areas.uep > 0 && areas.nep > 0);
}

#[test]
fn masking_is_one_directional() {
    let clean = generate(&SynthConfig::default(), 50, 0, 9).unwrap();
    for p in [0.0, 0.3, 1.0] {
        let masked = mask_entities(&clean, p, 9).unwrap();
        let m = transition_matrix(&masked, Granularity::Span).unwrap();
        assert_eq!(decompose_areas(&m).nep, 0);
        if p == 0.0 {
            assert_eq!(decompose_areas(&m).uep, 0);
        }
        if p == 1.0 {
            assert!(masked.sentences.iter().all(|s| s.observed_spans().is_empty()));
        }
    }
    assert!(mask_entities(&clean, 1.5, 0).is_err());
}
