mod common;

use common::rng;
use isin::data::{default_schema, generate, GenConfig, PartStateVector};
use isin::eval::recall_at_k;
use isin::relationship::{
    build_feature, fuse_scores, generate_relationships, predict_relationships, rank_predicates, read_priors,
    read_relationships, toy_predicate, train_predicate_model, write_relationships, LinearPredicateModel,
    PriorScores, RelateConfig, RelationshipSample, PREDICATES,
};
use isin::Error;
use rand::Rng;

/// Indicator bin of each predicate in the widget schema: panel in use,
/// body tilted, knob attached, knob detached.
const INDICATOR: [usize; 4] = [2, 1, 4, 5];

/// Subject vectors set exactly one indicator bin, the predicate's; the
/// remaining bins and the whole object vector are noise.
fn separable_set(seed: u64, n: usize) -> Vec<RelationshipSample> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let predicate = i % 4;
            let mut s = vec![false; 6];
            s[INDICATOR[predicate]] = true;
            for b in [0, 3] {
                s[b] = r.gen_bool(0.5);
            }
            RelationshipSample {
                id: format!("{i:06}"),
                subject_category: "widget".into(),
                object_category: "widget".into(),
                subject_states: PartStateVector::from_bits(s),
                object_states: PartStateVector::from_bits((0..6).map(|_| r.gen_bool(0.5)).collect()),
                predicate,
            }
        })
        .collect()
}

fn top1(model: &LinearPredicateModel, set: &[RelationshipSample]) -> f64 {
    let ranked = predict_relationships(model, set, &PriorScores::default()).unwrap();
    let ids: Vec<Vec<usize>> = ranked.iter().map(|r| r.iter().map(|x| x.0).collect()).collect();
    let gt: Vec<Vec<usize>> = set.iter().map(|s| vec![s.predicate]).collect();
    recall_at_k(&ids, &gt, 1).unwrap()
}

#[test]
fn separable_toy_set_is_learned_exactly() {
    let cfg = RelateConfig::default();
    let train = separable_set(1, 200);
    let model = train_predicate_model(&train, 4, &cfg).unwrap();
    assert_eq!(top1(&model, &train), 1.0);
    assert_eq!(top1(&model, &separable_set(2, 100)), 1.0);
}

#[test]
fn panel_in_use_ranks_uses_first() {
    let model = train_predicate_model(&separable_set(3, 200), 4, &RelateConfig::default()).unwrap();
    let schema = default_schema();
    let mut s = PartStateVector::zeros(6);
    s.set(schema.bin("panel", "in use").unwrap(), true);
    s.set(schema.bin("body", "upright").unwrap(), true);
    let ranked = rank_predicates(&model.score_pair(&s, &PartStateVector::zeros(6)).unwrap(), None);
    assert_eq!(ranked.len(), PREDICATES.len());
    assert_eq!(PREDICATES[ranked[0].0], "uses");
}

#[test]
fn training_is_deterministic_per_seed() {
    let set = separable_set(4, 120);
    let cfg = RelateConfig { seed: 9, ..RelateConfig::default() };
    let a = train_predicate_model(&set, 4, &cfg).unwrap();
    let b = train_predicate_model(&set, 4, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_state_pairs_rank_by_biases_and_priors() {
    let model = train_predicate_model(&separable_set(5, 80), 4, &RelateConfig::default()).unwrap();
    let zero = PartStateVector::zeros(6);
    assert_eq!(model.score_pair(&zero, &zero).unwrap(), model.biases);

    let pair = RelationshipSample {
        id: "p".into(),
        subject_category: "widget".into(),
        object_category: "widget".into(),
        subject_states: zero.clone(),
        object_states: zero,
        predicate: 0,
    };
    let priors = PriorScores((0..4).map(|p| (("p".to_string(), p), [3.0, -3.0, 0.0, 1.0][p])).collect());
    let ranked = &predict_relationships(&model, &[pair], &priors).unwrap()[0];
    let mut want: Vec<(usize, f64)> =
        (0..4).map(|p| (p, fuse_scores(model.biases[p], [3.0, -3.0, 0.0, 1.0][p]))).collect();
    want.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    assert_eq!(ranked, &want);
}

#[test]
fn incomplete_priors_fall_back_to_state_scores() {
    let priors = PriorScores([(("p".to_string(), 0), 5.0)].into_iter().collect());
    assert_eq!(priors.row("p", 4), None);
    assert_eq!(rank_predicates(&[0.1, 0.4, 0.2, 0.3], None).iter().map(|x| x.0).collect::<Vec<_>>(), [1, 3, 2, 0]);
}

#[test]
fn fusion_cases() {
    assert_eq!(fuse_scores(0.4, 0.6), 0.5);
    let mut r = rng(8);
    for _ in 0..100 {
        let (a, b): (f64, f64) = (r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0));
        assert_eq!(fuse_scores(a, a), a);
        assert_eq!(fuse_scores(a, b), fuse_scores(b, a));
    }
}

#[test]
fn ranking_ignores_a_common_shift() {
    let mut r = rng(6);
    for _ in 0..50 {
        let scores: Vec<f64> = (0..4).map(|_| r.gen_range(-2.0..2.0)).collect();
        let priors: Vec<f64> = (0..4).map(|_| r.gen_range(-2.0..2.0)).collect();
        let c = r.gen_range(-3.0..3.0);
        let shifted: Vec<f64> = scores.iter().map(|s| s + c).collect();
        let shifted_p: Vec<f64> = priors.iter().map(|s| s + c).collect();
        let a: Vec<usize> = rank_predicates(&scores, Some(&priors)).iter().map(|x| x.0).collect();
        let b: Vec<usize> = rank_predicates(&shifted, Some(&shifted_p)).iter().map(|x| x.0).collect();
        assert_eq!(a, b);
    }
}

#[test]
fn features_are_injective() {
    let all: Vec<PartStateVector> =
        (0..8u32).map(|v| PartStateVector::from_bits((0..3).map(|b| v >> b & 1 == 1).collect())).collect();
    let mut seen = std::collections::HashSet::new();
    for a in &all {
        for b in &all {
            let f = build_feature(a, b, 4).unwrap();
            assert!(seen.insert(f.iter().map(|v| *v as u8).collect::<Vec<_>>()));
        }
    }
    assert!(build_feature(&all[0], &PartStateVector::zeros(5), 4).is_err());
}

#[test]
fn scores_are_linear_in_the_feature() {
    let model = train_predicate_model(&separable_set(7, 80), 4, &RelateConfig::default()).unwrap();
    let mut r = rng(1);
    let x: Vec<f64> = (0..144).map(|_| r.gen_range(0.0..1.0)).collect();
    let x3: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
    for ((a, b), bias) in model.scores(&x).unwrap().iter().zip(model.scores(&x3).unwrap()).zip(&model.biases) {
        assert!((3.0 * (a - bias) - (b - bias)).abs() < 1e-9);
    }
}

#[test]
fn recall_fixtures() {
    // Image 0 ranks its single GT first; image 1 has two GTs, one inside the
    // top 2; image 2's GT sits at rank 4.
    let ranked = vec![vec![0, 1, 2, 3], vec![2, 0, 1, 3], vec![1, 0, 2, 3]];
    let gt = vec![vec![0], vec![0, 3], vec![3]];
    assert_eq!(recall_at_k(&ranked, &gt, 1).unwrap(), 1.0 / 4.0);
    assert_eq!(recall_at_k(&ranked, &gt, 2).unwrap(), 2.0 / 4.0);
    assert_eq!(recall_at_k(&ranked, &gt, 50).unwrap(), 1.0);

    assert_eq!(recall_at_k(&[vec![1, 2]], &[vec![1]], 50).unwrap(), 1.0);
    assert_eq!(recall_at_k(&[vec![1, 2, 0]], &[vec![0]], 2).unwrap(), 0.0);
    assert_eq!(recall_at_k(&[vec![1, 2, 0]], &[vec![0, 2]], 2).unwrap(), 0.5);
    assert!(matches!(recall_at_k(&[vec![1]], &[vec![1]], 0), Err(Error::Config(_))));
}

#[test]
fn generated_pairs_follow_the_toy_rule_and_round_trip() {
    let schema = default_schema();
    let samples = generate(&GenConfig { num_samples: 40, seed: 5, ..GenConfig::default() }, &schema).unwrap();
    let records = generate_relationships(&samples, &schema, 5).unwrap();
    assert_eq!(records.len(), samples.len());
    for r in &records {
        assert_eq!(r.predicate, toy_predicate(&r.subject_states, &schema).unwrap());
    }
    assert_eq!(records, generate_relationships(&samples, &schema, 5).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rel.tsv");
    write_relationships(&path, &records).unwrap();
    assert_eq!(read_relationships(&path).unwrap(), records);

    let model = train_predicate_model(&records, 4, &RelateConfig::default()).unwrap();
    let mpath = dir.path().join("model.txt");
    std::fs::write(&mpath, model.to_text()).unwrap();
    assert_eq!(LinearPredicateModel::parse(&model.to_text(), &mpath).unwrap(), model);
}

#[test]
fn malformed_files_report_their_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rel.tsv");
    std::fs::write(&path, "a\twidget\twidget\t01\t10\t1\nb\twidget\twidget\t0x\t10\t1\n").unwrap();
    match read_relationships(&path) {
        Err(Error::Parse { location, .. }) => assert_eq!(location, "2"),
        other => panic!("{other:?}"),
    }
    let priors = dir.path().join("priors.tsv");
    std::fs::write(&priors, "a\t0\t0.5\na\t1\tnan\n").unwrap();
    assert!(matches!(read_priors(&priors), Err(Error::Parse { .. })));
    std::fs::write(&priors, "a\t0\t0.5\n").unwrap();
    assert_eq!(read_priors(&priors).unwrap().0[&("a".to_string(), 0)], 0.5);
    assert!(matches!(read_relationships(&dir.path().join("none")), Err(Error::MissingFile(_))));
}
