mod oracle;

use std::collections::BTreeSet;

use adsage_core::eval::{aggregate_user_days, per_scenario_report, recall_at_budget, recall_curve, Aggregation, ScoredEvent};
use adsage_core::event::time::encode_time;
use adsage_core::event::{Event, Label, Vocabulary};
use adsage_core::model::{Encoder, EventLayout};
use adsage_core::negsample::{interleave, sample_negative, ObservedEdgeMap, SamplerConfig};
use adsage_core::nn::loss::binary_cross_entropy;
use adsage_core::nn::{loss_and_grad, Embedding, FfnnParams, LossKind, OptimizerState, Parameterized, Target};
use adsage_core::rules::{RuleKind, RuleModel};
use adsage_core::seq2one::quantile_normalize;
use adsage_core::synthgen::{generate, user_name, AnomalyKind, PlannedAnomaly, SynthConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const FIELD_SPACES: [usize; 3] = [1, 1, 2];

fn layout() -> EventLayout {
    EventLayout {
        space_dims: vec![2, 3, 2],
        space_sizes: vec![5, 8, 8],
        source_space: 0,
        destination_spaces: FIELD_SPACES.to_vec(),
        numerics: 1,
        categorical_sizes: vec![3],
        texts: 0,
        text_dim: 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn time_pairs_lie_on_the_unit_circle(ts in -4_000_000_000i64..4_000_000_000) {
        let t = encode_time(ts);
        prop_assert!((t[0] * t[0] + t[1] * t[1] - 1.0).abs() < 1e-12);
        prop_assert!((t[2] * t[2] + t[3] * t[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn encoding_length_is_constant(seed: u64) {
        let mut r = rng(seed);
        let enc = Encoder::new(layout(), &mut r);
        for _ in 0..10 {
            let ev = oracle::random_event(&mut r, &FIELD_SPACES, 4, 7);
            prop_assert_eq!(enc.encode(&ev).unwrap().len(), layout().len());
        }
    }

    #[test]
    fn bag_of_one_is_a_lookup(seed: u64, index in 0u32..10) {
        let e = Embedding::new(10, 4, &mut rng(seed));
        prop_assert_eq!(e.bag(&[index]), e.lookup(index).to_vec());
    }

    #[test]
    fn vocabulary_depends_only_on_the_name_set(names in prop::collection::vec("[a-e]{1,3}", 1..20), seed: u64) {
        let mut shuffled = names.clone();
        shuffled.extend(names.iter().take(3).cloned());
        let mut r = rng(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, r.random_range(0..=i));
        }
        let distinct: BTreeSet<&str> = names.iter().map(String::as_str).collect();
        let a = Vocabulary::build(names.iter().map(String::as_str));
        let b = Vocabulary::build(shuffled.iter().map(String::as_str));
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.len(), distinct.len() + 1);
        for (i, n) in distinct.iter().enumerate() {
            prop_assert_eq!(a.index_of(n), i as u32 + 1);
        }
    }

    #[test]
    fn classifier_output_is_a_probability(seed: u64, input in prop::collection::vec(-2.0f64..2.0, 6), scale in 1.0f64..30.0) {
        let mut r = rng(seed);
        let mut f = FfnnParams::new(6, &[5, 3], 0.2, &mut r).unwrap();
        f.visit_params(&mut |p| p.value.data_mut().iter_mut().for_each(|v| *v += r.random_range(-0.5..0.5)));
        let p = f.predict(&input).unwrap();
        prop_assert!(p > 0.0 && p < 1.0, "{}", p);
        // Far from the origin the sigmoid saturates in f64 but never leaves [0, 1].
        let wide: Vec<f64> = input.iter().map(|v| v * scale * 100.0).collect();
        let q = f.predict(&wide).unwrap();
        prop_assert!(q.is_finite() && (0.0..=1.0).contains(&q), "{}", q);
    }

    #[test]
    fn losses_stay_finite(p in prop::collection::vec(-1e3f64..1e3, 1..6), seed: u64) {
        let mut r = rng(seed);
        let t: Vec<f64> = p.iter().map(|_| r.random_range(-1e3..1e3)).collect();
        for (kind, target) in [
            (LossKind::Mse, Target::Values(&t)),
            (LossKind::Cosine, Target::Values(&t)),
            (LossKind::CrossEntropy, Target::Class(r.random_range(0..p.len()))),
        ] {
            if let Ok((l, g)) = loss_and_grad(kind, &p, target) {
                prop_assert!(l.is_finite() && g.iter().all(|v| v.is_finite()), "{:?}", kind);
            }
        }
        let (l, g) = binary_cross_entropy(p[0] * 10.0, (seed % 2) as f64);
        prop_assert!(l.is_finite() && g.is_finite());
    }

    #[test]
    fn learning_rate_never_increases(losses in prop::collection::vec(0.0f64..5.0, 1..40)) {
        let mut opt = OptimizerState::new(0.01);
        let mut last = opt.learning_rate;
        for l in losses {
            opt.end_epoch(l);
            prop_assert!(opt.learning_rate <= last);
            last = opt.learning_rate;
        }
    }

    #[test]
    fn negatives_avoid_observed_edges(seed: u64) {
        let mut r = rng(seed);
        let train: Vec<Event> = (0..30).map(|_| oracle::random_event(&mut r, &FIELD_SPACES, 4, 7)).collect();
        let map = ObservedEdgeMap::build(&train, &FIELD_SPACES);
        for ev in &train {
            let Some(neg) = sample_negative(ev, &map, &mut r) else { continue };
            let changed: Vec<(usize, usize)> = (0..ev.destinations.len())
                .flat_map(|f| (0..ev.destinations[f].len()).map(move |p| (f, p)))
                .filter(|&(f, p)| ev.destinations[f][p] != neg.destinations[f][p])
                .collect();
            // The replacement is unobserved, so it differs from the original.
            prop_assert_eq!(changed.len(), 1);
            let (f, p) = changed[0];
            let d = neg.destinations[f][p];
            let observed_by_scan = train.iter().any(|t| {
                t.source == ev.source
                    && t.destinations.iter().zip(FIELD_SPACES).any(|(ds, s)| s == FIELD_SPACES[f] && ds.contains(&d))
            });
            prop_assert!(!observed_by_scan);
            prop_assert!(d != 0);
            let mut restored = neg.clone();
            restored.destinations[f][p] = ev.destinations[f][p];
            prop_assert_eq!(&restored, ev);
        }
    }

    #[test]
    fn negative_sampling_is_seeded(seed: u64) {
        let mut r = rng(seed);
        let train: Vec<Event> = (0..20).map(|_| oracle::random_event(&mut r, &FIELD_SPACES, 3, 6)).collect();
        let map = ObservedEdgeMap::build(&train, &FIELD_SPACES);
        let cfg = SamplerConfig { negatives_per_positive: 1.5, seed };
        let a = interleave(&train, &cfg, &map, &mut rng(seed)).unwrap();
        let b = interleave(&train, &cfg, &map, &mut rng(seed)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn rules_match_a_full_scan(seed: u64, subset in prop::bool::ANY) {
        let mut r = rng(seed);
        let train: Vec<Event> = (0..25).map(|_| oracle::random_event(&mut r, &FIELD_SPACES, 4, 6)).collect();
        let test: Vec<Event> = (0..25).map(|_| oracle::random_event(&mut r, &FIELD_SPACES, 5, 7)).collect();
        let fields: Vec<usize> = if subset { vec![0, 1] } else { vec![0, 1, 2] };
        for kind in RuleKind::ALL {
            let m = RuleModel::fit(&train, kind, &FIELD_SPACES, Some(&fields)).unwrap();
            for ev in &test {
                prop_assert_eq!(m.score(ev), oracle::rule_oracle(kind, &train, &fields, &FIELD_SPACES, ev), "{:?}", kind);
            }
        }
    }

    #[test]
    fn recall_matches_brute_force(seed: u64, k in 0usize..25, step in 1usize..5) {
        let table = oracle::random_table(&mut rng(seed), 6, 20);
        let expect = oracle::recall_oracle(&table, k, &|r| r.malicious);
        prop_assert_eq!(recall_at_budget(&table, k).ok(), expect);
        let k_max = k.max(1);
        match (recall_curve(&table, k_max, step), oracle::curve_oracle(&table, k_max, step, &|r| r.malicious)) {
            (Ok(c), Some((grid, rs, crs))) => {
                prop_assert_eq!(&c.budgets, &grid);
                prop_assert_eq!(&c.recall, &rs);
                prop_assert_eq!(&c.cumulative, &crs);
            }
            (Err(_), None) => {}
            (c, o) => prop_assert!(false, "{:?} vs {:?}", c, o),
        }
    }

    #[test]
    fn scenario_curves_match_brute_force(seed: u64) {
        let table = oracle::random_table(&mut rng(seed), 6, 20);
        let expected = vec!["s1".to_string(), "s3".to_string()];
        for rep in per_scenario_report(&table, &expected, 20, 1).unwrap() {
            let tag = rep.scenario.clone();
            let o = oracle::curve_oracle(&table, 20, 1, &|r| r.scenarios.contains(&tag));
            match (rep.curve, o) {
                (Some(c), Some((_, rs, crs))) => {
                    prop_assert_eq!(c.recall, rs);
                    prop_assert_eq!(c.cumulative, crs);
                }
                (None, None) => {}
                (c, o) => prop_assert!(false, "{}: {:?} vs {:?}", rep.scenario, c, o),
            }
        }
    }

    #[test]
    fn final_cr_is_mean_recall(seed: u64, k_max in 1usize..30, step in 1usize..7) {
        let table = oracle::random_table(&mut rng(seed), 6, 20);
        if let Ok(c) = recall_curve(&table, k_max, step) {
            let mean = c.recall.iter().sum::<f64>() / c.n() as f64;
            prop_assert!((c.final_cr() - mean).abs() < 1e-12);
            prop_assert!(c.recall.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(c.recall.iter().all(|r| (0.0..=1.0).contains(r)));
        }
    }

    #[test]
    fn row_order_does_not_matter(seed: u64) {
        let table = oracle::random_table(&mut rng(seed), 6, 20);
        let mut shuffled = table.clone();
        let mut r = rng(seed ^ 0x5eed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, r.random_range(0..=i));
        }
        for k in 0..=20 {
            prop_assert_eq!(recall_at_budget(&table, k).ok(), recall_at_budget(&shuffled, k).ok());
        }
    }

    #[test]
    fn full_budget_finds_every_scored_user(seed: u64) {
        let mut table = oracle::random_table(&mut rng(seed), 6, 20);
        for row in &mut table {
            row.score.get_or_insert(0.0);
        }
        if let Ok(r) = recall_at_budget(&table, 20) {
            prop_assert_eq!(r, 1.0);
        }
    }

    #[test]
    fn aggregation_matches_definition(scores in prop::collection::vec(0.0f64..1.0, 1..12)) {
        let scored: Vec<ScoredEvent> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| ScoredEvent { key: i as u64, user: "A".into(), timestamp: 1000 + i as i64, score: s, label: Label::Normal })
            .collect();
        let max = aggregate_user_days(&scored, Aggregation::Max);
        prop_assert_eq!(max.len(), 1);
        prop_assert_eq!(max[0].score, Some(scores.iter().copied().fold(f64::MIN, f64::max)));
        let mean = aggregate_user_days(&scored, Aggregation::Mean)[0].score.unwrap();
        prop_assert!((mean - scores.iter().sum::<f64>() / scores.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn quantiles_are_monotone(mut reference in prop::collection::vec(0.0f64..1.0, 1..50), a in -0.5f64..1.5, b in -0.5f64..1.5) {
        reference.sort_by(f64::total_cmp);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (ql, qh) = (quantile_normalize(lo, &reference).unwrap(), quantile_normalize(hi, &reference).unwrap());
        prop_assert!(ql <= qh);
        let share = reference.iter().filter(|&&v| v <= hi).count() as f64 / reference.len() as f64;
        prop_assert_eq!(qh, share);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generator_labels_agree_and_unseen_edges_are_new(seed: u64, user in 0usize..6, day in 0usize..4, kind in 0usize..3, events in 1usize..4) {
        let kind = [AnomalyKind::UnseenDestination, AnomalyKind::OffHours, AnomalyKind::Burst][kind];
        let cfg = SynthConfig {
            users: 6,
            destinations: 8,
            train_days: 8,
            test_days: 4,
            anomalies: vec![PlannedAnomaly { user, day, kind, events, scenario: "tag".into() }],
            seed,
            ..SynthConfig::default()
        };
        let out = generate(&cfg).unwrap();
        let bad: Vec<_> = out.test.iter().filter(|e| e.label.is_malicious()).collect();
        prop_assert_eq!(bad.len(), events);
        prop_assert!(out.train.iter().all(|e| !e.label.is_malicious()));
        let from_events: BTreeSet<(String, i64)> = bad.iter().map(|e| (e.user.clone(), e.day())).collect();
        let from_file: BTreeSet<(String, i64)> = out.labels.iter().map(|l| (l.user.clone(), l.day)).collect();
        prop_assert_eq!(from_events, from_file);
        if kind == AnomalyKind::UnseenDestination {
            for e in &bad {
                let d = &e.destinations[0][0];
                prop_assert!(!out.train.iter().any(|t| t.user == user_name(user) && t.destinations[0].contains(d)));
            }
        }
        prop_assert!(out.train.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }
}
