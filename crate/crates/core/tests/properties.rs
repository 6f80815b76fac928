use std::collections::{BTreeMap, HashSet};

use chrono::{NaiveDate, TimeZone, Utc};
use proptest::prelude::*;

use quickstep::classifier::{train_boost, train_boost_traced, CommitteeRecord, ExampleSource, TrainingExample, TrainingSet};
use quickstep::evalkit::{evaluate, Metric, MetricAccumulator};
use quickstep::ids::{DocId, Group, TopicId, UserId};
use quickstep::profiler::{compute_profile, top_topics, EventKind, FeedbackEvent, InterestProfile, ProfileConfig};
use quickstep::recommender::{daily_recommend, ClassifiedPaper};
use quickstep::taxonomy::{Taxonomy, TaxonomyMode, SAMPLE_HIERARCHY};
use quickstep::textpipe::{cosine, stem_counts, tokenize, vectorize, Stoplist, TermVector, MIN_TERM_COUNT};

fn doc(s: &str) -> DocId {
    DocId::new(s).unwrap()
}

fn topic(s: &str) -> TopicId {
    TopicId::new(s).unwrap()
}

fn day(n: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2002, 1, 1).unwrap() + chrono::Days::new(n)
}

fn sample() -> Taxonomy {
    Taxonomy::parse(SAMPLE_HIERARCHY, TaxonomyMode::Hierarchical).unwrap()
}

fn text() -> impl Strategy<Value = String> {
    let word = prop_oneof![
        "[a-z]{1,9}",
        "[A-Z][a-z]{1,8}",
        "[0-9]{1,4}",
        Just("the".to_owned()),
        Just("of".to_owned()),
        Just("café".to_owned()),
    ];
    let sep = prop_oneof![Just(" "), Just(", "), Just(".\n"), Just("-"), Just("/"), Just("  ")];
    proptest::collection::vec((word, sep), 0..120)
        .prop_map(|parts| parts.into_iter().map(|(w, s)| format!("{w}{s}")).collect())
}

fn sparse_vector(id: &'static str) -> impl Strategy<Value = TermVector> {
    proptest::collection::btree_map("t[0-9]{1,2}", 1u32..100, 0..12).prop_map(move |m| {
        TermVector::from_weights(doc(id), m.into_iter().map(|(t, w)| (t, f64::from(w) / 100.0)))
    })
}

// ---------------------------------------------------------------------------
// Text pipeline.

proptest! {
    #[test]
    fn tokenize_is_idempotent(text in text()) {
        let once = tokenize(&text);
        prop_assert_eq!(tokenize(&once.join(" ")), once);
    }

    #[test]
    fn vector_weights_follow_the_counts(text in text()) {
        let stoplist = Stoplist::smart();
        let v = vectorize(doc("d"), &text, &stoplist);
        let (counts, n) = stem_counts(&text, &stoplist);
        let kept: usize = counts.values().filter(|c| **c >= MIN_TERM_COUNT).sum();
        let total: f64 = v.weights().values().sum();
        prop_assert!(v.weights().values().all(|w| *w > 0.0));
        prop_assert!(total <= 1.0);
        if n > 0 {
            prop_assert!((total - kept as f64 / n as f64).abs() <= 1e-12);
        }
        prop_assert_eq!(vectorize(doc("d"), &text, &stoplist), v);
    }

    #[test]
    fn cosine_is_symmetric_and_bounded(a in sparse_vector("a"), b in sparse_vector("b")) {
        let ab = cosine(&a, &b);
        prop_assert_eq!(ab.to_bits(), cosine(&b, &a).to_bits());
        prop_assert!((0.0..=1.0).contains(&ab));
        if !a.is_empty() {
            prop_assert_eq!(cosine(&a, &a), 1.0);
        }
    }
}

// ---------------------------------------------------------------------------
// Taxonomy.

/// A random tree: node i > 0 hangs under a node with a smaller index.
fn tree_text() -> impl Strategy<Value = String> {
    proptest::collection::vec(any::<prop::sample::Index>(), 1..40).prop_map(|parents| {
        let mut out = String::from("top\tTop\t-\n");
        for (i, p) in parents.iter().enumerate() {
            let parent = match p.index(i + 1) {
                0 => "top".to_owned(),
                j => format!("n{j}"),
            };
            out.push_str(&format!("n{}\tNode {}\t{parent}\n", i + 1, i + 1));
        }
        out
    })
}

proptest! {
    #[test]
    fn ancestors_end_at_the_root(text in tree_text()) {
        let tax = Taxonomy::parse(&text, TaxonomyMode::Hierarchical).unwrap();
        let flat = tax.flattened();
        for t in tax.topics() {
            let up = tax.ancestors(t).unwrap();
            prop_assert!(up.len() < tax.len());
            if tax.is_root(t) {
                prop_assert!(up.is_empty());
            } else {
                prop_assert_eq!(up.last(), Some(tax.root()));
                prop_assert_eq!(flat.ancestors(t).unwrap(), vec![flat.root().clone()]);
            }
        }
    }

    #[test]
    fn add_topic_keeps_existing_nodes(text in tree_text(), label in "[A-Z][a-z]{2,10}", at in any::<prop::sample::Index>()) {
        let tax = Taxonomy::parse(&text, TaxonomyMode::Hierarchical).unwrap();
        let parents: Vec<TopicId> = tax.topics().cloned().collect();
        let parent = &parents[at.index(parents.len())];
        if let Ok((next, id)) = tax.add_topic(&label, Some(parent), true) {
            prop_assert_eq!(&next.nodes()[..tax.len()], tax.nodes());
            prop_assert_eq!(next.len(), tax.len() + 1);
            prop_assert_eq!(next.node(&id).unwrap().parent.as_ref(), Some(parent));
        }
        prop_assert!(tax.add_topic(&label, Some(parent), false).is_err());
    }
}

// ---------------------------------------------------------------------------
// Classifier.

fn training_set() -> impl Strategy<Value = TrainingSet> {
    proptest::collection::vec(
        (
            proptest::collection::btree_map("t[0-9]", 1u32..5, 1..5),
            prop::sample::select(vec!["a", "b", "c"]),
        ),
        2..25,
    )
    .prop_map(|rows| {
        let examples = rows
            .into_iter()
            .enumerate()
            .map(|(i, (terms, t))| TrainingExample {
                doc_id: doc(&format!("e{i}")),
                topic: topic(t),
                source: ExampleSource::Bootstrap,
                added_at: day(0),
                vector: TermVector::from_weights(
                    doc(&format!("e{i}")),
                    terms.into_iter().map(|(k, w)| (k, f64::from(w) / 8.0)),
                ),
            })
            .collect();
        TrainingSet::from_examples(Group::Flat, examples)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boosting_keeps_a_distribution(set in training_set(), k in 1usize..5, rounds in 1usize..8) {
        let (committee, stats) = train_boost_traced(&set, rounds, k, 9).unwrap();
        for s in &stats {
            prop_assert!((s.weight_sum - 1.0).abs() <= 1e-9);
            prop_assert_eq!(s.accepted, s.epsilon < 0.5);
        }
        prop_assert!(!committee.members().is_empty());
        let again = train_boost(&set, rounds, k, 9).unwrap();
        prop_assert_eq!(
            CommitteeRecord::from_committee(&committee).encode(),
            CommitteeRecord::from_committee(&again).encode()
        );
    }

    #[test]
    fn committees_vote_like_their_saved_form(set in training_set(), query in sparse_vector("q"), k in 1usize..5) {
        let committee = train_boost(&set, 5, k, 1).unwrap();
        let text = CommitteeRecord::from_committee(&committee).encode();
        let loaded = CommitteeRecord::parse(&text).unwrap().bind(&set).unwrap();
        let queries = std::iter::once(&query).chain(set.examples().iter().map(|e| &e.vector));
        for q in queries {
            let a = committee.classify(q);
            let b = loaded.classify(q);
            match (&a, &b) {
                (Ok(x), Ok(y)) => {
                    let bits = |r: &Vec<(TopicId, f64)>| r.iter().map(|(t, c)| (t.clone(), c.to_bits())).collect::<Vec<_>>();
                    prop_assert_eq!(bits(x), bits(y));
                    let sum: f64 = x.iter().map(|(_, c)| c).sum();
                    prop_assert!((sum - 1.0).abs() <= 1e-9);
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "{a:?} vs {b:?}"),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Profiles and recommendations.

fn log() -> impl Strategy<Value = Vec<FeedbackEvent>> {
    let topics: Vec<TopicId> = sample().topics().filter(|t| t.as_str() != "top").cloned().collect();
    proptest::collection::vec(
        (
            prop::sample::select(vec!["u", "v"]),
            prop::sample::select(EventKind::ALL.to_vec()),
            prop::sample::select(topics),
            0u64..30,
            0u32..86_400,
        ),
        0..40,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .map(|(u, kind, t, d, s)| FeedbackEvent {
                at: Utc.from_utc_datetime(&day(d).and_hms_opt(0, 0, 0).unwrap()) + chrono::Duration::seconds(i64::from(s)),
                user: UserId::new(u).unwrap(),
                kind,
                topic: t,
                paper: Some(doc("p")),
                group: Group::Ontology,
            })
            .collect()
    })
}

fn papers(group: Group) -> impl Strategy<Value = Vec<ClassifiedPaper>> {
    let topics: Vec<TopicId> = sample().topics().filter(|t| t.as_str() != "top").cloned().collect();
    proptest::collection::vec((prop::sample::select(topics), 1u32..=1000), 0..60).prop_map(move |rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (t, c))| ClassifiedPaper::classified(doc(&format!("p{i}")), group, t, f64::from(c) / 1000.0, day(30)))
            .collect()
    })
}

proptest! {
    #[test]
    fn profiles_are_pure_and_local(events in log(), now in 0u64..40, ontology in any::<bool>()) {
        let tax = if ontology { sample() } else { sample().flattened() };
        let user = UserId::new("u").unwrap();
        let config = ProfileConfig::default();
        let a = compute_profile(&events, &tax, &user, day(now), &config);
        let b = compute_profile(&events, &tax, &user, day(now), &config);
        let bits = |p: &InterestProfile| p.interest.iter().map(|(t, v)| (t.clone(), v.to_bits())).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));

        let mut reachable = HashSet::new();
        for e in events.iter().filter(|e| e.user == user) {
            reachable.insert(e.topic.clone());
            reachable.extend(tax.ancestors(&e.topic).unwrap());
        }
        for t in a.interest.keys() {
            prop_assert!(reachable.contains(t), "{t} has interest but no event reaches it");
        }
        for t in top_topics(&a, 3) {
            prop_assert!(!tax.is_root(&t));
            prop_assert!(a.get(&t) > 0.0);
        }
    }

    #[test]
    fn not_interesting_lowers_interest(events in log(), pick in any::<prop::sample::Index>(), ontology in any::<bool>()) {
        let tax = if ontology { sample() } else { sample().flattened() };
        let user = UserId::new("u").unwrap();
        let config = ProfileConfig::default();
        let topics: Vec<TopicId> = tax.topics().filter(|t| !tax.is_root(t)).cloned().collect();
        let t = topics[pick.index(topics.len())].clone();
        let mut more = events.clone();
        more.push(FeedbackEvent {
            at: Utc.with_ymd_and_hms(2002, 1, 5, 12, 0, 0).unwrap(),
            user: user.clone(),
            kind: EventKind::RatedNotInteresting,
            topic: t.clone(),
            paper: None,
            group: Group::Ontology,
        });
        let before = compute_profile(&events, &tax, &user, day(30), &config);
        let after = compute_profile(&more, &tax, &user, day(30), &config);
        prop_assert!(after.get(&t) < before.get(&t));
    }

    #[test]
    fn recommendations_follow_top_topics(events in log(), papers in papers(Group::Ontology), n in 1usize..15) {
        let tax = sample();
        let user = UserId::new("u").unwrap();
        let profile = compute_profile(&events, &tax, &user, day(30), &ProfileConfig::default());
        let seen: HashSet<DocId> = papers.iter().step_by(5).map(|p| p.doc_id.clone()).collect();
        let set = daily_recommend(&profile, Group::Ontology, &papers, &seen, n, 3);
        let again = daily_recommend(&profile, Group::Ontology, &papers, &seen, n, 3);
        prop_assert_eq!(&set.items, &again.items);
        let top = top_topics(&profile, 3);
        prop_assert!(set.items.len() <= n);
        for (i, item) in set.items.iter().enumerate() {
            prop_assert_eq!(item.rank, i + 1);
            prop_assert!(top.contains(&item.topic));
            prop_assert!(profile.get(&item.topic) > 0.0);
            prop_assert!(!seen.contains(&item.doc_id));
        }
        for w in set.items.windows(2) {
            prop_assert!(w[0].score >= w[1].score);
        }
    }

    #[test]
    fn raising_interest_never_demotes_a_topic(events in log(), papers in papers(Group::Flat), bump in 1u32..50) {
        let tax = sample().flattened();
        let user = UserId::new("u").unwrap();
        let profile = compute_profile(&events, &tax, &user, day(30), &ProfileConfig::default());
        let top = top_topics(&profile, 3);
        prop_assume!(!top.is_empty());
        let raised_topic = top[top.len() - 1].clone();
        let mut raised = profile.clone();
        raised.set(raised_topic.clone(), profile.get(&raised_topic) + f64::from(bump));
        let seen = HashSet::new();
        let before = daily_recommend(&profile, Group::Flat, &papers, &seen, usize::MAX, 3);
        let after = daily_recommend(&raised, Group::Flat, &papers, &seen, usize::MAX, 3);
        let rank = |s: &quickstep::recommender::RecommendationSet| -> BTreeMap<DocId, usize> {
            s.items.iter().map(|i| (i.doc_id.clone(), i.rank)).collect()
        };
        let (rb, ra) = (rank(&before), rank(&after));
        for mine in before.items.iter().filter(|i| i.topic == raised_topic) {
            for other in before.items.iter().filter(|i| i.topic != raised_topic) {
                if rb[&mine.doc_id] < rb[&other.doc_id] {
                    prop_assert!(ra[&mine.doc_id] < ra[&other.doc_id]);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Metrics.

proptest! {
    #[test]
    fn online_and_batch_metrics_agree(events in log(), groups in proptest::collection::vec(any::<bool>(), 40)) {
        let mut events = events;
        for (e, flat) in events.iter_mut().zip(groups) {
            if flat {
                e.group = Group::Flat;
            }
        }
        events.sort_by_key(|e| e.at);
        let mut acc = MetricAccumulator::new();
        for e in &events {
            acc.push(e).unwrap();
        }
        let online = acc.finish();
        let batch = evaluate(&events, day(60));
        prop_assert_eq!(&online, &batch);
        for s in &batch.series {
            prop_assert!(s.points.windows(2).all(|w| w[0].0 < w[1].0));
            // Jumps and corrections are not capped by exposures in a raw log.
            let cap = if s.metric == Metric::GoodTopic { 1.0 } else { f64::INFINITY };
            prop_assert!(s.points.iter().all(|(_, v)| (0.0..=cap).contains(v)));
        }
    }
}
