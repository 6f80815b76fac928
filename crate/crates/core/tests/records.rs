//! Every record type survives to_line -> parse_line unchanged, and the
//! taxonomy, committee and metrics files survive their own round trips.

use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use proptest::prelude::*;

use quickstep::classifier::{ExampleSource, TrainingRecord};
use quickstep::evalkit::{Metric, MetricReport, MetricSeries};
use quickstep::ids::{DocId, Group, TopicId, UserId};
use quickstep::profiler::{EventKind, FeedbackEvent};
use quickstep::recommender::{ClassifiedPaper, RecommendationRecord};
use quickstep::store::{
    parse_records, BrowseRecord, DocumentRecord, JobRecord, Phase, Record, ServedRecord,
    TopicRecord, UserAccount,
};

fn ts() -> impl Strategy<Value = DateTime<Utc>> {
    (0i64..1_000_000_000).prop_map(|s| Utc.timestamp_opt(946_684_800 + s, 0).unwrap())
}

fn date() -> impl Strategy<Value = NaiveDate> {
    (0u64..20_000).prop_map(|d| NaiveDate::from_ymd_opt(1990, 1, 1).unwrap() + chrono::Days::new(d))
}

fn name() -> impl Strategy<Value = String> {
    "[a-z0-9][a-z0-9_.-]{0,15}"
}

fn user() -> impl Strategy<Value = UserId> {
    name().prop_map(|s| UserId::new(s).unwrap())
}

fn topic() -> impl Strategy<Value = TopicId> {
    name().prop_map(|s| TopicId::new(s).unwrap())
}

fn doc() -> impl Strategy<Value = DocId> {
    "[a-z0-9][a-z0-9_-]{0,15}".prop_map(|s| DocId::new(s).unwrap())
}

fn group() -> impl Strategy<Value = Group> {
    prop_oneof![Just(Group::Flat), Just(Group::Ontology)]
}

fn kind() -> impl Strategy<Value = EventKind> {
    proptest::sample::select(EventKind::ALL.to_vec())
}

fn unit() -> impl Strategy<Value = f64> {
    (0u32..=1_000_000).prop_map(|n| f64::from(n) / 1_000_000.0)
}

fn round_trips<R: Record + std::fmt::Debug>(record: &R) -> Result<(), TestCaseError> {
    let line = record.to_line();
    prop_assert!(!line.contains('\n'));
    let back = R::parse_line(&line, 1).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(&back, record);
    let text = format!("{line}\n{line}\n");
    let many: Vec<R> = parse_records(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(many.len(), 2);
    Ok(())
}

proptest! {
    #[test]
    fn feedback_events(at in ts(), user in user(), kind in kind(), topic in topic(),
                       paper in proptest::option::of(doc()), group in group()) {
        round_trips(&FeedbackEvent { at, user, kind, topic, paper, group })?;
    }

    #[test]
    fn training_records(doc_id in doc(), topic in topic(), added_at in date(),
                        source in proptest::sample::select(vec![ExampleSource::Bootstrap, ExampleSource::UserAdded, ExampleSource::Correction])) {
        round_trips(&TrainingRecord { doc_id, topic, source, added_at })?;
    }

    #[test]
    fn classified_papers(doc_id in doc(), group in group(), topic in proptest::option::of(topic()),
                         confidence in unit(), at in date()) {
        let paper = match topic {
            Some(t) => ClassifiedPaper::classified(doc_id, group, t, confidence, at),
            None => ClassifiedPaper::unclassified(doc_id, group, at),
        };
        round_trips(&paper)?;
    }

    #[test]
    fn recommendation_records(doc_id in doc(), group in group(), topic in topic(), confidence in unit(),
                              date in date(), user in user(), rank in 1usize..100, score in -1e6f64..1e6) {
        round_trips(&RecommendationRecord { doc_id, group, topic, confidence, date, user, rank, score })?;
    }

    #[test]
    fn store_records(user in user(), group in group(), at in ts(), day in date(), doc_id in doc(),
                     topic in topic(), parent in topic(), label in "[A-Za-z][A-Za-z0-9 ,()'-]{0,30}[a-z]",
                     path in "[a-z0-9/._-]{1,30}", nightly in any::<bool>()) {
        round_trips(&UserAccount { user: user.clone(), group, created_at: at })?;
        round_trips(&DocumentRecord { doc_id: doc_id.clone(), url: format!("http://h.example/{path}"), fetched_at: day })?;
        round_trips(&BrowseRecord { at, user: user.clone(), doc_id })?;
        round_trips(&ServedRecord { at, user, set_date: day })?;
        let phase = if nightly { Phase::Nightly } else { Phase::Daily };
        round_trips(&JobRecord { as_of: day, phase, finished_at: at })?;
        round_trips(&TopicRecord { at, group, topic, label, parent })?;
    }

    #[test]
    fn metric_reports(values in proptest::collection::vec(unit(), 0..40)) {
        let start = NaiveDate::from_ymd_opt(2002, 1, 1).unwrap();
        let mut series = Vec::new();
        for g in Group::ALL {
            for m in Metric::ALL {
                let points = values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (start + chrono::Days::new(i as u64 * 2), *v))
                    .collect();
                series.push(MetricSeries { group: g, metric: m, points });
            }
        }
        let report = MetricReport { series };
        let back = MetricReport::parse_tsv(&report.to_tsv()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(back, report);
    }
}

#[test]
fn malformed_lines_are_rejected() {
    for line in ["", "a\tb", "2002-01-01T00:00:00Z\tu\tnot_a_kind\tt\t-\tflat"] {
        assert!(FeedbackEvent::parse_line(line, 1).is_err(), "{line:?}");
    }
    assert!(ClassifiedPaper::parse_line("d\tflat\tt\t1.5\t2002-01-01", 1).is_err());
    assert!(UserAccount::parse_line("u\tneither\t2002-01-01T00:00:00Z", 1).is_err());
}

#[test]
fn browse_logs_parse() {
    use quickstep::service::parse_browse_log;
    let text = "# proxy export\n2002-01-07T09:00:00Z\tann\thttp://a.example/x.pdf\n\n2002-01-07T09:05:00Z\tbob\thttp://a.example/y.html\n";
    let entries = parse_browse_log(text).unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[1].user, UserId::new("bob").unwrap());
    assert_eq!(entries[0].at, Utc.with_ymd_and_hms(2002, 1, 7, 9, 0, 0).unwrap());
    for bad in ["2002-01-07T09:00:00Z\tann", "2002-01-07 09:00\tann\thttp://a/x.pdf", "2002-01-07T09:00:00Z\tann\thttp://a/x y.pdf"] {
        assert_eq!(parse_browse_log(bad).unwrap_err().line, 1, "{bad:?}");
    }
}
