//! Nightly classification of browsed papers and the daily join of interest
//! profiles with classified papers.

use std::collections::HashSet;

use chrono::NaiveDate;

use crate::classifier::BoostedCommittee;
use crate::error::{field, split_fields, FieldError, ParseError};
use crate::ids::{format_date, parse_date, DocId, Group, TopicId, UserId};
use crate::profiler::{top_topics, InterestProfile};
use crate::textpipe::TermVector;

/// Default size of a recommendation set.
pub const DEFAULT_RECOMMENDATIONS: usize = 10;

/// Rounds a confidence to the 6 decimals it is stored with.
pub fn round_confidence(c: f64) -> f64 {
    format!("{c:.6}").parse().unwrap_or(c)
}

fn parse_f64(s: &str) -> Result<f64, FieldError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(FieldError::BadNumber(s.to_owned())),
    }
}

/// The outcome of classifying one paper for one group. `topic` is `None`
/// when the committee could not classify it; such papers are retried.
///
/// Line format: `<doc_id>\t<group>\t<topic_id or ->\t<confidence>\t<date>`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifiedPaper {
    pub doc_id: DocId,
    pub group: Group,
    pub topic: Option<TopicId>,
    pub confidence: f64,
    pub classified_at: NaiveDate,
}

impl ClassifiedPaper {
    pub fn classified(
        doc_id: DocId,
        group: Group,
        topic: TopicId,
        confidence: f64,
        classified_at: NaiveDate,
    ) -> Self {
        Self {
            doc_id,
            group,
            topic: Some(topic),
            confidence: round_confidence(confidence),
            classified_at,
        }
    }

    pub fn unclassified(doc_id: DocId, group: Group, classified_at: NaiveDate) -> Self {
        Self {
            doc_id,
            group,
            topic: None,
            confidence: 0.0,
            classified_at,
        }
    }

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{:.6}\t{}",
            self.doc_id,
            self.group,
            self.topic.as_ref().map_or("-", TopicId::as_str),
            self.confidence,
            format_date(&self.classified_at)
        )
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, ParseError> {
        let [doc, group, topic, conf, date] = split_fields::<5>(line, line_no)?;
        let confidence = field(line_no, "confidence", parse_f64(conf))?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(ParseError::new(line_no, "confidence outside [0, 1]"));
        }
        Ok(Self {
            doc_id: field(line_no, "doc_id", doc.parse())?,
            group: field(line_no, "group", group.parse())?,
            topic: if topic == "-" {
                None
            } else {
                Some(field(line_no, "topic", topic.parse())?)
            },
            confidence: round_confidence(confidence),
            classified_at: field(line_no, "date", parse_date(date))?,
        })
    }
}

/// Classifies each pending vector with each committee for which `wanted`
/// holds. Vectors are computed once by the caller and shared by both groups.
pub fn nightly_classify(
    pending: &[TermVector],
    committees: &[&BoostedCommittee],
    date: NaiveDate,
    wanted: impl Fn(&DocId, Group) -> bool,
) -> Vec<ClassifiedPaper> {
    let mut out = Vec::new();
    for vector in pending {
        for committee in committees {
            let group = committee.group();
            if !wanted(&vector.doc_id, group) {
                continue;
            }
            let record = match committee.classify(vector) {
                Ok(ranking) => {
                    let (topic, confidence) = ranking.into_iter().next().expect("non-empty ranking");
                    ClassifiedPaper::classified(vector.doc_id.clone(), group, topic, confidence, date)
                }
                Err(e) => {
                    tracing::debug!(doc = %vector.doc_id, %group, error = %e, "left unclassified");
                    ClassifiedPaper::unclassified(vector.doc_id.clone(), group, date)
                }
            };
            out.push(record);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recommendation {
    pub doc_id: DocId,
    pub topic: TopicId,
    pub confidence: f64,
    pub score: f64,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecommendationSet {
    pub user: UserId,
    pub group: Group,
    pub date: NaiveDate,
    pub items: Vec<Recommendation>,
}

impl RecommendationSet {
    pub fn records(&self) -> Vec<RecommendationRecord> {
        self.items
            .iter()
            .map(|item| RecommendationRecord {
                doc_id: item.doc_id.clone(),
                group: self.group,
                topic: item.topic.clone(),
                confidence: item.confidence,
                date: self.date,
                user: self.user.clone(),
                rank: item.rank,
                score: item.score,
            })
            .collect()
    }
}

/// One line of `recommendations.log`: the classified-paper fields followed
/// by `<user>\t<rank>\t<score>`.
#[derive(Clone, Debug, PartialEq)]
pub struct RecommendationRecord {
    pub doc_id: DocId,
    pub group: Group,
    pub topic: TopicId,
    pub confidence: f64,
    pub date: NaiveDate,
    pub user: UserId,
    pub rank: usize,
    pub score: f64,
}

impl RecommendationRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{:.6}\t{}\t{}\t{}\t{}",
            self.doc_id,
            self.group,
            self.topic,
            self.confidence,
            format_date(&self.date),
            self.user,
            self.rank,
            self.score
        )
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, ParseError> {
        let [doc, group, topic, conf, date, user, rank, score] = split_fields::<8>(line, line_no)?;
        let rank: usize = field(
            line_no,
            "rank",
            rank.parse().map_err(|_| FieldError::BadNumber(rank.to_owned())),
        )?;
        if rank == 0 {
            return Err(ParseError::new(line_no, "ranks start at 1"));
        }
        Ok(Self {
            doc_id: field(line_no, "doc_id", doc.parse())?,
            group: field(line_no, "group", group.parse())?,
            topic: field(line_no, "topic", topic.parse())?,
            confidence: round_confidence(field(line_no, "confidence", parse_f64(conf))?),
            date: field(line_no, "date", parse_date(date))?,
            user: field(line_no, "user", user.parse())?,
            rank,
            score: field(line_no, "score", parse_f64(score))?,
        })
    }
}

/// Scores papers on the profile's top topics by `interest * confidence` and
/// keeps the best `n`, skipping anything in `seen`.
pub fn daily_recommend(
    profile: &InterestProfile,
    group: Group,
    papers: &[ClassifiedPaper],
    seen: &HashSet<DocId>,
    n: usize,
    topic_count: usize,
) -> RecommendationSet {
    let topics = top_topics(profile, topic_count);
    let mut scored: Vec<(&ClassifiedPaper, &TopicId, f64)> = papers
        .iter()
        .filter(|p| p.group == group && !seen.contains(&p.doc_id))
        .filter_map(|p| {
            let topic = p.topic.as_ref()?;
            topics
                .contains(topic)
                .then(|| (p, topic, profile.get(topic) * p.confidence))
        })
        .collect();
    scored.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then_with(|| b.0.confidence.total_cmp(&a.0.confidence))
            .then_with(|| a.0.doc_id.cmp(&b.0.doc_id))
    });
    let mut used = HashSet::new();
    let items = scored
        .into_iter()
        .filter(|(p, _, _)| used.insert(&p.doc_id))
        .take(n)
        .enumerate()
        .map(|(i, (p, topic, score))| Recommendation {
            doc_id: p.doc_id.clone(),
            topic: topic.clone(),
            confidence: p.confidence,
            score,
            rank: i + 1,
        })
        .collect();
    RecommendationSet {
        user: profile.user.clone(),
        group,
        date: profile.computed_at,
        items,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2002, 3, 1).unwrap()
    }

    fn paper(id: &str, topic: &str, conf: f64) -> ClassifiedPaper {
        ClassifiedPaper::classified(
            DocId::new(id).unwrap(),
            Group::Flat,
            TopicId::new(topic).unwrap(),
            conf,
            date(),
        )
    }

    fn profile(entries: &[(&str, f64)]) -> InterestProfile {
        let mut p = InterestProfile::empty(UserId::new("u").unwrap(), date(), TopicId::new("top").unwrap());
        for (t, v) in entries {
            p.set(TopicId::new(*t).unwrap(), *v);
        }
        p
    }

    #[test]
    fn score_is_interest_times_confidence() {
        let papers = [paper("p1", "a", 0.9), paper("p2", "a", 0.5)];
        let set = daily_recommend(&profile(&[("a", 4.0)]), Group::Flat, &papers, &HashSet::new(), 10, 3);
        let got: Vec<(&str, f64, usize)> = set
            .items
            .iter()
            .map(|r| (r.doc_id.as_str(), r.score, r.rank))
            .collect();
        assert_eq!(got, [("p1", 3.6, 1), ("p2", 2.0, 2)]);
    }

    #[test]
    fn empty_profile_and_seen_papers() {
        let papers = [paper("p1", "a", 0.9), paper("p2", "a", 0.5)];
        assert!(daily_recommend(&profile(&[]), Group::Flat, &papers, &HashSet::new(), 10, 3)
            .items
            .is_empty());
        let seen = HashSet::from([DocId::new("p1").unwrap()]);
        let set = daily_recommend(&profile(&[("a", 1.0)]), Group::Flat, &papers, &seen, 10, 3);
        assert_eq!(set.items.len(), 1);
        assert_eq!(set.items[0].doc_id.as_str(), "p2");
    }

    #[test]
    fn only_top_topics_and_other_groups_excluded() {
        let mut other = paper("p3", "a", 1.0);
        other.group = Group::Ontology;
        let papers = [paper("p1", "a", 0.9), paper("p2", "b", 0.9), other];
        let set = daily_recommend(&profile(&[("a", 2.0), ("b", 1.0)]), Group::Flat, &papers, &HashSet::new(), 10, 1);
        assert_eq!(set.items.len(), 1);
        assert_eq!(set.items[0].doc_id.as_str(), "p1");
    }

    #[test]
    fn record_lines_round_trip() {
        let p = paper("p1", "a", 0.123_456_789);
        assert_eq!(p.to_line(), "p1\tflat\ta\t0.123457\t2002-03-01");
        assert_eq!(ClassifiedPaper::parse_line(&p.to_line(), 1).unwrap(), p);
        let u = ClassifiedPaper::unclassified(DocId::new("p2").unwrap(), Group::Ontology, date());
        assert_eq!(ClassifiedPaper::parse_line(&u.to_line(), 1).unwrap(), u);
        assert!(ClassifiedPaper::parse_line("p1\tflat\ta\t1.5\t2002-03-01", 1).is_err());

        let set = daily_recommend(&profile(&[("a", 4.0 / 3.0)]), Group::Flat, &[p], &HashSet::new(), 10, 3);
        let rec = &set.records()[0];
        assert_eq!(RecommendationRecord::parse_line(&rec.to_line(), 1).unwrap(), *rec);
    }
}
