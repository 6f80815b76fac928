//! Text encoding of a trained committee.
//!
//! ```text
//! # quickstep committee v1
//! group	ontology
//! k	1
//! rounds	10	3
//! seed	42
//! example	<doc_id>	<topic_id>        (one per training example, in order)
//! member	<vote weight>	<w_1> <w_2> ... <w_m>
//! ```
//!
//! Instance weights are written with 12 significant digits; training already
//! rounds them to that precision, so a reload classifies bit-identically.

use std::fmt::Write as _;
use std::sync::Arc;

use super::boost::BoostedCommittee;
use super::knn::KnnModel;
use super::{ClassifierError, TrainingSet};
use crate::error::{field, FieldError, ParseError};
use crate::ids::{DocId, Group, TopicId};

const HEADER: &str = "# quickstep committee v1";

#[derive(Clone, Debug, PartialEq)]
pub struct MemberRecord {
    pub vote_weight: f64,
    pub instance_weights: Vec<f64>,
}

/// A committee detached from its training vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct CommitteeRecord {
    pub group: Group,
    pub k: usize,
    pub rounds_requested: usize,
    pub rounds_completed: usize,
    pub seed: u64,
    pub examples: Vec<(DocId, TopicId)>,
    pub members: Vec<MemberRecord>,
}

fn number<T: std::str::FromStr>(s: &str) -> Result<T, FieldError> {
    s.parse().map_err(|_| FieldError::BadNumber(s.to_owned()))
}

fn weight(s: &str) -> Result<f64, FieldError> {
    let w: f64 = number(s)?;
    if w.is_finite() && w >= 0.0 {
        Ok(w)
    } else {
        Err(FieldError::BadNumber(s.to_owned()))
    }
}

impl CommitteeRecord {
    pub fn from_committee(c: &BoostedCommittee) -> Self {
        Self {
            group: c.group,
            k: c.k,
            rounds_requested: c.rounds_requested,
            rounds_completed: c.rounds_completed,
            seed: c.seed,
            examples: c
                .examples
                .iter()
                .map(|e| (e.doc_id.clone(), e.topic.clone()))
                .collect(),
            members: c
                .members
                .iter()
                .map(|(m, v)| MemberRecord {
                    vote_weight: *v,
                    instance_weights: m.instance_weights().to_vec(),
                })
                .collect(),
        }
    }

    pub fn encode(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER}");
        let _ = writeln!(out, "group\t{}", self.group);
        let _ = writeln!(out, "k\t{}", self.k);
        let _ = writeln!(out, "rounds\t{}\t{}", self.rounds_requested, self.rounds_completed);
        let _ = writeln!(out, "seed\t{}", self.seed);
        for (doc, topic) in &self.examples {
            let _ = writeln!(out, "example\t{doc}\t{topic}");
        }
        for m in &self.members {
            let _ = write!(out, "member\t{}\t", m.vote_weight);
            for (i, w) in m.instance_weights.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{w:.11e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, HEADER)) => {}
            _ => return Err(ParseError::new(1, "missing committee header")),
        }
        let mut header = |key: &str| -> Result<(usize, String), ParseError> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| ParseError::new(0, format!("missing `{key}` line")))?;
            match line.split_once('\t') {
                Some((k, rest)) if k == key => Ok((no, rest.to_owned())),
                _ => Err(ParseError::new(no, format!("expected `{key}` line"))),
            }
        };
        let (no, g) = header("group")?;
        let group = field(no, "group", g.parse())?;
        let (no, k) = header("k")?;
        let k: usize = field(no, "k", number(&k))?;
        if k == 0 {
            return Err(ParseError::new(no, "k must be at least 1"));
        }
        let (no, rounds) = header("rounds")?;
        let (req, done) = rounds
            .split_once('\t')
            .ok_or_else(|| ParseError::new(no, "rounds needs requested and completed"))?;
        let rounds_requested = field(no, "rounds", number(req))?;
        let rounds_completed = field(no, "rounds", number(done))?;
        let (no, seed) = header("seed")?;
        let seed = field(no, "seed", number(&seed))?;

        let mut examples = Vec::new();
        let mut members = Vec::new();
        for (no, line) in lines {
            let (kind, rest) = line
                .split_once('\t')
                .ok_or_else(|| ParseError::new(no, "expected a tab-separated record"))?;
            match kind {
                "example" if members.is_empty() => {
                    let (doc, topic) = rest
                        .split_once('\t')
                        .ok_or_else(|| ParseError::new(no, "example needs doc id and topic"))?;
                    examples.push((
                        field(no, "doc_id", doc.parse())?,
                        field(no, "topic", topic.parse())?,
                    ));
                }
                "member" => {
                    let (vote, weights) = rest
                        .split_once('\t')
                        .ok_or_else(|| ParseError::new(no, "member needs vote and weights"))?;
                    let vote_weight = field(no, "vote weight", weight(vote))?;
                    let instance_weights = weights
                        .split(' ')
                        .map(|w| field(no, "instance weight", weight(w)))
                        .collect::<Result<Vec<_>, _>>()?;
                    if instance_weights.len() != examples.len() {
                        return Err(ParseError::new(
                            no,
                            format!(
                                "{} instance weights for {} examples",
                                instance_weights.len(),
                                examples.len()
                            ),
                        ));
                    }
                    members.push(MemberRecord {
                        vote_weight,
                        instance_weights,
                    });
                }
                other => return Err(ParseError::new(no, format!("unexpected record `{other}`"))),
            }
        }
        if examples.is_empty() || members.is_empty() {
            return Err(ParseError::new(0, "committee has no examples or no members"));
        }
        Ok(Self {
            group,
            k,
            rounds_requested,
            rounds_completed,
            seed,
            examples,
            members,
        })
    }

    /// Reattaches the committee to the training set it was trained on. The
    /// set is append-only, so the committee's examples must be a prefix of it.
    pub fn bind(&self, set: &TrainingSet) -> Result<BoostedCommittee, ClassifierError> {
        if set.group != self.group {
            return Err(ClassifierError::Mismatch(format!(
                "committee for {} bound to {} training set",
                self.group, set.group
            )));
        }
        let m = self.examples.len();
        if set.len() < m {
            return Err(ClassifierError::Mismatch(format!(
                "committee references {m} examples, set has {}",
                set.len()
            )));
        }
        for (i, ((doc, topic), e)) in self.examples.iter().zip(set.examples()).enumerate() {
            if *doc != e.doc_id || *topic != e.topic {
                return Err(ClassifierError::Mismatch(format!(
                    "example {i} is {}/{} in the set but {doc}/{topic} in the committee",
                    e.doc_id, e.topic
                )));
            }
        }
        let examples = if set.len() == m {
            set.shared()
        } else {
            Arc::new(set.examples()[..m].to_vec())
        };
        let members = self
            .members
            .iter()
            .map(|r| {
                KnnModel::with_weights(Arc::clone(&examples), self.k, r.instance_weights.clone())
                    .map(|model| (model, r.vote_weight))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BoostedCommittee {
            group: self.group,
            examples,
            k: self.k,
            members,
            rounds_requested: self.rounds_requested,
            rounds_completed: self.rounds_completed,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{train_boost, ExampleSource, TrainingExample};
    use crate::textpipe::TermVector;
    use chrono::NaiveDate;

    fn noisy_set() -> TrainingSet {
        let mut v = Vec::new();
        for i in 0..20 {
            let id = DocId::new(format!("d{i}")).unwrap();
            // every fifth label is flipped
            let topic = if (i % 2 == 0) ^ (i % 5 == 0) { "a" } else { "b" };
            let base = if i % 2 == 0 { "x" } else { "y" };
            v.push(TrainingExample {
                doc_id: id.clone(),
                topic: TopicId::new(topic).unwrap(),
                source: ExampleSource::Bootstrap,
                added_at: NaiveDate::from_ymd_opt(2001, 1, 1).unwrap(),
                vector: TermVector::from_weights(
                    id,
                    [
                        (base.to_string(), 1.0),
                        (format!("t{}", i % 7), 0.3),
                        (format!("u{}", i % 3), 0.2),
                    ],
                ),
            });
        }
        TrainingSet::from_examples(Group::Ontology, v)
    }

    #[test]
    fn round_trip_preserves_classification() {
        let set = noisy_set();
        let c = train_boost(&set, 10, 3, 9).unwrap();
        let text = CommitteeRecord::from_committee(&c).encode();
        let rec = CommitteeRecord::parse(&text).unwrap();
        assert_eq!(rec.encode(), text);
        let back = rec.bind(&set).unwrap();
        for e in set.examples() {
            assert_eq!(back.classify(&e.vector), c.classify(&e.vector));
        }
        for (a, b) in back.members().iter().zip(c.members()) {
            assert_eq!(a.0.instance_weights(), b.0.instance_weights());
            assert_eq!(a.1.to_bits(), b.1.to_bits());
        }
    }

    #[test]
    fn bind_checks_examples() {
        let set = noisy_set();
        let rec = CommitteeRecord::from_committee(&train_boost(&set, 2, 1, 0).unwrap());
        assert!(rec.bind(&set.subset(&[1, 0])).is_err());
        let other = TrainingSet::from_examples(Group::Flat, set.examples().to_vec());
        assert!(rec.bind(&other).is_err());
    }

    #[test]
    fn rejects_garbage() {
        assert!(CommitteeRecord::parse("").is_err());
        assert!(CommitteeRecord::parse("# quickstep committee v1\ngroup\tflat\n").is_err());
        let text = "# quickstep committee v1\ngroup\tflat\nk\t1\nrounds\t1\t1\nseed\t0\n\
                    example\td\ta\nmember\t1\t0.5 0.5\n";
        assert!(CommitteeRecord::parse(text).is_err());
    }
}
