//! Multi-class topic classification: an instance-weighted k-nearest-neighbour
//! learner boosted with AdaBoost.M1, plus a cross-validation harness.
//!
//! Each group keeps its own append-only [`TrainingSet`]. Committees are
//! immutable once trained and can be shared by any number of readers.

mod boost;
mod cv;
mod knn;
mod persist;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use boost::{train_boost, train_boost_traced, BoostedCommittee, RoundStats, EPSILON_FLOOR};
pub use cv::{cross_validate, stratified_folds, CvReport};
pub use knn::{neighbours, KnnModel, Ranking};
pub use persist::{CommitteeRecord, MemberRecord};

use crate::error::{field, split_fields, FieldError, ParseError};
use crate::ids::{format_date, parse_date, DocId, Group, TopicId};
use crate::taxonomy::Taxonomy;
use crate::textpipe::TermVector;

/// Default neighbour count.
pub const DEFAULT_K: usize = 1;
/// Default number of boosting rounds.
pub const DEFAULT_ROUNDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifierError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("topic {0} is not in the group taxonomy")]
    UnknownTopic(TopicId),
    #[error("the root topic cannot label a training example")]
    RootTopic,
    #[error("query is not similar to any training example")]
    Unclassifiable,
    #[error("neighbour count must be at least 1, got {0}")]
    InvalidK(usize),
    #[error("at least one boosting round is required")]
    InvalidRounds,
    #[error("{folds} folds requested for {examples} examples")]
    TooManyFolds { folds: usize, examples: usize },
    #[error("cross-validation needs at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("committee file: {0}")]
    Decode(#[from] ParseError),
    #[error("committee does not match the training set: {0}")]
    Mismatch(String),
}

/// Where a training example came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleSource {
    Bootstrap,
    UserAdded,
    Correction,
}

impl ExampleSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ExampleSource::Bootstrap => "bootstrap",
            ExampleSource::UserAdded => "user-added",
            ExampleSource::Correction => "correction",
        }
    }
}

impl fmt::Display for ExampleSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExampleSource {
    type Err = FieldError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bootstrap" => Ok(Self::Bootstrap),
            "user-added" => Ok(Self::UserAdded),
            "correction" => Ok(Self::Correction),
            other => Err(FieldError::Unknown {
                what: "example source",
                value: other.to_owned(),
            }),
        }
    }
}

/// One line of `training.<group>.tsv`: `<doc_id>\t<topic_id>\t<source>\t<date>`.
/// The vector is resolved from the document store by id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingRecord {
    pub doc_id: DocId,
    pub topic: TopicId,
    pub source: ExampleSource,
    pub added_at: NaiveDate,
}

impl TrainingRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.doc_id,
            self.topic,
            self.source,
            format_date(&self.added_at)
        )
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, ParseError> {
        let [doc, topic, source, date] = split_fields::<4>(line, line_no)?;
        Ok(Self {
            doc_id: field(line_no, "doc_id", doc.parse())?,
            topic: field(line_no, "topic", topic.parse())?,
            source: field(line_no, "source", source.parse())?,
            added_at: field(line_no, "date", parse_date(date))?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample {
    pub doc_id: DocId,
    pub topic: TopicId,
    pub source: ExampleSource,
    pub added_at: NaiveDate,
    pub vector: TermVector,
}

impl TrainingExample {
    pub fn record(&self) -> TrainingRecord {
        TrainingRecord {
            doc_id: self.doc_id.clone(),
            topic: self.topic.clone(),
            source: self.source,
            added_at: self.added_at,
        }
    }
}

/// A group's append-only pool of labelled examples.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub group: Group,
    examples: Arc<Vec<TrainingExample>>,
}

impl TrainingSet {
    pub fn new(group: Group) -> Self {
        Self {
            group,
            examples: Arc::new(Vec::new()),
        }
    }

    /// Wraps already-validated examples, e.g. ones replayed from disk.
    pub fn from_examples(group: Group, examples: Vec<TrainingExample>) -> Self {
        Self {
            group,
            examples: Arc::new(examples),
        }
    }

    pub fn examples(&self) -> &[TrainingExample] {
        &self.examples
    }

    pub(crate) fn shared(&self) -> Arc<Vec<TrainingExample>> {
        Arc::clone(&self.examples)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Distinct topics with at least one example, sorted.
    pub fn topics(&self) -> Vec<TopicId> {
        let mut topics: Vec<TopicId> = self.examples.iter().map(|e| e.topic.clone()).collect();
        topics.sort();
        topics.dedup();
        topics
    }

    /// Appends an example after checking its topic against the taxonomy.
    /// Duplicates are kept: repeated examples strengthen a topic.
    pub fn add_example(
        &self,
        vector: TermVector,
        topic: TopicId,
        source: ExampleSource,
        added_at: NaiveDate,
        taxonomy: &Taxonomy,
    ) -> Result<Self, ClassifierError> {
        let mut next = self.clone();
        next.push(vector, topic, source, added_at, taxonomy)?;
        Ok(next)
    }

    /// In-place [`TrainingSet::add_example`]. Committees trained on an
    /// earlier snapshot keep seeing that snapshot.
    pub fn push(
        &mut self,
        vector: TermVector,
        topic: TopicId,
        source: ExampleSource,
        added_at: NaiveDate,
        taxonomy: &Taxonomy,
    ) -> Result<(), ClassifierError> {
        if !taxonomy.contains(&topic) {
            return Err(ClassifierError::UnknownTopic(topic));
        }
        if taxonomy.is_root(&topic) {
            return Err(ClassifierError::RootTopic);
        }
        Arc::make_mut(&mut self.examples).push(TrainingExample {
            doc_id: vector.doc_id.clone(),
            topic,
            source,
            added_at,
            vector,
        });
        Ok(())
    }

    /// A new set holding the examples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            group: self.group,
            examples: Arc::new(indices.iter().map(|&i| self.examples[i].clone()).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::TaxonomyMode;

    fn tax() -> Taxonomy {
        Taxonomy::parse("top\tTop\t-\na\tA\ttop\n", TaxonomyMode::Flat).unwrap()
    }

    fn vector(id: &str) -> TermVector {
        TermVector::from_weights(DocId::new(id).unwrap(), [("w".to_string(), 1.0)])
    }

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2001, 5, 1).unwrap()
    }

    #[test]
    fn add_example_checks_topic() {
        let set = TrainingSet::new(Group::Flat);
        let a = TopicId::new("a").unwrap();
        let set = set
            .add_example(vector("d1"), a.clone(), ExampleSource::Bootstrap, date(), &tax())
            .unwrap();
        assert_eq!(set.len(), 1);
        let set2 = set
            .add_example(vector("d1"), a, ExampleSource::Correction, date(), &tax())
            .unwrap();
        assert_eq!(set2.len(), 2, "duplicates are kept");
        assert_eq!(set2.examples()[1].source, ExampleSource::Correction);
        assert_eq!(set.len(), 1, "snapshot unchanged");
        assert!(matches!(
            set.add_example(
                vector("d2"),
                TopicId::new("zz").unwrap(),
                ExampleSource::UserAdded,
                date(),
                &tax()
            ),
            Err(ClassifierError::UnknownTopic(_))
        ));
        assert!(matches!(
            set.add_example(
                vector("d2"),
                TopicId::new("top").unwrap(),
                ExampleSource::UserAdded,
                date(),
                &tax()
            ),
            Err(ClassifierError::RootTopic)
        ));
    }

    #[test]
    fn training_record_line() {
        let line = "paper-1\tmachine-learning\tuser-added\t2001-05-01";
        let rec = TrainingRecord::parse_line(line, 1).unwrap();
        assert_eq!(rec.to_line(), line);
        assert!(TrainingRecord::parse_line("paper-1\tml\tbogus\t2001-05-01", 3).is_err());
        assert!(TrainingRecord::parse_line("paper-1\tml\tbootstrap", 3).is_err());
    }
}
