use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use super::{ClassifierError, TrainingExample};
use crate::ids::TopicId;
use crate::textpipe::{cosine, TermVector};

/// Topics with confidences, sorted by confidence descending then topic id.
pub type Ranking = Vec<(TopicId, f64)>;

/// The `k` most similar examples with positive similarity, as
/// `(example index, similarity)`. Ties in similarity go to the lower index.
pub fn neighbours(
    examples: &[TrainingExample],
    query: &TermVector,
    k: usize,
    exclude: Option<usize>,
) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = examples
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, e)| (i, cosine(query, &e.vector)))
        .filter(|&(_, s)| s > 0.0)
        .collect();
    select_top(&mut scored, k);
    scored
}

pub(crate) fn select_top(scored: &mut Vec<(usize, f64)>, k: usize) {
    let order = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(order);
}

pub(crate) fn rank_desc(a: &(TopicId, f64), b: &(TopicId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Weighted vote over a neighbour list. `None` when no neighbour carries
/// any weight.
pub(crate) fn vote(
    examples: &[TrainingExample],
    found: &[(usize, f64)],
    weights: &[f64],
) -> Option<Ranking> {
    let mut by_topic: BTreeMap<&TopicId, f64> = BTreeMap::new();
    let mut total = 0.0;
    for &(i, sim) in found {
        let v = weights[i] * sim;
        total += v;
        *by_topic.entry(&examples[i].topic).or_insert(0.0) += v;
    }
    if total <= 0.0 {
        return None;
    }
    let mut ranking: Ranking = by_topic
        .into_iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|(t, v)| (t.clone(), v / total))
        .collect();
    ranking.sort_by(rank_desc);
    Some(ranking)
}

/// Instance-weighted k-nearest-neighbour classifier over a training snapshot.
#[derive(Clone, Debug)]
pub struct KnnModel {
    examples: Arc<Vec<TrainingExample>>,
    k: usize,
    instance_weights: Vec<f64>,
}

impl KnnModel {
    /// A model with uniform instance weights.
    pub fn uniform(examples: Arc<Vec<TrainingExample>>, k: usize) -> Result<Self, ClassifierError> {
        let m = examples.len();
        if m == 0 {
            return Err(ClassifierError::EmptyTrainingSet);
        }
        Self::with_weights(examples, k, vec![1.0 / m as f64; m])
    }

    pub fn with_weights(
        examples: Arc<Vec<TrainingExample>>,
        k: usize,
        instance_weights: Vec<f64>,
    ) -> Result<Self, ClassifierError> {
        if k == 0 {
            return Err(ClassifierError::InvalidK(k));
        }
        if examples.is_empty() {
            return Err(ClassifierError::EmptyTrainingSet);
        }
        if instance_weights.len() != examples.len() {
            return Err(ClassifierError::Mismatch(format!(
                "{} weights for {} examples",
                instance_weights.len(),
                examples.len()
            )));
        }
        Ok(Self {
            examples,
            k,
            instance_weights,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn examples(&self) -> &[TrainingExample] {
        &self.examples
    }

    pub fn instance_weights(&self) -> &[f64] {
        &self.instance_weights
    }

    /// Every topic with a nonzero vote among the `k` nearest examples.
    pub fn knn_classify(&self, query: &TermVector) -> Result<Ranking, ClassifierError> {
        let found = neighbours(&self.examples, query, self.k, None);
        self.vote_on(&found).ok_or(ClassifierError::Unclassifiable)
    }

    pub(crate) fn vote_on(&self, found: &[(usize, f64)]) -> Option<Ranking> {
        vote(&self.examples, found, &self.instance_weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::ExampleSource;
    use crate::ids::DocId;
    use chrono::NaiveDate;

    fn vec_of(id: &str, terms: &[(&str, f64)]) -> TermVector {
        TermVector::from_weights(
            DocId::new(id).unwrap(),
            terms.iter().map(|(t, w)| (t.to_string(), *w)),
        )
    }

    fn example(id: &str, topic: &str, terms: &[(&str, f64)]) -> TrainingExample {
        TrainingExample {
            doc_id: DocId::new(id).unwrap(),
            topic: TopicId::new(topic).unwrap(),
            source: ExampleSource::Bootstrap,
            added_at: NaiveDate::from_ymd_opt(2001, 1, 1).unwrap(),
            vector: vec_of(id, terms),
        }
    }

    #[test]
    fn single_example_self_query() {
        let e = example("e", "a", &[("x", 0.5), ("y", 0.25)]);
        let query = e.vector.clone();
        let model = KnnModel::uniform(Arc::new(vec![e]), 1).unwrap();
        let ranking = model.knn_classify(&query).unwrap();
        assert_eq!(ranking, vec![(TopicId::new("a").unwrap(), 1.0)]);
    }

    #[test]
    fn nearest_wins_with_k1() {
        let examples = vec![
            example("ea", "a", &[("x", 1.0), ("y", 0.1)]),
            example("eb", "b", &[("y", 1.0), ("x", 0.1)]),
        ];
        let model = KnnModel::uniform(Arc::new(examples), 1).unwrap();
        let q = vec_of("q", &[("x", 0.9), ("y", 0.3)]);
        let ranking = model.knn_classify(&q).unwrap();
        assert_eq!(ranking, vec![(TopicId::new("a").unwrap(), 1.0)]);
    }

    #[test]
    fn disjoint_query_is_unclassifiable() {
        let model = KnnModel::uniform(Arc::new(vec![example("e", "a", &[("x", 1.0)])]), 3).unwrap();
        assert_eq!(
            model.knn_classify(&vec_of("q", &[("z", 1.0)])),
            Err(ClassifierError::Unclassifiable)
        );
        assert_eq!(
            model.knn_classify(&vec_of("q", &[])),
            Err(ClassifierError::Unclassifiable)
        );
    }

    #[test]
    fn ranking_lists_every_voted_topic() {
        let examples = vec![
            example("e1", "b", &[("x", 1.0)]),
            example("e2", "a", &[("x", 1.0)]),
            example("e3", "c", &[("x", 1.0), ("q", 1.0)]),
        ];
        let model = KnnModel::uniform(Arc::new(examples), 3).unwrap();
        let ranking = model.knn_classify(&vec_of("q", &[("x", 1.0)])).unwrap();
        let topics: Vec<&str> = ranking.iter().map(|(t, _)| t.as_str()).collect();
        // a and b tie on confidence and sort by id; c is less similar
        assert_eq!(topics, ["a", "b", "c"]);
        let total: f64 = ranking.iter().map(|(_, c)| c).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tie_on_similarity_prefers_earlier_example() {
        let examples = vec![
            example("e1", "b", &[("x", 1.0)]),
            example("e2", "a", &[("x", 1.0)]),
        ];
        let found = neighbours(&examples, &vec_of("q", &[("x", 2.0)]), 1, None);
        assert_eq!(found, vec![(0, 1.0)]);
        let found = neighbours(&examples, &vec_of("q", &[("x", 2.0)]), 1, Some(0));
        assert_eq!(found, vec![(1, 1.0)]);
    }
}
