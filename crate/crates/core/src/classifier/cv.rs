use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::boost::train_boost;
use super::{ClassifierError, TrainingSet};
use crate::ids::TopicId;

/// Cross-validation counts and the two ratios derived from them.
///
/// `precision` is rank-1 accuracy over the held-out examples that could be
/// classified at all; `recall` is the share of all held-out examples whose
/// true topic appears anywhere in the ranking.
#[derive(Clone, Debug, PartialEq)]
pub struct CvReport {
    pub folds: usize,
    pub total: usize,
    pub classified: usize,
    pub top1_correct: usize,
    pub in_ranking: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Seeded fold assignment, stratified by topic: each topic's examples are
/// shuffled and dealt round-robin, continuing the deal across topics.
pub fn stratified_folds(
    set: &TrainingSet,
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, ClassifierError> {
    if folds < 2 {
        return Err(ClassifierError::TooFewFolds(folds));
    }
    if folds > set.len() {
        return Err(ClassifierError::TooManyFolds {
            folds,
            examples: set.len(),
        });
    }
    let mut by_topic: BTreeMap<&TopicId, Vec<usize>> = BTreeMap::new();
    for (i, e) in set.examples().iter().enumerate() {
        by_topic.entry(&e.topic).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for indices in by_topic.values_mut() {
        indices.shuffle(&mut rng);
        for &i in indices.iter() {
            out[next % folds].push(i);
            next += 1;
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok(out)
}

pub fn cross_validate(
    set: &TrainingSet,
    folds: usize,
    rounds: usize,
    k: usize,
    seed: u64,
) -> Result<CvReport, ClassifierError> {
    let assignment = stratified_folds(set, folds, seed)?;
    let mut report = CvReport {
        folds,
        total: 0,
        classified: 0,
        top1_correct: 0,
        in_ranking: 0,
        precision: 0.0,
        recall: 0.0,
    };
    for held_out in &assignment {
        let mut train_idx = Vec::with_capacity(set.len() - held_out.len());
        let mut h = held_out.iter().peekable();
        for i in 0..set.len() {
            if h.peek() == Some(&&i) {
                h.next();
            } else {
                train_idx.push(i);
            }
        }
        let committee = train_boost(&set.subset(&train_idx), rounds, k, seed)?;
        for &i in held_out {
            let example = &set.examples()[i];
            report.total += 1;
            let Ok(ranking) = committee.classify(&example.vector) else {
                continue;
            };
            report.classified += 1;
            if ranking[0].0 == example.topic {
                report.top1_correct += 1;
            }
            if ranking.iter().any(|(t, _)| *t == example.topic) {
                report.in_ranking += 1;
            }
        }
    }
    if report.classified > 0 {
        report.precision = report.top1_correct as f64 / report.classified as f64;
    }
    report.recall = report.in_ranking as f64 / report.total as f64;
    Ok(report)
}
