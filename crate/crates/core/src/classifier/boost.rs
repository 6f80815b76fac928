use std::sync::Arc;

use super::knn::{neighbours, rank_desc, vote, KnnModel, Ranking};
use super::{ClassifierError, TrainingExample, TrainingSet};
use crate::ids::{Group, TopicId};
use crate::textpipe::TermVector;

/// Lower bound applied to a zero round error so that `beta` stays positive.
pub const EPSILON_FLOOR: f64 = 1e-10;

/// What happened in one boosting round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundStats {
    /// 1-based round number.
    pub round: usize,
    /// Weighted training error before flooring.
    pub epsilon: f64,
    /// `epsilon / (1 - epsilon)` after flooring; `None` for a rejected round.
    pub beta: Option<f64>,
    /// Sum of the distribution the round was trained on.
    pub weight_sum: f64,
    pub accepted: bool,
}

/// A weighted vote over instance-weighted kNN members.
#[derive(Clone, Debug)]
pub struct BoostedCommittee {
    pub(crate) group: Group,
    pub(crate) examples: Arc<Vec<TrainingExample>>,
    pub(crate) k: usize,
    pub(crate) members: Vec<(KnnModel, f64)>,
    pub(crate) rounds_requested: usize,
    pub(crate) rounds_completed: usize,
    pub(crate) seed: u64,
}

/// Rounds a weight to 12 significant digits, the precision committees are
/// saved with, so a reloaded committee votes exactly like the trained one.
pub(crate) fn quantize(w: f64) -> f64 {
    format!("{w:.11e}").parse().unwrap_or(w)
}

pub fn train_boost(
    set: &TrainingSet,
    rounds: usize,
    k: usize,
    seed: u64,
) -> Result<BoostedCommittee, ClassifierError> {
    train_boost_traced(set, rounds, k, seed).map(|(c, _)| c)
}

/// AdaBoost.M1 with a leave-one-out kNN base learner. Returns the committee
/// and per-round statistics, including the round that stopped training.
///
/// The base learner is deterministic, so `seed` is only recorded.
pub fn train_boost_traced(
    set: &TrainingSet,
    rounds: usize,
    k: usize,
    seed: u64,
) -> Result<(BoostedCommittee, Vec<RoundStats>), ClassifierError> {
    if set.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    if rounds == 0 {
        return Err(ClassifierError::InvalidRounds);
    }
    if k == 0 {
        return Err(ClassifierError::InvalidK(k));
    }
    let examples = set.shared();
    let m = examples.len();
    // Neighbour lists depend only on similarity, so compute them once.
    let loo: Vec<Vec<(usize, f64)>> = (0..m)
        .map(|i| neighbours(&examples, &examples[i].vector, k, Some(i)))
        .collect();

    let mut dist = vec![1.0 / m as f64; m];
    let mut members = Vec::new();
    let mut stats = Vec::new();
    for round in 1..=rounds {
        let weights: Vec<f64> = dist.iter().map(|&w| quantize(w)).collect();
        let weight_sum: f64 = weights.iter().sum();
        let correct: Vec<bool> = (0..m)
            .map(|i| {
                vote(&examples, &loo[i], &weights)
                    .is_some_and(|r| r[0].0 == examples[i].topic)
            })
            .collect();
        let epsilon: f64 = (0..m).filter(|&i| !correct[i]).map(|i| weights[i]).sum();
        if epsilon >= 0.5 {
            stats.push(RoundStats {
                round,
                epsilon,
                beta: None,
                weight_sum,
                accepted: false,
            });
            break;
        }
        let floored = epsilon.max(EPSILON_FLOOR);
        let beta = floored / (1.0 - floored);
        members.push((
            KnnModel::with_weights(Arc::clone(&examples), k, weights.clone())?,
            (1.0 / beta).ln(),
        ));
        stats.push(RoundStats {
            round,
            epsilon,
            beta: Some(beta),
            weight_sum,
            accepted: true,
        });
        if epsilon == 0.0 {
            // Reweighting would leave the distribution unchanged.
            break;
        }
        for (w, &ok) in dist.iter_mut().zip(&correct) {
            if ok {
                *w *= beta;
            }
        }
        let total: f64 = dist.iter().sum();
        dist.iter_mut().for_each(|w| *w /= total);
    }

    let rounds_completed = members.len();
    if members.is_empty() {
        // The base learner is no better than chance even on uniform weights;
        // keep it as a single unit-weight member rather than fail.
        members.push((KnnModel::uniform(Arc::clone(&examples), k)?, 1.0));
    }
    Ok((
        BoostedCommittee {
            group: set.group,
            examples,
            k,
            members,
            rounds_requested: rounds,
            rounds_completed,
            seed,
        },
        stats,
    ))
}

impl BoostedCommittee {
    pub fn group(&self) -> Group {
        self.group
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rounds_requested(&self) -> usize {
        self.rounds_requested
    }

    /// Rounds whose member was kept; 0 when even the first round was
    /// rejected and the uniform fallback member is in use.
    pub fn rounds_completed(&self) -> usize {
        self.rounds_completed
    }

    pub fn members(&self) -> &[(KnnModel, f64)] {
        &self.members
    }

    pub fn examples(&self) -> &[TrainingExample] {
        &self.examples
    }

    /// Each member votes its weight for its top topic; members that cannot
    /// classify the query abstain.
    pub fn classify(&self, query: &TermVector) -> Result<Ranking, ClassifierError> {
        let found = neighbours(&self.examples, query, self.k, None);
        let mut mass: Vec<(TopicId, f64)> = Vec::new();
        let mut total = 0.0;
        for (model, weight) in &self.members {
            let Some(ranking) = model.vote_on(&found) else {
                continue;
            };
            let top = &ranking[0].0;
            total += weight;
            match mass.iter_mut().find(|(t, _)| t == top) {
                Some(entry) => entry.1 += weight,
                None => mass.push((top.clone(), *weight)),
            }
        }
        if total <= 0.0 {
            return Err(ClassifierError::Unclassifiable);
        }
        let mut ranking: Ranking = mass.into_iter().map(|(t, v)| (t, v / total)).collect();
        ranking.sort_by(rank_desc);
        Ok(ranking)
    }
}
