//! Synthetic papers drawn from per-topic vocabularies.
//!
//! Every topic owns a set of invented words whose stems are distinct from
//! those of every other topic. A paper on a leaf topic mixes its own words,
//! words of its area and of sibling topics (the `confusion` share), and
//! background words shared by all topics.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ids::TopicId;
use crate::taxonomy::Taxonomy;
use crate::textpipe::{stem, tokenize, Stoplist};

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "gl"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
const CODAS: &[&str] = &["", "", "n", "m", "x", "k", "rt"];
const FILLERS: &[&str] = &["the", "of", "and", "in", "a", "we", "is", "for", "this", "with"];

#[derive(Clone, Debug)]
pub struct Vocabulary {
    topics: BTreeMap<TopicId, Vec<String>>,
    background: Vec<String>,
}

impl Vocabulary {
    /// Invents `per_topic` words for every non-root topic and `background`
    /// shared words.
    pub fn generate(taxonomy: &Taxonomy, per_topic: usize, background: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stoplist = Stoplist::smart();
        let mut stems = HashSet::new();
        let mut fresh = |rng: &mut ChaCha8Rng| loop {
            let syllables = rng.random_range(2..=3);
            let mut word = String::new();
            for _ in 0..syllables {
                word.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
                word.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
            }
            word.push_str(CODAS[rng.random_range(0..CODAS.len())]);
            if word.len() < 5 || stoplist.contains(&word) || tokenize(&word) != [word.clone()] {
                continue;
            }
            if stems.insert(stem(&word)) {
                return word;
            }
        };
        let mut topics = BTreeMap::new();
        for topic in taxonomy.topics() {
            if taxonomy.is_root(topic) {
                continue;
            }
            let words = (0..per_topic).map(|_| fresh(&mut rng)).collect();
            topics.insert(topic.clone(), words);
        }
        let background = (0..background).map(|_| fresh(&mut rng)).collect();
        Self { topics, background }
    }

    pub fn words(&self, topic: &TopicId) -> &[String] {
        self.topics.get(topic).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn background(&self) -> &[String] {
        &self.background
    }
}

/// Shape of generated texts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TextModel {
    /// Share of tokens drawn from the paper's own topic.
    pub core_share: f64,
    /// Share drawn from related topics: the area and siblings for a leaf,
    /// the children for an area.
    pub confusion: f64,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for TextModel {
    fn default() -> Self {
        Self {
            core_share: 0.15,
            confusion: 0.3,
            min_len: 80,
            max_len: 200,
        }
    }
}

/// Picks from `words` with a skew towards the front, so that a few words
/// of each topic recur often enough to survive pruning.
fn pick<'a>(words: &'a [String], rng: &mut ChaCha8Rng) -> &'a str {
    let u: f64 = rng.random();
    &words[((u * u) * words.len() as f64) as usize]
}

/// Writes the text of one paper on `topic`.
pub fn write_paper(
    vocab: &Vocabulary,
    taxonomy: &Taxonomy,
    topic: &TopicId,
    model: &TextModel,
    rng: &mut ChaCha8Rng,
) -> String {
    let node = taxonomy.node(topic).expect("topic in taxonomy");
    let parent = node.parent.as_ref().filter(|p| !taxonomy.is_root(p));
    let mut related: Vec<&TopicId> = Vec::new();
    if let Some(p) = parent {
        related.push(p);
        related.extend(taxonomy.children(p).filter(|c| *c != topic));
    } else {
        related.extend(taxonomy.children(topic));
    }
    let len = rng.random_range(model.min_len..=model.max_len);
    let mut out = String::new();
    for i in 0..len {
        if i > 0 {
            out.push(if i % 12 == 0 { '\n' } else { ' ' });
        }
        if i % 7 == 3 {
            out.push_str(FILLERS[rng.random_range(0..FILLERS.len())]);
            out.push(' ');
        }
        let u: f64 = rng.random();
        let word = if u < model.core_share {
            pick(vocab.words(topic), rng)
        } else if u < model.core_share + model.confusion && !related.is_empty() {
            let other = related[rng.random_range(0..related.len())];
            pick(vocab.words(other), rng)
        } else {
            pick(vocab.background(), rng)
        };
        out.push_str(word);
    }
    out.push('\n');
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticPaper {
    pub url: String,
    pub topic: TopicId,
    pub text: String,
}

#[derive(Clone, Debug)]
pub struct CorpusConfig {
    pub seed: u64,
    pub papers: usize,
    pub bootstrap_per_topic: usize,
    /// Share of papers written on an area rather than a leaf topic.
    pub area_share: f64,
    pub words_per_topic: usize,
    pub background_words: usize,
    pub text: TextModel,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            papers: 500,
            bootstrap_per_topic: 4,
            area_share: 0.2,
            words_per_topic: 20,
            background_words: 300,
            text: TextModel::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub vocabulary: Vocabulary,
    /// Papers users browse and are recommended.
    pub papers: Vec<SyntheticPaper>,
    /// Labelled papers that seed both training sets.
    pub bootstrap: Vec<SyntheticPaper>,
}

impl Corpus {
    /// Generates a corpus over the non-root topics of `taxonomy`.
    pub fn generate(taxonomy: &Taxonomy, config: &CorpusConfig) -> Self {
        let vocabulary = Vocabulary::generate(
            taxonomy,
            config.words_per_topic,
            config.background_words,
            config.seed,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_c0de);
        let topics: Vec<&TopicId> = taxonomy.topics().filter(|t| !taxonomy.is_root(t)).collect();
        let (areas, leaves): (Vec<&TopicId>, Vec<&TopicId>) =
            topics.iter().partition(|t| taxonomy.children(t).next().is_some());

        let mut bootstrap = Vec::new();
        for topic in &topics {
            for i in 0..config.bootstrap_per_topic {
                bootstrap.push(SyntheticPaper {
                    url: format!("http://examples.example.org/{topic}/{i}.pdf"),
                    topic: (*topic).clone(),
                    text: write_paper(&vocabulary, taxonomy, topic, &config.text, &mut rng),
                });
            }
        }
        let mut papers = Vec::new();
        for i in 0..config.papers {
            let pool = if !areas.is_empty() && (leaves.is_empty() || rng.random_bool(config.area_share)) {
                &areas
            } else {
                &leaves
            };
            let topic = pool[rng.random_range(0..pool.len())];
            let suffix = if i % 3 == 0 { "ps.gz" } else { "pdf" };
            papers.push(SyntheticPaper {
                url: format!("http://papers.example.org/{topic}/p{i:04}.{suffix}"),
                topic: topic.clone(),
                text: write_paper(&vocabulary, taxonomy, topic, &config.text, &mut rng),
            });
        }
        Self {
            vocabulary,
            papers,
            bootstrap,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::{TaxonomyMode, SAMPLE_HIERARCHY};

    #[test]
    fn vocabularies_have_distinct_stems() {
        let tax = Taxonomy::parse(SAMPLE_HIERARCHY, TaxonomyMode::Hierarchical).unwrap();
        let v = Vocabulary::generate(&tax, 20, 100, 7);
        let mut stems = HashSet::new();
        let mut total = 0;
        for t in tax.topics().filter(|t| !tax.is_root(t)) {
            assert_eq!(v.words(t).len(), 20);
            for w in v.words(t) {
                stems.insert(stem(w));
                total += 1;
            }
        }
        for w in v.background() {
            stems.insert(stem(w));
            total += 1;
        }
        assert_eq!(stems.len(), total);
    }

    #[test]
    fn generation_is_deterministic() {
        let tax = Taxonomy::parse(SAMPLE_HIERARCHY, TaxonomyMode::Hierarchical).unwrap();
        let config = CorpusConfig {
            papers: 30,
            ..CorpusConfig::default()
        };
        let a = Corpus::generate(&tax, &config);
        let b = Corpus::generate(&tax, &config);
        assert_eq!(a.papers, b.papers);
        assert_eq!(a.bootstrap.len(), 30 * 4);
    }
}
