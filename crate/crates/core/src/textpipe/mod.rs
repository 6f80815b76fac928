//! Document text to sparse term vectors.
//!
//! The pipeline is `tokenize -> remove_stopwords -> stem -> count`. A stem's
//! weight is its count divided by the number of surviving tokens `N`, and
//! stems seen fewer than twice are dropped after `N` is fixed, so the weights
//! of a vector sum to at most one.

mod porter;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use chrono::NaiveDate;

pub use porter::stem;

use crate::ids::DocId;

/// Stems seen fewer times than this are pruned from a document vector.
pub const MIN_TERM_COUNT: usize = 2;

/// A fetched document, already reduced to plain text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawDocument {
    pub doc_id: DocId,
    pub uri: String,
    pub text: String,
    pub fetched_at: NaiveDate,
}

/// Sparse stem -> weight map for one document. Terms are kept sorted so
/// that iteration, serialization and similarity sums are deterministic.
#[derive(Clone, Debug, PartialEq)]
pub struct TermVector {
    pub doc_id: DocId,
    weights: BTreeMap<String, f64>,
    norm_sq: f64,
}

impl TermVector {
    /// Builds a vector from explicit weights. Non-positive weights are dropped.
    pub fn from_weights(doc_id: DocId, weights: impl IntoIterator<Item = (String, f64)>) -> Self {
        let weights: BTreeMap<String, f64> = weights
            .into_iter()
            .filter(|(_, w)| *w > 0.0 && w.is_finite())
            .collect();
        let norm_sq = weights.values().map(|w| w * w).sum::<f64>();
        Self {
            doc_id,
            weights,
            norm_sq,
        }
    }

    pub fn weights(&self) -> &BTreeMap<String, f64> {
        &self.weights
    }

    pub fn get(&self, term: &str) -> Option<f64> {
        self.weights.get(term).copied()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Euclidean norm of the weights.
    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.values().sum()
    }
}

/// A set of words removed before stemming.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stoplist {
    words: HashSet<String>,
}

const SMART_STOPLIST: &str = include_str!("../../data/smart_stoplist.txt");

impl Stoplist {
    /// Parses the stop-list file format: one word per line, `#` starts a
    /// comment line, surrounding whitespace ignored, entries lower-cased.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { words }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    /// The bundled SMART stop list.
    pub fn smart() -> Self {
        Self::parse(SMART_STOPLIST)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stoplist {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self {
            words: iter.into_iter().map(Into::into).collect(),
        }
    }
}

/// Splits text into lower-case maximal runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        for lc in c.to_lowercase() {
            if lc.is_alphanumeric() {
                current.push(lc);
            } else if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

pub fn remove_stopwords(tokens: Vec<String>, stoplist: &Stoplist) -> Vec<String> {
    tokens.into_iter().filter(|t| !stoplist.contains(t)).collect()
}

/// Stem counts and the surviving token total `N` for a text.
pub fn stem_counts(text: &str, stoplist: &Stoplist) -> (BTreeMap<String, usize>, usize) {
    let mut counts = BTreeMap::new();
    let mut total = 0;
    for token in remove_stopwords(tokenize(text), stoplist) {
        *counts.entry(stem(&token)).or_insert(0) += 1;
        total += 1;
    }
    (counts, total)
}

pub fn build_vector(doc: &RawDocument, stoplist: &Stoplist) -> TermVector {
    vectorize(doc.doc_id.clone(), &doc.text, stoplist)
}

/// [`build_vector`] without the document envelope.
pub fn vectorize(doc_id: DocId, text: &str, stoplist: &Stoplist) -> TermVector {
    let (counts, total) = stem_counts(text, stoplist);
    let weights = counts
        .into_iter()
        .filter(|&(_, count)| count >= MIN_TERM_COUNT)
        .map(|(term, count)| (term, count as f64 / total as f64));
    TermVector::from_weights(doc_id, weights)
}

/// Cosine similarity of two vectors; 0 when either is empty.
pub fn cosine(a: &TermVector, b: &TermVector) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small
        .weights
        .iter()
        .filter_map(|(term, w)| large.weights.get(term).map(|v| w * v))
        .sum();
    if dot == 0.0 {
        return 0.0;
    }
    // sqrt(x * x) == x exactly, so cosine(v, v) is exactly 1.
    (dot / (a.norm_sq * b.norm_sq).sqrt()).clamp(0.0, 1.0)
}

/// URL suffixes accepted by the browse-log filter by default.
pub const DEFAULT_ACCEPTED_SUFFIXES: &[&str] = &[".ps", ".pdf", ".ps.gz", ".ps.Z", ".pdf.gz"];

/// Whether a browsed URL names a document format we ingest. The query string
/// and fragment are ignored; the comparison is case-sensitive because `.Z`
/// and `.z` are different compressors.
pub fn url_accepted<S: AsRef<str>>(url: &str, suffixes: &[S]) -> bool {
    let path = url.split(['?', '#']).next().unwrap_or("");
    suffixes.iter().any(|s| path.ends_with(s.as_ref()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> RawDocument {
        RawDocument {
            doc_id: DocId::new("d1").unwrap(),
            uri: "http://example.org/d1.pdf".into(),
            text: text.into(),
            fetched_at: NaiveDate::from_ymd_opt(2001, 1, 1).unwrap(),
        }
    }

    #[test]
    fn tokenize_examples() {
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Agents learn."), ["agents", "learn"]);
        assert_eq!(tokenize("TF-IDF weighting"), ["tf", "idf", "weighting"]);
        assert_eq!(tokenize("  Ünïcode 42x "), ["ünïcode", "42x"]);
    }

    #[test]
    fn stopword_examples() {
        let stop = Stoplist::smart();
        assert!(stop.contains("the"));
        let tokens = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(remove_stopwords(tokens(&["the", "agent"]), &stop), ["agent"]);
        assert!(remove_stopwords(vec![], &stop).is_empty());
        assert_eq!(
            remove_stopwords(tokens(&["agent", "agent"]), &stop),
            ["agent", "agent"]
        );
    }

    #[test]
    fn stoplist_file_format() {
        let s = Stoplist::parse("# comment\nThe\n\n  of \n");
        assert_eq!(s.len(), 2);
        assert!(s.contains("the") && s.contains("of"));
        assert!(Stoplist::smart().len() > 500);
    }

    #[test]
    fn pruning_uses_counts_before_threshold() {
        let stop = Stoplist::default();
        // agents -> agent twice, learn once: N = 3
        let v = build_vector(&doc("agents agent learn"), &stop);
        assert_eq!(v.len(), 1);
        assert_eq!(v.get("agent"), Some(2.0 / 3.0));

        let v = build_vector(&doc("filter filters filtering agent agents"), &stop);
        assert_eq!(v.get("filter"), Some(0.6));
        assert_eq!(v.get("agent"), Some(0.4));
        assert_eq!(v.total_weight(), 1.0);

        assert!(build_vector(&doc("every word here differs"), &stop).is_empty());
        assert!(build_vector(&doc(""), &stop).is_empty());
    }

    #[test]
    fn stop_words_do_not_count_towards_n() {
        let v = build_vector(&doc("the agent the agent"), &Stoplist::smart());
        assert_eq!(v.get("agent"), Some(1.0));
    }

    #[test]
    fn cosine_examples() {
        let id = || DocId::new("x").unwrap();
        let a = TermVector::from_weights(id(), [("x".to_string(), 1.0)]);
        let b = TermVector::from_weights(id(), [("x".to_string(), 1.0), ("y".to_string(), 1.0)]);
        let c = TermVector::from_weights(id(), [("z".to_string(), 0.5)]);
        assert!((cosine(&a, &b) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(cosine(&b, &b), 1.0);
        assert_eq!(cosine(&a, &c), 0.0);
        assert_eq!(cosine(&a, &TermVector::from_weights(id(), [])), 0.0);
    }

    #[test]
    fn suffix_filter() {
        let s = DEFAULT_ACCEPTED_SUFFIXES;
        assert!(url_accepted("http://a.org/p.pdf", s));
        assert!(url_accepted("http://a.org/p.ps.Z?x=1", s));
        assert!(url_accepted("http://a.org/p.pdf.gz", s));
        assert!(!url_accepted("http://a.org/p.html", s));
        assert!(!url_accepted("http://a.org/pdf", s));
    }
}
