//! Topic schemes: an extensible flat list or a fixed is-a hierarchy.
//!
//! Both modes hang every topic under a synthetic root so ancestry logic is
//! shared. A taxonomy value is an immutable snapshot; [`Taxonomy::add_topic`]
//! returns a new one and never touches existing nodes.
//!
//! File format, one node per line:
//!
//! ```text
//! # comment
//! top	Top	-
//! ml	Machine learning	top
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{check_field, TopicId};

/// Id of the synthetic root in the bundled taxonomies.
pub const ROOT_ID: &str = "top";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaxonomyMode {
    Flat,
    Hierarchical,
}

impl fmt::Display for TaxonomyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaxonomyMode::Flat => "flat",
            TaxonomyMode::Hierarchical => "hierarchical",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicNode {
    pub id: TopicId,
    pub label: String,
    pub parent: Option<TopicId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate topic id {id}")]
    DuplicateId { line: usize, id: TopicId },
    #[error("line {line}: topic {id} names unknown parent {parent}")]
    MissingParent {
        line: usize,
        id: TopicId,
        parent: TopicId,
    },
    #[error("line {line}: second root {id} (first root is {first})")]
    MultipleRoots {
        line: usize,
        id: TopicId,
        first: TopicId,
    },
    #[error("taxonomy has no root")]
    NoRoot,
    #[error("parent links form a cycle: {}", join_ids(.0))]
    Cycle(Vec<TopicId>),
    #[error("topic {id} is nested below the root, which a flat taxonomy forbids")]
    NotFlat { id: TopicId },
    #[error("a topic labelled {label:?} already exists ({id})")]
    DuplicateLabel { label: String, id: TopicId },
    #[error("the hierarchical taxonomy is fixed; topics cannot be added")]
    Locked,
    #[error("invalid topic label {0:?}")]
    InvalidLabel(String),
    #[error("unknown topic {0}")]
    UnknownTopic(TopicId),
    #[error("flat taxonomies only accept topics directly below the root, not below {0}")]
    InvalidParent(TopicId),
}

fn join_ids(ids: &[TopicId]) -> String {
    ids.iter()
        .map(TopicId::as_str)
        .collect::<Vec<_>>()
        .join(" -> ")
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Line {
    Node(usize),
    /// Comment or blank line, reproduced verbatim on save.
    Trivia(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Taxonomy {
    mode: TaxonomyMode,
    nodes: Vec<TopicNode>,
    index: HashMap<TopicId, usize>,
    root: usize,
    lines: Vec<Line>,
    trailing_newline: bool,
}

/// Lower-cases a label and joins its alphanumeric runs with `-`.
pub fn slugify(label: &str) -> String {
    let mut slug = String::new();
    for c in label.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            slug.push(c);
        } else if !slug.is_empty() && !slug.ends_with('-') {
            slug.push('-');
        }
    }
    while slug.ends_with('-') {
        slug.pop();
    }
    slug
}

impl Taxonomy {
    /// A taxonomy holding only a root.
    pub fn new(mode: TaxonomyMode, root_id: TopicId, root_label: impl Into<String>) -> Self {
        let root = TopicNode {
            id: root_id.clone(),
            label: root_label.into(),
            parent: None,
        };
        Self {
            mode,
            nodes: vec![root],
            index: HashMap::from([(root_id, 0)]),
            root: 0,
            lines: vec![Line::Node(0)],
            trailing_newline: true,
        }
    }

    /// Parses and validates a taxonomy file.
    pub fn parse(text: &str, mode: TaxonomyMode) -> Result<Self, TaxonomyError> {
        let mut nodes: Vec<TopicNode> = Vec::new();
        let mut node_lines = Vec::new();
        let mut index = HashMap::new();
        let mut lines = Vec::new();
        let mut root: Option<usize> = None;

        let body = text.strip_suffix('\n');
        let trailing_newline = body.is_some() || text.is_empty();
        let body = body.unwrap_or(text);
        if !body.is_empty() || !text.is_empty() {
            for (i, raw) in body.split('\n').enumerate() {
                let line_no = i + 1;
                if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                    lines.push(Line::Trivia(raw.to_owned()));
                    continue;
                }
                let malformed = |message: String| TaxonomyError::Malformed {
                    line: line_no,
                    message,
                };
                let fields: Vec<&str> = raw.split('\t').collect();
                if fields.len() != 3 {
                    return Err(malformed(format!(
                        "expected 3 tab-separated fields, found {}",
                        fields.len()
                    )));
                }
                let id = TopicId::new(fields[0]).map_err(|e| malformed(format!("id: {e}")))?;
                let label = fields[1];
                if label.trim().is_empty() || label.contains('\r') {
                    return Err(malformed(format!("invalid label {label:?}")));
                }
                let parent = match fields[2] {
                    "-" => None,
                    p => Some(TopicId::new(p).map_err(|e| malformed(format!("parent: {e}")))?),
                };
                if index.contains_key(&id) {
                    return Err(TaxonomyError::DuplicateId { line: line_no, id });
                }
                let idx = nodes.len();
                if parent.is_none() {
                    if let Some(first) = root {
                        return Err(TaxonomyError::MultipleRoots {
                            line: line_no,
                            id,
                            first: nodes[first].id.clone(),
                        });
                    }
                    root = Some(idx);
                }
                index.insert(id.clone(), idx);
                nodes.push(TopicNode {
                    id,
                    label: label.to_owned(),
                    parent,
                });
                node_lines.push(line_no);
                lines.push(Line::Node(idx));
            }
        }

        for (node, &line) in nodes.iter().zip(&node_lines) {
            if let Some(parent) = &node.parent {
                if !index.contains_key(parent) {
                    return Err(TaxonomyError::MissingParent {
                        line,
                        id: node.id.clone(),
                        parent: parent.clone(),
                    });
                }
            }
        }
        if let Some(cycle) = find_cycle(&nodes, &index) {
            return Err(TaxonomyError::Cycle(cycle));
        }
        let root = root.ok_or(TaxonomyError::NoRoot)?;
        let taxonomy = Self {
            mode,
            nodes,
            index,
            root,
            lines,
            trailing_newline,
        };
        if mode == TaxonomyMode::Flat {
            if let Some(deep) = taxonomy.nodes.iter().find(|n| {
                n.parent
                    .as_ref()
                    .is_some_and(|p| *p != taxonomy.nodes[root].id)
            }) {
                return Err(TaxonomyError::NotFlat {
                    id: deep.id.clone(),
                });
            }
        }
        Ok(taxonomy)
    }

    /// Serializes back to the file format. Comments, blank lines and the
    /// presence of a final newline are preserved, so `parse` then
    /// `to_file_string` reproduces the input byte for byte.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (i, line) in self.lines.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            match line {
                Line::Trivia(text) => out.push_str(text),
                Line::Node(idx) => {
                    let node = &self.nodes[*idx];
                    out.push_str(node.id.as_str());
                    out.push('\t');
                    out.push_str(&node.label);
                    out.push('\t');
                    out.push_str(node.parent.as_ref().map_or("-", TopicId::as_str));
                }
            }
        }
        if self.trailing_newline && !self.lines.is_empty() {
            out.push('\n');
        }
        out
    }

    pub fn mode(&self) -> TaxonomyMode {
        self.mode
    }

    pub fn root(&self) -> &TopicId {
        &self.nodes[self.root].id
    }

    pub fn is_root(&self, topic: &TopicId) -> bool {
        topic == self.root()
    }

    pub fn contains(&self, topic: &TopicId) -> bool {
        self.index.contains_key(topic)
    }

    pub fn node(&self, topic: &TopicId) -> Option<&TopicNode> {
        self.index.get(topic).map(|&i| &self.nodes[i])
    }

    /// Nodes in file order, root included.
    pub fn nodes(&self) -> &[TopicNode] {
        &self.nodes
    }

    /// Every topic except the root, in file order.
    pub fn topics(&self) -> impl Iterator<Item = &TopicId> {
        let root = self.root;
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != root)
            .map(|(_, n)| &n.id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn children<'a>(&'a self, topic: &'a TopicId) -> impl Iterator<Item = &'a TopicId> + 'a {
        self.nodes
            .iter()
            .filter(move |n| n.parent.as_ref() == Some(topic))
            .map(|n| &n.id)
    }

    /// Ancestors nearest first, ending at the root; empty for the root.
    pub fn ancestors(&self, topic: &TopicId) -> Result<Vec<TopicId>, TaxonomyError> {
        let mut idx = *self
            .index
            .get(topic)
            .ok_or_else(|| TaxonomyError::UnknownTopic(topic.clone()))?;
        let mut out = Vec::new();
        while let Some(parent) = &self.nodes[idx].parent {
            out.push(parent.clone());
            idx = self.index[parent];
        }
        Ok(out)
    }

    /// Number of edges from the root; 0 for the root.
    pub fn depth(&self, topic: &TopicId) -> Result<usize, TaxonomyError> {
        self.ancestors(topic).map(|a| a.len())
    }

    pub fn max_depth(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| self.depth(&n.id).unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    pub fn find_label(&self, label: &str) -> Option<&TopicNode> {
        let slug = slugify(label);
        self.nodes
            .iter()
            .find(|n| n.label.eq_ignore_ascii_case(label.trim()) || n.id.as_str() == slug)
    }

    /// Adds a topic, returning the new snapshot.
    ///
    /// Flat taxonomies attach to the root. Hierarchical taxonomies are fixed
    /// and refuse additions unless `admin_override` is set.
    pub fn add_topic(
        &self,
        label: &str,
        parent: Option<&TopicId>,
        admin_override: bool,
    ) -> Result<(Self, TopicId), TaxonomyError> {
        let label = label.trim();
        if self.mode == TaxonomyMode::Hierarchical && !admin_override {
            return Err(TaxonomyError::Locked);
        }
        let slug = slugify(label);
        if check_field(label).is_err() || slug.is_empty() {
            return Err(TaxonomyError::InvalidLabel(label.to_owned()));
        }
        if let Some(existing) = self.find_label(label) {
            return Err(TaxonomyError::DuplicateLabel {
                label: label.to_owned(),
                id: existing.id.clone(),
            });
        }
        let parent = match (self.mode, parent) {
            (_, None) => self.root().clone(),
            (TaxonomyMode::Flat, Some(p)) if !self.is_root(p) => {
                return Err(TaxonomyError::InvalidParent(p.clone()))
            }
            (_, Some(p)) => {
                if !self.contains(p) {
                    return Err(TaxonomyError::UnknownTopic(p.clone()));
                }
                p.clone()
            }
        };
        let id = TopicId::new(slug).map_err(|_| TaxonomyError::InvalidLabel(label.to_owned()))?;
        let mut next = self.clone();
        let idx = next.nodes.len();
        next.nodes.push(TopicNode {
            id: id.clone(),
            label: label.to_owned(),
            parent: Some(parent),
        });
        next.index.insert(id.clone(), idx);
        next.lines.push(Line::Node(idx));
        next.trailing_newline = true;
        Ok((next, id))
    }

    /// The same topics with every node re-parented to the root.
    pub fn flattened(&self) -> Self {
        let root_id = self.root().clone();
        let mut flat = Taxonomy::new(TaxonomyMode::Flat, root_id.clone(), self.nodes[self.root].label.clone());
        for node in self.nodes.iter().filter(|n| n.id != root_id) {
            let idx = flat.nodes.len();
            flat.nodes.push(TopicNode {
                id: node.id.clone(),
                label: node.label.clone(),
                parent: Some(root_id.clone()),
            });
            flat.index.insert(node.id.clone(), idx);
            flat.lines.push(Line::Node(idx));
        }
        flat
    }
}

/// Returns the first cycle found by following parent links, if any.
fn find_cycle(nodes: &[TopicNode], index: &HashMap<TopicId, usize>) -> Option<Vec<TopicId>> {
    // 0 = unvisited, 1 = on the current path, 2 = known to reach a root
    let mut state = vec![0u8; nodes.len()];
    for start in 0..nodes.len() {
        let mut path = Vec::new();
        let mut on_path = HashSet::new();
        let mut cur = Some(start);
        while let Some(i) = cur {
            if state[i] == 2 {
                break;
            }
            if !on_path.insert(i) {
                let pos = path.iter().position(|&p| p == i).unwrap_or(0);
                let mut cycle: Vec<TopicId> =
                    path[pos..].iter().map(|&p: &usize| nodes[p].id.clone()).collect();
                cycle.push(nodes[i].id.clone());
                return Some(cycle);
            }
            state[i] = 1;
            path.push(i);
            cur = nodes[i].parent.as_ref().and_then(|p| index.get(p).copied());
        }
        for i in path {
            state[i] = 2;
        }
    }
    None
}

/// A three-level computer-science topic hierarchy: the root, five areas
/// and five specialisms per area (30 topics).
pub const SAMPLE_HIERARCHY: &str = include_str!("../data/taxonomy.ontology.tsv");

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> TopicId {
        TopicId::new(s).unwrap()
    }

    const SMALL: &str = "top\tTop\t-\nai\tAI\ttop\nagents\tAgents\tai\n";

    #[test]
    fn parse_small_tree() {
        let tax = Taxonomy::parse("top\tTop\t-\na\tA\ttop\nb\tB\ttop\n", TaxonomyMode::Flat).unwrap();
        assert_eq!(tax.len(), 3);
        assert_eq!(tax.root(), &t("top"));
        assert_eq!(tax.max_depth(), 1);
    }

    #[test]
    fn rejects_cycles() {
        let err = Taxonomy::parse("top\tTop\t-\na\tA\tb\nb\tB\ta\n", TaxonomyMode::Hierarchical)
            .unwrap_err();
        match err {
            TaxonomyError::Cycle(ids) => {
                assert!(ids.contains(&t("a")) && ids.contains(&t("b")));
            }
            other => panic!("expected cycle, got {other:?}"),
        }
        // also without any root present
        assert!(matches!(
            Taxonomy::parse("a\tA\tb\nb\tB\ta\n", TaxonomyMode::Hierarchical),
            Err(TaxonomyError::Cycle(_))
        ));
    }

    #[test]
    fn rejects_bad_files() {
        let h = TaxonomyMode::Hierarchical;
        assert!(matches!(
            Taxonomy::parse("top\tTop\t-\na\tA\tghost\n", h),
            Err(TaxonomyError::MissingParent { line: 2, .. })
        ));
        assert!(matches!(
            Taxonomy::parse("top\tTop\t-\nx\tX\t-\n", h),
            Err(TaxonomyError::MultipleRoots { line: 2, .. })
        ));
        assert!(matches!(
            Taxonomy::parse("top\tTop\t-\ntop\tAgain\ttop\n", h),
            Err(TaxonomyError::DuplicateId { line: 2, .. })
        ));
        assert!(matches!(
            Taxonomy::parse("# c\ntop Top -\n", h),
            Err(TaxonomyError::Malformed { line: 2, .. })
        ));
        assert!(matches!(Taxonomy::parse("", h), Err(TaxonomyError::NoRoot)));
        assert!(matches!(
            Taxonomy::parse(SMALL, TaxonomyMode::Flat),
            Err(TaxonomyError::NotFlat { .. })
        ));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for text in [
            SMALL,
            "# header\n\ntop\tTop\t-\n  # indented comment\nai\tArtificial intelligence\ttop",
            SAMPLE_HIERARCHY,
        ] {
            let tax = Taxonomy::parse(text, TaxonomyMode::Hierarchical).unwrap();
            assert_eq!(tax.to_file_string(), text);
        }
    }

    #[test]
    fn ancestors_follow_parent_links() {
        let tax = Taxonomy::parse(SMALL, TaxonomyMode::Hierarchical).unwrap();
        assert!(tax.ancestors(&t("top")).unwrap().is_empty());
        assert_eq!(tax.ancestors(&t("agents")).unwrap(), vec![t("ai"), t("top")]);
        assert!(matches!(
            tax.ancestors(&t("nope")),
            Err(TaxonomyError::UnknownTopic(_))
        ));
        let flat = tax.flattened();
        for topic in flat.topics() {
            assert_eq!(flat.ancestors(topic).unwrap(), vec![t("top")]);
        }
    }

    #[test]
    fn add_topic_rules() {
        let flat = Taxonomy::new(TaxonomyMode::Flat, t("top"), "Top");
        let (flat2, id) = flat.add_topic("Neural networks", None, false).unwrap();
        assert_eq!(id, t("neural-networks"));
        assert_eq!(flat2.ancestors(&id).unwrap(), vec![t("top")]);
        assert_eq!(flat.len(), 1, "prior snapshot untouched");
        assert!(matches!(
            flat2.add_topic("neural networks", None, false),
            Err(TaxonomyError::DuplicateLabel { .. })
        ));
        assert!(matches!(
            flat2.add_topic("Deep", Some(&id), false),
            Err(TaxonomyError::InvalidParent(_))
        ));
        assert!(matches!(
            flat2.add_topic("  ", None, false),
            Err(TaxonomyError::InvalidLabel(_))
        ));

        let onto = Taxonomy::parse(SMALL, TaxonomyMode::Hierarchical).unwrap();
        assert!(matches!(
            onto.add_topic("Robotics", None, false),
            Err(TaxonomyError::Locked)
        ));
        let (onto2, rid) = onto.add_topic("Robotics", Some(&t("ai")), true).unwrap();
        assert_eq!(onto2.ancestors(&rid).unwrap(), vec![t("ai"), t("top")]);
        // append-only history: the old file is a prefix of the new one
        assert!(onto2.to_file_string().starts_with(&onto.to_file_string()));
    }

    #[test]
    fn sample_hierarchy_shape() {
        let tax = Taxonomy::parse(SAMPLE_HIERARCHY, TaxonomyMode::Hierarchical).unwrap();
        assert_eq!(tax.topics().count(), 30);
        assert_eq!(tax.max_depth(), 2);
        assert_eq!(tax.root().as_str(), ROOT_ID);
        assert_eq!(tax.children(tax.root()).count(), 5);
    }
}
