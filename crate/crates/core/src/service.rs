//! The recommender as a stateful service over a data directory.
//!
//! Every mutation is appended to a file under the [`DataRoot`] before it is
//! applied in memory, so [`Service::open`] rebuilds the same state from the
//! files alone. Time is always passed in by the caller.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::ops::{Index, IndexMut};
use std::path::Path;

use chrono::{NaiveDate, SubsecRound};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{
    train_boost, BoostedCommittee, ClassifierError, CommitteeRecord, ExampleSource, TrainingRecord,
    TrainingSet,
};
use crate::config::{Config, ConfigError};
use crate::error::{field, split_fields, ParseError};
use crate::fetch::{FetchError, Fetcher};
use crate::ids::{parse_timestamp, DocId, Group, Timestamp, TopicId, UserId};
use crate::profiler::{compute_profile, validate_event, EventKind, FeedbackEvent, ProfileError};
use crate::recommender::{
    daily_recommend, nightly_classify, ClassifiedPaper, Recommendation, RecommendationRecord,
    RecommendationSet,
};
use crate::store::{
    self, atomic_write, AppendLog, BrowseRecord, DataRoot, DocumentRecord, Durability, JobRecord,
    Phase, ServedRecord, StoreError, TopicRecord, UserAccount,
};
use crate::taxonomy::{Taxonomy, TaxonomyError, TaxonomyMode};
use crate::textpipe::{url_accepted, vectorize, Stoplist, TermVector};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error("{path}: {source}")]
    Corrupt { path: String, source: ParseError },
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("user {0} already exists")]
    UserExists(UserId),
    #[error("unknown paper {0}")]
    UnknownPaper(DocId),
    #[error("paper {doc} was never recommended to {user}")]
    NotRecommended { user: UserId, doc: DocId },
    #[error("paper {0} has no topic in this group yet")]
    Unclassified(DocId),
    #[error("a correction needs the corrected topic")]
    MissingCorrectedTopic,
    #[error("no recommendations have been computed yet")]
    NoSetComputed,
    #[error("the daily phase for {0} needs the nightly phase for that date first")]
    PhaseOrder(NaiveDate),
    #[error("url {0:?} is not an accepted document type")]
    NotADocument(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

/// One value per experimental group.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PerGroup<T> {
    pub flat: T,
    pub ontology: T,
}

impl<T> PerGroup<T> {
    pub fn from_fn(mut f: impl FnMut(Group) -> T) -> Self {
        Self {
            flat: f(Group::Flat),
            ontology: f(Group::Ontology),
        }
    }
}

impl<T> Index<Group> for PerGroup<T> {
    type Output = T;
    fn index(&self, g: Group) -> &T {
        match g {
            Group::Flat => &self.flat,
            Group::Ontology => &self.ontology,
        }
    }
}

impl<T> IndexMut<Group> for PerGroup<T> {
    fn index_mut(&mut self, g: Group) -> &mut T {
        match g {
            Group::Flat => &mut self.flat,
            Group::Ontology => &mut self.ontology,
        }
    }
}

pub fn taxonomy_mode(group: Group) -> TaxonomyMode {
    match group {
        Group::Flat => TaxonomyMode::Flat,
        Group::Ontology => TaxonomyMode::Hierarchical,
    }
}

/// A proxy-log line: who fetched which URL when. `text` optionally carries
/// the extracted document text so no fetch is needed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrowseEntry {
    pub user: UserId,
    pub url: String,
    pub at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

/// Parses a browse log with one `<timestamp>\t<user>\t<url>` line per
/// request. Blank lines and lines starting with `#` are skipped.
pub fn parse_browse_log(text: &str) -> Result<Vec<BrowseEntry>, ParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let [at, user, url] = split_fields::<3>(line, line_no)?;
        if url.is_empty() || url.chars().any(char::is_whitespace) {
            return Err(ParseError::new(line_no, format!("url: malformed {url:?}")));
        }
        out.push(BrowseEntry {
            user: field(line_no, "user", user.parse())?,
            url: url.to_owned(),
            at: field(line_no, "timestamp", parse_timestamp(at))?,
            text: None,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EntryError {
    pub index: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub filtered: usize,
    pub errors: Vec<EntryError>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    Interesting,
    NotInteresting,
    Jump,
    Correction,
}

impl FeedbackKind {
    pub fn event_kind(self) -> EventKind {
        match self {
            FeedbackKind::Interesting => EventKind::RatedInteresting,
            FeedbackKind::NotInteresting => EventKind::RatedNotInteresting,
            FeedbackKind::Jump => EventKind::Jump,
            FeedbackKind::Correction => EventKind::Correction,
        }
    }
}

/// The document behind a submitted training example.
#[derive(Clone, Debug, PartialEq)]
pub enum ExampleDoc {
    Url { url: String, text: Option<String> },
    Known(DocId),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub group: Option<Group>,
    pub examples: usize,
    pub rounds_completed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub phase: String,
    pub as_of: NaiveDate,
    pub trained: Vec<TrainReport>,
    pub classified: usize,
    pub unclassified: usize,
    pub browsed_events: usize,
    pub profiles: usize,
    pub recommendations: usize,
}

impl CycleReport {
    fn new(phase: Phase, as_of: NaiveDate) -> Self {
        Self {
            phase: phase.as_str().to_owned(),
            as_of,
            trained: Vec::new(),
            classified: 0,
            unclassified: 0,
            browsed_events: 0,
            profiles: 0,
            recommendations: 0,
        }
    }
}

/// Truncates to the second, the precision every file stores.
fn secs(ts: Timestamp) -> Timestamp {
    ts.trunc_subsecs(0)
}

fn corrupt(path: &Path, line: usize, message: impl Into<String>) -> ServiceError {
    ServiceError::Corrupt {
        path: path.display().to_string(),
        source: ParseError::new(line, message),
    }
}

pub struct Service {
    root: DataRoot,
    config: Config,
    stoplist: Stoplist,
    fetcher: Box<dyn Fetcher>,

    taxonomies: PerGroup<Taxonomy>,
    training_logs: PerGroup<AppendLog<TrainingRecord>>,
    training: PerGroup<TrainingSet>,
    committees: PerGroup<Option<BoostedCommittee>>,

    users: AppendLog<UserAccount>,
    user_groups: HashMap<UserId, Group>,
    documents: AppendLog<DocumentRecord>,
    doc_index: HashMap<DocId, usize>,
    vectors: HashMap<DocId, TermVector>,

    events: AppendLog<FeedbackEvent>,
    event_keys: HashSet<FeedbackEvent>,
    classified: AppendLog<ClassifiedPaper>,
    current: PerGroup<BTreeMap<DocId, ClassifiedPaper>>,
    recommendations: AppendLog<RecommendationRecord>,
    /// Items of the latest run of each (user, date) set.
    sets: HashMap<(UserId, NaiveDate), Vec<RecommendationRecord>>,
    recommended: HashMap<UserId, Vec<(DocId, NaiveDate)>>,
    browses: AppendLog<BrowseRecord>,
    unemitted: Vec<BrowseRecord>,
    /// Browsed and jumped-to papers per user.
    visited: HashMap<UserId, HashSet<DocId>>,
    served: AppendLog<ServedRecord>,
    served_keys: HashSet<(UserId, NaiveDate)>,
    jobs: AppendLog<JobRecord>,
    nightly_done: HashSet<NaiveDate>,
    latest_daily: Option<NaiveDate>,
    topic_log: AppendLog<TopicRecord>,
}

impl Service {
    /// Creates a data directory with the two taxonomies and opens it.
    /// Existing taxonomy files are left alone.
    pub fn init(
        dir: &Path,
        config: Config,
        flat: &Taxonomy,
        ontology: &Taxonomy,
        fetcher: Box<dyn Fetcher>,
        durability: Durability,
    ) -> Result<Self> {
        if flat.mode() != TaxonomyMode::Flat || ontology.mode() != TaxonomyMode::Hierarchical {
            return Err(ServiceError::Invalid(
                "the flat group needs a flat taxonomy and the ontology group a hierarchical one"
                    .into(),
            ));
        }
        let root = DataRoot::open(dir, durability)?;
        for (group, tax) in [(Group::Flat, flat), (Group::Ontology, ontology)] {
            let path = root.taxonomy_path(group);
            if !path.exists() {
                atomic_write(&path, tax.to_file_string().as_bytes())?;
            }
        }
        Self::open(dir, config, fetcher, durability)
    }

    /// Rebuilds the service state from the files under `dir`.
    pub fn open(
        dir: &Path,
        config: Config,
        fetcher: Box<dyn Fetcher>,
        durability: Durability,
    ) -> Result<Self> {
        config.validate()?;
        let root = DataRoot::open(dir, durability)?;
        let stoplist = config.load_stoplist()?;

        let mut taxonomies = Vec::new();
        for group in Group::ALL {
            let path = root.taxonomy_path(group);
            let text = root
                .read_optional(&path)?
                .ok_or_else(|| corrupt(&path, 0, "taxonomy file is missing"))?;
            taxonomies.push(Taxonomy::parse(&text, taxonomy_mode(group))?);
        }
        let ontology_tax = taxonomies.pop().expect("two taxonomies");
        let flat_tax = taxonomies.pop().expect("two taxonomies");

        let users: AppendLog<UserAccount> = root.log(store::USERS)?;
        let documents: AppendLog<DocumentRecord> = root.log(store::DOCUMENTS)?;
        let mut svc = Service {
            training_logs: PerGroup {
                flat: root.training_log(Group::Flat)?,
                ontology: root.training_log(Group::Ontology)?,
            },
            training: PerGroup::from_fn(TrainingSet::new),
            committees: PerGroup::default(),
            taxonomies: PerGroup {
                flat: flat_tax,
                ontology: ontology_tax,
            },
            user_groups: users.records().iter().map(|u| (u.user.clone(), u.group)).collect(),
            users,
            doc_index: documents
                .records()
                .iter()
                .enumerate()
                .map(|(i, d)| (d.doc_id.clone(), i))
                .collect(),
            documents,
            vectors: HashMap::new(),
            events: root.log(store::EVENTS)?,
            event_keys: HashSet::new(),
            classified: root.log(store::CLASSIFIED)?,
            current: PerGroup::default(),
            recommendations: root.log(store::RECOMMENDATIONS)?,
            sets: HashMap::new(),
            recommended: HashMap::new(),
            browses: root.log(store::BROWSE)?,
            unemitted: Vec::new(),
            visited: HashMap::new(),
            served: root.log(store::SERVED)?,
            served_keys: HashSet::new(),
            jobs: root.log(store::JOBS)?,
            nightly_done: HashSet::new(),
            latest_daily: None,
            topic_log: root.log(store::TOPICS)?,
            root,
            config,
            stoplist,
            fetcher,
        };
        svc.replay()?;
        Ok(svc)
    }

    fn replay(&mut self) -> Result<()> {
        for group in Group::ALL {
            let records = self.training_logs[group].snapshot();
            for (i, r) in records.iter().enumerate() {
                let vector = self.vector(&r.doc_id)?;
                self.training[group]
                    .push(vector, r.topic.clone(), r.source, r.added_at, &self.taxonomies[group])
                    .map_err(|e| {
                        corrupt(&self.root.training_path(group), i + 1, e.to_string())
                    })?;
            }
            let path = self.root.committee_path(group);
            if let Some(text) = self.root.read_optional(&path)? {
                match CommitteeRecord::parse(&text)
                    .map_err(ClassifierError::from)
                    .and_then(|r| r.bind(&self.training[group]))
                {
                    Ok(c) => self.committees[group] = Some(c),
                    Err(e) => tracing::warn!(%group, error = %e, "ignoring stale committee file"),
                }
            }
        }
        for e in self.events.snapshot().iter() {
            self.index_event(e);
        }
        for c in self.classified.snapshot().iter() {
            self.current[c.group].insert(c.doc_id.clone(), c.clone());
        }
        for r in self.recommendations.snapshot().iter() {
            self.index_recommendation(r);
        }
        let emitted: HashSet<(UserId, Timestamp, DocId)> = self
            .events
            .records()
            .iter()
            .filter(|e| e.kind == EventKind::Browsed)
            .filter_map(|e| Some((e.user.clone(), e.at, e.paper.clone()?)))
            .collect();
        for b in self.browses.snapshot().iter() {
            self.visited.entry(b.user.clone()).or_default().insert(b.doc_id.clone());
            if !emitted.contains(&(b.user.clone(), b.at, b.doc_id.clone())) {
                self.unemitted.push(b.clone());
            }
        }
        for s in self.served.records() {
            self.served_keys.insert((s.user.clone(), s.set_date));
        }
        for j in self.jobs.snapshot().iter() {
            self.index_job(j);
        }
        Ok(())
    }

    fn index_event(&mut self, e: &FeedbackEvent) {
        if e.kind == EventKind::Jump {
            if let Some(doc) = &e.paper {
                self.visited.entry(e.user.clone()).or_default().insert(doc.clone());
            }
        }
        self.event_keys.insert(e.clone());
    }

    fn index_recommendation(&mut self, r: &RecommendationRecord) {
        let items = self.sets.entry((r.user.clone(), r.date)).or_default();
        // A rank that does not continue the current list starts a rerun.
        if items.last().is_some_and(|last| r.rank <= last.rank) {
            items.clear();
        }
        items.push(r.clone());
        self.recommended
            .entry(r.user.clone())
            .or_default()
            .push((r.doc_id.clone(), r.date));
    }

    fn index_job(&mut self, j: &JobRecord) {
        match j.phase {
            Phase::Nightly => {
                self.nightly_done.insert(j.as_of);
            }
            Phase::Daily => {
                self.latest_daily = Some(self.latest_daily.map_or(j.as_of, |d| d.max(j.as_of)));
            }
        }
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn data_root(&self) -> &DataRoot {
        &self.root
    }

    pub fn taxonomy(&self, group: Group) -> &Taxonomy {
        &self.taxonomies[group]
    }

    pub fn training_set(&self, group: Group) -> &TrainingSet {
        &self.training[group]
    }

    pub fn committee(&self, group: Group) -> Option<&BoostedCommittee> {
        self.committees[group].as_ref()
    }

    pub fn events(&self) -> &[FeedbackEvent] {
        self.events.records()
    }

    pub fn users(&self) -> &[UserAccount] {
        self.users.records()
    }

    pub fn user_group(&self, user: &UserId) -> Result<Group> {
        self.user_groups
            .get(user)
            .copied()
            .ok_or_else(|| ServiceError::UnknownUser(user.clone()))
    }

    /// Current classification of a paper in a group, if any.
    pub fn classification(&self, group: Group, doc: &DocId) -> Option<&ClassifiedPaper> {
        self.current[group].get(doc)
    }

    pub fn document(&self, doc: &DocId) -> Option<&DocumentRecord> {
        self.doc_index.get(doc).map(|&i| &self.documents.records()[i])
    }

    pub fn add_user(&mut self, user: UserId, group: Group, now: Timestamp) -> Result<()> {
        if self.user_groups.contains_key(&user) {
            return Err(ServiceError::UserExists(user));
        }
        self.users.append(UserAccount {
            user: user.clone(),
            group,
            created_at: secs(now),
        })?;
        self.user_groups.insert(user, group);
        Ok(())
    }

    /// The term vector of a registered paper, computed once from its text.
    pub fn vector(&mut self, doc: &DocId) -> Result<TermVector> {
        if let Some(v) = self.vectors.get(doc) {
            return Ok(v.clone());
        }
        let text = self.root.read_doc(doc)?;
        let v = vectorize(doc.clone(), &text, &self.stoplist);
        self.vectors.insert(doc.clone(), v.clone());
        Ok(v)
    }

    /// Registers a paper by URL, storing its text. Known URLs are not
    /// fetched again.
    pub fn register_document(
        &mut self,
        url: &str,
        text: Option<&str>,
        now: Timestamp,
    ) -> Result<DocId> {
        let doc_id = DocId::for_url(url);
        if self.doc_index.contains_key(&doc_id) {
            return Ok(doc_id);
        }
        let text = match text {
            Some(t) => t.to_owned(),
            None => self.fetcher.fetch(url)?,
        };
        let record = DocumentRecord {
            doc_id: doc_id.clone(),
            url: url.to_owned(),
            fetched_at: now.date_naive(),
        };
        // Validate before touching docs/.
        if record.url.contains(['\t', '\n', '\r']) || record.url.is_empty() {
            return Err(ServiceError::Invalid(format!("unusable url {url:?}")));
        }
        self.root.write_doc(&doc_id, &text)?;
        self.documents.append(record)?;
        self.doc_index.insert(doc_id.clone(), self.documents.len() - 1);
        self.vectors
            .insert(doc_id.clone(), vectorize(doc_id.clone(), &text, &self.stoplist));
        Ok(doc_id)
    }

    fn append_events(&mut self, events: Vec<FeedbackEvent>) -> Result<usize> {
        let mut fresh = Vec::new();
        let mut batch_keys = HashSet::new();
        for e in events {
            if !self.event_keys.contains(&e) && batch_keys.insert(e.clone()) {
                fresh.push(e);
            }
        }
        let n = fresh.len();
        self.events.append_all(fresh.clone())?;
        for e in &fresh {
            self.index_event(e);
        }
        Ok(n)
    }

    /// Records one event after validating it. Exact duplicates are skipped.
    pub fn record_event(&mut self, event: FeedbackEvent) -> Result<bool> {
        validate_event(
            &event,
            &self.taxonomies[event.group],
            self.user_groups.get(&event.user).copied(),
        )?;
        Ok(self.append_events(vec![event])? == 1)
    }

    /// Accepts paper URLs from a browse log. Filtered URLs are only counted.
    /// A bad entry is reported and skipped; the batch carries on.
    pub fn ingest_browse_log(&mut self, entries: &[BrowseEntry]) -> Result<IngestReport> {
        let mut report = IngestReport::default();
        for (index, entry) in entries.iter().enumerate() {
            match self.ingest_one(entry) {
                Ok(true) => report.accepted += 1,
                Ok(false) => report.filtered += 1,
                Err(ServiceError::Store(e)) => return Err(e.into()),
                Err(e) => report.errors.push(EntryError {
                    index,
                    message: e.to_string(),
                }),
            }
        }
        Ok(report)
    }

    fn ingest_one(&mut self, entry: &BrowseEntry) -> Result<bool> {
        let group = self.user_group(&entry.user)?;
        if !url_accepted(&entry.url, &self.config.accepted_suffixes) {
            return Ok(false);
        }
        let at = secs(entry.at);
        let doc_id = self.register_document(&entry.url, entry.text.as_deref(), at)?;
        let record = BrowseRecord {
            at,
            user: entry.user.clone(),
            doc_id: doc_id.clone(),
        };
        self.browses.append(record.clone())?;
        self.visited.entry(entry.user.clone()).or_default().insert(doc_id.clone());
        match self.current[group].get(&doc_id).and_then(|c| c.topic.clone()) {
            Some(topic) => {
                self.append_events(vec![browsed_event(&record, topic, group)])?;
            }
            None => self.unemitted.push(record),
        }
        Ok(true)
    }

    /// The user's set from the latest daily run. When `acknowledge` is set
    /// and this is the first serve of that set, one `recommended_seen`
    /// event per item is logged.
    pub fn serve_recommendations(
        &mut self,
        user: &UserId,
        now: Timestamp,
        acknowledge: bool,
    ) -> Result<RecommendationSet> {
        let group = self.user_group(user)?;
        let date = self.latest_daily.ok_or(ServiceError::NoSetComputed)?;
        let records = self.sets.get(&(user.clone(), date)).cloned().unwrap_or_default();
        let set = RecommendationSet {
            user: user.clone(),
            group,
            date,
            items: records
                .iter()
                .map(|r| Recommendation {
                    doc_id: r.doc_id.clone(),
                    topic: r.topic.clone(),
                    confidence: r.confidence,
                    score: r.score,
                    rank: r.rank,
                })
                .collect(),
        };
        if acknowledge && !self.served_keys.contains(&(user.clone(), date)) {
            let now = secs(now);
            let events = set
                .items
                .iter()
                .map(|item| FeedbackEvent {
                    at: now,
                    user: user.clone(),
                    kind: EventKind::RecommendedSeen,
                    topic: item.topic.clone(),
                    paper: Some(item.doc_id.clone()),
                    group,
                })
                .collect();
            self.served.append(ServedRecord {
                at: now,
                user: user.clone(),
                set_date: date,
            })?;
            self.served_keys.insert((user.clone(), date));
            self.append_events(events)?;
        }
        Ok(set)
    }

    /// Whether the set of `date` has been served to `user`.
    pub fn was_served(&self, user: &UserId, date: NaiveDate) -> bool {
        self.served_keys.contains(&(user.clone(), date))
    }

    pub fn submit_feedback(
        &mut self,
        user: &UserId,
        doc: &DocId,
        kind: FeedbackKind,
        corrected_topic: Option<TopicId>,
        now: Timestamp,
    ) -> Result<()> {
        let group = self.user_group(user)?;
        if !self.doc_index.contains_key(doc) {
            return Err(ServiceError::UnknownPaper(doc.clone()));
        }
        let last_recommended = self
            .recommended
            .get(user)
            .and_then(|recs| recs.iter().rev().find(|(d, _)| d == doc).map(|(_, date)| *date))
            .ok_or_else(|| ServiceError::NotRecommended {
                user: user.clone(),
                doc: doc.clone(),
            })?;
        let now = secs(now);
        let topic = match kind {
            FeedbackKind::Correction => {
                let topic = corrected_topic.ok_or(ServiceError::MissingCorrectedTopic)?;
                let tax = &self.taxonomies[group];
                if !tax.contains(&topic) {
                    return Err(ClassifierError::UnknownTopic(topic).into());
                }
                if tax.is_root(&topic) {
                    return Err(ClassifierError::RootTopic.into());
                }
                self.add_training_example(group, doc, topic.clone(), ExampleSource::Correction, now)?;
                topic
            }
            _ => match self.current[group].get(doc).and_then(|c| c.topic.clone()) {
                Some(t) => t,
                None => self.sets[&(user.clone(), last_recommended)]
                    .iter()
                    .find(|r| &r.doc_id == doc)
                    .map(|r| r.topic.clone())
                    .ok_or_else(|| ServiceError::Unclassified(doc.clone()))?,
            },
        };
        self.append_events(vec![FeedbackEvent {
            at: now,
            user: user.clone(),
            kind: kind.event_kind(),
            topic,
            paper: Some(doc.clone()),
            group,
        }])?;
        Ok(())
    }

    fn add_training_example(
        &mut self,
        group: Group,
        doc: &DocId,
        topic: TopicId,
        source: ExampleSource,
        now: Timestamp,
    ) -> Result<()> {
        let vector = self.vector(doc)?;
        let added_at = now.date_naive();
        // Validate against the taxonomy before anything is written.
        let mut next = self.training[group].clone();
        next.push(vector, topic.clone(), source, added_at, &self.taxonomies[group])?;
        self.training_logs[group].append(TrainingRecord {
            doc_id: doc.clone(),
            topic,
            source,
            added_at,
        })?;
        self.training[group] = next;
        Ok(())
    }

    /// Adds a labelled example to the user's group training set.
    pub fn submit_example(
        &mut self,
        user: &UserId,
        doc: ExampleDoc,
        topic: &TopicId,
        now: Timestamp,
    ) -> Result<DocId> {
        let group = self.user_group(user)?;
        self.add_example(group, doc, topic, ExampleSource::UserAdded, now)
    }

    /// Adds a labelled example to a group training set.
    pub fn add_example(
        &mut self,
        group: Group,
        doc: ExampleDoc,
        topic: &TopicId,
        source: ExampleSource,
        now: Timestamp,
    ) -> Result<DocId> {
        let tax = &self.taxonomies[group];
        if !tax.contains(topic) {
            return Err(ClassifierError::UnknownTopic(topic.clone()).into());
        }
        if tax.is_root(topic) {
            return Err(ClassifierError::RootTopic.into());
        }
        let now = secs(now);
        let doc_id = match doc {
            ExampleDoc::Url { url, text } => {
                if !url_accepted(&url, &self.config.accepted_suffixes) {
                    return Err(ServiceError::NotADocument(url));
                }
                self.register_document(&url, text.as_deref(), now)?
            }
            ExampleDoc::Known(id) => {
                if !self.doc_index.contains_key(&id) {
                    return Err(ServiceError::UnknownPaper(id));
                }
                id
            }
        };
        self.add_training_example(group, &doc_id, topic.clone(), source, now)?;
        Ok(doc_id)
    }

    /// Adds a topic to a group taxonomy. The hierarchical taxonomy is fixed
    /// unless `admin_override` is set.
    pub fn add_topic(
        &mut self,
        group: Group,
        label: &str,
        parent: Option<&TopicId>,
        admin_override: bool,
        now: Timestamp,
    ) -> Result<TopicId> {
        let (next, id) = self.taxonomies[group].add_topic(label, parent, admin_override)?;
        let node = next.node(&id).expect("new topic present");
        let record = TopicRecord {
            at: secs(now),
            group,
            topic: id.clone(),
            label: node.label.clone(),
            parent: node.parent.clone().expect("non-root topic"),
        };
        atomic_write(&self.root.taxonomy_path(group), next.to_file_string().as_bytes())?;
        self.topic_log.append(record)?;
        self.taxonomies[group] = next;
        Ok(id)
    }

    pub fn run_cycle(&mut self, phase: Phase, as_of: NaiveDate, now: Timestamp) -> Result<CycleReport> {
        let report = match phase {
            Phase::Nightly => self.run_nightly(as_of)?,
            Phase::Daily => self.run_daily(as_of)?,
        };
        let job = JobRecord {
            as_of,
            phase,
            finished_at: secs(now),
        };
        self.jobs.append(job.clone())?;
        self.index_job(&job);
        Ok(report)
    }

    fn run_nightly(&mut self, as_of: NaiveDate) -> Result<CycleReport> {
        let mut report = CycleReport::new(Phase::Nightly, as_of);
        for group in Group::ALL {
            let set = &self.training[group];
            if set.is_empty() {
                self.committees[group] = None;
                continue;
            }
            let committee =
                train_boost(set, self.config.boost_rounds, self.config.k, self.config.seed)?;
            atomic_write(
                &self.root.committee_path(group),
                CommitteeRecord::from_committee(&committee).encode().as_bytes(),
            )?;
            report.trained.push(TrainReport {
                group: Some(group),
                examples: set.len(),
                rounds_completed: committee.rounds_completed(),
            });
            self.committees[group] = Some(committee);
        }

        let needs = |svc: &Self, doc: &DocId, group: Group| {
            svc.committees[group].is_some()
                && svc.current[group].get(doc).is_none_or(|c| c.topic.is_none())
        };
        let pending_ids: Vec<DocId> = self
            .documents
            .records()
            .iter()
            .map(|d| d.doc_id.clone())
            .filter(|d| Group::ALL.iter().any(|&g| needs(self, d, g)))
            .collect();
        let mut pending = Vec::with_capacity(pending_ids.len());
        for id in &pending_ids {
            pending.push(self.vector(id)?);
        }
        let committees: Vec<&BoostedCommittee> =
            Group::ALL.iter().filter_map(|&g| self.committees[g].as_ref()).collect();
        let records = nightly_classify(&pending, &committees, as_of, |d, g| needs(self, d, g));
        report.classified = records.iter().filter(|r| r.topic.is_some()).count();
        report.unclassified = records.len() - report.classified;
        self.classified.append_all(records.clone())?;
        for r in records {
            self.current[r.group].insert(r.doc_id.clone(), r);
        }

        let mut events = Vec::new();
        let mut still_waiting = Vec::new();
        for b in std::mem::take(&mut self.unemitted) {
            let group = self.user_groups[&b.user];
            match self.current[group].get(&b.doc_id).and_then(|c| c.topic.clone()) {
                Some(topic) => events.push(browsed_event(&b, topic, group)),
                None => still_waiting.push(b),
            }
        }
        self.unemitted = still_waiting;
        report.browsed_events = self.append_events(events)?;
        Ok(report)
    }

    fn run_daily(&mut self, as_of: NaiveDate) -> Result<CycleReport> {
        if !self.nightly_done.contains(&as_of) {
            return Err(ServiceError::PhaseOrder(as_of));
        }
        let mut report = CycleReport::new(Phase::Daily, as_of);
        let papers: PerGroup<Vec<ClassifiedPaper>> =
            PerGroup::from_fn(|g| self.current[g].values().cloned().collect());
        let events = self.events.snapshot();
        let mut records = Vec::new();
        for account in self.users.records() {
            let group = account.group;
            let profile = compute_profile(
                &events,
                &self.taxonomies[group],
                &account.user,
                as_of,
                &self.config.profile,
            );
            report.profiles += 1;
            let seen = self.seen(&account.user, as_of);
            let set = daily_recommend(
                &profile,
                group,
                &papers[group],
                &seen,
                self.config.n_recommendations,
                self.config.n_topics,
            );
            records.extend(set.records());
        }
        report.recommendations = records.len();
        self.recommendations.append_all(records.clone())?;
        // A rerun for the same date replaces a user's set only when it
        // produces items; that is all a replay of the log can tell apart.
        for r in &records {
            self.index_recommendation(r);
        }
        Ok(report)
    }

    /// Papers excluded from `user`'s recommendations on `as_of`.
    fn seen(&self, user: &UserId, as_of: NaiveDate) -> HashSet<DocId> {
        let mut seen = self.visited.get(user).cloned().unwrap_or_default();
        if let Some(recs) = self.recommended.get(user) {
            for (doc, date) in recs {
                if *date >= as_of {
                    continue;
                }
                let within = self
                    .config
                    .recommend_cooldown_days
                    .is_none_or(|days| (as_of - *date).num_days() < i64::from(days));
                if within {
                    seen.insert(doc.clone());
                }
            }
        }
        seen
    }
}

fn browsed_event(b: &BrowseRecord, topic: TopicId, group: Group) -> FeedbackEvent {
    FeedbackEvent {
        at: b.at,
        user: b.user.clone(),
        kind: EventKind::Browsed,
        topic,
        paper: Some(b.doc_id.clone()),
        group,
    }
}
