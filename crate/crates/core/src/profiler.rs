//! Per-user interest profiles from the feedback event log.
//!
//! `interest(t) = sum_e w(kind) * p^d(e, t) / (1 + r * age_days)`, where `d` is
//! the distance from the event's topic up to `t` and `p` depends on the
//! taxonomy mode.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{field, split_fields, FieldError, ParseError};
use crate::ids::{format_timestamp, parse_timestamp, DocId, Group, Timestamp, TopicId, UserId};
use crate::taxonomy::{Taxonomy, TaxonomyMode};

/// Number of current topics recommendations are drawn from.
pub const DEFAULT_TOP_TOPICS: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("user {user} belongs to the {expected} group, not {got}")]
    WrongGroup {
        user: UserId,
        expected: Group,
        got: Group,
    },
    #[error("topic {0} is not in the group taxonomy")]
    UnknownTopic(TopicId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Browsed,
    RatedInteresting,
    RatedNotInteresting,
    Jump,
    Correction,
    RecommendedSeen,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::Browsed,
        EventKind::RatedInteresting,
        EventKind::RatedNotInteresting,
        EventKind::Jump,
        EventKind::Correction,
        EventKind::RecommendedSeen,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Browsed => "browsed",
            EventKind::RatedInteresting => "rated_interesting",
            EventKind::RatedNotInteresting => "rated_not_interesting",
            EventKind::Jump => "jump",
            EventKind::Correction => "correction",
            EventKind::RecommendedSeen => "recommended_seen",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = FieldError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| FieldError::Unknown {
                what: "event kind",
                value: s.to_owned(),
            })
    }
}

/// One line of `events.log`:
/// `<timestamp>\t<user>\t<kind>\t<topic_id>\t<doc_id or ->\t<group>`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FeedbackEvent {
    pub at: Timestamp,
    pub user: UserId,
    pub kind: EventKind,
    pub topic: TopicId,
    pub paper: Option<DocId>,
    pub group: Group,
}

impl FeedbackEvent {
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            format_timestamp(&self.at),
            self.user,
            self.kind,
            self.topic,
            self.paper.as_ref().map_or("-", DocId::as_str),
            self.group
        )
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, ParseError> {
        let [at, user, kind, topic, paper, group] = split_fields::<6>(line, line_no)?;
        Ok(Self {
            at: field(line_no, "timestamp", parse_timestamp(at))?,
            user: field(line_no, "user", user.parse())?,
            kind: field(line_no, "kind", kind.parse())?,
            topic: field(line_no, "topic", topic.parse())?,
            paper: if paper == "-" {
                None
            } else {
                Some(field(line_no, "doc_id", paper.parse())?)
            },
            group: field(line_no, "group", group.parse())?,
        })
    }

    pub fn date(&self) -> NaiveDate {
        self.at.date_naive()
    }
}

/// Checks an event against its group's taxonomy and the user's group.
pub fn validate_event(
    event: &FeedbackEvent,
    taxonomy: &Taxonomy,
    user_group: Option<Group>,
) -> Result<(), ProfileError> {
    match user_group {
        None => return Err(ProfileError::UnknownUser(event.user.clone())),
        Some(g) if g != event.group => {
            return Err(ProfileError::WrongGroup {
                user: event.user.clone(),
                expected: g,
                got: event.group,
            })
        }
        Some(_) => {}
    }
    if !taxonomy.contains(&event.topic) {
        return Err(ProfileError::UnknownTopic(event.topic.clone()));
    }
    Ok(())
}

/// In-memory append-only event log with exact-duplicate suppression.
#[derive(Clone, Debug, Default)]
pub struct EventLog {
    events: Vec<FeedbackEvent>,
    keys: HashSet<FeedbackEvent>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a validated event. Returns `false` when an identical event
    /// is already present and the log is left unchanged.
    pub fn record(
        &mut self,
        event: FeedbackEvent,
        taxonomy: &Taxonomy,
        user_group: Option<Group>,
    ) -> Result<bool, ProfileError> {
        validate_event(&event, taxonomy, user_group)?;
        Ok(self.insert(event))
    }

    /// Appends without validation, still skipping exact duplicates.
    pub fn insert(&mut self, event: FeedbackEvent) -> bool {
        if !self.keys.insert(event.clone()) {
            return false;
        }
        self.events.push(event);
        true
    }

    pub fn contains(&self, event: &FeedbackEvent) -> bool {
        self.keys.contains(event)
    }

    pub fn events(&self) -> &[FeedbackEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Interest units credited per event kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventWeights {
    pub browsed: f64,
    pub jump: f64,
    pub rated_interesting: f64,
    pub rated_not_interesting: f64,
    pub correction: f64,
    pub recommended_seen: f64,
}

impl Default for EventWeights {
    fn default() -> Self {
        Self {
            browsed: 1.0,
            jump: 2.0,
            rated_interesting: 10.0,
            rated_not_interesting: -10.0,
            correction: 1.0,
            recommended_seen: 0.0,
        }
    }
}

impl EventWeights {
    pub fn weight(&self, kind: EventKind) -> f64 {
        match kind {
            EventKind::Browsed => self.browsed,
            EventKind::Jump => self.jump,
            EventKind::RatedInteresting => self.rated_interesting,
            EventKind::RatedNotInteresting => self.rated_not_interesting,
            EventKind::Correction => self.correction,
            EventKind::RecommendedSeen => self.recommended_seen,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub weights: EventWeights,
    /// `r` in `1 / (1 + r * age_days)`.
    pub decay_rate: f64,
    /// Share of interest passed up each is-a level in hierarchical mode.
    pub ontology_propagation: f64,
    /// The same factor for flat taxonomies; 0 keeps interest on the topic.
    pub flat_propagation: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            weights: EventWeights::default(),
            decay_rate: 1.0,
            ontology_propagation: 0.5,
            flat_propagation: 0.0,
        }
    }
}

impl ProfileConfig {
    pub fn propagation(&self, mode: TaxonomyMode) -> f64 {
        match mode {
            TaxonomyMode::Flat => self.flat_propagation,
            TaxonomyMode::Hierarchical => self.ontology_propagation,
        }
    }

    pub fn decay(&self, age_days: i64) -> f64 {
        1.0 / (1.0 + self.decay_rate * age_days as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterestProfile {
    pub user: UserId,
    pub computed_at: NaiveDate,
    /// Topics with nonzero accumulated interest, including the root when
    /// interest propagates to it.
    pub interest: BTreeMap<TopicId, f64>,
    root: TopicId,
}

impl InterestProfile {
    pub fn empty(user: UserId, computed_at: NaiveDate, root: TopicId) -> Self {
        Self {
            user,
            computed_at,
            interest: BTreeMap::new(),
            root,
        }
    }

    pub fn get(&self, topic: &TopicId) -> f64 {
        self.interest.get(topic).copied().unwrap_or(0.0)
    }

    pub fn root(&self) -> &TopicId {
        &self.root
    }

    /// Interest excluding the synthetic root.
    pub fn topics(&self) -> impl Iterator<Item = (&TopicId, f64)> {
        self.interest
            .iter()
            .filter(move |(t, _)| **t != self.root)
            .map(|(t, v)| (t, *v))
    }

    /// Sets one topic's interest; used to build what-if profiles.
    pub fn set(&mut self, topic: TopicId, value: f64) {
        if value == 0.0 {
            self.interest.remove(&topic);
        } else {
            self.interest.insert(topic, value);
        }
    }
}

/// Whole days from `event` to `now`; negative when the event is later.
pub fn age_days(event: &FeedbackEvent, now: NaiveDate) -> i64 {
    (now - event.date()).num_days()
}

/// Profile of `user` as of `now`. Events dated after `now` and events on
/// topics no longer in the taxonomy are ignored.
pub fn compute_profile(
    events: &[FeedbackEvent],
    taxonomy: &Taxonomy,
    user: &UserId,
    now: NaiveDate,
    config: &ProfileConfig,
) -> InterestProfile {
    let p = config.propagation(taxonomy.mode());
    let mut interest: BTreeMap<TopicId, f64> = BTreeMap::new();
    for e in events.iter().filter(|e| &e.user == user) {
        let age = age_days(e, now);
        if age < 0 || !taxonomy.contains(&e.topic) {
            continue;
        }
        let w = config.weights.weight(e.kind);
        if w == 0.0 {
            continue;
        }
        let decay = config.decay(age);
        *interest.entry(e.topic.clone()).or_insert(0.0) += w * decay;
        if p == 0.0 {
            continue;
        }
        let mut factor = 1.0;
        for ancestor in taxonomy.ancestors(&e.topic).unwrap_or_default() {
            factor *= p;
            *interest.entry(ancestor).or_insert(0.0) += w * factor * decay;
        }
    }
    interest.retain(|_, v| *v != 0.0);
    InterestProfile {
        user: user.clone(),
        computed_at: now,
        interest,
        root: taxonomy.root().clone(),
    }
}

/// The `n` highest strictly positive non-root topics, by interest then id.
pub fn top_topics(profile: &InterestProfile, n: usize) -> Vec<TopicId> {
    let mut positive: Vec<(&TopicId, f64)> = profile.topics().filter(|(_, v)| *v > 0.0).collect();
    positive.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    positive.into_iter().take(n).map(|(t, _)| t.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn hier() -> Taxonomy {
        Taxonomy::parse(
            "top\tTop\t-\nm\tM\ttop\nt\tT\tm\nu\tU\ttop\n",
            TaxonomyMode::Hierarchical,
        )
        .unwrap()
    }

    fn flat() -> Taxonomy {
        Taxonomy::parse("top\tTop\t-\nm\tM\ttop\nt\tT\ttop\nu\tU\ttop\n", TaxonomyMode::Flat)
            .unwrap()
    }

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2002, 3, d).unwrap()
    }

    fn ev(d: u32, kind: EventKind, topic: &str) -> FeedbackEvent {
        FeedbackEvent {
            at: Utc.with_ymd_and_hms(2002, 3, d, 9, 30, 0).unwrap(),
            user: UserId::new("u1").unwrap(),
            kind,
            topic: TopicId::new(topic).unwrap(),
            paper: None,
            group: Group::Ontology,
        }
    }

    fn id(s: &str) -> TopicId {
        TopicId::new(s).unwrap()
    }

    #[test]
    fn event_line_round_trip() {
        let mut e = ev(4, EventKind::Jump, "t");
        e.paper = Some(DocId::new("d9").unwrap());
        let line = e.to_line();
        assert_eq!(line, "2002-03-04T09:30:00Z\tu1\tjump\tt\td9\tontology");
        assert_eq!(FeedbackEvent::parse_line(&line, 1).unwrap(), e);
        let e = ev(4, EventKind::RecommendedSeen, "t");
        assert_eq!(FeedbackEvent::parse_line(&e.to_line(), 1).unwrap(), e);
        assert!(FeedbackEvent::parse_line("2002-03-04T09:30:00Z\tu1\tjumped\tt\t-\tflat", 1).is_err());
    }

    #[test]
    fn event_log_dedups_and_validates() {
        let mut log = EventLog::new();
        let tax = hier();
        let e = ev(1, EventKind::Browsed, "t");
        assert_eq!(log.record(e.clone(), &tax, Some(Group::Ontology)), Ok(true));
        assert_eq!(log.record(e.clone(), &tax, Some(Group::Ontology)), Ok(false));
        assert_eq!(log.len(), 1);
        assert!(matches!(
            log.record(ev(1, EventKind::Browsed, "zz"), &tax, Some(Group::Ontology)),
            Err(ProfileError::UnknownTopic(_))
        ));
        assert!(matches!(
            log.record(ev(2, EventKind::Browsed, "t"), &tax, None),
            Err(ProfileError::UnknownUser(_))
        ));
        assert!(matches!(
            log.record(ev(2, EventKind::Browsed, "t"), &tax, Some(Group::Flat)),
            Err(ProfileError::WrongGroup { .. })
        ));
    }

    #[test]
    fn profile_examples() {
        let cfg = ProfileConfig::default();
        let u = UserId::new("u1").unwrap();
        assert!(compute_profile(&[], &flat(), &u, day(1), &cfg).interest.is_empty());

        let today = [ev(10, EventKind::RatedInteresting, "t")];
        let p = compute_profile(&today, &flat(), &u, day(10), &cfg);
        assert_eq!(p.interest, BTreeMap::from([(id("t"), 10.0)]));

        let p = compute_profile(&today, &hier(), &u, day(10), &cfg);
        assert_eq!(
            p.interest,
            BTreeMap::from([(id("t"), 10.0), (id("m"), 5.0), (id("top"), 2.5)])
        );

        let p = compute_profile(&[ev(1, EventKind::RatedInteresting, "t")], &flat(), &u, day(10), &cfg);
        assert_eq!(p.interest, BTreeMap::from([(id("t"), 1.0)]));
    }

    #[test]
    fn future_events_and_other_users_are_ignored() {
        let cfg = ProfileConfig::default();
        let mut other = ev(1, EventKind::Jump, "t");
        other.user = UserId::new("u2").unwrap();
        let events = [ev(5, EventKind::Jump, "t"), other];
        let p = compute_profile(&events, &flat(), &UserId::new("u1").unwrap(), day(4), &cfg);
        assert!(p.interest.is_empty());
    }

    #[test]
    fn top_topics_rules() {
        let mut p = InterestProfile::empty(UserId::new("u").unwrap(), day(1), id("top"));
        for (t, v) in [("a", 5.0), ("b", 3.0), ("c", 1.0), ("d", -2.0), ("top", 9.0)] {
            p.set(id(t), v);
        }
        assert_eq!(top_topics(&p, 3), [id("a"), id("b"), id("c")]);
        assert_eq!(top_topics(&p, 10).len(), 3);

        let mut neg = InterestProfile::empty(UserId::new("u").unwrap(), day(1), id("top"));
        neg.set(id("a"), -1.0);
        assert!(top_topics(&neg, 3).is_empty());

        let mut tie = InterestProfile::empty(UserId::new("u").unwrap(), day(1), id("top"));
        tie.set(id("b"), 5.0);
        tie.set(id("a"), 5.0);
        assert_eq!(top_topics(&tie, 1), [id("a")]);
    }
}
