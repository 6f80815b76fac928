//! Evaluation metrics over the event log, and the synthetic-user simulation.
//!
//! A recommended topic is counted once per (user, day, topic): the day's
//! `recommended_seen` events define the units, and a unit is bad when the
//! user's last rating of that topic on that day was `not interesting`.
//! Jumps are good when their (user, day, topic) is not bad. Jump and
//! correction ratios divide by the number of recommended papers seen.

pub mod corpus;
mod simulate;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use thiserror::Error;

pub use simulate::{simulate, SimConfig, SimError, SimOutcome};

use crate::error::{split_fields, FieldError, ParseError};
use crate::ids::{format_date, parse_date, Group, TopicId, UserId};
use crate::profiler::{EventKind, FeedbackEvent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    GoodTopic,
    GoodJump,
    Correction,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::GoodTopic, Metric::GoodJump, Metric::Correction];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::GoodTopic => "good_topic_ratio",
            Metric::GoodJump => "good_jump_ratio",
            Metric::Correction => "correction_ratio",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = FieldError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| FieldError::Unknown {
                what: "metric",
                value: s.to_owned(),
            })
    }
}

/// Cumulative values of one metric for one group, one point per date.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricSeries {
    pub group: Group,
    pub metric: Metric,
    pub points: Vec<(NaiveDate, f64)>,
}

impl MetricSeries {
    pub fn last(&self) -> Option<f64> {
        self.points.last().map(|p| p.1)
    }
}

/// The three series for both groups.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub series: Vec<MetricSeries>,
}

const TSV_HEADER: &str = "date\tgroup\tmetric\tvalue";

impl MetricReport {
    pub fn get(&self, group: Group, metric: Metric) -> &MetricSeries {
        self.series
            .iter()
            .find(|s| s.group == group && s.metric == metric)
            .expect("report holds every group and metric")
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(TSV_HEADER);
        out.push('\n');
        for s in &self.series {
            for (date, value) in &s.points {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\n",
                    format_date(date),
                    s.group,
                    s.metric,
                    value
                ));
            }
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self, ParseError> {
        let mut series: BTreeMap<(Group, Metric), Vec<(NaiveDate, f64)>> = BTreeMap::new();
        for group in Group::ALL {
            for metric in Metric::ALL {
                series.insert((group, metric), Vec::new());
            }
        }
        for (i, line) in text.lines().enumerate() {
            let no = i + 1;
            if line == TSV_HEADER || line.is_empty() {
                continue;
            }
            let [date, group, metric, value] = split_fields::<4>(line, no)?;
            let date = parse_date(date).map_err(|e| ParseError::new(no, e.to_string()))?;
            let group: Group = group.parse().map_err(|e: FieldError| ParseError::new(no, e.to_string()))?;
            let metric: Metric =
                metric.parse().map_err(|e: FieldError| ParseError::new(no, e.to_string()))?;
            let value: f64 = value
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| ParseError::new(no, format!("bad ratio {value:?}")))?;
            let points = series.get_mut(&(group, metric)).expect("all keys present");
            if points.last().is_some_and(|(d, _)| *d >= date) {
                return Err(ParseError::new(no, "dates must increase within a series"));
            }
            points.push((date, value));
        }
        Ok(Self {
            series: series
                .into_iter()
                .map(|((group, metric), points)| MetricSeries {
                    group,
                    metric,
                    points,
                })
                .collect(),
        })
    }
}

fn relevant(kind: EventKind) -> bool {
    !matches!(kind, EventKind::Browsed)
}

/// Ordering used for events that share a date.
fn event_order(a: &FeedbackEvent, b: &FeedbackEvent) -> std::cmp::Ordering {
    (a.at, &a.user, a.kind).cmp(&(b.at, &b.user, b.kind))
}

/// Recomputes every series from a log snapshot, considering events up to
/// and including `until`.
pub fn evaluate(events: &[FeedbackEvent], until: NaiveDate) -> MetricReport {
    let mut series = Vec::new();
    for group in Group::ALL {
        for metric in Metric::ALL {
            series.push(batch_series(events, group, metric, until));
        }
    }
    MetricReport { series }
}

pub fn good_topic_ratio(events: &[FeedbackEvent], group: Group, until: NaiveDate) -> MetricSeries {
    batch_series(events, group, Metric::GoodTopic, until)
}

pub fn good_jump_ratio(events: &[FeedbackEvent], group: Group, until: NaiveDate) -> MetricSeries {
    batch_series(events, group, Metric::GoodJump, until)
}

pub fn correction_ratio(events: &[FeedbackEvent], group: Group, until: NaiveDate) -> MetricSeries {
    batch_series(events, group, Metric::Correction, until)
}

type UnitKey = (UserId, NaiveDate, TopicId);

/// Batch route: for each date, count over the whole prefix of the log.
fn batch_series(
    events: &[FeedbackEvent],
    group: Group,
    metric: Metric,
    until: NaiveDate,
) -> MetricSeries {
    let mut mine: Vec<&FeedbackEvent> = events
        .iter()
        .filter(|e| e.group == group && relevant(e.kind) && e.date() <= until)
        .collect();
    mine.sort_by(|a, b| event_order(a, b));

    // Last rating per (user, day, topic) over the full day.
    let mut last_rating: HashMap<UnitKey, EventKind> = HashMap::new();
    for e in &mine {
        if matches!(e.kind, EventKind::RatedInteresting | EventKind::RatedNotInteresting) {
            last_rating.insert((e.user.clone(), e.date(), e.topic.clone()), e.kind);
        }
    }
    let is_bad = |k: &UnitKey| last_rating.get(k) == Some(&EventKind::RatedNotInteresting);

    let dates: Vec<NaiveDate> = {
        let mut d: Vec<NaiveDate> = mine.iter().map(|e| e.date()).collect();
        d.dedup();
        d
    };
    let mut points = Vec::new();
    for date in dates {
        let prefix = mine.iter().filter(|e| e.date() <= date);
        let (num, den) = match metric {
            Metric::GoodTopic => {
                let units: HashSet<UnitKey> = prefix
                    .filter(|e| e.kind == EventKind::RecommendedSeen)
                    .map(|e| (e.user.clone(), e.date(), e.topic.clone()))
                    .collect();
                (units.iter().filter(|k| !is_bad(k)).count(), units.len())
            }
            Metric::GoodJump => {
                let mut good = 0;
                let mut seen = 0;
                for e in prefix {
                    match e.kind {
                        EventKind::RecommendedSeen => seen += 1,
                        EventKind::Jump
                            if !is_bad(&(e.user.clone(), e.date(), e.topic.clone())) =>
                        {
                            good += 1
                        }
                        _ => {}
                    }
                }
                (good, seen)
            }
            Metric::Correction => {
                let mut corrections = 0;
                let mut seen = 0;
                for e in prefix {
                    match e.kind {
                        EventKind::RecommendedSeen => seen += 1,
                        EventKind::Correction => corrections += 1,
                        _ => {}
                    }
                }
                (corrections, seen)
            }
        };
        if den > 0 {
            points.push((date, num as f64 / den as f64));
        }
    }
    MetricSeries {
        group,
        metric,
        points,
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("event dated {got} arrived after day {open} was closed")]
pub struct OutOfOrder {
    pub open: NaiveDate,
    pub got: NaiveDate,
}

#[derive(Default, Clone, Debug)]
struct Counts {
    units: usize,
    bad_units: usize,
    seen: usize,
    good_jumps: usize,
    corrections: usize,
}

/// Online route: consumes events as they are logged, closing a day when the
/// first event of a later day arrives.
#[derive(Clone, Debug, Default)]
pub struct MetricAccumulator {
    open_day: Option<NaiveDate>,
    buffer: Vec<FeedbackEvent>,
    counts: HashMap<Group, Counts>,
    points: BTreeMap<(Group, Metric), Vec<(NaiveDate, f64)>>,
}

impl MetricAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: &FeedbackEvent) -> Result<(), OutOfOrder> {
        if !relevant(event.kind) {
            return Ok(());
        }
        let day = event.date();
        match self.open_day {
            Some(open) if day < open => return Err(OutOfOrder { open, got: day }),
            Some(open) if day > open => self.close_day(),
            _ => {}
        }
        self.open_day = Some(day);
        self.buffer.push(event.clone());
        Ok(())
    }

    fn close_day(&mut self) {
        let Some(day) = self.open_day.take() else {
            return;
        };
        let mut events = std::mem::take(&mut self.buffer);
        events.sort_by(event_order);
        for group in Group::ALL {
            let todays: Vec<&FeedbackEvent> = events.iter().filter(|e| e.group == group).collect();
            if todays.is_empty() {
                continue;
            }
            let mut verdict: HashMap<(&UserId, &TopicId), bool> = HashMap::new();
            for e in &todays {
                match e.kind {
                    EventKind::RatedInteresting => {
                        verdict.insert((&e.user, &e.topic), false);
                    }
                    EventKind::RatedNotInteresting => {
                        verdict.insert((&e.user, &e.topic), true);
                    }
                    _ => {}
                }
            }
            let bad = |u: &UserId, t: &TopicId| verdict.get(&(u, t)).copied().unwrap_or(false);
            let c = self.counts.entry(group).or_default();
            let mut units: HashSet<(&UserId, &TopicId)> = HashSet::new();
            for e in &todays {
                match e.kind {
                    EventKind::RecommendedSeen => {
                        c.seen += 1;
                        if units.insert((&e.user, &e.topic)) {
                            c.units += 1;
                            if bad(&e.user, &e.topic) {
                                c.bad_units += 1;
                            }
                        }
                    }
                    EventKind::Jump if !bad(&e.user, &e.topic) => c.good_jumps += 1,
                    EventKind::Correction => c.corrections += 1,
                    _ => {}
                }
            }
            let c = c.clone();
            if c.units > 0 {
                let v = (c.units - c.bad_units) as f64 / c.units as f64;
                self.points.entry((group, Metric::GoodTopic)).or_default().push((day, v));
            }
            if c.seen > 0 {
                self.points
                    .entry((group, Metric::GoodJump))
                    .or_default()
                    .push((day, c.good_jumps as f64 / c.seen as f64));
                self.points
                    .entry((group, Metric::Correction))
                    .or_default()
                    .push((day, c.corrections as f64 / c.seen as f64));
            }
        }
    }

    /// Closes the open day and returns the series so far.
    pub fn finish(&mut self) -> MetricReport {
        self.close_day();
        let mut series = Vec::new();
        for group in Group::ALL {
            for metric in Metric::ALL {
                series.push(MetricSeries {
                    group,
                    metric,
                    points: self.points.get(&(group, metric)).cloned().unwrap_or_default(),
                });
            }
        }
        MetricReport { series }
    }
}
