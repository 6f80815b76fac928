//! A seeded trial with synthetic users in matched pairs.
//!
//! Both members of a pair share the same hidden interests and make the same
//! draws for the same situation: every random decision is keyed by
//! (pair, day, purpose, subject), never by the user or the group. The only
//! difference between twins is the group the service places them in.
//!
//! Daily order: nightly cycle, daily cycle, users view and react to their
//! sets, users browse (classified the next night).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate, NaiveTime, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::corpus::{Corpus, CorpusConfig, SyntheticPaper};
use super::{MetricAccumulator, MetricReport, OutOfOrder};
use crate::classifier::ExampleSource;
use crate::config::Config;
use crate::fetch::NoFetcher;
use crate::ids::{DocId, Group, Timestamp, TopicId, UserId};
use crate::service::{BrowseEntry, ExampleDoc, FeedbackKind, Service, ServiceError};
use crate::store::{atomic_write, Durability, Phase};
use crate::taxonomy::{Taxonomy, TaxonomyMode, SAMPLE_HIERARCHY};

pub const METRICS_FILE: &str = "metrics.tsv";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("simulation: {0}")]
    Invalid(String),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    OutOfOrder(#[from] OutOfOrder),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub seed: u64,
    pub pairs: usize,
    pub days: usize,
    pub start: NaiveDate,
    pub taxonomy: String,
    pub corpus: CorpusConfig,
    pub interests_per_user: usize,
    pub browses_per_day: usize,
    /// Chance that a browse lands on a paper the user cares about.
    pub browse_focus: f64,
    pub view_probability: f64,
    /// Chance that a shown topic gets rated at all.
    pub rating_probability: f64,
    /// Chance that a rating comes out the wrong way.
    pub rating_noise: f64,
    /// Topics with at least this affinity are rated interesting.
    pub good_affinity: f64,
    pub correction_probability: f64,
    pub service: Config,
    pub durability: Durability,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            pairs: 10,
            days: 45,
            start: NaiveDate::from_ymd_opt(2002, 1, 7).expect("valid date"),
            taxonomy: SAMPLE_HIERARCHY.to_owned(),
            corpus: CorpusConfig::default(),
            interests_per_user: 2,
            browses_per_day: 3,
            browse_focus: 0.8,
            view_probability: 0.7,
            rating_probability: 0.6,
            rating_noise: 0.05,
            good_affinity: 0.4,
            correction_probability: 0.1,
            service: Config::default(),
            durability: Durability::Buffered,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<(), SimError> {
        let probabilities = [
            self.browse_focus,
            self.view_probability,
            self.rating_probability,
            self.rating_noise,
            self.correction_probability,
        ];
        if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(SimError::Invalid("probabilities must be in [0, 1]".into()));
        }
        if self.pairs == 0 || self.days == 0 || self.interests_per_user == 0 {
            return Err(SimError::Invalid("pairs, days and interests must be at least 1".into()));
        }
        if self.corpus.papers == 0 {
            return Err(SimError::Invalid("the corpus needs papers".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SimOutcome {
    /// Series from the online accumulator.
    pub report: MetricReport,
    pub report_path: PathBuf,
    pub events: usize,
    pub last_day: NaiveDate,
}

#[derive(Clone, Copy)]
enum Purpose {
    Interests = 1,
    Browse,
    View,
    Rate,
    Jump,
    Correct,
}

fn mix(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn fnv(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

fn draw(seed: u64, pair: usize, day: usize, purpose: Purpose, subject: u64) -> ChaCha8Rng {
    let mut h = mix(seed);
    for part in [pair as u64, day as u64, purpose as u64, subject] {
        h = mix(h ^ part);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Hidden preferences of a pair.
struct Persona {
    affinity: BTreeMap<TopicId, f64>,
    /// Indices of papers on topics the persona cares about.
    favourites: Vec<usize>,
}

impl Persona {
    fn affinity(&self, topic: &TopicId) -> f64 {
        self.affinity.get(topic).copied().unwrap_or(0.0)
    }
}

fn persona(config: &SimConfig, tax: &Taxonomy, papers: &[SyntheticPaper], pair: usize) -> Persona {
    let mut rng = draw(config.seed, pair, 0, Purpose::Interests, 0);
    let leaves: Vec<&TopicId> = tax
        .topics()
        .filter(|t| !tax.is_root(t) && tax.children(t).next().is_none())
        .collect();
    let mut affinity = BTreeMap::new();
    let mut previous: Option<&TopicId> = None;
    for i in 0..config.interests_per_user {
        // Second and later interests stay in the same area half the time.
        let same_area: Vec<&TopicId> = previous
            .and_then(|p| tax.node(p).and_then(|n| n.parent.as_ref()))
            .map(|area| {
                tax.children(area)
                    .filter(|c| !affinity.contains_key(*c))
                    .collect()
            })
            .unwrap_or_default();
        let pool: Vec<&TopicId> = if !same_area.is_empty() && rng.random_bool(0.5) {
            same_area
        } else {
            leaves.iter().copied().filter(|l| !affinity.contains_key(*l)).collect()
        };
        let Some(&leaf) = pool.get(rng.random_range(0..pool.len().max(1))) else {
            break;
        };
        let a = if i == 0 {
            rng.random_range(0.7..=1.0)
        } else {
            rng.random_range(0.5..=0.9)
        };
        affinity.insert(leaf.clone(), a);
        previous = Some(leaf);
    }
    let leaves_chosen: Vec<(TopicId, f64)> = affinity.iter().map(|(t, a)| (t.clone(), *a)).collect();
    for (leaf, a) in leaves_chosen {
        if let Some(area) = tax.node(&leaf).and_then(|n| n.parent.clone()) {
            if !tax.is_root(&area) {
                let e = affinity.entry(area).or_insert(0.0);
                *e = f64::max(*e, 0.6 * a);
            }
        }
    }
    let favourites = papers
        .iter()
        .enumerate()
        .filter(|(_, p)| affinity.contains_key(&p.topic))
        .map(|(i, _)| i)
        .collect();
    Persona {
        affinity,
        favourites,
    }
}

fn at(date: NaiveDate, hour: u32, offset_secs: i64) -> Timestamp {
    Utc.from_utc_datetime(&date.and_time(NaiveTime::from_hms_opt(hour, 0, 0).expect("valid hour")))
        + Duration::seconds(offset_secs)
}

fn user_id(group: Group, pair: usize) -> UserId {
    let prefix = match group {
        Group::Flat => "flat",
        Group::Ontology => "onto",
    };
    UserId::new(format!("{prefix}-{:02}", pair + 1)).expect("valid user id")
}

/// Runs the trial in `dir`, which must be empty or absent, and writes the
/// metric series to `dir/metrics.tsv`.
pub fn simulate(config: &SimConfig, dir: &Path) -> Result<SimOutcome, SimError> {
    config.validate()?;
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| SimError::Io { path, source }
    };
    if dir.exists() && std::fs::read_dir(dir).map_err(io(dir))?.next().is_some() {
        return Err(SimError::Invalid(format!("{} is not empty", dir.display())));
    }
    let ontology = Taxonomy::parse(&config.taxonomy, TaxonomyMode::Hierarchical)
        .map_err(|e| SimError::Invalid(e.to_string()))?;
    let flat = ontology.flattened();
    let corpus = Corpus::generate(&ontology, &config.corpus);
    let by_doc: BTreeMap<DocId, usize> = corpus
        .papers
        .iter()
        .enumerate()
        .map(|(i, p)| (DocId::for_url(&p.url), i))
        .collect();

    let mut service_config = config.service.clone();
    service_config.seed = config.seed;
    let mut service = Service::init(
        dir,
        service_config,
        &flat,
        &ontology,
        Box::new(NoFetcher),
        config.durability,
    )?;

    let setup = at(config.start - Duration::days(1), 8, 0);
    for group in Group::ALL {
        for pair in 0..config.pairs {
            service.add_user(user_id(group, pair), group, setup)?;
        }
        for paper in &corpus.bootstrap {
            let doc = ExampleDoc::Url {
                url: paper.url.clone(),
                text: Some(paper.text.clone()),
            };
            service.add_example(group, doc, &paper.topic, ExampleSource::Bootstrap, setup)?;
        }
    }
    let personas: Vec<Persona> = (0..config.pairs)
        .map(|pair| persona(config, &ontology, &corpus.papers, pair))
        .collect();

    let mut acc = MetricAccumulator::new();
    let mut cursor = service.events().len();
    let mut date = config.start;
    for day in 0..config.days {
        date = config.start + Duration::days(day as i64);
        service.run_cycle(Phase::Nightly, date, at(date, 1, 0))?;
        service.run_cycle(Phase::Daily, date, at(date, 2, 0))?;

        for (pair, persona) in personas.iter().enumerate() {
            let mut rng = draw(config.seed, pair, day, Purpose::View, 0);
            if !rng.random_bool(config.view_probability) {
                continue;
            }
            for group in Group::ALL {
                let user = user_id(group, pair);
                let slot = (pair * 2 + group as usize) as i64 * 60;
                react(&mut service, config, &corpus, &by_doc, persona, &user, pair, day, at(date, 9, slot))?;
            }
        }

        for (pair, persona) in personas.iter().enumerate() {
            let mut rng = draw(config.seed, pair, day, Purpose::Browse, 0);
            let mut entries = Vec::new();
            for b in 0..config.browses_per_day {
                let index = if !persona.favourites.is_empty() && rng.random_bool(config.browse_focus) {
                    persona.favourites[rng.random_range(0..persona.favourites.len())]
                } else {
                    rng.random_range(0..corpus.papers.len())
                };
                let paper = &corpus.papers[index];
                for group in Group::ALL {
                    let slot = (pair * 2 + group as usize) as i64 * 60 + b as i64;
                    entries.push(BrowseEntry {
                        user: user_id(group, pair),
                        url: paper.url.clone(),
                        at: at(date, 14, slot),
                        text: Some(paper.text.clone()),
                    });
                }
            }
            // A page that is not a paper; the log filter drops it.
            for group in Group::ALL {
                entries.push(BrowseEntry {
                    user: user_id(group, pair),
                    url: format!("http://www.example.org/news/{day}.html"),
                    at: at(date, 15, pair as i64),
                    text: None,
                });
            }
            service.ingest_browse_log(&entries)?;
        }

        for event in &service.events()[cursor..] {
            acc.push(event)?;
        }
        cursor = service.events().len();
    }

    let report = acc.finish();
    let report_path = dir.join(METRICS_FILE);
    atomic_write(&report_path, report.to_tsv().as_bytes()).map_err(|e| SimError::Invalid(e.to_string()))?;
    Ok(SimOutcome {
        report,
        report_path,
        events: service.events().len(),
        last_day: date,
    })
}

/// One user's reaction to their served set.
#[allow(clippy::too_many_arguments)]
fn react(
    service: &mut Service,
    config: &SimConfig,
    corpus: &Corpus,
    by_doc: &BTreeMap<DocId, usize>,
    persona: &Persona,
    user: &UserId,
    pair: usize,
    day: usize,
    mut now: Timestamp,
) -> Result<(), SimError> {
    let set = service.serve_recommendations(user, now, true)?;
    let mut rated: Vec<&TopicId> = Vec::new();
    for item in &set.items {
        now += Duration::seconds(1);
        let Some(&index) = by_doc.get(&item.doc_id) else {
            continue;
        };
        let truth = &corpus.papers[index].topic;
        let subject = fnv(item.topic.as_str());
        if !rated.contains(&&item.topic) {
            rated.push(&item.topic);
            let mut rng = draw(config.seed, pair, day, Purpose::Rate, subject);
            if rng.random_bool(config.rating_probability) {
                let mut good = persona.affinity(&item.topic) >= config.good_affinity;
                if rng.random_bool(config.rating_noise) {
                    good = !good;
                }
                let kind = if good {
                    FeedbackKind::Interesting
                } else {
                    FeedbackKind::NotInteresting
                };
                service.submit_feedback(user, &item.doc_id, kind, None, now)?;
            }
        }
        let subject = fnv(item.doc_id.as_str());
        let mut rng = draw(config.seed, pair, day, Purpose::Jump, subject);
        if rng.random_bool(0.05 + 0.3 * persona.affinity(truth)) {
            service.submit_feedback(user, &item.doc_id, FeedbackKind::Jump, None, now)?;
        }
        let mut rng = draw(config.seed, pair, day, Purpose::Correct, subject);
        if &item.topic != truth && rng.random_bool(config.correction_probability) {
            service.submit_feedback(user, &item.doc_id, FeedbackKind::Correction, Some(truth.clone()), now)?;
        }
    }
    Ok(())
}
