//! TOML configuration. Every key is optional; see [`Config::default`].
//!
//! ```toml
//! k = 1
//! boost_rounds = 10
//! seed = 0
//! n_recommendations = 10
//! n_topics = 3
//! recommend_cooldown_days = 30        # omit to never re-recommend
//! accepted_suffixes = [".ps", ".pdf", ".ps.gz", ".ps.Z", ".pdf.gz"]
//! stoplist = "stop.txt"               # omit for the bundled SMART list
//! fetch_dir = "corpus"                # plain-text fetch adapter directory
//! token = "secret"                    # omit to disable the auth header
//!
//! [profile]
//! decay_rate = 1.0
//! ontology_propagation = 0.5
//! flat_propagation = 0.0
//!
//! [profile.weights]
//! browsed = 1.0
//! jump = 2.0
//! rated_interesting = 10.0
//! rated_not_interesting = -10.0
//! correction = 1.0
//! recommended_seen = 0.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{DEFAULT_K, DEFAULT_ROUNDS};
use crate::profiler::{ProfileConfig, DEFAULT_TOP_TOPICS};
use crate::recommender::DEFAULT_RECOMMENDATIONS;
use crate::textpipe::{Stoplist, DEFAULT_ACCEPTED_SUFFIXES};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub k: usize,
    pub boost_rounds: usize,
    pub seed: u64,
    pub n_recommendations: usize,
    pub n_topics: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recommend_cooldown_days: Option<u32>,
    pub accepted_suffixes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stoplist: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fetch_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    pub profile: ProfileConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            boost_rounds: DEFAULT_ROUNDS,
            seed: 0,
            n_recommendations: DEFAULT_RECOMMENDATIONS,
            n_topics: DEFAULT_TOP_TOPICS,
            recommend_cooldown_days: None,
            accepted_suffixes: DEFAULT_ACCEPTED_SUFFIXES.iter().map(|s| s.to_string()).collect(),
            stoplist: None,
            fetch_dir: None,
            token: None,
            profile: ProfileConfig::default(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Loads a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.stoplist, &mut config.fetch_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_owned()));
        if !(1..=9).contains(&self.k) {
            return invalid("k must be between 1 and 9");
        }
        if self.boost_rounds == 0 {
            return invalid("boost_rounds must be at least 1");
        }
        if self.n_recommendations == 0 || self.n_topics == 0 {
            return invalid("n_recommendations and n_topics must be at least 1");
        }
        let p = &self.profile;
        let weights = &p.weights;
        let all = [
            p.decay_rate,
            p.ontology_propagation,
            p.flat_propagation,
            weights.browsed,
            weights.jump,
            weights.rated_interesting,
            weights.rated_not_interesting,
            weights.correction,
            weights.recommended_seen,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return invalid("profile constants must be finite");
        }
        if p.decay_rate < 0.0 {
            return invalid("decay_rate must be non-negative");
        }
        if !(0.0..=1.0).contains(&p.ontology_propagation) || !(0.0..=1.0).contains(&p.flat_propagation)
        {
            return invalid("propagation factors must be in [0, 1]");
        }
        if self.accepted_suffixes.iter().any(|s| s.is_empty()) {
            return invalid("accepted suffixes must be non-empty");
        }
        Ok(())
    }

    pub fn load_stoplist(&self) -> Result<Stoplist, ConfigError> {
        match &self.stoplist {
            None => Ok(Stoplist::smart()),
            Some(path) => Stoplist::load(path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            }),
        }
    }
}
