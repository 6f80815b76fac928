//! Adapters that supply the plain text of a paper given its URL.

use std::collections::HashMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::ids::DocId;

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("no text available for {0}")]
    NotFound(String),
    #[error("{url}: {source}")]
    Io {
        url: String,
        #[source]
        source: std::io::Error,
    },
}

pub trait Fetcher: Send + Sync {
    fn fetch(&self, url: &str) -> Result<String, FetchError>;
}

/// Refuses everything; text must arrive with the request.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoFetcher;

impl Fetcher for NoFetcher {
    fn fetch(&self, url: &str) -> Result<String, FetchError> {
        Err(FetchError::NotFound(url.to_owned()))
    }
}

/// Texts held in memory, keyed by URL.
#[derive(Clone, Debug, Default)]
pub struct MapFetcher {
    texts: HashMap<String, String>,
}

impl MapFetcher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, url: impl Into<String>, text: impl Into<String>) {
        self.texts.insert(url.into(), text.into());
    }
}

impl Fetcher for MapFetcher {
    fn fetch(&self, url: &str) -> Result<String, FetchError> {
        self.texts
            .get(url)
            .cloned()
            .ok_or_else(|| FetchError::NotFound(url.to_owned()))
    }
}

/// Pre-extracted texts in a directory. A URL resolves to
/// `<dir>/<doc id of url>.txt`, falling back to `<dir>/<last path segment>.txt`.
#[derive(Clone, Debug)]
pub struct DirFetcher {
    dir: PathBuf,
}

impl DirFetcher {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl Fetcher for DirFetcher {
    fn fetch(&self, url: &str) -> Result<String, FetchError> {
        let path = url.split(['?', '#']).next().unwrap_or("");
        let segment = path.rsplit('/').next().unwrap_or("");
        let mut candidates = vec![self.dir.join(format!("{}.txt", DocId::for_url(url)))];
        if !segment.is_empty() && segment != "." && segment != ".." {
            candidates.push(self.dir.join(format!("{segment}.txt")));
        }
        for candidate in candidates {
            match std::fs::read_to_string(&candidate) {
                Ok(text) => return Ok(text),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
                Err(source) => {
                    return Err(FetchError::Io {
                        url: url.to_owned(),
                        source,
                    })
                }
            }
        }
        Err(FetchError::NotFound(url.to_owned()))
    }
}
