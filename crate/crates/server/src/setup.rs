use std::path::Path;

use anyhow::{Context, Result};

use quickstep::config::Config;
use quickstep::fetch::{DirFetcher, Fetcher, NoFetcher};
use quickstep::service::Service;
use quickstep::store::Durability;
use quickstep::taxonomy::{Taxonomy, TaxonomyMode, SAMPLE_HIERARCHY};

pub fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(Config::default()),
    }
}

pub fn fetcher(config: &Config) -> Box<dyn Fetcher> {
    match &config.fetch_dir {
        Some(dir) => Box::new(DirFetcher::new(dir)),
        None => Box::new(NoFetcher),
    }
}

/// Creates a data directory. The flat group gets the hierarchy's topics
/// as a single level.
pub fn init(data: &Path, config: Config, taxonomy: Option<&Path>) -> Result<Service> {
    let text = match taxonomy {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => SAMPLE_HIERARCHY.to_owned(),
    };
    let ontology = Taxonomy::parse(&text, TaxonomyMode::Hierarchical).context("parsing taxonomy")?;
    let fetch = fetcher(&config);
    Service::init(data, config, &ontology.flattened(), &ontology, fetch, Durability::Sync)
        .with_context(|| format!("initialising {}", data.display()))
}

pub fn open(data: &Path, config: Config) -> Result<Service> {
    let fetch = fetcher(&config);
    Service::open(data, config, fetch, Durability::Sync)
        .with_context(|| format!("opening {}", data.display()))
}
