//! Core library of the quickstep recommender: text vectors, topic
//! taxonomies, the boosted kNN classifier, interest profiles,
//! recommendations, file-backed storage, the service layer and the
//! evaluation toolkit.

pub mod classifier;
pub mod error;
pub mod ids;
pub mod taxonomy;
pub mod textpipe;
pub mod config;
pub mod profiler;
pub mod recommender;
pub mod store;
pub mod fetch;
pub mod service;
pub mod evalkit;
