//! HTTP API and command-line plumbing around [`quickstep::service::Service`].

pub mod api;
pub mod setup;

pub use api::{router, AppState, Clock, TOKEN_HEADER};
