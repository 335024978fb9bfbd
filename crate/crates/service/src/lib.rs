//! Runtime for the syndromic surveillance pipeline: message sources, the
//! hourly ingestion scheduler, alert recomputation and the HTTP API.

pub mod api;
pub mod config;
pub mod corpus;
pub mod runtime;
pub mod scheduler;
pub mod source;
pub mod synthetic;
