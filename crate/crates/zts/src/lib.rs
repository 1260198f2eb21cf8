//! Network side of the decision point built on [`zts_core`]:
//!
//! * [`tls`] — mutual TLS configuration and a development PKI;
//! * [`http`] — HTTP/1.1 accept loop and client connection;
//! * [`service`] — the decision point's `/v1` routes;
//! * [`store`] — the network attribute store and its client;
//! * [`client`] — typed decision point client;
//! * [`config`] / [`node`] — configuration and service assembly;
//! * [`harness`] — parallel enforcement-point load generator and reports;
//! * [`eval`] — single-request evaluation with trace rendering;
//! * [`cli`] — the `zts` command line.

pub mod cli;
pub mod client;
pub mod config;
pub mod eval;
pub mod harness;
pub mod http;
pub mod node;
pub mod service;
pub mod store;
pub mod tls;

pub use zts_core;
