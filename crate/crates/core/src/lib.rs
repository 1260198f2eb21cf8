//! Score-based zero trust access decisions.
//!
//! The crate is layered bottom-up:
//!
//! * [`opinion`] — binomial subjective-logic opinions and their fusion;
//! * [`attribute`] — trust and risk attributes, weighting functions and the
//!   shipped default catalog;
//! * [`engine`] — the additive and subjective-logic trust algorithms;
//! * [`policy`] — policy storage and resolution;
//! * [`pip`] — attribute values, backing stores and the cold/warm cache;
//! * [`pdp`] — the decision point tying them together, fail-closed.
//!
//! ```
//! use zts_core::opinion::{cumulative_fusion, Opinion};
//!
//! let spl = Opinion::new(0.0, 0.8, 0.2, 0.5).unwrap();
//! assert!((spl.projected_probability() - 0.1).abs() < 1e-12);
//! let twice = cumulative_fusion(&[spl, spl]).unwrap();
//! assert!((twice.uncertainty() - 1.0 / 9.0).abs() < 1e-12);
//! ```

pub mod attribute;
pub mod engine;
pub mod metrics;
pub mod opinion;
pub mod pdp;
pub mod pip;
pub mod policy;
pub mod request;

pub use attribute::{default_catalog, AttributeDefinition, Catalog, Category, Value};
pub use engine::{Algorithm, Decision, Engines, Outcome, Scores, ThresholdMode};
pub use opinion::Opinion;
pub use pdp::{DecisionResponse, ErrorCode, Pdp, PdpConfig};
pub use pip::{BackingStore, CacheMode, MemoryStore, PipStore, SeedData};
pub use policy::{Policy, PolicyStore, Selector};
pub use request::DecisionRequest;
