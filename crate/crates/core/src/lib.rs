//! Trust management for service consumers and providers.
//!
//! * [`trust`]: the pure trust calculus (decay, direct trust, edge weights,
//!   satisfaction, chain and recommended trust, resolution, trust levels).
//! * [`store`]: per-entity Direct Trust and Recommended List tables.
//! * [`chain`]: trust graph, chain discovery and recommendation evaluation.
//! * [`sim`]: deterministic simulation of the trust-gated sharing protocol.

pub mod chain;
pub mod render;
pub mod sim;
pub mod store;
pub mod trust;

pub use chain::{discover_chains, evaluate_recommendation, resolve_in_graph, TrustGraph};
pub use store::{DirectTrustTable, RecommendedListTable, TrustTables};
pub use trust::{classify_level, ResolutionPath, TrustDegree, TrustLevel};
