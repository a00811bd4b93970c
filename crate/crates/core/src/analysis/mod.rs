//! Dependency structure of aggregated histories, the Markov abstraction and
//! non-Markov embedding functors on finite instances, and morphism checks.

mod abstraction;
mod dependency;
mod morphism;
mod report;

pub use abstraction::{
    build_markov_abstraction, build_markov_abstraction_capped, build_nonmarkov_embedding, check_roundtrip,
    verify_equivalence_roundtrip, HistoryMdp, NonMarkovEmbedding, DEFAULT_HISTORY_CAP,
};
pub use dependency::{
    analytical_dependency, empirical_dependency, reachable_histories, EmpiricalDependency, WEIGHT_TOL,
};
pub use morphism::{verify_morphism, Morphism};
pub use report::{DependencyStructure, Report, Violation};
