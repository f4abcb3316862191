//! k-anonymization by greedy local recoding, and combinatorial refinement
//! attacks that recover record placements from its output.
//!
//! The pipeline is: [`anonymizer::local_recode`] produces classes and
//! suppressed records; [`AnonymizedDataset::release`] gives the view an
//! attacker sees; [`attack::attack_all`] builds one constraint system per
//! class (and one for the suppressed records) and enumerates every integer
//! solution; [`metrics`] counts the plausible datasets before and after the
//! attack; [`fpso`] checks solutions against the raw data and emits
//! singling-out predicates.

pub mod anonymizer;
pub mod attack;
pub mod audit;
pub mod constraints;
pub mod data_io;
pub mod domain;
pub mod enumerator;
pub mod exec;
pub mod fixtures;
pub mod fpso;
pub mod metrics;
pub mod release;

pub use anonymizer::{local_recode, AnonymizedDataset, Anonymizer, Dataset, EquivalenceClass};
pub use attack::{attack_all, build_eq_constraints, build_outlier_constraints, order_classes, Target};
pub use constraints::ConstraintSystem;
pub use domain::{GeneralizationState, Hierarchy, Interval, Node, Segment, SegmentGrid};
pub use enumerator::{enumerate_solutions, Assignment, EnumerationLimits, EnumerationResult};
pub use exec::Execution;
pub use release::Release;
