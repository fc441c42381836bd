//! Privacy-preserving frequent pattern mining over a simulated population of
//! data owners.
//!
//! An analyst repeatedly hands out candidate patterns to data owners. Each
//! owner answers whether a candidate occurs in its local data, perturbs every
//! answer with its share of distributed Pólya noise, and uploads the result
//! through a pairwise-masked aggregation layer. The analyst only ever sees
//! per-candidate sums carrying two-sided geometric noise, decides candidates
//! with confidence bounds, and grows new candidates with the Apriori rule.
//!
//! Module map:
//!
//! * [`patterns`]: items, itemsets and contiguous sequences; Apriori joins and
//!   the exact levelwise miner used as ground truth.
//! * [`privacy`]: Pólya and two-sided geometric distributions.
//! * [`secure_agg`]: simulated pairwise-mask aggregation over `Z/2^64`.
//! * [`owner`]: the data-owner response procedure.
//! * [`analyst`]: candidate pool, confidence-bound filter, assignment planning,
//!   padding and owner reuse.
//! * [`runtime`]: the end-to-end experiment loop and metrics.
//! * [`data`]: text dataset loaders and the synthetic generator.
//! * [`stats`]: chi-square goodness-of-fit helpers used by the statistical
//!   test suites.

pub mod analyst;
pub mod data;
pub mod owner;
pub mod patterns;
pub mod privacy;
pub mod runtime;
pub mod secure_agg;
pub mod seeding;
pub mod stats;

pub use analyst::{AnalystConfig, CandidatePool, CandidateProfile, FilterDecision, Strategy};
pub use data::{SyntheticSpec, TokenMap};
pub use patterns::{LocalData, Pattern, PatternKind, PatternUniverse};
pub use privacy::{NoiseParams, PolyaParams};
pub use runtime::{ExperimentConfig, ExperimentResult, RoundStats};

