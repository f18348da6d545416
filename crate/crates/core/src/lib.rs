//! Cross-domain architecture search over positional digit codes.
//!
//! Architectures from any search space are written as [`NCode`]s, one digit
//! per configurable dimension. On top of that encoding the crate provides:
//!
//! - [`prune`]: random subspace carving for training-data diversity,
//! - [`trajectory`]: instruction-tuning samples (history, candidates, answer)
//!   and their prompt rendering,
//! - [`rank`]: candidate selection policies, including a chat-completion
//!   backed ranker,
//! - [`search`]: the iterative ranking loop, random search and regularized
//!   evolution baselines, and shuffle/provenance instrumentation,
//! - [`eval`]: tabular, synthetic and external-command evaluators.

pub mod eval;
pub mod prune;
pub mod rank;
pub mod record;
pub mod rng;
pub mod search;
pub mod space;
pub mod stats;
#[cfg(any(test, feature = "testing"))]
pub mod testing;
pub mod trajectory;

pub use eval::{enumerate_optimum, EvalError, Evaluator, EvaluatorSpec};
pub use prune::{prune_space, PruneConfig, Subspace};
pub use rank::{RankDecision, Ranker, RankerSpec};
pub use record::{canonical_performance, ArchRecord, Direction, Provenance};
pub use search::{run_search, SearchConfig, SearchTrace};
pub use space::{Dimension, NCode, SearchSpace};
pub use trajectory::{GenConfig, TrajectorySample};
