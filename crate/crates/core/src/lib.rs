//! Neuro-symbolic link prediction over knowledge graphs.
//!
//! Horn rules mined from the training graph are grounded to answer
//! `(h, r, ?)` queries, optionally filtered by NLI plausibility scores, and
//! fused with a neural model's entity scores. Rankings are evaluated in the
//! filtered setting and every rule-backed answer can be explained in plain
//! language.
//!
//! | module | role |
//! | --- | --- |
//! | [`kg`] | vocabulary, splits, adjacency indexes |
//! | [`rules`] | rule parsing, confidence, constant-rule elimination, grouping |
//! | [`apply`] | grounding and logical entity scores |
//! | [`sentence`] | rule to sentence conversion and explanations |
//! | [`filter`] | NLI-based rule filtering |
//! | [`fusion`] | neural/logical score fusion and per-relation mode tuning |
//! | [`eval`] | filtered Hits@N, MRR and reports |
//! | [`pipeline`] | file-based stages driven by a config |

pub mod apply;
pub mod eval;
pub mod filter;
pub mod fusion;
pub mod interchange;
pub mod kg;
pub mod pipeline;
pub mod rules;
pub mod sentence;

pub use apply::{entity_score, ground_rule, logical_answers, Query, ScoredCandidates};
pub use eval::{aggregate, filtered_rank, Metrics};
pub use fusion::{combine, FusionMode, RankedAnswers};
pub use kg::{EntityId, IndexedKg, RelationId, Split, Triple, Vocabulary};
pub use rules::{Rule, RuleId, RuleSet};
